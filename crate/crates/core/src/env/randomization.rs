//! Domain randomization draws and base pushes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainRandomization {
    pub enabled: bool,
    pub static_friction: [f64; 2],
    pub dynamic_friction: [f64; 2],
    pub restitution: [f64; 2],
    pub mass_scale: [f64; 2],
    /// Time between pushes, s.
    pub push_interval: [f64; 2],
    /// Planar base velocity change per push, m/s.
    pub push_speed: f64,
}

impl Default for DomainRandomization {
    fn default() -> Self {
        Self {
            enabled: false,
            static_friction: [0.6, 1.0],
            dynamic_friction: [0.5, 0.9],
            restitution: [0.0, 0.2],
            mass_scale: [0.9, 1.1],
            push_interval: [0.0, 10.0],
            push_speed: 0.5,
        }
    }
}

/// One impulsive push: a world-frame planar velocity change.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Push {
    pub time: f64,
    pub dv: [f64; 2],
}

/// Realized episode parameters. Friction and restitution are carried for
/// contact-capable backends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSample {
    pub static_friction: f64,
    pub dynamic_friction: f64,
    pub restitution: f64,
    pub mass_scales: Vec<f64>,
    pub pushes: Vec<Push>,
}

impl DomainSample {
    pub fn nominal(n_links: usize) -> Self {
        Self {
            static_friction: 1.0,
            dynamic_friction: 1.0,
            restitution: 0.0,
            mass_scales: vec![1.0; n_links],
            pushes: Vec::new(),
        }
    }
}

fn uniform<R: Rng + ?Sized>(r: [f64; 2], rng: &mut R) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

impl DomainRandomization {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.static_friction,
            self.dynamic_friction,
            self.restitution,
            self.mass_scale,
            self.push_interval,
        ];
        let ok = ranges
            .iter()
            .all(|r| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && r[0] >= 0.0)
            && self.mass_scale[0] > 0.0
            && self.push_speed >= 0.0
            && self.push_speed.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "randomization ranges out of order".into(),
            ))
        }
    }

    /// Draws per-episode parameters and the push schedule over `horizon_s`.
    /// Disabled randomization returns the nominal sample without touching
    /// the RNG.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n_links: usize,
        horizon_s: f64,
        rng: &mut R,
    ) -> DomainSample {
        if !self.enabled {
            return DomainSample::nominal(n_links);
        }
        let static_friction = uniform(self.static_friction, rng);
        let dynamic_friction = uniform(self.dynamic_friction, rng);
        let restitution = uniform(self.restitution, rng);
        let mass_scales = (0..n_links)
            .map(|_| uniform(self.mass_scale, rng))
            .collect();
        let mut pushes = Vec::new();
        let mut t = 0.0;
        // A zero-width interval at zero would never advance.
        if self.push_speed > 0.0 && self.push_interval[1] > 0.0 {
            loop {
                t += uniform(self.push_interval, rng);
                if t >= horizon_s {
                    break;
                }
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                pushes.push(Push {
                    time: t,
                    dv: [self.push_speed * a.cos(), self.push_speed * a.sin()],
                });
            }
        }
        DomainSample {
            static_friction,
            dynamic_friction,
            restitution,
            mass_scales,
            pushes,
        }
    }
}
