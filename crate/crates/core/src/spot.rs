//! Quasi-direct-drive actuator model with magnet saturation, rotor inertia,
//! friction and work-dependent efficiency, plus a whole-robot power limiter
//! and efficiency identification from logs.

use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cast, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorParams<T: Real> {
    /// Saturation derating in 1/(N·m).
    pub k: T,
    /// Reflected rotor inertia in kg·m².
    pub rotor_inertia: T,
    /// Coulomb friction in N·m.
    pub coulomb: T,
    /// tanh smoothing in s/rad.
    pub smoothing: T,
    /// Viscous friction in N·m·s/rad.
    pub viscous: T,
    /// Efficiency while the motor does positive work.
    pub eta_plus: T,
    /// Efficiency while the motor is back-driven.
    pub eta_minus: T,
    /// Output filter cutoff in Hz.
    pub cutoff_hz: T,
    /// Half-width in rad/s of the band where the work sign is held.
    pub hysteresis: T,
}

impl<T: Real> Default for ActuatorParams<T> {
    fn default() -> Self {
        Self {
            k: cast(0.002),
            rotor_inertia: cast(0.02),
            coulomb: cast(0.5),
            smoothing: cast(20.0),
            viscous: cast(0.05),
            eta_plus: cast(0.9),
            eta_minus: cast(0.8),
            cutoff_hz: cast(100.0),
            hysteresis: cast(0.01),
        }
    }
}

impl<T: Real> ActuatorParams<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.k,
            self.rotor_inertia,
            self.coulomb,
            self.smoothing,
            self.viscous,
            self.hysteresis,
        ];
        if nonneg.iter().any(|&x| !(x >= T::zero())) {
            return Err(Error::InvalidParameter(
                "actuator constants must be non-negative".into(),
            ));
        }
        for eta in [self.eta_plus, self.eta_minus] {
            if !(eta > T::zero() && eta <= T::one()) {
                return Err(Error::InvalidParameter(
                    "efficiencies must lie in (0, 1]".into(),
                ));
            }
        }
        if !(self.cutoff_hz > T::zero()) {
            return Err(Error::InvalidParameter(
                "filter cutoff must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn efficiency(&self, sign: WorkSign) -> T {
        match sign {
            WorkSign::Positive => self.eta_plus,
            WorkSign::Negative => self.eta_minus,
        }
    }

    /// Torque before losses: saturated command minus rotor inertial torque.
    pub fn pre_loss(&self, tau_in: T, alpha: T) -> T {
        saturate(tau_in, self.k) - self.rotor_inertia * alpha
    }

    /// Coulomb plus viscous friction torque (opposes `omega`).
    pub fn friction(&self, omega: T) -> T {
        -self.coulomb * (self.smoothing * omega).tanh() - self.viscous * omega
    }
}

/// `τ / (1 + k|τ|)`.
pub fn saturate<T: Real>(tau_in: T, k: T) -> T {
    tau_in / (T::one() + k * tau_in.abs())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkSign {
    #[default]
    Positive,
    Negative,
}

/// Work sign of `tau_pre · omega`, holding `prev` while `|omega|` is inside
/// the hysteresis band or the torque is zero.
pub fn work_sign<T: Real>(tau_pre: T, omega: T, prev: WorkSign, band: T) -> WorkSign {
    if omega.abs() <= band || tau_pre == T::zero() {
        return prev;
    }
    if tau_pre * omega > T::zero() {
        WorkSign::Positive
    } else {
        WorkSign::Negative
    }
}

/// Unfiltered output torque and the work sign used.
pub fn actuator_output<T: Real>(
    tau_in: T,
    omega: T,
    alpha: T,
    params: &ActuatorParams<T>,
    prev: WorkSign,
) -> (T, WorkSign) {
    let pre = params.pre_loss(tau_in, alpha);
    let sign = work_sign(pre, omega, prev, params.hysteresis);
    (params.efficiency(sign) * pre + params.friction(omega), sign)
}

/// First-order low-pass filter `y += a (x - y)` with `a = dt / (dt + RC)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowPass<T: Real> {
    pub state: T,
    a: T,
}

impl<T: Real> LowPass<T> {
    pub fn new(cutoff_hz: T, dt: T) -> Self {
        let rc = T::one() / (T::two_pi() * cutoff_hz);
        Self {
            state: T::zero(),
            a: dt / (dt + rc),
        }
    }

    pub fn apply(&mut self, x: T) -> T {
        self.state += self.a * (x - self.state);
        self.state
    }
}

/// One simulated actuator: the model plus its filter and work-sign memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Actuator<T: Real> {
    pub params: ActuatorParams<T>,
    sign: WorkSign,
    filter: LowPass<T>,
}

impl<T: Real> Actuator<T> {
    pub fn new(params: ActuatorParams<T>, dt: T) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            filter: LowPass::new(params.cutoff_hz, dt),
            params,
            sign: WorkSign::Positive,
        })
    }

    pub fn reset(&mut self) {
        self.sign = WorkSign::Positive;
        self.filter.state = T::zero();
    }

    pub fn step(&mut self, tau_in: T, omega: T, alpha: T) -> T {
        let (tau, sign) = actuator_output(tau_in, omega, alpha, &self.params, self.sign);
        self.sign = sign;
        self.filter.apply(tau)
    }
}

/// Per-actuator torque and speed submitted to the power limiter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRequest<T: Real> {
    pub tau: T,
    pub omega: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLimitParams<T: Real> {
    /// Total budget in W.
    pub budget: T,
    /// Resistive loss coefficient in W/(N·m)².
    pub resistive: T,
    /// Loss drawn at zero torque in W.
    pub idle_loss: T,
}

impl<T: Real> PowerLimitParams<T> {
    /// Budget with the resistive coefficient taken numerically from the
    /// actuator's viscous constant and no idle loss.
    pub fn for_actuator(budget: T, actuator: &ActuatorParams<T>) -> Self {
        Self {
            budget,
            resistive: actuator.viscous,
            idle_loss: T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerLimited<T: Real> {
    pub torques: Vec<T>,
    /// Scale applied to motoring actuators.
    pub motoring_scale: T,
    /// Scale applied to the remaining actuators.
    pub other_scale: T,
    /// Even zero torque exceeds the budget; every torque was zeroed.
    pub infeasible: bool,
}

/// `Σ max(τω, 0) + r Σ τ² + idle`.
pub fn demanded_power<T: Real>(
    torques: &[T],
    requests: &[PowerRequest<T>],
    params: &PowerLimitParams<T>,
) -> T {
    torques
        .iter()
        .zip(requests)
        .fold(params.idle_loss, |acc, (&t, r)| {
            acc + (t * r.omega).max(T::zero()) + params.resistive * t * t
        })
}

fn bisect_scale<T: Real>(f: impl Fn(T) -> T, budget: T) -> T {
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..200 {
        let mid = (lo + hi) * cast(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Scales torques down until the demanded power fits the budget.
///
/// Motoring actuators (`τω > 0`) are scaled first by one common factor. If
/// that is not enough they are zeroed and the rest share a second factor.
/// This is a stand-in for a proprietary limiter, not a reproduction of it.
pub fn power_limit<T: Real>(
    requests: &[PowerRequest<T>],
    params: &PowerLimitParams<T>,
) -> Result<PowerLimited<T>> {
    if !(params.budget > T::zero()) || params.resistive < T::zero() || params.idle_loss < T::zero()
    {
        return Err(Error::InvalidParameter(
            "power budget must be positive and losses non-negative".into(),
        ));
    }
    let tau: Vec<T> = requests.iter().map(|r| r.tau).collect();
    let unchanged = PowerLimited {
        torques: tau.clone(),
        motoring_scale: T::one(),
        other_scale: T::one(),
        infeasible: false,
    };
    if demanded_power(&tau, requests, params) <= params.budget {
        return Ok(unchanged);
    }
    if params.idle_loss > params.budget {
        return Ok(PowerLimited {
            torques: vec![T::zero(); tau.len()],
            motoring_scale: T::zero(),
            other_scale: T::zero(),
            infeasible: true,
        });
    }
    let motoring: Vec<bool> = requests
        .iter()
        .map(|r| r.tau * r.omega > T::zero())
        .collect();
    let scaled = |s_mot: T, s_other: T| -> Vec<T> {
        tau.iter()
            .zip(&motoring)
            .map(|(&t, &m)| if m { t * s_mot } else { t * s_other })
            .collect()
    };
    let power = |s_mot: T, s_other: T| demanded_power(&scaled(s_mot, s_other), requests, params);
    let (s_mot, s_other) = if power(T::zero(), T::one()) <= params.budget {
        (
            bisect_scale(|s| power(s, T::one()), params.budget),
            T::one(),
        )
    } else {
        (
            T::zero(),
            bisect_scale(|s| power(T::zero(), s), params.budget),
        )
    };
    Ok(PowerLimited {
        torques: scaled(s_mot, s_other),
        motoring_scale: s_mot,
        other_scale: s_other,
        infeasible: false,
    })
}

/// One logged actuator sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuatorSample {
    pub t: f64,
    pub tau_in: f64,
    pub omega: f64,
    pub alpha: f64,
    pub tau_out: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFit {
    /// `None` when no positive-work samples were present.
    pub eta_plus: Option<f64>,
    pub eta_minus: Option<f64>,
    pub samples_plus: usize,
    pub samples_minus: usize,
    /// Sum of squared torque residuals in (N·m)².
    pub residual: f64,
    pub warnings: Vec<String>,
}

/// Least-squares efficiencies given the other actuator constants.
///
/// Each sample reduces to `τ_out − friction(ω) = η · pre_loss(τ_in, α)`, a
/// one-parameter regression per work-sign class. Classes are assigned with the
/// same hysteresis rule the model uses, in log order.
pub fn fit_efficiency(
    log: &[ActuatorSample],
    params: &ActuatorParams<f64>,
) -> Result<EfficiencyFit> {
    let mut sxy = [0.0; 2];
    let mut sxx = [0.0; 2];
    let mut count = [0usize; 2];
    let mut prev = WorkSign::Positive;
    let mut rows = Vec::with_capacity(log.len());
    for s in log {
        let x = params.pre_loss(s.tau_in, s.alpha);
        let y = s.tau_out - params.friction(s.omega);
        let sign = work_sign(x, s.omega, prev, params.hysteresis);
        prev = sign;
        let c = sign as usize;
        sxy[c] += x * y;
        sxx[c] += x * x;
        count[c] += 1;
        rows.push((c, x, y));
    }
    let scale = sxx.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(scale > 0.0) {
        return Err(Error::DegenerateFit(
            "no torque excitation in the log".into(),
        ));
    }
    let mut warnings = Vec::new();
    let mut eta = [None, None];
    for (c, name) in [(0, "positive"), (1, "negative")] {
        if sxx[c] > 1e-12 * scale {
            eta[c] = Some((sxy[c] / sxx[c]).clamp(1e-6, 1.0));
        } else {
            let msg = format!("no {name}-work samples; efficiency left unfitted");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let residual = rows
        .iter()
        .map(|&(c, x, y)| {
            let e = eta[c].map_or(0.0, |e| e * x - y);
            e * e
        })
        .sum();
    Ok(EfficiencyFit {
        eta_plus: eta[0],
        eta_minus: eta[1],
        samples_plus: count[0],
        samples_minus: count[1],
        residual,
        warnings,
    })
}

/// Reads a `t,tau_in,omega,alpha,tau_out` CSV log.
pub fn read_actuator_log<R: Read>(reader: R) -> Result<Vec<ActuatorSample>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let expected = ["t", "tau_in", "omega", "alpha", "tau_out"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::InvalidParameter(format!(
            "actuator log header must be {}",
            expected.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Ranges the efficiencies are drawn from per episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyRanges {
    pub eta_plus: [f64; 2],
    pub eta_minus: [f64; 2],
}

impl Default for EfficiencyRanges {
    fn default() -> Self {
        Self {
            eta_plus: [0.8, 1.0],
            eta_minus: [0.6, 0.9],
        }
    }
}

impl EfficiencyRanges {
    pub fn sample<T: Real, R: Rng + ?Sized>(
        &self,
        base: &ActuatorParams<T>,
        rng: &mut R,
    ) -> ActuatorParams<T> {
        let draw = |r: [f64; 2], rng: &mut R| {
            if r[1] > r[0] {
                rng.random_range(r[0]..=r[1])
            } else {
                r[0]
            }
        };
        let mut p = *base;
        p.eta_plus = cast(draw(self.eta_plus, rng));
        p.eta_minus = cast(draw(self.eta_minus, rng));
        p
    }
}
