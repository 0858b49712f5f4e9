//! Sinusoidal tracking protocol comparing the approximations to the exact model.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::models::{ModelContext, PlaModel};
use super::system::PlaSystem;
use crate::error::{Error, Result};
use crate::rbd::mass_matrix;
use crate::scalar::{cast, to_f64, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    /// Excitation frequency in Hz.
    pub frequency: f64,
    /// Amplitude as a fraction of each output's half range.
    pub amplitude_fraction: f64,
    /// Seconds simulated.
    pub duration: f64,
    /// Integration step in seconds.
    pub dt: f64,
    /// Phase offset per output joint in radians; missing entries are zero.
    #[serde(default)]
    pub phases: Vec<f64>,
    /// Closed-loop natural frequency of the PD tracker in rad/s.
    pub tracker_bandwidth: f64,
    /// Acceleration norm floor used in the per-step normalization.
    pub normalization_floor: f64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            frequency: 5.0,
            amplitude_fraction: 0.5,
            duration: 2.0,
            dt: 5e-4,
            phases: vec![0.0, PI / 2.0],
            tracker_bandwidth: 60.0,
            normalization_floor: 0.1,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        let ok = self.frequency > 0.0
            && self.amplitude_fraction > 0.0
            && self.amplitude_fraction <= 1.0
            && self.duration > 0.0
            && self.dt > 0.0
            && self.dt < self.duration
            && self.tracker_bandwidth > 0.0
            && self.normalization_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "evaluation protocol out of range".into(),
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelErrorRow {
    pub model: PlaModel,
    pub joint: String,
    /// Mean over steps of the squared normalized acceleration error.
    pub normalized_mse: f64,
    /// The simulation blew up before the end; the MSE covers the steps before.
    pub diverged: bool,
}

struct Tracker<T: Real> {
    kp: DVector<T>,
    kd: DVector<T>,
    center: Vec<f64>,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
    omega: f64,
}

impl<T: Real> Tracker<T> {
    fn new(sys: &PlaSystem<T>, protocol: &EvalProtocol) -> Result<Self> {
        let main = sys.main();
        let q0 = DVector::zeros(main.nq());
        let mut inertia = mass_matrix(main, &q0)?.diagonal();
        let d_bar = &sys.nominal_armature().d_o;
        for (k, &d) in sys.output_dofs().iter().enumerate() {
            inertia[d] += d_bar[(k, k)];
        }
        let wn: T = cast(protocol.tracker_bandwidth);
        let kp = inertia.map(|i| i * wn * wn);
        let kd = inertia.map(|i| cast::<T>(2.0) * i * wn);
        let mut center = Vec::new();
        let mut amplitude = Vec::new();
        let mut phase = Vec::new();
        for (k, &d) in sys.output_dofs().iter().enumerate() {
            let lim = main.joints()[d].limits;
            let (lo, hi) = (to_f64(lim.q_min), to_f64(lim.q_max));
            if !(hi - lo).is_finite() || hi - lo > 100.0 {
                return Err(Error::InvalidParameter(format!(
                    "output joint {d} needs finite position limits"
                )));
            }
            center.push(0.5 * (lo + hi));
            amplitude.push(protocol.amplitude_fraction * 0.5 * (hi - lo));
            phase.push(protocol.phases.get(k).copied().unwrap_or(0.0));
        }
        Ok(Self {
            kp,
            kd,
            center,
            amplitude,
            phase,
            omega: 2.0 * PI * protocol.frequency,
        })
    }

    /// Desired main-chain position and velocity; passive joints hold zero.
    fn reference(&self, sys: &PlaSystem<T>, t: f64) -> (DVector<T>, DVector<T>) {
        let n = sys.main().nv();
        let mut q = DVector::zeros(n);
        let mut qd = DVector::zeros(n);
        for (k, &d) in sys.output_dofs().iter().enumerate() {
            let arg = self.omega * t + self.phase[k];
            q[d] = cast(self.center[k] + self.amplitude[k] * arg.sin());
            qd[d] = cast(self.amplitude[k] * self.omega * arg.cos());
        }
        (q, qd)
    }

    fn torque(&self, sys: &PlaSystem<T>, t: f64, q: &DVector<T>, qd: &DVector<T>) -> DVector<T> {
        let (q_ref, qd_ref) = self.reference(sys, t);
        (q_ref - q).component_mul(&self.kp) + (qd_ref - qd).component_mul(&self.kd)
    }
}

/// Output accelerations of one model over the protocol, or the steps
/// completed before divergence.
fn simulate<T: Real>(
    sys: &PlaSystem<T>,
    model: PlaModel,
    tracker: &Tracker<T>,
    protocol: &EvalProtocol,
) -> (Vec<DVector<f64>>, bool) {
    let steps = (protocol.duration / protocol.dt).round() as usize;
    let dt: T = cast(protocol.dt);
    let (mut q, mut qd) = tracker.reference(sys, 0.0);
    let mut ctx = ModelContext::new(sys);
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * protocol.dt;
        let tau = tracker.torque(sys, t, &q, &qd);
        let qdd = match sys.accelerations(model, &q, &qd, &tau, &mut ctx) {
            Ok(a) if a.iter().all(|v| v.is_finite()) => a,
            _ => return (out, true),
        };
        out.push(sys.outputs_of(&qdd).map(to_f64));
        qd += qdd * dt;
        q += &qd * dt;
    }
    (out, false)
}

/// Per-model, per-output normalized MSE against the exact model, each model
/// simulated independently under the same PD tracker.
pub fn evaluate_model_errors<T: Real>(
    sys: &PlaSystem<T>,
    protocol: &EvalProtocol,
) -> Result<Vec<ModelErrorRow>> {
    protocol.validate()?;
    let tracker = Tracker::new(sys, protocol)?;
    let runs: Vec<(Vec<DVector<f64>>, bool)> = std::thread::scope(|s| {
        let handles: Vec<_> = PlaModel::ALL
            .iter()
            .map(|&m| {
                let tracker = &tracker;
                s.spawn(move || simulate(sys, m, tracker, protocol))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("model simulation thread panicked"))
            .collect()
    });
    let (exact, exact_diverged) = &runs[0];
    if *exact_diverged {
        return Err(Error::Numerical(format!(
            "exact model diverged after {} steps",
            exact.len()
        )));
    }
    let names: Vec<String> = sys
        .output_dofs()
        .iter()
        .map(|&d| sys.main().joints()[d].name.clone())
        .collect();
    let mut rows = Vec::new();
    for (&model, (acc, diverged)) in PlaModel::ALL.iter().zip(&runs) {
        for (j, name) in names.iter().enumerate() {
            let mut sum = 0.0;
            for (a, e) in acc.iter().zip(exact) {
                let norm = e.norm().max(protocol.normalization_floor);
                let err = (a[j] - e[j]) / norm;
                sum += err * err;
            }
            let n = acc.len().max(1) as f64;
            rows.push(ModelErrorRow {
                model,
                joint: name.clone(),
                normalized_mse: if *diverged && acc.is_empty() {
                    f64::NAN
                } else {
                    sum / n
                },
                diverged: *diverged,
            });
        }
    }
    Ok(rows)
}

pub const MODEL_ERROR_CSV_HEADER: [&str; 4] = ["model", "joint", "normalized_mse", "diverged"];

pub fn write_model_errors_csv<W: Write>(rows: &[ModelErrorRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MODEL_ERROR_CSV_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.model.label().to_string(),
            r.joint.clone(),
            format!("{:e}", r.normalized_mse),
            r.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
