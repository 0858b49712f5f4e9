//! Adaptive reference-state initialization: trajectories are cut into fixed
//! time bins, each bin keeps an EMA failure level, and reset states are drawn
//! from a floor-smoothed softmax over those levels.
//!
//! Probabilities are kept in `f64` whatever scalar the dynamics use.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Durations in seconds of the fifteen-clip motion library used for sizing
/// experiments.
pub const MOTION_LIBRARY: [(&str, f64); 15] = [
    ("army_crawl", 16.633333206176758),
    ("dance", 9.333240509033203),
    ("stylish_walk", 11.533218383789062),
    ("soccer_kick", 6.633267402648926),
    ("breakdance", 8.300000190734863),
    ("cartwheel", 5.9666666984558105),
    ("crouch_walk", 8.633333206176758),
    ("crawl_on_all_fours", 15.050000190734863),
    ("deep_squat", 2.991666555404663),
    ("animated_walk", 7.483333110809326),
    ("kneeling", 8.383333206176758),
    ("run", 6.474999904632568),
    ("lightsaber_routine", 9.399999618530273),
    ("cartwheel_backflip", 5.866666793823242),
    ("roll_on_all_fours", 8.800000190734863),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMeta {
    pub name: String,
    pub duration_s: f64,
    /// Number of control steps, `round(duration_s / control_dt)`.
    pub length: usize,
}

impl TrajectoryMeta {
    pub fn new(name: impl Into<String>, duration_s: f64, control_dt: f64) -> Result<Self> {
        if !(duration_s > 0.0 && duration_s.is_finite()) || !(control_dt > 0.0) {
            return Err(Error::InvalidParameter(
                "trajectory duration and control step must be positive".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            duration_s,
            length: (duration_s / control_dt).round() as usize,
        })
    }
}

/// The built-in motion library at `control_dt`.
pub fn motion_library(control_dt: f64) -> Result<Vec<TrajectoryMeta>> {
    MOTION_LIBRARY
        .iter()
        .map(|&(name, d)| TrajectoryMeta::new(name, d, control_dt))
        .collect()
}

/// Parses a `[{"name", "duration_s", "length"}]` manifest.
pub fn read_manifest(text: &str) -> Result<Vec<TrajectoryMeta>> {
    let metas: Vec<TrajectoryMeta> = serde_json::from_str(text)?;
    if metas.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if metas
        .iter()
        .any(|m| !(m.duration_s > 0.0 && m.duration_s.is_finite()))
    {
        return Err(Error::InvalidParameter(
            "trajectory durations must be positive".into(),
        ));
    }
    Ok(metas)
}

/// `min(4 s, shortest duration)`.
pub fn default_bin_width(metas: &[TrajectoryMeta]) -> Result<f64> {
    metas
        .iter()
        .map(|m| m.duration_s)
        .reduce(f64::min)
        .map(|d| d.min(4.0))
        .ok_or(Error::EmptyLibrary)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerParams {
    /// EMA factor.
    pub alpha: f64,
    pub tau_base: f64,
    /// Uniform floor weight.
    pub epsilon: f64,
    /// Failure level given to every bin before any episode finished.
    pub initial_failure: f64,
    /// Bin width in seconds; `None` uses [`default_bin_width`].
    #[serde(default)]
    pub bin_width: Option<f64>,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            alpha: 0.005,
            tau_base: 1.0,
            epsilon: 0.15,
            initial_failure: 1.0,
            bin_width: None,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha < 1.0
            && self.tau_base > 0.0
            && (0.0..=1.0).contains(&self.epsilon)
            && (0.0..=1.0).contains(&self.initial_failure)
            && self.bin_width.is_none_or(|w| w > 0.0 && w.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "sampler parameters out of range".into(),
            ))
        }
    }
}

/// Per-(trajectory, bin) failure levels over a library.
#[derive(Clone, Debug, PartialEq)]
pub struct BinTable {
    pub bin_width: f64,
    pub num_bins: usize,
    pub durations: Vec<f64>,
    pub params: SamplerParams,
    /// Row-major `N × B`; `-inf` off the valid set.
    failure: Vec<f64>,
    visits: Vec<u64>,
    valid: Vec<(usize, usize)>,
}

/// Result of one finished episode, attributed to the bin it started in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub trajectory: usize,
    pub bin: usize,
    pub similarity: f64,
}

/// A sampled reset point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartState {
    pub trajectory: usize,
    pub bin: usize,
    pub t_init: f64,
    pub phase: f64,
}

impl BinTable {
    pub fn build(metas: &[TrajectoryMeta], params: SamplerParams) -> Result<Self> {
        params.validate()?;
        let width = match params.bin_width {
            Some(w) => w,
            None => default_bin_width(metas)?,
        };
        Self::with_durations(metas.iter().map(|m| m.duration_s).collect(), width, params)
    }

    pub fn with_durations(
        durations: Vec<f64>,
        bin_width: f64,
        params: SamplerParams,
    ) -> Result<Self> {
        params.validate()?;
        if durations.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidParameter("bin width must be positive".into()));
        }
        if durations.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter(
                "trajectory durations must be positive".into(),
            ));
        }
        let longest = durations.iter().copied().fold(0.0, f64::max);
        let num_bins = (longest / bin_width).ceil() as usize;
        let mut failure = vec![f64::NEG_INFINITY; durations.len() * num_bins];
        let mut valid = Vec::new();
        for (i, &d) in durations.iter().enumerate() {
            for b in 0..num_bins {
                if (b as f64) * bin_width < d {
                    failure[i * num_bins + b] = params.initial_failure;
                    valid.push((i, b));
                }
            }
        }
        Ok(Self {
            bin_width,
            num_bins,
            visits: vec![0; failure.len()],
            durations,
            params,
            failure,
            valid,
        })
    }

    pub fn num_trajectories(&self) -> usize {
        self.durations.len()
    }

    /// The valid set in row-major order.
    pub fn valid_bins(&self) -> &[(usize, usize)] {
        &self.valid
    }

    pub fn is_valid(&self, i: usize, b: usize) -> bool {
        i < self.num_trajectories()
            && b < self.num_bins
            && (b as f64) * self.bin_width < self.durations[i]
    }

    pub fn failure(&self, i: usize, b: usize) -> f64 {
        self.failure[i * self.num_bins + b]
    }

    pub fn set_failure(&mut self, i: usize, b: usize, f: f64) -> Result<()> {
        self.check_bin(i, b)?;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(
                "failure levels lie in [0, 1]".into(),
            ));
        }
        self.failure[i * self.num_bins + b] = f;
        Ok(())
    }

    pub fn visits(&self, i: usize, b: usize) -> u64 {
        self.visits[i * self.num_bins + b]
    }

    /// `τ_base / ln(1 + |Ω|)`.
    pub fn temperature(&self) -> f64 {
        self.params.tau_base / (1.0 + self.valid.len() as f64).ln()
    }

    fn check_bin(&self, i: usize, b: usize) -> Result<()> {
        if self.is_valid(i, b) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bin ({i}, {b}) is outside the valid set"
            )))
        }
    }

    /// `f ← (1 − α) f + α (1 − s̄)`.
    pub fn update_failure(&mut self, i: usize, b: usize, similarity: f64) -> Result<()> {
        self.check_bin(i, b)?;
        if !(0.0..=1.0).contains(&similarity) {
            return Err(Error::InvalidParameter(
                "similarity must lie in [0, 1]".into(),
            ));
        }
        let a = self.params.alpha;
        let f = &mut self.failure[i * self.num_bins + b];
        *f = (1.0 - a) * *f + a * (1.0 - similarity);
        Ok(())
    }

    /// Folds a batch of concurrently finished episodes: outcomes are averaged
    /// per bin and each touched bin gets a single EMA step, so the result does
    /// not depend on the order of `outcomes`.
    pub fn apply_batch(&mut self, outcomes: &[EpisodeOutcome]) -> Result<()> {
        let mut sums: BTreeMap<(usize, usize), (f64, u64)> = BTreeMap::new();
        for o in outcomes {
            self.check_bin(o.trajectory, o.bin)?;
            if !(0.0..=1.0).contains(&o.similarity) {
                return Err(Error::InvalidParameter(
                    "similarity must lie in [0, 1]".into(),
                ));
            }
            let e = sums.entry((o.trajectory, o.bin)).or_insert((0.0, 0));
            e.0 += o.similarity;
            e.1 += 1;
        }
        for ((i, b), (sum, n)) in sums {
            self.update_failure(i, b, (sum / n as f64).clamp(0.0, 1.0))?;
            self.visits[i * self.num_bins + b] += n;
        }
        Ok(())
    }

    /// Row-major `N × B` probabilities, zero off the valid set.
    pub fn sampling_distribution(&self) -> Vec<f64> {
        let tau = self.temperature();
        let n = self.valid.len() as f64;
        let eps = self.params.epsilon;
        let logits: Vec<f64> = self
            .valid
            .iter()
            .map(|&(i, b)| self.failure(i, b) / tau)
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut p = vec![0.0; self.failure.len()];
        for (&(i, b), wk) in self.valid.iter().zip(&w) {
            p[i * self.num_bins + b] = (1.0 - eps) * (wk / total) + eps / n;
        }
        p
    }

    /// Immutable sampler over the current failure levels.
    pub fn snapshot(&self) -> Result<StartSampler> {
        let probs = self.sampling_distribution();
        let weights: Vec<f64> = self
            .valid
            .iter()
            .map(|&(i, b)| probs[i * self.num_bins + b])
            .collect();
        let index = WeightedIndex::new(&weights)
            .map_err(|e| Error::Numerical(format!("sampling weights: {e}")))?;
        Ok(StartSampler {
            valid: self.valid.clone(),
            durations: self.durations.clone(),
            bin_width: self.bin_width,
            index,
        })
    }
}

/// Categorical draw over valid bins followed by a uniform start time inside
/// the chosen bin.
#[derive(Clone, Debug)]
pub struct StartSampler {
    valid: Vec<(usize, usize)>,
    durations: Vec<f64>,
    bin_width: f64,
    index: WeightedIndex<f64>,
}

impl StartSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StartState {
        let (i, b) = self.valid[self.index.sample(rng)];
        let d = self.durations[i];
        let lo = b as f64 * self.bin_width;
        let hi = ((b + 1) as f64 * self.bin_width).min(d);
        let mut t = lo + (hi - lo) * rng.random::<f64>();
        if t >= hi {
            t = hi.next_down().max(lo);
        }
        StartState {
            trajectory: i,
            bin: b,
            t_init: t,
            phase: t / d,
        }
    }
}

pub fn sample_start<R: Rng + ?Sized>(table: &BinTable, rng: &mut R) -> Result<StartState> {
    Ok(table.snapshot()?.sample(rng))
}

/// `min(episode_steps, trajectory_steps)`.
pub fn max_episode_length(episode_steps: usize, trajectory_steps: usize) -> usize {
    episode_steps.min(trajectory_steps)
}

/// `(1 / L_max) Σ s_k` over the realized steps; missing steps count as zero.
pub fn episode_similarity(scores: &[f64], l_max: usize) -> Result<f64> {
    if l_max == 0 || scores.len() > l_max {
        return Err(Error::InvalidParameter(format!(
            "realized length {} must lie in 0..={l_max} with a positive maximum",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidParameter(
            "step scores must lie in [0, 1]".into(),
        ));
    }
    Ok((scores.iter().sum::<f64>() / l_max as f64).clamp(0.0, 1.0))
}

pub const HEATMAP_CSV_HEADER: [&str; 7] = [
    "iteration",
    "trajectory",
    "bin",
    "failure",
    "visits",
    "probability",
    "assistance",
];

/// Streams per-iteration heatmap rows over the valid bins.
pub struct HeatmapWriter<W: Write> {
    w: csv::Writer<W>,
}

impl<W: Write> HeatmapWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEATMAP_CSV_HEADER)?;
        Ok(Self { w })
    }

    /// `assistance` maps a failure level to the bin's wrench scale.
    pub fn record(
        &mut self,
        iteration: usize,
        table: &BinTable,
        assistance: impl Fn(f64) -> f64,
    ) -> Result<()> {
        let p = table.sampling_distribution();
        for &(i, b) in table.valid_bins() {
            let f = table.failure(i, b);
            self.w.write_record(&[
                iteration.to_string(),
                i.to_string(),
                b.to_string(),
                format!("{f:.12e}"),
                table.visits(i, b).to_string(),
                format!("{:.12e}", p[i * table.num_bins + b]),
                format!("{:.12e}", assistance(f)),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.w.flush()?;
        self.w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}
