//! Experiment configuration: one JSON document with a block per subcommand.

use std::path::{Path, PathBuf};

use mimic_core::curriculum::CurriculumParams;
use mimic_core::env::generate::GenerateParams;
use mimic_core::env::{EnvParams, PolicyKind};
use mimic_core::pla::{self, EvalProtocol, PlaSystem};
use mimic_core::rsi::{SamplerParams, MOTION_LIBRARY};
use mimic_core::spot::ActuatorParams;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub streams: usize,
    /// Plant description for `rollout` and `gen-reference`; the built-in toy
    /// plant when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plant: Option<PathBuf>,
    pub pla: PlaBlock,
    pub polytope: PolytopeBlock,
    pub sampler: SamplerBlock,
    pub rollout: RolloutBlock,
    pub spot: SpotBlock,
    pub reference: ReferenceBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            streams: 4,
            plant: None,
            pla: PlaBlock::default(),
            polytope: PolytopeBlock::default(),
            sampler: SamplerBlock::default(),
            rollout: RolloutBlock::default(),
            spot: SpotBlock::default(),
            reference: ReferenceBlock::default(),
        }
    }
}

/// Where a parallel-linkage mechanism comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSource {
    PitchRollAnkle,
    FourBarKnee,
    /// Constant transmission `q_i = ratios q_o`, rows are motors.
    LinearCoupling {
        ratios: Vec<Vec<f64>>,
        armature: Vec<f64>,
    },
    File(PathBuf),
}

impl MechanismSource {
    pub fn load(&self, base: &Path) -> CliResult<PlaSystem<f64>> {
        let sys = match self {
            MechanismSource::PitchRollAnkle => pla::mechanisms::pitch_roll_ankle(),
            MechanismSource::FourBarKnee => pla::mechanisms::four_bar_knee(),
            MechanismSource::LinearCoupling { ratios, armature } => {
                let rows = ratios.len();
                let cols = ratios.first().map_or(0, Vec::len);
                if rows == 0 || cols == 0 || ratios.iter().any(|r| r.len() != cols) {
                    return Err(CliError::Config(
                        "linear coupling ratios must be a non-empty matrix".into(),
                    ));
                }
                let m = DMatrix::from_row_iterator(rows, cols, ratios.iter().flatten().copied());
                pla::mechanisms::linear_coupling(m, DVector::from_column_slice(armature))
            }
            MechanismSource::File(path) => {
                pla::mechanisms::from_json(&read_text(&resolve(base, path))?)
            }
        };
        sys.map_err(|e| CliError::from_core(e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaBlock {
    pub mechanisms: Vec<MechanismSource>,
    pub protocol: EvalProtocol,
}

impl Default for PlaBlock {
    fn default() -> Self {
        Self {
            mechanisms: vec![
                MechanismSource::PitchRollAnkle,
                MechanismSource::FourBarKnee,
            ],
            protocol: EvalProtocol::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolytopeBlock {
    pub mechanism: MechanismSource,
    /// Points per axis.
    pub grid: usize,
    /// `[lo, hi]` per output joint; the joint position limits when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[[f64; 2]; 2]>,
}

impl Default for PolytopeBlock {
    fn default() -> Self {
        Self {
            mechanism: MechanismSource::PitchRollAnkle,
            grid: 21,
            range: None,
        }
    }
}

/// A bin with a fixed synthetic similarity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardBin {
    pub trajectory: usize,
    pub bin: usize,
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerBlock {
    pub params: SamplerParams,
    pub curriculum: CurriculumParams,
    /// Trajectory durations in seconds.
    pub durations: Vec<f64>,
    pub iterations: usize,
    pub episodes_per_stream: usize,
    /// Similarity of every bin not listed in `hard_bins`.
    pub base_similarity: f64,
    pub hard_bins: Vec<HardBin>,
    /// Half-width of the uniform noise added to each episode's similarity.
    pub noise: f64,
    /// Heatmap rows are written every this many iterations and at the end.
    pub record_every: usize,
}

impl Default for SamplerBlock {
    fn default() -> Self {
        Self {
            params: SamplerParams::default(),
            curriculum: CurriculumParams::default(),
            durations: MOTION_LIBRARY.iter().map(|&(_, d)| d).collect(),
            iterations: 2000,
            episodes_per_stream: 16,
            base_similarity: 0.95,
            hard_bins: vec![HardBin {
                trajectory: 0,
                bin: 1,
                similarity: 0.3,
            }],
            noise: 0.02,
            record_every: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutBlock {
    /// Reference files; when empty, `reference.count` references are
    /// generated in memory from the reference block.
    pub trajectories: Vec<PathBuf>,
    pub policy: PolicyKind,
    pub iterations: usize,
    pub episodes_per_stream: usize,
    pub env: EnvParams,
    pub sampler: SamplerParams,
    /// Write one CSV per episode.
    pub write_episodes: bool,
}

impl Default for RolloutBlock {
    fn default() -> Self {
        Self {
            trajectories: Vec::new(),
            policy: PolicyKind::ZeroResidual,
            iterations: 2,
            episodes_per_stream: 2,
            env: EnvParams::default(),
            sampler: SamplerParams::default(),
            write_episodes: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticLog {
    pub samples: usize,
    pub dt: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    /// Standard deviation of additive output-torque noise, N·m.
    pub noise: f64,
    pub tau_max: f64,
    pub omega_max: f64,
    pub alpha_max: f64,
}

impl Default for SyntheticLog {
    fn default() -> Self {
        Self {
            samples: 2000,
            dt: 0.004,
            eta_plus: 0.85,
            eta_minus: 0.70,
            noise: 0.0,
            tau_max: 40.0,
            omega_max: 20.0,
            alpha_max: 200.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpotBlock {
    /// `t,tau_in,omega,alpha,tau_out` CSV; a synthetic log is generated when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    /// Constants held fixed during the fit. The efficiencies are ignored.
    pub params: ActuatorParams<f64>,
    pub synthetic: SyntheticLog,
}

impl Default for SpotBlock {
    fn default() -> Self {
        Self {
            log: None,
            params: ActuatorParams::default(),
            synthetic: SyntheticLog::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceBlock {
    pub params: GenerateParams,
    pub count: usize,
}

impl Default for ReferenceBlock {
    fn default() -> Self {
        Self {
            params: GenerateParams::default(),
            count: 2,
        }
    }
}

fn check(ok: bool, what: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(what.into()))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn validate(&self) -> CliResult<()> {
        check(self.streams >= 1, "streams must be at least 1")?;
        check(!self.pla.mechanisms.is_empty(), "pla.mechanisms is empty")?;
        self.pla.protocol.validate().map_err(CliError::from_core)?;
        check(self.polytope.grid >= 1, "polytope.grid must be at least 1")?;
        if let Some(r) = self.polytope.range {
            check(
                r.iter()
                    .all(|a| a[0].is_finite() && a[1].is_finite() && a[0] <= a[1]),
                "polytope.range must be ordered [lo, hi] pairs",
            )?;
        }
        let s = &self.sampler;
        s.params.validate().map_err(CliError::from_core)?;
        s.curriculum.validate().map_err(CliError::from_core)?;
        check(
            !s.durations.is_empty() && s.durations.iter().all(|d| *d > 0.0 && d.is_finite()),
            "sampler.durations must be positive",
        )?;
        check(
            s.episodes_per_stream >= 1,
            "sampler.episodes_per_stream must be at least 1",
        )?;
        check(
            s.record_every >= 1,
            "sampler.record_every must be at least 1",
        )?;
        check(
            (0.0..=1.0).contains(&s.base_similarity),
            "sampler.base_similarity must lie in [0, 1]",
        )?;
        check(
            s.hard_bins
                .iter()
                .all(|h| (0.0..=1.0).contains(&h.similarity)),
            "sampler.hard_bins similarities must lie in [0, 1]",
        )?;
        check(
            s.noise >= 0.0 && s.noise.is_finite(),
            "sampler.noise must be non-negative",
        )?;
        let r = &self.rollout;
        r.policy.validate().map_err(CliError::from_core)?;
        r.env.validate().map_err(CliError::from_core)?;
        r.sampler.validate().map_err(CliError::from_core)?;
        check(r.iterations >= 1, "rollout.iterations must be at least 1")?;
        check(
            r.episodes_per_stream >= 1,
            "rollout.episodes_per_stream must be at least 1",
        )?;
        let sp = &self.spot;
        sp.params.validate().map_err(CliError::from_core)?;
        let l = &sp.synthetic;
        check(
            l.samples >= 1
                && l.dt > 0.0
                && l.noise >= 0.0
                && [l.tau_max, l.omega_max, l.alpha_max]
                    .iter()
                    .all(|x| *x >= 0.0 && x.is_finite())
                && (0.0..=1.0).contains(&l.eta_plus)
                && l.eta_plus > 0.0
                && (0.0..=1.0).contains(&l.eta_minus)
                && l.eta_minus > 0.0,
            "spot.synthetic out of range",
        )?;
        check(
            self.reference.count >= 1,
            "reference.count must be at least 1",
        )?;
        Ok(())
    }
}

pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Input files that cannot be read are configuration errors.
pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}
