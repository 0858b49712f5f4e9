//! Subcommand bodies. Each returns its output files in memory; nothing is
//! written until every stream has joined.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mimic_core::curriculum::assistance_scale;
use mimic_core::env::generate::{generate_reference, replay_deviation};
use mimic_core::env::{
    rollout as run_rollout, table_for_library, Env, EpisodeOptions, Plant, RolloutParams,
    SimilaritySummary, Trajectory,
};
use mimic_core::pla::{evaluate_model_errors, polytope_sweep, write_polytope_csv};
use mimic_core::rsi::{BinTable, EpisodeOutcome, HeatmapWriter, TrajectoryMeta};
use mimic_core::spot::ActuatorParams;
use mimic_core::spot::{
    actuator_output, fit_efficiency, read_actuator_log, ActuatorSample, EfficiencyFit, WorkSign,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{read_text, resolve, ExperimentConfig, SyntheticLog};
use crate::error::{CliError, CliResult};

pub const EVAL_PLA_CSV_HEADER: [&str; 5] =
    ["mechanism", "model", "joint", "normalized_mse", "diverged"];
pub const ROLLOUT_EPISODES_CSV_HEADER: [&str; 13] = [
    "iteration",
    "stream",
    "episode",
    "trajectory",
    "bin",
    "t_init",
    "start_frame",
    "beta",
    "l_max",
    "l_real",
    "status",
    "similarity",
    "return",
];
pub const ROLLOUT_SUMMARY_CSV_HEADER: [&str; 6] =
    ["iteration", "episodes", "mean", "min", "p10", "max"];
pub const SPOT_LOG_CSV_HEADER: [&str; 5] = ["t", "tau_in", "omega", "alpha", "tau_out"];

/// Files produced by a subcommand, relative to the output directory, and a
/// human-readable summary.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub summary: String,
}

impl Report {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(name))
            .map(|(_, b)| b.as_slice())
    }

    pub fn write(&self, out: &Path) -> CliResult<()> {
        for (rel, bytes) in &self.files {
            let path = out.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, bytes)?;
        }
        Ok(())
    }
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> CliResult<Vec<u8>> {
    w.into_inner()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}

fn json_bytes<S: Serialize>(value: &S) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s.into_bytes()
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::from_core(e.into())
}

pub fn eval_pla(cfg: &ExperimentConfig, base: &Path) -> CliResult<Report> {
    let mut report = Report::default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVAL_PLA_CSV_HEADER).map_err(csv_err)?;
    for source in &cfg.pla.mechanisms {
        let sys = source.load(base)?;
        let name = sys.linkage().name.clone();
        let rows = evaluate_model_errors(&sys, &cfg.pla.protocol)?;
        for r in &rows {
            w.write_record([
                name.as_str(),
                r.model.label(),
                r.joint.as_str(),
                &format!("{:e}", r.normalized_mse),
                &r.diverged.to_string(),
            ])
            .map_err(csv_err)?;
            let flag = if r.diverged { "  DIVERGED" } else { "" };
            let _ = writeln!(
                report.summary,
                "{name:<20} {:<18} {:<12} {:.6e}{flag}",
                r.model.label(),
                r.joint,
                r.normalized_mse
            );
        }
    }
    report.add("eval_pla.csv", csv_bytes(w)?);
    Ok(report)
}

pub fn torque_polytope(cfg: &ExperimentConfig, base: &Path) -> CliResult<Report> {
    let block = &cfg.polytope;
    let sys = block.mechanism.load(base)?;
    if sys.num_outputs() != 2 {
        return Err(CliError::Config(format!(
            "torque-polytope needs a two-output mechanism, got {}",
            sys.num_outputs()
        )));
    }
    let [lo, hi] = match block.range {
        Some(r) => [[r[0][0], r[1][0]], [r[0][1], r[1][1]]],
        None => {
            let l: Vec<_> = sys
                .output_dofs()
                .iter()
                .map(|&d| sys.main().joints()[d].limits)
                .collect();
            [[l[0].q_min, l[1].q_min], [l[0].q_max, l[1].q_max]]
        }
    };
    let samples = polytope_sweep(&sys, lo, hi, block.grid)?;
    let mut buf = Vec::new();
    write_polytope_csv(&samples, &mut buf)?;
    let degenerate = samples.iter().filter(|s| s.polytope.degenerate).count();
    let mut report = Report::default();
    let _ = writeln!(
        report.summary,
        "{} grid points over [{}, {}] x [{}, {}], {degenerate} degenerate",
        samples.len(),
        lo[0],
        hi[0],
        lo[1],
        hi[1]
    );
    report.add("polytope.csv", buf);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub trajectory: usize,
    pub bin: usize,
    pub failure: f64,
    pub probability: f64,
    pub visits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSummary {
    pub iterations: usize,
    pub episodes: u64,
    pub valid_bins: usize,
    /// `1 / |Ω|`.
    pub uniform_share: f64,
    /// `ε / |Ω|`.
    pub floor: f64,
    pub min_probability: f64,
    pub max_probability: f64,
    pub hard_bins: Vec<BinSummary>,
}

fn bin_summary(table: &BinTable, p: &[f64], i: usize, b: usize) -> BinSummary {
    BinSummary {
        trajectory: i,
        bin: b,
        failure: table.failure(i, b),
        probability: p[i * table.num_bins + b],
        visits: table.visits(i, b),
    }
}

/// Drives the sampler with fixed per-bin similarities. Each stream draws
/// starts from the same frozen table per iteration.
pub fn sampler_demo(cfg: &ExperimentConfig, _base: &Path) -> CliResult<Report> {
    let s = &cfg.sampler;
    let metas = s
        .durations
        .iter()
        .enumerate()
        .map(|(i, &d)| TrajectoryMeta::new(format!("clip{i}"), d, 0.02))
        .collect::<mimic_core::Result<Vec<_>>>()?;
    let mut table = BinTable::build(&metas, s.params)?;
    for h in &s.hard_bins {
        if !table.is_valid(h.trajectory, h.bin) {
            return Err(CliError::Config(format!(
                "hard bin ({}, {}) is outside the valid set",
                h.trajectory, h.bin
            )));
        }
    }
    let difficulty = |i: usize, b: usize| {
        s.hard_bins
            .iter()
            .find(|h| h.trajectory == i && h.bin == b)
            .map_or(s.base_similarity, |h| h.similarity)
    };
    let assist = |f: f64| assistance_scale(f, &s.curriculum);
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.streams as u64)
        .map(|k| ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k)))
        .collect();
    let mut heat = HeatmapWriter::new(Vec::new())?;
    heat.record(0, &table, assist)?;
    for it in 1..=s.iterations {
        let sampler = table.snapshot()?;
        let sampler = &sampler;
        let batches: Vec<Vec<EpisodeOutcome>> = std::thread::scope(|scope| {
            let handles: Vec<_> = rngs
                .iter_mut()
                .map(|rng| {
                    scope.spawn(move || {
                        (0..s.episodes_per_stream)
                            .map(|_| {
                                let st = sampler.sample(rng);
                                let noise = if s.noise > 0.0 {
                                    rng.random_range(-s.noise..=s.noise)
                                } else {
                                    0.0
                                };
                                EpisodeOutcome {
                                    trajectory: st.trajectory,
                                    bin: st.bin,
                                    similarity: (difficulty(st.trajectory, st.bin) + noise)
                                        .clamp(0.0, 1.0),
                                }
                            })
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sampler stream panicked"))
                .collect()
        });
        let outcomes: Vec<EpisodeOutcome> = batches.into_iter().flatten().collect();
        table.apply_batch(&outcomes)?;
        if it % s.record_every == 0 || it == s.iterations {
            heat.record(it, &table, assist)?;
        }
    }
    let p = table.sampling_distribution();
    let valid = table.valid_bins();
    let probs: Vec<f64> = valid
        .iter()
        .map(|&(i, b)| p[i * table.num_bins + b])
        .collect();
    let summary = SamplerSummary {
        iterations: s.iterations,
        episodes: valid.iter().map(|&(i, b)| table.visits(i, b)).sum(),
        valid_bins: valid.len(),
        uniform_share: 1.0 / valid.len() as f64,
        floor: s.params.epsilon / valid.len() as f64,
        min_probability: probs.iter().copied().fold(f64::INFINITY, f64::min),
        max_probability: probs.iter().copied().fold(0.0, f64::max),
        hard_bins: s
            .hard_bins
            .iter()
            .map(|h| bin_summary(&table, &p, h.trajectory, h.bin))
            .collect(),
    };
    let mut report = Report::default();
    let _ = writeln!(
        report.summary,
        "{} iterations, {} episodes over {} bins; uniform share {:.4e}, floor {:.4e}, min p {:.4e}",
        summary.iterations,
        summary.episodes,
        summary.valid_bins,
        summary.uniform_share,
        summary.floor,
        summary.min_probability
    );
    for h in &summary.hard_bins {
        let _ = writeln!(
            report.summary,
            "hard bin ({}, {}): f {:.4}, p {:.4e}, visits {} ({:.2}x uniform)",
            h.trajectory,
            h.bin,
            h.failure,
            h.probability,
            h.visits,
            h.visits as f64 / (summary.episodes as f64 * summary.uniform_share)
        );
    }
    report.add("sampler_heatmap.csv", heat.finish()?);
    report.add("sampler_summary.json", json_bytes(&summary));
    Ok(report)
}

pub fn load_plant(cfg: &ExperimentConfig, base: &Path) -> CliResult<Plant<f64>> {
    Ok(match &cfg.plant {
        Some(p) => Plant::from_json(&read_text(&resolve(base, p))?)?,
        None => Plant::toy()?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub iterations: usize,
    pub streams: usize,
    pub similarity: SimilaritySummary,
}

pub fn rollout(cfg: &ExperimentConfig, base: &Path) -> CliResult<Report> {
    let r = &cfg.rollout;
    let env = Env::new(load_plant(cfg, base)?, r.env)?;
    let library: Vec<Trajectory<f64>> = if r.trajectories.is_empty() {
        (0..cfg.reference.count as u64)
            .map(|k| {
                generate_reference(&env.plant, &cfg.reference.params, cfg.seed.wrapping_add(k))
            })
            .collect::<mimic_core::Result<_>>()?
    } else {
        r.trajectories
            .iter()
            .map(|p| {
                Ok(Trajectory::load(
                    &read_text(&resolve(base, p))?,
                    &env.plant,
                )?)
            })
            .collect::<CliResult<_>>()?
    };
    let mut table = table_for_library(&library, r.sampler)?;
    let params = RolloutParams {
        iterations: r.iterations,
        episodes_per_stream: r.episodes_per_stream,
        streams: cfg.streams,
        base_seed: cfg.seed,
    };
    let curriculum = r.env.curriculum;
    let mut heat = HeatmapWriter::new(Vec::new())?;
    heat.record(0, &table, |f| assistance_scale(f, &curriculum))?;
    let mut episodes = csv::Writer::from_writer(Vec::new());
    episodes
        .write_record(ROLLOUT_EPISODES_CSV_HEADER)
        .map_err(csv_err)?;
    let mut per_iteration = csv::Writer::from_writer(Vec::new());
    per_iteration
        .write_record(ROLLOUT_SUMMARY_CSV_HEADER)
        .map_err(csv_err)?;
    let mut report = Report::default();
    let mut all = Vec::new();
    run_rollout(
        &env,
        &library,
        &mut table,
        &r.policy,
        &params,
        EpisodeOptions::default(),
        |it, table| {
            let iteration = it.iteration + 1;
            let mut sims = Vec::with_capacity(it.episodes.len());
            for (k, ep) in it.episodes.iter().enumerate() {
                let (stream, index) = (k / r.episodes_per_stream, k % r.episodes_per_stream);
                let ret: f64 = ep.steps.iter().map(|s| s.reward).sum();
                episodes.write_record([
                    iteration.to_string(),
                    stream.to_string(),
                    index.to_string(),
                    ep.trajectory.to_string(),
                    ep.bin.to_string(),
                    format!("{}", ep.t_init),
                    ep.start_frame.to_string(),
                    format!("{}", ep.beta),
                    ep.l_max.to_string(),
                    ep.l_real.to_string(),
                    ep.status.label().to_string(),
                    format!("{}", ep.similarity),
                    format!("{ret}"),
                ])?;
                if r.write_episodes {
                    let mut buf = Vec::new();
                    ep.write_csv(&mut buf)?;
                    report.add(
                        format!("episodes/iter{iteration:04}_stream{stream:02}_ep{index:03}.csv"),
                        buf,
                    );
                }
                sims.push(ep.similarity);
            }
            let s = SimilaritySummary::from_values(&sims)?;
            per_iteration.write_record([
                iteration.to_string(),
                s.episodes.to_string(),
                format!("{}", s.mean),
                format!("{}", s.min),
                format!("{}", s.p10),
                format!("{}", s.max),
            ])?;
            all.extend(sims);
            heat.record(iteration, table, |f| assistance_scale(f, &curriculum))
        },
    )?;
    let summary = RolloutSummary {
        iterations: r.iterations,
        streams: cfg.streams,
        similarity: SimilaritySummary::from_values(&all)
            .map_err(|_| CliError::Config("rollout.iterations must be at least 1".into()))?,
    };
    let s = &summary.similarity;
    let _ = writeln!(
        report.summary,
        "{} episodes: similarity mean {:.6} min {:.6} p10 {:.6} max {:.6}",
        s.episodes, s.mean, s.min, s.p10, s.max
    );
    report.add("rollout_episodes.csv", csv_bytes(episodes)?);
    report.add("rollout_summary.csv", csv_bytes(per_iteration)?);
    report.add("rollout_heatmap.csv", heat.finish()?);
    report.add("rollout_summary.json", json_bytes(&summary));
    Ok(report)
}

/// Noiseless or noisy samples of the unfiltered actuator model with uniform
/// random commands and motion.
pub fn synthetic_actuator_log(
    params: &ActuatorParams<f64>,
    spec: &SyntheticLog,
    seed: u64,
) -> CliResult<Vec<ActuatorSample>> {
    let truth = ActuatorParams {
        eta_plus: spec.eta_plus,
        eta_minus: spec.eta_minus,
        ..*params
    };
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if spec.noise > 0.0 {
        Some(Normal::new(0.0, spec.noise).map_err(|e| CliError::Config(e.to_string()))?)
    } else {
        None
    };
    let draw = |rng: &mut ChaCha8Rng, m: f64| {
        if m > 0.0 {
            rng.random_range(-m..m)
        } else {
            0.0
        }
    };
    let mut prev = WorkSign::Positive;
    Ok((0..spec.samples)
        .map(|k| {
            let tau_in = draw(&mut rng, spec.tau_max);
            let omega = draw(&mut rng, spec.omega_max);
            let alpha = draw(&mut rng, spec.alpha_max);
            let (out, sign) = actuator_output(tau_in, omega, alpha, &truth, prev);
            prev = sign;
            let tau_out = out + noise.map_or(0.0, |n| n.sample(&mut rng));
            ActuatorSample {
                t: k as f64 * spec.dt,
                tau_in,
                omega,
                alpha,
                tau_out,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotFitReport {
    /// Log path, or `synthetic`.
    pub source: String,
    pub samples: usize,
    pub fit: EfficiencyFit,
    /// The fixed constants with the fitted efficiencies filled in.
    pub params: ActuatorParams<f64>,
}

pub fn fit_spot(cfg: &ExperimentConfig, base: &Path) -> CliResult<Report> {
    let sp = &cfg.spot;
    let mut report = Report::default();
    let (source, log) = match &sp.log {
        Some(p) => {
            let path = resolve(base, p);
            let file = std::fs::File::open(&path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            (path.display().to_string(), read_actuator_log(file)?)
        }
        None => {
            let log = synthetic_actuator_log(&sp.params, &sp.synthetic, cfg.seed)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for s in &log {
                w.serialize(s).map_err(csv_err)?;
            }
            report.add("spot_log.csv", csv_bytes(w)?);
            ("synthetic".to_string(), log)
        }
    };
    let fit = fit_efficiency(&log, &sp.params)?;
    let params = ActuatorParams {
        eta_plus: fit.eta_plus.unwrap_or(sp.params.eta_plus),
        eta_minus: fit.eta_minus.unwrap_or(sp.params.eta_minus),
        ..sp.params
    };
    let fmt = |e: Option<f64>| e.map_or("unfitted".to_string(), |v| format!("{v:.9}"));
    let _ = writeln!(
        report.summary,
        "eta_plus {} ({} samples), eta_minus {} ({} samples), residual {:.6e} (N·m)²",
        fmt(fit.eta_plus),
        fit.samples_plus,
        fmt(fit.eta_minus),
        fit.samples_minus,
        fit.residual
    );
    for w in &fit.warnings {
        let _ = writeln!(report.summary, "warning: {w}");
    }
    let out = SpotFitReport {
        source,
        samples: log.len(),
        fit,
        params,
    };
    report.add("spot_fit.json", json_bytes(&out));
    Ok(report)
}

pub fn gen_reference(cfg: &ExperimentConfig, base: &Path) -> CliResult<Report> {
    let plant = load_plant(cfg, base)?;
    let params = &cfg.reference.params;
    let mut report = Report::default();
    for k in 0..cfg.reference.count {
        let seed = cfg.seed.wrapping_add(k as u64);
        let traj = generate_reference(&plant, params, seed)?;
        let deviation = replay_deviation(&plant, &traj, params.sim_dt)?;
        let mut json = traj.to_doc().to_json()?;
        json.push('\n');
        let name = format!("reference_{k:03}.json");
        let _ = writeln!(
            report.summary,
            "{name}: {} frames at dt {} (seed {seed}), replay deviation {deviation:.3e}",
            traj.len(),
            traj.dt
        );
        report.add(name, json.into_bytes());
    }
    Ok(report)
}
