//! Seeded replications and their tabular and JSON outputs.

use std::borrow::Cow;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use glbai_core::theory::{complexity_report, stopping_time_certificate, ComplexityReport, TheoryInputs};
use glbai_core::{
    instance_stats, load_instance_csv, run_gape, run_glgape, sample_instance, stream_rng, AlphaMode, BanditInstance,
    Environment, GapeConfig, LinkKind, RunConfig, RunResult, Stream,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig};
use crate::stats::{log_log_slope, spearman, summarize, wilson_interval, Correlation, Summary};
use crate::CliError;

/// Where replication instances come from.
pub enum InstanceSource {
    /// A fresh instance per replication, drawn from the replication seed.
    Synthetic { k: usize, d: usize, kind: LinkKind },
    /// One instance shared by every replication.
    Fixed(BanditInstance),
}

impl InstanceSource {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let Some(features) = &cfg.features_csv else {
            return Ok(Self::Synthetic {
                k: cfg.k.expect("validated"),
                d: cfg.d.expect("validated"),
                kind: cfg.link_kind,
            });
        };
        let inst = load_instance_csv(features, cfg.theta_csv.as_deref(), cfg.link_kind, cfg.param_bound)
            .map_err(|e| CliError::Config(format!("features_csv: {e}")))?;
        if let Some(k) = cfg.k.filter(|&k| k != inst.num_arms()) {
            return Err(CliError::Config(format!("config field `K`: {k} but the file has {} arms", inst.num_arms())));
        }
        if let Some(d) = cfg.d.filter(|&d| d != inst.dim()) {
            return Err(CliError::Config(format!("config field `d`: {d} but the file has d = {}", inst.dim())));
        }
        Ok(Self::Fixed(inst))
    }

    pub fn instance(&self, seed: u64) -> Result<Cow<'_, BanditInstance>, CliError> {
        match self {
            Self::Synthetic { k, d, kind } => sample_instance(*k, *d, *kind, &mut stream_rng(seed, Stream::Instance))
                .map(Cow::Owned)
                .map_err(|e| CliError::Runtime(format!("seed {seed}: {e}"))),
            Self::Fixed(inst) => Ok(Cow::Borrowed(inst)),
        }
    }
}

/// One line of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub seed: u64,
    pub algorithm: &'static str,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub tau: u64,
    pub returned_arm: usize,
    pub best_arm: usize,
    pub true_gap: f64,
    pub success: bool,
    pub budget_exhausted: bool,
}

pub struct Outcome {
    pub row: RunRow,
    pub result: RunResult,
    /// Complexity report of this run's instance (GLGapE only).
    pub theory: Option<ComplexityReport>,
    /// `t ≤ H_ε·C_t² + K + 1` at the final round; evaluated only for
    /// coverage-clean runs under the theoretical multiplier.
    pub stopping_certificate: Option<bool>,
}

fn run_config(cfg: &ExperimentConfig, seed: u64) -> RunConfig {
    RunConfig {
        alpha_mode: cfg.alpha_mode,
        max_steps: cfg.max_steps,
        track_coverage: cfg.track_coverage,
        ..RunConfig::new(cfg.epsilon, cfg.delta, seed)
    }
}

/// Runs replication `rep` (seed `base_seed + rep`) of `algorithm`.
pub fn run_replication(
    cfg: &ExperimentConfig,
    source: &InstanceSource,
    algorithm: Algorithm,
    rep: usize,
) -> Result<Outcome, CliError> {
    let seed = cfg.base_seed.wrapping_add(rep as u64);
    let inst = source.instance(seed)?;
    let runtime = |e: glbai_core::Error| CliError::Runtime(format!("seed {seed}: {e}"));
    let result = match algorithm {
        Algorithm::Glgape => run_glgape(inst.as_ref(), &run_config(cfg, seed)).map_err(runtime)?,
        Algorithm::Gape => {
            let gc = GapeConfig {
                epsilon: cfg.epsilon,
                delta: cfg.delta,
                max_steps: cfg.max_steps,
            };
            run_gape(inst.as_ref(), &gc, &mut stream_rng(seed, Stream::Reward)).map_err(runtime)?
        }
    };
    let stats = instance_stats(inst.as_ref()).map_err(runtime)?;
    let means = inst.means().expect("simulation instance");
    let true_gap = means[stats.best_arm] - means[result.returned_arm];
    let link = inst.link();
    let theory = (algorithm == Algorithm::Glgape)
        .then(|| {
            complexity_report(TheoryInputs {
                d: inst.dim(),
                k: inst.num_arms(),
                epsilon: cfg.epsilon,
                delta: cfg.delta,
                kappa: result.kappa,
                reward_bound: link.reward_bound,
                c_mu: link.c_mu,
                k_mu: link.k_mu,
                delta_min: stats.delta_min,
            })
            .ok()
        })
        .flatten();
    let diag = &result.diagnostics;
    let stopping_certificate = match (&theory, result.final_record()) {
        (Some(th), Some(last))
            if cfg.alpha_mode == AlphaMode::Theoretical && diag.coverage_checks > 0 && diag.coverage_clean() =>
        {
            Some(last.t as f64 <= stopping_time_certificate(th.h_eps, last.c_t, inst.num_arms()))
        }
        _ => None,
    };
    Ok(Outcome {
        row: RunRow {
            seed,
            algorithm: algorithm.as_str(),
            k: inst.num_arms(),
            d: inst.dim(),
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            tau: result.tau,
            returned_arm: result.returned_arm,
            best_arm: stats.best_arm,
            true_gap,
            success: true_gap < cfg.epsilon,
            budget_exhausted: result.budget_exhausted,
        },
        result,
        theory,
        stopping_certificate,
    })
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

/// All replications of `algorithm`, in replication order.
pub fn run_all(
    cfg: &ExperimentConfig,
    source: &InstanceSource,
    algorithm: Algorithm,
    workers: Option<usize>,
    label: &str,
) -> Result<Vec<Outcome>, CliError> {
    let n = cfg.num_replications;
    let done = AtomicUsize::new(0);
    pool(workers)?.install(|| {
        (0..n)
            .into_par_iter()
            .map(|rep| {
                let out = run_replication(cfg, source, algorithm, rep);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                eprintln!("[{label}] {k}/{n}");
                out
            })
            .collect()
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticTotals {
    pub lemma1_checks: u64,
    pub lemma1_violations: u64,
    pub lemma3_checks: u64,
    pub lemma3_violations: u64,
    pub degenerate_directions: u64,
    pub mle_failures: u64,
    pub mle_projected: u64,
    pub truncated_rewards: u64,
    pub coverage_checks: u64,
    pub runs_with_coverage_violation: usize,
    pub stopping_certificate_checks: usize,
    pub stopping_certificate_violations: usize,
}

impl DiagnosticTotals {
    pub fn collect(outcomes: &[Outcome]) -> Self {
        let mut t = Self::default();
        for o in outcomes {
            let d = &o.result.diagnostics;
            t.lemma1_checks += d.lemma1_checks;
            t.lemma1_violations += d.lemma1_violations;
            t.lemma3_checks += d.lemma3_checks;
            t.lemma3_violations += d.lemma3_violations;
            t.degenerate_directions += d.degenerate_directions;
            t.mle_failures += d.mle_failures;
            t.mle_projected += d.mle_projected;
            t.truncated_rewards += d.truncated_rewards;
            t.coverage_checks += d.coverage_checks;
            t.runs_with_coverage_violation += !d.coverage_clean() as usize;
            if let Some(ok) = o.stopping_certificate {
                t.stopping_certificate_checks += 1;
                t.stopping_certificate_violations += !ok as usize;
            }
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: &'static str,
    pub link_kind: LinkKind,
    pub alpha_mode: AlphaMode,
    pub num_replications: usize,
    pub base_seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub mean_tau: f64,
    pub median_tau: f64,
    pub tau: Summary,
    pub success_rate: f64,
    pub success_ci95: [f64; 2],
    pub failures: usize,
    pub budget_exhausted: usize,
    pub diagnostics: DiagnosticTotals,
    /// Report for the first replication's instance.
    pub theory: Option<ComplexityReport>,
}

pub fn summarize_runs(cfg: &ExperimentConfig, algorithm: Algorithm, outcomes: &[Outcome]) -> RunSummary {
    let taus: Vec<f64> = outcomes.iter().map(|o| o.row.tau as f64).collect();
    let tau = summarize(&taus);
    let n = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.row.success).count();
    RunSummary {
        algorithm: algorithm.as_str(),
        link_kind: cfg.link_kind,
        alpha_mode: cfg.alpha_mode,
        num_replications: n,
        base_seed: cfg.base_seed,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        mean_tau: tau.mean,
        median_tau: tau.median,
        tau,
        success_rate: successes as f64 / n as f64,
        success_ci95: wilson_interval(successes, n),
        failures: n - successes,
        budget_exhausted: outcomes.iter().filter(|o| o.row.budget_exhausted).count(),
        diagnostics: DiagnosticTotals::collect(outcomes),
        theory: outcomes.first().and_then(|o| o.theory),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn prepare_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

/// `run`: `runs.csv` and `summary.json`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<RunSummary, CliError> {
    let source = InstanceSource::from_config(cfg)?;
    prepare_dir(out)?;
    let outcomes = run_all(cfg, &source, cfg.algorithm, workers, "run")?;
    write_csv(&out.join("runs.csv"), outcomes.iter().map(|o| &o.row))?;
    let summary = summarize_runs(cfg, cfg.algorithm, &outcomes);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    pub replication: usize,
    pub seed: u64,
    pub tau: u64,
    pub success: bool,
    pub returned_arm: usize,
    pub best_arm: usize,
    pub true_gap: f64,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_tau: f64,
    pub median_tau: f64,
    pub tau: Summary,
    pub success_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub axis: &'static str,
    pub algorithm: &'static str,
    pub num_replications: usize,
    pub points: Vec<SweepPoint>,
    /// Rank correlation between the axis value and τ over all runs.
    pub spearman: Correlation,
    /// Slope of ln(mean τ) against ln(value).
    pub log_log_slope: f64,
}

/// `sweep`: `sweep.csv` (long format) and `sweep_summary.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<SweepSummary, CliError> {
    let (Some(axis), Some(values)) = (cfg.sweep_axis, cfg.sweep_values.as_ref()) else {
        return Err(CliError::Config("config field `sweep_axis`: required for sweep".into()));
    };
    prepare_dir(out)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &value in values {
        let point_cfg = cfg.at(axis, value)?;
        let source = InstanceSource::from_config(&point_cfg)?;
        let label = format!("sweep {}={value}", axis.as_str());
        let outcomes = run_all(&point_cfg, &source, cfg.algorithm, workers, &label)?;
        let taus: Vec<f64> = outcomes.iter().map(|o| o.row.tau as f64).collect();
        let tau = summarize(&taus);
        points.push(SweepPoint {
            value,
            mean_tau: tau.mean,
            median_tau: tau.median,
            tau,
            success_rate: outcomes.iter().filter(|o| o.row.success).count() as f64 / outcomes.len() as f64,
        });
        rows.extend(outcomes.iter().enumerate().map(|(rep, o)| SweepRow {
            axis: axis.as_str(),
            value,
            replication: rep,
            seed: o.row.seed,
            tau: o.row.tau,
            success: o.row.success,
            returned_arm: o.row.returned_arm,
            best_arm: o.row.best_arm,
            true_gap: o.row.true_gap,
            budget_exhausted: o.row.budget_exhausted,
        }));
    }
    write_csv(&out.join("sweep.csv"), &rows)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.tau as f64).collect();
    let summary = SweepSummary {
        axis: axis.as_str(),
        algorithm: cfg.algorithm.as_str(),
        num_replications: cfg.num_replications,
        spearman: spearman(&xs, &ys),
        log_log_slope: log_log_slope(
            &points.iter().map(|p| p.value).collect::<Vec<_>>(),
            &points.iter().map(|p| p.mean_tau).collect::<Vec<_>>(),
        ),
        points,
    };
    write_json(&out.join("sweep_summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub num_replications: usize,
    pub glgape: RunSummary,
    pub gape: RunSummary,
    /// mean τ(GapE) / mean τ(GLGapE).
    pub ratio: f64,
}

/// `compare`: both algorithms on identical instances and seeds.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<CompareSummary, CliError> {
    if cfg.link_kind != LinkKind::Logistic {
        return Err(CliError::Config(format!(
            "config field `link_kind`: compare needs binary rewards (logistic), got {}",
            cfg.link_kind
        )));
    }
    let source = InstanceSource::from_config(cfg)?;
    prepare_dir(out)?;
    let gl = run_all(cfg, &source, Algorithm::Glgape, workers, "compare glgape")?;
    let ga = run_all(cfg, &source, Algorithm::Gape, workers, "compare gape")?;
    write_csv(
        &out.join("compare.csv"),
        gl.iter().zip(&ga).flat_map(|(a, b)| [&a.row, &b.row]),
    )?;
    let glgape = summarize_runs(cfg, Algorithm::Glgape, &gl);
    let gape = summarize_runs(cfg, Algorithm::Gape, &ga);
    let summary = CompareSummary {
        num_replications: cfg.num_replications,
        ratio: gape.mean_tau / glgape.mean_tau,
        glgape,
        gape,
    };
    write_json(&out.join("compare_summary.json"), &summary)?;
    Ok(summary)
}
