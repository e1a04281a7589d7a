//! The GLGapE identification loop.
//!
//! After an exploratory phase that makes the design matrix invertible, each
//! round fits the maximum-likelihood parameter, selects the most ambiguous gap
//! and either stops (when its pessimistic value is at most ε) or plays the arm
//! that best reduces the uncertainty of that gap.

use serde::Serialize;

use crate::confidence::{calibrate_alpha, gap_estimate, AlphaMode, FeatureGram, WidthSchedule};
use crate::design::DesignState;
use crate::environment::{Environment, Reward};
use crate::error::{Error, Result};
use crate::estimator::{fit_mle, MleOptions};
use crate::linkfn::Kappa;
use crate::rng::{stream_rng, SimRng, Stream};
use crate::selector::{select_arm, select_gap, solve_direction_lp};

/// Relative slack for the allocation-norm and LP-weight diagnostics.
const DIAGNOSTIC_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Length of the exploratory phase; `min(K, 3d)` when absent.
    pub exploration_override: Option<usize>,
    pub alpha_mode: AlphaMode,
    /// Hard cap on the total number of pulls.
    pub max_steps: u64,
    pub seed: u64,
    /// Check every pairwise confidence set against the true gaps each round
    /// (simulation only; `O(K²)` per round).
    pub track_coverage: bool,
    /// Keep the per-round parameter estimate in the trace.
    pub record_estimates: bool,
}

impl RunConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        Self {
            epsilon,
            delta,
            exploration_override: None,
            alpha_mode: AlphaMode::Empirical,
            max_steps: 200_000,
            seed,
            track_coverage: false,
            record_estimates: false,
        }
    }

    pub fn exploration_len(&self, num_arms: usize, dim: usize) -> usize {
        self.exploration_override.unwrap_or(num_arms.min(3 * dim))
    }

    pub fn validate(&self, num_arms: usize, dim: usize) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        let cap = (dim as f64 / std::f64::consts::E).min(1.0);
        if !(self.delta > 0.0 && self.delta < cap) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, min(1, d/e)) = (0, {cap:.4}), got {}",
                self.delta
            )));
        }
        if num_arms < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 arms, got {num_arms}")));
        }
        let e = self.exploration_len(num_arms, dim);
        if e == 0 {
            return Err(Error::InvalidArgument("exploratory phase must have at least 1 pull".into()));
        }
        if self.max_steps < e as u64 + 1 {
            return Err(Error::InvalidArgument(format!(
                "max_steps ({}) must be at least E + 1 = {}",
                self.max_steps,
                e + 1
            )));
        }
        Ok(())
    }
}

/// One post-exploration round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: u64,
    pub i_t: usize,
    pub j_t: usize,
    pub b_t: f64,
    /// `None` on the stopping round (and when the budget ran out).
    pub arm: Option<usize>,
    pub reward: Option<f64>,
    pub score_norm: f64,
    pub c_t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Rounds in which some true gap left its confidence set.
    pub coverage_violation_rounds: u64,
    pub first_coverage_violation: Option<u64>,
    pub coverage_checks: u64,
    pub lemma1_checks: u64,
    pub lemma1_violations: u64,
    pub lemma3_checks: u64,
    pub lemma3_violations: u64,
    /// Rounds where the direction vanished and the LP was skipped.
    pub degenerate_directions: u64,
    /// Rounds where the likelihood fit failed and the best iterate was kept.
    pub mle_failures: u64,
    /// Fits that returned with the norm cap active.
    pub mle_projected: u64,
    pub max_mle_iterations: usize,
    pub truncated_rewards: u64,
    /// Pulls added to the exploratory phase to make the design invertible.
    pub exploration_extension: usize,
}

impl Diagnostics {
    pub fn coverage_clean(&self) -> bool {
        self.coverage_violation_rounds == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub returned_arm: usize,
    /// Total number of pulls, exploration included.
    pub tau: u64,
    /// Every pulled arm in order.
    pub arms: Vec<usize>,
    pub trace: Vec<TraceRecord>,
    pub budget_exhausted: bool,
    pub exploration_len: usize,
    pub alpha: f64,
    pub lambda_0: f64,
    pub kappa: f64,
    pub final_c_t: f64,
    pub diagnostics: Diagnostics,
}

impl RunResult {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }
}

/// Outcome of the exploratory phase.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub design: DesignState,
    pub arms: Vec<usize>,
    pub truncations: u64,
    /// Pulls beyond the nominal `E`.
    pub extension: usize,
}

fn pull_into(
    env: &dyn Environment,
    design: &mut DesignState,
    arm: usize,
    rng: &mut SimRng,
) -> Result<Reward> {
    let reward = env.pull(arm, rng)?;
    design.update(arm, &env.features()[arm], reward.value)?;
    Ok(reward)
}

/// Plays `E` uniformly random arms (with replacement), extending the phase by
/// up to `50·d` further random pulls while the design is singular. Records
/// λ₀ at the end.
pub fn exploratory_phase(
    env: &dyn Environment,
    config: &RunConfig,
    algo_rng: &mut SimRng,
    reward_rng: &mut SimRng,
) -> Result<Exploration> {
    use rand::Rng;

    let k = env.num_arms();
    let d = env.dim();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 arms, got {k}")));
    }
    let e = config.exploration_len(k, d);
    let mut design = DesignState::new(d, k);
    let mut arms = Vec::with_capacity(e);
    let mut truncations = 0;
    let mut play = |design: &mut DesignState, arms: &mut Vec<usize>| -> Result<()> {
        let arm = algo_rng.random_range(0..k);
        truncations += pull_into(env, design, arm, reward_rng)?.truncated as u64;
        arms.push(arm);
        Ok(())
    };
    for _ in 0..e {
        play(&mut design, &mut arms)?;
    }
    let mut extension = 0;
    while !design.is_nonsingular() {
        if extension >= 50 * d {
            return Err(Error::RankDeficient {
                pulls: arms.len(),
                rank: design.rank(),
                dim: d,
            });
        }
        play(&mut design, &mut arms)?;
        extension += 1;
    }
    design.record_lambda_0();
    Ok(Exploration {
        design,
        arms,
        truncations,
        extension,
    })
}

/// Runs GLGapE to completion (or until `max_steps` pulls).
pub fn run_glgape(env: &dyn Environment, config: &RunConfig) -> Result<RunResult> {
    let k = env.num_arms();
    let d = env.dim();
    config.validate(k, d)?;
    let features = env.features();
    let link = *env.link();

    let mut algo_rng = stream_rng(config.seed, Stream::Algorithm);
    let mut reward_rng = stream_rng(config.seed, Stream::Reward);
    let exploration = exploratory_phase(env, config, &mut algo_rng, &mut reward_rng)?;
    let exploration_len = exploration.arms.len();
    let mut design = exploration.design;
    let mut arms = exploration.arms;
    let mut diagnostics = Diagnostics {
        truncated_rewards: exploration.truncations,
        exploration_extension: exploration.extension,
        ..Diagnostics::default()
    };

    let lambda_0 = design.lambda_0().expect("recorded at end of exploration");
    let kappa = Kappa::new(lambda_0, link.feature_bound)?;
    let theoretical = link.theoretical_alpha(kappa);
    let alpha = match config.alpha_mode {
        AlphaMode::Theoretical => theoretical,
        // The design after E pulls is the one used at round E + 1, so the
        // calibration is evaluated at that index: the widest confidence set
        // of the first decision round then has width exactly 1.
        AlphaMode::Empirical => {
            let t0 = design.round() as usize;
            theoretical * calibrate_alpha(&link, &design, features, t0, config.delta)?
        }
        AlphaMode::Explicit(a) => a,
    };
    let schedule = WidthSchedule::new(alpha, d, config.delta)?;
    let truth = if config.track_coverage { env.means() } else { None };

    let options = MleOptions::for_link(&link);
    let mut theta = vec![0.0; d];
    let mut trace = Vec::new();
    let mut budget_exhausted = false;

    loop {
        let t = design.round();
        let score_norm = match fit_mle(&design.grouped_samples(), &link, Some(&theta), &options) {
            Ok(sol) => {
                diagnostics.max_mle_iterations = diagnostics.max_mle_iterations.max(sol.iterations);
                diagnostics.mle_projected += sol.projected as u64;
                theta = sol.theta;
                sol.score_norm
            }
            Err(Error::MleNotConverged { best, score_norm, iterations }) => {
                diagnostics.mle_failures += 1;
                diagnostics.max_mle_iterations = diagnostics.max_mle_iterations.max(iterations);
                theta = best;
                score_norm
            }
            Err(Error::SingularHessian) => {
                diagnostics.mle_failures += 1;
                f64::NAN
            }
            Err(e) => return Err(e),
        };
        let c_t = schedule.width_scale(t)?;
        let cert = select_gap(&theta, &link, &design, c_t, features)?;

        if let Some(means) = truth {
            if t > 2.max(d as u64) {
                diagnostics.coverage_checks += 1;
                if !all_gaps_covered(&theta, &link, &design, c_t, features, means)? {
                    diagnostics.coverage_violation_rounds += 1;
                    diagnostics.first_coverage_violation.get_or_insert(t);
                }
            }
        }

        let mut record = TraceRecord {
            t,
            i_t: cert.i_t,
            j_t: cert.j_t,
            b_t: cert.b_t,
            arm: None,
            reward: None,
            score_norm,
            c_t,
            theta: config.record_estimates.then(|| theta.clone()),
        };
        if cert.b_t <= config.epsilon {
            trace.push(record);
            break;
        }
        if design.num_pulls() as u64 >= config.max_steps {
            budget_exhausted = true;
            trace.push(record);
            break;
        }

        let y = &cert.direction;
        let y_scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let arm = if y_scale == 0.0 {
            diagnostics.degenerate_directions += 1;
            let counts = design.counts();
            if counts[cert.j_t] < counts[cert.i_t] || (counts[cert.j_t] == counts[cert.i_t] && cert.j_t < cert.i_t) {
                cert.j_t
            } else {
                cert.i_t
            }
        } else {
            let alloc = solve_direction_lp(features, y)?;
            let w_inf = alloc.w_star.iter().fold(0.0f64, |a, w| a.max(w.abs()));
            diagnostics.lemma3_checks += 1;
            if w_inf > 2.0 * link.k_mu * (1.0 + DIAGNOSTIC_SLACK) {
                diagnostics.lemma3_violations += 1;
            }
            let t_y = alloc.effective_count(design.counts());
            if t_y > 0.0 {
                diagnostics.lemma1_checks += 1;
                let lhs = design.mahalanobis_norm(y)?;
                if lhs > (alloc.rho / t_y).sqrt() * (1.0 + DIAGNOSTIC_SLACK) {
                    diagnostics.lemma1_violations += 1;
                }
            }
            select_arm(&alloc, design.counts())?
        };

        let reward = pull_into(env, &mut design, arm, &mut reward_rng)?;
        diagnostics.truncated_rewards += reward.truncated as u64;
        arms.push(arm);
        record.arm = Some(arm);
        record.reward = Some(reward.value);
        trace.push(record);
    }

    let last = trace.last().expect("loop pushes at least one record");
    Ok(RunResult {
        returned_arm: last.i_t,
        tau: arms.len() as u64,
        final_c_t: last.c_t,
        arms,
        trace,
        budget_exhausted,
        exploration_len,
        alpha,
        lambda_0,
        kappa: kappa.value(),
        diagnostics,
    })
}

/// True when every pairwise gap `μ_i − μ_j` lies within its confidence set.
fn all_gaps_covered(
    theta: &[f64],
    link: &crate::linkfn::LinkModel,
    design: &DesignState,
    c_t: f64,
    features: &[Vec<f64>],
    means: &[f64],
) -> Result<bool> {
    let gram = FeatureGram::new(design, features)?;
    let k = features.len();
    for i in 0..k {
        for j in i + 1..k {
            let center = gap_estimate(theta, link, &features[i], &features[j]);
            let width = c_t * gram.pair(i, j).max_corner(link.c_mu, link.k_mu).0;
            if (means[i] - means[j] - center).abs() > width {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
