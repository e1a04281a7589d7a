//! GapE: gap-based best-arm identification that treats arms as independent.
//!
//! Each arm keeps its empirical mean `m_k` and count `T_k`. With
//! `b_k = sqrt(a_t / T_k)` and `a_t = (R²/2)·ln(2·K·t²·π²/(6δ))`, the arm
//! pulled next maximizes `−Δ̂_k + b_k`, where `Δ̂_k` is the empirical gap of
//! `k` to the best other arm (the margin over the runner-up for the empirical
//! best). The run stops once `max_{j ≠ best} (m_j − m_best + b_j + b_best) ≤ ε`.
//!
//! Only rewards are used; the arm features are never read.

use std::f64::consts::PI;

use crate::engine::{Diagnostics, RunResult, TraceRecord};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::selector::argmax;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapeConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub max_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapEState {
    pub means: Vec<f64>,
    pub counts: Vec<u64>,
    sums: Vec<f64>,
}

impl GapEState {
    fn new(k: usize) -> Self {
        Self {
            means: vec![0.0; k],
            counts: vec![0; k],
            sums: vec![0.0; k],
        }
    }

    fn record(&mut self, arm: usize, r: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += r;
        self.means[arm] = self.sums[arm] / self.counts[arm] as f64;
    }

    fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Exploration scale at round `t`.
pub fn exploration_scale(reward_bound: f64, k: usize, delta: f64, t: u64) -> f64 {
    let t = t as f64;
    0.5 * reward_bound * reward_bound * (2.0 * k as f64 * t * t * PI * PI / (6.0 * delta)).ln()
}

/// `(best, challenger, B)` for the current statistics and widths.
fn stopping_statistic(state: &GapEState, widths: &[f64]) -> (usize, usize, f64) {
    let best = argmax(state.means.iter().copied()).expect("k >= 2");
    let scores = state.means.iter().zip(widths).enumerate().map(|(j, (m, b))| {
        if j == best {
            f64::NEG_INFINITY
        } else {
            m - state.means[best] + b + widths[best]
        }
    });
    let challenger = argmax(scores).expect("k >= 2");
    let b = state.means[challenger] - state.means[best] + widths[challenger] + widths[best];
    (best, challenger, b)
}

pub fn run_gape(env: &dyn Environment, config: &GapeConfig, rng: &mut SimRng) -> Result<RunResult> {
    let k = env.num_arms();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("GapE needs at least 2 arms, got {k}")));
    }
    if !(config.epsilon > 0.0) || !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need epsilon > 0 and delta in (0, 1), got {} and {}",
            config.epsilon, config.delta
        )));
    }
    if config.max_steps < k as u64 + 1 {
        return Err(Error::InvalidArgument(format!(
            "max_steps ({}) must be at least K + 1 = {}",
            config.max_steps,
            k + 1
        )));
    }
    let r_bound = env.link().reward_bound;
    let mut state = GapEState::new(k);
    let mut arms = Vec::new();
    let mut diagnostics = Diagnostics::default();
    for arm in 0..k {
        let r = env.pull(arm, rng)?;
        diagnostics.truncated_rewards += r.truncated as u64;
        state.record(arm, r.value);
        arms.push(arm);
    }

    let mut trace = Vec::new();
    let mut budget_exhausted = false;
    loop {
        let t = state.total() + 1;
        let a = exploration_scale(r_bound, k, config.delta, t);
        let widths: Vec<f64> = state.counts.iter().map(|&n| (a / n as f64).sqrt()).collect();
        let (best, challenger, b) = stopping_statistic(&state, &widths);
        let mut record = TraceRecord {
            t,
            i_t: best,
            j_t: challenger,
            b_t: b,
            arm: None,
            reward: None,
            score_norm: 0.0,
            c_t: a.sqrt(),
            theta: None,
        };
        if b <= config.epsilon {
            trace.push(record);
            break;
        }
        if state.total() >= config.max_steps {
            budget_exhausted = true;
            trace.push(record);
            break;
        }
        let index = (0..k).map(|j| {
            let gap = if j == best {
                state.means[best] - state.means[challenger_excluding(&state.means, best)]
            } else {
                state.means[best] - state.means[j]
            };
            -gap + widths[j]
        });
        let arm = argmax(index).expect("k >= 2");
        let r = env.pull(arm, rng)?;
        diagnostics.truncated_rewards += r.truncated as u64;
        state.record(arm, r.value);
        arms.push(arm);
        record.arm = Some(arm);
        record.reward = Some(r.value);
        trace.push(record);
    }

    let last = trace.last().expect("at least one round");
    Ok(RunResult {
        returned_arm: last.i_t,
        tau: arms.len() as u64,
        final_c_t: last.c_t,
        arms,
        trace,
        budget_exhausted,
        exploration_len: k,
        alpha: 0.0,
        lambda_0: 0.0,
        kappa: 0.0,
        diagnostics,
    })
}

/// Index of the largest mean other than `best`.
fn challenger_excluding(means: &[f64], best: usize) -> usize {
    argmax(
        means
            .iter()
            .enumerate()
            .map(|(j, &m)| if j == best { f64::NEG_INFINITY } else { m }),
    )
    .expect("k >= 2")
}
