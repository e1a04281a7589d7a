//! Maximum-likelihood estimation of the GLM parameter.
//!
//! Solves the score equation `Σ (r_l − μ(θᵀx_l)) x_l = 0` by damped Newton
//! iteration. All supported links are canonical, so the Hessian of the
//! log-likelihood is `−Σ μ̇(θᵀx_l) x_l x_lᵀ` and the problem is concave.
//! Observations sharing a feature row are aggregated; the score and Hessian
//! only depend on per-row counts and reward sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::linkfn::LinkModel;

/// Observations that share one feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    pub x: Vec<f64>,
    pub count: f64,
    pub reward_sum: f64,
}

impl GroupedSample {
    /// One group per observation.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a [f64], f64)>) -> Vec<Self> {
        pairs
            .into_iter()
            .map(|(x, r)| GroupedSample {
                x: x.to_vec(),
                count: 1.0,
                reward_sum: r,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Required Euclidean norm of the score at the returned estimate.
    pub tolerance: f64,
    /// Norm cap applied to the iterates (`10·S` by default).
    pub param_cap: f64,
    pub max_halvings: usize,
}

impl MleOptions {
    pub fn for_link(link: &LinkModel) -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            param_cap: 10.0 * link.param_bound,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleSolution {
    pub theta: Vec<f64>,
    pub score_norm: f64,
    pub iterations: usize,
    /// The norm cap was active at the returned estimate.
    pub projected: bool,
    pub log_likelihood: f64,
}

/// Log-likelihood (up to a θ-independent constant).
pub fn log_likelihood(samples: &[GroupedSample], link: &LinkModel, theta: &[f64]) -> f64 {
    samples
        .iter()
        .map(|g| {
            let z = linalg::dot(theta, &g.x);
            g.reward_sum * z - g.count * link.kind.cumulant(z)
        })
        .sum()
}

/// Score vector `Σ (r_l − μ(θᵀx_l)) x_l`.
pub fn score(samples: &[GroupedSample], link: &LinkModel, theta: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; theta.len()];
    for g in samples {
        let z = linalg::dot(theta, &g.x);
        let resid = g.reward_sum - g.count * link.mu(z);
        for (si, xi) in s.iter_mut().zip(&g.x) {
            *si += resid * xi;
        }
    }
    s
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `theta` back onto the ball of radius `cap`; true when the result
/// lies on the boundary (up to rounding).
fn project(theta: &mut [f64], cap: f64) -> bool {
    let n = norm(theta);
    if n > cap {
        let s = cap / n;
        theta.iter_mut().for_each(|v| *v *= s);
    }
    n >= cap * (1.0 - 1e-12)
}

/// Fits θ by damped Newton iteration, warm-started from `warm_start` (zero
/// when absent).
pub fn fit_mle(
    samples: &[GroupedSample],
    link: &LinkModel,
    warm_start: Option<&[f64]>,
    options: &MleOptions,
) -> Result<MleSolution> {
    fit_mle_traced(samples, link, warm_start, options, None)
}

pub(crate) fn fit_mle_traced(
    samples: &[GroupedSample],
    link: &LinkModel,
    warm_start: Option<&[f64]>,
    options: &MleOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<MleSolution> {
    let d = match samples.first() {
        Some(g) => g.x.len(),
        None => return Err(Error::InvalidArgument("empty history".into())),
    };
    if let Some(g) = samples.iter().find(|g| g.x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: g.x.len(),
        });
    }
    let mut theta = match warm_start {
        Some(w) if w.len() == d => w.to_vec(),
        Some(w) => {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: w.len(),
            })
        }
        None => vec![0.0; d],
    };
    let mut projected = project(&mut theta, options.param_cap);
    let mut ll = log_likelihood(samples, link, &theta);
    if let Some(t) = trace.as_deref_mut() {
        t.push(ll);
    }

    let mut hessian = vec![0.0; d * d];
    for iteration in 0..=options.max_iterations {
        let grad = score(samples, link, &theta);
        let score_norm = norm(&grad);
        if score_norm <= options.tolerance {
            return Ok(MleSolution {
                theta,
                score_norm,
                iterations: iteration,
                projected,
                log_likelihood: ll,
            });
        }
        if iteration == options.max_iterations {
            return Err(Error::MleNotConverged {
                iterations: iteration,
                score_norm,
                best: theta,
            });
        }

        hessian.iter_mut().for_each(|h| *h = 0.0);
        for g in samples {
            let z = linalg::dot(&theta, &g.x);
            linalg::add_outer(&mut hessian, d, &g.x, g.count * link.mu_dot(z));
        }
        let chol = linalg::cholesky(&hessian, d).ok_or(Error::SingularHessian)?;
        let step = linalg::cholesky_solve(&chol, d, &grad);

        // Backtracking: halve until the (projected) iterate does not lower the
        // log-likelihood. Once the Newton decrement is below rounding noise of
        // the log-likelihood the full step is taken unconditionally.
        let decrement = linalg::dot(&grad, &step);
        let mut scale = 1.0;
        let mut accepted = None;
        if decrement <= 1e-10 * (1.0 + ll.abs()) {
            let mut cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
            let hit_cap = project(&mut cand, options.param_cap);
            let cand_ll = log_likelihood(samples, link, &cand);
            accepted = Some((cand, cand_ll, hit_cap));
        }
        for _ in 0..=options.max_halvings {
            if accepted.is_some() {
                break;
            }
            let mut cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
            let hit_cap = project(&mut cand, options.param_cap);
            let cand_ll = log_likelihood(samples, link, &cand);
            if cand_ll >= ll {
                accepted = Some((cand, cand_ll, hit_cap));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_ll, hit_cap)) = accepted else {
            if projected {
                // No ascent left inside the ball: constrained optimum.
                return Ok(MleSolution {
                    theta,
                    score_norm,
                    iterations: iteration,
                    projected,
                    log_likelihood: ll,
                });
            }
            return Err(Error::MleNotConverged {
                iterations: iteration,
                score_norm,
                best: theta,
            });
        };
        let moved = theta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        theta = cand;
        ll = cand_ll;
        projected = hit_cap;
        if let Some(t) = trace.as_deref_mut() {
            t.push(ll);
        }
        if projected && moved <= 1e-10 * (1.0 + options.param_cap) {
            let score_norm = norm(&score(samples, link, &theta));
            return Ok(MleSolution {
                theta,
                score_norm,
                iterations: iteration + 1,
                projected,
                log_likelihood: ll,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}
