//! Gap selection and arm selection.
//!
//! `select_gap` picks the empirical best arm `i_t` and the challenger `j_t`
//! with the largest pessimistic advantage `Δ_t(j, i_t) + β_t(i_t, j)`.
//! `select_arm` plays the arm that is most behind its L1-optimal allocation
//! for the direction `y_t = c1·x^{i_t} − c2·x^{j_t}`.

use serde::Serialize;

use crate::confidence::PairQuadratic;
use crate::design::DesignState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::linkfn::LinkModel;
use crate::lp;

/// Weights below this magnitude are treated as exact zeros.
const WEIGHT_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCertificate {
    /// Empirical best arm.
    pub i_t: usize,
    /// Most ambiguous challenger.
    pub j_t: usize,
    /// Stopping statistic `Δ_t(j_t, i_t) + β_t(i_t, j_t)`; may be negative.
    pub b_t: f64,
    pub gap_estimate: f64,
    pub width: f64,
    pub c1: f64,
    pub c2: f64,
    /// `c1·x^{i_t} − c2·x^{j_t}`.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub w_star: Vec<f64>,
    pub p: Vec<f64>,
    /// `‖w*‖₁`.
    pub rho: f64,
}

impl Allocation {
    pub fn from_weights(mut w_star: Vec<f64>) -> Self {
        let scale = w_star.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for w in w_star.iter_mut() {
            if w.abs() <= WEIGHT_ZERO * scale.max(1.0) {
                *w = 0.0;
            }
        }
        let rho: f64 = w_star.iter().map(|w| w.abs()).sum();
        let p = if rho > 0.0 {
            w_star.iter().map(|w| w.abs() / rho).collect()
        } else {
            vec![0.0; w_star.len()]
        };
        Self { w_star, p, rho }
    }

    /// `min_{k: p_k > 0} T_k / p_k`.
    pub fn effective_count(&self, counts: &[u64]) -> f64 {
        self.p
            .iter()
            .zip(counts)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &t)| t as f64 / p)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn select_gap(
    theta: &[f64],
    link: &LinkModel,
    design: &DesignState,
    c_t: f64,
    features: &[Vec<f64>],
) -> Result<GapCertificate> {
    let k = features.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("select_gap needs at least 2 arms, got {k}")));
    }
    let d = design.dim();
    if let Some(row) = features.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: row.len(),
        });
    }
    let inv = design.inverse().ok_or(Error::SingularDesign)?;
    let scores: Vec<f64> = features.iter().map(|x| linalg::dot(theta, x)).collect();
    let means: Vec<f64> = scores.iter().map(|&z| link.mu(z)).collect();
    // μ is strictly increasing, so ranking by the linear predictor avoids ties
    // introduced by saturation of μ.
    let i_t = argmax(scores.iter().copied()).expect("k >= 2");

    let v = linalg::mat_vec(inv, d, &features[i_t]);
    let qii = linalg::dot(&features[i_t], &v);
    let mut best: Option<(usize, f64, f64, f64, f64, f64)> = None;
    for (j, x_j) in features.iter().enumerate() {
        if j == i_t {
            continue;
        }
        let q = PairQuadratic {
            qii,
            qjj: linalg::quad_form(inv, d, x_j),
            qij: linalg::dot(x_j, &v),
        };
        let (norm, c1, c2) = q.max_corner(link.c_mu, link.k_mu);
        let gap = means[j] - means[i_t];
        let width = c_t * norm;
        let b = gap + width;
        if best.map_or(true, |(_, bb, ..)| b > bb) {
            best = Some((j, b, gap, width, c1, c2));
        }
    }
    let (j_t, b_t, gap_estimate, width, c1, c2) = best.expect("k >= 2");
    let direction = features[i_t]
        .iter()
        .zip(&features[j_t])
        .map(|(a, b)| c1 * a - c2 * b)
        .collect();
    Ok(GapCertificate {
        i_t,
        j_t,
        b_t,
        gap_estimate,
        width,
        c1,
        c2,
        direction,
    })
}

/// L1-optimal allocation for direction `y`.
pub fn solve_direction_lp(features: &[Vec<f64>], y: &[f64]) -> Result<Allocation> {
    Ok(Allocation::from_weights(lp::min_l1_representation(features, y)?))
}

/// `argmin_{a: p_a > 0} T_a / p_a`, lowest index on ties.
pub fn select_arm(alloc: &Allocation, counts: &[u64]) -> Result<usize> {
    if alloc.p.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: alloc.p.len(),
            actual: counts.len(),
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (a, (&p, &t)) in alloc.p.iter().zip(counts).enumerate() {
        if p > 0.0 {
            let ratio = t as f64 / p;
            if best.map_or(true, |(_, r)| ratio < r) {
                best = Some((a, ratio));
            }
        }
    }
    best.map(|(a, _)| a)
        .ok_or(Error::InvalidArgument("allocation has no positive probability".into()))
}
