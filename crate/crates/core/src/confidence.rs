//! Gap estimates and their confidence widths.
//!
//! The confidence set for the gap between arms `i` and `j` at round `t` is
//! centred on the plug-in estimate `μ(θ_tᵀxⁱ) − μ(θ_tᵀxʲ)` and has half-width
//!
//! ```text
//! β_t(i,j) = C_t · max_{c,c' ∈ [c_mu, k_mu]} ‖c xⁱ − c' xʲ‖_{M_t⁻¹}
//! C_t      = α · sqrt(2d · ln t · ln(π² d t² / (6δ)))
//! ```
//!
//! The squared norm is a convex quadratic in `(c, c')`, so the maximum over
//! the box is attained at one of its four corners.

use std::f64::consts::PI;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::design::DesignState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::linkfn::{Kappa, LinkModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthSchedule {
    pub alpha: f64,
    pub dim: usize,
    pub delta: f64,
}

impl WidthSchedule {
    pub fn new(alpha: f64, dim: usize, delta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { alpha, dim, delta })
    }

    /// `C_t` for round `t ≥ 2`.
    pub fn width_scale(&self, t: u64) -> Result<f64> {
        if t < 2 {
            return Err(Error::InvalidArgument(format!("C_t is defined for t >= 2, got {t}")));
        }
        Ok(self.alpha * unit_width_scale(self.dim, self.delta, t as f64))
    }
}

/// `sqrt(2d · ln t · ln(π² d t² / (6δ)))`, i.e. `C_t` with `α = 1`.
pub fn unit_width_scale(dim: usize, delta: f64, t: f64) -> f64 {
    let d = dim as f64;
    (2.0 * d * t.ln() * (PI * PI * d * t * t / (6.0 * delta)).ln()).sqrt()
}

/// `Δ_t(i, j) = μ(θᵀxⁱ) − μ(θᵀxʲ)`.
pub fn gap_estimate(theta: &[f64], link: &LinkModel, x_i: &[f64], x_j: &[f64]) -> f64 {
    link.mu(linalg::dot(theta, x_i)) - link.mu(linalg::dot(theta, x_j))
}

/// Width of a gap confidence set and the corner `(c1, c2)` attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapWidth {
    pub width: f64,
    pub c1: f64,
    pub c2: f64,
}

/// The three Mahalanobis inner products needed for one pair of arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairQuadratic {
    pub qii: f64,
    pub qjj: f64,
    pub qij: f64,
}

impl PairQuadratic {
    /// `‖c xⁱ − c' xʲ‖²_{M⁻¹}`.
    pub fn squared_norm(&self, c: f64, c_prime: f64) -> f64 {
        c * c * self.qii - 2.0 * c * c_prime * self.qij + c_prime * c_prime * self.qjj
    }

    /// Maximum of the norm over `[lo, hi]²`, evaluated at the four corners in
    /// lexicographic order; ties keep the lexicographically smallest corner.
    pub fn max_corner(&self, lo: f64, hi: f64) -> (f64, f64, f64) {
        let mut best = (f64::NEG_INFINITY, lo, lo);
        for (c1, c2) in [(lo, lo), (lo, hi), (hi, lo), (hi, hi)] {
            let v = self.squared_norm(c1, c2);
            if v > best.0 {
                best = (v, c1, c2);
            }
        }
        (best.0.max(0.0).sqrt(), best.1, best.2)
    }
}

/// `β_t(i, j)` with the maximizing corner.
pub fn gap_width(
    link: &LinkModel,
    design: &DesignState,
    c_t: f64,
    x_i: &[f64],
    x_j: &[f64],
) -> Result<GapWidth> {
    let d = design.dim();
    for x in [x_i, x_j] {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
    }
    let inv = design.inverse().ok_or(Error::SingularDesign)?;
    let q = PairQuadratic {
        qii: linalg::quad_form(inv, d, x_i),
        qjj: linalg::quad_form(inv, d, x_j),
        qij: linalg::bilinear_form(inv, d, x_i, x_j),
    };
    let (norm, c1, c2) = q.max_corner(link.c_mu, link.k_mu);
    Ok(GapWidth {
        width: c_t * norm,
        c1,
        c2,
    })
}

/// Interval `[center − width, center + width]` for `Δ(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapInterval {
    pub center: f64,
    pub width: f64,
    pub arms: (usize, usize),
}

impl GapInterval {
    pub fn contains(&self, gap: f64) -> bool {
        (gap - self.center).abs() <= self.width
    }

    pub fn lower(&self) -> f64 {
        self.center - self.width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.width
    }
}

/// Mahalanobis Gram matrix `Q[i][j] = xⁱᵀ M⁻¹ xʲ` of an arm set.
#[derive(Debug, Clone)]
pub struct FeatureGram {
    k: usize,
    q: Vec<f64>,
}

impl FeatureGram {
    pub fn new(design: &DesignState, features: &[Vec<f64>]) -> Result<Self> {
        let d = design.dim();
        let inv = design.inverse().ok_or(Error::SingularDesign)?;
        let projected: Vec<Vec<f64>> = features.iter().map(|x| linalg::mat_vec(inv, d, x)).collect();
        let k = features.len();
        let mut q = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let v = linalg::dot(&features[i], &projected[j]);
                q[i * k + j] = v;
                q[j * k + i] = v;
            }
        }
        Ok(Self { k, q })
    }

    pub fn pair(&self, i: usize, j: usize) -> PairQuadratic {
        PairQuadratic {
            qii: self.q[i * self.k + i],
            qjj: self.q[j * self.k + j],
            qij: self.q[i * self.k + j],
        }
    }

    /// `max_{i,j} max_{c,c'} ‖c xⁱ − c' xʲ‖_{M⁻¹}`.
    pub fn max_pair_norm(&self, lo: f64, hi: f64) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.k {
            for j in 0..self.k {
                best = best.max(self.pair(i, j).max_corner(lo, hi).0);
            }
        }
        best
    }
}

/// Width multiplier that makes the widest pairwise confidence set at the end
/// of the exploratory phase (round `exploration_len`) equal to
/// `c_mu / (2κR)`; equivalently, scaling the theoretical multiplier `2κR/c_mu`
/// by the returned value makes that widest set exactly 1.
pub fn calibrate_alpha(
    link: &LinkModel,
    design: &DesignState,
    features: &[Vec<f64>],
    exploration_len: usize,
    delta: f64,
) -> Result<f64> {
    if exploration_len < 2 {
        return Err(Error::InvalidArgument(format!(
            "exploratory phase must have at least 2 pulls, got {exploration_len}"
        )));
    }
    let gram = FeatureGram::new(design, features)?;
    let max_norm = gram.max_pair_norm(link.c_mu, link.k_mu);
    if !(max_norm > 0.0) {
        return Err(Error::InvalidArgument("all pairwise widths are zero".into()));
    }
    let kappa = design_kappa(link, design)?;
    let scale = unit_width_scale(design.dim(), delta, exploration_len as f64);
    Ok(1.0 / (link.theoretical_alpha(kappa) * scale * max_norm))
}

/// κ from the design's recorded λ₀ (or its current minimum eigenvalue).
pub fn design_kappa(link: &LinkModel, design: &DesignState) -> Result<Kappa> {
    let lambda_0 = design.lambda_0().unwrap_or_else(|| design.min_eigenvalue());
    Kappa::new(lambda_0, link.feature_bound)
}

/// How the width multiplier α is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// `α = 2κR / c_mu`.
    Theoretical,
    /// Calibrated at the end of the exploratory phase so the widest pairwise
    /// confidence set has width 1.
    Empirical,
    Explicit(f64),
}

impl Serialize for AlphaMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AlphaMode::Theoretical => s.serialize_str("theoretical"),
            AlphaMode::Empirical => s.serialize_str("empirical"),
            AlphaMode::Explicit(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Value(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Name(n) if n == "theoretical" => Ok(AlphaMode::Theoretical),
            Raw::Name(n) if n == "empirical" => Ok(AlphaMode::Empirical),
            Raw::Name(n) => Err(de::Error::custom(format!(
                "alpha_mode must be \"theoretical\", \"empirical\" or a positive number, got {n:?}"
            ))),
            Raw::Value(v) if v.is_finite() && v > 0.0 => Ok(AlphaMode::Explicit(v)),
            Raw::Value(v) => Err(de::Error::custom(format!("alpha_mode must be positive, got {v}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkfn::LinkKind;
    use approx::assert_relative_eq;

    fn link(c_mu: f64, k_mu: f64) -> LinkModel {
        LinkModel::with_constants(LinkKind::Logistic, 1.0, k_mu, c_mu, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gap_estimate_examples() {
        let l = link(0.1, 0.25);
        assert_eq!(gap_estimate(&[0.3, -1.0], &l, &[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(gap_estimate(&[0.0, 0.0], &l, &[1.0, 2.0], &[-3.0, 0.5]), 0.0);
        let g = gap_estimate(&[3f64.ln()], &l, &[1.0], &[-1.0]);
        assert_relative_eq!(g, 0.5, epsilon = 1e-15);
        assert_eq!(g, -gap_estimate(&[3f64.ln()], &l, &[-1.0], &[1.0]));
    }

    #[test]
    fn width_scale_examples() {
        let zero = WidthSchedule::new(0.0, 3, 0.05).unwrap();
        assert_eq!(zero.width_scale(10).unwrap(), 0.0);
        // Direct formula evaluation: sqrt(2 · ln 10 · ln(π² · 100 / 0.3)).
        let expected = (2.0 * 10f64.ln() * (PI * PI * 100.0 / 0.3).ln()).sqrt();
        assert_relative_eq!(expected, 6.107, epsilon = 5e-4);
        let one = WidthSchedule::new(1.0, 1, 0.05).unwrap();
        assert_relative_eq!(one.width_scale(10).unwrap(), expected, epsilon = 1e-12);
        let two = WidthSchedule::new(2.0, 1, 0.05).unwrap();
        assert_eq!(two.width_scale(10).unwrap(), 2.0 * one.width_scale(10).unwrap());
        assert!(one.width_scale(1).is_err());
        let mut prev = one.width_scale(2).unwrap();
        for t in 3..500 {
            let c = one.width_scale(t).unwrap();
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn orthonormal_pair_width() {
        let l = link(0.1, 0.25);
        let design = DesignState::from_gram(linalg::identity(2), 2, 2).unwrap();
        let w = gap_width(&l, &design, 1.0, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(w.width, 0.25 * 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!((w.c1, w.c2), (0.25, 0.25));
    }

    #[test]
    fn identical_arms_width() {
        let l = link(0.1, 0.25);
        let design = DesignState::from_gram(linalg::identity(2), 2, 2).unwrap();
        let x = [0.6, 0.8];
        let w = gap_width(&l, &design, 1.0, &x, &x).unwrap();
        assert_relative_eq!(w.width, 0.15, epsilon = 1e-15);
        // Both opposite corners tie; the lexicographically smallest wins.
        assert_eq!((w.c1, w.c2), (0.1, 0.25));
    }

    #[test]
    fn degenerate_box_picks_first_corner() {
        let l = LinkModel::with_constants(LinkKind::Identity, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let design = DesignState::from_gram(linalg::identity(1), 1, 2).unwrap();
        let w = gap_width(&l, &design, 2.0, &[1.0], &[-1.0]).unwrap();
        assert_eq!((w.width, w.c1, w.c2), (4.0, 1.0, 1.0));
    }

    #[test]
    fn singular_design_rejected() {
        let l = link(0.1, 0.25);
        let design = DesignState::new(2, 2);
        assert_eq!(
            gap_width(&l, &design, 1.0, &[1.0, 0.0], &[0.0, 1.0]),
            Err(Error::SingularDesign)
        );
    }

    #[test]
    fn interval_membership() {
        let iv = GapInterval {
            center: 0.2,
            width: 0.1,
            arms: (0, 1),
        };
        assert!(iv.contains(0.3) && iv.contains(0.1) && !iv.contains(0.31));
        assert_relative_eq!(iv.lower(), 0.1, epsilon = 1e-15);
    }
}
