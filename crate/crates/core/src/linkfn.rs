//! Inverse link functions and the regularity constants the algorithm needs.
//!
//! A [`LinkModel`] bundles the inverse link μ with the bounds that appear in
//! the confidence widths: the reward bound `R`, the Lipschitz constant `k_mu`,
//! the slope floor `c_mu` over the parameter/feature ball, and the ball radii
//! `S` (parameter) and `L` (features).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Beyond this magnitude the logistic function is clamped so that it stays in
/// the open interval (0, 1).
const LOGISTIC_CLAMP: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Logistic,
    Poisson,
    Identity,
}

impl LinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Logistic => "logistic",
            LinkKind::Poisson => "poisson",
            LinkKind::Identity => "identity",
        }
    }

    /// μ(z).
    pub fn mu(self, z: f64) -> f64 {
        match self {
            LinkKind::Logistic => {
                let z = z.clamp(-LOGISTIC_CLAMP, LOGISTIC_CLAMP);
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            LinkKind::Poisson => z.exp(),
            LinkKind::Identity => z,
        }
    }

    /// μ̇(z).
    pub fn mu_dot(self, z: f64) -> f64 {
        match self {
            LinkKind::Logistic => {
                let e = (-z.abs().min(LOGISTIC_CLAMP)).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            LinkKind::Poisson => z.exp(),
            LinkKind::Identity => 1.0,
        }
    }

    /// Log-partition function b(z) of the canonical exponential family, so
    /// that the per-sample log-likelihood is `r z − b(z)` up to a constant.
    pub(crate) fn cumulant(self, z: f64) -> f64 {
        match self {
            LinkKind::Logistic => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            LinkKind::Poisson => z.exp(),
            LinkKind::Identity => 0.5 * z * z,
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LinkKind::Logistic),
            "poisson" => Ok(LinkKind::Poisson),
            "identity" => Ok(LinkKind::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown link kind {other:?} (expected logistic, poisson or identity)"
            ))),
        }
    }
}

/// Inverse link plus regularity constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub kind: LinkKind,
    /// Almost-sure bound on the rewards.
    pub reward_bound: f64,
    /// Lipschitz constant of μ.
    pub k_mu: f64,
    /// Lower bound of μ̇ over the parameter/feature ball.
    pub c_mu: f64,
    /// Bound on the parameter norm.
    pub param_bound: f64,
    /// Bound on the feature norms.
    pub feature_bound: f64,
}

impl LinkModel {
    /// Builds a model from explicitly supplied constants.
    pub fn with_constants(
        kind: LinkKind,
        reward_bound: f64,
        k_mu: f64,
        c_mu: f64,
        param_bound: f64,
        feature_bound: f64,
    ) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("reward_bound", reward_bound)?;
        positive("k_mu", k_mu)?;
        positive("c_mu", c_mu)?;
        positive("param_bound", param_bound)?;
        positive("feature_bound", feature_bound)?;
        if c_mu > k_mu {
            return Err(Error::InvalidArgument(format!(
                "c_mu ({c_mu}) must not exceed k_mu ({k_mu})"
            )));
        }
        Ok(Self {
            kind,
            reward_bound,
            k_mu,
            c_mu,
            param_bound,
            feature_bound,
        })
    }

    /// Derives the constants from the parameter bound `S` and the arm
    /// features: `L` is the largest feature norm and `c_mu` the smallest slope
    /// of μ on `[−S·L, S·L]`.
    ///
    /// `reward_bound` overrides the per-link default (1 for logistic,
    /// `S·L + 1` for identity, `2·e^{S·L} + 10` for poisson).
    pub fn from_features(
        kind: LinkKind,
        param_bound: f64,
        features: &[Vec<f64>],
        reward_bound: Option<f64>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidArgument("feature set is empty".into()));
        }
        if !(param_bound.is_finite() && param_bound > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "param_bound must be finite and > 0, got {param_bound}"
            )));
        }
        let mut l = 0.0f64;
        for (a, row) in features.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("arm {a} has non-finite features")));
            }
            l = l.max(row.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        if l == 0.0 {
            return Err(Error::InvalidArgument("all feature vectors are zero".into()));
        }
        let sl = param_bound * l;
        let (default_r, k_mu) = match kind {
            LinkKind::Logistic => (1.0, 0.25),
            LinkKind::Identity => (sl + 1.0, 1.0),
            LinkKind::Poisson => (2.0 * sl.exp() + 10.0, sl.exp()),
        };
        // μ̇ is unimodal or monotone for every supported link, so the minimum
        // over the interval sits at an endpoint.
        let c_mu = kind.mu_dot(-sl).min(kind.mu_dot(sl)).min(k_mu);
        Self::with_constants(kind, reward_bound.unwrap_or(default_r), k_mu, c_mu, param_bound, l)
    }

    pub fn mu(&self, z: f64) -> f64 {
        self.kind.mu(z)
    }

    pub fn mu_dot(&self, z: f64) -> f64 {
        self.kind.mu_dot(z)
    }

    /// `2κR / c_mu`, the width multiplier under which the gap confidence sets
    /// hold with probability `1 − δ`.
    pub fn theoretical_alpha(&self, kappa: Kappa) -> f64 {
        2.0 * kappa.value() * self.reward_bound / self.c_mu
    }
}

/// κ = sqrt(3 + 2 ln(1 + 2L²/λ₀)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub lambda_0: f64,
    pub feature_bound: f64,
    kappa: f64,
}

impl Kappa {
    pub fn new(lambda_0: f64, feature_bound: f64) -> Result<Self> {
        if !(lambda_0.is_finite() && lambda_0 > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda_0 must be > 0, got {lambda_0}")));
        }
        if !(feature_bound.is_finite() && feature_bound > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "feature bound must be > 0, got {feature_bound}"
            )));
        }
        let l2 = feature_bound * feature_bound;
        let kappa = (3.0 + 2.0 * (2.0 * l2 / lambda_0).ln_1p()).sqrt();
        Ok(Self {
            lambda_0,
            feature_bound,
            kappa,
        })
    }

    pub fn value(&self) -> f64 {
        self.kappa
    }
}
