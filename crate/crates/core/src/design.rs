//! Observation history and the empirical covariance `M_t = Σ x_l x_lᵀ`.

use crate::error::{Error, Result};
use crate::estimator::GroupedSample;
use crate::linalg;

/// Direct re-inversion cadence for the incrementally maintained inverse.
const REFRESH_EVERY: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub arm: usize,
    pub x: Vec<f64>,
    pub reward: f64,
}

/// Running design of a single identification run.
///
/// `M` is kept dense and row-major. Once `M` becomes nonsingular its inverse is
/// maintained by Sherman–Morrison updates and re-inverted from scratch every
/// 256 updates.
#[derive(Debug, Clone)]
pub struct DesignState {
    dim: usize,
    history: Vec<Observation>,
    gram: Vec<f64>,
    inverse: Option<Vec<f64>>,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    arm_rows: Vec<Option<Vec<f64>>>,
    since_refresh: usize,
    lambda_0: Option<f64>,
}

impl DesignState {
    pub fn new(dim: usize, num_arms: usize) -> Self {
        Self {
            dim,
            history: Vec::new(),
            gram: vec![0.0; dim * dim],
            inverse: None,
            counts: vec![0; num_arms],
            reward_sums: vec![0.0; num_arms],
            arm_rows: vec![None; num_arms],
            since_refresh: 0,
            lambda_0: None,
        }
    }

    /// Starts from an explicit covariance, with no history. Used to reason
    /// about designs directly (e.g. `M = I`).
    pub fn from_gram(gram: Vec<f64>, dim: usize, num_arms: usize) -> Result<Self> {
        if gram.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: gram.len(),
            });
        }
        let mut s = Self::new(dim, num_arms);
        s.gram = gram;
        linalg::symmetrize(&mut s.gram, dim);
        s.refresh_inverse();
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    /// Current round index `t`: number of observations plus one.
    pub fn round(&self) -> u64 {
        self.history.len() as u64 + 1
    }

    pub fn num_pulls(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn inverse(&self) -> Option<&[f64]> {
        self.inverse.as_deref()
    }

    pub fn is_nonsingular(&self) -> bool {
        self.inverse.is_some()
    }

    /// Per-arm play counts `T_a(t)`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn lambda_0(&self) -> Option<f64> {
        self.lambda_0
    }

    /// Freezes λ₀ as the current minimum eigenvalue (end of the exploratory
    /// phase) and returns it.
    pub fn record_lambda_0(&mut self) -> f64 {
        let l = self.min_eigenvalue();
        self.lambda_0 = Some(l);
        l
    }

    /// Records one pull of `arm` with features `x` and reward `r`.
    pub fn update(&mut self, arm: usize, x: &[f64], r: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        if arm >= self.counts.len() {
            return Err(Error::InvalidArm {
                arm,
                num_arms: self.counts.len(),
            });
        }
        if !r.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite observation".into()));
        }
        let n = self.dim;
        linalg::add_outer(&mut self.gram, n, x, 1.0);
        self.counts[arm] += 1;
        self.reward_sums[arm] += r;
        match &self.arm_rows[arm] {
            Some(row) => debug_assert_eq!(row.as_slice(), x, "arm {arm} changed features"),
            None => self.arm_rows[arm] = Some(x.to_vec()),
        }
        self.history.push(Observation {
            arm,
            x: x.to_vec(),
            reward: r,
        });

        match self.inverse.as_mut() {
            Some(inv) => {
                self.since_refresh += 1;
                if self.since_refresh >= REFRESH_EVERY {
                    self.refresh_inverse();
                } else {
                    // (M + x xᵀ)⁻¹ = M⁻¹ − (M⁻¹x)(M⁻¹x)ᵀ / (1 + xᵀM⁻¹x)
                    let v = linalg::mat_vec(inv, n, x);
                    let denom = 1.0 + linalg::dot(x, &v);
                    linalg::add_outer(inv, n, &v, -1.0 / denom);
                    linalg::symmetrize(inv, n);
                }
            }
            None => self.refresh_inverse(),
        }
        Ok(())
    }

    fn refresh_inverse(&mut self) {
        self.since_refresh = 0;
        let n = self.dim;
        let tr = linalg::trace(&self.gram, n);
        let nonsingular = n > 0 && tr > 0.0 && self.min_eigenvalue() > 1e-10 * tr / n as f64;
        self.inverse = if nonsingular {
            linalg::spd_inverse(&self.gram, n)
        } else {
            None
        };
    }

    /// `sqrt(yᵀ M⁻¹ y)`.
    pub fn mahalanobis_norm(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: y.len(),
            });
        }
        let inv = self.inverse.as_ref().ok_or(Error::SingularDesign)?;
        Ok(linalg::quad_form(inv, self.dim, y).max(0.0).sqrt())
    }

    /// Smallest eigenvalue of `M`.
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::symmetric_eigenvalues(&self.gram, self.dim)
            .first()
            .copied()
            .unwrap_or(0.0)
    }

    /// Numerical rank of `M` (eigenvalues above the nonsingularity threshold).
    pub fn rank(&self) -> usize {
        let n = self.dim;
        let tr = linalg::trace(&self.gram, n);
        if tr <= 0.0 {
            return 0;
        }
        linalg::symmetric_eigenvalues(&self.gram, n)
            .into_iter()
            .filter(|&e| e > 1e-10 * tr / n as f64)
            .count()
    }

    /// Observations aggregated by arm: `(x_a, T_a, Σ rewards of a)`.
    pub fn grouped_samples(&self) -> Vec<GroupedSample> {
        self.arm_rows
            .iter()
            .zip(&self.counts)
            .zip(&self.reward_sums)
            .filter_map(|((row, &count), &sum)| {
                row.as_ref().map(|x| GroupedSample {
                    x: x.clone(),
                    count: count as f64,
                    reward_sum: sum,
                })
            })
            .collect()
    }

    /// Rebuilds `M` from the stored history.
    pub fn rebuild_gram(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim * self.dim];
        for obs in &self.history {
            linalg::add_outer(&mut m, self.dim, &obs.x, 1.0);
        }
        m
    }
}
