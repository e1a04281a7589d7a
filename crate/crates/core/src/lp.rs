//! Minimum-L1 representation of a direction in terms of the arm features:
//!
//! ```text
//! min ‖w‖₁  s.t.  Σ_k w_k xᵏ = y
//! ```
//!
//! Solved as the standard-form LP over `w = u − v`, `u, v ≥ 0`, by a dense
//! two-phase revised simplex. Entering columns are priced by most negative
//! reduced cost, falling back to Bland's rule on degenerate pivots so the
//! method cannot cycle. The basis inverse is kept explicitly, updated in
//! product form and refactorized every few dozen pivots.

use crate::error::{Error, Result};
use crate::linalg::Lu;

/// Pivot elements smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-11;
/// Pivot elements below this fraction of the largest entry of the entering
/// column are treated as zero as well.
const RELATIVE_PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
/// Relative tolerance for zero basic values and ratio-test ties.
const ZERO_TOL: f64 = 1e-12;

struct Problem {
    rows: usize,
    /// Structural columns (`2K`) followed by one artificial per row.
    columns: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    num_structural: usize,
    /// `1 + max |rhs|`.
    scale: f64,
}

impl Problem {
    fn basis_matrix(&self, basis: &[usize]) -> Vec<f64> {
        let m = self.rows;
        let mut b = vec![0.0; m * m];
        for (col, &j) in basis.iter().enumerate() {
            for i in 0..m {
                b[i * m + col] = self.columns[j][i];
            }
        }
        b
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.num_structural
    }

    /// The column of the same arm with opposite sign. Entering it while its
    /// twin is basic never improves the objective.
    fn twin(&self, j: usize) -> Option<usize> {
        let k = self.num_structural / 2;
        match j {
            j if j < k => Some(j + k),
            j if j < 2 * k => Some(j - k),
            _ => None,
        }
    }
}

/// Explicit inverse of the basis matrix, updated in product form after each
/// pivot and refactorized periodically.
struct BasisInverse {
    m: usize,
    inv: Vec<f64>,
    updates: usize,
}

impl BasisInverse {
    fn factor(p: &Problem, basis: &[usize]) -> Result<Self> {
        let m = p.rows;
        let lu = Lu::factor(&p.basis_matrix(basis), m, PIVOT_TOL)
            .ok_or(Error::InvalidArgument("simplex basis became singular".into()))?;
        let mut inv = vec![0.0; m * m];
        let mut e = vec![0.0; m];
        for c in 0..m {
            e[c] = 1.0;
            for (r, v) in lu.solve(&e).into_iter().enumerate() {
                inv[r * m + c] = v;
            }
            e[c] = 0.0;
        }
        Ok(Self { m, inv, updates: 0 })
    }

    /// `B⁻¹ v`.
    fn solve(&self, v: &[f64]) -> Vec<f64> {
        crate::linalg::mat_vec(&self.inv, self.m, v)
    }

    /// `B⁻ᵀ v`.
    fn solve_transpose(&self, v: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                for (o, a) in out.iter_mut().zip(&self.inv[r * m..(r + 1) * m]) {
                    *o += vr * a;
                }
            }
        }
        out
    }

    /// Replaces basic position `r`, given `dir = B⁻¹ a_q` for the entering
    /// column.
    fn pivot(&mut self, r: usize, dir: &[f64]) {
        let m = self.m;
        let piv = dir[r];
        let row_r: Vec<f64> = self.inv[r * m..(r + 1) * m].iter().map(|v| v / piv).collect();
        for (i, &di) in dir.iter().enumerate() {
            if i == r || di == 0.0 {
                continue;
            }
            for (a, b) in self.inv[i * m..(i + 1) * m].iter_mut().zip(&row_r) {
                *a -= di * b;
            }
        }
        self.inv[r * m..(r + 1) * m].copy_from_slice(&row_r);
        self.updates += 1;
    }
}

/// Product-form updates between refactorizations.
const REFACTOR_EVERY: usize = 32;

/// Runs simplex iterations from `basis` for the cost vector `cost`. Columns
/// for which `allowed` is false never enter.
fn iterate(
    p: &Problem,
    basis: &mut [usize],
    cost: &[f64],
    allowed: &dyn Fn(usize) -> bool,
    max_pivots: usize,
) -> Result<Vec<f64>> {
    let mut in_basis = vec![false; p.columns.len()];
    basis.iter().for_each(|&j| in_basis[j] = true);
    let mut binv = BasisInverse::factor(p, basis)?;
    let mut degenerate = false;
    for _ in 0..max_pivots {
        if binv.updates >= REFACTOR_EVERY {
            binv = BasisInverse::factor(p, basis)?;
        }
        let x_b = binv.solve(&p.rhs);
        let c_b: Vec<f64> = basis.iter().map(|&j| cost[j]).collect();
        let duals = binv.solve_transpose(&c_b);

        // Most negative reduced cost enters; after a degenerate pivot Bland's
        // rule (lowest eligible index) is used until the objective moves again.
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..p.columns.len() {
            if in_basis[j] || !allowed(j) || p.twin(j).is_some_and(|t| in_basis[t]) {
                continue;
            }
            let reduced = cost[j] - p.columns[j].iter().zip(&duals).map(|(a, y)| a * y).sum::<f64>();
            if reduced < -COST_TOL && entering.map_or(true, |(_, best)| reduced < best) {
                entering = Some((j, reduced));
                if degenerate {
                    break;
                }
            }
        }
        let Some((q, _)) = entering else {
            // Report basic values from a fresh factorization.
            return Ok(BasisInverse::factor(p, basis)?.solve(&p.rhs));
        };

        let dir = binv.solve(&p.columns[q]);
        // Ratio test; ties go to the basic variable with the lowest index.
        // Basic values at rounding level count as zero and near-equal ratios as
        // ties, otherwise noise defeats Bland's rule at degenerate vertices.
        let min_pivot = PIVOT_TOL.max(RELATIVE_PIVOT_TOL * dir.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let mut leave: Option<(usize, f64)> = None;
        for (r, (&xr, &dr)) in x_b.iter().zip(&dir).enumerate() {
            if dr > min_pivot {
                let xr = if xr <= ZERO_TOL * p.scale { 0.0 } else { xr };
                let ratio = xr / dr;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        let tie = (ratio - lratio).abs() <= ZERO_TOL * (1.0 + lratio.abs());
                        if (tie && basis[r] < basis[lr]) || (!tie && ratio < lratio) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((r, step)) = leave else {
            // The objective is bounded below, so a missing leaving row means
            // the updated inverse has drifted: refactorize and retry.
            if binv.updates > 0 {
                binv = BasisInverse::factor(p, basis)?;
                continue;
            }
            return Err(Error::InvalidArgument("L1 program is unbounded".into()));
        };
        degenerate = step == 0.0;
        in_basis[basis[r]] = false;
        in_basis[q] = true;
        basis[r] = q;
        binv.pivot(r, &dir);
    }
    Err(Error::SimplexIterationLimit(max_pivots))
}

/// Returns the L1-minimal weights `w` with `Σ w_k xᵏ = y`.
pub fn min_l1_representation(features: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    solve(features, y)
}

fn solve(features: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let k = features.len();
    let d = y.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no arms".into()));
    }
    if let Some(row) = features.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: row.len(),
        });
    }
    // Flip rows so the right-hand side is non-negative.
    let sign: Vec<f64> = y.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut columns = Vec::with_capacity(2 * k + d);
    for x in features {
        columns.push(x.iter().zip(&sign).map(|(a, s)| a * s).collect::<Vec<_>>());
    }
    for x in features {
        columns.push(x.iter().zip(&sign).map(|(a, s)| -a * s).collect::<Vec<_>>());
    }
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        columns.push(e);
    }
    let problem = Problem {
        rows: d,
        columns,
        rhs: y.iter().zip(&sign).map(|(a, s)| a * s).collect(),
        num_structural: 2 * k,
        scale: 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs())),
    };
    let n = problem.columns.len();
    let max_pivots = 50 * n + 100;

    // Phase 1: drive the artificials to zero.
    let mut basis: Vec<usize> = (2 * k..2 * k + d).collect();
    let phase1_cost: Vec<f64> = (0..n).map(|j| if problem.is_artificial(j) { 1.0 } else { 0.0 }).collect();
    let x_b = iterate(&problem, &mut basis, &phase1_cost, &|_| true, max_pivots)?;
    let infeasibility: f64 = basis
        .iter()
        .zip(&x_b)
        .filter(|(&j, _)| problem.is_artificial(j))
        .map(|(_, v)| v.abs())
        .sum();
    if infeasibility > 1e-9 * problem.scale {
        return Err(Error::InfeasibleDirection {
            residual: infeasibility,
        });
    }

    // Pivot zero-level artificials out where a structural column can replace
    // them; the ones that remain belong to redundant rows.
    let mut binv = BasisInverse::factor(&problem, &basis)?;
    for r in 0..d {
        if !problem.is_artificial(basis[r]) {
            continue;
        }
        let row = &binv.inv[r * d..(r + 1) * d];
        let replacement = (0..2 * k).find(|&j| {
            !basis.contains(&j) && row.iter().zip(&problem.columns[j]).map(|(a, b)| a * b).sum::<f64>().abs() > 1e-9
        });
        if let Some(j) = replacement {
            let dir = binv.solve(&problem.columns[j]);
            binv.pivot(r, &dir);
            basis[r] = j;
        }
    }

    // Phase 2: minimize Σ (u + v) with artificials barred from entering.
    let phase2_cost: Vec<f64> = (0..n).map(|j| if problem.is_artificial(j) { 0.0 } else { 1.0 }).collect();
    let x_b = iterate(
        &problem,
        &mut basis,
        &phase2_cost,
        &|j| j < 2 * k,
        max_pivots,
    )?;

    let mut w = vec![0.0; k];
    for (&j, &v) in basis.iter().zip(&x_b) {
        if j < k {
            w[j] += v;
        } else if j < 2 * k {
            w[j - k] -= v;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(k: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn unit_vector_representation() {
        let w = min_l1_representation(&basis(3), &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(w, vec![1.0, 0.0, 0.0]);
        let w = min_l1_representation(&basis(3), &[2.0, -3.0, 0.0]).unwrap();
        assert_eq!(w, vec![2.0, -3.0, 0.0]);
    }

    #[test]
    fn prefers_the_cheaper_combination() {
        // y = (1, 1) is one unit of the third arm but two units of the others.
        let f = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let w = min_l1_representation(&f, &[1.0, 1.0]).unwrap();
        assert!((w[2] - 1.0).abs() < 1e-12 && w[0].abs() < 1e-12 && w[1].abs() < 1e-12);
    }

    #[test]
    fn infeasible_direction() {
        let f = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(matches!(
            min_l1_representation(&f, &[0.0, 1.0]),
            Err(Error::InfeasibleDirection { .. })
        ));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // Features span only the first axis of R²; y lies in that span.
        let f = vec![vec![1.0, 0.0], vec![-2.0, 0.0]];
        // −1.5 units of the second arm cost less than 3 units of the first.
        let w = min_l1_representation(&f, &[3.0, 0.0]).unwrap();
        assert!(w[0].abs() < 1e-12 && (w[1] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_direction() {
        let w = min_l1_representation(&basis(2), &[0.0, 0.0]).unwrap();
        assert_eq!(w, vec![0.0, 0.0]);
    }
}
