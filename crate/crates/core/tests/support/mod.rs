//! Independent oracles shared by the integration suites.
//!
//! Each check draws a random case and returns the discrepancy between the
//! library and a brute-force or dense-linear-algebra recomputation.

#![allow(dead_code)]

use glbai_core::confidence::gap_width;
use glbai_core::estimator::{fit_mle, score, GroupedSample, MleOptions};
use glbai_core::selector::solve_direction_lp;
use glbai_core::{DesignState, LinkKind, LinkModel, SimRng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn uniform_vec(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

pub fn gaussian_vec(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `AᵀA + 0.1·I` with uniform `A`, row-major.
pub fn random_spd(rng: &mut SimRng, d: usize) -> Vec<f64> {
    let a = DMatrix::from_row_slice(d, d, &uniform_vec(rng, d * d));
    let m = a.transpose() * &a + DMatrix::identity(d, d) * 0.1;
    row_major(&m)
}

pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let (r, c) = (rows.len(), rows[0].len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

fn mahalanobis_sq(m: &DMatrix<f64>, y: &[f64]) -> f64 {
    let y = DVector::from_column_slice(y);
    let z = m.clone().lu().solve(&y).expect("SPD");
    y.dot(&z)
}

/// Corner maximization of the gap width against a 101×101 grid over
/// `[c_mu, k_mu]²`. Returns `|corner − grid|`.
pub fn corner_vs_grid(rng: &mut SimRng) -> f64 {
    let d = rng.random_range(1..=4);
    let gram = random_spd(rng, d);
    let design = DesignState::from_gram(gram.clone(), d, 2).unwrap();
    let c_mu = rng.random_range(0.01..0.25);
    let k_mu = rng.random_range(c_mu + 0.01..1.0);
    let link = LinkModel::with_constants(LinkKind::Logistic, 1.0, k_mu, c_mu, 1.0, 1.0).unwrap();
    let (xi, xj) = (uniform_vec(rng, d), uniform_vec(rng, d));
    let corner = gap_width(&link, &design, 1.0, &xi, &xj).unwrap().width;

    let m = DMatrix::from_row_slice(d, d, &gram);
    let mut grid = 0.0f64;
    for a in 0..=100 {
        for b in 0..=100 {
            let c = c_mu + (k_mu - c_mu) * a as f64 / 100.0;
            let c2 = c_mu + (k_mu - c_mu) * b as f64 / 100.0;
            let y: Vec<f64> = xi.iter().zip(&xj).map(|(p, q)| c * p - c2 * q).collect();
            grid = grid.max(mahalanobis_sq(&m, &y).sqrt());
        }
    }
    (corner - grid).abs()
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Minimum of `‖w‖₁` over all basic solutions of `Σ w_k xᵏ = y`.
pub fn l1_by_enumeration(features: &[Vec<f64>], y: &[f64]) -> f64 {
    let d = y.len();
    let yv = DVector::from_column_slice(y);
    let mut best = f64::INFINITY;
    for s in subsets(features.len(), d) {
        let b = DMatrix::from_fn(d, d, |i, j| features[s[j]][i]);
        if b.determinant().abs() < 1e-10 {
            continue;
        }
        if let Some(w) = b.lu().solve(&yv) {
            best = best.min(w.iter().map(|v| v.abs()).sum());
        }
    }
    best
}

pub struct LpCase {
    pub rho: f64,
    pub oracle_rho: f64,
    pub residual: f64,
    pub p_sum: f64,
}

/// Random instance with `d ≤ K ≤ 6`, `d ≤ 3`, full-rank features and a
/// direction either of the gap form `c1·xⁱ − c2·xʲ` or a random combination.
pub fn lp_vs_enumeration(rng: &mut SimRng) -> LpCase {
    let d = rng.random_range(1..=3);
    let k = rng.random_range(d.max(2)..=6);
    let features: Vec<Vec<f64>> = loop {
        let f: Vec<Vec<f64>> = (0..k).map(|_| uniform_vec(rng, d)).collect();
        if matrix(&f).rank(1e-6) == d {
            break f;
        }
    };
    let y: Vec<f64> = if rng.random_bool(0.5) {
        let i = rng.random_range(0..k);
        let j = (i + rng.random_range(1..k)) % k;
        let (c1, c2) = (rng.random_range(0.1..0.25), rng.random_range(0.1..0.25));
        (0..d).map(|r| c1 * features[i][r] - c2 * features[j][r]).collect()
    } else {
        uniform_vec(rng, d)
    };
    let alloc = solve_direction_lp(&features, &y).unwrap();
    let residual = (0..d)
        .map(|r| (alloc.w_star.iter().zip(&features).map(|(w, x)| w * x[r]).sum::<f64>() - y[r]).abs())
        .fold(0.0, f64::max);
    LpCase {
        rho: alloc.rho,
        oracle_rho: l1_by_enumeration(&features, &y),
        residual,
        p_sum: alloc.p.iter().sum(),
    }
}

/// Worst `|M⁻¹_incremental − inverse(M)|` entry over `updates` random pulls.
pub fn rank_one_vs_direct(rng: &mut SimRng, updates: usize) -> f64 {
    let d = rng.random_range(2..=6);
    let mut design = DesignState::new(d, updates);
    let mut worst = 0.0f64;
    for arm in 0..updates {
        design.update(arm, &uniform_vec(rng, d), 0.0).unwrap();
        if let Some(inv) = design.inverse() {
            let direct = DMatrix::from_row_slice(d, d, design.gram()).try_inverse().unwrap();
            for (a, b) in inv.iter().zip(row_major(&direct)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// Identity-link MLE against the normal equations `M⁻¹ Σ r x`.
pub fn identity_mle_vs_ols(rng: &mut SimRng) -> f64 {
    let d = rng.random_range(1..=5);
    let n = rng.random_range(d + 5..60);
    let theta = gaussian_vec(rng, d);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(rng, d)).collect();
    let rs: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    let link = LinkModel::from_features(LinkKind::Identity, 100.0, &xs, None).unwrap();
    let samples = GroupedSample::from_pairs(xs.iter().map(Vec::as_slice).zip(rs.iter().copied()));
    let sol = fit_mle(&samples, &link, None, &MleOptions::for_link(&link)).unwrap();

    let x = matrix(&xs);
    let r = DVector::from_vec(rs);
    let ols = (x.transpose() * &x).lu().solve(&(x.transpose() * r)).unwrap();
    sol.theta
        .iter()
        .zip(ols.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Score norm of the logistic MLE on a random well-posed dataset.
pub fn logistic_score_residual(rng: &mut SimRng) -> f64 {
    let d = rng.random_range(1..=4);
    let theta = gaussian_vec(rng, d);
    let xs: Vec<Vec<f64>> = (0..300).map(|_| uniform_vec(rng, d)).collect();
    let link = LinkModel::from_features(LinkKind::Logistic, 10.0, &xs, None).unwrap();
    let rs: Vec<f64> = xs
        .iter()
        .map(|x| {
            let p = link.mu(x.iter().zip(&theta).map(|(a, b)| a * b).sum());
            if rng.random::<f64>() < p { 1.0 } else { 0.0 }
        })
        .collect();
    let samples = GroupedSample::from_pairs(xs.iter().map(Vec::as_slice).zip(rs.iter().copied()));
    let sol = fit_mle(&samples, &link, None, &MleOptions::for_link(&link)).unwrap();
    let s = score(&samples, &link, &sol.theta);
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}
