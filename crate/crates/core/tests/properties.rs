use glbai_core::confidence::{gap_estimate, gap_width, WidthSchedule};
use glbai_core::linkfn::Kappa;
use glbai_core::selector::{select_arm, solve_direction_lp, Allocation};
use glbai_core::{DesignState, LinkKind, LinkModel};
use proptest::prelude::*;

fn vec_in(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, d)
}

/// Features for `K` arms in dimension `d` together with `d`.
fn arm_set(max_k: usize, max_d: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1..=max_d).prop_flat_map(move |d| {
        (Just(d), prop::collection::vec(vec_in(d, -1.0, 1.0), d.max(2)..=max_k))
    })
}

fn design_from(features: &[Vec<f64>], d: usize) -> DesignState {
    let mut design = DesignState::new(d, features.len());
    for (a, x) in features.iter().enumerate() {
        design.update(a, x, 0.0).unwrap();
    }
    design
}

fn well_posed(features: &[Vec<f64>], d: usize) -> Option<DesignState> {
    let design = design_from(features, d);
    (design.is_nonsingular() && design.min_eigenvalue() > 1e-3).then_some(design)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn logistic_mean_is_open_unit_interval(z in -1e3f64..1e3) {
        let m = LinkKind::Logistic.mu(z);
        prop_assert!(m > 0.0 && m < 1.0);
        prop_assert!((LinkKind::Logistic.mu_dot(z) - m * (1.0 - m)).abs() <= 1e-12);
    }

    #[test]
    fn links_are_strictly_increasing(z in -20.0f64..20.0, h in 1e-3f64..1.0) {
        for kind in [LinkKind::Logistic, LinkKind::Poisson, LinkKind::Identity] {
            prop_assert!(kind.mu(z + h) > kind.mu(z));
            prop_assert!(kind.mu_dot(z) > 0.0);
        }
    }

    #[test]
    fn slope_matches_finite_difference_and_constants(
        s in 0.1f64..3.0,
        features in prop::collection::vec(vec_in(3, -1.0, 1.0), 2..8),
        kind in prop::sample::select(vec![LinkKind::Logistic, LinkKind::Poisson, LinkKind::Identity]),
    ) {
        let link = LinkModel::from_features(kind, s, &features, None).unwrap();
        let sl = s * link.feature_bound;
        for i in 0..=1000 {
            let z = -sl + 2.0 * sl * i as f64 / 1000.0;
            let h = 1e-5;
            let fd = (kind.mu(z + h) - kind.mu(z - h)) / (2.0 * h);
            let slope = kind.mu_dot(z);
            prop_assert!((slope - fd).abs() <= 1e-6 * slope.abs().max(fd.abs()));
            prop_assert!(slope >= link.c_mu * (1.0 - 1e-12));
            prop_assert!(slope <= link.k_mu * (1.0 + 1e-12));
        }
    }

    #[test]
    fn kappa_monotone(l0 in 1e-3f64..10.0, l1 in 1e-3f64..10.0, b0 in 0.1f64..5.0, b1 in 0.1f64..5.0) {
        let (lo, hi) = if l0 <= l1 { (l0, l1) } else { (l1, l0) };
        prop_assert!(Kappa::new(lo, 1.0).unwrap().value() >= Kappa::new(hi, 1.0).unwrap().value());
        let (blo, bhi) = if b0 <= b1 { (b0, b1) } else { (b1, b0) };
        prop_assert!(Kappa::new(1.0, blo).unwrap().value() <= Kappa::new(1.0, bhi).unwrap().value());
    }

    #[test]
    fn width_scale_homogeneous_and_increasing(alpha in 0.0f64..10.0, d in 1usize..30, t in 2u64..100_000) {
        let s = WidthSchedule::new(alpha, d, 0.05).unwrap();
        let double = WidthSchedule::new(2.0 * alpha, d, 0.05).unwrap();
        let c = s.width_scale(t).unwrap();
        prop_assert!((double.width_scale(t).unwrap() - 2.0 * c).abs() <= 1e-12 * c.max(1.0));
        if alpha > 0.0 {
            prop_assert!(s.width_scale(t + 1).unwrap() > c);
        } else {
            prop_assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn gap_estimate_antisymmetric(theta in vec_in(3, -3.0, 3.0), xi in vec_in(3, -1.0, 1.0), xj in vec_in(3, -1.0, 1.0)) {
        let link = LinkModel::from_features(LinkKind::Logistic, 1.0, &[xi.clone(), xj.clone()], None).unwrap();
        let a = gap_estimate(&theta, &link, &xi, &xj);
        let b = gap_estimate(&theta, &link, &xj, &xi);
        prop_assert!((a + b).abs() <= 1e-15);
        prop_assert_eq!(gap_estimate(&theta, &link, &xi, &xi), 0.0);
    }

    #[test]
    fn width_symmetric_loose_and_shrinking(
        (d, features) in arm_set(8, 4),
        c_t in 0.1f64..5.0,
    ) {
        let Some(mut design) = well_posed(&features, d) else { return Ok(()) };
        let link = LinkModel::from_features(LinkKind::Logistic, 1.0, &features, None).unwrap();
        let (xi, xj) = (&features[0], &features[1]);
        let wij = gap_width(&link, &design, c_t, xi, xj).unwrap().width;
        let wji = gap_width(&link, &design, c_t, xj, xi).unwrap().width;
        prop_assert!((wij - wji).abs() <= 1e-12 * wij.max(1.0));

        let loose = c_t * link.k_mu
            * (design.mahalanobis_norm(xi).unwrap() + design.mahalanobis_norm(xj).unwrap());
        prop_assert!(wij <= loose * (1.0 + 1e-12));

        let arm = features.len() - 1;
        design.update(arm, &features[arm], 1.0).unwrap();
        let after = gap_width(&link, &design, c_t, xi, xj).unwrap().width;
        prop_assert!(after <= wij * (1.0 + 1e-12));
    }

    #[test]
    fn design_invariants_hold_under_updates(
        (d, features) in arm_set(10, 5),
        pulls in prop::collection::vec(0usize..10, 1..300),
    ) {
        let mut design = DesignState::new(d, features.len());
        for &p in &pulls {
            let a = p % features.len();
            design.update(a, &features[a], 0.5).unwrap();
        }
        prop_assert_eq!(design.counts().iter().sum::<u64>() + 1, design.round());
        let rebuilt = design.rebuild_gram();
        for (a, b) in rebuilt.iter().zip(design.gram()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        if let Some(inv) = design.inverse() {
            let g = design.gram();
            let scale = inv.iter().fold(0.0f64, |m, v| m.max(v.abs())) * g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..d {
                for j in 0..d {
                    let v: f64 = (0..d).map(|k| g[i * d + k] * inv[k * d + j]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((v - target).abs() <= 1e-8 * scale.max(1.0));
                }
            }
        }
    }

    #[test]
    fn lp_is_feasible_normalized_and_homogeneous(
        (d, features) in arm_set(8, 3),
        coeffs in vec_in(8, -2.0, 2.0),
        scale in 0.01f64..100.0,
    ) {
        let y: Vec<f64> = (0..d)
            .map(|r| features.iter().zip(&coeffs).map(|(x, c)| c * x[r]).sum())
            .collect();
        if y.iter().all(|v| v.abs() < 1e-6) {
            return Ok(());
        }
        let a = solve_direction_lp(&features, &y).unwrap();
        for r in 0..d {
            let lhs: f64 = a.w_star.iter().zip(&features).map(|(w, x)| w * x[r]).sum();
            prop_assert!((lhs - y[r]).abs() <= 1e-8);
        }
        prop_assert!((a.p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(a.p.iter().all(|&p| p >= 0.0));

        let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let b = solve_direction_lp(&features, &ys).unwrap();
        prop_assert!((b.rho - scale * a.rho).abs() <= 1e-8 * (scale * a.rho).max(1.0));
        for (pa, pb) in a.p.iter().zip(&b.p) {
            prop_assert!((pa - pb).abs() <= 1e-9);
        }
        for (wa, wb) in a.w_star.iter().zip(&b.w_star) {
            prop_assert!((scale * wa - wb).abs() <= 1e-8 * (scale * a.rho).max(1.0));
        }
    }

    #[test]
    fn select_arm_minimizes_ratio(
        weights in prop::collection::vec(-1.0f64..1.0, 2..10),
        counts in prop::collection::vec(0u64..50, 10),
    ) {
        let alloc = Allocation::from_weights(weights);
        prop_assume!(alloc.rho > 0.0);
        let counts = &counts[..alloc.p.len()];
        let arm = select_arm(&alloc, counts).unwrap();
        prop_assert!(alloc.p[arm] > 0.0);
        let best = counts[arm] as f64 / alloc.p[arm];
        for (a, (&p, &t)) in alloc.p.iter().zip(counts).enumerate() {
            if p > 0.0 {
                let r = t as f64 / p;
                prop_assert!(r > best || (r == best && a >= arm));
            }
        }
    }
}
