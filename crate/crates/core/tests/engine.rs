use glbai_core::confidence::WidthSchedule;
use glbai_core::selector::{select_arm, select_gap, solve_direction_lp};
use glbai_core::{
    instance_stats, run_glgape, sample_instance, stream_rng, AlphaMode, BanditInstance, DesignState,
    Environment, LinkKind, RunConfig, Stream,
};

fn instance(seed: u64, k: usize, d: usize) -> BanditInstance {
    sample_instance(k, d, LinkKind::Logistic, &mut stream_rng(seed, Stream::Instance)).unwrap()
}

#[test]
fn identical_seeds_give_identical_traces() {
    let inst = instance(1, 30, 5);
    let mut cfg = RunConfig::new(0.1, 0.05, 42);
    cfg.record_estimates = true;
    let a = run_glgape(&inst, &cfg).unwrap();
    let b = run_glgape(&inst, &cfg).unwrap();
    assert_eq!(a.arms, b.arms);
    assert_eq!(a.trace.len(), b.trace.len());
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert_eq!(x.b_t.to_bits(), y.b_t.to_bits());
        assert_eq!(x.c_t.to_bits(), y.c_t.to_bits());
        assert_eq!((x.i_t, x.j_t, x.arm), (y.i_t, y.j_t, y.arm));
        let bits = |t: &Option<Vec<f64>>| t.as_ref().map(|v| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>());
        assert_eq!(bits(&x.theta), bits(&y.theta));
    }
    cfg.seed = 43;
    let c = run_glgape(&inst, &cfg).unwrap();
    assert_ne!(a.arms, c.arms);
}

#[test]
fn every_adaptive_pull_replays_from_its_certificate() {
    for seed in 0..5 {
        let inst = instance(100 + seed, 40, 6);
        let mut cfg = RunConfig::new(0.1, 0.05, seed);
        cfg.record_estimates = true;
        let res = run_glgape(&inst, &cfg).unwrap();
        let features = inst.features();
        let link = *inst.link();
        let schedule = WidthSchedule::new(res.alpha, inst.dim(), cfg.delta).unwrap();

        let mut design = DesignState::new(inst.dim(), inst.num_arms());
        for &a in &res.arms[..res.exploration_len] {
            design.update(a, &features[a], 0.0).unwrap();
        }
        for rec in &res.trace {
            assert_eq!(rec.t, design.round());
            assert_eq!(rec.c_t, schedule.width_scale(rec.t).unwrap());
            let theta = rec.theta.as_ref().unwrap();
            let cert = select_gap(theta, &link, &design, rec.c_t, features).unwrap();
            assert_eq!((cert.i_t, cert.j_t), (rec.i_t, rec.j_t));
            assert_eq!(cert.b_t, rec.b_t);
            let Some(played) = rec.arm else { break };
            let alloc = solve_direction_lp(features, &cert.direction).unwrap();
            assert_eq!(select_arm(&alloc, design.counts()).unwrap(), played, "round {}", rec.t);
            design.update(played, &features[played], 0.0).unwrap();
        }
        assert_eq!(design.num_pulls() as u64, res.tau);
    }
}

#[test]
fn loose_tolerance_stops_after_exploration() {
    for seed in 0..50 {
        let inst = instance(200 + seed, 50, 10);
        let res = run_glgape(&inst, &RunConfig::new(1.0, 0.05, seed)).unwrap();
        assert_eq!(res.trace.len(), 1, "seed {seed}");
        assert_eq!(res.tau as usize, res.exploration_len);
        assert!(res.trace[0].b_t <= 1.0);
    }
}

#[test]
fn completed_runs_satisfy_postconditions() {
    for seed in 0..10 {
        let inst = instance(300 + seed, 50, 10);
        let res = run_glgape(&inst, &RunConfig::new(0.1, 0.05, seed)).unwrap();
        assert!(!res.budget_exhausted);
        let last = res.final_record().unwrap();
        assert!(last.b_t <= 0.1);
        assert_eq!(res.returned_arm, last.i_t);
        assert_eq!(res.tau as usize, res.arms.len());
        assert_eq!(res.exploration_len, 30 + res.diagnostics.exploration_extension);
        assert_eq!(res.diagnostics.lemma1_violations, 0);
        assert_eq!(res.diagnostics.lemma3_violations, 0);
        assert!(res.trace.iter().take(res.trace.len() - 1).all(|r| r.b_t > 0.1 && r.arm.is_some()));
        let stats = instance_stats(&inst).unwrap();
        let gap = inst.means().unwrap()[stats.best_arm] - inst.means().unwrap()[res.returned_arm];
        assert!(gap >= 0.0);
    }
}

#[test]
fn theoretical_width_covers_true_gaps() {
    let mut clean = 0;
    for seed in 0..10 {
        let inst = instance(400 + seed, 10, 5);
        let mut cfg = RunConfig::new(0.1, 0.05, seed);
        cfg.alpha_mode = AlphaMode::Theoretical;
        cfg.max_steps = 500;
        cfg.track_coverage = true;
        let res = run_glgape(&inst, &cfg).unwrap();
        assert!(res.diagnostics.coverage_checks > 0);
        clean += res.diagnostics.coverage_clean() as usize;
    }
    assert!(clean >= 9, "{clean}/10 runs without a coverage violation");
}
