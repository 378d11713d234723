use swarmrate::bcd::{
    recover_powers, round_schedule, run_baselines, solve, static_ap_baseline, Status, MU_FLOOR,
};
use swarmrate::scenario::{audit_feasibility, Point, ScenarioConfig, Schedule, Tensor3};

fn short(num_uavs: usize, num_gts: usize, steps: usize, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::with_random_stations(num_uavs, num_gts, steps, seed);
    cfg.initial_speeds = (0..num_uavs).map(|m| 3.0 + m as f64).collect();
    cfg
}

#[test]
fn trace_is_monotone_and_tight() {
    for seed in [3, 11] {
        let cfg = short(2, 6, 20, seed);
        let r = solve(&cfg).unwrap();
        assert_eq!(r.status, Status::Converged, "seed {seed}");
        assert_eq!(r.mu_trace.len(), r.iterations + 1);
        for w in r.mu_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "seed {seed}: {:?}", r.mu_trace);
        }
        for (i, rec) in r.trace.iter().enumerate() {
            assert!((rec.mu_ref - r.mu_trace[i]).abs() <= 1e-8, "seed {seed} iteration {}", rec.iteration);
            assert!(rec.mu >= rec.mu_lb - 1e-9);
        }
        let last = r.trace.last().unwrap();
        assert!(last.delta_mu / r.mu_trace[r.iterations - 1].max(MU_FLOOR) < cfg.epsilon);
        let o = r.outcome.as_ref().unwrap();
        assert!(audit_feasibility(&o.plan, &o.schedule, &o.powers, &cfg).is_empty());
        assert!(o.powers.p.iter().flatten().all(|&p| (0.0..=cfg.p_max + 1e-9).contains(&p)));
        assert!((o.relaxed.min_rate - r.mu_trace[r.iterations]).abs() < 1e-9);
        assert!(o.rounded_schedule.is_binary(0.0));
    }
}

#[test]
fn single_link_first_iteration_does_not_lose() {
    let mut cfg = short(1, 1, 15, 5);
    cfg.max_iters = 1;
    let r = solve(&cfg).unwrap();
    assert!(r.mu_trace[1] >= r.mu_trace[0]);
    assert_eq!(r.iterations, 1);
}

#[test]
fn starved_energy_budget_is_infeasible() {
    let mut cfg = short(2, 6, 20, 0);
    cfg.e_max = 100.0;
    let r = solve(&cfg).unwrap();
    assert_eq!(r.status, Status::Infeasible);
    assert!(r.reason.as_deref().unwrap().contains("e_max"));
    assert!(r.outcome.is_none());
}

#[test]
fn iteration_cap_reported() {
    let mut cfg = short(2, 4, 15, 1);
    cfg.max_iters = 1;
    cfg.epsilon = 1e-12;
    let r = solve(&cfg).unwrap();
    assert_eq!(r.status, Status::MaxIters);
    assert_eq!(r.iterations, 1);
}

#[test]
fn looser_threshold_stops_sooner() {
    let mut loose = short(2, 5, 15, 2);
    loose.epsilon = 1e-1;
    let mut tight = loose.clone();
    tight.epsilon = 1e-4;
    assert!(solve(&loose).unwrap().iterations <= solve(&tight).unwrap().iterations);
}

#[test]
fn rounding_fixes_binary_schedules() {
    let mut a = Tensor3::zeros(3, 2, 4);
    a.set(0, 0, 0, 1.0);
    a.set(2, 1, 0, 1.0);
    a.set(1, 0, 2, 1.0);
    let s = Schedule { alpha: a };
    assert_eq!(round_schedule(&s), s);
}

#[test]
fn rounded_schedule_respects_loads() {
    let cfg = short(2, 5, 10, 9);
    let r = solve(&cfg).unwrap();
    let o = r.outcome.unwrap();
    for n in 0..cfg.num_samples() {
        for m in 0..cfg.num_uavs {
            assert!(o.rounded_schedule.uav_load(m, n) <= 1.0);
        }
        for k in 0..cfg.num_gts() {
            assert!(o.rounded_schedule.gt_load(k, n) <= 1.0);
        }
    }
    let total: f64 = o.rounded.connection_time_per_gt.iter().sum();
    assert!(total <= (cfg.num_samples() * cfg.num_uavs) as f64 * cfg.delta_t);
}

#[test]
fn zero_shares_give_zero_power() {
    let cfg = short(2, 3, 5, 0);
    let r = solve(&cfg).unwrap();
    let o = r.outcome.unwrap();
    let p = recover_powers(&Schedule::empty(&cfg), &o.aux, &o.plan, &cfg);
    assert!(p.p.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn static_ap_over_single_station() {
    let mut cfg = short(2, 1, 10, 0);
    cfg.gt_positions = vec![Point::new(120.0, -40.0)];
    let b = static_ap_baseline(&cfg).unwrap();
    assert_eq!(b.plan.tracks[0].positions[0], cfg.gt_positions[0]);
    let snr = cfg.p_max * cfg.beta0 / (cfg.altitude * cfg.altitude * cfg.noise_power);
    let bound = (1.0 + snr).log2() * cfg.num_samples() as f64 / cfg.rate_normalizer();
    assert!((b.report.min_rate - bound).abs() < 1e-9 * bound);
}

#[test]
fn baselines_are_deterministic() {
    let cfg = short(2, 6, 20, 4);
    let a = run_baselines(&cfg).unwrap();
    let b = run_baselines(&cfg).unwrap();
    assert_eq!(a, b);
    let centroid = cfg.gt_positions.iter().fold(Point::zeros(), |s, p| s + p) / 6.0;
    assert!((a.static_ap.plan.tracks[0].positions[7] - centroid).norm() < 1e-9);
    assert!(a.static_ap.report.energy_per_uav.is_empty());
}
