use proptest::prelude::*;
use swarmrate::lp::{solve_lp, LpInstance};
use swarmrate::oracle::{enumerate_instance, enumerate_schedules, finite_difference_gradient};
use swarmrate::sca::{bmax_surrogate, collision_linearization, rbar_upper_bound};
use swarmrate::scenario::{channel_gain, AuxGains, LinkMetrics, Point, ScenarioConfig, Tensor3};

fn instance(k: usize, m: usize, s: usize, values: Vec<f64>) -> LpInstance {
    let mut it = values.into_iter();
    LpInstance::new(Tensor3::from_fn(k, m, s, |_, _, _| it.next().unwrap()), (s - 1).max(1) as f64)
}

fn small_instance() -> impl Strategy<Value = LpInstance> {
    (1usize..=3, 1usize..=2, 1usize..=3).prop_flat_map(|(k, m, s)| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], k * m * s)
            .prop_map(move |v| instance(k, m, s, v))
    })
}

proptest! {
    #[test]
    fn relaxation_dominates_binary(inst in small_instance()) {
        let (_, lp) = solve_lp(&inst).unwrap();
        let exact = enumerate_instance(&inst).unwrap();
        prop_assert!(lp >= exact - 1e-8, "lp {lp} binary {exact}");
    }

    #[test]
    fn single_pair_is_integral(s in 1usize..4, v in prop::collection::vec(0.0f64..10.0, 3)) {
        let inst = instance(1, 1, s, v[..s].to_vec());
        let (_, lp) = solve_lp(&inst).unwrap();
        let exact = enumerate_instance(&inst).unwrap();
        prop_assert!((lp - exact).abs() <= 1e-8);
    }
}

#[test]
fn enumeration_through_metrics() {
    let mut cfg = ScenarioConfig::with_random_stations(1, 1, 1, 0);
    cfg.initial_speeds = vec![3.0];
    let gamma = Tensor3::from_fn(1, 1, 2, |_, _, _| 31.0);
    let metrics = LinkMetrics {
        h: Tensor3::from_fn(1, 1, 2, |_, _, _| 1e-10),
        slot_rate: gamma.map(|g| (1.0 + g).log2()),
        gamma,
    };
    assert!((enumerate_schedules(&metrics, &cfg).unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn surrogate_gradients_match_truth() {
    let cfg = ScenarioConfig::default_scenario(3);
    let w = cfg.gt_positions[2];
    let h = cfg.altitude;
    for q_ref in [Point::new(50.0, 320.0), Point::new(w.x + 3.0, w.y - 1.0), Point::new(-200.0, 10.0)] {
        let y0 = (q_ref - w) / h;
        let truth = |v: &[f64]| cfg.p_max * channel_gain(&(w + Point::new(v[0], v[1]) * h), &w, &cfg);
        let surrogate = |v: &[f64]| bmax_surrogate(&(w + Point::new(v[0], v[1]) * h), &q_ref, &w, &cfg);
        let gt = finite_difference_gradient(truth, &[y0.x, y0.y], 1e-4);
        let gs = finite_difference_gradient(surrogate, &[y0.x, y0.y], 1e-4);
        let scale = gt[0].abs().max(gt[1].abs());
        for i in 0..2 {
            assert!((gt[i] - gs[i]).abs() <= 1e-6 * scale, "{gt:?} vs {gs:?}");
        }
    }
}

#[test]
fn collision_gradient_matches_truth() {
    let (a0, b0) = (Point::new(10.0, 4.0), Point::new(-30.0, 22.0));
    let truth = |v: &[f64]| (Point::new(v[0], v[1]) - Point::new(v[2], v[3])).norm_squared();
    let lin = |v: &[f64]| collision_linearization(&Point::new(v[0], v[1]), &Point::new(v[2], v[3]), &a0, &b0).unwrap();
    let x = [a0.x, a0.y, b0.x, b0.y];
    let gt = finite_difference_gradient(truth, &x, 1e-4);
    let gl = finite_difference_gradient(lin, &x, 1e-4);
    for i in 0..4 {
        assert!((gt[i] - gl[i]).abs() <= 1e-6 * 80.0);
    }
}

#[test]
fn interference_bound_is_tangent() {
    let cfg = ScenarioConfig::default_scenario(0);
    let b = AuxGains {
        b: Tensor3::from_fn(1, 3, 1, |_, m, _| [4e-12, 1e-12, 3e-13][m]),
    };
    let bound = rbar_upper_bound(&b, 0, 0, 0, &cfg);
    let unit = bound.interference_ref + cfg.noise_power;
    let truth = |v: &[f64]| (v[0] * unit + cfg.noise_power).log2();
    let x = [bound.interference_ref / unit];
    let g = finite_difference_gradient(truth, &x, 1e-4)[0];
    assert!((g - bound.a * unit).abs() <= 1e-6 * g.abs());
}
