//! Property suites run by the `validate` command: surrogate value,
//! gradient and bound conditions on seeded samples, LP relaxation
//! dominance over exhaustive binary search, and feasibility audits of
//! complete solves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bcd::{initial_point, solve};
use crate::error::Result;
use crate::initializer::{initial_schedule, kmeans};
use crate::lp::{solve_lp, LpInstance};
use crate::oracle::{enumerate_instance, finite_difference_gradient, sample_position, sample_power};
use crate::sca::{bmax_coefficients, bmax_surrogate_with, collision_linearization, taylor_sq_lower, Affine2, InterferenceBound};
use crate::scenario::{audit_feasibility, channel_gain, Point, PowerPlan, ScenarioConfig, Tensor3};

pub const VALUE_TOL: f64 = 1e-8;
pub const GRADIENT_TOL: f64 = 1e-6;
/// Allowed bound violation relative to `max(|f|, 1)`.
pub const BOUND_TOL: f64 = 1e-12;
pub const FD_STEP: f64 = 1e-4;
pub const LP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    /// Largest error seen, as a multiple of its tolerance.
    pub worst_ratio: f64,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    /// Samples per surrogate suite.
    pub samples: usize,
    pub lp_instances: usize,
    pub audit_scenarios: usize,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            samples: 1000,
            lp_instances: 200,
            audit_scenarios: 2,
            seed: 0,
        }
    }
}

/// The surrogate constructions under test. Tests swap in broken variants
/// to check that the suites catch them.
#[derive(Clone, Copy)]
pub struct SurrogateSet {
    pub taylor: fn(&Point) -> Affine2,
    pub interference: fn(f64, f64) -> InterferenceBound,
    pub bmax_coefficients: fn(f64, f64) -> (f64, f64),
    pub collision: fn(&Point, &Point, &Point, &Point) -> Result<f64>,
}

impl Default for SurrogateSet {
    fn default() -> Self {
        SurrogateSet {
            taylor: taylor_sq_lower,
            interference: InterferenceBound::new,
            bmax_coefficients,
            collision: collision_linearization,
        }
    }
}

/// Accumulates checks of one suite and keeps the first failure.
struct Tally {
    name: String,
    checks: usize,
    worst_ratio: f64,
    counterexample: Option<String>,
}

impl Tally {
    fn new(name: &str) -> Self {
        Tally {
            name: name.to_string(),
            checks: 0,
            worst_ratio: 0.0,
            counterexample: None,
        }
    }

    fn check(&mut self, error: f64, tolerance: f64, describe: impl FnOnce() -> String) {
        self.checks += 1;
        let ratio = if error <= 0.0 { 0.0 } else { error / tolerance };
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        self.worst_ratio = self.worst_ratio.max(ratio);
        if ratio > 1.0 && self.counterexample.is_none() {
            self.counterexample = Some(describe());
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            passed: self.counterexample.is_none(),
            name: self.name,
            checks: self.checks,
            worst_ratio: self.worst_ratio,
            counterexample: self.counterexample,
        }
    }
}

/// Runs the value, gradient and bound conditions for one surrogate of a
/// scalar field. `sense` is +1 for an upper bound and -1 for a lower bound.
fn triple_condition(
    tally: &mut Tally,
    truth: &dyn Fn(&[f64]) -> f64,
    surrogate: &dyn Fn(&[f64]) -> f64,
    reference: &[f64],
    probe: &[f64],
    sense: f64,
) {
    let (f0, s0) = (truth(reference), surrogate(reference));
    tally.check((s0 - f0).abs(), VALUE_TOL * f0.abs().max(f64::MIN_POSITIVE), || {
        format!("value at reference {reference:?}: surrogate {s0:e}, true {f0:e}")
    });

    let gt = finite_difference_gradient(truth, reference, FD_STEP);
    let gs = finite_difference_gradient(surrogate, reference, FD_STEP);
    let scale = gt.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(f64::MIN_POSITIVE);
    let err = gt.iter().zip(&gs).fold(0.0f64, |a, (t, s)| a.max((t - s).abs()));
    tally.check(err, GRADIENT_TOL * scale, || {
        format!("gradient at reference {reference:?}: surrogate {gs:?}, true {gt:?}")
    });

    let (f, s) = (truth(probe), surrogate(probe));
    let violation = sense * (f - s);
    tally.check(violation, BOUND_TOL * f.abs().max(1.0), || {
        format!("bound at {probe:?} (reference {reference:?}): surrogate {s:e}, true {f:e}")
    });
}

fn point(x: &[f64], i: usize) -> Point {
    Point::new(x[2 * i], x[2 * i + 1])
}

pub fn taylor_suite(cfg: &ScenarioConfig, set: &SurrogateSet, samples: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new("taylor_sq_lower");
    for _ in 0..samples {
        let w = cfg.gt_positions[rng.gen_range(0..cfg.num_gts())];
        let x0 = sample_position(&mut rng, cfg) - w;
        let x = sample_position(&mut rng, cfg) - w;
        let affine = (set.taylor)(&x0);
        let truth = |v: &[f64]| point(v, 0).norm_squared();
        let surrogate = |v: &[f64]| affine.eval(&point(v, 0));
        triple_condition(&mut tally, &truth, &surrogate, &[x0.x, x0.y], &[x.x, x.y], -1.0);
    }
    tally.finish()
}

/// Interference from three transmitters, in units of the reference
/// interference-plus-noise power.
pub fn rbar_suite(cfg: &ScenarioConfig, set: &SurrogateSet, samples: usize, seed: u64) -> SuiteResult {
    const INTERFERERS: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new("rbar_upper");
    let noise = cfg.noise_power;
    for _ in 0..samples {
        let b0: Vec<f64> = (0..INTERFERERS).map(|_| sample_power(&mut rng)).collect();
        let b: Vec<f64> = (0..INTERFERERS).map(|_| sample_power(&mut rng)).collect();
        let unit = b0.iter().sum::<f64>() + noise;
        let bound = (set.interference)(b0.iter().sum(), noise);
        let truth = |v: &[f64]| (v.iter().sum::<f64>() * unit + noise).log2();
        let surrogate = |v: &[f64]| bound.eval(v.iter().sum::<f64>() * unit);
        let scaled = |x: &[f64]| x.iter().map(|v| v / unit).collect::<Vec<_>>();
        triple_condition(&mut tally, &truth, &surrogate, &scaled(&b0), &scaled(&b), 1.0);
    }
    tally.finish()
}

/// Positions in units of the altitude, relative to the station.
pub fn bmax_suite(cfg: &ScenarioConfig, set: &SurrogateSet, samples: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new("bmax_surrogate");
    let h = cfg.altitude;
    for _ in 0..samples {
        let w = cfg.gt_positions[rng.gen_range(0..cfg.num_gts())];
        let y0 = (sample_position(&mut rng, cfg) - w) / h;
        let y = (sample_position(&mut rng, cfg) - w) / h;
        let q_ref = w + y0 * h;
        let truth = |v: &[f64]| cfg.p_max * channel_gain(&(w + point(v, 0) * h), &w, cfg);
        let surrogate = |v: &[f64]| bmax_surrogate_with(set.bmax_coefficients, &(w + point(v, 0) * h), &q_ref, &w, cfg);
        triple_condition(&mut tally, &truth, &surrogate, &[y0.x, y0.y], &[y.x, y.y], -1.0);
    }
    tally.finish()
}

pub fn collision_suite(cfg: &ScenarioConfig, set: &SurrogateSet, samples: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new("collision_linearization");
    for _ in 0..samples {
        let (a0, b0) = (sample_position(&mut rng, cfg), sample_position(&mut rng, cfg));
        let (a, b) = (sample_position(&mut rng, cfg), sample_position(&mut rng, cfg));
        let truth = |v: &[f64]| (point(v, 0) - point(v, 1)).norm_squared();
        let surrogate = |v: &[f64]| (set.collision)(&point(v, 0), &point(v, 1), &a0, &b0).unwrap_or(f64::NAN);
        triple_condition(&mut tally, &truth, &surrogate, &[a0.x, a0.y, b0.x, b0.y], &[a.x, a.y, b.x, b.y], -1.0);
    }
    tally.finish()
}

pub fn surrogate_suites(cfg: &ScenarioConfig, set: &SurrogateSet, samples: usize, seed: u64) -> Vec<SuiteResult> {
    vec![
        taylor_suite(cfg, set, samples, seed),
        rbar_suite(cfg, set, samples, seed.wrapping_add(1)),
        bmax_suite(cfg, set, samples, seed.wrapping_add(2)),
        collision_suite(cfg, set, samples, seed.wrapping_add(3)),
    ]
}

/// Random instance with up to three stations, two UAVs and three samples.
pub fn random_lp_instance(rng: &mut impl Rng) -> LpInstance {
    let (nk, nm, ns) = (rng.gen_range(1..=3), rng.gen_range(1..=2), rng.gen_range(1..=3));
    let rates = Tensor3::from_fn(nk, nm, ns, |_, _, _| {
        if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..10.0)
        }
    });
    LpInstance::new(rates, (ns - 1).max(1) as f64)
}

pub fn lp_dominance_suite(instances: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new("lp_dominance");
    let hand = LpInstance::new(Tensor3::from_fn(2, 1, 1, |k, _, _| [2.0, 1.0][k]), 1.0);
    match solve_lp(&hand) {
        Ok((_, mu)) => tally.check((mu - 2.0 / 3.0).abs(), LP_TOL, || format!("two-station example gives {mu}")),
        Err(e) => tally.check(f64::INFINITY, LP_TOL, || format!("two-station example: {e}")),
    }
    for i in 0..instances {
        let inst = random_lp_instance(&mut rng);
        let outcome = solve_lp(&inst).and_then(|(_, lp)| Ok((lp, enumerate_instance(&inst)?)));
        match outcome {
            Ok((lp, exact)) => tally.check(exact - lp, LP_TOL, || {
                format!("instance {i} {:?}: relaxed {lp}, binary {exact}", inst.rate_coefficients)
            }),
            Err(e) => tally.check(f64::INFINITY, LP_TOL, || format!("instance {i}: {e}")),
        }
    }
    tally.finish()
}

/// Starting points and complete solves on short horizons must pass the
/// constraint audit.
pub fn feasibility_suite(scenarios: usize, seed: u64) -> SuiteResult {
    let mut tally = Tally::new("feasibility_audit");
    for i in 0..scenarios as u64 {
        let mut cfg = ScenarioConfig::default_scenario(seed.wrapping_add(i));
        cfg.num_steps = 20;
        let start = initial_point(&cfg).and_then(|init| {
            let clustering = kmeans(&cfg.gt_positions, cfg.num_uavs, cfg.seed)?;
            let schedule = initial_schedule(&clustering, &init.plan, &cfg);
            Ok(audit_feasibility(&init.plan, &schedule, &PowerPlan::constant(&cfg, cfg.p_max), &cfg))
        });
        match start {
            Ok(v) => tally.check(v.len() as f64, 0.5, || format!("seed {}: initial point violates {:?}", cfg.seed, v)),
            Err(e) => tally.check(f64::INFINITY, 0.5, || format!("seed {}: {e}", cfg.seed)),
        }
        match solve(&cfg) {
            Ok(report) => match &report.outcome {
                Some(o) => {
                    let v = audit_feasibility(&o.plan, &o.schedule, &o.powers, &cfg);
                    tally.check(v.len() as f64, 0.5, || format!("seed {}: solution violates {:?}", cfg.seed, v));
                }
                None => tally.check(f64::INFINITY, 0.5, || format!("seed {}: {:?}", cfg.seed, report.reason)),
            },
            Err(e) => tally.check(f64::INFINITY, 0.5, || format!("seed {}: {e}", cfg.seed)),
        }
    }
    tally.finish()
}

/// Every suite with the given options.
pub fn run_all(opts: &ValidationOptions, set: &SurrogateSet) -> Vec<SuiteResult> {
    let cfg = ScenarioConfig::default_scenario(opts.seed);
    let mut out = surrogate_suites(&cfg, set, opts.samples, opts.seed);
    out.push(lp_dominance_suite(opts.lp_instances, opts.seed));
    out.push(feasibility_suite(opts.audit_scenarios, opts.seed));
    out
}
