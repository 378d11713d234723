//! Outer block coordinate descent: the scheduling LP and the convexified
//! trajectory/power step alternate until the max-min rate stops improving,
//! after which transmit powers are recovered from the received-power
//! variables.

use std::time::Instant;

use serde::Serialize;

use crate::assignment::max_weight_assignment;
use crate::error::{Error, Result};
use crate::initializer::{circular_plan, initial_aux_gains, kmeans};
use crate::lp::{build_lp, solve_lp};
use crate::sca::{build_p4, solve_p4};
use crate::scenario::{
    energies, rates, AuxGains, FlightPlan, LinkMetrics, PerformanceReport, Point, PowerPlan, ScenarioConfig, Schedule,
    UavTrack,
};

/// Floor on the previous objective in the fractional-increase test.
pub const MU_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    Infeasible,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Max-min rate after this iteration's scheduling step.
    pub mu: f64,
    pub delta_mu: f64,
    /// Convexified objective at the reference point, equal to the previous `mu`.
    pub mu_ref: f64,
    /// Convexified objective at the trajectory step's solution.
    pub mu_lb: f64,
    pub newton_iterations: usize,
    pub kept_reference: bool,
    pub lp_ms: f64,
    pub p4_ms: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub init_ms: f64,
    pub lp_ms: f64,
    pub p4_ms: f64,
    pub total_ms: f64,
}

/// Final iterate and its derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub plan: FlightPlan,
    /// Relaxed schedule; the headline metrics use it.
    pub schedule: Schedule,
    pub rounded_schedule: Schedule,
    pub aux: AuxGains,
    pub powers: PowerPlan,
    pub relaxed: PerformanceReport,
    pub rounded: PerformanceReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    /// Why the run is infeasible, if it is.
    pub reason: Option<String>,
    /// `mu` of the starting point followed by `mu` after every iteration.
    pub mu_trace: Vec<f64>,
    pub delta_mu_trace: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub outcome: Option<Outcome>,
    pub timing: PhaseTimes,
}

impl SolveReport {
    pub fn min_rate(&self) -> Option<f64> {
        self.outcome.as_ref().map(|o| o.relaxed.min_rate)
    }

    fn infeasible(reason: String, timing: PhaseTimes) -> Self {
        SolveReport {
            status: Status::Infeasible,
            reason: Some(reason),
            mu_trace: Vec::new(),
            delta_mu_trace: Vec::new(),
            iterations: 0,
            trace: Vec::new(),
            outcome: None,
            timing,
        }
    }
}

/// Circular starting plan. `energy_violation` names the budget the plan
/// breaks, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPoint {
    pub plan: FlightPlan,
    pub aux: AuxGains,
    pub energy_violation: Option<String>,
}

/// Builds the circular start at the configured speeds.
pub fn initial_point(cfg: &ScenarioConfig) -> Result<InitialPoint> {
    let clustering = kmeans(&cfg.gt_positions, cfg.num_uavs, cfg.seed)?;
    let plan = circular_plan(&clustering, cfg, &cfg.initial_speeds)?;
    let used = energies(&plan, cfg)?;
    let energy_violation = used.iter().enumerate().find(|(_, &e)| e > cfg.e_max).map(|(m, e)| {
        format!(
            "energy budget e_max = {:.1} J is below the {:.1} J UAV {m} needs on its initial circle",
            cfg.e_max, e
        )
    });
    let aux = initial_aux_gains(&plan, cfg);
    Ok(InitialPoint {
        plan,
        aux,
        energy_violation,
    })
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the alternating optimization from the circular start.
pub fn solve(cfg: &ScenarioConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut timing = PhaseTimes::default();
    let init = match initial_point(cfg) {
        Ok(p) => p,
        Err(Error::Initialization { uav, reason }) => {
            timing.init_ms = elapsed_ms(start);
            timing.total_ms = timing.init_ms;
            return Ok(SolveReport::infeasible(format!("UAV {uav}: {reason}"), timing));
        }
        Err(e) => return Err(e),
    };
    if let Some(reason) = init.energy_violation {
        timing.init_ms = elapsed_ms(start);
        timing.total_ms = timing.init_ms;
        return Ok(SolveReport::infeasible(reason, timing));
    }
    let (mut plan, mut aux) = (init.plan, init.aux);

    let t = Instant::now();
    let (mut schedule, mut mu) = solve_lp(&build_lp(&LinkMetrics::from_aux(&plan, &aux, cfg), cfg))?;
    timing.lp_ms += elapsed_ms(t);
    timing.init_ms = elapsed_ms(start);

    let mut mu_trace = vec![mu];
    let mut trace = Vec::new();
    let mut status = Status::MaxIters;
    for iteration in 1..=cfg.max_iters {
        let wrap = |e: Error| Error::Iteration {
            iteration,
            source: Box::new(e),
        };
        let t = Instant::now();
        let state = solve_p4(&build_p4(&schedule, &plan, &aux, cfg)).map_err(wrap)?;
        let p4_ms = elapsed_ms(t);

        let t = Instant::now();
        let (next_schedule, next_mu) =
            solve_lp(&build_lp(&LinkMetrics::from_aux(&state.plan, &state.aux, cfg), cfg)).map_err(wrap)?;
        let lp_ms = elapsed_ms(t);

        let delta = next_mu - mu;
        trace.push(IterationRecord {
            iteration,
            mu: next_mu,
            delta_mu: delta,
            mu_ref: state.mu_ref,
            mu_lb: state.mu_lb,
            newton_iterations: state.newton_iterations,
            kept_reference: state.kept_reference,
            lp_ms,
            p4_ms,
            wall_ms: lp_ms + p4_ms,
        });
        timing.lp_ms += lp_ms;
        timing.p4_ms += p4_ms;
        mu_trace.push(next_mu);
        let fractional = delta / mu.max(MU_FLOOR);
        plan = state.plan;
        aux = state.aux;
        schedule = next_schedule;
        mu = next_mu;
        if fractional < cfg.epsilon {
            status = Status::Converged;
            break;
        }
    }

    let outcome = finish(plan, schedule, aux, cfg)?;
    timing.total_ms = elapsed_ms(start);
    Ok(SolveReport {
        status,
        reason: None,
        delta_mu_trace: trace.iter().map(|r| r.delta_mu).collect(),
        iterations: trace.len(),
        mu_trace,
        trace,
        outcome: Some(outcome),
        timing,
    })
}

fn finish(plan: FlightPlan, schedule: Schedule, aux: AuxGains, cfg: &ScenarioConfig) -> Result<Outcome> {
    let powers = recover_powers(&schedule, &aux, &plan, cfg);
    let rounded_schedule = round_schedule(&schedule);
    let metrics = LinkMetrics::from_aux(&plan, &aux, cfg);
    let used = energies(&plan, cfg)?;
    let relaxed = performance_report(&schedule, &rounded_schedule, &metrics, used.clone(), cfg);
    let rounded = performance_report(&rounded_schedule, &rounded_schedule, &metrics, used, cfg);
    Ok(Outcome {
        plan,
        schedule,
        rounded_schedule,
        aux,
        powers,
        relaxed,
        rounded,
    })
}

/// Transmit power `p_m(n) = sum_k alpha[k,m,n] B[k,m,n] / h[k,m,n]`.
pub fn recover_powers(schedule: &Schedule, aux: &AuxGains, plan: &FlightPlan, cfg: &ScenarioConfig) -> PowerPlan {
    let h = crate::scenario::channel_gains(plan, cfg);
    let [nk, nm, ns] = schedule.alpha.dims();
    PowerPlan {
        p: (0..nm)
            .map(|m| {
                (0..ns)
                    .map(|n| {
                        (0..nk)
                            .map(|k| {
                                let a = schedule.alpha.get(k, m, n);
                                if a == 0.0 {
                                    0.0
                                } else {
                                    a * aux.b.get(k, m, n) / h.get(k, m, n)
                                }
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Binary schedule: at every sample, the one-to-one pairing of stations and
/// UAVs that maximizes the summed shares.
pub fn round_schedule(schedule: &Schedule) -> Schedule {
    let [nk, nm, ns] = schedule.alpha.dims();
    let mut out = Schedule {
        alpha: crate::scenario::Tensor3::zeros(nk, nm, ns),
    };
    for n in 0..ns {
        let weights: Vec<Vec<f64>> = (0..nk).map(|k| (0..nm).map(|m| schedule.alpha.get(k, m, n)).collect()).collect();
        for (k, m) in max_weight_assignment(&weights).into_iter().enumerate() {
            if let Some(m) = m {
                out.alpha.set(k, m, n, 1.0);
            }
        }
    }
    out
}

/// Rates of `schedule` under `metrics`; connection times count the slots
/// of `connections`.
pub fn performance_report(
    schedule: &Schedule,
    connections: &Schedule,
    metrics: &LinkMetrics,
    energy_per_uav: Vec<f64>,
    cfg: &ScenarioConfig,
) -> PerformanceReport {
    let [nk, nm, ns] = schedule.alpha.dims();
    let rate_per_gt = rates(schedule, metrics, cfg);
    let slot_average_per_gt = (0..nk)
        .map(|k| {
            let total: f64 = (0..nm)
                .flat_map(|m| (0..ns).map(move |n| (m, n)))
                .map(|(m, n)| schedule.alpha.get(k, m, n) * metrics.slot_rate.get(k, m, n))
                .sum();
            total / ns as f64
        })
        .collect();
    let connection_time_per_gt = (0..nk)
        .map(|k| {
            let slots: f64 = (0..ns).map(|n| connections.gt_load(k, n)).sum();
            cfg.delta_t * slots
        })
        .collect();
    PerformanceReport {
        min_rate: rate_per_gt.iter().copied().fold(f64::INFINITY, f64::min),
        rate_per_gt,
        slot_average_per_gt,
        energy_per_uav,
        connection_time_per_gt,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub plan: FlightPlan,
    pub schedule: Schedule,
    pub report: PerformanceReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    pub static_ap: Baseline,
    pub circular: Baseline,
}

pub fn gt_centroid(cfg: &ScenarioConfig) -> Point {
    let sum = cfg.gt_positions.iter().fold(Point::zeros(), |acc, p| acc + p);
    sum / cfg.num_gts() as f64
}

/// One transmitter hovering at the station centroid at full power.
pub fn static_ap_baseline(cfg: &ScenarioConfig) -> Result<Baseline> {
    let mut single = cfg.clone();
    single.num_uavs = 1;
    single.initial_speeds = vec![cfg.v_min];
    let center = gt_centroid(cfg);
    let plan = FlightPlan {
        tracks: vec![UavTrack::integrate(
            center,
            Point::zeros(),
            vec![Point::zeros(); cfg.num_steps],
            cfg.delta_t,
        )],
    };
    let metrics = LinkMetrics::from_powers(&plan, &PowerPlan::constant(&single, cfg.p_max), &single);
    let (schedule, _) = solve_lp(&build_lp(&metrics, &single))?;
    let rounded = round_schedule(&schedule);
    let report = performance_report(&schedule, &rounded, &metrics, Vec::new(), &single);
    Ok(Baseline { plan, schedule, report })
}

/// The circular start at full power with its max-min schedule.
pub fn circular_baseline(cfg: &ScenarioConfig) -> Result<Baseline> {
    let init = initial_point(cfg)?;
    let metrics = LinkMetrics::from_aux(&init.plan, &init.aux, cfg);
    let (schedule, _) = solve_lp(&build_lp(&metrics, cfg))?;
    let rounded = round_schedule(&schedule);
    let report = performance_report(&schedule, &rounded, &metrics, energies(&init.plan, cfg)?, cfg);
    Ok(Baseline {
        plan: init.plan,
        schedule,
        report,
    })
}

pub fn run_baselines(cfg: &ScenarioConfig) -> Result<Baselines> {
    cfg.validate()?;
    Ok(Baselines {
        static_ap: static_ap_baseline(cfg)?,
        circular: circular_baseline(cfg)?,
    })
}

/// Default budget fractions of the energy sweep.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.9, 0.6, 0.3];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub fraction: f64,
    pub e_max: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySweep {
    /// Largest per-UAV consumption of the run under the configured budget.
    pub reference_energy: f64,
    pub reference: SolveReport,
    pub points: Vec<SweepPoint>,
}

/// Solves once under the configured budget, then again with the budget set
/// to each fraction of the largest per-UAV consumption of that run.
pub fn sweep_energy(cfg: &ScenarioConfig, fractions: &[f64]) -> Result<EnergySweep> {
    sweep_energy_from(cfg, solve(cfg)?, fractions)
}

/// [`sweep_energy`] around an existing solve of `cfg`.
pub fn sweep_energy_from(cfg: &ScenarioConfig, reference: SolveReport, fractions: &[f64]) -> Result<EnergySweep> {
    let Some(outcome) = &reference.outcome else {
        return Err(Error::config(
            "e_max",
            reference.reason.clone().unwrap_or_else(|| "reference run is infeasible".into()),
        ));
    };
    let reference_energy = outcome.relaxed.energy_per_uav.iter().copied().fold(0.0, f64::max);
    let points = fractions
        .iter()
        .map(|&fraction| {
            let mut c = cfg.clone();
            c.e_max = fraction * reference_energy;
            Ok(SweepPoint {
                fraction,
                e_max: c.e_max,
                report: solve(&c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergySweep {
        reference_energy,
        reference,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{channel_gains, Tensor3};

    #[test]
    fn recover_inverts_full_power() {
        let mut cfg = ScenarioConfig::with_random_stations(1, 2, 3, 1);
        cfg.initial_speeds = vec![5.0];
        let init = initial_point(&cfg).unwrap();
        let mut s = Schedule::empty(&cfg);
        for n in 0..cfg.num_samples() {
            if n != 2 {
                s.alpha.set(n % 2, 0, n, 1.0);
            }
        }
        let p = recover_powers(&s, &init.aux, &init.plan, &cfg);
        for n in 0..cfg.num_samples() {
            let expect = if n == 2 { 0.0 } else { cfg.p_max };
            assert!((p.p[0][n] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn recover_direct_division() {
        let mut cfg = ScenarioConfig::with_random_stations(1, 1, 1, 0);
        cfg.initial_speeds = vec![5.0];
        let init = initial_point(&cfg).unwrap();
        let h = channel_gains(&init.plan, &cfg);
        let aux = AuxGains {
            b: h.map(|g| g * 0.1),
        };
        let mut s = Schedule::empty(&cfg);
        s.alpha.set(0, 0, 0, 1.0);
        let p = recover_powers(&s, &aux, &init.plan, &cfg);
        assert!((p.p[0][0] - 0.1).abs() < 1e-15);
        assert_eq!(p.p[0][1], 0.0);
    }

    #[test]
    fn rounding_cases() {
        let mut a = Tensor3::zeros(2, 2, 2);
        a.set(0, 0, 0, 0.6);
        a.set(1, 0, 0, 0.4);
        a.set(0, 1, 0, 0.4);
        a.set(1, 1, 0, 0.6);
        let r = round_schedule(&Schedule { alpha: a });
        assert_eq!(r.alpha.get(0, 0, 0), 1.0);
        assert_eq!(r.alpha.get(1, 1, 0), 1.0);
        assert_eq!(r.alpha.get(1, 0, 0) + r.alpha.get(0, 1, 0), 0.0);
        assert!((0..2).all(|k| (0..2).all(|m| r.alpha.get(k, m, 1) == 0.0)));
        assert_eq!(round_schedule(&r), r);
    }
}
