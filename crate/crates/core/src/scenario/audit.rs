//! Constraint checks over a complete plan.

use serde::Serialize;

use super::config::ScenarioConfig;
use super::model::{propulsion_energy, FlightPlan, PowerPlan, Schedule};

/// Tolerance on the kinematic recursion, meters and m/s.
pub const KINEMATIC_TOL: f64 = 1e-9;
/// Tolerance on speed, acceleration and separation limits.
pub const MOTION_TOL: f64 = 1e-6;
/// Tolerance on association sums and power limits.
pub const SCHEDULE_TOL: f64 = 1e-9;
pub const POWER_TOL: f64 = 1e-9;
/// Tolerance on the energy budget, joules.
pub const ENERGY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    VelocityRecursion,
    PositionRecursion,
    SpeedAboveMax,
    SpeedBelowMin,
    Acceleration,
    Separation,
    AlphaRange,
    UavLoad,
    GtLoad,
    Power,
    Energy,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub uav: Option<usize>,
    /// Second UAV of a separation violation, or the station index.
    pub other: Option<usize>,
    pub step: Option<usize>,
    /// Amount by which the limit is exceeded.
    pub magnitude: f64,
}

impl Violation {
    fn new(kind: ViolationKind, uav: Option<usize>, other: Option<usize>, step: Option<usize>, magnitude: f64) -> Self {
        Violation {
            kind,
            uav,
            other,
            step,
            magnitude,
        }
    }
}

/// Returns one entry per violated constraint; empty when everything holds.
pub fn audit_feasibility(plan: &FlightPlan, schedule: &Schedule, powers: &PowerPlan, cfg: &ScenarioConfig) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let samples = cfg.num_samples();
    let dt = cfg.delta_t;

    if plan.num_uavs() != cfg.num_uavs || schedule.alpha.dims() != [cfg.num_gts(), cfg.num_uavs, samples] {
        out.push(Violation::new(Shape, None, None, None, f64::INFINITY));
        return out;
    }

    for (m, t) in plan.tracks.iter().enumerate() {
        if t.positions.len() != samples || t.velocities.len() != samples || t.accelerations.len() != cfg.num_steps {
            out.push(Violation::new(Shape, Some(m), None, None, f64::INFINITY));
            continue;
        }
        for n in 0..cfg.num_steps {
            let a = t.accelerations[n];
            let dv = (t.velocities[n] + a * dt - t.velocities[n + 1]).norm();
            if dv > KINEMATIC_TOL {
                out.push(Violation::new(VelocityRecursion, Some(m), None, Some(n), dv));
            }
            let dq = (t.positions[n] + t.velocities[n] * dt + a * (0.5 * dt * dt) - t.positions[n + 1]).norm();
            if dq > KINEMATIC_TOL {
                out.push(Violation::new(PositionRecursion, Some(m), None, Some(n), dq));
            }
            let excess = a.norm() - cfg.a_max;
            if excess > MOTION_TOL {
                out.push(Violation::new(Acceleration, Some(m), None, Some(n), excess));
            }
        }
        for (n, v) in t.velocities.iter().enumerate() {
            let s = v.norm();
            if s - cfg.v_max > MOTION_TOL {
                out.push(Violation::new(SpeedAboveMax, Some(m), None, Some(n), s - cfg.v_max));
            }
            if cfg.v_min - s > MOTION_TOL {
                out.push(Violation::new(SpeedBelowMin, Some(m), None, Some(n), cfg.v_min - s));
            }
        }
    }

    for n in 0..samples {
        for m in 0..cfg.num_uavs {
            for j in m + 1..cfg.num_uavs {
                let d = (plan.position(m, n) - plan.position(j, n)).norm();
                if cfg.d_min - d > MOTION_TOL {
                    out.push(Violation::new(Separation, Some(m), Some(j), Some(n), cfg.d_min - d));
                }
            }
        }
    }

    for n in 0..samples {
        for m in 0..cfg.num_uavs {
            for k in 0..cfg.num_gts() {
                let a = schedule.alpha.get(k, m, n);
                if !(-SCHEDULE_TOL..=1.0 + SCHEDULE_TOL).contains(&a) {
                    out.push(Violation::new(AlphaRange, Some(m), Some(k), Some(n), (a - 1.0).max(-a)));
                }
            }
            let load = schedule.uav_load(m, n);
            if load > 1.0 + SCHEDULE_TOL {
                out.push(Violation::new(UavLoad, Some(m), None, Some(n), load - 1.0));
            }
        }
        for k in 0..cfg.num_gts() {
            let load = schedule.gt_load(k, n);
            if load > 1.0 + SCHEDULE_TOL {
                out.push(Violation::new(GtLoad, None, Some(k), Some(n), load - 1.0));
            }
        }
    }

    for (m, row) in powers.p.iter().enumerate() {
        for (n, &p) in row.iter().enumerate() {
            if p < -POWER_TOL || p > cfg.p_max + POWER_TOL {
                out.push(Violation::new(Power, Some(m), None, Some(n), (p - cfg.p_max).max(-p)));
            }
        }
    }

    for m in 0..cfg.num_uavs {
        match propulsion_energy(m, plan, cfg) {
            Ok(e) if e > cfg.e_max + ENERGY_TOL => {
                out.push(Violation::new(Energy, Some(m), None, None, e - cfg.e_max));
            }
            Ok(_) => {}
            Err(_) => out.push(Violation::new(Energy, Some(m), None, None, f64::INFINITY)),
        }
    }
    out
}
