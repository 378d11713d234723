//! Successive convex approximation step: the trajectory and received-power
//! block for a fixed schedule.

pub mod interior;
pub mod program;
pub mod surrogate;

pub use interior::{ConvexProgram, IpmOptions, Level, Rows};
pub use program::{build_p4, P4Counts, P4Program, ALPHA_PRUNE};
pub use surrogate::{
    bmax_coefficients, bmax_surrogate, bmax_surrogate_with, collision_linearization, interference, rbar_upper, rbar_upper_bound, taylor_sq_lower,
    Affine2, InterferenceBound, SurrogateCoefficients,
};

use crate::error::{Error, Result};
use crate::scenario::{AuxGains, FlightPlan, Tensor3};

/// Output of one convexified solve.
#[derive(Debug, Clone)]
pub struct SubproblemState {
    pub plan: FlightPlan,
    pub aux: AuxGains,
    /// Slack speeds per UAV and sample, raised to their upper bound.
    pub lambda: Vec<Vec<f64>>,
    /// Objective of the convexified problem at the returned point.
    pub mu_lb: f64,
    /// Objective of the convexified problem at the reference point.
    pub mu_ref: f64,
    pub newton_iterations: usize,
    pub gap: f64,
    /// True when the solver could not improve on the reference and the
    /// reference itself is returned.
    pub kept_reference: bool,
}

/// Fractions of the way from the reference speed towards `v_min` tried
/// for the initial slack speeds.
const SLACK_BACKOFF: [f64; 3] = [1e-2, 1e-4, 1e-6];
const INTERIOR_MARGIN: f64 = 1e-12;
/// Relative distance of the starting rate variables below their bounds.
const RATE_BACKOFF: f64 = 1e-3;

impl P4Program {
    /// Reference point moved strictly inside the convexified set: slack
    /// speeds just below the reference speeds, received powers clamped
    /// inside their caps, rate variables slightly below their bounds and `mu`
    /// slightly below the smallest of them.
    fn interior_start(&self, backoff: f64) -> Vec<f64> {
        let cfg = self.config();
        let lambda: Vec<Vec<f64>> = (0..cfg.num_uavs)
            .map(|m| {
                (0..cfg.num_samples())
                    .map(|n| {
                        let s = self.plan_ref.velocity(m, n).norm();
                        s - backoff * (s - cfg.v_min).max(0.0)
                    })
                    .collect()
            })
            .collect();
        let powers: Vec<Vec<f64>> = self
            .pairs
            .iter()
            .map(|&(k, n)| {
                (0..cfg.num_uavs)
                    .map(|m| {
                        let cap = self.scaled_power_cap(&self.plan_ref.position(m, n), k, m, n);
                        let b = self.aux_ref.b.get(k, m, n) / self.power_scale;
                        b.clamp(1e-3 * cap, 0.99 * cap)
                    })
                    .collect()
            })
            .collect();
        let mut x = self.pack(&lambda, &powers, 0.0);
        let below = |r: f64| r - RATE_BACKOFF * r.abs().max(1e-3);
        let mut mu = f64::INFINITY;
        for k in 0..cfg.num_gts() {
            let s = below(self.rate_lower_bound(&x, k));
            x[self.rate_index(k)] = s;
            mu = mu.min(s);
        }
        let i = self.mu_index();
        x[i] = below(mu);
        x
    }

    /// Objective at the reference point itself.
    pub fn reference_objective(&self) -> f64 {
        let cfg = self.config();
        let powers: Vec<Vec<f64>> = self
            .pairs
            .iter()
            .map(|&(k, n)| (0..cfg.num_uavs).map(|m| self.aux_ref.b.get(k, m, n) / self.power_scale).collect())
            .collect();
        let lambda = vec![vec![0.0; cfg.num_samples()]; cfg.num_uavs];
        self.min_rate_lower_bound(&self.pack(&lambda, &powers, 0.0))
    }

    fn reference_state(&self, mu_ref: f64, iterations: usize, gap: f64) -> SubproblemState {
        let cfg = self.config();
        SubproblemState {
            plan: self.plan_ref.clone(),
            aux: self.aux_ref.clone(),
            lambda: (0..cfg.num_uavs)
                .map(|m| (0..cfg.num_samples()).map(|n| self.plan_ref.velocity(m, n).norm()).collect())
                .collect(),
            mu_lb: mu_ref,
            mu_ref,
            newton_iterations: iterations,
            gap,
            kept_reference: true,
        }
    }

    /// Maps a decision vector back to plan, received powers and slack speeds.
    pub fn unpack(&self, x: &[f64]) -> (FlightPlan, AuxGains, Vec<Vec<f64>>) {
        let cfg = self.config();
        let tracks = self.tracks(x);
        let (nk, nm, ns) = (cfg.num_gts(), cfg.num_uavs, cfg.num_samples());
        let b = Tensor3::from_fn(nk, nm, ns, |k, m, n| match self.pair_index(k, n) {
            Some(p) => self.scaled_power(x, p, m).max(0.0) * self.power_scale,
            // unserved pairs take the largest value their cap allows
            None => self.scaled_power_cap(&tracks[m].positions[n], k, m, n).max(0.0) * self.power_scale,
        });
        let lambda = (0..nm)
            .map(|m| {
                (0..ns)
                    .map(|n| {
                        if n == 0 {
                            return self.slack_speed(x, m, 0);
                        }
                        let vr = self.plan_ref.velocity(m, n);
                        let v = tracks[m].velocities[n];
                        let lin = vr.norm_squared() + 2.0 * vr.dot(&(v - vr));
                        lin.max(0.0).sqrt().max(self.slack_speed(x, m, n))
                    })
                    .collect()
            })
            .collect();
        (FlightPlan { tracks }, AuxGains { b }, lambda)
    }
}

/// Solves the convexified problem starting from its reference point.
pub fn solve_p4(program: &P4Program) -> Result<SubproblemState> {
    solve_p4_with(program, &IpmOptions::default())
}

pub fn solve_p4_with(program: &P4Program, opts: &IpmOptions) -> Result<SubproblemState> {
    let mu_ref = program.reference_objective();
    let mut rows = Rows::default();
    let mut start = None;
    for backoff in SLACK_BACKOFF {
        let x = program.interior_start(backoff);
        if program.evaluate(&x, Level::Value, &mut rows) && rows.values().iter().all(|&g| g < -INTERIOR_MARGIN) {
            start = Some(x);
            break;
        }
    }
    if start.is_none() {
        start = interior::find_interior(program, &program.interior_start(SLACK_BACKOFF[0]), INTERIOR_MARGIN);
    }
    let Some(x0) = start else {
        // the reference is feasible but has no reachable interior
        return Ok(program.reference_state(mu_ref, 0, f64::INFINITY));
    };

    let out = interior::minimize(program, x0, opts)?;
    let in_domain = program.evaluate(&out.x, Level::Value, &mut rows);
    let (worst_row, worst_value) = interior::worst_row(program, &rows);
    let reason = if !in_domain {
        Some("solver left the domain".to_string())
    } else if worst_value > 1e-6 {
        Some("returned point violates a constraint".to_string())
    } else if !out.converged {
        Some(format!("no convergence after {} Newton steps", out.iterations))
    } else {
        None
    };
    if let Some(reason) = reason {
        return Err(Error::Subproblem {
            reason,
            worst_row,
            worst_value,
            gap: out.gap,
            best_iterate: out.x,
        });
    }
    let mu_lb = program.min_rate_lower_bound(&out.x);
    if !(mu_lb >= mu_ref) {
        return Ok(program.reference_state(mu_ref, out.iterations, out.gap));
    }
    let (plan, aux, lambda) = program.unpack(&out.x);
    Ok(SubproblemState {
        plan,
        aux,
        lambda,
        mu_lb,
        mu_ref,
        newton_iterations: out.iterations,
        gap: out.gap,
        kept_reference: false,
    })
}
