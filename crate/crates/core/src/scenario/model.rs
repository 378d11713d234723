//! Domain types and the air-to-ground link and propulsion models.

use serde::Serialize;

use super::config::{Point, ScenarioConfig};
use crate::error::{Error, Result};

/// Dense tensor indexed `(k, m, n)`: station, UAV, time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(k: usize, m: usize, n: usize) -> Self {
        Tensor3 {
            dims: [k, m, n],
            data: vec![0.0; k * m * n],
        }
    }

    pub fn from_fn(k: usize, m: usize, n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(k, m, n);
        for a in 0..k {
            for b in 0..m {
                for c in 0..n {
                    t.set(a, b, c, f(a, b, c));
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn offset(&self, k: usize, m: usize, n: usize) -> usize {
        debug_assert!(k < self.dims[0] && m < self.dims[1] && n < self.dims[2]);
        (k * self.dims[1] + m) * self.dims[2] + n
    }

    #[inline]
    pub fn get(&self, k: usize, m: usize, n: usize) -> f64 {
        self.data[self.offset(k, m, n)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, m: usize, n: usize, v: f64) {
        let o = self.offset(k, m, n);
        self.data[o] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Discretized trajectory of one UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct UavTrack {
    /// `N + 1` positions.
    pub positions: Vec<Point>,
    /// `N + 1` velocities.
    pub velocities: Vec<Point>,
    /// `N` accelerations; `accelerations[n]` drives slot `n -> n + 1`.
    pub accelerations: Vec<Point>,
}

impl UavTrack {
    /// Integrates the accelerations forward from the initial state.
    pub fn integrate(q0: Point, v0: Point, accelerations: Vec<Point>, delta_t: f64) -> Self {
        let mut positions = Vec::with_capacity(accelerations.len() + 1);
        let mut velocities = Vec::with_capacity(accelerations.len() + 1);
        let (mut q, mut v) = (q0, v0);
        positions.push(q);
        velocities.push(v);
        for a in &accelerations {
            q = q + v * delta_t + a * (0.5 * delta_t * delta_t);
            v = v + a * delta_t;
            positions.push(q);
            velocities.push(v);
        }
        UavTrack {
            positions,
            velocities,
            accelerations,
        }
    }
}

/// Trajectories of all UAVs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightPlan {
    pub tracks: Vec<UavTrack>,
}

impl FlightPlan {
    pub fn num_uavs(&self) -> usize {
        self.tracks.len()
    }

    pub fn position(&self, m: usize, n: usize) -> Point {
        self.tracks[m].positions[n]
    }

    pub fn velocity(&self, m: usize, n: usize) -> Point {
        self.tracks[m].velocities[n]
    }
}

/// Relaxed association `alpha[k, m, n]` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub alpha: Tensor3,
}

impl Schedule {
    pub fn empty(cfg: &ScenarioConfig) -> Self {
        Schedule {
            alpha: Tensor3::zeros(cfg.num_gts(), cfg.num_uavs, cfg.num_samples()),
        }
    }

    /// Load of UAV `m` at sample `n`, i.e. the sum over stations.
    pub fn uav_load(&self, m: usize, n: usize) -> f64 {
        (0..self.alpha.dims()[0]).map(|k| self.alpha.get(k, m, n)).sum()
    }

    /// Load of station `k` at sample `n`, i.e. the sum over UAVs.
    pub fn gt_load(&self, k: usize, n: usize) -> f64 {
        (0..self.alpha.dims()[1]).map(|m| self.alpha.get(k, m, n)).sum()
    }

    pub fn is_binary(&self, tol: f64) -> bool {
        self.alpha.values().iter().all(|&a| a.abs() <= tol || (a - 1.0).abs() <= tol)
    }
}

/// Transmit power `p[m][n]` in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPlan {
    pub p: Vec<Vec<f64>>,
}

impl PowerPlan {
    pub fn constant(cfg: &ScenarioConfig, value: f64) -> Self {
        PowerPlan {
            p: vec![vec![value; cfg.num_samples()]; cfg.num_uavs],
        }
    }
}

/// Auxiliary received power `B[k, m, n] = p_m(n) h_{k,m}(n)` in watts, kept
/// as an independent variable of the trajectory subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxGains {
    pub b: Tensor3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub h: Tensor3,
    pub gamma: Tensor3,
    /// `log2(1 + gamma)` in bits/s/Hz.
    pub slot_rate: Tensor3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub rate_per_gt: Vec<f64>,
    /// Average of the per-slot spectral efficiency over the `N + 1` samples.
    pub slot_average_per_gt: Vec<f64>,
    pub energy_per_uav: Vec<f64>,
    pub min_rate: f64,
    pub connection_time_per_gt: Vec<f64>,
}

/// Free-space gain between a UAV at horizontal position `q` and station `w`.
pub fn channel_gain(q: &Point, w: &Point, cfg: &ScenarioConfig) -> f64 {
    cfg.beta0 / (cfg.altitude * cfg.altitude + (q - w).norm_squared())
}

pub fn channel_gains(plan: &FlightPlan, cfg: &ScenarioConfig) -> Tensor3 {
    Tensor3::from_fn(cfg.num_gts(), plan.num_uavs(), cfg.num_samples(), |k, m, n| {
        channel_gain(&plan.position(m, n), &cfg.gt_positions[k], cfg)
    })
}

/// SINR at station `k` when served by UAV `m` at sample `n`.
pub fn sinr(k: usize, m: usize, n: usize, powers: &PowerPlan, gains: &Tensor3, cfg: &ScenarioConfig) -> f64 {
    let num_uavs = gains.dims()[1];
    let interference: f64 = (0..num_uavs)
        .filter(|&j| j != m)
        .map(|j| powers.p[j][n] * gains.get(k, j, n))
        .sum();
    powers.p[m][n] * gains.get(k, m, n) / (interference + cfg.noise_power)
}

impl LinkMetrics {
    pub fn from_powers(plan: &FlightPlan, powers: &PowerPlan, cfg: &ScenarioConfig) -> Self {
        let h = channel_gains(plan, cfg);
        let [kk, mm, nn] = h.dims();
        let gamma = Tensor3::from_fn(kk, mm, nn, |k, m, n| sinr(k, m, n, powers, &h, cfg));
        let slot_rate = gamma.map(|g| (1.0 + g).log2());
        LinkMetrics { h, gamma, slot_rate }
    }

    /// Metrics implied by an auxiliary received-power tensor, where the
    /// interference at station `k` is `sum_{j != m} B[k, j, n]`.
    pub fn from_aux(plan: &FlightPlan, aux: &AuxGains, cfg: &ScenarioConfig) -> Self {
        let h = channel_gains(plan, cfg);
        let [kk, mm, nn] = h.dims();
        let gamma = Tensor3::from_fn(kk, mm, nn, |k, m, n| {
            let interference: f64 = (0..mm).filter(|&j| j != m).map(|j| aux.b.get(k, j, n)).sum();
            aux.b.get(k, m, n) / (interference + cfg.noise_power)
        });
        let slot_rate = gamma.map(|g| (1.0 + g).log2());
        LinkMetrics { h, gamma, slot_rate }
    }
}

/// Average rate of station `k`: the schedule-weighted spectral efficiency
/// summed over all `N + 1` samples and divided by `max(N, 1)`.
pub fn average_rate(k: usize, schedule: &Schedule, metrics: &LinkMetrics, cfg: &ScenarioConfig) -> f64 {
    let [_, mm, nn] = schedule.alpha.dims();
    let mut total = 0.0;
    for n in 0..nn {
        for m in 0..mm {
            total += schedule.alpha.get(k, m, n) * metrics.slot_rate.get(k, m, n);
        }
    }
    total / cfg.rate_normalizer()
}

pub fn rates(schedule: &Schedule, metrics: &LinkMetrics, cfg: &ScenarioConfig) -> Vec<f64> {
    (0..cfg.num_gts()).map(|k| average_rate(k, schedule, metrics, cfg)).collect()
}

pub fn min_rate(schedule: &Schedule, metrics: &LinkMetrics, cfg: &ScenarioConfig) -> f64 {
    rates(schedule, metrics, cfg).into_iter().fold(f64::INFINITY, f64::min)
}

/// Propulsion power drawn during one slot at velocity `v` and acceleration `a`.
pub fn slot_propulsion(v: &Point, a: &Point, cfg: &ScenarioConfig) -> f64 {
    let speed = v.norm();
    cfg.c1 * speed.powi(3) + cfg.c2 / speed * (1.0 + a.norm_squared() / cfg.gravity)
}

/// Propulsion energy of UAV `m` over the `N` slots plus the kinetic boundary term.
pub fn propulsion_energy(m: usize, plan: &FlightPlan, cfg: &ScenarioConfig) -> Result<f64> {
    let track = &plan.tracks[m];
    let mut total = 0.0;
    for (n, a) in track.accelerations.iter().enumerate() {
        let v = track.velocities[n];
        if v.norm() == 0.0 {
            return Err(Error::Domain(format!("UAV {m} has zero speed at sample {n}")));
        }
        total += slot_propulsion(&v, a, cfg);
    }
    let first = track.velocities.first().map_or(0.0, |v| v.norm_squared());
    let last = track.velocities.last().map_or(0.0, |v| v.norm_squared());
    Ok(total + 0.5 * cfg.mass * (last - first))
}

pub fn energies(plan: &FlightPlan, cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    (0..plan.num_uavs()).map(|m| propulsion_energy(m, plan, cfg)).collect()
}
