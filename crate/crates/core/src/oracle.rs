//! Brute-force and numerical references for the tests and the validation
//! suites.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lp::{build_lp, LpInstance};
use crate::scenario::{LinkMetrics, Point, ScenarioConfig};

/// Upper limit on the number of binary schedules visited by
/// [`enumerate_instance`].
pub const MAX_CANDIDATES: f64 = 1e7;

/// All one-to-one partial pairings of `stations` with `uavs`, each given as
/// the UAV serving every station (or none).
fn slot_matchings(stations: usize, uavs: usize) -> Vec<Vec<Option<usize>>> {
    fn extend(k: usize, current: &mut Vec<Option<usize>>, used: &mut Vec<bool>, out: &mut Vec<Vec<Option<usize>>>) {
        if k == current.len() {
            out.push(current.clone());
            return;
        }
        extend(k + 1, current, used, out);
        for m in 0..used.len() {
            if !used[m] {
                used[m] = true;
                current[k] = Some(m);
                extend(k + 1, current, used, out);
                current[k] = None;
                used[m] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(0, &mut vec![None; stations], &mut vec![false; uavs], &mut out);
    out
}

/// Exact max-min rate over binary schedules of an LP instance.
pub fn enumerate_instance(instance: &LpInstance) -> Result<f64> {
    let [nk, nm, ns] = instance.dims();
    let matchings = slot_matchings(nk, nm);
    let candidates = (matchings.len() as f64).powi(ns as i32);
    if candidates > MAX_CANDIDATES {
        return Err(Error::TooLarge { candidates });
    }
    // per-slot rate contribution of every matching
    let gains: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|n| {
            matchings
                .iter()
                .map(|mt| {
                    (0..nk)
                        .map(|k| mt[k].map_or(0.0, |m| instance.rate_coefficients.get(k, m, n)))
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut choice = vec![0usize; ns];
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut totals = vec![0.0; nk];
        for (n, &c) in choice.iter().enumerate() {
            for k in 0..nk {
                totals[k] += gains[n][c][k];
            }
        }
        let mu = totals.iter().copied().fold(f64::INFINITY, f64::min) / instance.normalizer;
        best = best.max(mu);
        // odometer increment
        let mut i = 0;
        loop {
            if i == ns {
                return Ok(best);
            }
            choice[i] += 1;
            if choice[i] < matchings.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Exact max-min rate over binary schedules for fixed link metrics.
pub fn enumerate_schedules(metrics: &LinkMetrics, cfg: &ScenarioConfig) -> Result<f64> {
    enumerate_instance(&build_lp(metrics, cfg))
}

/// Central differences with step `step * max(|x_i|, 1)` per coordinate.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Horizontal position drawn uniformly from the station bounding box
/// inflated to twice its size about its center.
pub fn sample_position(rng: &mut impl Rng, cfg: &ScenarioConfig) -> Point {
    let (mut lo, mut hi) = (cfg.gt_positions[0], cfg.gt_positions[0]);
    for p in &cfg.gt_positions {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let center = (lo + hi) / 2.0;
    // keep a usable box when all stations share a coordinate
    let half = (hi - lo).map(|v| v.max(1.0));
    Point::new(
        rng.gen_range(center.x - half.x..=center.x + half.x),
        rng.gen_range(center.y - half.y..=center.y + half.y),
    )
}

/// Received power drawn log-uniformly from `[1e-16, 1e-8]` watts.
pub fn sample_power(rng: &mut impl Rng) -> f64 {
    10f64.powf(rng.gen_range(-16.0..=-8.0))
}
