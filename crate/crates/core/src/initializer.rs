//! Feasible starting point: stations are clustered with Lloyd's k-means and
//! each UAV circles its cluster at constant speed, serving the nearest
//! station of its cluster at full power.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scenario::{channel_gains, AuxGains, FlightPlan, Point, ScenarioConfig, Schedule, UavTrack};

/// Smallest circle radius used for degenerate clusters, meters.
pub const MIN_RADIUS: f64 = 5.0;
const MAX_SWEEPS: usize = 1000;
const PHASE_CANDIDATES: usize = 72;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Point>,
    /// Cluster index of every station.
    pub assignment: Vec<usize>,
    /// Mean distance from each centroid to its stations (0 when empty).
    pub radii: Vec<f64>,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(k, _)| k)
    }

    /// Sum of squared distances from stations to their centroids.
    pub fn objective(&self, points: &[Point]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| (p - self.centroids[c]).norm_squared())
            .sum()
    }
}

/// Seeded k-means over the station positions: `clusters` distinct stations
/// are drawn as initial centroids.
pub fn kmeans(points: &[Point], clusters: usize, seed: u64) -> Result<Clustering> {
    if clusters == 0 || clusters > points.len() {
        return Err(Error::config(
            "num_uavs",
            format!("cannot form {clusters} clusters from {} stations", points.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = rand::seq::index::sample(&mut rng, points.len(), clusters).into_vec();
    picks.sort_unstable();
    let seeds: Vec<Point> = picks.into_iter().map(|i| points[i]).collect();
    Ok(lloyd(points, seeds).0)
}

/// Lloyd iterations from explicit seeds. Also returns the objective after
/// each assignment sweep.
pub fn lloyd(points: &[Point], seeds: Vec<Point>) -> (Clustering, Vec<f64>) {
    let mut centroids = seeds;
    let mut assignment: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        history.push(points.iter().zip(&next).map(|(p, &c)| (p - centroids[c]).norm_squared()).sum());
        if next == assignment {
            break;
        }
        assignment = next;
        update_centroids(points, &assignment, &mut centroids);
    }
    let radii = (0..centroids.len())
        .map(|c| {
            let (sum, count) = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .fold((0.0, 0usize), |(s, n), (p, _)| (s + (p - centroids[c]).norm(), n + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();
    (
        Clustering {
            centroids,
            assignment,
            radii,
        },
        history,
    )
}

/// Index and distance of the nearest candidate; ties go to the lowest index.
fn nearest(p: &Point, candidates: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let d = (p - c).norm();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn update_centroids(points: &[Point], assignment: &[usize], centroids: &mut [Point]) {
    let mut sums = vec![Point::zeros(); centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &c) in points.iter().zip(assignment) {
        sums[c] += p;
        counts[c] += 1;
    }
    for c in 0..centroids.len() {
        if counts[c] > 0 {
            centroids[c] = sums[c] / counts[c] as f64;
        }
    }
    // an emptied cluster moves to the point worst served by the others
    for c in 0..centroids.len() {
        if counts[c] == 0 {
            let far = points
                .iter()
                .map(|p| nearest(p, centroids).1)
                .enumerate()
                .fold((0, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
            centroids[c] = points[far.0];
        }
    }
}

/// Turning angle per slot of a discretized circle that satisfies the
/// constant-acceleration kinematics exactly at constant speed.
fn step_angle(speed: f64, radius: f64, delta_t: f64) -> f64 {
    2.0 * (speed * delta_t / (2.0 * radius)).atan()
}

/// Acceleration magnitude needed on the discretized circle.
pub fn circle_acceleration(speed: f64, radius: f64, delta_t: f64) -> f64 {
    2.0 * speed * (step_angle(speed, radius, delta_t) / 2.0).sin() / delta_t
}

/// Circle radius actually flown for a cluster.
pub fn flight_radius(clustering: &Clustering, m: usize, cfg: &ScenarioConfig) -> f64 {
    clustering.radii[m].max(cfg.d_min.max(MIN_RADIUS))
}

fn circle_track(center: Point, radius: f64, speed: f64, phase: f64, cfg: &ScenarioConfig) -> UavTrack {
    let phi = step_angle(speed, radius, cfg.delta_t);
    let velocity = |n: usize| {
        let th = phase + n as f64 * phi;
        Point::new(-th.sin(), th.cos()) * speed
    };
    let accelerations = (0..cfg.num_steps)
        .map(|n| (velocity(n + 1) - velocity(n)) / cfg.delta_t)
        .collect();
    let q0 = center + Point::new(phase.cos(), phase.sin()) * radius;
    UavTrack::integrate(q0, velocity(0), accelerations, cfg.delta_t)
}

fn min_separation(a: &UavTrack, b: &UavTrack) -> f64 {
    a.positions
        .iter()
        .zip(&b.positions)
        .map(|(p, q)| (p - q).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Counter-clockwise constant-speed circles around the cluster centroids.
/// UAV `m` starts at angle `2 pi m / M`; further phase offsets are tried when
/// two circles would bring UAVs closer than `d_min`.
pub fn circular_plan(clustering: &Clustering, cfg: &ScenarioConfig, speeds: &[f64]) -> Result<FlightPlan> {
    let num_uavs = clustering.centroids.len();
    if speeds.len() != num_uavs {
        return Err(Error::config("initial_speeds", "one speed per UAV is required"));
    }
    let mut tracks: Vec<UavTrack> = Vec::with_capacity(num_uavs);
    for m in 0..num_uavs {
        let speed = speeds[m];
        if !(speed >= cfg.v_min && speed <= cfg.v_max) {
            return Err(Error::Initialization {
                uav: m,
                reason: format!("speed {speed} m/s outside [{}, {}]", cfg.v_min, cfg.v_max),
            });
        }
        let radius = flight_radius(clustering, m, cfg);
        let accel = circle_acceleration(speed, radius, cfg.delta_t);
        if accel > cfg.a_max {
            return Err(Error::Initialization {
                uav: m,
                reason: format!(
                    "circle of radius {radius:.2} m at {speed} m/s needs {accel:.3} m/s^2 > a_max {}",
                    cfg.a_max
                ),
            });
        }
        let base = 2.0 * PI * m as f64 / num_uavs as f64;
        let track = (0..PHASE_CANDIDATES)
            .map(|i| circle_track(clustering.centroids[m], radius, speed, base + 2.0 * PI * i as f64 / PHASE_CANDIDATES as f64, cfg))
            .find(|t| tracks.iter().all(|o| min_separation(o, t) >= cfg.d_min))
            .ok_or_else(|| Error::Initialization {
                uav: m,
                reason: format!("no phase offset keeps {} m separation", cfg.d_min),
            })?;
        tracks.push(track);
    }
    Ok(FlightPlan { tracks })
}

/// Constant circle speed with the least propulsion power that the
/// acceleration limit allows on a circle of `radius`.
pub fn economical_speed(radius: f64, cfg: &ScenarioConfig) -> Option<f64> {
    const GRID: usize = 2000;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=GRID {
        let s = cfg.v_min + (cfg.v_max - cfg.v_min) * i as f64 / GRID as f64;
        let a = circle_acceleration(s, radius, cfg.delta_t);
        if a > cfg.a_max {
            continue;
        }
        let power = cfg.c1 * s.powi(3) + cfg.c2 / s * (1.0 + a * a / cfg.gravity);
        if best.map_or(true, |(p, _)| power < p) {
            best = Some((power, s));
        }
    }
    best.map(|(_, s)| s)
}

/// Each UAV serves the nearest station of its own cluster at every sample.
pub fn initial_schedule(clustering: &Clustering, plan: &FlightPlan, cfg: &ScenarioConfig) -> Schedule {
    let mut schedule = Schedule::empty(cfg);
    for m in 0..plan.num_uavs() {
        let members: Vec<usize> = clustering.members(m).collect();
        for n in 0..cfg.num_samples() {
            let q = plan.position(m, n);
            let mut best: Option<(usize, f64)> = None;
            for &k in &members {
                let d = (q - cfg.gt_positions[k]).norm();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            if let Some((k, _)) = best {
                schedule.alpha.set(k, m, n, 1.0);
            }
        }
    }
    schedule
}

/// Received-power variables for every UAV transmitting at `p_max`.
pub fn initial_aux_gains(plan: &FlightPlan, cfg: &ScenarioConfig) -> AuxGains {
    AuxGains {
        b: channel_gains(plan, cfg).map(|h| h * cfg.p_max),
    }
}
