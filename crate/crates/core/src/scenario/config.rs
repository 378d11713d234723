//! Scenario configuration and its text file format.
//!
//! Files are TOML with SI units. Quantities that are more naturally given
//! in decibels may use the suffixed keys `beta0_db` and `noise_dbm`, which
//! are converted on load.

use std::path::Path;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Side length of the square deployment area used by the bundled scenarios.
pub const DEFAULT_AREA: f64 = 500.0;

/// All physical and algorithmic constants of one planning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_uavs: usize,
    pub num_steps: usize,
    /// Slot length in seconds.
    pub delta_t: f64,
    /// Flight altitude in meters.
    pub altitude: f64,
    pub gt_positions: Vec<Point>,
    /// Channel gain at 1 m reference distance (linear).
    pub beta0: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    pub p_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub d_min: f64,
    /// Per-UAV propulsion energy budget in joules.
    pub e_max: f64,
    pub c1: f64,
    pub c2: f64,
    /// UAV mass in kg, used by the kinetic boundary term.
    pub mass: f64,
    pub gravity: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Constant speed of each UAV on its initial circle.
    pub initial_speeds: Vec<f64>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

impl ScenarioConfig {
    /// The two-UAV, six-station setup with the published constants and a
    /// seeded uniform placement of stations in a 500 m square.
    pub fn default_scenario(seed: u64) -> Self {
        Self::with_random_stations(2, 6, 100, seed)
    }

    /// Published constants with `num_gts` stations drawn uniformly from the
    /// default area. Stations are kept at least 20 m apart.
    pub fn with_random_stations(num_uavs: usize, num_gts: usize, num_steps: usize, seed: u64) -> Self {
        let gt_positions = random_stations(num_gts, DEFAULT_AREA, 20.0, seed);
        ScenarioConfig {
            num_uavs,
            num_steps,
            delta_t: 1.0,
            altitude: 100.0,
            gt_positions,
            beta0: db_to_linear(-60.0),
            noise_power: dbm_to_watts(-110.0),
            p_max: 0.1,
            v_min: 1.5,
            v_max: 50.0,
            a_max: 5.0,
            d_min: 10.0,
            e_max: 2e5,
            c1: 9.26e-4,
            c2: 2250.0,
            mass: 2.0,
            gravity: 9.81,
            epsilon: 1e-3,
            max_iters: 50,
            seed,
            initial_speeds: default_speeds(num_uavs),
        }
    }

    pub fn num_gts(&self) -> usize {
        self.gt_positions.len()
    }

    /// Number of sample points per trajectory (`N + 1`).
    pub fn num_samples(&self) -> usize {
        self.num_steps + 1
    }

    /// Divisor of the average-rate sum, `max(N, 1)`.
    pub fn rate_normalizer(&self) -> f64 {
        self.num_steps.max(1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and > 0, got {v}")))
            }
        };
        if self.num_uavs == 0 {
            return Err(Error::config("num_uavs", "must be at least 1"));
        }
        if self.gt_positions.is_empty() {
            return Err(Error::config("gt_positions", "at least one station is required"));
        }
        if self.num_steps == 0 {
            return Err(Error::config("num_steps", "must be at least 1"));
        }
        positive("delta_t", self.delta_t)?;
        positive("altitude", self.altitude)?;
        positive("beta0", self.beta0)?;
        positive("noise_power", self.noise_power)?;
        positive("p_max", self.p_max)?;
        positive("v_min", self.v_min)?;
        positive("v_max", self.v_max)?;
        positive("a_max", self.a_max)?;
        positive("e_max", self.e_max)?;
        positive("epsilon", self.epsilon)?;
        positive("gravity", self.gravity)?;
        if self.v_min >= self.v_max {
            return Err(Error::config("v_min", "must be strictly below v_max"));
        }
        if !(self.d_min.is_finite() && self.d_min >= 0.0) {
            return Err(Error::config("d_min", "must be finite and >= 0"));
        }
        for (field, v) in [("c1", self.c1), ("c2", self.c2), ("mass", self.mass)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be finite and >= 0"));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        for (i, w) in self.gt_positions.iter().enumerate() {
            if !(w.x.is_finite() && w.y.is_finite()) {
                return Err(Error::config("gt_positions", format!("station {i} is not finite")));
            }
            for (j, u) in self.gt_positions[..i].iter().enumerate() {
                if w == u {
                    return Err(Error::config(
                        "gt_positions",
                        format!("stations {j} and {i} coincide"),
                    ));
                }
            }
        }
        if self.initial_speeds.len() != self.num_uavs {
            return Err(Error::config(
                "initial_speeds",
                format!("expected {} entries, got {}", self.num_uavs, self.initial_speeds.len()),
            ));
        }
        for &s in &self.initial_speeds {
            if !(s >= self.v_min && s <= self.v_max) {
                return Err(Error::config(
                    "initial_speeds",
                    format!("speed {s} outside [{}, {}]", self.v_min, self.v_max),
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        let cfg = raw.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Serializes to the same TOML schema `load` accepts, with linear units.
    pub fn to_toml_string(&self) -> String {
        let raw = RawConfig {
            num_uavs: Some(self.num_uavs),
            num_steps: Some(self.num_steps),
            delta_t: Some(self.delta_t),
            altitude: Some(self.altitude),
            gt_positions: Some(self.gt_positions.iter().map(|p| [p.x, p.y]).collect()),
            beta0: Some(self.beta0),
            beta0_db: None,
            noise_power: Some(self.noise_power),
            noise_dbm: None,
            p_max: Some(self.p_max),
            v_min: Some(self.v_min),
            v_max: Some(self.v_max),
            a_max: Some(self.a_max),
            d_min: Some(self.d_min),
            e_max: Some(self.e_max),
            c1: Some(self.c1),
            c2: Some(self.c2),
            mass: Some(self.mass),
            gravity: Some(self.gravity),
            epsilon: Some(self.epsilon),
            max_iters: Some(self.max_iters),
            seed: Some(self.seed),
            initial_speeds: Some(self.initial_speeds.clone()),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

fn default_speeds(num_uavs: usize) -> Vec<f64> {
    (0..num_uavs).map(|m| 3.0 + m as f64).collect()
}

fn random_stations(count: usize, side: f64, min_spacing: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Point> = Vec::with_capacity(count);
    while out.len() < count {
        let p = Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        if out.iter().all(|q| (p - q).norm() >= min_spacing) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    num_uavs: Option<usize>,
    num_steps: Option<usize>,
    delta_t: Option<f64>,
    altitude: Option<f64>,
    gt_positions: Option<Vec<[f64; 2]>>,
    beta0: Option<f64>,
    beta0_db: Option<f64>,
    noise_power: Option<f64>,
    noise_dbm: Option<f64>,
    p_max: Option<f64>,
    v_min: Option<f64>,
    v_max: Option<f64>,
    a_max: Option<f64>,
    d_min: Option<f64>,
    e_max: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    mass: Option<f64>,
    gravity: Option<f64>,
    epsilon: Option<f64>,
    max_iters: Option<usize>,
    seed: Option<u64>,
    initial_speeds: Option<Vec<f64>>,
}

impl RawConfig {
    fn into_config(self) -> Result<ScenarioConfig> {
        let gt = self
            .gt_positions
            .ok_or_else(|| Error::config("gt_positions", "missing required field"))?;
        let num_uavs = self.num_uavs.unwrap_or(2);
        let mut cfg = ScenarioConfig::with_random_stations(num_uavs, 0, self.num_steps.unwrap_or(100), self.seed.unwrap_or(0));
        cfg.gt_positions = gt.into_iter().map(|[x, y]| Point::new(x, y)).collect();
        cfg.beta0 = pick_linear("beta0", self.beta0, self.beta0_db.map(db_to_linear), cfg.beta0)?;
        cfg.noise_power = pick_linear("noise_power", self.noise_power, self.noise_dbm.map(dbm_to_watts), cfg.noise_power)?;
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        take!(delta_t, altitude, p_max, v_min, v_max, a_max, d_min, e_max, c1, c2, mass, gravity, epsilon, max_iters);
        if let Some(s) = self.initial_speeds {
            cfg.initial_speeds = s;
        }
        Ok(cfg)
    }
}

fn pick_linear(field: &str, linear: Option<f64>, from_db: Option<f64>, default: f64) -> Result<f64> {
    match (linear, from_db) {
        (Some(_), Some(_)) => Err(Error::config(field, "given both in linear and logarithmic units")),
        (Some(v), None) | (None, Some(v)) => Ok(v),
        (None, None) => Ok(default),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decibel_conversions() {
        assert!((db_to_linear(-60.0) - 1e-6).abs() < 1e-20);
        assert!((dbm_to_watts(-110.0) - 1e-14).abs() < 1e-28);
    }

    #[test]
    fn default_is_valid_and_seeded() {
        let a = ScenarioConfig::default_scenario(7);
        a.validate().unwrap();
        assert_eq!(a, ScenarioConfig::default_scenario(7));
        assert_ne!(a.gt_positions, ScenarioConfig::default_scenario(8).gt_positions);
        assert_eq!(a.initial_speeds, vec![3.0, 4.0]);
    }

    #[test]
    fn missing_stations_names_field() {
        let err = ScenarioConfig::from_toml_str("num_uavs = 2\n").unwrap_err();
        assert!(err.to_string().contains("gt_positions"), "{err}");
    }

    #[test]
    fn db_fields_are_converted() {
        let cfg = ScenarioConfig::from_toml_str(
            "num_uavs = 1\ninitial_speeds = [3.0]\nbeta0_db = -50.0\nnoise_dbm = -100.0\ngt_positions = [[0.0, 0.0], [10.0, 0.0]]\n",
        )
        .unwrap();
        assert!((cfg.beta0 - 1e-5).abs() < 1e-18);
        assert!((cfg.noise_power - 1e-13).abs() < 1e-26);
    }

    #[test]
    fn duplicate_stations_rejected() {
        let err = ScenarioConfig::from_toml_str("gt_positions = [[1.0, 2.0], [1.0, 2.0]]\n").unwrap_err();
        assert!(err.to_string().contains("coincide"));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::default_scenario(3);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_inverted_speed_band() {
        let mut cfg = ScenarioConfig::default_scenario(0);
        cfg.v_min = 60.0;
        assert!(cfg.validate().is_err());
    }
}
