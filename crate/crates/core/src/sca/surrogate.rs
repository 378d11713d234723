//! Tight-at-reference bounds that convexify the trajectory subproblem.

use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};
use crate::scenario::{AuxGains, FlightPlan, Point, ScenarioConfig, Tensor3};

/// Affine function `offset + slope . x` of a planar vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2 {
    pub offset: f64,
    pub slope: Point,
}

impl Affine2 {
    pub fn eval(&self, x: &Point) -> f64 {
        self.offset + self.slope.dot(x)
    }
}

/// First-order lower bound of `|x|^2` around `x0`:
/// `|x0|^2 + 2 x0.(x - x0) = 2 x0.x - |x0|^2`.
pub fn taylor_sq_lower(x0: &Point) -> Affine2 {
    Affine2 {
        offset: -x0.norm_squared(),
        slope: 2.0 * x0,
    }
}

/// Linear upper bound of `log2(I + noise)` around the reference
/// interference `I_ref`: `a (I - I_ref) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceBound {
    pub a: f64,
    pub c: f64,
    pub interference_ref: f64,
}

impl InterferenceBound {
    pub fn new(interference_ref: f64, noise: f64) -> Self {
        let total = interference_ref + noise;
        InterferenceBound {
            a: LOG2_E / total,
            c: total.log2(),
            interference_ref,
        }
    }

    pub fn eval(&self, interference: f64) -> f64 {
        self.a * (interference - self.interference_ref) + self.c
    }
}

/// Interference at station `k` from every UAV other than `m` at sample `n`.
pub fn interference(b: &AuxGains, k: usize, m: usize, n: usize) -> f64 {
    let [_, nm, _] = b.b.dims();
    (0..nm).filter(|&j| j != m).map(|j| b.b.get(k, j, n)).sum()
}

pub fn rbar_upper_bound(b_ref: &AuxGains, k: usize, m: usize, n: usize, cfg: &ScenarioConfig) -> InterferenceBound {
    InterferenceBound::new(interference(b_ref, k, m, n), cfg.noise_power)
}

/// Upper bound on `log2(sum_{j != m} B_{k,j}(n) + noise)` evaluated at `b`.
pub fn rbar_upper(b: &AuxGains, b_ref: &AuxGains, k: usize, m: usize, n: usize, cfg: &ScenarioConfig) -> f64 {
    rbar_upper_bound(b_ref, k, m, n, cfg).eval(interference(b, k, m, n))
}

/// Coefficients `(D, F)` of the concave minorant of `1 / (H^2 + d^2)` built
/// at a reference horizontal distance `d_ref`.
pub fn bmax_coefficients(d_ref_sq: f64, altitude: f64) -> (f64, f64) {
    let h2 = altitude * altitude;
    let h4 = h2 * h2;
    let s = d_ref_sq + h2;
    let d = 2.0 * (1.0 / h4 - 1.0 / (s * s));
    let f = 1.0 / s + 2.0 * d_ref_sq / (s * s) - d_ref_sq / h4;
    (d, f)
}

/// Concave lower bound of `P_max beta0 / (H^2 + |q - w|^2)`, tight at
/// `q_ref`.
pub fn bmax_surrogate(q: &Point, q_ref: &Point, w: &Point, cfg: &ScenarioConfig) -> f64 {
    bmax_surrogate_with(bmax_coefficients, q, q_ref, w, cfg)
}

/// [`bmax_surrogate`] with the `(D, F)` coefficients supplied by `coefficients`.
pub fn bmax_surrogate_with(
    coefficients: impl Fn(f64, f64) -> (f64, f64),
    q: &Point,
    q_ref: &Point,
    w: &Point,
    cfg: &ScenarioConfig,
) -> f64 {
    let x = q - w;
    let x0 = q_ref - w;
    let (d, f) = coefficients(x0.norm_squared(), cfg.altitude);
    let h4 = cfg.altitude.powi(4);
    cfg.p_max * cfg.beta0 * (-x.norm_squared() / h4 + d * x.dot(&x0) + f)
}

/// Affine lower bound of `|q_m - q_j|^2` around the reference pair.
pub fn collision_linearization(q_m: &Point, q_j: &Point, q_m_ref: &Point, q_j_ref: &Point) -> Result<f64> {
    let delta_ref = q_m_ref - q_j_ref;
    if delta_ref.norm_squared() == 0.0 {
        return Err(Error::Domain("coincident reference positions in collision linearization".into()));
    }
    Ok(taylor_sq_lower(&delta_ref).eval(&(q_m - q_j)))
}

/// All reference-dependent constants of one convexified subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCoefficients {
    /// Interference slope per served pair `(k, m, n)`, bits per watt.
    pub a: Tensor3,
    /// Interference intercept per served pair, bits.
    pub c: Tensor3,
    pub d: Tensor3,
    pub f: Tensor3,
}

impl SurrogateCoefficients {
    pub fn new(plan_ref: &FlightPlan, b_ref: &AuxGains, cfg: &ScenarioConfig) -> Self {
        let [nk, nm, ns] = b_ref.b.dims();
        let bounds = |k, m, n| rbar_upper_bound(b_ref, k, m, n, cfg);
        let dist = |k: usize, m: usize, n: usize| (plan_ref.position(m, n) - cfg.gt_positions[k]).norm_squared();
        SurrogateCoefficients {
            a: Tensor3::from_fn(nk, nm, ns, |k, m, n| bounds(k, m, n).a),
            c: Tensor3::from_fn(nk, nm, ns, |k, m, n| bounds(k, m, n).c),
            d: Tensor3::from_fn(nk, nm, ns, |k, m, n| bmax_coefficients(dist(k, m, n), cfg.altitude).0),
            f: Tensor3::from_fn(nk, nm, ns, |k, m, n| bmax_coefficients(dist(k, m, n), cfg.altitude).1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::channel_gain;

    #[test]
    fn taylor_tight_and_below() {
        let x0 = Point::new(3.0, -4.0);
        assert_eq!(taylor_sq_lower(&x0).eval(&x0), 25.0);
        let zero = taylor_sq_lower(&Point::zeros());
        assert_eq!(zero.eval(&Point::new(7.0, 1.0)), 0.0);
        let x = Point::new(-1.0, 2.0);
        assert!(taylor_sq_lower(&x0).eval(&x) <= x.norm_squared());
    }

    #[test]
    fn interference_bound_unit_noise() {
        let b = InterferenceBound::new(0.0, 1.0);
        assert_eq!(b.a, LOG2_E);
        assert_eq!(b.c, 0.0);
        assert_eq!(b.eval(0.0), 0.0);
        assert!(b.eval(3.0) >= (4.0f64).log2());
    }

    #[test]
    fn rbar_tight_at_reference() {
        let cfg = ScenarioConfig::with_random_stations(3, 2, 1, 0);
        let b = AuxGains {
            b: Tensor3::from_fn(2, 3, 2, |k, m, n| 1e-12 * (1 + k + 2 * m + n) as f64),
        };
        let exact = (interference(&b, 1, 0, 1) + cfg.noise_power).log2();
        assert!((rbar_upper(&b, &b, 1, 0, 1, &cfg) - exact).abs() < 1e-12);
    }

    #[test]
    fn bmax_tight_and_coefficients() {
        let cfg = ScenarioConfig::default_scenario(0);
        let w = Point::new(10.0, 20.0);
        let q = Point::new(150.0, -40.0);
        let exact = cfg.p_max * channel_gain(&q, &w, &cfg);
        assert!((bmax_surrogate(&q, &q, &w, &cfg) - exact).abs() <= 1e-12 * exact);
        let (d, _) = bmax_coefficients(0.0, 100.0);
        assert_eq!(d, 0.0);
        for d2 in [1.0, 1e3, 1e6] {
            assert!(bmax_coefficients(d2, 100.0).0 > 0.0);
        }
    }

    #[test]
    fn collision_cases() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(10.0, 0.0);
        assert_eq!(collision_linearization(&a, &b, &a, &b).unwrap(), 100.0);
        assert!(collision_linearization(&a, &b, &a, &a).is_err());
        let shifted = collision_linearization(&Point::new(0.0, 5.0), &b, &a, &b).unwrap();
        assert!(shifted <= 125.0);
    }
}
