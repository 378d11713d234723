//! The convexified trajectory and received-power subproblem for a fixed
//! schedule.
//!
//! Kinematic equalities are eliminated: each UAV is parameterized by its
//! initial position, its accelerations and its slack speeds, while the
//! initial velocity stays at its reference value. Received powers are kept
//! only for station/sample pairs that the schedule actually serves, scaled
//! by `p_max beta0 / H^2` so that they are of order one. Each station also
//! gets a rate variable `s_k` between `mu` and its rate bound.

use std::f64::consts::LOG2_E;
use std::fmt::Write as _;

use super::interior::{ConvexProgram, Level, Rows};
use super::surrogate::SurrogateCoefficients;
use crate::scenario::{AuxGains, FlightPlan, Point, ScenarioConfig, Schedule, UavTrack};

/// Shares at or below this weight are dropped from the rate rows.
pub const ALPHA_PRUNE: f64 = 1e-9;
/// Objective weight of the mean per-station rate bound, which picks among
/// the solutions with the best worst-case rate.
pub const TIE_WEIGHT: f64 = 1e-3;

/// Row and variable counts of the full subproblem, one entry per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P4Counts {
    pub positions: usize,
    pub velocities: usize,
    pub accelerations: usize,
    pub slack_speeds: usize,
    pub received_powers: usize,
    pub velocity_recursion: usize,
    pub position_recursion: usize,
    pub speed_cap: usize,
    pub acceleration_cap: usize,
    pub rate: usize,
    pub received_power_box: usize,
    pub energy: usize,
    pub slack_min: usize,
    pub slack_linearization: usize,
    pub collision: usize,
}

impl P4Counts {
    pub fn for_config(cfg: &ScenarioConfig) -> Self {
        let (k, m, n) = (cfg.num_gts(), cfg.num_uavs, cfg.num_steps);
        P4Counts {
            positions: 2 * m * (n + 1),
            // the initial velocity is a fixed boundary condition
            velocities: 2 * m * n,
            accelerations: 2 * m * n,
            slack_speeds: m * n,
            received_powers: k * m * (n + 1),
            velocity_recursion: m * n,
            position_recursion: m * n,
            speed_cap: m * n,
            acceleration_cap: m * n,
            rate: k,
            received_power_box: k * m * (n + 1),
            energy: m,
            slack_min: m * n,
            slack_linearization: m * n,
            collision: m * m.saturating_sub(1) * (n + 1) / 2,
        }
    }

    pub fn variables(&self) -> usize {
        self.positions + self.velocities + self.accelerations + self.slack_speeds + self.received_powers + 1
    }

    pub fn constraints(&self) -> usize {
        self.velocity_recursion
            + self.position_recursion
            + self.speed_cap
            + self.acceleration_cap
            + self.rate
            + self.received_power_box
            + self.energy
            + self.slack_min
            + self.slack_linearization
            + self.collision
    }
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Speed(usize, usize),
    Accel(usize, usize),
    SlackMin(usize, usize),
    SlackLin(usize, usize),
    Energy(usize),
    Collision(usize, usize, usize),
    PowerNonneg(usize, usize, usize),
    PowerMax(usize, usize, usize),
    Rate(usize),
    RateFloor(usize),
}

#[derive(Debug, Clone, Copy)]
struct RateTerm {
    pair: usize,
    uav: usize,
    weight: f64,
    slope: f64,
    intercept: f64,
    interference_ref: f64,
}

#[derive(Debug, Clone)]
pub struct P4Program {
    cfg: ScenarioConfig,
    pub plan_ref: FlightPlan,
    pub aux_ref: AuxGains,
    pub coefficients: SurrogateCoefficients,
    /// Served `(station, sample)` pairs carrying received-power variables.
    pub pairs: Vec<(usize, usize)>,
    pair_of: Vec<Option<usize>>,
    rate_terms: Vec<Vec<RateTerm>>,
    pub power_scale: f64,
    noise: f64,
    block: usize,
    cost: Vec<f64>,
    kinds: Vec<RowKind>,
}

/// Builds the subproblem around the reference trajectory and received
/// powers for the given schedule.
pub fn build_p4(schedule: &Schedule, plan_ref: &FlightPlan, aux_ref: &AuxGains, cfg: &ScenarioConfig) -> P4Program {
    let (nk, nm, ns) = (cfg.num_gts(), cfg.num_uavs, cfg.num_samples());
    let power_scale = cfg.p_max * cfg.beta0 / cfg.altitude.powi(2);
    let noise = cfg.noise_power / power_scale;
    let coefficients = SurrogateCoefficients::new(plan_ref, aux_ref, cfg);

    let mut pairs = Vec::new();
    let mut pair_of = vec![None; nk * ns];
    for k in 0..nk {
        for n in 0..ns {
            if (0..nm).any(|m| schedule.alpha.get(k, m, n) > ALPHA_PRUNE) {
                pair_of[k * ns + n] = Some(pairs.len());
                pairs.push((k, n));
            }
        }
    }
    let rate_terms = (0..nk)
        .map(|k| {
            let mut terms = Vec::new();
            for n in 0..ns {
                let Some(pair) = pair_of[k * ns + n] else { continue };
                for m in 0..nm {
                    let weight = schedule.alpha.get(k, m, n);
                    if weight <= ALPHA_PRUNE {
                        continue;
                    }
                    let interference_ref: f64 = (0..nm).filter(|&j| j != m).map(|j| aux_ref.b.get(k, j, n) / power_scale).sum();
                    terms.push(RateTerm {
                        pair,
                        uav: m,
                        weight,
                        slope: LOG2_E / (interference_ref + noise),
                        intercept: (interference_ref + noise).log2(),
                        interference_ref,
                    });
                }
            }
            terms
        })
        .collect();

    let n = cfg.num_steps;
    let block = 3 * n + 2;
    let mut kinds = Vec::new();
    for m in 0..nm {
        kinds.extend((1..=n).map(|i| RowKind::Speed(m, i)));
        kinds.extend((0..n).map(|i| RowKind::Accel(m, i)));
        for i in 1..=n {
            kinds.push(RowKind::SlackMin(m, i));
            kinds.push(RowKind::SlackLin(m, i));
        }
        kinds.push(RowKind::Energy(m));
    }
    if cfg.d_min > 0.0 {
        for i in 0..ns {
            for m in 0..nm {
                for j in m + 1..nm {
                    kinds.push(RowKind::Collision(m, j, i));
                }
            }
        }
    }
    for &(k, i) in &pairs {
        for m in 0..nm {
            kinds.push(RowKind::PowerNonneg(k, m, i));
            kinds.push(RowKind::PowerMax(k, m, i));
        }
    }
    kinds.extend((0..nk).map(RowKind::Rate));
    kinds.extend((0..nk).map(RowKind::RateFloor));

    let dim = nm * block + pairs.len() * nm + nk + 1;
    let mut cost = vec![0.0; dim];
    cost[dim - 1 - nk..dim - 1].fill(-TIE_WEIGHT / nk as f64);
    cost[dim - 1] = -1.0;
    P4Program {
        cfg: cfg.clone(),
        plan_ref: plan_ref.clone(),
        aux_ref: aux_ref.clone(),
        coefficients,
        pairs,
        pair_of,
        rate_terms,
        power_scale,
        noise,
        block,
        cost,
        kinds,
    }
}

impl P4Program {
    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn counts(&self) -> P4Counts {
        P4Counts::for_config(&self.cfg)
    }

    pub fn num_rows(&self) -> usize {
        self.kinds.len()
    }

    fn q0(&self, m: usize) -> usize {
        m * self.block
    }

    fn acc(&self, m: usize, i: usize) -> usize {
        m * self.block + 2 + 2 * i
    }

    fn slack(&self, m: usize, n: usize) -> usize {
        m * self.block + 2 + 2 * self.cfg.num_steps + (n - 1)
    }

    fn power(&self, pair: usize, m: usize) -> usize {
        self.cfg.num_uavs * self.block + pair * self.cfg.num_uavs + m
    }

    pub fn mu_index(&self) -> usize {
        self.cost.len() - 1
    }

    pub fn rate_index(&self, k: usize) -> usize {
        self.mu_index() - self.cfg.num_gts() + k
    }

    pub fn pair_index(&self, k: usize, n: usize) -> Option<usize> {
        self.pair_of[k * self.cfg.num_samples() + n]
    }

    /// Trajectories implied by the decision vector.
    pub fn tracks(&self, x: &[f64]) -> Vec<UavTrack> {
        let n = self.cfg.num_steps;
        (0..self.cfg.num_uavs)
            .map(|m| {
                let q0 = Point::new(x[self.q0(m)], x[self.q0(m) + 1]);
                let accs = (0..n).map(|i| Point::new(x[self.acc(m, i)], x[self.acc(m, i) + 1])).collect();
                UavTrack::integrate(q0, self.plan_ref.velocity(m, 0), accs, self.cfg.delta_t)
            })
            .collect()
    }

    /// Decision vector at the reference trajectory with the given slack
    /// speeds, scaled received powers (per pair and UAV) and `mu`.
    pub fn pack(&self, lambda: &[Vec<f64>], powers: &[Vec<f64>], mu: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.cost.len()];
        for m in 0..self.cfg.num_uavs {
            let t = &self.plan_ref.tracks[m];
            x[self.q0(m)] = t.positions[0].x;
            x[self.q0(m) + 1] = t.positions[0].y;
            for (i, a) in t.accelerations.iter().enumerate() {
                x[self.acc(m, i)] = a.x;
                x[self.acc(m, i) + 1] = a.y;
            }
            for i in 1..=self.cfg.num_steps {
                x[self.slack(m, i)] = lambda[m][i];
            }
        }
        for (p, row) in powers.iter().enumerate() {
            for (m, &b) in row.iter().enumerate() {
                x[self.power(p, m)] = b;
            }
        }
        for k in 0..self.cfg.num_gts() {
            x[self.rate_index(k)] = mu;
        }
        let mu_index = self.mu_index();
        x[mu_index] = mu;
        x
    }

    pub fn slack_speed(&self, x: &[f64], m: usize, n: usize) -> f64 {
        if n == 0 {
            self.plan_ref.velocity(m, 0).norm()
        } else {
            x[self.slack(m, n)]
        }
    }

    pub fn scaled_power(&self, x: &[f64], pair: usize, m: usize) -> f64 {
        x[self.power(pair, m)]
    }

    /// Scaled upper bound on the received power of `(k, m, n)` at position `q`.
    pub fn scaled_power_cap(&self, q: &Point, k: usize, m: usize, n: usize) -> f64 {
        let h2 = self.cfg.altitude.powi(2);
        let w = self.cfg.gt_positions[k];
        let xv = q - w;
        let x0 = self.plan_ref.position(m, n) - w;
        let d = self.coefficients.d.get(k, m, n);
        let f = self.coefficients.f.get(k, m, n);
        -xv.norm_squared() / h2 + h2 * d * xv.dot(&x0) + h2 * f
    }

    /// Lower bound on the average rate of station `k` at the decision vector.
    pub fn rate_lower_bound(&self, x: &[f64], k: usize) -> f64 {
        let nm = self.cfg.num_uavs;
        let mut sum = 0.0;
        for t in &self.rate_terms[k] {
            let total: f64 = (0..nm).map(|j| x[self.power(t.pair, j)]).sum();
            let interf = total - x[self.power(t.pair, t.uav)];
            sum += t.weight * ((total + self.noise).log2() - t.slope * (interf - t.interference_ref) - t.intercept);
        }
        sum / self.cfg.rate_normalizer()
    }

    pub fn min_rate_lower_bound(&self, x: &[f64]) -> f64 {
        (0..self.cfg.num_gts())
            .map(|k| self.rate_lower_bound(x, k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Structured text listing of the layout and every row at `x`.
    pub fn dump(&self, x: &[f64]) -> String {
        let mut rows = Rows::default();
        let ok = self.evaluate(x, Level::Gradient, &mut rows);
        let c = self.counts();
        let mut out = String::new();
        let _ = writeln!(out, "[layout]");
        let _ = writeln!(out, "uavs = {}", self.cfg.num_uavs);
        let _ = writeln!(out, "per_uav_block = {}", self.block);
        let _ = writeln!(out, "served_pairs = {}", self.pairs.len());
        let _ = writeln!(out, "power_scale = {:e}", self.power_scale);
        let _ = writeln!(out, "decision_variables = {}", self.cost.len());
        let _ = writeln!(out, "full_variables = {}", c.variables());
        let _ = writeln!(out, "full_constraints = {}", c.constraints());
        let _ = writeln!(out, "in_domain = {ok}");
        let _ = writeln!(out, "[rows]");
        for i in 0..rows.len() {
            let _ = writeln!(out, "{} value={:e} nnz={}", self.row_name(i), rows.values()[i], rows.gradient(i).len());
        }
        out
    }

    /// Adds `s * J_q(m, n)' g` to the current gradient.
    fn grad_position(&self, rows: &mut Rows, m: usize, n: usize, g: Point) {
        let dt = self.cfg.delta_t;
        let base = self.q0(m);
        rows.grad(base, g.x);
        rows.grad(base + 1, g.y);
        for i in 0..n {
            let c = dt * dt * (n as f64 - i as f64 - 0.5);
            rows.grad(self.acc(m, i), c * g.x);
            rows.grad(self.acc(m, i) + 1, c * g.y);
        }
    }

    fn grad_velocity(&self, rows: &mut Rows, m: usize, n: usize, g: Point) {
        let dt = self.cfg.delta_t;
        for i in 0..n {
            rows.grad(self.acc(m, i), dt * g.x);
            rows.grad(self.acc(m, i) + 1, dt * g.y);
        }
    }

    /// Curvature `w (J_x' J_x + J_y' J_y)` of a position or velocity map.
    fn curv_isotropic(&self, rows: &mut Rows, m: usize, n: usize, w: f64, position: bool) {
        let dt = self.cfg.delta_t;
        for c in 0..2 {
            rows.push_term(w);
            if position {
                rows.term(self.q0(m) + c, 1.0);
            }
            for i in 0..n {
                let coef = if position { dt * dt * (n as f64 - i as f64 - 0.5) } else { dt };
                rows.term(self.acc(m, i) + c, coef);
            }
        }
    }

    fn eval_uav(&self, m: usize, t: &UavTrack, x: &[f64], rows: &mut Rows) -> bool {
        let cfg = &self.cfg;
        let n = cfg.num_steps;
        let grad = rows.wants(Level::Gradient);
        let hess = rows.wants(Level::Hessian);
        let vmax2 = cfg.v_max * cfg.v_max;
        let amax2 = cfg.a_max * cfg.a_max;
        for i in 1..=n {
            let v = t.velocities[i];
            rows.push_row((v.norm_squared() - vmax2) / vmax2);
            if grad {
                self.grad_velocity(rows, m, i, 2.0 * v / vmax2);
            }
            if hess {
                self.curv_isotropic(rows, m, i, 2.0 / vmax2, false);
            }
        }
        for i in 0..n {
            let a = t.accelerations[i];
            rows.push_row((a.norm_squared() - amax2) / amax2);
            if grad {
                rows.grad(self.acc(m, i), 2.0 * a.x / amax2);
                rows.grad(self.acc(m, i) + 1, 2.0 * a.y / amax2);
            }
            if hess {
                for c in 0..2 {
                    rows.push_term(2.0 / amax2);
                    rows.term(self.acc(m, i) + c, 1.0);
                }
            }
        }
        for i in 1..=n {
            let lam = x[self.slack(m, i)];
            if !(lam > 0.0) {
                return false;
            }
            rows.push_row((cfg.v_min - lam) / cfg.v_min);
            if grad {
                rows.grad(self.slack(m, i), -1.0 / cfg.v_min);
            }
            let vr = self.plan_ref.velocity(m, i);
            let v = t.velocities[i];
            let lin = vr.norm_squared() + 2.0 * vr.dot(&(v - vr));
            rows.push_row((lam * lam - lin) / vmax2);
            if grad {
                rows.grad(self.slack(m, i), 2.0 * lam / vmax2);
                self.grad_velocity(rows, m, i, -2.0 * vr / vmax2);
            }
            if hess {
                rows.push_term(2.0 / vmax2);
                rows.term(self.slack(m, i), 1.0);
            }
        }
        self.eval_energy(m, t, x, rows);
        true
    }

    fn eval_energy(&self, m: usize, t: &UavTrack, x: &[f64], rows: &mut Rows) {
        let cfg = &self.cfg;
        let n = cfg.num_steps;
        let grad = rows.wants(Level::Gradient);
        let hess = rows.wants(Level::Hessian);
        let scale = 1.0 / cfg.e_max;
        let (c1, c2, g) = (cfg.c1, cfg.c2, cfg.gravity);
        let mut energy = 0.0;
        for i in 0..n {
            let v = t.velocities[i];
            let a = t.accelerations[i];
            let lam = self.slack_speed(x, m, i);
            energy += c1 * v.norm().powi(3) + c2 / lam * (1.0 + a.norm_squared() / g);
        }
        let vn = t.velocities[n];
        energy += 0.5 * cfg.mass * (vn.norm_squared() - t.velocities[0].norm_squared());
        rows.push_row((energy - cfg.e_max) * scale);
        if grad {
            for i in 0..n {
                let v = t.velocities[i];
                let a = t.accelerations[i];
                let lam = self.slack_speed(x, m, i);
                if i > 0 {
                    self.grad_velocity(rows, m, i, 3.0 * c1 * v.norm() * v * scale);
                    rows.grad(self.slack(m, i), -c2 * (1.0 + a.norm_squared() / g) / (lam * lam) * scale);
                }
                rows.grad(self.acc(m, i), 2.0 * c2 * a.x / (g * lam) * scale);
                rows.grad(self.acc(m, i) + 1, 2.0 * c2 * a.y / (g * lam) * scale);
            }
            self.grad_velocity(rows, m, n, cfg.mass * vn * scale);
        }
        if hess {
            let dt = cfg.delta_t;
            for i in 0..n {
                let v = t.velocities[i];
                let a = t.accelerations[i];
                let lam = self.slack_speed(x, m, i);
                if i > 0 {
                    let speed = v.norm();
                    self.curv_isotropic(rows, m, i, 3.0 * c1 * speed * scale, false);
                    if speed > 0.0 {
                        rows.push_term(3.0 * c1 / speed * scale);
                        for j in 0..i {
                            rows.term(self.acc(m, j), dt * v.x);
                            rows.term(self.acc(m, j) + 1, dt * v.y);
                        }
                    }
                    rows.push_term(2.0 * c2 / lam.powi(3) * scale);
                    rows.term(self.slack(m, i), 1.0);
                    for (c, ac) in [a.x, a.y].into_iter().enumerate() {
                        rows.push_term(2.0 * c2 / (g * lam) * scale);
                        rows.term(self.acc(m, i) + c, 1.0);
                        rows.term(self.slack(m, i), -ac / lam);
                    }
                } else {
                    for c in 0..2 {
                        rows.push_term(2.0 * c2 / (g * lam) * scale);
                        rows.term(self.acc(m, i) + c, 1.0);
                    }
                }
            }
            self.curv_isotropic(rows, m, n, cfg.mass * scale, false);
        }
    }
}

impl ConvexProgram for P4Program {
    fn dim(&self) -> usize {
        self.cost.len()
    }

    fn cost(&self) -> &[f64] {
        &self.cost
    }

    fn evaluate(&self, x: &[f64], level: Level, rows: &mut Rows) -> bool {
        rows.clear(level);
        let cfg = &self.cfg;
        let (nm, ns) = (cfg.num_uavs, cfg.num_samples());
        let grad = rows.wants(Level::Gradient);
        let hess = rows.wants(Level::Hessian);
        let tracks = self.tracks(x);
        for (m, t) in tracks.iter().enumerate() {
            if !self.eval_uav(m, t, x, rows) {
                return false;
            }
        }

        if cfg.d_min > 0.0 {
            let d2 = cfg.d_min * cfg.d_min;
            for i in 0..ns {
                for m in 0..nm {
                    for j in m + 1..nm {
                        let dr = self.plan_ref.position(m, i) - self.plan_ref.position(j, i);
                        let d = tracks[m].positions[i] - tracks[j].positions[i];
                        let lin = dr.norm_squared() + 2.0 * dr.dot(&(d - dr));
                        rows.push_row((d2 - lin) / d2);
                        if grad {
                            self.grad_position(rows, m, i, -2.0 * dr / d2);
                            self.grad_position(rows, j, i, 2.0 * dr / d2);
                        }
                    }
                }
            }
        }

        let h2 = cfg.altitude * cfg.altitude;
        for (p, &(k, i)) in self.pairs.iter().enumerate() {
            for m in 0..nm {
                let b = x[self.power(p, m)];
                rows.push_row(-b);
                if grad {
                    rows.grad(self.power(p, m), -1.0);
                }
                let q = tracks[m].positions[i];
                rows.push_row(b - self.scaled_power_cap(&q, k, m, i));
                if grad {
                    let w = cfg.gt_positions[k];
                    let x0 = self.plan_ref.position(m, i) - w;
                    let d = self.coefficients.d.get(k, m, i);
                    rows.grad(self.power(p, m), 1.0);
                    self.grad_position(rows, m, i, 2.0 * (q - w) / h2 - h2 * d * x0);
                }
                if hess {
                    self.curv_isotropic(rows, m, i, 2.0 / h2, true);
                }
            }
        }

        let norm = cfg.rate_normalizer();
        for k in 0..cfg.num_gts() {
            let mut value = x[self.rate_index(k)];
            let mut ok = true;
            let mut grads: Vec<(usize, f64)> = Vec::new();
            let mut curvs: Vec<(f64, usize)> = Vec::new();
            for t in &self.rate_terms[k] {
                let total: f64 = (0..nm).map(|j| x[self.power(t.pair, j)]).sum::<f64>() + self.noise;
                if !(total > 0.0) {
                    ok = false;
                    break;
                }
                let interf = total - self.noise - x[self.power(t.pair, t.uav)];
                value -= t.weight * (total.log2() - t.slope * (interf - t.interference_ref) - t.intercept) / norm;
                if grad {
                    for j in 0..nm {
                        let mut dj = LOG2_E / total;
                        if j != t.uav {
                            dj -= t.slope;
                        }
                        grads.push((self.power(t.pair, j), -t.weight * dj / norm));
                    }
                }
                if hess {
                    curvs.push((t.weight * LOG2_E / (norm * total * total), t.pair));
                }
            }
            if !ok {
                return false;
            }
            rows.push_row(value);
            if grad {
                rows.grad(self.rate_index(k), 1.0);
                for (i, v) in grads {
                    rows.grad(i, v);
                }
            }
            for (w, pair) in curvs {
                rows.push_term(w);
                for j in 0..nm {
                    rows.term(self.power(pair, j), 1.0);
                }
            }
        }
        let mu = x[self.mu_index()];
        for k in 0..cfg.num_gts() {
            rows.push_row(mu - x[self.rate_index(k)]);
            if grad {
                rows.grad(self.mu_index(), 1.0);
                rows.grad(self.rate_index(k), -1.0);
            }
        }
        rows.finish();
        true
    }

    fn row_name(&self, row: usize) -> String {
        match self.kinds[row] {
            RowKind::Speed(m, n) => format!("speed_cap[uav={m},n={n}]"),
            RowKind::Accel(m, n) => format!("accel_cap[uav={m},n={n}]"),
            RowKind::SlackMin(m, n) => format!("slack_min[uav={m},n={n}]"),
            RowKind::SlackLin(m, n) => format!("slack_linearization[uav={m},n={n}]"),
            RowKind::Energy(m) => format!("energy[uav={m}]"),
            RowKind::Collision(m, j, n) => format!("collision[uav={m},uav={j},n={n}]"),
            RowKind::PowerNonneg(k, m, n) => format!("power_nonneg[gt={k},uav={m},n={n}]"),
            RowKind::PowerMax(k, m, n) => format!("power_max[gt={k},uav={m},n={n}]"),
            RowKind::Rate(k) => format!("rate[gt={k}]"),
            RowKind::RateFloor(k) => format!("rate_floor[gt={k}]"),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::initializer::{circular_plan, initial_aux_gains, initial_schedule, kmeans};

    fn setup(num_steps: usize) -> (ScenarioConfig, P4Program, Vec<f64>) {
        let mut cfg = ScenarioConfig::with_random_stations(2, 4, num_steps, 3);
        cfg.d_min = 10.0;
        let cl = kmeans(&cfg.gt_positions, 2, 3).unwrap();
        let plan = circular_plan(&cl, &cfg, &cfg.initial_speeds).unwrap();
        let mut sched = initial_schedule(&cl, &plan, &cfg);
        // fractional shares so that every rate row mixes several terms
        for n in 0..cfg.num_samples() {
            for k in 0..4 {
                for m in 0..2 {
                    let a = sched.alpha.get(k, m, n);
                    sched.alpha.set(k, m, n, 0.6 * a + 0.1);
                }
            }
        }
        let aux = initial_aux_gains(&plan, &cfg);
        let prog = build_p4(&sched, &plan, &aux, &cfg);
        let lambda: Vec<Vec<f64>> = (0..2)
            .map(|m| (0..cfg.num_samples()).map(|n| 0.9 * plan.velocity(m, n).norm()).collect())
            .collect();
        let powers: Vec<Vec<f64>> = prog.pairs.iter().map(|_| vec![0.3, 0.2]).collect();
        let mut x = prog.pack(&lambda, &powers, 0.1);
        // move off the reference so every row has nontrivial derivatives
        for (i, v) in x.iter_mut().enumerate() {
            *v += 1e-2 * ((i * 7919 % 13) as f64 - 6.0) / 6.0;
        }
        (cfg, prog, x)
    }

    fn dense(u: &[(usize, f64)], n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for &(i, v) in u {
            d[i] += v;
        }
        d
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (_, prog, x) = setup(6);
        let n = prog.dim();
        let mut rows = Rows::default();
        assert!(prog.evaluate(&x, Level::Hessian, &mut rows));
        let (mut plus, mut minus) = (Rows::default(), Rows::default());
        for j in 0..n {
            let h = 1e-6;
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            assert!(prog.evaluate(&xp, Level::Gradient, &mut plus));
            assert!(prog.evaluate(&xm, Level::Gradient, &mut minus));
            for i in 0..rows.len() {
                let fd = (plus.values()[i] - minus.values()[i]) / (2.0 * h);
                let an = dense(rows.gradient(i), n)[j];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{} var {j}: fd {fd} analytic {an}", prog.row_name(i));
                // second derivatives from the change of the gradient
                let gp = dense(plus.gradient(i), n);
                let gm = dense(minus.gradient(i), n);
                let mut hess_col = vec![0.0; n];
                for (w, u) in rows.curvature(i) {
                    let coef = u.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1);
                    for &(r, v) in u {
                        hess_col[r] += w * v * coef;
                    }
                }
                for r in 0..n {
                    let fd2 = (gp[r] - gm[r]) / (2.0 * h);
                    assert!(
                        (fd2 - hess_col[r]).abs() <= 1e-5 * (1.0 + fd2.abs()),
                        "{} d2/d{r}d{j}: fd {fd2} analytic {}",
                        prog.row_name(i),
                        hess_col[r]
                    );
                }
            }
        }
    }
}
