//! Primal-dual interior-point method for `min c'x  s.t.  g_i(x) <= 0` with
//! smooth convex `g_i`, started from a strictly feasible point.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Value,
    Gradient,
    Hessian,
}

/// Flat storage of constraint values, sparse gradients and curvature given
/// as weighted sparse rank-one terms `w u u'`.
#[derive(Debug, Default, Clone)]
pub struct Rows {
    pub level: Option<Level>,
    values: Vec<f64>,
    grad_start: Vec<usize>,
    grad: Vec<(usize, f64)>,
    curv_start: Vec<usize>,
    term_weight: Vec<f64>,
    term_start: Vec<usize>,
    term: Vec<(usize, f64)>,
}

impl Rows {
    pub fn clear(&mut self, level: Level) {
        self.level = Some(level);
        self.values.clear();
        self.grad_start.clear();
        self.grad.clear();
        self.curv_start.clear();
        self.term_weight.clear();
        self.term_start.clear();
        self.term.clear();
    }

    pub fn wants(&self, level: Level) -> bool {
        self.level.is_some_and(|l| l >= level)
    }

    pub fn push_row(&mut self, value: f64) {
        self.finish_row();
        self.values.push(value);
        self.grad_start.push(self.grad.len());
        self.curv_start.push(self.term_weight.len());
    }

    pub fn grad(&mut self, i: usize, v: f64) {
        self.grad.push((i, v));
    }

    pub fn push_term(&mut self, weight: f64) {
        self.finish_term();
        self.term_weight.push(weight);
        self.term_start.push(self.term.len());
    }

    pub fn term(&mut self, i: usize, v: f64) {
        self.term.push((i, v));
    }

    fn finish_term(&mut self) {
        if let Some(&s) = self.term_start.last() {
            merge_sorted(&mut self.term, s);
        }
    }

    fn finish_row(&mut self) {
        if let Some(&s) = self.grad_start.last() {
            merge_sorted(&mut self.grad, s);
        }
        self.finish_term();
    }

    pub fn finish(&mut self) {
        self.finish_row();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradient(&self, row: usize) -> &[(usize, f64)] {
        let end = self.grad_start.get(row + 1).copied().unwrap_or(self.grad.len());
        &self.grad[self.grad_start[row]..end]
    }

    pub fn curvature(&self, row: usize) -> impl Iterator<Item = (f64, &[(usize, f64)])> {
        let end = self.curv_start.get(row + 1).copied().unwrap_or(self.term_weight.len());
        (self.curv_start[row]..end).map(move |t| {
            let stop = self.term_start.get(t + 1).copied().unwrap_or(self.term.len());
            (self.term_weight[t], &self.term[self.term_start[t]..stop])
        })
    }
}

/// Sorts `v[start..]` by index and merges duplicate indices.
fn merge_sorted(v: &mut Vec<(usize, f64)>, start: usize) {
    let tail = &mut v[start..];
    if tail.windows(2).all(|w| w[0].0 < w[1].0) {
        return;
    }
    tail.sort_by_key(|e| e.0);
    let mut w = start;
    for r in start..v.len() {
        if w > start && v[w - 1].0 == v[r].0 {
            v[w - 1].1 += v[r].1;
        } else {
            v[w] = v[r];
            w += 1;
        }
    }
    v.truncate(w);
}

pub trait ConvexProgram {
    fn dim(&self) -> usize;
    /// Linear objective to minimize.
    fn cost(&self) -> &[f64];
    /// Fills `rows` at the requested level. Returns false when `x` lies
    /// outside the domain of some constraint function.
    fn evaluate(&self, x: &[f64], level: Level, rows: &mut Rows) -> bool;
    fn row_name(&self, row: usize) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub gap_rel: f64,
    pub gap_abs: f64,
    pub max_iters: usize,
    /// Stop as soon as the objective falls below this value.
    pub stop_below: Option<f64>,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            gap_rel: 1e-5,
            gap_abs: 1e-9,
            max_iters: 400,
            stop_below: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpmOutcome {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    /// Duality gap `m / t` of the barrier dual point at exit.
    pub gap: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

/// Growth of the barrier weight between centering steps.
const T_GROWTH: f64 = 5.0;
const ARMIJO: f64 = 0.01;
const EXTRAPOLATION_STEPS: usize = 6;
const BACKTRACK: f64 = 0.5;
/// Newton decrement (squared, halved) that ends a centering step.
const CENTERING_TOL: f64 = 1e-3;


fn strictly_feasible(rows: &Rows) -> bool {
    rows.values().iter().all(|&g| g < 0.0)
}

pub(crate) fn worst_row<P: ConvexProgram>(p: &P, rows: &Rows) -> (String, f64) {
    let (i, v) = rows
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    (if rows.is_empty() { String::new() } else { p.row_name(i) }, v)
}

fn barrier_value(c: &[f64], x: &[f64], t: f64, rows: &Rows) -> f64 {
    let lin: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
    t * lin - rows.values().iter().map(|g| (-g).ln()).sum::<f64>()
}

/// Hessian (lower triangle) and gradient of `t c'x - sum log(-g_i)`.
fn newton_system(c: &[f64], rows: &Rows, t: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = c.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut grad = DVector::from_column_slice(c);
    grad *= t;
    let data = h.as_mut_slice();
    for (i, &g) in rows.values().iter().enumerate() {
        let slack = -g;
        let gi = rows.gradient(i);
        add_outer(data, n, 1.0 / (slack * slack), gi);
        for &(j, v) in gi {
            grad[j] += v / slack;
        }
        for (w, u) in rows.curvature(i) {
            add_outer(data, n, w / slack, u);
        }
    }
    (h, grad)
}

/// Adds `w u u'` to the lower triangle of a column-major `n x n` matrix.
fn add_outer(data: &mut [f64], n: usize, w: f64, u: &[(usize, f64)]) {
    if w == 0.0 {
        return;
    }
    for (q, &(col, vq)) in u.iter().enumerate() {
        let s = w * vq;
        let base = col * n;
        for &(row, vp) in &u[q..] {
            data[base + row] += s * vp;
        }
    }
}

fn factor_solve(mut h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    // symmetric diagonal scaling to a unit diagonal before factoring
    let n = h.nrows();
    let d: Vec<f64> = (0..n).map(|i| 1.0 / h[(i, i)].abs().max(1e-300).sqrt()).collect();
    for j in 0..n {
        for i in j..n {
            h[(i, j)] *= d[i] * d[j];
        }
    }
    let b = DVector::from_iterator(n, rhs.iter().zip(&d).map(|(r, s)| r * s));
    let mut reg = 0.0;
    for _ in 0..10 {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(ch) = Cholesky::new(m) {
            let mut x = ch.solve(&b);
            for (xi, s) in x.iter_mut().zip(&d) {
                *xi *= s;
            }
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

fn finish(c: &[f64], x: Vec<f64>, rows: &Rows, t: f64, iterations: usize, converged: bool) -> IpmOutcome {
    let z: Vec<f64> = rows.values().iter().map(|&g| 1.0 / (t * -g)).collect();
    let mut dual = c.to_vec();
    for (i, zi) in z.iter().enumerate() {
        for &(j, v) in rows.gradient(i) {
            dual[j] += zi * v;
        }
    }
    IpmOutcome {
        gap: rows.len() as f64 / t,
        dual_residual: dual.iter().map(|v| v * v).sum::<f64>().sqrt(),
        x,
        z,
        iterations,
        converged,
    }
}

/// Log-barrier method with damped Newton centering. The reported gap is
/// `m / t`, the duality gap of the dual point `z_i = 1 / (t (-g_i))`.
pub fn minimize<P: ConvexProgram>(p: &P, x0: Vec<f64>, opts: &IpmOptions) -> Result<IpmOutcome> {
    let n = p.dim();
    let c = p.cost();
    let mut rows = Rows::default();
    let mut x = x0;
    if !p.evaluate(&x, Level::Hessian, &mut rows) || !strictly_feasible(&rows) {
        let (name, value) = worst_row(p, &rows);
        return Err(Error::Subproblem {
            reason: "starting point is not strictly feasible".into(),
            worst_row: name,
            worst_value: value,
            gap: f64::INFINITY,
            best_iterate: x,
        });
    }
    let m = rows.len().max(1) as f64;
    let objective = |x: &[f64]| -> f64 { c.iter().zip(x).map(|(a, b)| a * b).sum() };

    // weight that best balances the objective against the barrier gradient
    let mut barrier_grad = vec![0.0; n];
    for (i, &g) in rows.values().iter().enumerate() {
        for &(j, v) in rows.gradient(i) {
            barrier_grad[j] += v / -g;
        }
    }
    let cc: f64 = c.iter().map(|v| v * v).sum();
    let cg: f64 = c.iter().zip(&barrier_grad).map(|(a, b)| a * b).sum();
    let mut t = if cc > 0.0 && -cg / cc > 0.0 { -cg / cc } else { 1.0 };
    // never start closer than a unit relative gap
    let f0 = objective(&x).abs().max(1e-3);
    t = t.clamp(1e-3, m / f0);

    let mut trial = Rows::default();
    let mut x_new = vec![0.0; n];
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < opts.max_iters {
        // centering
        let mut centered = false;
        while iterations < opts.max_iters {
            iterations += 1;
            let (h, grad) = newton_system(c, &rows, t);
            let Some(dx) = factor_solve(h, &(-&grad)) else {
                stalled = true;
                break;
            };
            let decrement = -grad.dot(&dx);
            // on the last barrier weight, stop once the remaining centering
            // gain is below the target gap as well
            let target = opts.gap_abs.max(opts.gap_rel * objective(&x).abs());
            if decrement / 2.0 <= CENTERING_TOL || (m / t <= target && decrement / t <= target) {
                centered = true;
                break;
            }
            let phi = barrier_value(c, &x, t, &rows);
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                for j in 0..n {
                    x_new[j] = x[j] + s * dx[j];
                }
                if p.evaluate(&x_new, Level::Value, &mut trial)
                    && strictly_feasible(&trial)
                    && barrier_value(c, &x_new, t, &trial) <= phi - ARMIJO * s * decrement
                {
                    accepted = true;
                    break;
                }
                s *= BACKTRACK;
            }
            if accepted && s == 1.0 {
                // a full step that was accepted: keep going along dx while
                // the barrier value keeps dropping
                let mut best = barrier_value(c, &x_new, t, &trial);
                let mut x_try = vec![0.0; n];
                for _ in 0..EXTRAPOLATION_STEPS {
                    let s2 = 2.0 * s;
                    for j in 0..n {
                        x_try[j] = x[j] + s2 * dx[j];
                    }
                    if !(p.evaluate(&x_try, Level::Value, &mut trial) && strictly_feasible(&trial)) {
                        break;
                    }
                    let v = barrier_value(c, &x_try, t, &trial);
                    if v >= best {
                        break;
                    }
                    best = v;
                    s = s2;
                    x_new.copy_from_slice(&x_try);
                }
            }
            if !accepted {
                // rounding noise in the barrier value near the optimum
                if decrement / t <= target {
                    centered = true;
                } else {
                    stalled = true;
                }
                break;
            }
            x.copy_from_slice(&x_new);
            if !p.evaluate(&x, Level::Hessian, &mut rows) {
                stalled = true;
                break;
            }
            if opts.stop_below.is_some_and(|s| objective(&x) < s) {
                return Ok(finish(c, x, &rows, t, iterations, true));
            }
        }
        let gap = m / t;
        let f = objective(&x);
        let done = gap <= opts.gap_abs.max(opts.gap_rel * f.abs()) || opts.stop_below.is_some_and(|s| f < s);
        if stalled || !centered || done {
            return Ok(finish(c, x, &rows, t, iterations, centered && done));
        }
        t *= T_GROWTH;
    }
    unreachable!("centering loop exits through the return above")
}

/// Feasibility problem `min s  s.t.  g_i(x) <= s` over `(x, s)`.
pub struct PhaseOne<'a, P> {
    inner: &'a P,
    cost: Vec<f64>,
    scratch: std::cell::RefCell<Rows>,
}

impl<'a, P: ConvexProgram> PhaseOne<'a, P> {
    pub fn new(inner: &'a P) -> Self {
        let mut cost = vec![0.0; inner.dim() + 1];
        cost[inner.dim()] = 1.0;
        PhaseOne {
            inner,
            cost,
            scratch: std::cell::RefCell::new(Rows::default()),
        }
    }
}

impl<P: ConvexProgram> ConvexProgram for PhaseOne<'_, P> {
    fn dim(&self) -> usize {
        self.cost.len()
    }

    fn cost(&self) -> &[f64] {
        &self.cost
    }

    fn evaluate(&self, x: &[f64], level: Level, rows: &mut Rows) -> bool {
        let n = self.inner.dim();
        let mut inner = self.scratch.borrow_mut();
        if !self.inner.evaluate(&x[..n], level, &mut inner) {
            return false;
        }
        rows.clear(level);
        for i in 0..inner.len() {
            rows.push_row(inner.values()[i] - x[n]);
            if rows.wants(Level::Gradient) {
                for &(j, v) in inner.gradient(i) {
                    rows.grad(j, v);
                }
                rows.grad(n, -1.0);
            }
            if rows.wants(Level::Hessian) {
                for (w, u) in inner.curvature(i) {
                    rows.push_term(w);
                    for &(j, v) in u {
                        rows.term(j, v);
                    }
                }
            }
        }
        rows.finish();
        true
    }

    fn row_name(&self, row: usize) -> String {
        self.inner.row_name(row)
    }
}

/// Searches for a strictly feasible point, starting anywhere in the domain.
/// Returns `None` when the constraints admit no interior point that the
/// method can reach.
pub fn find_interior<P: ConvexProgram>(p: &P, x0: &[f64], margin: f64) -> Option<Vec<f64>> {
    let mut rows = Rows::default();
    if !p.evaluate(x0, Level::Value, &mut rows) {
        return None;
    }
    let worst = rows.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if worst < -margin {
        return Some(x0.to_vec());
    }
    let mut start = x0.to_vec();
    start.push(worst + 1.0);
    let phase = PhaseOne::new(p);
    let opts = IpmOptions {
        stop_below: Some(-margin),
        ..IpmOptions::default()
    };
    let out = minimize(&phase, start, &opts).ok()?;
    let s = *out.x.last()?;
    if s < 0.0 {
        let mut x = out.x;
        x.pop();
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min -x0 - x1 over the unit disk shifted to (1, 1).
    struct Disk;

    impl ConvexProgram for Disk {
        fn dim(&self) -> usize {
            2
        }
        fn cost(&self) -> &[f64] {
            &[-1.0, -1.0]
        }
        fn evaluate(&self, x: &[f64], level: Level, rows: &mut Rows) -> bool {
            rows.clear(level);
            let (a, b) = (x[0] - 1.0, x[1] - 1.0);
            rows.push_row(a * a + b * b - 1.0);
            if rows.wants(Level::Gradient) {
                rows.grad(0, 2.0 * a);
                rows.grad(1, 2.0 * b);
            }
            if rows.wants(Level::Hessian) {
                rows.push_term(2.0);
                rows.term(0, 1.0);
                rows.push_term(2.0);
                rows.term(1, 1.0);
            }
            // x1 <= 1.5
            rows.push_row(x[1] - 1.5);
            if rows.wants(Level::Gradient) {
                rows.grad(1, 1.0);
            }
            rows.finish();
            true
        }
        fn row_name(&self, row: usize) -> String {
            ["disk", "cap"][row].into()
        }
    }

    #[test]
    fn solves_disk_with_cap() {
        let opts = IpmOptions {
            gap_rel: 1e-10,
            ..IpmOptions::default()
        };
        let out = minimize(&Disk, vec![1.0, 1.0], &opts).unwrap();
        assert!(out.converged);
        // optimum on the circle at y = 1.5: x = 1 + sqrt(0.75)
        assert!((out.x[1] - 1.5).abs() < 1e-6, "{:?}", out.x);
        assert!((out.x[0] - (1.0 + 0.75f64.sqrt())).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn infeasible_start_rejected() {
        assert!(matches!(
            minimize(&Disk, vec![5.0, 5.0], &IpmOptions::default()),
            Err(Error::Subproblem { .. })
        ));
    }

    #[test]
    fn phase_one_recovers_interior() {
        let x = find_interior(&Disk, &[1.9, 1.9], 1e-6).unwrap();
        let mut rows = Rows::default();
        assert!(Disk.evaluate(&x, Level::Value, &mut rows));
        assert!(rows.values().iter().all(|&g| g < 0.0));
    }

    #[test]
    fn merge_duplicates() {
        let mut v = vec![(9, 1.0), (3, 1.0), (5, 2.0), (3, 0.5)];
        merge_sorted(&mut v, 1);
        assert_eq!(v, vec![(9, 1.0), (3, 1.5), (5, 2.0)]);
    }

    #[test]
    fn outer_lower_triangle() {
        let mut d = vec![0.0; 9];
        add_outer(&mut d, 3, 2.0, &[(0, 1.0), (2, 3.0)]);
        // column-major lower triangle: (0,0), (2,0), (2,2)
        assert_eq!(d, vec![2.0, 0.0, 6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 18.0]);
    }
}
