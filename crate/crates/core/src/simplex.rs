//! Dense-tableau primal simplex for `max c'x  s.t.  Ax <= b, x >= 0` with
//! `b >= 0`, so the slack basis is a feasible start.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const OPTIMALITY_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 64;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    /// Sparse rows as `(variable, coefficient)`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Largest amount by which `x` violates a row or a sign bound.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = (0..self.rows.len()).map(|i| self.row_activity(i, x) - self.rhs[i]);
        rows.chain(x.iter().map(|v| -v)).fold(0.0, f64::max)
    }
}

struct Tableau {
    cols: usize,
    data: Vec<f64>,
    /// Reduced costs (negated objective) followed by the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.cols + self.cols - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let inv = 1.0 / self.at(r, c);
        let row_start = r * cols;
        for v in &mut self.data[row_start..row_start + cols] {
            *v *= inv;
        }
        self.data[row_start + c] = 1.0;
        let nz: Vec<(usize, f64)> = self.data[row_start..row_start + cols]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        let rows = self.basis.len();
        for i in 0..rows {
            if i == r {
                continue;
            }
            let f = self.data[i * cols + c];
            if f == 0.0 {
                continue;
            }
            let base = i * cols;
            for &(j, v) in &nz {
                self.data[base + j] -= f * v;
            }
            self.data[base + c] = 0.0;
        }
        let f = self.cost[c];
        if f != 0.0 {
            for &(j, v) in &nz {
                self.cost[j] -= f * v;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn primal(&self, num_vars: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < num_vars {
                x[b] = self.rhs(i);
            }
        }
        x
    }
}

/// Solves the program; pricing is Dantzig's rule with a switch to Bland's
/// rule while the objective stalls.
pub fn maximize(lp: &LinearProgram) -> Result<Solution> {
    let m = lp.rows.len();
    let n = lp.num_vars;
    if lp.objective.len() != n || lp.rhs.len() != m {
        return Err(Error::Lp {
            reason: "inconsistent dimensions".into(),
            iterate: vec![],
        });
    }
    if let Some(i) = lp.rhs.iter().position(|&b| !(b >= 0.0)) {
        return Err(Error::Lp {
            reason: format!("row {i} has negative or non-finite right-hand side"),
            iterate: vec![],
        });
    }
    let cols = n + m + 1;
    let mut data = vec![0.0; m * cols];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in row {
            data[i * cols + j] += a;
        }
        data[i * cols + n + i] = 1.0;
        data[i * cols + cols - 1] = lp.rhs[i];
    }
    let mut cost = vec![0.0; cols];
    for (j, &c) in lp.objective.iter().enumerate() {
        cost[j] = -c;
    }
    let mut t = Tableau {
        cols,
        data,
        cost,
        basis: (n..n + m).collect(),
    };

    let max_pivots = 50 * (n + m) + 1000;
    let mut stall = 0usize;
    for pivots in 0..max_pivots {
        let bland = stall >= STALL_LIMIT;
        let entering = if bland {
            (0..cols - 1).find(|&j| t.cost[j] < -OPTIMALITY_TOL)
        } else {
            (0..cols - 1)
                .filter(|&j| t.cost[j] < -OPTIMALITY_TOL)
                .min_by(|&a, &b| t.cost[a].total_cmp(&t.cost[b]))
        };
        let Some(c) = entering else {
            let x = t.primal(n);
            return Ok(Solution {
                objective: lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum(),
                x,
                pivots,
            });
        };

        let mut leave: Option<(usize, f64, f64)> = None;
        for i in 0..m {
            let a = t.at(i, c);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = t.rhs(i).max(0.0) / a;
            leave = match leave {
                None => Some((i, ratio, a)),
                Some((bi, br, ba)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br);
                    let better = if tie {
                        if bland {
                            t.basis[i] < t.basis[bi]
                        } else {
                            a > ba
                        }
                    } else {
                        ratio < br
                    };
                    if better {
                        Some((i, ratio, a))
                    } else {
                        Some((bi, br, ba))
                    }
                }
            };
        }
        let Some((r, ratio, _)) = leave else {
            return Err(Error::Lp {
                reason: format!("objective unbounded along column {c}"),
                iterate: t.primal(n),
            });
        };
        if ratio * t.cost[c].abs() <= 1e-14 {
            stall += 1;
        } else {
            stall = 0;
        }
        t.pivot(r, c);
        if !t.cost[cols - 1].is_finite() {
            return Err(Error::Lp {
                reason: "non-finite objective during pivoting".into(),
                iterate: t.primal(n),
            });
        }
    }
    Err(Error::Lp {
        reason: format!("no optimum after {max_pivots} pivots"),
        iterate: t.primal(n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_example() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = LinearProgram {
            num_vars: 2,
            objective: vec![3.0, 5.0],
            rows: vec![vec![(0, 1.0)], vec![(1, 2.0)], vec![(0, 3.0), (1, 2.0)]],
            rhs: vec![4.0, 12.0, 18.0],
        };
        let s = maximize(&lp).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_reported() {
        let lp = LinearProgram {
            num_vars: 2,
            objective: vec![1.0, 0.0],
            rows: vec![vec![(1, 1.0)]],
            rhs: vec![1.0],
        };
        assert!(matches!(maximize(&lp), Err(Error::Lp { .. })));
    }

    #[test]
    fn degenerate_start() {
        // max t, t - x <= 0, t - y <= 0, x + y <= 1 -> t = 1/2
        let lp = LinearProgram {
            num_vars: 3,
            objective: vec![1.0, 0.0, 0.0],
            rows: vec![vec![(0, 1.0), (1, -1.0)], vec![(0, 1.0), (2, -1.0)], vec![(1, 1.0), (2, 1.0)]],
            rhs: vec![0.0, 0.0, 1.0],
        };
        let s = maximize(&lp).unwrap();
        assert!((s.objective - 0.5).abs() < 1e-12);
        assert!(lp.max_violation(&s.x) < 1e-12);
    }
}
