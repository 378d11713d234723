//! Max-min scheduling for fixed trajectories and powers: maximize `mu`
//! subject to every station's average rate being at least `mu`, with the
//! association shares relaxed to `[0, 1]`.

use std::fmt::Write as _;

use crate::error::Result;
use crate::scenario::{LinkMetrics, ScenarioConfig, Schedule, Tensor3};
use crate::simplex::{maximize, LinearProgram};

/// Row feasibility tolerance of the returned schedule.
pub const LP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    /// `log2(1 + gamma)` per station, UAV and sample.
    pub rate_coefficients: Tensor3,
    /// Divisor of the slot sum in the average rate.
    pub normalizer: f64,
}

impl LpInstance {
    pub fn new(rate_coefficients: Tensor3, normalizer: f64) -> Self {
        LpInstance {
            rate_coefficients,
            normalizer,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.rate_coefficients.dims()
    }

    /// All shares plus `mu`.
    pub fn num_variables(&self) -> usize {
        let [k, m, s] = self.dims();
        k * m * s + 1
    }

    pub fn num_rate_rows(&self) -> usize {
        self.dims()[0]
    }

    /// Per-UAV rows followed by per-station rows, one of each per sample.
    pub fn num_sum_rows(&self) -> usize {
        let [k, m, s] = self.dims();
        (m + k) * s
    }

    /// Column of share `(k, m, n)`; `mu` is column 0.
    pub fn column(&self, k: usize, m: usize, n: usize) -> usize {
        let [_, nm, s] = self.dims();
        1 + (k * nm + m) * s + n
    }

    pub fn to_program(&self) -> LinearProgram {
        let [nk, nm, ns] = self.dims();
        let mut rows = Vec::with_capacity(self.num_rate_rows() + self.num_sum_rows());
        let mut rhs = Vec::with_capacity(rows.capacity());
        for k in 0..nk {
            let mut row = vec![(0, 1.0)];
            for m in 0..nm {
                for n in 0..ns {
                    let r = self.rate_coefficients.get(k, m, n);
                    if r != 0.0 {
                        row.push((self.column(k, m, n), -r / self.normalizer));
                    }
                }
            }
            rows.push(row);
            rhs.push(0.0);
        }
        for n in 0..ns {
            for m in 0..nm {
                rows.push((0..nk).map(|k| (self.column(k, m, n), 1.0)).collect());
                rhs.push(1.0);
            }
        }
        for n in 0..ns {
            for k in 0..nk {
                rows.push((0..nm).map(|m| (self.column(k, m, n), 1.0)).collect());
                rhs.push(1.0);
            }
        }
        let mut objective = vec![0.0; self.num_variables()];
        objective[0] = 1.0;
        LinearProgram {
            num_vars: self.num_variables(),
            objective,
            rows,
            rhs,
        }
    }

    /// Average rate of every station under `alpha`.
    pub fn rates(&self, alpha: &Tensor3) -> Vec<f64> {
        let [nk, nm, ns] = self.dims();
        (0..nk)
            .map(|k| {
                let mut sum = 0.0;
                for m in 0..nm {
                    for n in 0..ns {
                        sum += alpha.get(k, m, n) * self.rate_coefficients.get(k, m, n);
                    }
                }
                sum / self.normalizer
            })
            .collect()
    }

    pub fn min_rate(&self, alpha: &Tensor3) -> f64 {
        self.rates(alpha).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// The program in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let [nk, nm, ns] = self.dims();
        let name = |k: usize, m: usize, n: usize| format!("a_{k}_{m}_{n}");
        let mut out = String::from("\\ max-min station rate over relaxed association shares\nMaximize\n obj: mu\nSubject To\n");
        let mut emit = |label: String, terms: Vec<(f64, String)>, sense: &str, rhs: f64| {
            let _ = write!(out, " {label}:");
            for (i, (c, v)) in terms.iter().enumerate() {
                if i > 0 && i % 6 == 0 {
                    out.push_str("\n   ");
                }
                let sign = if *c < 0.0 { '-' } else { '+' };
                if i == 0 && *c >= 0.0 {
                    let _ = write!(out, " {:e} {v}", c.abs());
                } else {
                    let _ = write!(out, " {sign} {:e} {v}", c.abs());
                }
            }
            let _ = writeln!(out, " {sense} {rhs}");
        };
        for k in 0..nk {
            let mut terms = vec![(1.0, "mu".to_string())];
            for m in 0..nm {
                for n in 0..ns {
                    let r = self.rate_coefficients.get(k, m, n);
                    if r != 0.0 {
                        terms.push((-r / self.normalizer, name(k, m, n)));
                    }
                }
            }
            emit(format!("rate_{k}"), terms, "<=", 0.0);
        }
        for n in 0..ns {
            for m in 0..nm {
                emit(format!("uav_{m}_{n}"), (0..nk).map(|k| (1.0, name(k, m, n))).collect(), "<=", 1.0);
            }
        }
        for n in 0..ns {
            for k in 0..nk {
                emit(format!("gt_{k}_{n}"), (0..nm).map(|m| (1.0, name(k, m, n))).collect(), "<=", 1.0);
            }
        }
        out.push_str("Bounds\n mu free\n");
        for k in 0..nk {
            for m in 0..nm {
                for n in 0..ns {
                    let _ = writeln!(out, " 0 <= {} <= 1", name(k, m, n));
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

pub fn build_lp(metrics: &LinkMetrics, cfg: &ScenarioConfig) -> LpInstance {
    LpInstance::new(metrics.slot_rate.clone(), cfg.rate_normalizer())
}

/// Optimal relaxed schedule and its max-min rate.
pub fn solve_lp(instance: &LpInstance) -> Result<(Schedule, f64)> {
    let program = instance.to_program();
    let solution = maximize(&program)?;
    let [nk, nm, ns] = instance.dims();
    let mut alpha = Tensor3::from_fn(nk, nm, ns, |k, m, n| solution.x[instance.column(k, m, n)].clamp(0.0, 1.0));
    // round-off can leave a sum a hair above one
    for n in 0..ns {
        for m in 0..nm {
            let load: f64 = (0..nk).map(|k| alpha.get(k, m, n)).sum();
            if load > 1.0 {
                for k in 0..nk {
                    alpha.set(k, m, n, alpha.get(k, m, n) / load);
                }
            }
        }
        for k in 0..nk {
            let load: f64 = (0..nm).map(|m| alpha.get(k, m, n)).sum();
            if load > 1.0 {
                for m in 0..nm {
                    alpha.set(k, m, n, alpha.get(k, m, n) / load);
                }
            }
        }
    }
    let mu = instance.min_rate(&alpha);
    Ok((Schedule { alpha }, mu))
}
