//! Delimited tables and JSON summaries written by the commands.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use swarmrate::bcd::{Baseline, Baselines, EnergySweep, Outcome, SolveReport, SweepPoint};
use swarmrate::scenario::{PerformanceReport, ScenarioConfig};
use swarmrate::validate::SuiteResult;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const SCHEDULE: &str = "schedule.csv";
pub const TRACE: &str = "trace.csv";
pub const SUMMARY: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const BASELINE: &str = "baseline.csv";
pub const BASELINE_JSON: &str = "baseline.json";
pub const SWEEP: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const VALIDATE_JSON: &str = "validate.json";

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn s(v: impl ToString) -> String {
    v.to_string()
}

pub fn write_trajectory(dir: &Path, outcome: &Outcome) -> Result<()> {
    let rows = outcome.plan.tracks.iter().enumerate().flat_map(|(m, t)| {
        (0..t.positions.len()).map(move |n| {
            let (q, v) = (t.positions[n], t.velocities[n]);
            let (ax, ay) = t.accelerations.get(n).map_or((String::new(), String::new()), |a| (s(a.x), s(a.y)));
            vec![s(n), s(m), s(q.x), s(q.y), s(v.x), s(v.y), ax, ay, s(outcome.powers.p[m][n])]
        })
    });
    table(&dir.join(TRAJECTORY), &["n", "uav", "x", "y", "vx", "vy", "ax", "ay", "p_watts"], rows)
}

pub fn write_schedule(dir: &Path, outcome: &Outcome) -> Result<()> {
    let [nk, nm, ns] = outcome.schedule.alpha.dims();
    let mut rows = Vec::with_capacity(nk * nm * ns);
    for n in 0..ns {
        for m in 0..nm {
            for k in 0..nk {
                rows.push(vec![
                    s(n),
                    s(m),
                    s(k),
                    s(outcome.schedule.alpha.get(k, m, n)),
                    s(outcome.rounded_schedule.alpha.get(k, m, n)),
                ]);
            }
        }
    }
    table(&dir.join(SCHEDULE), &["n", "uav", "gt", "alpha", "alpha_rounded"], rows)
}

/// Row 0 is the starting point. `wall_ms` is the only column that varies
/// between identical runs.
pub fn write_trace(dir: &Path, report: &SolveReport) -> Result<()> {
    let mut rows = Vec::new();
    if let Some(&mu0) = report.mu_trace.first() {
        rows.push(vec![s(0), s(mu0), String::new(), String::new(), String::new(), s(report.timing.init_ms)]);
    }
    for r in &report.trace {
        rows.push(vec![
            s(r.iteration),
            s(r.mu),
            s(r.delta_mu),
            s(r.mu_lb),
            s(r.newton_iterations),
            s(r.wall_ms),
        ]);
    }
    table(
        &dir.join(TRACE),
        &["iteration", "mu", "delta_mu", "mu_lb", "newton_iterations", "wall_ms"],
        rows,
    )
}

fn report_rows(label: &str, r: &PerformanceReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (k, v) in r.rate_per_gt.iter().enumerate() {
        rows.push(vec![s(label), s("gt"), s(k), s("rate"), s(v)]);
    }
    for (k, v) in r.connection_time_per_gt.iter().enumerate() {
        rows.push(vec![s(label), s("gt"), s(k), s("connection_time_s"), s(v)]);
    }
    for (m, v) in r.energy_per_uav.iter().enumerate() {
        rows.push(vec![s(label), s("uav"), s(m), s("energy_j"), s(v)]);
    }
    rows.push(vec![s(label), s("all"), String::new(), s("min_rate"), s(r.min_rate)]);
    rows
}

pub fn write_summary(dir: &Path, report: &SolveReport, cfg: &ScenarioConfig) -> Result<()> {
    if let Some(o) = &report.outcome {
        let mut rows = report_rows("relaxed", &o.relaxed);
        rows.extend(report_rows("rounded", &o.rounded));
        table(&dir.join(SUMMARY), &["schedule", "entity", "index", "metric", "value"], rows)?;
    }
    write_json(&dir.join(SUMMARY_JSON), &solve_json(report, cfg))
}

pub fn solve_json(report: &SolveReport, cfg: &ScenarioConfig) -> Value {
    json!({
        "status": report.status,
        "reason": report.reason,
        "seed": cfg.seed,
        "epsilon": cfg.epsilon,
        "max_iters": cfg.max_iters,
        "e_max": cfg.e_max,
        "iterations": report.iterations,
        "mu_trace": report.mu_trace,
        "delta_mu_trace": report.delta_mu_trace,
        "min_rate": report.min_rate(),
        "relaxed": report.outcome.as_ref().map(|o| &o.relaxed),
        "rounded": report.outcome.as_ref().map(|o| &o.rounded),
    })
}

/// Every artifact of a solve. Infeasible runs only get the trace and the
/// JSON summary.
pub fn write_solve(dir: &Path, report: &SolveReport, cfg: &ScenarioConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(o) = &report.outcome {
        write_trajectory(dir, o)?;
        write_schedule(dir, o)?;
    }
    write_trace(dir, report)?;
    write_summary(dir, report, cfg)
}

fn baseline_json(b: &Baseline) -> Value {
    let q = b.plan.tracks.first().map(|t| t.positions[0]);
    json!({
        "report": b.report,
        "start": q.map(|q| [q.x, q.y]),
    })
}

pub fn write_baselines(dir: &Path, b: &Baselines) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut rows = report_rows("static_ap", &b.static_ap.report);
    rows.extend(report_rows("circular", &b.circular.report));
    table(&dir.join(BASELINE), &["baseline", "entity", "index", "metric", "value"], rows)?;
    write_json(
        &dir.join(BASELINE_JSON),
        &json!({
            "static_ap": baseline_json(&b.static_ap),
            "circular": baseline_json(&b.circular),
        }),
    )
}

fn sweep_row(p: &SweepPoint) -> Vec<String> {
    vec![
        s(p.fraction),
        s(p.e_max),
        s(p.report.status.as_str()),
        p.report.min_rate().map(s).unwrap_or_default(),
        s(p.report.iterations),
    ]
}

pub fn write_sweep(dir: &Path, sweep: &EnergySweep, cfg: &ScenarioConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    table(
        &dir.join(SWEEP),
        &["fraction", "e_max", "status", "min_rate", "iterations"],
        sweep.points.iter().map(sweep_row),
    )?;
    let points: Vec<Value> = sweep
        .points
        .iter()
        .map(|p| {
            let budget = ScenarioConfig { e_max: p.e_max, ..cfg.clone() };
            json!({"fraction": p.fraction, "report": solve_json(&p.report, &budget)})
        })
        .collect();
    write_json(
        &dir.join(SWEEP_JSON),
        &json!({
            "reference_energy": sweep.reference_energy,
            "reference": solve_json(&sweep.reference, cfg),
            "points": points,
        }),
    )
}

pub fn write_validation(dir: &Path, results: &[SuiteResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(VALIDATE_JSON), &json!({ "suites": results }))
}
