//! The pipeline stages behind each subcommand. Nothing here prints; every
//! command returns an [`Outcome`] whose report the caller shows.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{default_out_dir, RunConfig};
use crate::continuation::{continue_branch, discrete_bifurcation, transversality, BranchStatus, Grid, HeightField};
use crate::error::{Error, Result};
use crate::export::{fmt17, json_f64, json_number, read_csv, read_json, to_json, write_csv, write_json};
use crate::laminar::{build_laminar, check_existence, LaminarFlow};
use crate::reconstruct::{euler_residual, fields_from_height, profile_diagnostics, Tolerances, WaveSolution};
use crate::sturm::{bifurcation_point, scaled_wronskian, wronskian, BifurcationPoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CONDITION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Tolerance on `⟨w, h*⟩ − s` when re-checking stored points.
const AMPLITUDE_TOL: f64 = 1e-9;
/// Symmetry defect and mean of `η`.
const SHAPE_TOL: f64 = 1e-10;
/// Relative agreement of recomputed and stored values.
const STORED_TOL: f64 = 1e-12;
/// Relative agreement of the two transversality evaluations.
const TRANSVERSALITY_TOL: f64 = 1e-7;

/// Exit code for an error escaping a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::Json(_) | Error::Csv(_) | Error::Io(_) => EXIT_CONFIG,
        Error::ConditionFailed { .. } => EXIT_CONDITION,
        Error::Numerical(_) | Error::Domain(_) => EXIT_NUMERICAL,
    }
}

/// Result of a command that ran to completion.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub report: Vec<String>,
    pub lambda_star: Option<f64>,
}

/// One line of a verification table.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn within(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        CheckRow { name: name.into(), value, tolerance, pass: value.abs() <= tolerance }
    }

    /// A yes/no property: value 0 when it holds, 1 otherwise.
    fn flag(name: impl Into<String>, holds: bool) -> Self {
        CheckRow { name: name.into(), value: if holds { 0.0 } else { 1.0 }, tolerance: 0.0, pass: holds }
    }

    fn line(&self) -> String {
        format!(
            "{:<40} {:>24} {:>24}  {}",
            self.name,
            fmt17(self.value),
            fmt17(self.tolerance),
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Files a run may produce; removed up front so that a failed stage never
/// leaves results of an earlier run behind.
const OUTPUT_FILES: [&str; 9] = [
    "config.json",
    "conditions.json",
    "laminar.csv",
    "bifurcation.json",
    "kernel.csv",
    "wronskian_scan.csv",
    "branch.csv",
    "branch.json",
    "points",
];

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::invalid(format!("cannot create output directory {}: {e}", dir.display())))?;
    for name in OUTPUT_FILES {
        let path = dir.join(name);
        if path.is_dir() {
            fs::remove_dir_all(&path)?;
        } else if path.exists() {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    write_json(&dir.join("config.json"), cfg)
}

/// Builds the laminar flow and writes `laminar.csv` and `conditions.json`.
/// When no laminar flow of the requested depth exists, only
/// `conditions.json` is written and `COND1` fails.
fn laminar_stage(cfg: &RunConfig, dir: &Path) -> Result<LaminarFlow> {
    let profile = cfg.profile()?;
    cfg.physical.check_profile(&profile)?;
    let existence = check_existence(&profile, cfg.physical.d);
    if !existence.exists {
        write_json(
            &dir.join("conditions.json"),
            &json!({"cond1": false, "limit": json_number(existence.limit), "theta": null,
                    "cond2_value": null, "cond2": null}),
        )?;
        return Err(Error::ConditionFailed { condition: "COND1", value: existence.limit });
    }
    let flow = build_laminar(&profile, &cfg.physical, cfg.numerics.n_laminar)?;
    let (cond2_value, cond2) = flow.cond2();
    write_csv(
        &dir.join("laminar.csv"),
        &["p", "H", "a"],
        (0..flow.p.len()).map(|i| vec![flow.p[i], flow.h[i], flow.a[i]]),
    )?;
    write_json(
        &dir.join("conditions.json"),
        &json!({"cond1": true, "limit": json_number(existence.limit), "theta": json_number(flow.theta),
                "cond2_value": json_number(cond2_value), "cond2": cond2}),
    )?;
    Ok(flow)
}

pub fn cmd_laminar(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    prepare_dir(dir)?;
    write_config(cfg, dir)?;
    let flow = laminar_stage(cfg, dir)?;
    let (v, ok) = flow.cond2();
    Ok(Outcome {
        code: EXIT_OK,
        report: vec![
            format!("theta        {}", fmt17(flow.theta)),
            format!("cond2_value  {}  ({})", fmt17(v), if ok { "holds" } else { "fails" }),
            format!("wrote {}", dir.display()),
        ],
        lambda_star: None,
    })
}

struct Bifurcation {
    flow: LaminarFlow,
    point: BifurcationPoint,
    transversality: f64,
}

/// Requires `COND2`, then writes `bifurcation.json`, `kernel.csv` and
/// `wronskian_scan.csv`.
fn bifurcation_stage(cfg: &RunConfig, dir: &Path) -> Result<Bifurcation> {
    let flow = laminar_stage(cfg, dir)?;
    let (cond2_value, ok) = flow.cond2();
    if !ok {
        return Err(Error::ConditionFailed { condition: "COND2", value: cond2_value });
    }
    let params = &cfg.physical;
    let point = bifurcation_point(&flow, params)?;
    let tr = transversality(&point, &flow, cfg.numerics.n_q)?;

    let scan = &cfg.numerics.scan;
    let mut rows = Vec::with_capacity(scan.n_lambda * scan.modes);
    for i in 0..scan.n_lambda {
        let t = i as f64 / (scan.n_lambda - 1) as f64;
        let lambda = point.lambda_star * (scan.lambda_min + t * (scan.lambda_max - scan.lambda_min));
        for k in 1..=scan.modes {
            let mu = (2.0 * std::f64::consts::PI * k as f64).powi(2);
            let w = wronskian(&flow, params, lambda, mu)?;
            let ws = scaled_wronskian(&flow, params, lambda, mu)?;
            rows.push(vec![lambda, mu, k as f64, w, ws]);
        }
    }
    write_csv(&dir.join("wronskian_scan.csv"), &["lambda", "mu", "k", "W", "W_scaled"], rows)?;

    let shot = &point.f1_star;
    let f0 = shot.f0;
    write_csv(
        &dir.join("kernel.csv"),
        &["p", "f", "fp"],
        (0..shot.p.len()).map(|i| vec![shot.p[i], shot.f[i] / f0, shot.fp[i] / f0]),
    )?;
    write_json(
        &dir.join("bifurcation.json"),
        &json!({
            "C0": json_number(point.c0),
            "lambda_star": json_number(point.lambda_star),
            "mode_k": point.mode_k,
            "transversality": json_number(tr.value),
            "transversality_closed_form": json_number(tr.closed_form),
            "theta": json_number(flow.theta),
            "cond2_value": json_number(cond2_value),
        }),
    )?;
    Ok(Bifurcation { flow, point, transversality: tr.value })
}

pub fn cmd_bifurcate(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    prepare_dir(dir)?;
    write_config(cfg, dir)?;
    let b = bifurcation_stage(cfg, dir)?;
    Ok(Outcome {
        code: EXIT_OK,
        report: vec![
            format!("C0              {}", fmt17(b.point.c0)),
            format!("lambda_star     {}", fmt17(b.point.lambda_star)),
            format!("transversality  {}", fmt17(b.transversality)),
            format!("wrote {}", dir.display()),
        ],
        lambda_star: Some(b.point.lambda_star),
    })
}

fn point_stem(index: usize) -> String {
    format!("point_{index:04}")
}

/// Every check applied to a branch point: the residual suite, the amplitude
/// condition and the shape of the surface.
fn point_checks(
    grid: &Grid,
    field: &HeightField,
    sol: &WaveSolution,
    s: f64,
    kernel: &HeightField,
    tol: &Tolerances,
    prefix: &str,
) -> Result<Vec<CheckRow>> {
    let report = euler_residual(grid, field, sol)?;
    let mut rows: Vec<CheckRow> = report
        .checks(tol)
        .into_iter()
        .map(|c| CheckRow { name: format!("{prefix}{}", c.name), value: c.value, tolerance: c.tolerance, pass: c.pass })
        .collect();
    rows.push(CheckRow::flag(format!("{prefix}plate_resolved"), report.plate_resolved));
    rows.push(CheckRow::within(format!("{prefix}amplitude"), field.inner(kernel, grid) - s, AMPLITUDE_TOL));
    let shape = profile_diagnostics(&sol.eta, sol.lambda);
    rows.push(CheckRow::within(format!("{prefix}symmetry"), shape.symmetry_defect, SHAPE_TOL));
    rows.push(CheckRow::within(format!("{prefix}eta_mean_zero"), shape.mean, SHAPE_TOL));
    if s != 0.0 {
        // positive amplitude puts the crest at x = 0, negative the trough
        let at_origin = if s > 0.0 { shape.crest_x } else { shape.trough_x };
        rows.push(CheckRow::within(format!("{prefix}extremum_at_origin"), at_origin, 0.0));
        rows.push(CheckRow::flag(format!("{prefix}monotone"), shape.monotone));
    }
    Ok(rows)
}

fn write_point(dir: &Path, index: usize, grid: &Grid, sol: &WaveSolution, field: &HeightField) -> Result<()> {
    let stem = point_stem(index);
    let q = grid.q_nodes();
    let n_q = grid.n_q;
    write_csv(
        &dir.join(format!("{stem}_field.csv")),
        &["q", "p", "x", "y", "w", "u", "v", "P"],
        (0..grid.n_p * n_q).map(|k| {
            let (i, j) = (k / n_q, k % n_q);
            vec![q[j], grid.p[i], sol.x[j], sol.y[k], field.w[k], sol.u[k], sol.v[k], sol.pressure[k]]
        }),
    )?;
    write_csv(&dir.join(format!("{stem}_surface.csv")), &["x", "eta"], (0..n_q).map(|j| vec![sol.x[j], sol.eta[j]]))
}

pub fn cmd_branch(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    prepare_dir(dir)?;
    write_config(cfg, dir)?;
    let b = bifurcation_stage(cfg, dir)?;
    let n = &cfg.numerics;
    let grid = Grid::new(&b.flow, n.n_q, n.n_p)?;
    let branch = continue_branch(&grid, &b.point, n.s_max, n.n_steps, &n.newton)?;

    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir)?;
    let mut table = Vec::new();
    let mut entries = Vec::new();
    let mut failed = Vec::new();
    for (index, pt) in branch.points.iter().enumerate() {
        let sol = fields_from_height(&grid, &pt.field)?;
        let report = euler_residual(&grid, &pt.field, &sol)?;
        let shape = profile_diagnostics(&sol.eta, sol.lambda);
        let checks = point_checks(&grid, &pt.field, &sol, pt.s, &branch.kernel, &n.verify, "")?;
        let pass = checks.iter().all(|c| c.pass);
        if !pass {
            failed.extend(checks.iter().filter(|c| !c.pass).map(|c| format!("{}:{}", point_stem(index), c.name)));
        }
        write_point(&points_dir, index, &grid, &sol, &pt.field)?;
        let (crest, trough) = extremes(&sol.eta);
        write_json(
            &points_dir.join(format!("{}_summary.json", point_stem(index))),
            &json!({
                "index": index,
                "s": json_number(pt.s),
                "lambda": json_number(pt.lambda),
                "Q": json_number(sol.q_bernoulli),
                "E": json_number(sol.energy),
                "iterations": pt.iterations,
                "residual_norm": json_number(pt.residual_norm),
                "crest": {"x": json_number(shape.crest_x), "eta": json_number(crest)},
                "trough": {"x": json_number(shape.trough_x), "eta": json_number(trough)},
                "profile": to_json(&shape)?,
                "residuals": to_json(&report)?,
                "checks": to_json(&checks)?,
                "pass": pass,
            }),
        )?;
        table.push(vec![pt.s, pt.lambda, crest, trough, pt.residual_norm]);
        entries.push(json!({"index": index, "s": json_number(pt.s), "lambda": json_number(pt.lambda),
                            "stem": point_stem(index)}));
    }
    write_csv(&dir.join("branch.csv"), &["s", "lambda", "eta_crest", "eta_trough", "residual"], table)?;
    write_json(
        &dir.join("branch.json"),
        &json!({
            "lambda_star": json_number(branch.lambda_star),
            "lambda_h": json_number(branch.lambda_h),
            "n_q": grid.n_q,
            "n_p": grid.n_p,
            "s_max": json_number(n.s_max),
            "n_steps": n.n_steps,
            "status": to_json(&branch.status)?,
            "points": entries,
        }),
    )?;

    let mut report = vec![
        format!("lambda_star  {}", fmt17(branch.lambda_star)),
        format!("lambda_h     {}", fmt17(branch.lambda_h)),
        format!("points       {}", branch.points.len()),
    ];
    let code = match &branch.status {
        BranchStatus::Truncated { s, reason } => {
            report.push(format!("branch truncated at s = {}: {reason}", fmt17(*s)));
            EXIT_NUMERICAL
        }
        BranchStatus::Complete if !failed.is_empty() => {
            report.push(format!("residual checks failed: {}", failed.join(", ")));
            EXIT_VERIFY
        }
        BranchStatus::Complete => EXIT_OK,
    };
    report.push(format!("wrote {}", dir.display()));
    Ok(Outcome { code, report, lambda_star: Some(branch.lambda_star) })
}

fn extremes(eta: &[f64]) -> (f64, f64) {
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eta.iter().copied().fold(f64::INFINITY, f64::min);
    (max, min)
}

fn json_field(v: &Value, key: &str, file: &Path) -> Result<f64> {
    json_f64(&v[key]).ok_or_else(|| Error::invalid(format!("{}: missing number `{key}`", file.display())))
}

fn verify_laminar(cfg: &RunConfig, dir: &Path, rows: &mut Vec<CheckRow>) -> Result<Option<LaminarFlow>> {
    let cond_path = dir.join("conditions.json");
    let stored = read_json(&cond_path)?;
    let profile = cfg.profile()?;
    cfg.physical.check_profile(&profile)?;
    let existence = check_existence(&profile, cfg.physical.d);
    let stored_cond1 = stored["cond1"].as_bool();
    rows.push(CheckRow::flag("conditions:cond1", stored_cond1 == Some(existence.exists)));
    if !existence.exists {
        let limit = json_f64(&stored["limit"]).unwrap_or(f64::NAN);
        rows.push(CheckRow::flag("conditions:limit", limit == existence.limit));
        return Ok(None);
    }
    let flow = build_laminar(&profile, &cfg.physical, cfg.numerics.n_laminar)?;
    let (cond2_value, cond2) = flow.cond2();
    rows.push(CheckRow::within(
        "conditions:theta",
        relative(json_field(&stored, "theta", &cond_path)?, flow.theta),
        STORED_TOL,
    ));
    rows.push(CheckRow::within(
        "conditions:cond2_value",
        relative(json_field(&stored, "cond2_value", &cond_path)?, cond2_value),
        STORED_TOL,
    ));
    rows.push(CheckRow::flag("conditions:cond2", stored["cond2"].as_bool() == Some(cond2)));

    let table = read_csv(&dir.join("laminar.csv"))?;
    for (name, fresh) in [("p", &flow.p), ("H", &flow.h), ("a", &flow.a)] {
        rows.push(CheckRow::within(format!("laminar:{name}"), max_rel_diff(&table.column(name)?, fresh), STORED_TOL));
    }
    // the trivial solution on the continuation grid
    let n = &cfg.numerics;
    let grid = Grid::new(&flow, n.n_q, n.n_p)?;
    let field = HeightField::zeros(&grid, 1.0);
    let sol = fields_from_height(&grid, &field)?;
    for c in euler_residual(&grid, &field, &sol)?.checks(&n.verify) {
        rows.push(CheckRow {
            name: format!("laminar:{}", c.name),
            value: c.value,
            tolerance: c.tolerance,
            pass: c.pass,
        });
    }
    Ok(Some(flow))
}

fn verify_bifurcation(
    cfg: &RunConfig,
    dir: &Path,
    flow: &LaminarFlow,
    rows: &mut Vec<CheckRow>,
) -> Result<BifurcationPoint> {
    let path = dir.join("bifurcation.json");
    let stored = read_json(&path)?;
    let point = bifurcation_point(flow, &cfg.physical)?;
    let tr = transversality(&point, flow, cfg.numerics.n_q)?;
    rows.push(CheckRow::within("bifurcation:C0", relative(json_field(&stored, "C0", &path)?, point.c0), STORED_TOL));
    rows.push(CheckRow::within(
        "bifurcation:lambda_star",
        relative(json_field(&stored, "lambda_star", &path)?, point.lambda_star),
        STORED_TOL,
    ));
    let stored_tr = json_field(&stored, "transversality", &path)?;
    rows.push(CheckRow::within("bifurcation:transversality_stored", relative(stored_tr, tr.value), STORED_TOL));
    rows.push(CheckRow::flag("bifurcation:transversality_negative", tr.value < 0.0));
    rows.push(CheckRow::within(
        "bifurcation:transversality_closed_form",
        relative(tr.value, tr.closed_form),
        TRANSVERSALITY_TOL,
    ));
    Ok(point)
}

fn verify_branch(
    cfg: &RunConfig,
    dir: &Path,
    flow: &LaminarFlow,
    point: &BifurcationPoint,
    rows: &mut Vec<CheckRow>,
    notes: &mut Vec<String>,
) -> Result<()> {
    let path = dir.join("branch.json");
    let stored = read_json(&path)?;
    let n = &cfg.numerics;
    let grid = Grid::new(flow, n.n_q, n.n_p)?;
    let disc = discrete_bifurcation(&grid, point.lambda_star)?;
    rows.push(CheckRow::within(
        "branch:lambda_h",
        relative(json_field(&stored, "lambda_h", &path)?, disc.lambda_h),
        STORED_TOL,
    ));
    let entries =
        stored["points"].as_array().ok_or_else(|| Error::invalid(format!("{}: missing `points`", path.display())))?;
    let points_dir = dir.join("points");
    for entry in entries {
        let index =
            entry["index"].as_u64().ok_or_else(|| Error::invalid(format!("{}: point without index", path.display())))?
                as usize;
        let stem = point_stem(index);
        let summary_path = points_dir.join(format!("{stem}_summary.json"));
        let summary = read_json(&summary_path)?;
        let s = json_field(&summary, "s", &summary_path)?;
        let lambda = json_field(&summary, "lambda", &summary_path)?;
        let field_table = read_csv(&points_dir.join(format!("{stem}_field.csv")))?;
        let surface = read_csv(&points_dir.join(format!("{stem}_surface.csv")))?;
        let w = field_table.column("w")?;
        let eta = surface.column("eta")?;
        if w.len() != grid.n_q * grid.n_p || eta.len() != grid.n_q {
            return Err(Error::invalid(format!("{stem}: stored grid does not match n_q x n_p of the config")));
        }
        let prefix = format!("{stem}:");
        let top = grid.surface() * grid.n_q;
        rows.push(CheckRow::within(format!("{prefix}surface_consistency"), max_rel_diff(&eta, &w[top..]), STORED_TOL));
        // the surface file is authoritative for the surface row
        let mut w = w;
        w[top..].copy_from_slice(&eta);
        let field = HeightField { n_q: grid.n_q, n_p: grid.n_p, lambda, w };
        // stored data that no longer describes an admissible wave fails the
        // point instead of aborting the whole verification
        let sol = match fields_from_height(&grid, &field) {
            Ok(sol) => sol,
            Err(e @ (Error::Domain(_) | Error::Numerical(_))) => {
                rows.push(CheckRow::flag(format!("{prefix}reconstruction"), false));
                notes.push(format!("{stem}: {e}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut stored_fields = 0.0f64;
        for (name, fresh) in [("y", &sol.y), ("u", &sol.u), ("v", &sol.v), ("P", &sol.pressure)] {
            stored_fields = stored_fields.max(max_rel_diff(&field_table.column(name)?, fresh));
        }
        rows.push(CheckRow::within(format!("{prefix}stored_fields"), stored_fields, STORED_TOL));
        rows.extend(point_checks(&grid, &field, &sol, s, &disc.kernel, &n.verify, &prefix)?);
    }
    Ok(())
}

/// Recomputes everything stored in `dir` and runs every residual suite.
pub fn cmd_verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    if !dir.join("conditions.json").exists() {
        return Err(Error::invalid(format!("{} holds no run output (conditions.json missing)", dir.display())));
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    if let Some(flow) = verify_laminar(cfg, dir, &mut rows)? {
        if dir.join("bifurcation.json").exists() {
            let point = verify_bifurcation(cfg, dir, &flow, &mut rows)?;
            if dir.join("branch.json").exists() {
                verify_branch(cfg, dir, &flow, &point, &mut rows, &mut notes)?;
            }
        }
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    let mut report = vec![format!("{:<40} {:>24} {:>24}  result", "check", "value", "tolerance")];
    report.extend(rows.iter().map(CheckRow::line));
    report.extend(notes);
    let code = if failed.is_empty() {
        report.push(format!("all {} checks passed", rows.len()));
        EXIT_OK
    } else {
        report.push(format!("{} of {} checks failed: {}", failed.len(), rows.len(), failed.join(", ")));
        EXIT_VERIFY
    };
    Ok(Outcome { code, report, lambda_star: None })
}

/// Which command each sweep run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Laminar,
    Bifurcate,
    Branch,
}

impl Stage {
    fn run(self, cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
        match self {
            Stage::Laminar => cmd_laminar(cfg, dir),
            Stage::Bifurcate => cmd_bifurcate(cfg, dir),
            Stage::Branch => cmd_branch(cfg, dir),
        }
    }
}

/// `path=v1,v2,...`, or `path=[json, values]` for values containing commas.
pub fn parse_vary(spec: &str) -> Result<(String, Vec<String>)> {
    let (path, raw) =
        spec.split_once('=').ok_or_else(|| Error::invalid(format!("--vary `{spec}` is not of the form path=v1,v2")))?;
    let raw = raw.trim();
    let values: Vec<String> = if raw.starts_with('[') {
        let list: Vec<Value> =
            serde_json::from_str(raw).map_err(|e| Error::invalid(format!("--vary `{path}`: {e}")))?;
        list.iter().map(Value::to_string).collect()
    } else {
        raw.split(',').map(|v| v.trim().to_owned()).collect()
    };
    if values.is_empty() || values.iter().any(String::is_empty) {
        return Err(Error::invalid(format!("--vary `{path}` has an empty value")));
    }
    Ok((path.trim().to_owned(), values))
}

/// Runs `stage` on the Cartesian product of the varied values, each run in
/// its own `run_XXX` directory, on `jobs` worker threads.
pub fn cmd_sweep(
    base: &Value,
    base_dir: &Path,
    overrides: &[String],
    vary: &[String],
    stage: Stage,
    dir: &Path,
    jobs: usize,
) -> Result<Outcome> {
    let axes = vary.iter().map(|v| parse_vary(v)).collect::<Result<Vec<_>>>()?;
    if axes.is_empty() {
        return Err(Error::invalid("sweep needs at least one --vary"));
    }
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for (_, values) in &axes {
        combos =
            combos.into_iter().flat_map(|c| (0..values.len()).map(move |k| [c.clone(), vec![k]].concat())).collect();
    }
    prepare_dir(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(i32, Option<f64>, String)> = pool.install(|| {
        combos
            .par_iter()
            .enumerate()
            .map(|(run, combo)| {
                let mut sets = overrides.to_vec();
                for (axis, &k) in axes.iter().zip(combo) {
                    sets.push(format!("{}={}", axis.0, axis.1[k]));
                }
                let run_dir = dir.join(format!("run_{run:03}"));
                let outcome =
                    RunConfig::from_value(base.clone(), &sets, base_dir).and_then(|cfg| stage.run(&cfg, &run_dir));
                match outcome {
                    Ok(o) => (o.code, o.lambda_star, String::new()),
                    Err(e) => (exit_code(&e), None, e.to_string()),
                }
            })
            .collect()
    });

    let mut writer = csv::Writer::from_path(dir.join("sweep.csv"))?;
    let mut header = vec!["run".to_owned(), "dir".to_owned()];
    header.extend(axes.iter().map(|a| a.0.clone()));
    header.extend(["exit_code", "lambda_star", "message"].map(String::from));
    writer.write_record(&header)?;
    let mut report = Vec::new();
    for (run, (combo, (code, lambda_star, message))) in combos.iter().zip(&results).enumerate() {
        let mut record = vec![run.to_string(), format!("run_{run:03}")];
        record.extend(axes.iter().zip(combo).map(|(a, &k)| a.1[k].clone()));
        record.push(code.to_string());
        record.push(lambda_star.map(fmt17).unwrap_or_default());
        record.push(message.clone());
        writer.write_record(&record)?;
        report.push(format!("run_{run:03}  exit {code}  {}", lambda_star.map(fmt17).unwrap_or_default()));
    }
    writer.flush()?;
    report.push(format!("wrote {}", dir.join("sweep.csv").display()));
    // runs that fail a condition or the solver are results; a bad config is not
    let code = if results.iter().any(|r| r.0 == EXIT_CONFIG) { EXIT_CONFIG } else { EXIT_OK };
    Ok(Outcome { code, report, lambda_star: None })
}

/// Directory and resolved configuration for `verify`: the given config, or
/// the `config.json` stored by the run.
pub fn verify_config(
    config: Option<&Path>,
    overrides: &[String],
    dir_flag: Option<&Path>,
) -> Result<(RunConfig, PathBuf)> {
    match config {
        Some(path) => {
            let cfg = RunConfig::load(path, overrides)?;
            let dir = cfg.out_dir(dir_flag);
            Ok((cfg, dir))
        }
        None => {
            let dir = dir_flag.map(Path::to_path_buf).unwrap_or_else(default_out_dir);
            let cfg = RunConfig::load(&dir.join("config.json"), overrides)?;
            Ok((cfg, dir))
        }
    }
}
