//! Acceptance suite: ten criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p hydroelastic --test acceptance -- --nocapture` to
//! see the report.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hydroelastic::continuation::{
    apply_lt, continue_branch, if0_functional, kernel_at, mode_sigma_ratio, newton_solve, transversality, Grid,
    HeightField, NewtonOptions,
};
use hydroelastic::laminar::{build_laminar, cond2_value};
use hydroelastic::oracles::{irrotational_lambda_star, wloo_w0};
use hydroelastic::reconstruct::{euler_residual, fields_from_height, profile_diagnostics, ResidualReport, Tolerances};
use hydroelastic::sturm::{bifurcation_point, find_mu, wronskian, BifurcationPoint};
use hydroelastic::surface::plate_h;
use hydroelastic::{LaminarFlow, PhysicalParams, VorticityProfile};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn params() -> PhysicalParams {
    PhysicalParams::new(1.0, 1.0, -2.0, 0.5).unwrap()
}

/// The three vorticity test cases: zero, constant and tabulated.
fn profiles() -> Vec<(&'static str, VorticityProfile)> {
    vec![
        ("zero", VorticityProfile::zero(-2.0).unwrap()),
        ("constant", VorticityProfile::constant(-2.0, 1.0).unwrap()),
        (
            "tabulated",
            VorticityProfile::tabulated(&[(-2.0, 0.0), (-1.5, 0.3), (-1.0, 0.5), (-0.5, 0.4), (0.0, 0.2)]).unwrap(),
        ),
    ]
}

fn flow_of(profile: &VorticityProfile) -> LaminarFlow {
    build_laminar(profile, &params(), 257).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn require(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = params();
    let flow = flow_of(&VorticityProfile::zero(-2.0).unwrap());
    let bif = bifurcation_point(&flow, &p).unwrap();
    let elapsed = start.elapsed();
    let oracle = irrotational_lambda_star(&p).unwrap().value;
    let e = rel(bif.lambda_star, oracle);
    require(
        e < 1e-8 && elapsed < Duration::from_secs(1),
        format!("lambda* = {:.12} vs oracle {oracle:.12}, rel {e:.1e}, {elapsed:.2?}", bif.lambda_star),
    )
}

fn criterion_2() -> Outcome {
    let mut worst_zero: f64 = 0.0;
    for (g, d, p0) in [(1.0, 1.0, -2.0), (9.81, 0.7, -1.3), (0.4, 2.0, -3.5)] {
        let pp = PhysicalParams::new(g, d, p0, 0.5).unwrap();
        let flow = build_laminar(&VorticityProfile::zero(p0).unwrap(), &pp, 257).unwrap();
        let (c2, _) = cond2_value(&flow, &pp);
        worst_zero = worst_zero.max((flow.theta - (p0 / d).powi(2)).abs()).max((c2 - g * d.powi(3) / (p0 * p0)).abs());
    }
    let flow = flow_of(&VorticityProfile::constant(-2.0, 1.0).unwrap());
    let (c2, _) = cond2_value(&flow, &params());
    let worst_const = (flow.theta - 6.25).abs().max((c2 - 4.0 / 15.0).abs());
    require(
        worst_zero < 1e-12 && worst_const < 1e-9,
        format!("zero vorticity max err {worst_zero:.1e}, constant vorticity max err {worst_const:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let p = params();
    let mut worst: f64 = 0.0;
    for (_, profile) in profiles() {
        let flow = flow_of(&profile);
        for lambda in [0.5, 1.0, 2.0, 3.7] {
            let w = wronskian(&flow, &p, lambda, 0.0).unwrap();
            worst = worst.max(rel(w, wloo_w0(&flow, &p, lambda).value));
        }
    }
    require(worst < 1e-8, format!("max rel err {worst:.1e} over 3 profiles x 4 wavelengths"))
}

fn criterion_4() -> Outcome {
    let p = params();
    let mut worst: f64 = 0.0;
    for (_, profile) in profiles() {
        let flow = flow_of(&profile);
        let c: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&l| find_mu(&flow, &p, l).unwrap() / (l * l)).collect();
        for v in &c {
            worst = worst.max(rel(*v, c[1]));
        }
    }
    require(worst < 1e-6, format!("max spread of mu/lambda^2 {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let p = params();
    let mut worst: f64 = 0.0;
    for (_, profile) in profiles() {
        let flow = flow_of(&profile);
        let bif = bifurcation_point(&flow, &p).unwrap();
        let (l, mu) = (bif.lambda_star, bif.c0 * bif.lambda_star.powi(2));
        let (hl, hm) = (1e-5 * l, 1e-5 * mu);
        let w = |l: f64, m: f64| wronskian(&flow, &p, l, m).unwrap();
        let w_l = (w(l + hl, mu) - w(l - hl, mu)) / (2.0 * hl);
        let w_m = (w(l, mu + hm) - w(l, mu - hm)) / (2.0 * hm);
        worst = worst.max(rel(w_l / w_m, -2.0 * mu / l));
    }
    require(worst < 1e-4, format!("max rel err of W_lambda/W_mu {worst:.1e}"))
}

fn criterion_6() -> Outcome {
    let flow = flow_of(&VorticityProfile::constant(-2.0, 1.0).unwrap());
    let bif = bifurcation_point(&flow, &params()).unwrap();
    let grid = Grid::new(&flow, 32, 129).unwrap();
    let ls = bif.lambda_star;

    let at_star = kernel_at(&grid, ls).unwrap();
    let at_double = kernel_at(&grid, 2.0 * ls).unwrap();
    let mut detail = format!("dim at lambda* {}, at 2 lambda* {}", at_star.dimension, at_double.dimension);
    let mut ok = at_star.dimension == 1 && at_double.dimension == 1 && at_double.modes[2].near_null;

    let off: Vec<f64> = (0..20).map(|i| 0.3 + 0.25 * i as f64).filter(|t| (t - t.round()).abs() > 0.2).collect();
    let off: Vec<f64> = off.into_iter().chain([4.3, 4.4, 4.55, 4.7, 5.3, 5.4, 5.55]).take(20).collect();
    let spurious = off.iter().filter(|&&t| kernel_at(&grid, t * ls).unwrap().dimension != 0).count();
    ok &= off.len() == 20 && spurious == 0;
    detail += &format!(", {spurious}/{} off-lattice wavelengths with a kernel", off.len());

    let kernel = at_star.kernel.clone().unwrap_or_else(|| HeightField::zeros(&grid, ls));
    let shot: Vec<f64> = grid.p.iter().map(|&p| bif.f1_at(p)).collect();
    let reference = HeightField::from_mode(&grid, ls, &shot, 1);
    let alignment = kernel.inner(&reference, &grid) / reference.norm(&grid);
    ok &= alignment >= 0.999;
    detail += &format!(", alignment {alignment:.6}");

    let ratios: Vec<f64> = [33usize, 65, 129, 257]
        .iter()
        .map(|&n_p| mode_sigma_ratio(&Grid::new(&flow, 32, n_p).unwrap(), ls, 1))
        .collect();
    let orders: Vec<f64> = ratios.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ok &= orders.iter().all(|o| *o > 1.8);
    detail +=
        &format!(", null singular value orders {:?}", orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>());
    require(ok, detail)
}

/// The transversality functional applied to the image of `h = f(p)cos(2πq)`
/// under the linearization at `λ*`, relative to the larger of its bulk and
/// surface parts (which cancel on the range).
fn range_defect(flow: &LaminarFlow, bif: &BifurcationPoint, n_p: usize) -> f64 {
    let grid = Grid::new(flow, 64, n_p).unwrap();
    let ls = bif.lambda_star;
    let f: Vec<f64> = grid.p.iter().map(|p| (p + 2.0) * (1.0 + 0.4 * p + 0.1 * p * p)).collect();
    let h = HeightField::from_mode(&grid, ls, &f, 1);
    let lin = apply_lt(&grid, &h, ls);
    let a: Vec<f64> = grid.p.iter().map(|&p| flow.a_exact(p)).collect();
    let star: Vec<f64> = grid.p.iter().map(|&p| bif.f1_at(p)).collect();
    let p = &flow.params;
    let functional = |big_f: &[f64], phi: &[f64]| {
        if0_functional(&grid.spectral, &grid.p, &a, &star, big_f, phi, p.alpha, bif.c0, ls)
    };
    let bulk = functional(&lin.lh, &vec![0.0; grid.n_q]);
    let surface = functional(&vec![0.0; lin.lh.len()], &lin.th);
    (bulk + surface).abs() / bulk.abs().max(surface.abs())
}

fn criterion_7() -> Outcome {
    let p = params();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, profile) in profiles() {
        let flow = flow_of(&profile);
        let bif = bifurcation_point(&flow, &p).unwrap();
        let t = transversality(&bif, &flow, 64).unwrap();
        let e = rel(t.value, t.closed_form);
        let defects = [range_defect(&flow, &bif, 65), range_defect(&flow, &bif, 129), range_defect(&flow, &bif, 257)];
        let order = (defects[1] / defects[2]).log2();
        ok &= t.value < 0.0 && e < 1e-7 && defects[2] < 1e-4 && order > 1.5;
        parts.push(format!(
            "{name}: value {:.6e} rel {e:.1e} range defect {:.1e} (order {order:.2})",
            t.value, defects[2]
        ));
    }
    require(ok, parts.join("; "))
}

/// Least-squares line through `(x, y)`: slope, intercept and R².
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

fn criterion_8() -> Outcome {
    let p = params();
    let amplitudes = [1e-3, 5e-4, 2.5e-4];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, profile) in profiles() {
        let flow = flow_of(&profile);
        let bif = bifurcation_point(&flow, &p).unwrap();
        let grid = Grid::new(&flow, 32, 65).unwrap();
        let disc = hydroelastic::continuation::discrete_bifurcation(&grid, bif.lambda_star).unwrap();
        let h = &disc.kernel;
        let mut errs = Vec::new();
        let mut gaps = Vec::new();
        let mut worst_res: f64 = 0.0;
        for &s in &amplitudes {
            let guess = HeightField { lambda: disc.lambda_h, ..h.scaled(s) };
            let out = newton_solve(&grid, &guess, s, h, &NewtonOptions::default()).unwrap();
            worst_res = worst_res.max(out.residual_norm);
            errs.push(out.field.scaled(1.0 / s).minus(h).norm(&grid) / h.norm(&grid));
            gaps.push(out.field.lambda - disc.lambda_h);
        }
        let (slope, intercept, r2) = linear_fit(&amplitudes, &errs);
        // λ(s) − λ_h is even in s: fit against s² and extrapolate to s = 0
        let s2: Vec<f64> = amplitudes.iter().map(|s| s * s).collect();
        let lam: Vec<f64> = gaps.iter().map(|g| g + disc.lambda_h).collect();
        let (_, lambda0, _) = linear_fit(&s2, &lam);
        let decreasing = gaps.windows(2).all(|w| w[1].abs() <= w[0].abs());
        let limit_err = rel(lambda0, disc.lambda_h);
        let star_gap = rel(disc.lambda_h, bif.lambda_star);
        ok &= r2 > 0.99 && slope > 0.0 && intercept.abs() < 0.05 * errs[2];
        ok &= decreasing && limit_err < 1e-9 && star_gap < 1e-3 && worst_res < 1e-9;
        parts.push(format!(
            "{name}: R^2 {r2:.6}, lambda(0) - lambda_h {limit_err:.1e}, lambda_h vs lambda* {star_gap:.1e}, max residual {worst_res:.1e}"
        ));
    }
    require(ok, parts.join("; "))
}

/// Residual magnitudes that carry the finite-difference truncation error.
fn fd_residuals(r: &ResidualReport) -> [(&'static str, f64); 5] {
    [
        ("momentum_x", r.momentum_x),
        ("momentum_y", r.momentum_y),
        ("vorticity", r.vorticity),
        ("stream_laplacian", r.stream_laplacian),
        ("bernoulli", r.bernoulli),
    ]
}

fn criterion_9() -> Outcome {
    let flow = flow_of(&VorticityProfile::constant(-2.0, 1.0).unwrap());
    let bif = bifurcation_point(&flow, &params()).unwrap();
    let tol = Tolerances::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for (n_q, n_p) in [(64usize, 129usize), (128, 257)] {
        let grid = Grid::new(&flow, n_q, n_p).unwrap();
        let branch = continue_branch(&grid, &bif, 5e-3, 2, &NewtonOptions::default()).unwrap();
        let pt = branch.points.last().unwrap();
        let sol = fields_from_height(&grid, &pt.field).unwrap();
        let r = euler_residual(&grid, &pt.field, &sol).unwrap();
        let failed: Vec<&str> = r.checks(&tol).iter().filter(|c| !c.pass).map(|c| c.name).collect();
        let d = profile_diagnostics(&sol.eta, sol.lambda);
        let plate = plate_h(&grid.spectral, &sol.eta);
        let integral = grid.spectral.mean(&plate.values).abs();
        let shape =
            d.crest_x == 0.0 && d.monotone && !d.degenerate && d.symmetry_defect < 1e-10 && d.mean.abs() < 1e-10;
        ok &= failed.is_empty() && shape && integral < 1e-9 && r.bernoulli <= tol.fd_factor * r.dp * r.dp;
        parts.push(format!(
            "{n_q}x{n_p}: failed checks {failed:?}, symmetry {:.1e}, mean {:.1e}, plate integral {integral:.1e}, bernoulli {:.1e}",
            d.symmetry_defect, d.mean, r.bernoulli
        ));
        reports.push(r);
    }
    let mut orders = Vec::new();
    for ((name, coarse), (_, fine)) in fd_residuals(&reports[0]).into_iter().zip(fd_residuals(&reports[1])) {
        let order = (coarse / fine).log2();
        ok &= order > 1.8;
        orders.push(format!("{name} {order:.2}"));
    }
    parts.push(format!("observed orders: {}", orders.join(", ")));
    require(ok, parts.join("; "))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs `cmd` on a config of the bundled set; returns the exit code and the
/// output directory.
fn run_cli(cmd: &str, config: &str, out: &Path) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_hydroelastic"))
        .arg(cmd)
        .arg("-c")
        .arg(configs_dir().join(config))
        .arg("-o")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    // COND1 failing leaves no laminar flow at all; COND2 failing leaves the
    // laminar flow but no bifurcation from it
    for (config, laminar_code) in [("no_laminar_flow.json", 2), ("no_bifurcation.json", 0)] {
        for cmd in ["laminar", "bifurcate", "branch"] {
            let out = tmp.path().join(format!("{config}-{cmd}"));
            let code = run_cli(cmd, config, &out);
            let expected = if cmd == "laminar" { laminar_code } else { 2 };
            let leaked: Vec<&str> =
                ["bifurcation.json", "kernel.csv", "wronskian_scan.csv", "branch.csv", "branch.json", "points"]
                    .into_iter()
                    .filter(|f| out.join(f).exists())
                    .collect();
            ok &= code == Some(expected) && leaked.is_empty();
            let mut line = format!("{config} {cmd}: exit {code:?}");
            if !leaked.is_empty() {
                line += &format!(" wrote {leaked:?}");
            }
            parts.push(line);
        }
    }
    let cond = hydroelastic::export::read_json(&tmp.path().join("no_bifurcation.json-laminar/conditions.json"));
    let cond2_false = cond.map(|v| v["cond1"] == true && v["cond2"] == false).unwrap_or(false);
    ok &= cond2_false;
    parts.push(format!("conditions.json reports cond2 false: {cond2_false}"));
    require(ok, parts.join(", "))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("irrotational oracle equivalence", criterion_1),
        ("laminar closed forms", criterion_2),
        ("wronskian closed form at mu = 0", criterion_3),
        ("scaling law mu = C0 lambda^2", criterion_4),
        ("derivative identity at the wronskian zero", criterion_5),
        ("kernel structure", criterion_6),
        ("transversality", criterion_7),
        ("branch properties", criterion_8),
        ("physical verification", criterion_9),
        ("negative controls", criterion_10),
    ];
    println!();
    let start = Instant::now();
    let mut failures = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {:>2} {name} ({:.2?}): {detail}", i + 1, t.elapsed());
        if outcome.is_err() {
            failures.push(i + 1);
        }
    }
    let total = start.elapsed();
    println!("total {total:.2?}");
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
    assert!(total < Duration::from_secs(60), "acceptance suite took {total:.2?}");
}
