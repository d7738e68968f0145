use std::io::Write;
use std::path::Path;

use axisym_darboux::catalog::Catalog;
use axisym_darboux::darboux::{darboux_map, helmholtz_potential, q_seed_form};
use axisym_darboux::moutard::{moutard, moutard_solution_form, superpose_form, superpose_potential, swap_check, SuperposeCoefficients};
use axisym_darboux::quadrature::{integrate_form, primitive_field, Panels, PathVariant, QuadError};
use axisym_darboux::verify::suite::{run_catalog_suite, scan_domain, SuiteConfig, IMAGE_SCALES};
use axisym_darboux::verify::{
    fd_residual_field, residual_report, sample_identity, singularity_scan, ResidualReport, SampleSpec, FD_TOLERANCE,
};
use axisym_darboux::{Domain, Expr, Field, Identity, OneForm, Params, PathSpec, Point};
use serde_json::{json, Value};

use crate::args::{Command, Format, Mode, PathArg, Settings};
use crate::CliError;

/// Grid spacing used when no `--grid` is given to the transform commands.
const DEFAULT_SPACING: f64 = 0.01;
const DEFAULT_GRID: (usize, usize) = (101, 101);

/// `[0.5, 2.5] × [−1, 1]`: default box for grid solutions, away from the
/// axis and the origin where a 0.01 stencil cannot resolve `1/ρ`-type seeds.
fn fd_box() -> Domain {
    Domain::new(0.5, 2.5, -1.0, 1.0).expect("valid box")
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::VerifyCatalog { common, seed, points } => verify_catalog(&common.settings(seed)?, points),
        Command::Transform { common, mode, seed_expr, u, solution, rng_seed, field } => {
            let s = common.settings(rng_seed)?;
            transform(&s, mode, &seed_expr, &u, solution.as_deref(), field.as_deref())
        }
        Command::Superpose { common, seed, y1, y2, u, f, f0, field } => {
            superpose(&common.settings(seed)?, &y1, &y2, &u, f.as_deref(), f0, field.as_deref())
        }
        Command::Quadrature { common, seed, a, b, q_seed, anchor, anchor_value, at, path, panels, nodes } => {
            let s = common.settings(seed)?;
            let form = match (a, b, q_seed) {
                (Some(a), Some(b), None) => OneForm::new(s.expr("--a", &a)?, s.expr("--b", &b)?),
                (None, None, Some(y)) => q_seed_form(&s.expr("--q-seed", &y)?),
                _ => return Err(CliError::Usage("give either --a and --b, or --q-seed".into())),
            };
            let variant = match path {
                PathArg::RThenZ => PathVariant::RThenZ,
                PathArg::ZThenR => PathVariant::ZThenR,
                PathArg::MidpointPolyline => PathVariant::MidpointPolyline,
            };
            let spec = PathSpec { variant, panels: Panels::PerUnitLength(panels), nodes };
            spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let anchor = anchor.map(|t| crate::args::parse_point(&t, "--anchor")).transpose()?;
            let at = at.map(|t| crate::args::parse_point(&t, "--at")).transpose()?;
            quadrature(&s, &form, anchor, anchor_value, at, &spec)
        }
        Command::Scan { common, expr } => scan(&common.settings(None)?, &expr),
        Command::Export { common, expr } => export(&common.settings(None)?, &expr),
    }
}

fn io_err(path: Option<&Path>, e: std::io::Error) -> CliError {
    match path {
        Some(p) => CliError::Numeric(format!("writing {}: {e}", p.display())),
        None => CliError::Numeric(format!("writing output: {e}")),
    }
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_err(Some(p), e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| io_err(None, e))
        }
    }
}

fn emit_json(s: &Settings, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("json values serialize");
    text.push('\n');
    write_to(s.out.as_deref(), text.as_bytes())
}

fn field_bytes(field: &Field<f64>, format: Format) -> Vec<u8> {
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            buf = serde_json::to_vec(&field.to_json()).expect("json values serialize");
            buf.push(b'\n');
        }
        Format::Csv => field.write_csv(&mut buf).expect("writing to memory"),
        Format::Matrix => field.write_matrix(&mut buf).expect("writing to memory"),
    }
    buf
}

fn report_json(rep: &ResidualReport) -> Value {
    serde_json::to_value(rep).expect("reports serialize")
}

fn quad_err(e: QuadError) -> CliError {
    match e {
        QuadError::InvalidDomain(_) | QuadError::InvalidPath(_) | QuadError::OutsideDomain(_) => CliError::Usage(e.to_string()),
        QuadError::Blocked { .. } | QuadError::Integrand(_) => CliError::Numeric(e.to_string()),
    }
}

fn sample_spec(s: &Settings, domain: &Domain) -> SampleSpec {
    SampleSpec::default().with_domain(domain.clone()).with_seed(s.seed).with_tolerance(s.tolerance)
}

fn json_only(s: &Settings, what: &str) -> Result<(), CliError> {
    if s.format != Format::Json {
        return Err(CliError::Usage(format!("{what} reports are JSON only; --format applies to --field files")));
    }
    Ok(())
}

fn verify_catalog(s: &Settings, points: Option<usize>) -> Result<(), CliError> {
    let cfg = SuiteConfig { seed: s.seed, n_points: points.unwrap_or(SuiteConfig::default().n_points), tolerance: s.tolerance };
    if cfg.n_points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    let report = run_catalog_suite(Catalog::builtin(), cfg);
    let bytes = match s.format {
        Format::Json => report.to_ndjson().into_bytes(),
        Format::Csv => {
            let mut out = String::from("group,name,value,threshold,verdict\n");
            for c in &report.checks {
                let verdict = if c.passed() { "pass" } else { "fail" };
                out.push_str(&format!("{},\"{}\",{:e},{:e},{verdict}\n", c.group, c.name.replace('"', "'"), c.value, c.threshold));
            }
            out.into_bytes()
        }
        Format::Matrix => return Err(CliError::Usage("verify-catalog writes json or csv".into())),
    };
    write_to(s.out.as_deref(), &bytes)?;
    let sum = report.summary();
    eprintln!("{} checks, {} passed, {} failed", sum.total, sum.passed, sum.failed);
    for c in report.failures() {
        eprintln!("  FAIL {}: {} (value {:e}, threshold {:e})", c.group, c.name, c.value, c.threshold);
    }
    if report.passed() {
        Ok(())
    } else if report.blew_up() {
        Err(CliError::Numeric(format!("{} checks failed, some with non-finite values", sum.failed)))
    } else {
        Err(CliError::Verification(format!("{} of {} checks failed", sum.failed, sum.total)))
    }
}

/// Sampled residual of `y` against `u`; refuses to go on when it fails.
#[allow(clippy::result_large_err)]
fn require_solution(
    flag: &str,
    u: &Expr,
    y: &Expr,
    params: &Params,
    spec: &SampleSpec,
) -> Result<ResidualReport, (ResidualReport, CliError)> {
    let rep = residual_report(u, y, params, spec);
    if rep.passed() {
        Ok(rep)
    } else {
        let msg = format!(
            "{flag} `{y}` does not solve u = {u}: max scaled residual {:e} (tolerance {:e}), {} non-finite samples",
            rep.max_scaled_residual, rep.tolerance, rep.non_finite_count
        );
        Err((rep, CliError::Verification(msg)))
    }
}

fn refuse(s: &Settings, rep: ResidualReport, err: CliError) -> Result<(), CliError> {
    emit_json(s, &json!({ "seed_check": report_json(&rep), "verdict": "fail" }))?;
    Err(err)
}

fn write_field(path: Option<&Path>, field: &Field<f64>, format: Format) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, field_bytes(field, format)).map_err(|e| io_err(Some(p), e)),
        None => Ok(()),
    }
}

fn transform(s: &Settings, mode: Mode, seed: &str, u: &str, solution: Option<&str>, field_path: Option<&Path>) -> Result<(), CliError> {
    let mut s = s.clone();
    if mode == Mode::Darboux {
        for (name, v) in [("C", 1.0), ("C1", 1.0), ("kappa", 1.0)] {
            if s.params.get(name).is_err() {
                s.params.set(name, v);
            }
        }
    } else if solution.is_some() && field_path.is_none() && s.format != Format::Json {
        return Err(CliError::Usage("--format needs --field".into()));
    }
    let y = s.expr("--seed", seed)?;
    let u = s.expr("--u", u)?;
    let extra = solution.map(|t| s.expr("--solution", t)).transpose()?;
    if mode == Mode::Darboux && (!u.fold().is_zero() || extra.is_some()) {
        return Err(CliError::Usage("darboux mode transforms seeds of the free equation: use --u 0 and no --solution".into()));
    }
    let domain = s.domain_or(fd_box());
    let spec = sample_spec(&s, &domain);
    let seed_check = match require_solution("--seed", &u, &y, &s.params, &spec) {
        Ok(rep) => rep,
        Err((rep, err)) => return refuse(&s, rep, err),
    };
    let (n_r, n_z) = s.grid_or_spacing(&domain, DEFAULT_SPACING);
    match mode {
        Mode::Moutard => moutard_transform(&s, &domain, (n_r, n_z), &u, &y, extra.as_ref(), seed_check, field_path),
        Mode::Darboux => darboux_transform(&s, &domain, (n_r, n_z), &y, seed_check, field_path),
    }
}

#[allow(clippy::too_many_arguments)]
fn moutard_transform(
    s: &Settings,
    domain: &Domain,
    (n_r, n_z): (usize, usize),
    u: &Expr,
    yh: &Expr,
    extra: Option<&Expr>,
    seed_check: ResidualReport,
    field_path: Option<&Path>,
) -> Result<(), CliError> {
    let spec = sample_spec(s, domain);
    let res = moutard(u, yh);
    let id = &res.identities()[0];
    let trivial = sample_identity(id, &s.params, &spec);
    let mut out = json!({
        "mode": "moutard",
        "params": s.params,
        "seed_check": report_json(&seed_check),
        "new_potential": res.new_potential.to_string(),
        "solutions": [res.new_yh.to_string()],
        "solution_check": report_json(&trivial),
        "record": res.record,
    });
    let mut ok = trivial.passed();
    if let Some(y) = extra {
        let y_check = match require_solution("--solution", u, y, &s.params, &spec) {
            Ok(rep) => rep,
            Err((rep, err)) => return refuse(s, rep, err),
        };
        let form = moutard_solution_form(y, yh);
        let anchor = domain.center();
        let g = primitive_field::<f64>(&form, &s.params, domain, n_r, n_z, anchor, 0.0, &PathSpec::default()).map_err(quad_err)?;
        let yh_tape = yh.compile(&s.params).map_err(|e| CliError::Numeric(e.to_string()))?;
        let image = g.map(|pt, gv| yh_tape.eval(pt).ok().map(|h| gv / (pt.r * h)));
        let fd = fd_residual_field("transformed solution, five-point stencil", &res.new_potential, &s.params, &image, FD_TOLERANCE);
        ok &= fd.passed();
        out["solution_input_check"] = report_json(&y_check);
        out["carried_solution"] = json!({
            "formula": format!("G/(r*({yh}))"),
            "g_form": { "a": form.a.to_string(), "b": form.b.to_string() },
            "anchor": { "r": anchor.r, "z": anchor.z, "value": 0.0 },
            "grid": { "n_r": n_r, "n_z": n_z, "flagged": image.flagged_count() },
            "fd_residual": report_json(&fd),
        });
        write_field(field_path, &image, s.format)?;
    }
    emit_json(s, &out)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Verification("transformed solution failed its residual check".into()))
    }
}

/// Index of a catalog seed printing the same as `y`.
fn catalog_seed(y: &Expr) -> Option<usize> {
    let text = y.fold().to_string();
    Catalog::builtin().seeds().iter().position(|s| s.to_string() == text).map(|i| i + 1)
}

fn darboux_transform(
    s: &Settings,
    domain: &Domain,
    (n_r, n_z): (usize, usize),
    y: &Expr,
    seed_check: ResidualReport,
    field_path: Option<&Path>,
) -> Result<(), CliError> {
    let cat = Catalog::builtin();
    let binding = Params::new().with("C", s.params.get("C").unwrap_or(1.0)).with("C1", s.params.get("C1").unwrap_or(1.0));
    let potential = helmholtz_potential().bind(&binding).fold();
    let map = darboux_map(y);
    let form = q_seed_form(y);
    let anchor = domain.center();
    let known = catalog_seed(y);
    // a catalog seed takes its gauge from the closed primitive, so the grid
    // solution is the printed image up to the stated scale
    let q0 = match known {
        Some(i) => cat.q_primitive(i).expect("six primitives").eval(&s.params, anchor).map_err(|e| CliError::Numeric(e.to_string()))?,
        None => s.params.get("kappa").unwrap_or(1.0),
    };
    let q = primitive_field::<f64>(&form, &s.params, domain, n_r, n_z, anchor, q0, &PathSpec::default()).map_err(quad_err)?;
    let offset = map.offset.compile(&s.params).map_err(|e| CliError::Numeric(e.to_string()))?;
    let coeff = map.q_coeff.compile(&s.params).map_err(|e| CliError::Numeric(e.to_string()))?;
    let image = q.map(|pt, qv| Some(offset.eval(pt).ok()? + coeff.eval(pt).ok()? * qv));
    let fd = fd_residual_field("ansatz image, five-point stencil", &potential, &s.params, &image, FD_TOLERANCE);
    let mut out = json!({
        "mode": "darboux",
        "params": s.params,
        "seed_check": report_json(&seed_check),
        "new_potential": potential.to_string(),
        "solution": {
            "formula": "offset + q_coeff*Q",
            "offset": map.offset.to_string(),
            "q_coeff": map.q_coeff.to_string(),
            "q_form": { "a": form.a.to_string(), "b": form.b.to_string() },
            "q_anchor": { "r": anchor.r, "z": anchor.z, "value": q0 },
        },
        "grid": { "n_r": n_r, "n_z": n_z, "flagged": image.flagged_count() },
        "fd_residual": report_json(&fd),
    });
    if let Some(i) = known {
        let scale = IMAGE_SCALES[i - 1];
        let printed = cat.ytilde(i).expect("six images");
        let tape = printed.compile(&s.params).map_err(|e| CliError::Numeric(e.to_string()))?;
        let closed = Field::from_fn(domain, n_r, n_z, |pt| tape.eval(pt).ok().map(|v| scale * v));
        out["closed_form"] = json!({
            "entry": format!("ytilde.{i}"),
            "scale": scale,
            "expr": printed.bind(&binding).fold().to_string(),
            "max_abs_deviation": image.max_abs_diff(&closed),
        });
    }
    write_field(field_path, &image, s.format)?;
    emit_json(s, &out)?;
    if fd.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("grid solution residual {:e} exceeds {:e}", fd.max_scaled_residual, FD_TOLERANCE)))
    }
}

fn superpose(s: &Settings, y1: &str, y2: &str, u: &str, f: Option<&str>, f0: f64, field_path: Option<&Path>) -> Result<(), CliError> {
    let (y1, y2, u) = (s.expr("--y1", y1)?, s.expr("--y2", y2)?, s.expr("--u", u)?);
    let f = f.map(|t| s.expr("--f", t)).transpose()?;
    if !f0.is_finite() {
        return Err(CliError::Usage("--f0 must be finite".into()));
    }
    let domain = s.domain_or(Domain::standard());
    let spec = sample_spec(s, &domain);
    let mut inputs = Vec::new();
    for (flag, y) in [("--y1", &y1), ("--y2", &y2)] {
        match require_solution(flag, &u, y, &s.params, &spec) {
            Ok(rep) => inputs.push(report_json(&rep)),
            Err((rep, err)) => return refuse(s, rep, err),
        }
    }
    let form = superpose_form(&y1, &y2);
    let degenerate = form.a.is_zero() && form.b.is_zero();
    let mut out = json!({
        "params": s.params,
        "input_checks": inputs,
        "f_form": { "a": form.a.to_string(), "b": form.b.to_string() },
        "degenerate": degenerate,
    });
    let ok = match f {
        Some(f) => {
            let res = superpose_potential(&u, &y1, &y2, &f);
            let checks: Vec<ResidualReport> = res.identities().iter().map(|id| sample_identity(id, &s.params, &spec)).collect();
            let swap = swap_check(&u, &y1, &y2, &f, &s.params, &spec.clone().with_tolerance(s.tolerance.min(1e-10)));
            let ok = checks.iter().all(ResidualReport::passed) && swap.passed();
            out["f"] = json!(f.to_string());
            out["new_potential"] = json!(res.new_potential.to_string());
            out["solutions"] = json!([res.sol1.to_string(), res.sol2.to_string()]);
            out["checks"] = serde_json::to_value(&checks).expect("reports serialize");
            out["swap_check"] = report_json(&swap);
            out["record"] = serde_json::to_value(&res.record).expect("records serialize");
            ok
        }
        None => {
            let (n_r, n_z) = s.grid.unwrap_or(DEFAULT_GRID);
            let anchor = domain.center();
            let fv = primitive_field::<f64>(&form, &s.params, &domain, n_r, n_z, anchor, f0, &PathSpec::default()).map_err(quad_err)?;
            let coeffs = SuperposeCoefficients::new(&y1, &y2);
            let swapped = SuperposeCoefficients::new(&y2, &y1);
            let compile = |e: &Expr| e.compile(&s.params).map_err(|e| CliError::Numeric(e.to_string()));
            let (ut, c1, c2) = (compile(&u)?, compile(&coeffs.c1_sum())?, compile(&coeffs.c2_sum())?);
            let (d1, d2) = (compile(&swapped.c1_sum())?, compile(&swapped.c2_sum())?);
            let mut swap_gap = 0.0f64;
            let mut flagged = 0usize;
            for j in 0..n_z {
                for i in 0..n_r {
                    let Some(fval) = fv.get(i, j) else {
                        flagged += 1;
                        continue;
                    };
                    let pt = fv.point(i, j);
                    let at = |t: &axisym_darboux::expr::Tape| t.eval(pt).unwrap_or(f64::NAN);
                    let forward = at(&ut) + at(&c1) / fval + at(&c2) / (fval * fval);
                    let back = at(&ut) + at(&d1) / -fval + at(&d2) / (fval * fval);
                    let gap = (forward - back).abs();
                    if gap.is_finite() {
                        swap_gap = swap_gap.max(gap);
                    } else {
                        flagged += 1;
                    }
                }
            }
            out["f_anchor"] = json!({ "r": anchor.r, "z": anchor.z, "value": f0 });
            let text = if degenerate { u.to_string() } else { format!("{u} + ({})/F + ({})/F^2", coeffs.c1_sum(), coeffs.c2_sum()) };
            out["new_potential"] = json!(text);
            out["solutions"] = json!([format!("({y1})/F"), format!("({y2})/F")]);
            out["grid"] = json!({ "n_r": n_r, "n_z": n_z, "flagged": flagged });
            out["swap_check"] = json!({ "max_abs_difference": swap_gap, "tolerance": 1e-10 });
            write_field(field_path, &fv, s.format)?;
            swap_gap < 1e-10
        }
    };
    emit_json(s, &out)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Verification("superposition checks failed".into()))
    }
}

fn quadrature(
    s: &Settings,
    form: &OneForm,
    anchor: Option<Point<f64>>,
    anchor_value: f64,
    at: Option<Point<f64>>,
    path: &PathSpec,
) -> Result<(), CliError> {
    let domain = s.domain_or(Domain::standard());
    let anchor = anchor.unwrap_or_else(|| domain.center());
    let closed =
        sample_identity(&Identity::new("one-form is closed", form.compatibility_identity().terms), &s.params, &sample_spec(s, &domain));
    if !closed.passed() {
        emit_json(s, &json!({ "compatibility": report_json(&closed), "verdict": "fail" }))?;
        return Err(CliError::Verification(format!(
            "A_z - B_r does not vanish (max scaled residual {:e}); no path-independent primitive",
            closed.max_scaled_residual
        )));
    }
    match at {
        Some(target) => {
            let value = integrate_form::<f64>(form, &s.params, &domain, anchor, anchor_value, target, path).map_err(quad_err)?;
            json_only(s, "point quadrature")?;
            emit_json(
                s,
                &json!({
                    "value": value,
                    "target": target,
                    "anchor": { "r": anchor.r, "z": anchor.z, "value": anchor_value },
                    "path": path,
                    "compatibility": report_json(&closed),
                }),
            )
        }
        None => {
            let (n_r, n_z) = s.grid.unwrap_or(DEFAULT_GRID);
            let field = primitive_field::<f64>(form, &s.params, &domain, n_r, n_z, anchor, anchor_value, path).map_err(quad_err)?;
            match s.format {
                Format::Json => emit_json(s, &json!({ "compatibility": report_json(&closed), "path": path, "field": field.to_json() })),
                f => write_to(s.out.as_deref(), &field_bytes(&field, f)),
            }
        }
    }
}

fn scan(s: &Settings, text: &str) -> Result<(), CliError> {
    let e = s.expr("--expr", text)?;
    let domain = s.domain_or(scan_domain());
    let (n_r, n_z) = s.grid.unwrap_or((301, 301));
    let rep = singularity_scan(text, &e, &s.params, &domain, n_r, n_z);
    eprintln!("{} sign-change cells, {} non-finite nodes", rep.sign_change_cells.len(), rep.non_finite_nodes.len());
    match s.format {
        Format::Json => emit_json(s, &json!({ "clean": rep.is_clean(), "report": rep })),
        Format::Csv => {
            let mut out = String::from("i,j,r_lo,r_hi,z_lo,z_hi\n");
            for c in &rep.sign_change_cells {
                out.push_str(&format!("{},{},{},{},{},{}\n", c.i, c.j, c.r_lo, c.r_hi, c.z_lo, c.z_hi));
            }
            write_to(s.out.as_deref(), out.as_bytes())
        }
        Format::Matrix => Err(CliError::Usage("scan writes json or csv".into())),
    }
}

fn export(s: &Settings, text: &str) -> Result<(), CliError> {
    let e = s.expr("--expr", text)?;
    let domain = s.domain_or(Domain::standard());
    let (n_r, n_z) = s.grid.unwrap_or(DEFAULT_GRID);
    let field = Field::<f64>::sample(&e, &s.params, &domain, n_r, n_z).map_err(|e| CliError::Numeric(e.to_string()))?;
    write_to(s.out.as_deref(), &field_bytes(&field, s.format))
}
