//! One line per acceptance criterion. Runs without the libtest harness so
//! the lines reach the terminal; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;

use axisym_darboux::axisym::h0;
use axisym_darboux::catalog::{ansatz_grid, twofold_grid, Catalog, C_GRID};
use axisym_darboux::darboux::{
    darboux_map, helmholtz_potential, potential_chain_identity, q_seed_form, s0_bound, s_system_residuals, AnsatzParams,
};
use axisym_darboux::expr::parse;
use axisym_darboux::moutard::{superpose_form, superpose_potential, swap_check};
use axisym_darboux::quadrature::{integrate_form, primitive_field, Panels, PathVariant};
use axisym_darboux::verify::suite::{
    run_catalog_suite, scan_domain, SuiteConfig, CONTROL_THRESHOLD, PATH_TOLERANCE, RING_HALF_WIDTH, SCAN_NODES, SWAP_TOLERANCE,
};
use axisym_darboux::verify::{
    fd_convergence_factor, fd_derivative_check, fd_residual_field, residual_report, sample_identity, sample_points, singularity_scan,
    ResidualReport, SampleSpec, DEFAULT_SEED, DERIVATIVE_TOLERANCE, FD_TOLERANCE, SYMBOLIC_TOLERANCE,
};
use axisym_darboux::{Domain, Expr, Field, Identity, OneForm, Params, PathSpec, Point};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F_GRID_TOLERANCE: f64 = 1e-6;
const PANEL_GAIN: f64 = 10.0;
const RANDOM_EXPRESSIONS: u32 = 1000;

type Criterion = Box<dyn Fn() -> (bool, String)>;

/// Worst value seen and whether every check held.
struct Tally {
    worst: f64,
    ok: bool,
}

impl Tally {
    fn new() -> Self {
        Tally { worst: 0.0, ok: true }
    }

    fn below(&mut self, rep: &ResidualReport) {
        self.worst = self.worst.max(rep.max_scaled_residual);
        self.ok &= rep.passed();
    }

    fn value_below(&mut self, v: f64, threshold: f64) {
        self.worst = self.worst.max(v);
        self.ok &= v.is_finite() && v < threshold;
    }
}

fn spec_for(p: &Params) -> SampleSpec {
    let mut d = Domain::standard();
    if let (Ok(c), Ok(c1)) = (p.get("C"), p.get("C1")) {
        d.exclusions.extend(AnsatzParams { c, c1 }.s0_exclusion(RING_HALF_WIDTH));
    }
    SampleSpec::default().with_domain(d)
}

fn closed_forms(cat: &Catalog) -> Vec<(String, OneForm, Expr, Params)> {
    let mut out = Vec::new();
    for i in 1..=6 {
        let seed = cat.seed(i).unwrap();
        out.push((format!("q.{i}"), q_seed_form(seed), cat.q_primitive(i).unwrap().clone(), Params::new().with("kappa", 1.0)));
    }
    for n in 1..=2 {
        let ex = cat.twofold_example(n).unwrap();
        out.push((format!("twofold{n}.F"), superpose_form(&ex.y1, &ex.y2), ex.f, Params::new().with("C", 1.0).with("K", 15.0)));
    }
    out
}

fn catalog_residuals(cat: &Catalog) -> (bool, String) {
    let mut sols = Tally::new();
    for seed in cat.seeds() {
        sols.below(&residual_report(&Expr::zero(), &seed, &Params::new(), &SampleSpec::default()));
    }
    let u = helmholtz_potential();
    for a in ansatz_grid() {
        let p = a.params();
        for i in 1..=6 {
            sols.below(&residual_report(&u, cat.ytilde(i).unwrap(), &p, &spec_for(&p)));
        }
    }
    let r_control = residual_report(&Expr::zero(), &Expr::r(), &Params::new(), &SampleSpec::default()).max_scaled_residual;
    let wrong_c = Params::new().with("C", 2.0).with("C1", 1.0);
    let y1 = cat.ytilde_bound(1, AnsatzParams { c: 1.0, c1: 1.0 }).unwrap();
    let c_control = residual_report(&u, &y1, &wrong_c, &spec_for(&wrong_c)).max_scaled_residual;
    let controls = r_control > CONTROL_THRESHOLD && c_control > CONTROL_THRESHOLD;
    (
        sols.ok && controls,
        format!(
            "6 seeds and 6 images x 9 (C, C1): max {:.2e} < {SYMBOLIC_TOLERANCE:e}; controls y=r {r_control:.3}, wrong C {c_control:.3} > {CONTROL_THRESHOLD:e}",
            sols.worst
        ),
    )
}

fn ansatz_system() -> (bool, String) {
    let mut t = Tally::new();
    for a in ansatz_grid() {
        let p = a.params();
        for id in s_system_residuals(&s0_bound(a), &h0()).unwrap() {
            t.below(&sample_identity(&id, &p, &spec_for(&p)));
        }
    }
    let probe = parse("ln(1 + r^2 + z^2)").unwrap();
    let [first, second] = s_system_residuals(&probe, &h0()).unwrap();
    let spec = SampleSpec::default();
    let p1 = sample_identity(&first, &Params::new(), &spec);
    let p2 = sample_identity(&second, &Params::new(), &spec);
    let probe_ok = p1.passed() && p2.max_scaled_residual > CONTROL_THRESHOLD;
    (
        t.ok && probe_ok,
        format!(
            "s0 over 9 (C, C1): max {:.2e}; probe ln(1+rho^2) first {:.2e}, second {:.3}",
            t.worst, p1.max_scaled_residual, p2.max_scaled_residual
        ),
    )
}

fn potential_chain(cat: &Catalog) -> (bool, String) {
    let mut t = Tally::new();
    let chain = potential_chain_identity();
    for a in ansatz_grid() {
        let p = a.params();
        t.below(&sample_identity(&chain, &p, &spec_for(&p)));
    }
    let mut c1 = Tally::new();
    let special = cat.expr("potential.ansatz.c1").unwrap();
    for &c in &C_GRID {
        let p = Params::new().with("C", c).with("C1", 1.0);
        let id = Identity::equality("C1 = 1 instance", &helmholtz_potential(), special);
        c1.below(&sample_identity(&id, &p, &spec_for(&p)));
    }
    (t.ok && c1.ok, format!("chain over 9 (C, C1): max {:.2e}; C1 = 1 instance over 3 C: max {:.2e}", t.worst, c1.worst))
}

fn superposition(cat: &Catalog) -> (bool, String) {
    let domain = Domain::standard();
    let anchor = domain.center();
    let mut grid = Tally::new();
    let mut pot = Tally::new();
    let mut sols = Tally::new();
    for n in 1..=2 {
        let ex = cat.twofold_example(n).unwrap();
        let form = superpose_form(&ex.y1, &ex.y2);
        let res = superpose_potential(&ex.u, &ex.y1, &ex.y2, &ex.f);
        for p in twofold_grid() {
            let f0 = ex.f.eval(&p, anchor).unwrap();
            let q = primitive_field::<f64>(&form, &p, &domain, 101, 101, anchor, f0, &PathSpec::default()).unwrap();
            let closed = Field::<f64>::sample(&ex.f, &p, &domain, 101, 101).unwrap();
            grid.value_below(q.max_abs_diff(&closed), F_GRID_TOLERANCE);
            grid.ok &= q.flagged_count() == 0;
            let spec = spec_for(&p);
            let id = Identity::equality("stated potential", &res.new_potential, &ex.new_potential);
            pot.below(&sample_identity(&id, &p, &spec));
            for y in [&res.sol1, &res.sol2] {
                sols.below(&residual_report(&res.new_potential, y, &p, &spec));
            }
        }
    }
    (
        grid.ok && pot.ok && sols.ok,
        format!(
            "2 examples x 6 (C, K): F grid {:.2e} < {F_GRID_TOLERANCE:e}; potentials {:.2e}; Y/F residuals {:.2e}",
            grid.worst, pot.worst, sols.worst
        ),
    )
}

fn commutativity(cat: &Catalog) -> (bool, String) {
    let mut t = Tally::new();
    for n in 1..=2 {
        let ex = cat.twofold_example(n).unwrap();
        for p in twofold_grid() {
            let spec = spec_for(&p).with_tolerance(SWAP_TOLERANCE);
            t.below(&swap_check(&ex.u, &ex.y1, &ex.y2, &ex.f, &p, &spec));
        }
    }
    (t.ok, format!("2 examples x 6 (C, K): max swap difference {:.2e} < {SWAP_TOLERANCE:e}", t.worst))
}

fn quadrature(cat: &Catalog) -> (bool, String) {
    let domain = Domain::standard();
    let anchor = domain.center();
    let (targets, _) = sample_points(&domain, 16, DEFAULT_SEED);
    let mut paths = Tally::new();
    let mut gauge = Tally::new();
    for (_, form, primitive, p) in closed_forms(cat) {
        let f0 = primitive.eval(&p, anchor).unwrap();
        for &t in &targets {
            let along = |variant, v: f64| {
                integrate_form::<f64>(&form, &p, &domain, anchor, v, t, &PathSpec::default().with_variant(variant)).unwrap()
            };
            let (a, b) = (along(PathVariant::RThenZ, f0), along(PathVariant::ZThenR, f0));
            paths.value_below((a - b).abs() / (1.0 + a.abs()), PATH_TOLERANCE);
            let shift = 37.25;
            let shifted = along(PathVariant::RThenZ, f0 + shift);
            gauge.value_below(((shifted - a) - shift).abs() / (1.0 + a.abs() + shift), 1e-13);
        }
    }
    let form = q_seed_form(cat.seed(1).unwrap());
    let exact = parse("z/sqrt(r^2 + z^2)").unwrap();
    let error = |panels: usize| {
        let spec = PathSpec { variant: PathVariant::RThenZ, panels: Panels::PerSegment(panels), nodes: 4 };
        let e0 = exact.eval(&Params::new(), anchor).unwrap();
        targets
            .iter()
            .map(|&t| {
                let v: f64 = integrate_form(&form, &Params::new(), &domain, anchor, e0, t, &spec).unwrap();
                (v - exact.eval(&Params::new(), t).unwrap()).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let (coarse, fine) = (error(4), error(8));
    let gain = coarse / fine;
    (
        paths.ok && gauge.ok && gain >= PANEL_GAIN,
        format!(
            "8 closed forms x 16 targets: path gap {:.2e} < {PATH_TOLERANCE:e}; gauge shift {:.2e}; z/rho panel doubling {coarse:.2e} -> {fine:.2e} ({gain:.0}x)",
            paths.worst, gauge.worst
        ),
    )
}

fn image_field(cat: &Catalog, i: usize, domain: &Domain, n: usize) -> Field<f64> {
    let p = Params::new().with("C", 1.0).with("C1", 1.0).with("kappa", 1.0);
    let y = cat.seed(i).unwrap();
    let anchor = domain.center();
    let q0 = cat.q_primitive(i).unwrap().eval(&p, anchor).unwrap();
    let q = primitive_field::<f64>(&q_seed_form(y), &p, domain, n, n, anchor, q0, &PathSpec::default()).unwrap();
    let map = darboux_map(y);
    let (offset, coeff) = (map.offset.compile(&p).unwrap(), map.q_coeff.compile(&p).unwrap());
    q.map(|pt, qv| Some(offset.eval(pt).ok()? + coeff.eval(pt).ok()? * qv))
}

fn pipeline(cat: &Catalog) -> (bool, String) {
    let domain = Domain::new(0.5, 2.5, -1.0, 1.0).unwrap();
    let p = Params::new().with("C", 1.0).with("C1", 1.0);
    let u = helmholtz_potential();
    let mut fd = Tally::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ok = true;
    for i in 1..=6 {
        let fine = image_field(cat, i, &domain, 201);
        let coarse = image_field(cat, i, &domain, 101);
        let rep = fd_residual_field("grid image", &u, &p, &fine, FD_TOLERANCE);
        fd.below(&rep);
        ok &= rep.skipped == 0;
        let factor = fd_convergence_factor(&u, &p, &coarse, &fine).unwrap_or(f64::NAN);
        lo = lo.min(factor);
        hi = hi.max(factor);
        ok &= (3.5..=4.5).contains(&factor);
    }
    (
        ok && fd.ok,
        format!(
            "6 seeds on [0.5, 2.5] x [-1, 1] at spacing 0.01: FD residual {:.2e} < {FD_TOLERANCE:e}; convergence {lo:.2}..{hi:.2}",
            fd.worst
        ),
    )
}

fn singularities(cat: &Catalog) -> (bool, String) {
    let domain = scan_domain();
    let den = cat.expr("twofold2.denominator").unwrap();
    let mut clean = true;
    for k in [15.0, 20.0] {
        let p = Params::new().with("C", 1.0).with("K", k);
        clean &= singularity_scan("denominator", den, &p, &domain, SCAN_NODES, SCAN_NODES).is_clean();
    }
    let root = Point::new((5.0 - 20f64.sqrt()).sqrt(), 0.0);
    let p = Params::new().with("C", 1.0).with("K", 5.0);
    let rep = singularity_scan("denominator", den, &p, &domain, SCAN_NODES, SCAN_NODES);
    let found = rep.sign_change_cells.iter().any(|c| c.contains(root));
    let u = helmholtz_potential();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut pairs: Vec<(f64, f64)> = ansatz_grid().iter().map(|a| (a.c, a.c1)).collect();
    pairs.extend((0..8).map(|_| (rng.random_range(0.05..5.0), rng.random_range(1.0..4.0))));
    let mut max = f64::NEG_INFINITY;
    let mut finite = true;
    for &(c, c1) in &pairs {
        let p = Params::new().with("C", c).with("C1", c1);
        let rep = singularity_scan("potential", &u, &p, &domain, SCAN_NODES, SCAN_NODES);
        finite &= rep.non_finite_nodes.is_empty();
        max = max.max(rep.max.unwrap_or(f64::NAN));
    }
    (
        clean && found && finite && max <= 0.0,
        format!(
            "denominator clean at K = 15, 20: {clean}; sign change in the cell of r = {:.4} at K = 5: {found}; potential over {} (C, C1): finite {finite}, max {max:.2e}",
            root.r,
            pairs.len()
        ),
    )
}

fn expression_core() -> (bool, String) {
    let config = Config { cases: RANDOM_EXPRESSIONS, failure_persistence: None, ..Config::default() };
    let domain = Domain::new(0.3, 3.0, -3.0, 3.0).unwrap();
    let rng = || TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(config.clone(), rng());
    let diff = runner.run(&(common::smooth_expr(6), proptest::num::u64::ANY), |(e, seed)| {
        let spec = SampleSpec::default().with_domain(domain.clone()).with_points(4).with_seed(seed).with_tolerance(DERIVATIVE_TOLERANCE);
        let rep = fd_derivative_check(&e, &Params::new(), &spec);
        proptest::prop_assert!(rep.passed(), "{}: {:e}", e, rep.max_scaled_residual);
        Ok(())
    });
    let mut runner = TestRunner::new_with_rng(config, rng());
    let round = runner.run(&common::any_expr(6), |e| {
        let text = e.to_string();
        let back = parse(&text).map_err(|err| proptest::test_runner::TestCaseError::fail(err.to_string()))?;
        proptest::prop_assert_eq!(&back, &e);
        proptest::prop_assert_eq!(back.to_string(), text);
        Ok(())
    });
    (
        diff.is_ok() && round.is_ok(),
        format!(
            "{RANDOM_EXPRESSIONS} random expressions diff vs FD at {DERIVATIVE_TOLERANCE:e}: {}; {RANDOM_EXPRESSIONS} print/parse round trips: {}",
            describe(&diff),
            describe(&round)
        ),
    )
}

fn describe<E: std::fmt::Display>(r: &Result<(), E>) -> String {
    match r {
        Ok(()) => "pass".to_string(),
        Err(e) => e.to_string(),
    }
}

fn determinism(cat: &Catalog) -> (bool, String) {
    let a = run_catalog_suite(cat, SuiteConfig::default());
    let b = run_catalog_suite(cat, SuiteConfig::default());
    let (ja, jb) = (a.to_ndjson(), b.to_ndjson());
    (
        ja == jb && a.passed(),
        format!(
            "two suite runs at seed {DEFAULT_SEED}: {} bytes, identical {}, {} checks all pass {}",
            ja.len(),
            ja == jb,
            a.checks.len(),
            a.passed()
        ),
    )
}

fn main() -> ExitCode {
    let cat = Catalog::builtin();
    let criteria: [(&str, Criterion); 10] = [
        ("catalog residual suite", Box::new(|| catalog_residuals(cat))),
        ("ansatz verification", Box::new(ansatz_system)),
        ("potential identity chain", Box::new(|| potential_chain(cat))),
        ("superposition reproduction", Box::new(|| superposition(cat))),
        ("commutativity", Box::new(|| commutativity(cat))),
        ("quadrature correctness", Box::new(|| quadrature(cat))),
        ("nonlocal pipeline", Box::new(|| pipeline(cat))),
        ("singularity conditions", Box::new(|| singularities(cat))),
        ("expression core soundness", Box::new(expression_core)),
        ("determinism", Box::new(|| determinism(cat))),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!("AC{} {}: {name}: {detail}", n + 1, if ok { "PASS" } else { "FAIL" });
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
