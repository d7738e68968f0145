//! The catalog suite: every closed form in the catalog checked against what
//! it claims, plus negative controls, quadrature path independence and
//! singularity scans.
//!
//! Checks run in a fixed order and each sampled check uses the suite seed,
//! so the serialized report depends only on the configuration.

use serde::{Deserialize, Serialize};

use super::{sample_identity, sample_points, singularity_scan, ResidualReport, SampleSpec, Verdict, DEFAULT_SEED, SYMBOLIC_TOLERANCE};
use crate::axisym::{h0, potential_from_h_terms, schrodinger_identity};
use crate::catalog::{ansatz_grid, twofold_grid, Catalog, CatalogEntry, EntryKind, Target, C1_GRID, C_GRID, K_OVER_C_GRID};
use crate::darboux::{darboux_solution, helmholtz_potential, potential_chain_identity, q_seed_form, s_system_residuals, AnsatzParams};
use crate::expr::parse;
use crate::moutard::{superpose_form, superpose_potential, swap_check};
use crate::quadrature::{integrate_form, PathVariant};
use crate::{Domain, Expr, Identity, OneForm, Params, PathSpec, Point};

/// Pointwise tolerance for swapping the two superposed solutions.
pub const SWAP_TOLERANCE: f64 = 1e-10;
/// Relative tolerance between quadrature paths and closed primitives.
pub const PATH_TOLERANCE: f64 = 1e-9;
/// Negative controls must exceed this.
pub const CONTROL_THRESHOLD: f64 = 1e-4;
/// Ring half-width around the zero locus of the ansatz exponent.
pub const RING_HALF_WIDTH: f64 = 0.05;
/// Scan grid for the nonsingularity conditions.
pub const SCAN_NODES: usize = 301;
const PATH_TARGETS: usize = 16;

/// Scale factors relating the ansatz image of seed `i` built from the
/// catalog primitive `q.i` (gauge `kappa = 1`) to the printed solution.
pub const IMAGE_SCALES: [f64; 6] = [0.5, 0.5, -1.0, 0.5, -0.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n_points: usize,
    /// Threshold for symbolic identities; the swap and path tiers use the
    /// smaller of this and their own.
    pub tolerance: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: DEFAULT_SEED, n_points: 200, tolerance: SYMBOLIC_TOLERANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    /// Pass iff `value < threshold` and every evaluation was finite.
    Below,
    /// Negative control: pass iff `value > threshold`.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub group: String,
    pub name: String,
    pub params: Params,
    pub expect: Expect,
    pub value: f64,
    pub threshold: f64,
    pub non_finite: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Point<f64>>,
    pub verdict: Verdict,
}

impl CheckResult {
    pub fn new(
        group: &str,
        name: impl Into<String>,
        params: &Params,
        expect: Expect,
        value: f64,
        threshold: f64,
        non_finite: usize,
    ) -> Self {
        let pass = match expect {
            Expect::Below => non_finite == 0 && value < threshold,
            Expect::Above => value > threshold,
        };
        CheckResult {
            group: group.to_string(),
            name: name.into(),
            params: params.clone(),
            expect,
            value,
            threshold,
            non_finite,
            worst_point: None,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        }
    }

    fn from_report(group: &str, name: impl Into<String>, rep: &ResidualReport, expect: Expect, threshold: f64) -> Self {
        // a sample set with nothing finite carries no evidence either way
        let value = if rep.n_points > rep.non_finite_count { rep.max_scaled_residual } else { f64::NAN };
        let mut c = CheckResult::new(group, name, &rep.params, expect, value, threshold, rep.non_finite_count);
        if value.is_nan() {
            c.verdict = Verdict::Fail;
        }
        c.worst_point = rep.worst_point;
        c
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub seed: u64,
    pub n_points: usize,
    pub tolerance: f64,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// A failing check that hit non-finite values, as opposed to one that
    /// merely missed its tolerance.
    pub fn blew_up(&self) -> bool {
        self.failures().any(|c| c.non_finite > 0 || !c.value.is_finite())
    }

    pub fn summary(&self) -> SuiteSummary {
        let passed = self.checks.iter().filter(|c| c.passed()).count();
        SuiteSummary {
            seed: self.config.seed,
            n_points: self.config.n_points,
            tolerance: self.config.tolerance,
            total: self.checks.len(),
            passed,
            failed: self.checks.len() - passed,
            verdict: if self.passed() { Verdict::Pass } else { Verdict::Fail },
        }
    }

    /// One JSON object per check, then the summary, newline separated.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&serde_json::to_string(c).expect("check serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary()).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn group(&self, name: &str) -> impl Iterator<Item = &CheckResult> {
        let name = name.to_string();
        self.checks.iter().filter(move |c| c.group == name)
    }
}

struct Runner<'a> {
    cat: &'a Catalog,
    cfg: SuiteConfig,
    checks: Vec<CheckResult>,
}

/// Standard domain, with the ring around the exponent's zero locus removed
/// whenever both ansatz parameters are bound.
fn domain_for(params: &Params) -> Domain {
    let mut d = Domain::standard();
    if let (Ok(c), Ok(c1)) = (params.get("C"), params.get("C1")) {
        d.exclusions.extend(AnsatzParams { c, c1 }.s0_exclusion(RING_HALF_WIDTH));
    }
    d
}

/// Cartesian grid over the named parameters; `K` scales with `C`.
fn grid_for(names: &[String]) -> Vec<Params> {
    let mut grid = vec![Params::new()];
    let has = |n: &str| names.iter().any(|x| x == n);
    let expand = |grid: Vec<Params>, name: &str, values: &[f64]| -> Vec<Params> {
        grid.into_iter().flat_map(|p| values.iter().map(move |&v| p.clone().with(name, v))).collect()
    };
    if has("C") {
        grid = expand(grid, "C", &C_GRID);
    }
    if has("C1") {
        grid = expand(grid, "C1", &C1_GRID);
    }
    if has("K") {
        grid = grid
            .into_iter()
            .flat_map(|p| {
                let c = p.get("C").unwrap_or(1.0);
                K_OVER_C_GRID.iter().map(move |&k| p.clone().with("K", k * c))
            })
            .collect();
    }
    if has("kappa") {
        grid = expand(grid, "kappa", &[1.0, -0.75]);
    }
    grid
}

fn describe(params: &Params) -> String {
    let items: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if items.is_empty() {
        String::new()
    } else {
        format!(" [{}]", items.join(", "))
    }
}

impl Runner<'_> {
    fn spec(&self, params: &Params) -> SampleSpec {
        SampleSpec { domain: domain_for(params), n_points: self.cfg.n_points, seed: self.cfg.seed, tolerance: self.cfg.tolerance }
    }

    fn identity(&mut self, group: &str, id: &Identity, params: &Params) {
        let rep = sample_identity(id, params, &self.spec(params));
        let name = format!("{}{}", id.label, describe(params));
        self.checks.push(CheckResult::from_report(group, name, &rep, Expect::Below, self.cfg.tolerance));
    }

    fn control(&mut self, group: &str, id: &Identity, params: &Params) {
        let rep = sample_identity(id, params, &self.spec(params).with_tolerance(CONTROL_THRESHOLD));
        let name = format!("{}{}", id.label, describe(params));
        self.checks.push(CheckResult::from_report(group, name, &rep, Expect::Above, CONTROL_THRESHOLD));
    }

    fn entry_params(&self, entry: &CatalogEntry, target: Option<&CatalogEntry>) -> Vec<Params> {
        let mut names = entry.required_params.clone();
        if let Some(t) = target {
            names.extend(t.required_params.iter().filter(|n| t.fixed.get(n).is_err() && entry.fixed.get(n).is_err()).cloned());
        }
        let fixed = target.map(|t| t.fixed.merged(&entry.fixed)).unwrap_or_else(|| entry.fixed.clone());
        grid_for(&names).into_iter().map(|p| p.merged(&fixed)).collect()
    }

    fn entries(&mut self) {
        let cat = self.cat;
        for entry in cat.entries() {
            let label = |what: &str| format!("{}: {what}", entry.id);
            match (entry.kind, &entry.target) {
                (EntryKind::SeedSolution, _) => {
                    let id = schrodinger_identity(label("solves the free equation"), &Expr::zero(), &entry.expr);
                    self.identity("seeds", &id, &Params::new());
                }
                (EntryKind::Solution, Some(Target::Entry(t))) => {
                    let pot = cat.get(t).expect("targets are validated on load");
                    let id = schrodinger_identity(label(&format!("solves {t}")), &pot.expr, &entry.expr);
                    for p in self.entry_params(entry, Some(pot)) {
                        self.identity("solutions", &id, &p);
                    }
                }
                (EntryKind::Potential, Some(Target::Entry(t))) => {
                    let other = cat.get(t).expect("targets are validated on load");
                    let id = match (&other.kind, &other.target) {
                        (EntryKind::Potential, _) => Identity::equality(label(&format!("equals {t}")), &entry.expr, &other.expr),
                        (EntryKind::OneFormPrimitive, Some(Target::Superpose(a, b))) => {
                            let (ya, yb) = (cat.expr(a).expect("validated"), cat.expr(b).expect("validated"));
                            let u = match &cat.get(a).expect("validated").target {
                                Some(Target::Entry(pot)) => cat.expr(pot).expect("validated"),
                                _ => continue,
                            };
                            let built = superpose_potential(u, ya, yb, &other.expr).new_potential;
                            Identity::equality(label(&format!("is the superposition built from {t}")), &entry.expr, &built)
                        }
                        _ => continue,
                    };
                    for p in self.entry_params(entry, Some(other)) {
                        self.identity("potentials", &id, &p);
                    }
                }
                (EntryKind::Exponent, Some(Target::Entry(t))) => {
                    let other = cat.get(t).expect("targets are validated on load");
                    match other.kind {
                        EntryKind::Potential => {
                            let id = Identity::expanded(label(&format!("generates {t}")), potential_from_h_terms(&entry.expr), &other.expr);
                            for p in self.entry_params(entry, Some(other)) {
                                self.identity("exponents", &id, &p);
                            }
                        }
                        EntryKind::Exponent => {
                            let ids = s_system_residuals(&entry.expr, &other.expr).expect("admissible increment");
                            for (k, id) in ids.iter().enumerate() {
                                let id = Identity::new(label(&format!("admissibility equation {} over {t}", k + 1)), id.terms.clone());
                                for p in self.entry_params(entry, Some(other)) {
                                    self.identity("admissibility", &id, &p);
                                }
                            }
                        }
                        _ => {}
                    }
                }
                (EntryKind::OneFormPrimitive, Some(target)) => {
                    let (form, context): (OneForm, Option<&CatalogEntry>) = match target {
                        Target::QSeed(y) => (q_seed_form(cat.expr(y).expect("validated")), None),
                        Target::Superpose(a, b) => {
                            let (ya, yb) = (cat.get(a).expect("validated"), cat.get(b).expect("validated"));
                            (superpose_form(&ya.expr, &yb.expr), Some(ya))
                        }
                        Target::Entry(_) => continue,
                    };
                    let grid = match context {
                        Some(y) => {
                            let pot = match &y.target {
                                Some(Target::Entry(t)) => cat.get(t).ok(),
                                _ => None,
                            };
                            let mut names = entry.required_params.clone();
                            names.extend(y.required_params.iter().cloned());
                            names.sort();
                            names.dedup();
                            let fixed = pot.map(|p| p.fixed.clone()).unwrap_or_default();
                            grid_for(&names).into_iter().map(|p| p.merged(&fixed)).collect()
                        }
                        None => self.entry_params(entry, None),
                    };
                    let closed = Identity::new(label("form is closed"), form.compatibility_identity().terms);
                    let [pr, pz] = form.primitive_identities(&entry.expr);
                    let pr = Identity::new(label("r-derivative matches the form"), pr.terms);
                    let pz = Identity::new(label("z-derivative matches the form"), pz.terms);
                    for p in grid {
                        self.identity("one-forms", &closed, &p);
                        self.identity("one-forms", &pr, &p);
                        self.identity("one-forms", &pz, &p);
                    }
                }
                _ => {}
            }
        }
    }

    fn controls(&mut self) {
        let none = Params::new();
        self.control("controls", &schrodinger_identity("r does not solve the free equation", &Expr::zero(), &Expr::r()), &none);
        let y1 = self.cat.ytilde(1).expect("catalog has six images");
        let wrong = helmholtz_potential().bind(&Params::new().with("C", 2.0)).fold();
        let id = schrodinger_identity("first image with C = 1 does not solve the C = 2 potential", &wrong, y1);
        self.control("controls", &id, &Params::new().with("C", 1.0).with("C1", 1.0));
        let probe = parse("ln(1 + r^2 + z^2)").expect("probe parses");
        let [first, second] = s_system_residuals(&probe, &h0()).expect("probe is admissible");
        self.identity("controls", &Identity::new("radial probe satisfies the first admissibility equation", first.terms), &none);
        self.control("controls", &Identity::new("radial probe violates the second admissibility equation", second.terms), &none);
        let printed = self.cat.twofold_example(1).expect("example 1 present");
        let [pr, _] = superpose_form(&printed.y1, &printed.y2).primitive_identities(&printed.f_printed);
        let id = Identity::new("printed F of example 1 is not a primitive as printed", pr.terms);
        self.control("controls", &id, &Params::new().with("C", 1.0).with("K", 15.0));
    }

    fn chain(&mut self) {
        let id = potential_chain_identity();
        for a in ansatz_grid() {
            self.identity("chain", &id, &a.params());
        }
        let c1 = self.cat.expr("potential.ansatz.c1").expect("present");
        let general = helmholtz_potential().bind(&Params::new().with("C1", 1.0)).fold();
        let id = Identity::equality("general potential at C1 = 1 equals the twofold initial potential", &general, c1);
        for c in C_GRID {
            self.identity("chain", &id, &Params::new().with("C", c));
        }
    }

    fn images(&mut self) {
        let u = helmholtz_potential();
        for i in 1..=6 {
            let seed = self.cat.seed(i).expect("six seeds");
            let q = self.cat.q_primitive(i).expect("six primitives");
            let built = darboux_solution(seed, q);
            let printed = self.cat.ytilde(i).expect("six images");
            let scaled = (Expr::from_f64(IMAGE_SCALES[i - 1]).expect("finite") * printed).fold();
            let same = Identity::equality(format!("image of seed.{i} from q.{i} is {} ytilde.{i}", IMAGE_SCALES[i - 1]), &built, &scaled);
            let solves = schrodinger_identity(format!("image of seed.{i} from q.{i} solves the ansatz potential"), &u, &built);
            for a in ansatz_grid() {
                let p = a.params().with("kappa", 1.0);
                self.identity("images", &same, &p);
                self.identity("images", &solves, &p);
            }
        }
    }

    fn twofold(&mut self) {
        for n in 1..=2 {
            let ex = self.cat.twofold_example(n).expect("two examples");
            let res = superpose_potential(&ex.u, &ex.y1, &ex.y2, &ex.f);
            let ids: Vec<Identity> =
                res.identities().into_iter().map(|id| Identity::new(format!("example {n}: {}", id.label), id.terms)).collect();
            let swap_tol = self.cfg.tolerance.min(SWAP_TOLERANCE);
            for p in twofold_grid() {
                for id in &ids {
                    self.identity("twofold", id, &p);
                }
                let rep = swap_check(&ex.u, &ex.y1, &ex.y2, &ex.f, &p, &self.spec(&p).with_tolerance(swap_tol));
                let name = format!("example {n}: swapping the pair and negating F changes nothing{}", describe(&p));
                self.checks.push(CheckResult::from_report("twofold", name, &rep, Expect::Below, swap_tol));
            }
        }
    }

    /// Closed forms of the catalog, their closed primitives, and the parameters used.
    fn closed_forms(&self) -> Vec<(String, OneForm, Expr, Params)> {
        let mut out = Vec::new();
        let kappa = Params::new().with("kappa", 1.0);
        for i in 1..=6 {
            let seed = self.cat.seed(i).expect("six seeds");
            out.push((format!("q.{i}"), q_seed_form(seed), self.cat.q_primitive(i).expect("present").clone(), kappa.clone()));
        }
        for n in 1..=2 {
            let ex = self.cat.twofold_example(n).expect("two examples");
            let p = Params::new().with("C", 1.0).with("K", 15.0);
            out.push((format!("twofold{n}.F"), superpose_form(&ex.y1, &ex.y2), ex.f, p));
        }
        out
    }

    fn paths(&mut self) {
        let domain = Domain::standard();
        let anchor = domain.center();
        let (targets, _) = sample_points(&domain, PATH_TARGETS, self.cfg.seed);
        let tol = self.cfg.tolerance.min(PATH_TOLERANCE);
        for (name, form, primitive, params) in self.closed_forms() {
            let f0 = primitive.eval(&params, anchor).unwrap_or(f64::NAN);
            let mut path_gap = 0.0f64;
            let mut closed_gap = 0.0f64;
            let mut bad = 0usize;
            for &t in &targets {
                let along =
                    |variant| integrate_form::<f64>(&form, &params, &domain, anchor, f0, t, &PathSpec::default().with_variant(variant));
                match (along(PathVariant::RThenZ), along(PathVariant::ZThenR), primitive.eval(&params, t)) {
                    (Ok(a), Ok(b), Ok(exact)) if a.is_finite() && b.is_finite() => {
                        path_gap = path_gap.max((a - b).abs() / (1.0 + a.abs()));
                        closed_gap = closed_gap.max((a - exact).abs() / (1.0 + exact.abs()));
                    }
                    _ => bad += 1,
                }
            }
            let label = format!("{name}: r-then-z and z-then-r paths agree{}", describe(&params));
            self.checks.push(CheckResult::new("quadrature", label, &params, Expect::Below, path_gap, tol, bad));
            let label = format!("{name}: quadrature reproduces the closed primitive{}", describe(&params));
            self.checks.push(CheckResult::new("quadrature", label, &params, Expect::Below, closed_gap, tol, bad));
        }
    }

    fn scans(&mut self) {
        let domain = scan_domain();
        let den = self.cat.expr("twofold2.denominator").expect("present").clone();
        for p in twofold_grid() {
            let rep = singularity_scan("twofold2.denominator", &den, &p, &domain, SCAN_NODES, SCAN_NODES);
            let value = rep.sign_change_cells.len() as f64;
            let name = format!("twofold2.denominator keeps its sign{}", describe(&p));
            self.checks.push(CheckResult::new("scans", name, &p, Expect::Below, value, 1.0, rep.non_finite_nodes.len()));
        }
        let p = Params::new().with("C", 1.0).with("K", 5.0);
        let rep = singularity_scan("twofold2.denominator", &den, &p, &domain, SCAN_NODES, SCAN_NODES);
        let root = Point::new((5.0 - 20f64.sqrt()).sqrt(), 0.0);
        let hits = rep.sign_change_cells.iter().filter(|c| c.contains(root)).count() as f64;
        let name = format!("twofold2.denominator changes sign near r = {root_r:.4}, z = 0 below K = 15 C{}", describe(&p), root_r = root.r);
        self.checks.push(CheckResult::new("scans", name, &p, Expect::Above, hits, 0.0, 0));

        let u = helmholtz_potential();
        for a in ansatz_grid() {
            let p = a.params();
            let rep = singularity_scan("potential.ansatz", &u, &p, &domain, SCAN_NODES, SCAN_NODES);
            let name = format!("potential.ansatz is finite and negative{}", describe(&p));
            let value = rep.max.unwrap_or(f64::NAN);
            self.checks.push(CheckResult::new("scans", name, &p, Expect::Below, value, 0.0, rep.non_finite_nodes.len()));
        }
    }
}

/// `[0.05, 3] × [−3, 3]`, the box of the nonsingularity scans.
pub fn scan_domain() -> Domain {
    Domain::new(0.05, 3.0, -3.0, 3.0).expect("valid box")
}

pub fn run_catalog_suite(cat: &Catalog, cfg: SuiteConfig) -> SuiteReport {
    let mut runner = Runner { cat, cfg, checks: Vec::new() };
    runner.entries();
    runner.controls();
    runner.chain();
    runner.images();
    runner.twofold();
    runner.paths();
    runner.scans();
    SuiteReport { config: cfg, checks: runner.checks }
}
