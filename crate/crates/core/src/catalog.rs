//! Every explicit closed form of the construction, loaded from a shipped
//! text file so entries can be reviewed line by line.
//!
//! Record format: `id | kind[:target] | expression | params | provenance | domain note`.
//! The params column lists required parameter names; `name=value` items are
//! fixed bindings used when the entry is checked against its target.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::darboux::AnsatzParams;
use crate::expr::parse;
use crate::{Expr, ExprError, Params};

const BUILTIN: &str = include_str!("../data/catalog.txt");

/// Default parameter values; all inside the stated nonsingularity conditions.
pub fn defaults() -> Params {
    Params::new().with("C", 1.0).with("C1", 1.0).with("K", 15.0).with("kappa", 1.0)
}

pub const C_GRID: [f64; 3] = [0.5, 1.0, 2.0];
pub const C1_GRID: [f64; 3] = [1.0, 1.5, 2.0];
/// `K` in multiples of `C`.
pub const K_OVER_C_GRID: [f64; 2] = [15.0, 20.0];

/// Ansatz parameter grid, `C` outer.
pub fn ansatz_grid() -> Vec<AnsatzParams> {
    C_GRID.iter().flat_map(|&c| C1_GRID.iter().map(move |&c1| AnsatzParams { c, c1 })).collect()
}

/// `(C, K)` grid for the twofold examples.
pub fn twofold_grid() -> Vec<Params> {
    C_GRID.iter().flat_map(|&c| K_OVER_C_GRID.iter().map(move |&k| Params::new().with("C", c).with("K", k * c))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    SeedSolution,
    Potential,
    Solution,
    Exponent,
    OneFormPrimitive,
    /// Building blocks such as printed intermediate forms; not checked on their own.
    Auxiliary,
}

impl EntryKind {
    pub fn name(self) -> &'static str {
        match self {
            EntryKind::SeedSolution => "seed-solution",
            EntryKind::Potential => "potential",
            EntryKind::Solution => "solution",
            EntryKind::Exponent => "exponent",
            EntryKind::OneFormPrimitive => "one-form-primitive",
            EntryKind::Auxiliary => "auxiliary",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "seed-solution" => EntryKind::SeedSolution,
            "potential" => EntryKind::Potential,
            "solution" => EntryKind::Solution,
            "exponent" => EntryKind::Exponent,
            "one-form-primitive" => EntryKind::OneFormPrimitive,
            "auxiliary" => EntryKind::Auxiliary,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Entry(String),
    QSeed(String),
    Superpose(String, String),
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub id: String,
    pub kind: EntryKind,
    pub target: Option<Target>,
    /// Expression text with `{id}` references spliced in.
    pub text: String,
    pub expr: Expr,
    pub required_params: Vec<String>,
    pub fixed: Params,
    pub provenance: String,
    pub domain_note: String,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: ExprError },
    #[error("no catalog entry `{0}`")]
    Missing(String),
    #[error("index {0} out of range 1..={1}")]
    Index(usize, usize),
}

#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    by_id: BTreeMap<String, usize>,
}

/// Pair of solutions, normalized primitive and resulting potential of a twofold example.
#[derive(Debug, Clone)]
pub struct TwofoldExample {
    pub u: Expr,
    pub y1: Expr,
    pub y2: Expr,
    pub f_printed: Expr,
    pub f: Expr,
    pub new_potential: Expr,
}

impl Catalog {
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::parse(BUILTIN).expect("shipped catalog is well formed"))
    }

    pub fn parse(text: &str) -> Result<Catalog, CatalogError> {
        let mut cat = Catalog { entries: Vec::new(), by_id: BTreeMap::new() };
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fail = |message: String| CatalogError::Format { line, message };
            let fields: Vec<&str> = trimmed.split('|').map(str::trim).collect();
            let [id, kind, expr, params, provenance, note] = fields[..] else {
                return Err(fail(format!("expected 6 fields, found {}", fields.len())));
            };
            if cat.by_id.contains_key(id) {
                return Err(fail(format!("duplicate id `{id}`")));
            }
            if provenance.is_empty() {
                return Err(fail(format!("entry `{id}` has no provenance")));
            }
            let (kind_name, target_text) = match kind.split_once(':') {
                Some((k, t)) => (k, Some(t)),
                None => (kind, None),
            };
            let kind = EntryKind::from_name(kind_name).ok_or_else(|| fail(format!("unknown kind `{kind_name}`")))?;
            let target = target_text.map(|t| cat.parse_target(t)).transpose().map_err(fail)?;
            let text = cat.splice(expr).map_err(fail)?;
            let parsed = parse(&text).map_err(|source| CatalogError::Expr { line, source })?;
            let (required, fixed) = parse_params(params).map_err(fail)?;
            for name in parsed.params() {
                if !required.contains(&name) && fixed.get(&name).is_err() {
                    return Err(fail(format!("parameter `{name}` of `{id}` is not declared")));
                }
            }
            cat.by_id.insert(id.to_string(), cat.entries.len());
            cat.entries.push(CatalogEntry {
                id: id.to_string(),
                kind,
                target,
                text,
                expr: parsed,
                required_params: required,
                fixed,
                provenance: provenance.to_string(),
                domain_note: note.to_string(),
            });
        }
        Ok(cat)
    }

    fn known(&self, id: &str) -> Result<(), String> {
        if self.by_id.contains_key(id) {
            Ok(())
        } else {
            Err(format!("reference to unknown or later entry `{id}`"))
        }
    }

    fn parse_target(&self, t: &str) -> Result<Target, String> {
        let call = |prefix: &str| t.strip_prefix(prefix).and_then(|rest| rest.strip_suffix(')'));
        if let Some(arg) = call("q-seed(") {
            self.known(arg.trim())?;
            return Ok(Target::QSeed(arg.trim().to_string()));
        }
        if let Some(args) = call("superpose(") {
            let (a, b) = args.split_once(',').ok_or_else(|| format!("superpose needs two ids in `{t}`"))?;
            self.known(a.trim())?;
            self.known(b.trim())?;
            return Ok(Target::Superpose(a.trim().to_string(), b.trim().to_string()));
        }
        self.known(t)?;
        Ok(Target::Entry(t.to_string()))
    }

    fn splice(&self, expr: &str) -> Result<String, String> {
        let mut out = String::new();
        let mut rest = expr;
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let end = rest[start..].find('}').ok_or("unterminated `{` reference")? + start;
            let id = &rest[start + 1..end];
            self.known(id)?;
            out.push('(');
            out.push_str(&self.entries[self.by_id[id]].text);
            out.push(')');
            rest = &rest[end + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Result<&CatalogEntry, CatalogError> {
        self.by_id.get(id).map(|&i| &self.entries[i]).ok_or_else(|| CatalogError::Missing(id.to_string()))
    }

    pub fn expr(&self, id: &str) -> Result<&Expr, CatalogError> {
        Ok(&self.get(id)?.expr)
    }

    /// `1, z, r² − 2z², 3zr² − 2z³, 1/ρ, ln r`.
    pub fn seeds(&self) -> Vec<Expr> {
        self.entries.iter().filter(|e| e.kind == EntryKind::SeedSolution).map(|e| e.expr.clone()).collect()
    }

    fn indexed(&self, prefix: &str, i: usize) -> Result<&Expr, CatalogError> {
        if !(1..=6).contains(&i) {
            return Err(CatalogError::Index(i, 6));
        }
        self.expr(&format!("{prefix}.{i}"))
    }

    pub fn seed(&self, i: usize) -> Result<&Expr, CatalogError> {
        self.indexed("seed", i)
    }

    /// Printed image of seed `i` under the ansatz transformation, in `C`, `C1`.
    pub fn ytilde(&self, i: usize) -> Result<&Expr, CatalogError> {
        self.indexed("ytilde", i)
    }

    pub fn ytilde_bound(&self, i: usize, p: AnsatzParams) -> Result<Expr, CatalogError> {
        Ok(self.ytilde(i)?.bind(&p.params()).fold())
    }

    /// Closed primitive of the nonlocal form of seed `i`.
    pub fn q_primitive(&self, i: usize) -> Result<&Expr, CatalogError> {
        self.indexed("q", i)
    }

    pub fn twofold_example(&self, n: usize) -> Result<TwofoldExample, CatalogError> {
        if !(1..=2).contains(&n) {
            return Err(CatalogError::Index(n, 2));
        }
        let id = |suffix: &str| format!("twofold{n}.{suffix}");
        Ok(TwofoldExample {
            u: self.expr("potential.ansatz.c1")?.clone(),
            y1: self.expr(&id("y1"))?.clone(),
            y2: self.expr(&id("y2"))?.clone(),
            f_printed: self.expr(&id("F.printed"))?.clone(),
            f: self.expr(&id("F"))?.clone(),
            new_potential: self.expr(&format!("potential.twofold{n}"))?.clone(),
        })
    }
}

fn parse_params(text: &str) -> Result<(Vec<String>, Params), String> {
    let mut required = Vec::new();
    let mut fixed = Params::new();
    for item in text.split([',', ';']).map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('=') {
            Some((name, value)) => {
                let v: f64 = value.trim().parse().map_err(|_| format!("bad value in `{item}`"))?;
                fixed.set(name.trim(), v);
            }
            None => required.push(item.to_string()),
        }
    }
    Ok((required, fixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point;

    #[test]
    fn builtin_loads() {
        let cat = Catalog::builtin();
        assert_eq!(cat.seeds().len(), 6);
        assert_eq!(cat.seed(5).unwrap().to_string(), "1/sqrt(r^2 + z^2)");
        assert!(cat.get("seed.5").unwrap().domain_note.contains("origin"));
        assert!(cat.entries().iter().all(|e| !e.provenance.is_empty()));
        assert!(matches!(cat.ytilde(7), Err(CatalogError::Index(7, 6))));
        assert!(matches!(cat.ytilde(0), Err(CatalogError::Index(0, 6))));
    }

    #[test]
    fn first_image_at_unit_point() {
        let cat = Catalog::builtin();
        let y = cat.ytilde_bound(1, AnsatzParams::default()).unwrap();
        assert!((y.eval(&Params::new(), Point::<f64>::new(1.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn references_are_spliced() {
        let cat = Catalog::builtin();
        let entry = cat.get("twofold1.F").unwrap();
        assert_eq!(entry.text, "3*((z/sqrt(r^2+z^2) + K))");
        assert_eq!(entry.target, Some(Target::Superpose("twofold1.y1".into(), "twofold1.y2".into())));
        let c1 = cat.get("potential.ansatz.c1").unwrap();
        assert_eq!(c1.fixed.get("C1"), Ok(1.0));
        assert_eq!(c1.required_params, vec!["C".to_string()]);
    }

    #[test]
    fn malformed_records_are_rejected() {
        assert!(matches!(Catalog::parse("a | potential | 0 | |"), Err(CatalogError::Format { line: 1, .. })));
        assert!(matches!(Catalog::parse("a | bogus | 0 | | p | n"), Err(CatalogError::Format { .. })));
        assert!(matches!(Catalog::parse("a | potential | K | | p | n"), Err(CatalogError::Format { .. })));
        assert!(matches!(Catalog::parse("a | potential | {b} | | p | n"), Err(CatalogError::Format { .. })));
        assert!(matches!(Catalog::parse("a | potential | r + | | p | n"), Err(CatalogError::Expr { line: 1, .. })));
        assert!(matches!(Catalog::parse("a | potential | 0 | | | n"), Err(CatalogError::Format { .. })));
        let dup = "a | potential | 0 | | p | n\na | potential | 1 | | p | n";
        assert!(matches!(Catalog::parse(dup), Err(CatalogError::Format { line: 2, .. })));
    }

    #[test]
    fn grids() {
        assert_eq!(ansatz_grid().len(), 9);
        let g = twofold_grid();
        assert_eq!(g.len(), 6);
        assert_eq!(g[1].get("K"), Ok(20.0 * 0.5));
        assert_eq!(defaults().get("kappa"), Ok(1.0));
    }
}
