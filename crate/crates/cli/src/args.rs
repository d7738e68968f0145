//! Command line and config file parsing. Everything here runs before any
//! computation, so a bad flag never leaves partial output behind.

use std::path::{Path, PathBuf};

use axisym_darboux::verify::{DEFAULT_SEED, SYMBOLIC_TOLERANCE};
use axisym_darboux::{Domain, Expr, Params, Point};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "axisym", version, about = "Darboux and Moutard transformations of the axisymmetric Helmholtz equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full catalog suite and stream one JSON line per check.
    VerifyCatalog {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Sampled points per identity.
        #[arg(long, value_name = "N")]
        points: Option<usize>,
    },
    /// Apply a Moutard or ansatz Darboux transformation to a seed solution.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Seed solution of the potential given by --u.
        #[arg(long = "seed", value_name = "EXPR", allow_hyphen_values = true)]
        seed_expr: String,
        /// Potential the seed solves.
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true, default_value = "0")]
        u: String,
        /// Moutard only: a further solution of --u to carry across.
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        solution: Option<String>,
        /// RNG seed for the residual sampling.
        #[arg(long, value_name = "N")]
        rng_seed: Option<u64>,
        /// Where to write the transformed grid solution.
        #[arg(long, value_name = "PATH")]
        field: Option<PathBuf>,
    },
    /// Twofold superposition of two solutions of one potential.
    Superpose {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        y1: String,
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        y2: String,
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true, default_value = "0")]
        u: String,
        /// Closed primitive of the pair's one-form; quadrature is used otherwise.
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        f: Option<String>,
        /// Value of F at the anchor when F is quadratured.
        #[arg(long, value_name = "X", allow_hyphen_values = true, default_value_t = 1.0)]
        f0: f64,
        #[arg(long, value_name = "PATH")]
        field: Option<PathBuf>,
    },
    /// Primitive of a closed one-form `A dr + B dz`, at a point or on the grid.
    Quadrature {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true, requires = "b", conflicts_with = "q_seed")]
        a: Option<String>,
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true, requires = "a")]
        b: Option<String>,
        /// Use the nonlocal form of this seed of the free equation.
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        q_seed: Option<String>,
        #[arg(long, value_name = "R,Z", allow_hyphen_values = true)]
        anchor: Option<String>,
        #[arg(long, value_name = "X", allow_hyphen_values = true, default_value_t = 0.0)]
        anchor_value: f64,
        /// Single target point; the whole grid otherwise.
        #[arg(long, value_name = "R,Z", allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long, value_enum, default_value_t = PathArg::RThenZ)]
        path: PathArg,
        /// Panels per unit length along each segment.
        #[arg(long, value_name = "N", default_value_t = 16)]
        panels: usize,
        #[arg(long, value_name = "4|8", default_value_t = 8)]
        nodes: usize,
    },
    /// Sign changes and non-finite values of an expression on a grid.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        expr: String,
    },
    /// Sample an expression on the grid for plotting.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
        expr: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Moutard,
    Darboux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    RThenZ,
    ZThenR,
    MidpointPolyline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Matrix,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// rMin,rMax,zMin,zMax
    #[arg(long, value_name = "BOX", allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// nR,nZ
    #[arg(long, value_name = "NR,NZ")]
    pub grid: Option<String>,
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// name=value, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Plain `key=value` file with the same keys as the long flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// Settings after merging the config file (lower precedence) with flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub domain: Option<Domain>,
    pub grid: Option<(usize, usize)>,
    pub seed: u64,
    pub tolerance: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub params: Params,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn numbers<const N: usize>(text: &str, what: &str) -> Result<[f64; N], CliError> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    if items.len() != N {
        return Err(usage(format!("{what} needs {N} comma separated numbers, got `{text}`")));
    }
    let mut out = [0.0f64; N];
    for (slot, item) in out.iter_mut().zip(items) {
        *slot = item.parse().map_err(|_| usage(format!("bad number `{item}` in {what}")))?;
        if !slot.is_finite() {
            return Err(usage(format!("{what} must be finite")));
        }
    }
    Ok(out)
}

pub fn parse_domain(text: &str) -> Result<Domain, CliError> {
    let [a, b, c, d] = numbers::<4>(text, "--domain")?;
    Domain::new(a, b, c, d).map_err(|e| usage(format!("--domain: {e}")))
}

pub fn parse_grid(text: &str) -> Result<(usize, usize), CliError> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    let [nr, nz] = items[..] else {
        return Err(usage(format!("--grid needs nR,nZ, got `{text}`")));
    };
    let parse =
        |s: &str| s.parse::<usize>().ok().filter(|&n| n >= 3).ok_or_else(|| usage(format!("grid size `{s}` must be an integer >= 3")));
    Ok((parse(nr)?, parse(nz)?))
}

pub fn parse_point(text: &str, what: &str) -> Result<Point<f64>, CliError> {
    let [r, z] = numbers::<2>(text, what)?;
    Ok(Point::new(r, z))
}

fn parse_param(item: &str, params: &mut Params) -> Result<(), CliError> {
    let (name, value) = item.split_once('=').ok_or_else(|| usage(format!("--param needs name=value, got `{item}`")))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || name == "r" || name == "z" {
        return Err(usage(format!("bad parameter name `{name}`")));
    }
    let v: f64 = value.trim().parse().map_err(|_| usage(format!("bad value in `{item}`")))?;
    if !v.is_finite() {
        return Err(usage(format!("parameter `{name}` must be finite")));
    }
    params.set(name, v);
    Ok(())
}

fn parse_format(text: &str) -> Result<Format, CliError> {
    Format::from_str(text, true).map_err(|_| usage(format!("unknown format `{text}`")))
}

fn read_config(path: &Path, into: &mut Settings, explicit_seed: Option<u64>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "domain" => into.domain = Some(parse_domain(value)?),
            "grid" => into.grid = Some(parse_grid(value)?),
            "seed" if explicit_seed.is_none() => into.seed = value.parse().map_err(|_| usage(format!("bad seed `{value}` in config")))?,
            "seed" => {}
            "tolerance" => into.tolerance = parse_tolerance(value)?,
            "format" => into.format = parse_format(value)?,
            "out" => into.out = Some(PathBuf::from(value)),
            "param" => parse_param(value, &mut into.params)?,
            other => return Err(usage(format!("{}:{}: unknown key `{other}`", path.display(), n + 1))),
        }
    }
    Ok(())
}

fn check_tolerance(t: f64) -> Option<f64> {
    (t.is_finite() && t > 0.0).then_some(t)
}

fn parse_tolerance(text: &str) -> Result<f64, CliError> {
    text.parse::<f64>().ok().and_then(check_tolerance).ok_or_else(|| usage(format!("tolerance must be a positive number, got `{text}`")))
}

impl Common {
    pub fn settings(&self, seed: Option<u64>) -> Result<Settings, CliError> {
        let mut s = Settings {
            domain: None,
            grid: None,
            seed: seed.unwrap_or(DEFAULT_SEED),
            tolerance: SYMBOLIC_TOLERANCE,
            format: Format::Json,
            out: None,
            params: Params::new(),
        };
        if let Some(path) = &self.config {
            read_config(path, &mut s, seed)?;
        }
        if let Some(d) = &self.domain {
            s.domain = Some(parse_domain(d)?);
        }
        if let Some(g) = &self.grid {
            s.grid = Some(parse_grid(g)?);
        }
        if let Some(t) = self.tolerance {
            s.tolerance = check_tolerance(t).ok_or_else(|| usage(format!("tolerance must be a positive number, got `{t}`")))?;
        }
        if let Some(f) = self.format {
            s.format = f;
        }
        if let Some(o) = &self.out {
            s.out = Some(o.clone());
        }
        for item in &self.params {
            parse_param(item, &mut s.params)?;
        }
        Ok(s)
    }
}

impl Settings {
    /// Parses an expression and insists all its parameters are bound.
    pub fn expr(&self, flag: &str, text: &str) -> Result<Expr, CliError> {
        let e: Expr = text.parse().map_err(|err| usage(format!("{flag}: {err}")))?;
        let missing: Vec<String> = e.params().into_iter().filter(|p| self.params.get(p).is_err()).collect();
        if !missing.is_empty() {
            return Err(usage(format!("{flag}: unbound parameter(s) {}; pass --param name=value", missing.join(", "))));
        }
        Ok(e)
    }

    pub fn domain_or(&self, fallback: Domain) -> Domain {
        self.domain.clone().unwrap_or(fallback)
    }

    /// Explicit grid, or spacing `delta` over the domain.
    pub fn grid_or_spacing(&self, domain: &Domain, delta: f64) -> (usize, usize) {
        self.grid.unwrap_or_else(|| {
            let n = |len: f64| (len / delta).round() as usize + 1;
            (n(domain.r_max - domain.r_min), n(domain.z_max - domain.z_min))
        })
    }
}
