//! Primitives of closed one-forms `A dr + B dz` on rectangular domains.
//!
//! Integration runs along axis-aligned polylines with composite
//! Gauss–Legendre panels. Paths are never rerouted around exclusions; a
//! blocked path is an error and the caller picks anchors and targets in a
//! simply connected part of the domain.

mod field;
mod gauss;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Tape};
use crate::{Expr, Identity, Params, Point, Real};

pub use field::Field;
pub use gauss::GaussLegendre;

/// `A dr + B dz`.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub a: Expr,
    pub b: Expr,
}

impl OneForm {
    pub fn new(a: Expr, b: Expr) -> Self {
        OneForm { a, b }
    }

    pub fn zero() -> Self {
        OneForm::new(Expr::zero(), Expr::zero())
    }

    pub fn neg(&self) -> Self {
        OneForm::new((-&self.a).fold(), (-&self.b).fold())
    }

    /// `A_z − B_r`; zero exactly when the form is closed.
    pub fn compatibility_residual(&self) -> Expr {
        (self.a.dz() - self.b.dr()).fold()
    }

    pub fn compatibility_identity(&self) -> Identity {
        Identity::new("closedness", vec![self.a.dz(), (-self.b.dr()).fold()])
    }

    /// Checks that `f` is a primitive: `f_r = A` and `f_z = B`.
    pub fn primitive_identities(&self, f: &Expr) -> [Identity; 2] {
        [Identity::equality("primitive r-component", &f.dr(), &self.a), Identity::equality("primitive z-component", &f.dz(), &self.b)]
    }

    pub fn compile(&self, params: &Params) -> Result<CompiledForm, EvalError> {
        Ok(CompiledForm { a: self.a.compile(params)?, b: self.b.compile(params)? })
    }
}

/// `A_z − B_r` for `form = (A, B)`.
pub fn compatibility_residual(form: &OneForm) -> Expr {
    form.compatibility_residual()
}

#[derive(Debug, Clone)]
pub struct CompiledForm {
    a: Tape,
    b: Tape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exclusion {
    Disk {
        center: Point<f64>,
        radius: f64,
    },
    /// Annulus `|ρ − radius| < half_width` around `center`, for circular loci.
    Ring {
        center: Point<f64>,
        radius: f64,
        half_width: f64,
    },
}

impl Exclusion {
    pub fn contains(&self, pt: Point<f64>) -> bool {
        match *self {
            Exclusion::Disk { center, radius } => dist(center, pt) < radius,
            Exclusion::Ring { center, radius, half_width } => (dist(center, pt) - radius).abs() < half_width,
        }
    }

    /// Whether the segment `[p, q]` touches the excluded set.
    pub fn meets_segment(&self, p: Point<f64>, q: Point<f64>) -> bool {
        let (center, lo, hi) = match *self {
            Exclusion::Disk { center, radius } => (center, f64::NEG_INFINITY, radius),
            Exclusion::Ring { center, radius, half_width } => (center, radius - half_width, radius + half_width),
        };
        let near = segment_distance(center, p, q);
        let far = dist(center, p).max(dist(center, q));
        near < hi && far > lo
    }
}

fn dist(a: Point<f64>, b: Point<f64>) -> f64 {
    (a.r - b.r).hypot(a.z - b.z)
}

fn segment_distance(c: Point<f64>, p: Point<f64>, q: Point<f64>) -> f64 {
    let (dr, dz) = (q.r - p.r, q.z - p.z);
    let len2 = dr * dr + dz * dz;
    let t = if len2 == 0.0 { 0.0 } else { (((c.r - p.r) * dr + (c.z - p.z) * dz) / len2).clamp(0.0, 1.0) };
    dist(c, Point::new(p.r + t * dr, p.z + t * dz))
}

/// Working region: a box in the half-plane `r > 0` minus exclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid path specification: {0}")]
    InvalidPath(String),
    #[error("point {0} lies outside the domain")]
    OutsideDomain(Point<f64>),
    #[error("path segment {from} -> {to} crosses an exclusion")]
    Blocked { from: Point<f64>, to: Point<f64> },
    #[error("integrand: {0}")]
    Integrand(#[from] EvalError),
}

impl Domain {
    pub fn new(r_min: f64, r_max: f64, z_min: f64, z_max: f64) -> Result<Self, QuadError> {
        let d = Domain { r_min, r_max, z_min, z_max, exclusions: Vec::new() };
        d.validate()?;
        Ok(d)
    }

    /// `r ∈ [0.2, 3]`, `z ∈ [−3, 3]`.
    pub fn standard() -> Self {
        Domain::new(0.2, 3.0, -3.0, 3.0).expect("valid literal domain")
    }

    pub fn with_exclusion(mut self, ex: Exclusion) -> Self {
        self.exclusions.push(ex);
        self
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        let finite = [self.r_min, self.r_max, self.z_min, self.z_max].iter().all(|x| x.is_finite());
        if !finite || self.r_min <= 0.0 || self.r_min >= self.r_max || self.z_min >= self.z_max {
            return Err(QuadError::InvalidDomain(format!(
                "need 0 < r_min < r_max and z_min < z_max, got [{}, {}] x [{}, {}]",
                self.r_min, self.r_max, self.z_min, self.z_max
            )));
        }
        for ex in &self.exclusions {
            if let Exclusion::Disk { center, radius } = ex {
                if !self.in_box(*center) || *radius <= 0.0 {
                    return Err(QuadError::InvalidDomain(format!("exclusion disk at {center} must lie inside the box")));
                }
            }
        }
        Ok(())
    }

    pub fn in_box(&self, pt: Point<f64>) -> bool {
        pt.r >= self.r_min && pt.r <= self.r_max && pt.z >= self.z_min && pt.z <= self.z_max
    }

    pub fn excluded(&self, pt: Point<f64>) -> bool {
        self.exclusions.iter().any(|ex| ex.contains(pt))
    }

    pub fn contains(&self, pt: Point<f64>) -> bool {
        self.in_box(pt) && !self.excluded(pt)
    }

    pub fn segment_clear(&self, p: Point<f64>, q: Point<f64>) -> bool {
        self.in_box(p) && self.in_box(q) && !self.exclusions.iter().any(|ex| ex.meets_segment(p, q))
    }

    pub fn center(&self) -> Point<f64> {
        Point::new(0.5 * (self.r_min + self.r_max), 0.5 * (self.z_min + self.z_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathVariant {
    RThenZ,
    ZThenR,
    /// `r` to the midpoint radius, then `z`, then the rest of `r`.
    MidpointPolyline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Panels {
    PerSegment(usize),
    /// Panels proportional to segment length, at least four per segment.
    PerUnitLength(usize),
}

impl Panels {
    fn count(self, length: f64) -> usize {
        match self {
            Panels::PerSegment(n) => n,
            Panels::PerUnitLength(n) => ((n as f64 * length).ceil() as usize).max(MIN_PANELS),
        }
    }
}

const MIN_PANELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub variant: PathVariant,
    pub panels: Panels,
    pub nodes: usize,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec { variant: PathVariant::RThenZ, panels: Panels::PerUnitLength(16), nodes: 8 }
    }
}

impl PathSpec {
    pub fn with_variant(mut self, variant: PathVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if self.nodes != 4 && self.nodes != 8 {
            return Err(QuadError::InvalidPath(format!("nodes per panel must be 4 or 8, got {}", self.nodes)));
        }
        match self.panels {
            Panels::PerSegment(n) if n < MIN_PANELS => {
                Err(QuadError::InvalidPath(format!("need at least {MIN_PANELS} panels per segment, got {n}")))
            }
            Panels::PerUnitLength(0) => Err(QuadError::InvalidPath("panel density must be positive".into())),
            _ => Ok(()),
        }
    }

    fn waypoints(&self, from: Point<f64>, to: Point<f64>) -> Vec<Point<f64>> {
        match self.variant {
            PathVariant::RThenZ => vec![from, Point::new(to.r, from.z), to],
            PathVariant::ZThenR => vec![from, Point::new(from.r, to.z), to],
            PathVariant::MidpointPolyline => {
                let mid = 0.5 * (from.r + to.r);
                vec![from, Point::new(mid, from.z), Point::new(mid, to.z), to]
            }
        }
    }
}

impl CompiledForm {
    /// `∫ A dr + B dz` along an axis-aligned segment.
    pub fn segment<T: Real>(&self, rule: &GaussLegendre, from: Point<f64>, to: Point<f64>, panels: usize) -> Result<T, EvalError> {
        if from.z == to.z && from.r != to.r {
            let z = T::lit(from.z);
            rule.integrate(T::lit(from.r), T::lit(to.r), panels, |r| self.a.eval(Point::new(r, z)))
        } else if from.r == to.r && from.z != to.z {
            let r = T::lit(from.r);
            rule.integrate(T::lit(from.z), T::lit(to.z), panels, |z| self.b.eval(Point::new(r, z)))
        } else if from == to {
            Ok(T::zero())
        } else {
            panic!("segments are axis aligned by construction")
        }
    }

    pub fn integrate<T: Real>(
        &self,
        domain: &Domain,
        anchor: Point<f64>,
        anchor_value: T,
        target: Point<f64>,
        path: &PathSpec,
    ) -> Result<T, QuadError> {
        path.validate()?;
        for pt in [anchor, target] {
            if !domain.contains(pt) {
                return Err(QuadError::OutsideDomain(pt));
            }
        }
        let rule = GaussLegendre::new(path.nodes);
        let points = path.waypoints(anchor, target);
        let mut value = anchor_value;
        for pair in points.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            if !domain.segment_clear(p, q) {
                return Err(QuadError::Blocked { from: p, to: q });
            }
            let length = dist(p, q);
            if length == 0.0 {
                continue;
            }
            value = value + self.segment::<T>(&rule, p, q, path.panels.count(length))?;
        }
        Ok(value)
    }
}

/// `anchor_value + ∫_path (A dr + B dz)` from `anchor` to `target`.
pub fn integrate_form<T: Real>(
    form: &OneForm,
    params: &Params,
    domain: &Domain,
    anchor: Point<f64>,
    anchor_value: T,
    target: Point<f64>,
    path: &PathSpec,
) -> Result<T, QuadError> {
    form.compile(params)?.integrate(domain, anchor, anchor_value, target, path)
}

/// Grid of primitive values built by cumulative marching.
///
/// The anchor is first carried along `r` to the nearest grid column, the
/// column is filled by marching in `z`, then every row is filled by
/// marching in `r` away from that column. Nodes inside exclusions, and
/// nodes whose marching path is blocked or hits a non-finite integrand, are
/// flagged invalid.
#[allow(clippy::too_many_arguments)]
pub fn primitive_field<T: Real>(
    form: &OneForm,
    params: &Params,
    domain: &Domain,
    n_r: usize,
    n_z: usize,
    anchor: Point<f64>,
    anchor_value: T,
    path: &PathSpec,
) -> Result<Field<T>, QuadError> {
    use rayon::prelude::*;

    domain.validate()?;
    path.validate()?;
    if n_r < 2 || n_z < 2 {
        return Err(QuadError::InvalidDomain("grid needs at least 2 x 2 nodes".into()));
    }
    if !domain.contains(anchor) {
        return Err(QuadError::OutsideDomain(anchor));
    }
    let compiled = form.compile(params)?;
    let rule = GaussLegendre::new(path.nodes);
    let grid = Field::<T>::blank(domain.clone(), n_r, n_z);
    let col =
        (0..n_r).min_by(|&a, &b| (grid.r_at(a) - anchor.r).abs().total_cmp(&(grid.r_at(b) - anchor.r).abs())).expect("non-empty grid");
    let r_col = grid.r_at(col);

    let step = |from: Point<f64>, to: Point<f64>, value: Option<T>| -> Option<T> {
        let v = value?;
        if !domain.segment_clear(from, to) || domain.excluded(to) {
            return None;
        }
        let n = path.panels.count(dist(from, to));
        compiled.segment::<T>(&rule, from, to, n).ok().map(|inc| v + inc)
    };

    let start = Point::new(r_col, anchor.z);
    let base = step(anchor, start, Some(anchor_value));
    let mut column: Vec<Option<T>> = vec![None; n_z];
    // upward from the anchor height
    let mut prev = (start, base);
    for (j, slot) in column.iter_mut().enumerate() {
        let z = grid.z_at(j);
        if z >= anchor.z {
            let here = Point::new(r_col, z);
            let v = step(prev.0, here, prev.1);
            *slot = v;
            prev = (here, v);
        }
    }
    let mut prev = (start, base);
    for j in (0..n_z).rev() {
        let z = grid.z_at(j);
        if z < anchor.z {
            let here = Point::new(r_col, z);
            let v = step(prev.0, here, prev.1);
            column[j] = v;
            prev = (here, v);
        }
    }

    let rows: Vec<Vec<Option<T>>> = (0..n_z)
        .into_par_iter()
        .map(|j| {
            let z = grid.z_at(j);
            let mut row = vec![None; n_r];
            row[col] = column[j];
            for direction in [1isize, -1] {
                let mut prev = (Point::new(r_col, z), column[j]);
                let mut i = col as isize + direction;
                while i >= 0 && (i as usize) < n_r {
                    let here = Point::new(grid.r_at(i as usize), z);
                    let v = step(prev.0, here, prev.1);
                    row[i as usize] = v;
                    prev = (here, v);
                    i += direction;
                }
            }
            row
        })
        .collect();

    let mut field = grid;
    for (j, row) in rows.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            field.set(i, j, v);
        }
    }
    field.anchor = Some((anchor, anchor_value));
    Ok(field)
}
