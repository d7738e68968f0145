use std::io::{self, Write};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::Domain;
use crate::expr::EvalError;
use crate::{Expr, Params, Point, Real};

/// Samples on a uniform `n_r × n_z` grid covering the domain box.
///
/// Storage is row-major with `z` outer: sample `(i, j)` sits at
/// `j * n_r + i`. `None` marks a flagged node (excluded, unreachable, or
/// non-finite); no value is fabricated for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub domain: Domain,
    pub n_r: usize,
    pub n_z: usize,
    samples: Vec<Option<T>>,
    /// Anchor point and value for primitives; `None` for sampled fields.
    pub anchor: Option<(Point<f64>, T)>,
}

impl<T: Real> Field<T> {
    pub(crate) fn blank(domain: Domain, n_r: usize, n_z: usize) -> Self {
        assert!(n_r >= 2 && n_z >= 2, "grid needs at least 2 x 2 nodes");
        Field { domain, n_r, n_z, samples: vec![None; n_r * n_z], anchor: None }
    }

    /// Fills every node outside the exclusions with `f`.
    pub fn from_fn(domain: &Domain, n_r: usize, n_z: usize, f: impl Fn(Point<f64>) -> Option<T> + Sync) -> Self {
        let mut field = Field::blank(domain.clone(), n_r, n_z);
        let rows: Vec<Vec<Option<T>>> = (0..n_z)
            .into_par_iter()
            .map(|j| {
                (0..n_r)
                    .map(|i| {
                        let pt = field.point(i, j);
                        if domain.excluded(pt) {
                            None
                        } else {
                            f(pt).filter(|v| v.is_finite())
                        }
                    })
                    .collect()
            })
            .collect();
        field.samples = rows.into_iter().flatten().collect();
        field
    }

    /// Samples an expression; evaluation failures become flagged nodes.
    pub fn sample(e: &Expr, params: &Params, domain: &Domain, n_r: usize, n_z: usize) -> Result<Self, EvalError> {
        let tape = e.compile(params)?;
        Ok(Field::from_fn(domain, n_r, n_z, |pt| tape.eval(pt.cast::<T>()).ok()))
    }

    pub fn constant(domain: &Domain, n_r: usize, n_z: usize, value: T) -> Self {
        Field::from_fn(domain, n_r, n_z, |_| Some(value))
    }

    pub fn dr(&self) -> f64 {
        (self.domain.r_max - self.domain.r_min) / (self.n_r - 1) as f64
    }

    pub fn dz(&self) -> f64 {
        (self.domain.z_max - self.domain.z_min) / (self.n_z - 1) as f64
    }

    pub fn r_at(&self, i: usize) -> f64 {
        if i + 1 == self.n_r {
            self.domain.r_max
        } else {
            self.domain.r_min + i as f64 * self.dr()
        }
    }

    pub fn z_at(&self, j: usize) -> f64 {
        if j + 1 == self.n_z {
            self.domain.z_max
        } else {
            self.domain.z_min + j as f64 * self.dz()
        }
    }

    pub fn point(&self, i: usize, j: usize) -> Point<f64> {
        Point::new(self.r_at(i), self.z_at(j))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.samples[j * self.n_r + i]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: Option<T>) {
        self.samples[j * self.n_r + i] = v.filter(|x| x.is_finite());
    }

    /// Samples in storage order.
    pub fn values(&self) -> impl Iterator<Item = Option<T>> + '_ {
        self.samples.iter().copied()
    }

    pub fn flagged_count(&self) -> usize {
        self.samples.iter().filter(|v| v.is_none()).count()
    }

    /// Nodewise combination; a node is flagged if it is flagged in either input.
    pub fn zip_with(&self, other: &Field<T>, f: impl Fn(Point<f64>, T, T) -> Option<T>) -> Field<T> {
        assert_eq!((self.n_r, self.n_z), (other.n_r, other.n_z), "grids must match");
        let mut out = Field::blank(self.domain.clone(), self.n_r, self.n_z);
        for j in 0..self.n_z {
            for i in 0..self.n_r {
                let v = match (self.get(i, j), other.get(i, j)) {
                    (Some(a), Some(b)) => f(self.point(i, j), a, b),
                    _ => None,
                };
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(Point<f64>, T) -> Option<T>) -> Field<T> {
        self.zip_with(self, |pt, a, _| f(pt, a))
    }

    /// Largest `|a − b|` over nodes valid in both fields.
    pub fn max_abs_diff(&self, other: &Field<T>) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .filter_map(|(a, b)| Some((a.as_ref()?.to_f64_lossy() - b.as_ref()?.to_f64_lossy()).abs()))
            .fold(0.0, f64::max)
    }

    /// `r,z,value` with one row per node, `z` outer; flagged nodes print `nan`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "r,z,value")?;
        for j in 0..self.n_z {
            for i in 0..self.n_r {
                let p = self.point(i, j);
                writeln!(w, "{},{},{}", p.r, p.z, fmt_value(self.get(i, j)))?;
            }
        }
        Ok(())
    }

    /// Gnuplot `matrix nonuniform` layout: the first row holds `n_r` then
    /// the `r` coordinates, every other row a `z` coordinate and its samples.
    pub fn write_matrix(&self, mut w: impl Write) -> io::Result<()> {
        write!(w, "{}", self.n_r)?;
        for i in 0..self.n_r {
            write!(w, " {}", self.r_at(i))?;
        }
        writeln!(w)?;
        for j in 0..self.n_z {
            write!(w, "{}", self.z_at(j))?;
            for i in 0..self.n_r {
                write!(w, " {}", fmt_value(self.get(i, j)))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Vec<Option<f64>>> =
            (0..self.n_z).map(|j| (0..self.n_r).map(|i| self.get(i, j).map(|v| v.to_f64_lossy())).collect()).collect();
        let anchor = self.anchor.map(|(pt, v)| json!({ "r": pt.r, "z": pt.z, "value": v.to_f64_lossy() }));
        json!({
            "domain": self.domain,
            "n_r": self.n_r,
            "n_z": self.n_z,
            "anchor": anchor,
            "flagged": self.flagged_count(),
            "values": rows,
        })
    }
}

fn fmt_value<T: Real>(v: Option<T>) -> String {
    match v {
        Some(x) => format!("{}", x.to_f64_lossy()),
        None => "nan".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::quadrature::Exclusion;

    #[test]
    fn constant_field_csv() {
        let d = Domain::new(1.0, 2.0, 0.0, 1.0).unwrap();
        let f = Field::<f64>::constant(&d, 3, 3, 2.5);
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "r,z,value");
        assert_eq!(lines[1], "1,0,2.5");
        assert_eq!(lines[2], "1.5,0,2.5");
        assert_eq!(lines[9], "2,1,2.5");
    }

    #[test]
    fn matrix_layout() {
        let d = Domain::new(1.0, 2.0, 0.0, 1.0).unwrap();
        let f = Field::<f64>::sample(&parse("r + 10*z").unwrap(), &Params::new(), &d, 2, 2).unwrap();
        let mut out = Vec::new();
        f.write_matrix(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "2 1 2\n0 1 2\n1 11 12\n");
    }

    #[test]
    fn failures_and_exclusions_are_flagged() {
        let d = Domain::new(0.5, 1.5, -1.0, 1.0).unwrap().with_exclusion(Exclusion::Disk { center: Point::new(1.5, 1.0), radius: 0.1 });
        let f = Field::<f64>::sample(&parse("1/z").unwrap(), &Params::new(), &d, 3, 3).unwrap();
        assert_eq!(f.get(0, 1), None);
        assert_eq!(f.get(2, 2), None);
        assert_eq!(f.get(0, 2), Some(1.0));
        assert_eq!(f.flagged_count(), 4);
        let json = f.to_json();
        assert!(json["values"][1][0].is_null());
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let d = Domain::new(0.2, 3.0, -3.0, 3.0).unwrap();
        let f = Field::<f32>::constant(&d, 7, 13, 0.0);
        assert_eq!(f.r_at(6), 3.0);
        assert_eq!(f.z_at(12), 3.0);
        assert_eq!(f.z_at(6), 0.0);
    }
}
