use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Domain, Expr, Params, Point};

/// Grid cell `[r_lo, r_hi] × [z_lo, z_hi]` whose corner values do not share a sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCell {
    pub i: usize,
    pub j: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl SignCell {
    pub fn contains(&self, pt: Point<f64>) -> bool {
        pt.r >= self.r_lo && pt.r <= self.r_hi && pt.z >= self.z_lo && pt.z <= self.z_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub label: String,
    pub params: Params,
    pub domain: Domain,
    pub n_r: usize,
    pub n_z: usize,
    pub sign_change_cells: Vec<SignCell>,
    pub non_finite_nodes: Vec<Point<f64>>,
    /// Extremes over finite nodes; `None` when no node is finite.
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl ScanReport {
    pub fn is_clean(&self) -> bool {
        self.sign_change_cells.is_empty() && self.non_finite_nodes.is_empty()
    }
}

/// Evaluates `e` on a uniform grid and records sign-change cells and
/// non-finite nodes. Zero counts as its own sign. Exclusions are ignored:
/// the scan exists to look at singular loci.
pub fn singularity_scan(label: &str, e: &Expr, params: &Params, domain: &Domain, n_r: usize, n_z: usize) -> ScanReport {
    assert!(n_r >= 2 && n_z >= 2, "scan grid needs at least 2 x 2 nodes");
    let dr = (domain.r_max - domain.r_min) / (n_r - 1) as f64;
    let dz = (domain.z_max - domain.z_min) / (n_z - 1) as f64;
    let r_at = |i: usize| if i + 1 == n_r { domain.r_max } else { domain.r_min + i as f64 * dr };
    let z_at = |j: usize| if j + 1 == n_z { domain.z_max } else { domain.z_min + j as f64 * dz };
    let values: Vec<Option<f64>> = match e.compile(params) {
        Err(_) => vec![None; n_r * n_z],
        Ok(tape) => (0..n_z)
            .into_par_iter()
            .flat_map_iter(|j| {
                let tape = &tape;
                (0..n_r).map(move |i| tape.eval(Point::new(r_at(i), z_at(j))).ok())
            })
            .collect(),
    };
    let at = |i: usize, j: usize| values[j * n_r + i];
    let mut non_finite_nodes = Vec::new();
    let (mut min, mut max) = (None::<f64>, None::<f64>);
    for j in 0..n_z {
        for i in 0..n_r {
            match at(i, j) {
                Some(v) => {
                    min = Some(min.map_or(v, |m| m.min(v)));
                    max = Some(max.map_or(v, |m| m.max(v)));
                }
                None => non_finite_nodes.push(Point::new(r_at(i), z_at(j))),
            }
        }
    }
    let mut sign_change_cells = Vec::new();
    for j in 0..n_z - 1 {
        for i in 0..n_r - 1 {
            let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            let signs: Vec<i8> = corners.iter().flatten().map(|v| sign(*v)).collect();
            if signs.len() == 4 && signs.iter().any(|s| *s != signs[0]) {
                sign_change_cells.push(SignCell { i, j, r_lo: r_at(i), r_hi: r_at(i + 1), z_lo: z_at(j), z_hi: z_at(j + 1) });
            }
        }
    }
    ScanReport {
        label: label.to_string(),
        params: params.clone(),
        domain: domain.clone(),
        n_r,
        n_z,
        sign_change_cells,
        non_finite_nodes,
        min,
        max,
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}
