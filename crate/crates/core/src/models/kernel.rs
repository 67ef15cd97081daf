use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measures::MeasureWithAtom;

use super::OperatorFields;

/// Dense tables for affine integral operators
/// `B[p](x) = ∫ K_b(x,y) p(dy) + R_b(x)`, `C[p](x) = ∫ K_c(x,y) p(dy) + R_c(x)`.
///
/// Rows and columns are indexed by the points `[0, x_1, ..., x_N]`; row 0 gives
/// the operator values at `x = 0`, column 0 receives the atom plus the head mass
/// of the density.
#[derive(Debug, Clone)]
pub struct KernelTables {
    dim: usize,
    kb: Vec<f64>,
    kc: Vec<f64>,
    rb: Vec<f64>,
    rc: Vec<f64>,
}

impl KernelTables {
    pub fn build(
        grid: &Grid,
        kb: impl Fn(f64, f64) -> f64 + Sync,
        kc: impl Fn(f64, f64) -> f64 + Sync,
        rb: Vec<f64>,
        rc: Vec<f64>,
    ) -> Result<Self> {
        let dim = grid.len() + 1;
        if rb.len() != dim || rc.len() != dim {
            return Err(Error::Structural(format!(
                "affine parts must have {dim} entries (got {} and {})",
                rb.len(),
                rc.len()
            )));
        }
        let mut pts = Vec::with_capacity(dim);
        pts.push(0.0);
        pts.extend_from_slice(grid.nodes());
        let fill = |k: &(dyn Fn(f64, f64) -> f64 + Sync)| -> Vec<f64> {
            let mut t = vec![0.0; dim * dim];
            t.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = k(pts[i], pts[j]);
                }
            });
            t
        };
        let kb = fill(&kb);
        let kc = fill(&kc);
        let tables = Self { dim, kb, kc, rb, rc };
        if tables
            .kb
            .iter()
            .chain(&tables.kc)
            .chain(&tables.rb)
            .chain(&tables.rc)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("kernel produces non-finite entries".into()));
        }
        Ok(tables)
    }

    /// Number of rows (`N + 1`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kb(&self, i: usize, j: usize) -> f64 {
        self.kb[i * self.dim + j]
    }

    pub fn kc(&self, i: usize, j: usize) -> f64 {
        self.kc[i * self.dim + j]
    }

    pub fn rb(&self) -> &[f64] {
        &self.rb
    }

    pub fn rc(&self) -> &[f64] {
        &self.rc
    }

    /// Quadrature weights times density, column 0 carrying atom plus head mass.
    pub fn weighted_density(&self, grid: &Grid, p: &MeasureWithAtom) -> Result<Vec<f64>> {
        grid.check_len(&p.bulk, "density")?;
        let mut v = Vec::with_capacity(self.dim);
        v.push(p.atom_mass + p.head_mass(grid));
        v.extend(grid.weights().iter().zip(&p.bulk).map(|(w, x)| w * x));
        Ok(v)
    }

    pub fn apply(&self, grid: &Grid, p: &MeasureWithAtom) -> Result<OperatorFields> {
        if grid.len() + 1 != self.dim {
            return Err(Error::Structural(format!(
                "kernel tables built for {} nodes, density grid has {}",
                self.dim - 1,
                grid.len()
            )));
        }
        let v = self.weighted_density(grid, p)?;
        let matvec = |table: &[f64], affine: &[f64]| -> Vec<f64> {
            table
                .par_chunks(self.dim)
                .zip(affine.par_iter())
                .map(|(row, r)| row.iter().zip(&v).map(|(k, x)| k * x).sum::<f64>() + r)
                .collect()
        };
        let mut b = matvec(&self.kb, &self.rb);
        let mut c = matvec(&self.kc, &self.rc);
        let b0 = b.remove(0);
        let c0 = c.remove(0);
        let fields = OperatorFields { b0, b, c0, c };
        fields.check_finite()?;
        Ok(fields)
    }
}
