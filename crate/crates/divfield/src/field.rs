//! Scalar and vector samples on the true cells of a grid domain.

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::grid::{Grid, Point};

/// One value per grid cell; exterior cells hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// One 2-vector per grid cell; exterior cells hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub values: Vec<[f64; 2]>,
}

impl ScalarField {
    pub fn zeros(dom: &GridDomain) -> Self {
        Self { grid: dom.grid, values: vec![0.0; dom.len()] }
    }

    /// Samples `f` at the centers of true cells.
    pub fn from_fn(dom: &GridDomain, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..dom.len())
            .map(|c| if dom.mask[c] { f(dom.grid.center(c)) } else { 0.0 })
            .collect();
        Self { grid: dom.grid, values }
    }

    /// Wraps per-cell values, zeroing exterior cells.
    pub fn from_values(dom: &GridDomain, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != dom.len() {
            return Err(Error::GridMismatch);
        }
        for (v, &m) in values.iter_mut().zip(&dom.mask) {
            if !m {
                *v = 0.0;
            }
        }
        Ok(Self { grid: dom.grid, values })
    }

    fn check(&self, dom: &GridDomain) -> Result<()> {
        if self.grid != dom.grid || self.values.len() != dom.len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `sum f h^n`.
    pub fn integral(&self, dom: &GridDomain) -> f64 {
        dom.true_cells().map(|c| self.values[c]).sum::<f64>() * dom.cell_volume()
    }

    pub fn mean(&self, dom: &GridDomain) -> f64 {
        self.integral(dom) / dom.area()
    }

    /// `f - f_mean` on true cells.
    pub fn mean_zero(&self, dom: &GridDomain) -> Result<Self> {
        self.check(dom)?;
        let m = self.mean(dom);
        let values = (0..dom.len()).map(|c| if dom.mask[c] { self.values[c] - m } else { 0.0 }).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// `(sum |f|^p h^n)^(1/p)`; `p = inf` gives the max norm.
    pub fn norm(&self, dom: &GridDomain, p: f64) -> f64 {
        lp_norm(dom.true_cells().map(|c| self.values[c].abs()), dom.cell_volume(), p)
    }

    pub fn max_abs(&self, dom: &GridDomain) -> f64 {
        self.norm(dom, f64::INFINITY)
    }

    /// `a self + b other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }
}

impl VectorField {
    pub fn zeros(dom: &GridDomain) -> Self {
        Self { grid: dom.grid, values: vec![[0.0; 2]; dom.len()] }
    }

    /// Pointwise Euclidean length.
    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v[0].hypot(v[1])).collect()
    }

    pub fn norm(&self, dom: &GridDomain, p: f64) -> f64 {
        lp_norm(dom.true_cells().map(|c| self.values[c][0].hypot(self.values[c][1])), dom.cell_volume(), p)
    }

    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| [a * x[0] + b * y[0], a * x[1] + b * y[1]])
            .collect();
        Ok(Self { grid: self.grid, values })
    }
}

/// Finite-difference gradient of per-cell values: central where both
/// neighbours along an axis are true cells, one-sided where only one is,
/// zero otherwise.
pub fn fd_gradient(dom: &GridDomain, values: &[f64]) -> Vec<[f64; 2]> {
    let g = dom.grid;
    let h = g.h;
    let mut out = vec![[0.0; 2]; dom.len()];
    for c in dom.true_cells() {
        let (i, j) = g.coords(c);
        let at = |di: i64, dj: i64| -> Option<f64> {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if !g.contains(a, b) {
                return None;
            }
            let k = g.index(a as usize, b as usize);
            dom.mask[k].then(|| values[k])
        };
        for (ax, (di, dj)) in [(1i64, 0i64), (0, 1)].into_iter().enumerate() {
            out[c][ax] = match (at(-di, -dj), at(di, dj)) {
                (Some(m), Some(p)) => (p - m) / (2.0 * h),
                (None, Some(p)) => (p - values[c]) / h,
                (Some(m), None) => (values[c] - m) / h,
                (None, None) => 0.0,
            };
        }
    }
    out
}

/// Discrete `L^p` norm of nonnegative samples with cell volume `vol`.
pub fn lp_norm(values: impl Iterator<Item = f64>, vol: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        (values.map(|v| v.powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    }
}
