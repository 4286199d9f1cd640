//! Cone-weighted density filter.
//!
//! Each element's filtered value is a weighted average over a square
//! neighborhood of half-width `ceil(rmin) - 1` elements, with raw weights
//! `max(0, rmin - r_ij)` where `r_ij` is the center distance in element
//! units. Rows are normalized to sum to one.

use crate::error::{Error, Result};
use crate::fem::StructuredGrid;

/// Row-stochastic sparse averaging operator, stored row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityFilter {
    rmin: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    raw: Vec<f64>,
    weights: Vec<f64>,
}

impl DensityFilter {
    /// Builds the operator for `grid`. Active and passive elements never
    /// share a neighborhood, so the design region is filtered as if the
    /// passive block were not meshed.
    pub fn new(grid: &StructuredGrid, rmin: f64) -> Result<Self> {
        if !(rmin > 0.0 && rmin.is_finite()) {
            return Err(Error::InvalidConfig(format!("filter radius must be positive, got {rmin}")));
        }
        let (nelx, nely) = (grid.nelx(), grid.nely());
        let reach = (rmin.ceil() as usize).saturating_sub(1);
        let mut row_ptr = Vec::with_capacity(grid.element_count() + 1);
        let mut cols = Vec::new();
        let mut raw = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for i1 in 0..nelx {
            for j1 in 0..nely {
                let start = cols.len();
                for i2 in i1.saturating_sub(reach)..=(i1 + reach).min(nelx - 1) {
                    for j2 in j1.saturating_sub(reach)..=(j1 + reach).min(nely - 1) {
                        let di = i1 as f64 - i2 as f64;
                        let dj = j1 as f64 - j2 as f64;
                        let w = (rmin - (di * di + dj * dj).sqrt()).max(0.0);
                        let e2 = grid.element(i2, j2);
                        let same_region = grid.is_passive(e2) == grid.is_passive(grid.element(i1, j1));
                        if w > 0.0 && same_region {
                            cols.push(e2);
                            raw.push(w);
                        }
                    }
                }
                let total: f64 = raw[start..].iter().sum();
                weights.extend(raw[start..].iter().map(|w| w / total));
                row_ptr.push(cols.len());
            }
        }
        Ok(Self {
            rmin,
            row_ptr,
            cols,
            raw,
            weights,
        })
    }

    pub fn radius(&self) -> f64 {
        self.rmin
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(neighbor, normalized weight)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Unnormalized cone weight between elements `i` and `j` (0 if outside
    /// the neighborhood).
    pub fn raw_weight(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .position(|&c| c == j)
            .map_or(0.0, |k| self.raw[r.start + k])
    }

    pub fn raw_row_sum(&self, i: usize) -> f64 {
        self.raw[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum()
    }

    pub fn apply(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        self.apply_add(field, &mut out);
        out
    }

    /// `out += W field`.
    pub fn apply_add(&self, field: &[f64], out: &mut [f64]) {
        assert_eq!(field.len(), self.len(), "field length must match the grid");
        assert_eq!(out.len(), self.len(), "output length must match the grid");
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.row(i).map(|(j, w)| w * field[j]).sum::<f64>();
        }
    }

    /// `W^T field`, used for chain-rule sensitivities.
    pub fn apply_transpose(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.len(), "field length must match the grid");
        let mut out = vec![0.0; field.len()];
        for (i, &f) in field.iter().enumerate() {
            for (j, w) in self.row(i) {
                out[j] += w * f;
            }
        }
        out
    }
}
