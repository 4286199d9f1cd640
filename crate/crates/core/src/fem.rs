//! Structured-grid finite element analysis with bilinear plane-stress quads.
//!
//! Nodes, DOFs and elements are numbered from the top-left corner and
//! proceed column by column. Internally every index is 0-based: node
//! `(col, row)` is `col * (nely + 1) + row`, its x-DOF is `2 * node` and its
//! y-DOF `2 * node + 1`; element `(col, row)` is `col * nely + row`.
//!
//! The y axis points up, so a downward load is negative.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

/// Unit-modulus stiffness matrix of one square bilinear element.
pub type ElementMatrix = [[f64; 8]; 8];

/// Rectangular grid of square elements with an optional passive mask.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredGrid {
    nelx: usize,
    nely: usize,
    edge_length: f64,
    passive: Vec<bool>,
}

impl StructuredGrid {
    pub fn new(nelx: usize, nely: usize, edge_length: f64) -> Result<Self> {
        if nelx == 0 || nely == 0 {
            return Err(Error::InvalidGrid(format!(
                "element counts must be positive, got {nelx}x{nely}"
            )));
        }
        if !(edge_length > 0.0 && edge_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "edge length must be positive, got {edge_length}"
            )));
        }
        Ok(Self {
            nelx,
            nely,
            edge_length,
            passive: vec![false; nelx * nely],
        })
    }

    /// Replaces the passive mask. `mask[e]` marks element `e` as passive void.
    pub fn with_passive(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.element_count() {
            return Err(Error::InvalidGrid(format!(
                "passive mask has {} entries for {} elements",
                mask.len(),
                self.element_count()
            )));
        }
        if mask.iter().all(|&p| p) {
            return Err(Error::InvalidGrid("every element is passive".into()));
        }
        self.passive = mask;
        Ok(self)
    }

    pub fn nelx(&self) -> usize {
        self.nelx
    }

    pub fn nely(&self) -> usize {
        self.nely
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    pub fn element_count(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn node_count(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    pub fn dof_count(&self) -> usize {
        2 * self.node_count()
    }

    pub fn node(&self, col: usize, row: usize) -> usize {
        col * (self.nely + 1) + row
    }

    pub fn element(&self, col: usize, row: usize) -> usize {
        col * self.nely + row
    }

    /// `(col, row)` of element `e`.
    pub fn element_position(&self, e: usize) -> (usize, usize) {
        (e / self.nely, e % self.nely)
    }

    pub fn is_passive(&self, e: usize) -> bool {
        self.passive[e]
    }

    pub fn passive_mask(&self) -> &[bool] {
        &self.passive
    }

    pub fn active_count(&self) -> usize {
        self.passive.iter().filter(|&&p| !p).count()
    }

    /// Elemental area (unit thickness).
    pub fn element_volume(&self) -> f64 {
        self.edge_length * self.edge_length
    }

    /// The eight global DOFs of every element, ordered lower-left,
    /// lower-right, upper-right, upper-left (x before y at each node).
    pub fn connectivity(&self) -> Vec<[usize; 8]> {
        let nely = self.nely;
        let mut table = Vec::with_capacity(self.element_count());
        for col in 0..self.nelx {
            for row in 0..nely {
                let base = 2 * self.node(col, row + 1);
                table.push([
                    base,
                    base + 1,
                    base + 2 * nely + 2,
                    base + 2 * nely + 3,
                    base + 2 * nely,
                    base + 2 * nely + 1,
                    base - 2,
                    base - 1,
                ]);
            }
        }
        table
    }
}

/// Modified-SIMP isotropic material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub e0: f64,
    pub e_min: f64,
    pub nu: f64,
    pub penal: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            e0: 1.0,
            e_min: 1e-9,
            nu: 0.3,
            penal: 3.0,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.e0 > self.e_min && self.e_min > 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "need e0 > e_min > 0, got e0={} e_min={}",
                self.e0, self.e_min
            )));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return Err(Error::InvalidMaterial(format!(
                "poisson ratio {} outside [0, 0.5)",
                self.nu
            )));
        }
        if !(self.penal >= 1.0) {
            return Err(Error::InvalidMaterial(format!(
                "penalization {} below 1",
                self.penal
            )));
        }
        Ok(())
    }

    /// `E(rho) = E_min + rho^p (E_0 - E_min)`.
    pub fn modulus(&self, rho: f64) -> f64 {
        self.e_min + rho.powf(self.penal) * (self.e0 - self.e_min)
    }

    /// `dE/drho`.
    pub fn modulus_derivative(&self, rho: f64) -> f64 {
        self.penal * rho.powf(self.penal - 1.0) * (self.e0 - self.e_min)
    }
}

/// Stiffness of a unit-modulus, unit-thickness square bilinear element in
/// plane stress. Independent of the edge length.
pub fn element_stiffness(nu: f64) -> ElementMatrix {
    const A11: [[f64; 4]; 4] = [
        [12.0, 3.0, -6.0, -3.0],
        [3.0, 12.0, 3.0, 0.0],
        [-6.0, 3.0, 12.0, -3.0],
        [-3.0, 0.0, -3.0, 12.0],
    ];
    const A12: [[f64; 4]; 4] = [
        [-6.0, -3.0, 0.0, 3.0],
        [-3.0, -6.0, -3.0, -6.0],
        [0.0, -3.0, -6.0, 3.0],
        [3.0, -6.0, 3.0, -6.0],
    ];
    const B11: [[f64; 4]; 4] = [
        [-4.0, 3.0, -2.0, 9.0],
        [3.0, -4.0, -9.0, 4.0],
        [-2.0, -9.0, -4.0, -3.0],
        [9.0, 4.0, -3.0, -4.0],
    ];
    const B12: [[f64; 4]; 4] = [
        [2.0, -3.0, 4.0, -9.0],
        [-3.0, 2.0, 9.0, -2.0],
        [4.0, 9.0, 2.0, 3.0],
        [-9.0, -2.0, 3.0, 2.0],
    ];
    // [X11 X12; X12' X11]
    let block = |m11: &[[f64; 4]; 4], m12: &[[f64; 4]; 4], i: usize, j: usize| match (i < 4, j < 4) {
        (true, true) => m11[i][j],
        (true, false) => m12[i][j - 4],
        (false, true) => m12[j][i - 4],
        (false, false) => m11[i - 4][j - 4],
    };
    let scale = 1.0 / (1.0 - nu * nu) / 24.0;
    let mut ke = [[0.0; 8]; 8];
    for (i, row) in ke.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = scale * (block(&A11, &A12, i, j) + nu * block(&B11, &B12, i, j));
        }
    }
    ke
}

/// Per-element Young's modulus. Passive elements always get `E_min`.
pub fn interpolate_modulus(grid: &StructuredGrid, rho: &[f64], material: &Material) -> Vec<f64> {
    rho.iter()
        .enumerate()
        .map(|(e, &r)| {
            if grid.is_passive(e) {
                material.e_min
            } else {
                material.modulus(r)
            }
        })
        .collect()
}

/// Supports and nodal loads.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditions {
    fixed_dofs: Vec<usize>,
    loads: Vec<(usize, f64)>,
}

impl BoundaryConditions {
    /// Duplicate fixed DOFs are merged; loads on the same DOF are summed.
    pub fn new(mut fixed_dofs: Vec<usize>, loads: Vec<(usize, f64)>) -> Result<Self> {
        if fixed_dofs.is_empty() {
            return Err(Error::InvalidBoundary("no fixed dofs".into()));
        }
        if loads.is_empty() {
            return Err(Error::InvalidBoundary("no loaded dofs".into()));
        }
        fixed_dofs.sort_unstable();
        fixed_dofs.dedup();
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(loads.len());
        let mut loads = loads;
        loads.sort_by_key(|&(d, _)| d);
        for (dof, value) in loads {
            match merged.last_mut() {
                Some((d, v)) if *d == dof => *v += value,
                _ => merged.push((dof, value)),
            }
        }
        Ok(Self {
            fixed_dofs,
            loads: merged,
        })
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed_dofs
    }

    pub fn loads(&self) -> &[(usize, f64)] {
        &self.loads
    }

    pub fn force_vector(&self, dof_count: usize) -> Vec<f64> {
        let mut f = vec![0.0; dof_count];
        for &(d, v) in &self.loads {
            f[d] += v;
        }
        f
    }

    fn check_against(&self, grid: &StructuredGrid) -> Result<()> {
        let n = grid.dof_count();
        if let Some(&d) = self.fixed_dofs.iter().find(|&&d| d >= n) {
            return Err(Error::InvalidBoundary(format!("fixed dof {d} >= {n}")));
        }
        if let Some(&(d, _)) = self.loads.iter().find(|&&(d, _)| d >= n) {
            return Err(Error::InvalidBoundary(format!("loaded dof {d} >= {n}")));
        }
        Ok(())
    }
}

/// Nodal displacements of a solved system.
#[derive(Clone, Debug, PartialEq)]
pub struct FemSolution {
    pub displacements: Vec<f64>,
    /// `|K_ff u_f - f_f| / |f_f|` after the solve.
    pub relative_residual: f64,
}

impl FemSolution {
    /// The eight displacements of one element.
    pub fn element_displacements(&self, edofs: &[usize; 8]) -> [f64; 8] {
        edofs.map(|d| self.displacements[d])
    }
}

const NOT_FREE: usize = usize::MAX;
const RESIDUAL_TARGET: f64 = 1e-9;

/// Assembly plan and symbolic Cholesky factorization for one grid and set of
/// supports. Reused across iterations; only element moduli change.
pub struct FemSystem {
    grid: StructuredGrid,
    bc: BoundaryConditions,
    ke: ElementMatrix,
    edofs: Vec<[usize; 8]>,
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    // per element: (value slot, local row * 8 + local col) for upper-triangle entries
    scatter: Vec<Vec<(usize, usize)>>,
    symbolic: SymbolicLlt<usize>,
    force: Vec<f64>,
}

impl std::fmt::Debug for FemSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemSystem")
            .field("nelx", &self.grid.nelx)
            .field("nely", &self.grid.nely)
            .field("free_dofs", &self.free_dofs.len())
            .field("nnz", &self.row_idx.len())
            .finish()
    }
}

impl FemSystem {
    pub fn new(grid: &StructuredGrid, bc: &BoundaryConditions, nu: f64) -> Result<Self> {
        bc.check_against(grid)?;
        let ndof = grid.dof_count();
        let mut free_index = vec![0usize; ndof];
        for &d in bc.fixed_dofs() {
            free_index[d] = NOT_FREE;
        }
        let mut free_dofs = Vec::with_capacity(ndof - bc.fixed_dofs().len());
        for (d, slot) in free_index.iter_mut().enumerate() {
            if *slot != NOT_FREE {
                *slot = free_dofs.len();
                free_dofs.push(d);
            }
        }
        let nfree = free_dofs.len();
        if nfree == 0 {
            return Err(Error::InvalidBoundary("every dof is fixed".into()));
        }

        let edofs = grid.connectivity();

        // Column-wise upper-triangle pattern of K_ff.
        let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); nfree];
        for ed in &edofs {
            for &a in ed {
                let fa = free_index[a];
                if fa == NOT_FREE {
                    continue;
                }
                for &b in ed {
                    let fb = free_index[b];
                    if fb != NOT_FREE && fa <= fb {
                        rows_of[fb].push(fa);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(nfree + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for rows in &mut rows_of {
            rows.sort_unstable();
            rows.dedup();
            row_idx.extend_from_slice(rows);
            col_ptr.push(row_idx.len());
        }

        let slot = |row: usize, col: usize| -> usize {
            let start = col_ptr[col];
            let rows = &row_idx[start..col_ptr[col + 1]];
            start + rows.binary_search(&row).expect("entry in pattern")
        };
        let scatter = edofs
            .iter()
            .map(|ed| {
                let mut entries = Vec::with_capacity(36);
                for (i, &a) in ed.iter().enumerate() {
                    let fa = free_index[a];
                    if fa == NOT_FREE {
                        continue;
                    }
                    for (j, &b) in ed.iter().enumerate() {
                        let fb = free_index[b];
                        if fb != NOT_FREE && fa <= fb {
                            entries.push((slot(fa, fb), i * 8 + j));
                        }
                    }
                }
                entries
            })
            .collect();

        let pattern = SymbolicSparseColMatRef::new_checked(nfree, nfree, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLlt::try_new(pattern, Side::Upper).map_err(|e| Error::SingularSystem {
            free_dofs: nfree,
            fixed_dofs: bc.fixed_dofs().len(),
            total_dofs: ndof,
            detail: format!("symbolic factorization failed: {e:?}"),
        })?;

        Ok(Self {
            grid: grid.clone(),
            bc: bc.clone(),
            ke: element_stiffness(nu),
            force: bc.force_vector(ndof),
            edofs,
            free_index,
            free_dofs,
            col_ptr,
            row_idx,
            scatter,
            symbolic,
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn element_matrix(&self) -> &ElementMatrix {
        &self.ke
    }

    pub fn connectivity(&self) -> &[[usize; 8]] {
        &self.edofs
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Upper triangle of `K_ff` in the CSC layout of the precomputed pattern.
    fn assemble_values(&self, moduli: &[f64]) -> Vec<f64> {
        let ke_flat: Vec<f64> = self.ke.iter().flatten().copied().collect();
        let mut values = vec![0.0; self.row_idx.len()];
        for (entries, &e) in self.scatter.iter().zip(moduli) {
            for &(slot, local) in entries {
                values[slot] += e * ke_flat[local];
            }
        }
        values
    }

    /// `y = K_ff x` from the upper-triangle storage.
    fn symmetric_product(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for col in 0..x.len() {
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                let row = self.row_idx[k];
                let v = values[k];
                y[row] += v * x[col];
                if row != col {
                    y[col] += v * x[row];
                }
            }
        }
        y
    }

    fn singular(&self, detail: String) -> Error {
        Error::SingularSystem {
            free_dofs: self.free_dofs.len(),
            fixed_dofs: self.bc.fixed_dofs().len(),
            total_dofs: self.grid.dof_count(),
            detail,
        }
    }

    /// Solves `K_ff u_f = f_f` for the given element moduli.
    pub fn solve(&self, moduli: &[f64]) -> Result<FemSolution> {
        assert_eq!(moduli.len(), self.grid.element_count(), "one modulus per element");
        if let Some(e) = moduli.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(self.singular(format!("element {e} has modulus {}", moduli[e])));
        }
        let values = self.assemble_values(moduli);
        let matrix = SparseColMatRef::new(
            SymbolicSparseColMatRef::new_checked(
                self.free_dofs.len(),
                self.free_dofs.len(),
                &self.col_ptr,
                None,
                &self.row_idx,
            ),
            &values,
        );
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), matrix, Side::Upper)
            .map_err(|e| self.singular(format!("cholesky breakdown: {e:?}")))?;

        let rhs: Vec<f64> = self.free_dofs.iter().map(|&d| self.force[d]).collect();
        let rhs_norm = norm(&rhs);
        let mut u = rhs.clone();
        let n = u.len();
        llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut u, n, 1));

        let mut relative_residual = 0.0;
        if rhs_norm > 0.0 {
            // a couple of refinement sweeps absorb round-off from high modulus contrast
            for _ in 0..3 {
                let ku = self.symmetric_product(&values, &u);
                let mut r: Vec<f64> = rhs.iter().zip(&ku).map(|(f, k)| f - k).collect();
                relative_residual = norm(&r) / rhs_norm;
                if relative_residual <= RESIDUAL_TARGET * 1e-2 {
                    break;
                }
                llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut r, n, 1));
                u.iter_mut().zip(&r).for_each(|(ui, di)| *ui += di);
            }
            let ku = self.symmetric_product(&values, &u);
            let r: Vec<f64> = rhs.iter().zip(&ku).map(|(f, k)| f - k).collect();
            relative_residual = norm(&r) / rhs_norm;
        }
        if !relative_residual.is_finite() || relative_residual > RESIDUAL_TARGET {
            return Err(self.singular(format!("relative residual {relative_residual:e} after solve")));
        }

        let mut displacements = vec![0.0; self.grid.dof_count()];
        for (&d, &v) in self.free_dofs.iter().zip(&u) {
            displacements[d] = v;
        }
        debug_assert!(self.bc.fixed_dofs().iter().all(|&d| self.free_index[d] == NOT_FREE));
        Ok(FemSolution {
            displacements,
            relative_residual,
        })
    }
}

/// One-shot assembly and solve. Prefer [`FemSystem`] inside loops.
pub fn assemble_and_solve(
    grid: &StructuredGrid,
    bc: &BoundaryConditions,
    moduli: &[f64],
    nu: f64,
) -> Result<FemSolution> {
    FemSystem::new(grid, bc, nu)?.solve(moduli)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
