//! Element-center stress recovery, elemental compliance and the contrast index.

use crate::fem::{ElementMatrix, FemSolution, StructuredGrid};

/// In-plane stress components `(sx, sy, sxy)`.
pub type StressTriple = [f64; 3];

/// Per-element stresses at the geometric center of each element.
#[derive(Clone, Debug, PartialEq)]
pub struct StressField {
    pub components: Vec<StressTriple>,
    pub von_mises: Vec<f64>,
}

impl StressField {
    /// Largest von Mises stress over active elements.
    pub fn max_active(&self, grid: &StructuredGrid) -> f64 {
        self.von_mises
            .iter()
            .enumerate()
            .filter(|&(e, _)| !grid.is_passive(e))
            .map(|(_, &s)| s)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplianceField {
    pub per_element: Vec<f64>,
    pub total: f64,
}

/// Strain-displacement matrix of the square element evaluated at its center.
pub fn center_strain_matrix(edge_length: f64) -> [[f64; 8]; 3] {
    let s = 1.0 / (2.0 * edge_length);
    [
        [-s, 0.0, s, 0.0, s, 0.0, -s, 0.0],
        [0.0, -s, 0.0, -s, 0.0, s, 0.0, s],
        [-s, -s, -s, s, s, s, s, -s],
    ]
}

/// Unit-modulus plane-stress constitutive matrix.
pub fn plane_stress_matrix(nu: f64) -> [[f64; 3]; 3] {
    let c = 1.0 / (1.0 - nu * nu);
    [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * (1.0 - nu) / 2.0],
    ]
}

/// `D·B` for a unit modulus.
pub fn stress_operator(nu: f64, edge_length: f64) -> [[f64; 8]; 3] {
    let d = plane_stress_matrix(nu);
    let b = center_strain_matrix(edge_length);
    let mut db = [[0.0; 8]; 3];
    for (i, row) in db.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| d[i][k] * b[k][j]).sum();
        }
    }
    db
}

/// `sqrt(sx^2 + sy^2 - sx*sy + 3*sxy^2)`.
pub fn von_mises(s: StressTriple) -> f64 {
    let [sx, sy, sxy] = s;
    (sx * sx + sy * sy - sx * sy + 3.0 * sxy * sxy).max(0.0).sqrt()
}

/// Stress at every element center, scaled by the element modulus.
pub fn recover_stress(
    grid: &StructuredGrid,
    edofs: &[[usize; 8]],
    solution: &FemSolution,
    moduli: &[f64],
    nu: f64,
) -> StressField {
    let db = stress_operator(nu, grid.edge_length());
    let components: Vec<StressTriple> = edofs
        .iter()
        .zip(moduli)
        .map(|(ed, &e)| {
            let ue = solution.element_displacements(ed);
            db.map(|row| e * row.iter().zip(&ue).map(|(a, b)| a * b).sum::<f64>())
        })
        .collect();
    let von_mises = components.iter().map(|&s| von_mises(s)).collect();
    StressField {
        components,
        von_mises,
    }
}

/// `C_e = E_e u_e^T KE u_e` for every element.
pub fn elemental_compliance(
    edofs: &[[usize; 8]],
    solution: &FemSolution,
    moduli: &[f64],
    ke: &ElementMatrix,
) -> ComplianceField {
    let per_element: Vec<f64> = edofs
        .iter()
        .zip(moduli)
        .map(|(ed, &e)| e * unit_strain_energy(&solution.element_displacements(ed), ke))
        .collect();
    let total = per_element.iter().sum();
    ComplianceField { per_element, total }
}

/// `u_e^T KE u_e`.
pub fn unit_strain_energy(ue: &[f64; 8], ke: &ElementMatrix) -> f64 {
    ke.iter()
        .zip(ue)
        .map(|(row, ui)| ui * row.iter().zip(ue).map(|(k, uj)| k * uj).sum::<f64>())
        .sum()
}

/// Fraction of active elements with density below 0.01 or above 0.99.
pub fn contrast_index(grid: &StructuredGrid, rho: &[f64]) -> f64 {
    let active = grid.active_count();
    let crisp = rho
        .iter()
        .enumerate()
        .filter(|&(e, &r)| !grid.is_passive(e) && !(0.01..=0.99).contains(&r))
        .count();
    crisp as f64 / active as f64
}

/// Mean density over active elements.
pub fn volume_fraction(grid: &StructuredGrid, rho: &[f64]) -> f64 {
    active_sum(grid, rho) / grid.active_count() as f64
}

pub(crate) fn active_sum(grid: &StructuredGrid, rho: &[f64]) -> f64 {
    rho.iter()
        .enumerate()
        .filter(|&(e, _)| !grid.is_passive(e))
        .map(|(_, &r)| r)
        .sum()
}
