//! Benchmark problem definitions: MBB half-beam, cantilever and L-bracket.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryConditions, Material, StructuredGrid};

/// A fully specified design problem: mesh, supports, loads, material,
/// filter radius and density bounds.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: StructuredGrid,
    pub bc: BoundaryConditions,
    pub material: Material,
    pub rmin: f64,
    pub bounds: (f64, f64),
}

impl Problem {
    pub fn new(
        grid: StructuredGrid,
        bc: BoundaryConditions,
        material: Material,
        rmin: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        material.validate()?;
        let (lo, hi) = bounds;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "density bounds [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"
            )));
        }
        if !(rmin > 0.0) {
            return Err(Error::InvalidSpec(format!("filter radius must be positive, got {rmin}")));
        }
        Ok(Self {
            grid,
            bc,
            material,
            rmin,
            bounds,
        })
    }

    /// Active elements at `value` (clamped to the bounds), passive at the
    /// lower bound.
    pub fn uniform_field(&self, value: f64) -> Vec<f64> {
        let (lo, hi) = self.bounds;
        (0..self.grid.element_count())
            .map(|e| if self.grid.is_passive(e) { lo } else { value.clamp(lo, hi) })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Mbb,
    Cantilever,
    #[serde(alias = "l-bracket", alias = "l_bracket")]
    Lbracket,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Mbb, ProblemKind::Cantilever, ProblemKind::Lbracket];

    /// Default discretization `(nelx, nely)`; for the bracket `(long, short)`.
    pub fn default_size(self) -> (usize, usize) {
        match self {
            ProblemKind::Mbb => (120, 40),
            ProblemKind::Cantilever => (120, 60),
            ProblemKind::Lbracket => (100, 40),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Mbb => "mbb",
            ProblemKind::Cantilever => "cantilever",
            ProblemKind::Lbracket => "lbracket",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mbb" => Ok(ProblemKind::Mbb),
            "cantilever" => Ok(ProblemKind::Cantilever),
            "lbracket" | "l-bracket" | "l_bracket" => Ok(ProblemKind::Lbracket),
            other => Err(Error::InvalidSpec(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// Parameters of a named benchmark.
///
/// For [`ProblemKind::Lbracket`], `nelx` is the long edge and `nely` the
/// short edge (leg width) in elements; the mesh is an `nelx x nelx`
/// bounding square with its upper-right `(nelx - nely)^2` block passive.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub nelx: usize,
    pub nely: usize,
    pub edge_length: f64,
    /// Total load magnitude.
    pub lv: f64,
    /// Number of elements the load (and MBB roller support) is spread over.
    pub ld: usize,
    pub material: Material,
    pub rmin: f64,
    pub bounds: (f64, f64),
}

impl ProblemSpec {
    /// The benchmark at its default size with unit load over 3 elements,
    /// `rmin = 1.5` and bounds `[0, 1]`.
    pub fn new(kind: ProblemKind) -> Self {
        let (nelx, nely) = kind.default_size();
        Self {
            kind,
            nelx,
            nely,
            edge_length: 1.0,
            lv: 1.0,
            ld: 3,
            material: Material::default(),
            rmin: 1.5,
            bounds: (0.0, 1.0),
        }
    }

    pub fn with_size(mut self, nelx: usize, nely: usize) -> Self {
        self.nelx = nelx;
        self.nely = nely;
        self
    }

    pub fn build(&self) -> Result<Problem> {
        let (grid, bc) = build_problem(self)?;
        Problem::new(grid, bc, self.material, self.rmin, self.bounds)
    }
}

/// Mesh and boundary conditions of a named benchmark.
pub fn build_problem(spec: &ProblemSpec) -> Result<(StructuredGrid, BoundaryConditions)> {
    let ProblemSpec { nelx, nely, ld, lv, .. } = *spec;
    if nelx == 0 || nely == 0 || ld == 0 {
        return Err(Error::InvalidSpec(format!(
            "counts must be positive (nelx={nelx}, nely={nely}, ld={ld})"
        )));
    }
    let share = -lv / ld as f64;
    match spec.kind {
        ProblemKind::Mbb => {
            if ld > nelx + 1 || ld > nely + 1 {
                return Err(Error::InvalidSpec(format!("ld={ld} exceeds an edge of the {nelx}x{nely} beam")));
            }
            let grid = StructuredGrid::new(nelx, nely, spec.edge_length)?;
            // x-symmetry along the left edge; y-roller on the last `ld` nodes
            // (bottom of the right edge)
            let nodes = grid.node_count();
            let mut fixed: Vec<usize> = (0..=nely).map(|row| 2 * grid.node(0, row)).collect();
            fixed.extend((nodes - ld..nodes).map(|n| 2 * n + 1));
            let loads = (0..ld).map(|col| (2 * grid.node(col, 0) + 1, share)).collect();
            let bc = BoundaryConditions::new(fixed, loads)?;
            Ok((grid, bc))
        }
        ProblemKind::Cantilever => {
            if ld > nely + 1 {
                return Err(Error::InvalidSpec(format!("ld={ld} exceeds the right edge ({} nodes)", nely + 1)));
            }
            let grid = StructuredGrid::new(nelx, nely, spec.edge_length)?;
            let fixed: Vec<usize> = (0..=nely).flat_map(|row| {
                let n = grid.node(0, row);
                [2 * n, 2 * n + 1]
            })
            .collect();
            let first = (nely + 1 - ld) / 2;
            let loads = (first..first + ld).map(|row| (2 * grid.node(nelx, row) + 1, share)).collect();
            let bc = BoundaryConditions::new(fixed, loads)?;
            Ok((grid, bc))
        }
        ProblemKind::Lbracket => {
            let (long, short) = (nelx, nely);
            if short >= long {
                return Err(Error::InvalidSpec(format!("bracket leg {short} must be shorter than edge {long}")));
            }
            if ld > long - short + 1 {
                return Err(Error::InvalidSpec(format!("ld={ld} exceeds the loaded face ({} nodes)", long - short + 1)));
            }
            let cut = long - short;
            let base = StructuredGrid::new(long, long, spec.edge_length)?;
            let mask = (0..base.element_count())
                .map(|e| {
                    let (col, row) = base.element_position(e);
                    col >= short && row < cut
                })
                .collect();
            let grid = base.with_passive(mask)?;
            let fixed: Vec<usize> = (0..=short)
                .flat_map(|col| {
                    let n = grid.node(col, 0);
                    [2 * n, 2 * n + 1]
                })
                .collect();
            // downward load on the top face of the short leg, starting at its right end
            let loads = (0..ld).map(|k| (2 * grid.node(long - k, cut) + 1, share)).collect();
            let bc = BoundaryConditions::new(fixed, loads)?;
            Ok((grid, bc))
        }
    }
}
