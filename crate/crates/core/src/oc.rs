//! Optimality-criteria compliance minimization, used as a gradient-based
//! reference for the proportional compliance optimizer.
//!
//! The multiplicative update `x * (-dc / (lambda * dv))^eta` is
//! move-limited and clamped to the density bounds, and `lambda` is found by
//! bisection so the physical volume meets the target. The cone filter of
//! the proportional method is reused either on the sensitivities (the
//! default) or on the design variables; see [`FilterMode`].

use crate::analysis::{self, ComplianceField, StressField};
use crate::error::{Error, Result};
use crate::fem::{FemSolution, FemSystem, Material, StructuredGrid};
use crate::filter::DensityFilter;
use crate::problem::Problem;
use crate::pto::{analyse, max_change, Analysis, IterationRecord, Metric, RunOutcome, Termination};

/// How the cone filter enters the OC method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FilterMode {
    /// Physical densities are the filtered design variables.
    Density,
    /// Densities are used directly; sensitivities are smoothed with
    /// `sum_j H_ij x_j dc_j / (max(x_i, 1e-3) sum_j H_ij)`.
    #[default]
    Sensitivity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OcConfig {
    pub volume_fraction: f64,
    pub filter: FilterMode,
    pub move_limit: f64,
    /// Damping exponent on the optimality ratio.
    pub damping: f64,
    /// Relative width of the multiplier bracket at which bisection stops.
    pub bisection_tol: f64,
    pub stop_tol_change: f64,
    pub min_iterations: usize,
    pub max_iterations: usize,
}

impl OcConfig {
    pub fn new(volume_fraction: f64) -> Self {
        Self {
            volume_fraction,
            filter: FilterMode::Sensitivity,
            move_limit: 0.2,
            damping: 0.5,
            bisection_tol: 1e-3,
            stop_tol_change: 0.01,
            min_iterations: 0,
            max_iterations: 2_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vf = self.volume_fraction;
        if !(vf > 0.0 && vf <= 1.0) {
            return Err(Error::InvalidConfig(format!("volume fraction {vf} outside (0, 1]")));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(Error::InvalidConfig(format!("move limit {} outside (0, 1]", self.move_limit)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.bisection_tol > 0.0 && self.stop_tol_change > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig("tolerances and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// `dC/drho_e = -dE/drho(rho_e) * u_e^T KE u_e` with respect to the physical
/// densities. Zero for passive elements.
pub fn compliance_sensitivities(
    system: &FemSystem,
    solution: &FemSolution,
    physical: &[f64],
    material: &Material,
) -> Vec<f64> {
    let grid = system.grid();
    system
        .connectivity()
        .iter()
        .zip(physical)
        .enumerate()
        .map(|(e, (ed, &rho))| {
            if grid.is_passive(e) {
                0.0
            } else {
                let energy = analysis::unit_strain_energy(&solution.element_displacements(ed), system.element_matrix());
                -material.modulus_derivative(rho) * energy
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OcUpdate {
    pub design: Vec<f64>,
    pub physical: Vec<f64>,
    pub multiplier: f64,
}

/// Physical densities for a design field: `W x` under density filtering,
/// `x` itself under sensitivity filtering. Passive elements are pinned at
/// `lo`.
pub fn physical_density(
    grid: &StructuredGrid,
    filter: &DensityFilter,
    mode: FilterMode,
    design: &[f64],
    lo: f64,
) -> Vec<f64> {
    let mut phys = match mode {
        FilterMode::Density => filter.apply(design),
        FilterMode::Sensitivity => design.to_vec(),
    };
    for (e, p) in phys.iter_mut().enumerate() {
        if grid.is_passive(e) {
            *p = lo;
        }
    }
    phys
}

/// One OC update of the design field.
///
/// `dc` are sensitivities with respect to the physical densities; the
/// target is the physical material amount over active elements.
pub fn oc_update(
    grid: &StructuredGrid,
    design: &[f64],
    dc: &[f64],
    target: f64,
    config: &OcConfig,
    filter: &DensityFilter,
    bounds: (f64, f64),
) -> Result<OcUpdate> {
    if let Some(e) = dc.iter().position(|d| !d.is_finite()) {
        return Err(Error::BisectionFailure(format!("non-finite sensitivity at element {e}")));
    }
    let (lo, hi) = bounds;
    let m = config.move_limit;
    let mode = config.filter;
    let (dc_design, dv_design) = match mode {
        FilterMode::Density => (filter.apply_transpose(dc), filter.apply_transpose(&vec![1.0; dc.len()])),
        FilterMode::Sensitivity => {
            let weighted: Vec<f64> = design.iter().zip(dc).map(|(x, d)| x * d).collect();
            let smoothed = filter
                .apply(&weighted)
                .iter()
                .zip(design)
                .map(|(s, x)| s / x.max(1e-3))
                .collect();
            (smoothed, vec![1.0; dc.len()])
        }
    };

    let trial = |lambda: f64| -> Vec<f64> {
        design
            .iter()
            .enumerate()
            .map(|(e, &x)| {
                if grid.is_passive(e) {
                    return lo;
                }
                let ratio = (-dc_design[e] / dv_design[e] / lambda).max(0.0);
                let scaled = x * ratio.powf(config.damping);
                scaled.min(x + m).min(hi).max(x - m).max(lo)
            })
            .collect()
    };
    let volume = |x: &[f64]| analysis::active_sum(grid, &physical_density(grid, filter, mode, x, lo));

    let (mut l1, mut l2) = (0.0_f64, 1e9_f64);
    let most = volume(&trial(f64::MIN_POSITIVE));
    let least = volume(&trial(l2));
    let slack = 1e-9 * grid.active_count() as f64;
    if target > most + slack || target < least - slack {
        return Err(Error::BisectionFailure(format!(
            "target {target} outside reachable volume [{least}, {most}]"
        )));
    }
    while (l2 - l1) / (l1 + l2) > config.bisection_tol {
        let mid = 0.5 * (l1 + l2);
        if volume(&trial(mid)) > target {
            l1 = mid;
        } else {
            l2 = mid;
        }
    }
    let multiplier = 0.5 * (l1 + l2);
    let design = trial(multiplier);
    let physical = physical_density(grid, filter, mode, &design, lo);
    Ok(OcUpdate {
        design,
        physical,
        multiplier,
    })
}

/// Runs the OC method from a uniform field at the target volume fraction.
/// Stops when the largest design change falls below `stop_tol_change`.
pub fn run_oc(problem: &Problem, config: &OcConfig) -> Result<RunOutcome> {
    run_oc_with(problem, config, |_| {})
}

pub fn run_oc_with(
    problem: &Problem,
    config: &OcConfig,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<RunOutcome> {
    config.validate()?;
    let grid = &problem.grid;
    let system = FemSystem::new(grid, &problem.bc, problem.material.nu)?;
    let filter = DensityFilter::new(grid, problem.rmin)?;
    let target = grid.active_count() as f64 * config.volume_fraction;

    let mut design = problem.uniform_field(config.volume_fraction);
    let mut physical = design.clone();
    let mut change = f64::INFINITY;
    let mut records = Vec::new();
    loop {
        let iteration = records.len() + 1;
        let (solution, stress, compliance) = analyse_with_solution(&system, problem, &physical)?;
        let record = IterationRecord {
            iteration,
            max_von_mises: stress.max_active(grid),
            compliance: compliance.total,
            volume_fraction: analysis::volume_fraction(grid, &physical),
            metric: Metric::Change(change),
            remaining: None,
            inner_passes: 0,
        };
        on_iteration(&record);
        records.push(record);

        let termination = if change < config.stop_tol_change && iteration > config.min_iterations {
            Some(Termination::Converged)
        } else if iteration >= config.max_iterations {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        if let Some(termination) = termination {
            return Ok(RunOutcome {
                density: physical,
                stress,
                compliance,
                records,
                termination,
            });
        }

        let dc = compliance_sensitivities(&system, &solution, &physical, &problem.material);
        let update = oc_update(grid, &design, &dc, target, config, &filter, problem.bounds)?;
        change = max_change(grid, &update.design, &design);
        design = update.design;
        physical = update.physical;
    }
}

fn analyse_with_solution(
    system: &FemSystem,
    problem: &Problem,
    density: &[f64],
) -> Result<(FemSolution, StressField, ComplianceField)> {
    let moduli = crate::fem::interpolate_modulus(&problem.grid, density, &problem.material);
    let solution = system.solve(&moduli)?;
    let stress = analysis::recover_stress(&problem.grid, system.connectivity(), &solution, &moduli, problem.material.nu);
    let compliance = analysis::elemental_compliance(system.connectivity(), &solution, &moduli, system.element_matrix());
    Ok((solution, stress, compliance))
}

/// Total compliance of a physical density field; convenience for
/// finite-difference checks.
pub fn total_compliance(system: &FemSystem, problem: &Problem, physical: &[f64]) -> Result<f64> {
    let Analysis { compliance, .. } = analyse(system, problem, physical)?;
    Ok(compliance.total)
}
