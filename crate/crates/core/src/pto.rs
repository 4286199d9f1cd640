//! Proportional topology optimization.
//!
//! Material is handed out to elements in proportion to a per-element
//! weight raised to an exponent `q`: von Mises stress for the
//! stress-constrained volume minimization, elemental compliance for the
//! volume-constrained compliance minimization. Because clamping to the
//! density bounds removes part of what was handed out, the distribution is
//! repeated on the remainder until the target amount is (nearly) reached.
//!
//! The bookkeeping uses the target (`TM`), current (`CM`), move (`MM`) and
//! remaining (`RM`) material amounts:
//!
//! * stress mode: `TM = CM + MM` while the maximum stress exceeds the limit,
//!   `TM = CM - MM` otherwise, with `MM = 0.001 * N_active`;
//! * compliance mode: `TM = N_active * vlim` for the whole run, and the new
//!   field is blended with the previous one, `rho = alpha * rho_prev + (1 - alpha) * rho_opt`.

use std::fmt;

use crate::analysis::{self, ComplianceField, StressField};
use crate::error::{Error, Result};
use crate::fem::{interpolate_modulus, FemSystem, StructuredGrid};
use crate::filter::DensityFilter;
use crate::problem::Problem;

/// What the optimizer is constrained by.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// Minimize volume subject to `max sigma_vM <= limit`.
    Stress { limit: f64 },
    /// Minimize compliance at a fixed volume fraction.
    Compliance { volume_fraction: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub objective: Objective,
    /// Proportion exponent.
    pub q: f64,
    /// History coefficient.
    pub alpha: f64,
    /// Per-element move amount; `MM = move_fraction * N_active`.
    pub move_fraction: f64,
    /// The inner loop stops once the remaining amount is at most this.
    pub inner_tol: f64,
    pub inner_max_passes: usize,
    pub stop_tol_stress: f64,
    /// Compare `|max - limit| / limit` instead of the absolute gap.
    pub relative_stress_tol: bool,
    pub stop_tol_change: f64,
    /// Convergence is only accepted after this many iterations.
    pub min_iterations: usize,
    pub max_iterations: usize,
}

impl OptimizerConfig {
    /// Stress mode with `q = 2`, `alpha = 0`.
    pub fn stress(limit: f64) -> Self {
        Self {
            objective: Objective::Stress { limit },
            q: 2.0,
            alpha: 0.0,
            ..Self::base()
        }
    }

    /// Compliance mode with `q = 1`, `alpha = 0.5`.
    pub fn compliance(volume_fraction: f64) -> Self {
        Self {
            objective: Objective::Compliance { volume_fraction },
            q: 1.0,
            alpha: 0.5,
            ..Self::base()
        }
    }

    fn base() -> Self {
        Self {
            objective: Objective::Compliance { volume_fraction: 0.5 },
            q: 1.0,
            alpha: 0.0,
            move_fraction: 0.001,
            inner_tol: 0.001,
            inner_max_passes: 1_000_000,
            stop_tol_stress: 0.001,
            relative_stress_tol: false,
            stop_tol_change: 0.01,
            min_iterations: 50,
            max_iterations: 2_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self.objective {
            Objective::Stress { limit } if !(limit > 0.0 && limit.is_finite()) => {
                return bad(format!("stress limit must be positive, got {limit}"))
            }
            Objective::Compliance { volume_fraction } if !(volume_fraction > 0.0 && volume_fraction <= 1.0) => {
                return bad(format!("volume fraction {volume_fraction} outside (0, 1]"))
            }
            _ => {}
        }
        if !(self.q > 0.0) {
            return bad(format!("proportion exponent must be positive, got {}", self.q));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("history coefficient {} outside [0, 1)", self.alpha));
        }
        if !(self.move_fraction > 0.0 && self.inner_tol > 0.0 && self.stop_tol_stress > 0.0 && self.stop_tol_change > 0.0) {
            return bad("tolerances and move fraction must be positive".into());
        }
        if self.max_iterations == 0 || self.inner_max_passes == 0 {
            return bad("iteration caps must be positive".into());
        }
        Ok(())
    }
}

/// Result of one proportional distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub density: Vec<f64>,
    /// Signed `TM - sum(rho)` on exit; slightly negative on overshoot.
    pub remaining: f64,
    pub passes: usize,
    /// All weights were zero and a uniform distribution was used instead.
    pub uniform_fallback: bool,
}

/// Distributes material amounts over the active elements of a grid.
#[derive(Clone, Copy, Debug)]
pub struct Distributor<'a> {
    pub grid: &'a StructuredGrid,
    pub filter: &'a DensityFilter,
    pub bounds: (f64, f64),
    pub inner_tol: f64,
    pub max_passes: usize,
}

impl Distributor<'_> {
    /// Starting from an empty field, repeatedly hands out the remaining
    /// amount in proportion to `weights^q`, filters the increment, adds it
    /// and clamps to the bounds, until at most `inner_tol` remains.
    pub fn distribute(&self, target: f64, weights: &[f64], q: f64) -> Result<Distribution> {
        let grid = self.grid;
        let n = grid.element_count();
        assert_eq!(weights.len(), n, "one weight per element");
        let (lo, hi) = self.bounds;
        let active = grid.active_count() as f64;
        let (min, max) = (active * lo, active * hi);
        if !(target >= min && target <= max) {
            return Err(Error::UnreachableTarget { target, min, max });
        }
        if target >= max - self.inner_tol {
            // only the full field is within tolerance; iterating towards it
            // stalls on elements with near-zero weight
            let density = (0..n).map(|e| if grid.is_passive(e) { lo } else { hi }).collect();
            return Ok(Distribution {
                density,
                remaining: target - max,
                passes: 0,
                uniform_fallback: false,
            });
        }

        let mut proportion: Vec<f64> = weights
            .iter()
            .enumerate()
            .map(|(e, &w)| if grid.is_passive(e) { 0.0 } else { w.max(0.0).powf(q) })
            .collect();
        let total: f64 = proportion.iter().sum();
        let uniform_fallback = !(total > 0.0 && total.is_finite());
        if uniform_fallback {
            for (e, p) in proportion.iter_mut().enumerate() {
                *p = if grid.is_passive(e) { 0.0 } else { 1.0 / active };
            }
        } else {
            proportion.iter_mut().for_each(|p| *p /= total);
        }

        let mut density = vec![0.0; n];
        let mut increment = vec![0.0; n];
        let mut remaining = target;
        let mut passes = 0;
        while remaining > self.inner_tol {
            if passes == self.max_passes {
                return Err(Error::StagnantInnerLoop { passes, remaining });
            }
            passes += 1;
            for (d, p) in increment.iter_mut().zip(&proportion) {
                *d = remaining * p;
            }
            self.filter.apply_add(&increment, &mut density);
            for (e, r) in density.iter_mut().enumerate() {
                *r = if grid.is_passive(e) { lo } else { r.clamp(lo, hi) };
            }
            let previous = remaining;
            remaining = target - analysis::active_sum(grid, &density);
            // increments are nonnegative, so a pass that places nothing
            // will be repeated identically forever
            if remaining > self.inner_tol && remaining >= previous {
                return Err(Error::StagnantInnerLoop { passes, remaining });
            }
        }
        if passes == 0 {
            // target at or below the tolerance: the listing leaves the field empty
            for (e, r) in density.iter_mut().enumerate() {
                *r = if grid.is_passive(e) { lo } else { r.clamp(lo, hi) };
            }
        }
        Ok(Distribution {
            density,
            remaining,
            passes,
            uniform_fallback,
        })
    }
}

/// `alpha * previous + (1 - alpha) * optimum`, element-wise over active elements.
pub fn blend(grid: &StructuredGrid, previous: &[f64], optimum: &[f64], alpha: f64) -> Vec<f64> {
    previous
        .iter()
        .zip(optimum)
        .enumerate()
        .map(|(e, (&p, &o))| if grid.is_passive(e) { p } else { alpha * p + (1.0 - alpha) * o })
        .collect()
}

/// Largest absolute density change over active elements.
pub fn max_change(grid: &StructuredGrid, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|&(e, _)| !grid.is_passive(e))
        .map(|(_, (x, y))| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Change metric written as `(1/alpha - 1) * max|optimum - updated|`.
///
/// Since `updated - previous = (1 - alpha)(optimum - previous)` and
/// `optimum - updated = alpha (optimum - previous)`, this equals
/// `max|updated - previous|` for any `alpha` in `(0, 1)`.
pub fn change_from_optimum(alpha: f64, optimum: &[f64], updated: &[f64]) -> f64 {
    optimum
        .iter()
        .zip(updated)
        .map(|(o, u)| ((1.0 / alpha - 1.0) * (o - u)).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub density: Vec<f64>,
    pub target: f64,
    pub remaining: f64,
    pub passes: usize,
    pub uniform_fallback: bool,
    /// Largest density change relative to the previous field.
    pub change: f64,
}

/// One stress-mode update: move `TM` by `MM` toward the stress limit and
/// redistribute in proportion to `sigma_vM^q`.
pub fn ptos_step(
    density: &[f64],
    stress: &StressField,
    config: &OptimizerConfig,
    distributor: &Distributor<'_>,
) -> Result<StepOutcome> {
    let Objective::Stress { limit } = config.objective else {
        return Err(Error::InvalidConfig("ptos_step needs a stress objective".into()));
    };
    let grid = distributor.grid;
    let current = analysis::active_sum(grid, density);
    let movement = config.move_fraction * grid.active_count() as f64;
    let target = if stress.max_active(grid) > limit {
        current + movement
    } else {
        current - movement
    };
    finish_step(density, target, &stress.von_mises, config, distributor)
}

/// One compliance-mode update at the fixed target `N_active * vlim`.
pub fn ptoc_step(
    density: &[f64],
    compliance: &ComplianceField,
    config: &OptimizerConfig,
    distributor: &Distributor<'_>,
) -> Result<StepOutcome> {
    let Objective::Compliance { volume_fraction } = config.objective else {
        return Err(Error::InvalidConfig("ptoc_step needs a compliance objective".into()));
    };
    let target = distributor.grid.active_count() as f64 * volume_fraction;
    finish_step(density, target, &compliance.per_element, config, distributor)
}

fn finish_step(
    density: &[f64],
    target: f64,
    weights: &[f64],
    config: &OptimizerConfig,
    distributor: &Distributor<'_>,
) -> Result<StepOutcome> {
    let dist = distributor.distribute(target, weights, config.q)?;
    let grid = distributor.grid;
    let updated = blend(grid, density, &dist.density, config.alpha);
    let change = max_change(grid, &updated, density);
    Ok(StepOutcome {
        density: updated,
        target,
        remaining: dist.remaining,
        passes: dist.passes,
        uniform_fallback: dist.uniform_fallback,
        change,
    })
}

/// Convergence measure printed in the last log column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    /// `|max sigma_vM - sigma_l|`.
    Residual(f64),
    /// Largest density change since the previous iteration.
    Change(f64),
}

impl Metric {
    pub fn value(self) -> f64 {
        match self {
            Metric::Residual(v) | Metric::Change(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_von_mises: f64,
    pub compliance: f64,
    pub volume_fraction: f64,
    pub metric: Metric,
    /// Signed remaining amount of the distribution run after this analysis.
    pub remaining: Option<f64>,
    pub inner_passes: usize,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "It:{:5} Max_vms:{:5.2} Comp:{:8.2} Vol:{:5.2} ",
            self.iteration, self.max_von_mises, self.compliance, self.volume_fraction
        )?;
        match self.metric {
            Metric::Residual(v) => write!(f, "Res:{}", fixed(v, 6, 3)),
            Metric::Change(v) => write!(f, "Ch:{}", fixed(v, 6, 3)),
        }
    }
}

// printf-style %w.pf, with non-finite values spelled the way MATLAB does
fn fixed(v: f64, width: usize, precision: usize) -> String {
    if v.is_infinite() {
        format!("{:>width$}", if v > 0.0 { "Inf" } else { "-Inf" })
    } else if v.is_nan() {
        format!("{:>width$}", "NaN")
    } else {
        format!("{v:width$.precision$}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
        })
    }
}

/// Final state of an optimization run. The fields describe the last
/// analyzed density.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub density: Vec<f64>,
    pub stress: StressField,
    pub compliance: ComplianceField,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("at least one iteration")
    }

    /// The iteration log, one line per iteration.
    pub fn log(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

/// Result of analysing one density field.
pub(crate) struct Analysis {
    pub stress: StressField,
    pub compliance: ComplianceField,
}

pub(crate) fn analyse(system: &FemSystem, problem: &Problem, density: &[f64]) -> Result<Analysis> {
    let grid = &problem.grid;
    let moduli = interpolate_modulus(grid, density, &problem.material);
    let solution = system.solve(&moduli)?;
    let stress = analysis::recover_stress(grid, system.connectivity(), &solution, &moduli, problem.material.nu);
    let compliance = analysis::elemental_compliance(system.connectivity(), &solution, &moduli, system.element_matrix());
    Ok(Analysis { stress, compliance })
}

/// Runs PTOs or PTOc to convergence (or the iteration cap).
///
/// Each iteration analyses the current field, logs it, checks the stop rule
/// (which is only honored after `min_iterations`) and then updates the
/// field.
pub fn run(problem: &Problem, config: &OptimizerConfig) -> Result<RunOutcome> {
    run_with(problem, config, |_| {})
}

/// [`run`] with a callback invoked on every iteration record.
pub fn run_with(
    problem: &Problem,
    config: &OptimizerConfig,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<RunOutcome> {
    config.validate()?;
    let grid = &problem.grid;
    let system = FemSystem::new(grid, &problem.bc, problem.material.nu)?;
    let filter = DensityFilter::new(grid, problem.rmin)?;
    let distributor = Distributor {
        grid,
        filter: &filter,
        bounds: problem.bounds,
        inner_tol: config.inner_tol,
        max_passes: config.inner_max_passes,
    };
    let start = match config.objective {
        Objective::Stress { .. } => 0.5,
        Objective::Compliance { volume_fraction } => volume_fraction,
    };
    let mut density = problem.uniform_field(start);
    let mut change = f64::INFINITY;
    let mut records: Vec<IterationRecord> = Vec::new();

    loop {
        let iteration = records.len() + 1;
        let Analysis { stress, compliance } = analyse(&system, problem, &density)?;
        let max_vm = stress.max_active(grid);
        let metric = match config.objective {
            Objective::Stress { limit } => {
                let gap = (max_vm - limit).abs();
                Metric::Residual(if config.relative_stress_tol { gap / limit } else { gap })
            }
            Objective::Compliance { .. } => Metric::Change(change),
        };
        let tolerance = match metric {
            Metric::Residual(_) => config.stop_tol_stress,
            Metric::Change(_) => config.stop_tol_change,
        };
        records.push(IterationRecord {
            iteration,
            max_von_mises: max_vm,
            compliance: compliance.total,
            volume_fraction: analysis::volume_fraction(grid, &density),
            metric,
            remaining: None,
            inner_passes: 0,
        });

        let termination = if metric.value() < tolerance && iteration > config.min_iterations {
            Some(Termination::Converged)
        } else if iteration >= config.max_iterations {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        if let Some(termination) = termination {
            on_iteration(records.last().unwrap());
            return Ok(RunOutcome {
                density,
                stress,
                compliance,
                records,
                termination,
            });
        }

        let step = match config.objective {
            Objective::Stress { .. } => ptos_step(&density, &stress, config, &distributor)?,
            Objective::Compliance { .. } => ptoc_step(&density, &compliance, config, &distributor)?,
        };
        let record = records.last_mut().unwrap();
        record.remaining = Some(step.remaining);
        record.inner_passes = step.passes;
        on_iteration(record);
        change = step.change;
        density = step.density;
    }
}
