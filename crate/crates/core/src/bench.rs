//! Run orchestration for the benchmark problems: single runs, the
//! PTOc/PTOs alternation experiment and PTOc-versus-OC volume sweeps.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::oc::{self, OcConfig};
use crate::output;
use crate::problem::{Problem, ProblemSpec};
use crate::pto::{self, OptimizerConfig, RunOutcome, Termination};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Stress-constrained volume minimization.
    Ptos,
    /// Volume-constrained compliance minimization.
    Ptoc,
    /// Optimality criteria compliance minimization.
    Oc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ptos => "ptos",
            Method::Ptoc => "ptoc",
            Method::Oc => "oc",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ptos" => Ok(Method::Ptos),
            "ptoc" => Ok(Method::Ptoc),
            "oc" | "top88" => Ok(Method::Oc),
            other => Err(Error::InvalidSpec(format!("unknown method `{other}`"))),
        }
    }
}

/// Optional overrides of the per-method defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tuning {
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// One optimization to perform. `limit` is the stress limit for
/// [`Method::Ptos`] and the volume fraction otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRequest {
    pub method: Method,
    pub limit: f64,
    pub tuning: Tuning,
}

impl RunRequest {
    pub fn new(method: Method, limit: f64) -> Self {
        Self {
            method,
            limit,
            tuning: Tuning::default(),
        }
    }

    pub fn with_tuning(mut self, tuning: Tuning) -> Self {
        self.tuning = tuning;
        self
    }

    fn optimizer_config(&self) -> OptimizerConfig {
        let mut config = match self.method {
            Method::Ptos => OptimizerConfig::stress(self.limit),
            _ => OptimizerConfig::compliance(self.limit),
        };
        if let Some(q) = self.tuning.q {
            config.q = q;
        }
        if let Some(alpha) = self.tuning.alpha {
            config.alpha = alpha;
        }
        if let Some(n) = self.tuning.max_iterations {
            config.max_iterations = n;
        }
        config
    }

    fn oc_config(&self) -> OcConfig {
        let mut config = OcConfig::new(self.limit);
        if let Some(n) = self.tuning.max_iterations {
            config.max_iterations = n;
        }
        config
    }
}

/// The columns of a results table row, plus wall time.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub method: Method,
    pub iterations: usize,
    pub volume_fraction: f64,
    pub compliance: f64,
    pub max_von_mises: f64,
    pub contrast: f64,
    pub termination: Termination,
    pub wall_time: Duration,
}

impl RunSummary {
    pub fn from_outcome(method: Method, problem: &Problem, outcome: &RunOutcome, wall_time: Duration) -> Self {
        Self {
            method,
            iterations: outcome.iterations(),
            volume_fraction: analysis::volume_fraction(&problem.grid, &outcome.density),
            compliance: outcome.compliance.total,
            max_von_mises: outcome.stress.max_active(&problem.grid),
            contrast: analysis::contrast_index(&problem.grid, &outcome.density),
            termination: outcome.termination,
            wall_time,
        }
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<5} it={:4} vf={:.4} C={:9.3} max_vm={:.4} contrast={:.3} {} ({:.1?})",
            self.method,
            self.iterations,
            self.volume_fraction,
            self.compliance,
            self.max_von_mises,
            self.contrast,
            self.termination,
            self.wall_time
        )
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    pub summary: RunSummary,
    pub outcome: RunOutcome,
}

/// Runs one method on an already built problem.
pub fn run_problem(problem: &Problem, request: &RunRequest) -> Result<BenchmarkRun> {
    let start = Instant::now();
    let outcome = match request.method {
        Method::Ptos | Method::Ptoc => pto::run(problem, &request.optimizer_config())?,
        Method::Oc => oc::run_oc(problem, &request.oc_config())?,
    };
    let summary = RunSummary::from_outcome(request.method, problem, &outcome, start.elapsed());
    Ok(BenchmarkRun { summary, outcome })
}

/// Builds the problem, runs it and, when `out` is given, writes the field
/// files, images, iteration log and summary there.
pub fn run_benchmark(spec: &ProblemSpec, request: &RunRequest, out: Option<&Path>) -> Result<BenchmarkRun> {
    let problem = spec.build()?;
    let run = run_problem(&problem, request)?;
    if let Some(dir) = out {
        output::write_run(dir, spec, &problem, &run)?;
    }
    Ok(run)
}

/// One PTOc run and the PTOs run fed with its maximum stress.
#[derive(Clone, Debug)]
pub struct AlternationRound {
    pub ptoc: RunSummary,
    pub ptos: RunSummary,
    /// `(vf_ptoc - vf_ptos) / vf_ptoc` at (nearly) equal maximum stress.
    pub volume_improvement: f64,
    /// `(sigma_ptoc - sigma_ptos) / sigma_ptoc` at equal volume fraction,
    /// where `sigma_ptoc` comes from the next round's PTOc run.
    pub stress_improvement: f64,
}

#[derive(Clone, Debug)]
pub struct Alternation {
    pub rounds: Vec<AlternationRound>,
    /// The PTOc run at the last PTOs volume fraction.
    pub closing: RunSummary,
}

impl Alternation {
    pub fn mean_volume_improvement(&self) -> f64 {
        mean(self.rounds.iter().map(|r| r.volume_improvement))
    }

    pub fn mean_stress_improvement(&self) -> f64 {
        mean(self.rounds.iter().map(|r| r.stress_improvement))
    }

    /// Every PTOc and PTOs summary in the order they were run.
    pub fn summaries(&self) -> impl Iterator<Item = &RunSummary> {
        self.rounds
            .iter()
            .flat_map(|r| [&r.ptoc, &r.ptos])
            .chain(std::iter::once(&self.closing))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Alternates PTOc and PTOs: PTOc at `start_vf` yields a maximum stress,
/// PTOs at that stress yields a volume fraction, which is fed back to PTOc,
/// and so on for `rounds` rounds. A closing PTOc run at the final volume
/// fraction completes the last stress comparison.
pub fn run_alternation(
    problem: &Problem,
    start_vf: f64,
    rounds: usize,
    tuning: &Tuning,
    mut on_run: impl FnMut(&RunSummary),
) -> Result<Alternation> {
    if rounds == 0 {
        return Err(Error::InvalidConfig("alternation needs at least one round".into()));
    }
    let mut run = |method, limit| -> Result<RunSummary> {
        let request = RunRequest::new(method, limit).with_tuning(tuning.clone());
        let summary = run_problem(problem, &request)?.summary;
        on_run(&summary);
        Ok(summary)
    };
    let mut pairs = Vec::with_capacity(rounds);
    let mut ptoc = run(Method::Ptoc, start_vf)?;
    for _ in 0..rounds {
        let ptos = run(Method::Ptos, ptoc.max_von_mises)?;
        let next = run(Method::Ptoc, ptos.volume_fraction)?;
        pairs.push((ptoc, ptos, next.max_von_mises));
        ptoc = next;
    }
    let rounds = pairs
        .into_iter()
        .map(|(ptoc, ptos, sigma_next)| AlternationRound {
            volume_improvement: (ptoc.volume_fraction - ptos.volume_fraction) / ptoc.volume_fraction,
            stress_improvement: (sigma_next - ptos.max_von_mises) / sigma_next,
            ptoc,
            ptos,
        })
        .collect();
    Ok(Alternation { rounds, closing: ptoc })
}

/// PTOc and OC at one volume fraction.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub volume_fraction: f64,
    pub ptoc: RunSummary,
    pub oc: RunSummary,
}

impl SweepPoint {
    /// `|C_ptoc - C_oc| / C_oc`.
    pub fn relative_gap(&self) -> f64 {
        (self.ptoc.compliance - self.oc.compliance).abs() / self.oc.compliance
    }

    /// `(it_ptoc - it_oc) / it_oc`.
    pub fn iteration_ratio(&self) -> f64 {
        (self.ptoc.iterations as f64 - self.oc.iterations as f64) / self.oc.iterations as f64
    }
}

/// The volume fractions 0.25, 0.30, ..., 0.50.
pub fn default_sweep() -> Vec<f64> {
    (0..6).map(|k| (25 + 5 * k) as f64 / 100.0).collect()
}

/// Runs PTOc and OC at every volume fraction in `fractions`.
pub fn run_sweep(
    problem: &Problem,
    fractions: &[f64],
    tuning: &Tuning,
    mut on_point: impl FnMut(&SweepPoint),
) -> Result<Vec<SweepPoint>> {
    if let Some(vf) = fractions.iter().find(|vf| !(**vf > 0.0 && **vf <= 1.0)) {
        return Err(Error::InvalidConfig(format!("volume fraction {vf} outside (0, 1]")));
    }
    fractions
        .iter()
        .map(|&vf| {
            let point = compare(problem, vf, tuning)?;
            on_point(&point);
            Ok(point)
        })
        .collect()
}

/// PTOc and OC side by side at one volume fraction.
pub fn compare(problem: &Problem, volume_fraction: f64, tuning: &Tuning) -> Result<SweepPoint> {
    let ptoc = run_problem(problem, &RunRequest::new(Method::Ptoc, volume_fraction).with_tuning(tuning.clone()))?;
    let oc = run_problem(problem, &RunRequest::new(Method::Oc, volume_fraction).with_tuning(tuning.clone()))?;
    Ok(SweepPoint {
        volume_fraction,
        ptoc: ptoc.summary,
        oc: oc.summary,
    })
}
