//! Plain-text and image artifacts: ASCII field grids, 8-bit PGM images,
//! iteration logs and key/value summaries.
//!
//! Everything written here is a pure function of the run, so repeating a
//! run reproduces the files byte for byte. Wall time is therefore left out
//! of the summary file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::bench::{Alternation, BenchmarkRun, RunSummary, SweepPoint};
use crate::error::Result;
use crate::fem::StructuredGrid;
use crate::problem::{Problem, ProblemSpec};

/// One line per grid row (top row first), `nelx` values per line.
pub fn format_grid(grid: &StructuredGrid, values: &[f64]) -> String {
    assert_eq!(values.len(), grid.element_count(), "one value per element");
    let mut out = String::with_capacity(values.len() * 14);
    for row in 0..grid.nely() {
        for col in 0..grid.nelx() {
            if col > 0 {
                out.push(' ');
            }
            write!(out, "{:.6e}", values[grid.element(col, row)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Binary PGM (P5) with one pixel per element. Values are divided by
/// `scale` and drawn in inverted gray, so 1 is black and 0 is white.
pub fn pgm(grid: &StructuredGrid, values: &[f64], scale: f64) -> Vec<u8> {
    assert_eq!(values.len(), grid.element_count(), "one value per element");
    let mut out = format!("P5\n{} {}\n255\n", grid.nelx(), grid.nely()).into_bytes();
    for row in 0..grid.nely() {
        for col in 0..grid.nelx() {
            let v = values[grid.element(col, row)];
            let t = if scale > 0.0 { (v / scale).clamp(0.0, 1.0) } else { 0.0 };
            out.push(255 - (255.0 * t).round() as u8);
        }
    }
    out
}

/// Largest value over active elements, the normalization used for the
/// stress and compliance images.
pub fn active_max(grid: &StructuredGrid, values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|&(e, _)| !grid.is_passive(e))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max)
}

pub fn format_summary(spec: &ProblemSpec, summary: &RunSummary) -> String {
    let grid_line = format!("nelx = {}\nnely = {}\n", spec.nelx, spec.nely);
    format!(
        "problem = {}\nmethod = {}\n{grid_line}iterations = {}\nvolume_fraction = {:.6}\ncompliance = {:.6}\nmax_von_mises = {:.6}\ncontrast_index = {:.6}\ntermination = {}\n",
        spec.kind,
        summary.method,
        summary.iterations,
        summary.volume_fraction,
        summary.compliance,
        summary.max_von_mises,
        summary.contrast,
        summary.termination,
    )
}

/// Writes `density`, `von_mises` and `compliance` as `.txt` grids and
/// `.pgm` images, plus `log.txt` and `summary.txt`, into `dir`.
pub fn write_run(dir: &Path, spec: &ProblemSpec, problem: &Problem, run: &BenchmarkRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = &problem.grid;
    let outcome = &run.outcome;
    let fields: [(&str, &[f64], f64); 3] = [
        ("density", &outcome.density, 1.0),
        ("von_mises", &outcome.stress.von_mises, active_max(grid, &outcome.stress.von_mises)),
        (
            "compliance",
            &outcome.compliance.per_element,
            active_max(grid, &outcome.compliance.per_element),
        ),
    ];
    for (name, values, scale) in fields {
        fs::write(dir.join(format!("{name}.txt")), format_grid(grid, values))?;
        fs::write(dir.join(format!("{name}.pgm")), pgm(grid, values, scale))?;
    }
    let header = format!("# method={} problem={}\n", run.summary.method, spec.kind);
    fs::write(dir.join("log.txt"), header + &outcome.log())?;
    fs::write(dir.join("summary.txt"), format_summary(spec, &run.summary))?;
    Ok(())
}

/// Tab-separated compliance-versus-volume table.
pub fn format_sweep(points: &[SweepPoint]) -> String {
    let mut out = String::from("vf\tC_ptoc\tC_oc\tgap\tit_ptoc\tit_oc\tcontrast_ptoc\tcontrast_oc\n");
    for p in points {
        writeln!(
            out,
            "{:.2}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{:.3}\t{:.3}",
            p.volume_fraction,
            p.ptoc.compliance,
            p.oc.compliance,
            p.relative_gap(),
            p.ptoc.iterations,
            p.oc.iterations,
            p.ptoc.contrast,
            p.oc.contrast
        )
        .unwrap();
    }
    out
}

/// Tab-separated alternation table followed by the mean improvements.
pub fn format_alternation(alt: &Alternation) -> String {
    let mut out = String::from("round\tvf_ptoc\tvm_ptoc\tvf_ptos\tvm_ptos\tvolume_impr\tstress_impr\n");
    for (k, r) in alt.rounds.iter().enumerate() {
        writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            k + 1,
            r.ptoc.volume_fraction,
            r.ptoc.max_von_mises,
            r.ptos.volume_fraction,
            r.ptos.max_von_mises,
            r.volume_improvement,
            r.stress_improvement
        )
        .unwrap();
    }
    writeln!(
        out,
        "# mean stress improvement = {:.4}\n# mean volume improvement = {:.4}",
        alt.mean_stress_improvement(),
        alt.mean_volume_improvement()
    )
    .unwrap();
    out
}
