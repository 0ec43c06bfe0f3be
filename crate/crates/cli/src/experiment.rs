//! The experiment harness: sweeps over `(L, ε, trial)` cells, runs the
//! configured protocol against the simulator oracle, images the recovered
//! operator, and writes every artifact to disk.
//!
//! A run is fully determined by its configuration: every random draw derives
//! from the config seeds, cells own independent noise streams, and output
//! files are byte-identical across repeated runs. Wall time is reported in
//! the returned manifest but never written to disk.

use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use imager_core::forward::{
    assemble_response_born, assemble_response_paraxial, derive_seed, ResponseMatrix,
};
use imager_core::imaging::{
    detect_peaks, localization_report, music_pseudospectrum, subspace_split, LocalizationReport,
};
use imager_core::recovery::protocol::ProtocolContext;
use imager_core::recovery::{IntensityOracle, SimulatorOracle};

use crate::config::{ForwardModel, RunPlan};
use crate::error::Result;
use crate::io;

/// Outcome summary of one `(L, ε, trial)` cell.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub name: String,
    pub l: f64,
    pub epsilon: f64,
    pub trial: usize,
    pub illuminations: u64,
    pub budget: u64,
    pub matched: usize,
    pub misses: usize,
    pub ghosts: usize,
    pub exact: bool,
    pub files: Vec<String>,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_hash: u64,
    pub protocol: &'static str,
    pub noise_seed: u64,
    pub scene_seed: u64,
    pub transducers: usize,
    pub cells: Vec<CellSummary>,
    /// Relative paths of every file written, manifest excluded.
    pub files: Vec<String>,
    /// Wall-clock duration; reported to the caller only so that outputs stay
    /// byte-identical across runs.
    pub wall: std::time::Duration,
}

impl RunManifest {
    /// Renders the on-disk manifest (deterministic; no timing).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "config_hash={:016x}", self.config_hash).expect("string write");
        writeln!(out, "protocol={}", self.protocol).expect("string write");
        writeln!(out, "transducers={}", self.transducers).expect("string write");
        writeln!(out, "noise_seed={}", self.noise_seed).expect("string write");
        writeln!(out, "scene_seed={}", self.scene_seed).expect("string write");
        for cell in &self.cells {
            writeln!(
                out,
                "cell={} l={} epsilon={} trial={} illuminations={} budget={} \
                 matched={} misses={} ghosts={} exact={}",
                cell.name,
                cell.l,
                cell.epsilon,
                cell.trial,
                cell.illuminations,
                cell.budget,
                cell.matched,
                cell.misses,
                cell.ghosts,
                cell.exact
            )
            .expect("string write");
        }
        for file in &self.files {
            writeln!(out, "file={file}").expect("string write");
        }
        out
    }
}

/// Runs the full sweep described by the plan and writes all outputs under
/// `plan.out_dir`.
pub fn run_experiment(plan: &RunPlan) -> Result<RunManifest> {
    let started = Instant::now();
    let out_root = Path::new(&plan.out_dir);
    io::prepare_dir(out_root)?;

    let mut cells: Vec<(usize, f64, f64, usize)> = Vec::new();
    for &l in &plan.l_values {
        for &eps in &plan.epsilons {
            for trial in 0..plan.trials {
                cells.push((cells.len(), l, eps, trial));
            }
        }
    }

    let summaries: Vec<CellSummary> = cells
        .par_iter()
        .map(|&(index, l, eps, trial)| run_cell(plan, out_root, index, l, eps, trial))
        .collect::<Result<Vec<_>>>()?;

    let files = summaries
        .iter()
        .flat_map(|c| c.files.iter().cloned())
        .collect();
    let manifest = RunManifest {
        config_hash: plan.config_hash,
        protocol: plan.protocol.name(),
        noise_seed: plan.noise_seed,
        scene_seed: plan.scene_seed,
        transducers: plan.geometry.n(),
        cells: summaries,
        files,
        wall: started.elapsed(),
    };
    std::fs::write(out_root.join("manifest.txt"), manifest.to_text())
        .map_err(crate::error::CliError::io(out_root.join("manifest.txt")))?;
    Ok(manifest)
}

/// Assembles the configured forward model for one cell.
pub fn assemble_forward(
    plan: &RunPlan,
    l: f64,
) -> Result<(
    imager_core::geometry::ImagingGrid,
    imager_core::geometry::Scene,
    ResponseMatrix,
)> {
    let grid = plan.grid(l)?;
    let scene = plan.scene(&grid)?;
    let response = match plan.forward {
        ForwardModel::Born => assemble_response_born(&plan.geometry, &grid, &scene)?,
        ForwardModel::Paraxial => assemble_response_paraxial(&plan.geometry, &grid, &scene)?,
    };
    Ok((grid, scene, response))
}

fn run_cell(
    plan: &RunPlan,
    out_root: &Path,
    index: usize,
    l: f64,
    epsilon: f64,
    trial: usize,
) -> Result<CellSummary> {
    let name = cell_name(l, epsilon, trial);
    let dir = out_root.join(&name);
    io::prepare_dir(&dir)?;

    let (grid, scene, response) = assemble_forward(plan, l)?;
    let cell_seed = derive_seed(plan.noise_seed, index as u64);
    let oracle =
        SimulatorOracle::with_model(response.clone(), epsilon, cell_seed, plan.noise_model)?;
    let ctx = ProtocolContext {
        oracle: &oracle,
        geometry: &plan.geometry,
        grid: &grid,
        truth: Some(&response),
        options: plan.options,
    };
    plan.protocol
        .validate(&ctx)
        .map_err(crate::error::CliError::from)?;
    let outcome = plan.protocol.run(&ctx)?;
    let budget = plan.protocol.budget(plan.geometry.n());
    let illuminations = oracle.queries().max(outcome.illuminations);

    let split = subspace_split(outcome.imaging_matrix(), plan.rank_rule(&scene))?;
    let ps = music_pseudospectrum(&split, &plan.geometry, &grid)?;
    let peaks = detect_peaks(&ps, plan.peak_rule(&scene))?;
    let report = localization_report(&peaks.indices, &scene, &grid);

    let mut files = Vec::new();
    let mut record = |file: String| files.push(format!("{name}/{file}"));
    if plan.write_csv {
        io::export_pseudospectrum(&ps, &dir.join("pseudospectrum.csv"))?;
        record("pseudospectrum.csv".into());
        io::export_matrix(&outcome.operator.matrix, &dir.join("operator.csv"))?;
        record("operator.csv".into());
        if let Some(resp) = &outcome.response {
            io::export_matrix(&resp.matrix, &dir.join("response.csv"))?;
            record("response.csv".into());
        }
    }
    if plan.write_pgm {
        io::export_pgm(&ps, &dir.join("pseudospectrum.pgm"))?;
        record("pseudospectrum.pgm".into());
    }
    io::export_report(&report, &dir.join("report.txt"))?;
    record("report.txt".into());

    Ok(CellSummary {
        name,
        l,
        epsilon,
        trial,
        illuminations,
        budget,
        matched: report.matched.len(),
        misses: report.misses.len(),
        ghosts: report.ghosts.len(),
        exact: report.is_exact(),
        files,
    })
}

pub fn cell_name(l: f64, epsilon: f64, trial: usize) -> String {
    format!("L{l}_eps{epsilon}_t{trial}")
}

/// Convenience used by the `image` subcommand and tests.
pub fn report_for(
    detected: &[usize],
    scene: &imager_core::geometry::Scene,
    grid: &imager_core::geometry::ImagingGrid,
) -> LocalizationReport {
    localization_report(detected, scene, grid)
}
