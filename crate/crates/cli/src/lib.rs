//! The `geocoil` command line: geodesic and averaged runs, stationary points,
//! separatrix nets, the deformation atlas and the exact-versus-averaged
//! comparison.
//!
//! Every command collects its outputs in memory and writes them to `--out`
//! only after it has finished, so a failed run leaves no partial files.
//!
//! Exit statuses: `0` success, `2` usage or configuration error, `3`
//! marginal or degenerate input, `4` numerical failure.

pub mod compare;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use geocoil::averaged::AveragedModel;
use geocoil::export;
use geocoil::geodesic::PhaseState;
use geocoil::render::{render_net, render_region_map, RenderStyle};
use geocoil::separatrix::{trace_separatrices, Space, TraceOptions};
use geocoil::stationary::count_stability;
use geocoil::{
    classify_type, integrate_averaged, integrate_geodesic, quotient_antipodal, sample_region_map, verify_type, Real3,
    SeparatrixGraph, SurfaceSpec, TopType,
};
use serde::Serialize;

pub use config::RunConfig;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_RESOLUTION: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] geocoil::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Write { .. } => 2,
            CliError::Core(geocoil::Error::InvalidInput(_)) => 2,
            CliError::Core(e) if e.is_degenerate() => 3,
            CliError::Core(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geocoil", version, about = "Geodesic coils on a slightly deformed sphere")]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SurfaceArgs {
    /// Quartic deformation coefficients.
    #[arg(long, num_args = 3, value_names = ["E1", "E2", "E3"], allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,
    /// Ellipsoid semi-axes.
    #[arg(long, num_args = 3, value_names = ["A1", "A2", "A3"], conflicts_with = "eps")]
    pub ellipsoid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct StateArgs {
    /// Initial position (projected onto the surface).
    #[arg(long, num_args = 3, value_names = ["X1", "X2", "X3"], allow_negative_numbers = true)]
    pub x: Option<Vec<f64>>,
    /// Initial velocity (projected onto the tangent plane).
    #[arg(long, num_args = 3, value_names = ["V1", "V2", "V3"], allow_negative_numbers = true)]
    pub v: Option<Vec<f64>>,
    #[arg(long)]
    pub t_end: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the exact geodesic flow.
    Geodesic {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        state: StateArgs,
    },
    /// Integrate the averaged momentum flow.
    Averaged {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Initial angular momentum.
        #[arg(long = "l0", num_args = 3, value_names = ["L1", "L2", "L3"], allow_negative_numbers = true)]
        l0: Option<Vec<f64>>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// List the stationary points of the averaged flow.
    Stationary {
        #[command(flatten)]
        surface: SurfaceArgs,
    },
    /// Trace the separatrix net and report its type.
    Net {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Radius of the momentum sphere.
        #[arg(long)]
        l_norm: Option<f64>,
    },
    /// Map the Types over the projective disk of deformations.
    Atlas {
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Compare exact loop normals with the averaged flow.
    Compare {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        state: StateArgs,
        /// Start from the time-reversed end of a forward run.
        #[arg(long)]
        reverse: bool,
    },
}

/// Files produced by a command and the line it prints on success.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: Option<String>,
}

impl Outcome {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        let err = |path: &Path, source| CliError::Write { path: path.to_path_buf(), source };
        std::fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| err(&path, e))?;
        }
        Ok(())
    }
}

fn triple(v: &Option<Vec<f64>>) -> Option<[f64; 3]> {
    v.as_ref().map(|v| [v[0], v[1], v[2]])
}

fn merge_surface(cfg: &mut RunConfig, s: &SurfaceArgs) -> Result<(), CliError> {
    if let Some(e) = triple(&s.eps) {
        cfg.eps = Some(e);
    }
    if let Some([a, b, c]) = triple(&s.ellipsoid) {
        cfg.eps = None;
        cfg.surface = Some(SurfaceSpec::ellipsoid(a, b, c)?);
    }
    Ok(())
}

fn merge_state(cfg: &mut RunConfig, s: &StateArgs) {
    cfg.x0 = triple(&s.x).or(cfg.x0);
    cfg.v0 = triple(&s.v).or(cfg.v0);
    cfg.t_end = s.t_end.or(cfg.t_end);
}

fn initial_state(cfg: &RunConfig, surface: &SurfaceSpec) -> Result<PhaseState, CliError> {
    let x = RunConfig::require(cfg.x0, "x0")?;
    let v = RunConfig::require(cfg.v0, "v0")?;
    Ok(PhaseState::on_surface(surface, Real3::from(x), Real3::from(v), 0.0)?)
}

/// Resolves the configuration for a command: config file first, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.tol = cli.tol.or(cfg.tol);
    match &cli.command {
        Command::Geodesic { surface, state } => {
            merge_surface(&mut cfg, surface)?;
            merge_state(&mut cfg, state);
        }
        Command::Averaged { surface, l0, t_end } => {
            merge_surface(&mut cfg, surface)?;
            cfg.l0 = triple(l0).or(cfg.l0);
            cfg.t_end = t_end.or(cfg.t_end);
        }
        Command::Stationary { surface } => merge_surface(&mut cfg, surface)?,
        Command::Net { surface, l_norm } => {
            merge_surface(&mut cfg, surface)?;
            cfg.l_norm = l_norm.or(cfg.l_norm);
        }
        Command::Atlas { resolution } => cfg.resolution = resolution.or(cfg.resolution),
        Command::Compare { surface, state, reverse } => {
            merge_surface(&mut cfg, surface)?;
            merge_state(&mut cfg, state);
            if *reverse {
                cfg.reverse = Some(true);
            }
        }
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct GeodesicStatsFile<'a> {
    surface: &'a SurfaceSpec,
    t_end: f64,
    tol: f64,
    samples: usize,
    stats: &'a geocoil::geodesic::TrajectoryStats,
}

#[derive(Serialize)]
struct AveragedStatsFile<'a> {
    model: &'a AveragedModel,
    t_end: f64,
    tol: f64,
    samples: usize,
    stats: &'a geocoil::averaged::AveragedStats,
}

/// Runs the command described by `cli` without touching the file system
/// (apart from reading `--config`).
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve_config(cli)?;
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let mut out = Outcome::default();
    match &cli.command {
        Command::Geodesic { .. } => {
            let surface = cfg.surface()?;
            let init = initial_state(&cfg, &surface)?;
            let t_end = RunConfig::require(cfg.t_end, "t_end")?;
            let traj = integrate_geodesic(&surface, &init, t_end, tol)?;
            out.file("trajectory.csv", export::trajectory_csv(&traj));
            let stats =
                GeodesicStatsFile { surface: &surface, t_end, tol, samples: traj.samples.len(), stats: &traj.stats };
            out.file("geodesic_stats.json", export::to_json(&stats)?);
            out.summary = Some(format!(
                "samples={} constraint_drift={:.3e} energy_drift={:.3e}",
                traj.samples.len(),
                traj.stats.max_constraint_drift,
                traj.stats.max_energy_drift
            ));
        }
        Command::Averaged { .. } => {
            let model = AveragedModel::for_surface(&cfg.surface()?);
            let l0 = Real3::from(RunConfig::require(cfg.l0, "L0")?);
            let t_end = RunConfig::require(cfg.t_end, "t_end")?;
            let traj = integrate_averaged(&model, &l0, t_end, tol)?;
            out.file("averaged.csv", export::averaged_csv(&traj));
            let stats =
                AveragedStatsFile { model: &model, t_end, tol, samples: traj.samples.len(), stats: &traj.stats };
            out.file("averaged_stats.json", export::to_json(&stats)?);
            out.summary = Some(format!(
                "samples={} casimir_drift={:.3e} energy_drift={:.3e}",
                traj.samples.len(),
                traj.stats.max_casimir_step_drift,
                traj.stats.max_hamiltonian_drift
            ));
        }
        Command::Stationary { .. } => {
            let model = AveragedModel::for_surface(&cfg.surface()?);
            let points = geocoil::stationary::enumerate_for_model(&model)?;
            out.file("stationary.json", export::stationary_json(&points)?);
            let (foci, saddles) = count_stability(&points);
            out.summary = Some(format!("points={} foci={foci} saddles={saddles}", points.len()));
        }
        Command::Net { .. } => {
            let eps = cfg.eps()?;
            let top = classify_type(eps.as_array(), geocoil::atlas::DEFAULT_TOL)?;
            if top == TopType::Marginal {
                let scale = eps.max_abs() * eps.max_abs();
                let value = geocoil::boundary_residuals(eps.as_array()).amin() / scale;
                return Err(geocoil::Error::Marginal { value }.into());
            }
            let l_norm = cfg.l_norm.unwrap_or(1.0);
            let opts = TraceOptions { tol, ..TraceOptions::default() };
            let sphere = trace_separatrices(&AveragedModel::quartic(eps), l_norm, &opts)?;
            let net = quotient_antipodal(&sphere)?;
            let verified = verify_type(&net, &eps)?;
            let (foci, saddles) = net.counts();
            out.file("net.json", export::graph_json(&net)?);
            let style = RenderStyle { title: Some(format!("Type {verified}")), ..RenderStyle::default() };
            out.file("net.svg", render_net(&net, &style));
            out.summary = Some(format!("type={verified} foci={foci} saddles={saddles}"));
        }
        Command::Atlas { .. } => {
            let grid = sample_region_map(cfg.resolution.unwrap_or(DEFAULT_RESOLUTION))?;
            out.file("atlas.csv", export::region_csv(&grid));
            out.file("atlas.svg", render_region_map(&grid));
            let count = |t: TopType| grid.iter().filter(|s| s.top == t).count();
            out.summary = Some(format!(
                "cells={} I={} II={} III={} IV={} marginal={}",
                grid.len(),
                count(TopType::I),
                count(TopType::II),
                count(TopType::III),
                count(TopType::IV),
                count(TopType::Marginal)
            ));
        }
        Command::Compare { .. } => {
            let surface = cfg.surface()?;
            let init = initial_state(&cfg, &surface)?;
            let horizon = cfg.t_end.unwrap_or(compare::DEFAULT_HORIZON);
            let run = if cfg.reverse.unwrap_or(false) { compare::compare_reversed } else { compare::compare };
            let c = run(&surface, &init, horizon, tol)?;
            out.file("compare.json", export::to_json(&c.report)?);
            out.file("compare.svg", comparison_figure(&c));
            out.summary = Some(format!(
                "loops={} max_angle_error={:.6}",
                c.report.summary.loops, c.report.summary.max_angle_error
            ));
        }
    }
    Ok(out)
}

/// Net of the averaged flow with the exact loop normals and the averaged
/// trajectory drawn over it.
fn comparison_figure(c: &compare::Comparison) -> String {
    let model = c.averaged.model;
    let l_norm = c.averaged.samples[0].1.norm();
    let net = trace_separatrices(&model, l_norm, &TraceOptions::default())
        .and_then(|g| quotient_antipodal(&g))
        .unwrap_or_else(|_| SeparatrixGraph {
            vertices: Vec::new(),
            edges: Vec::new(),
            space: Space::ProjectivePlane,
            model,
            l_norm,
            unresolved: Vec::new(),
        });
    let exact: Vec<Real3> = c.report.records.iter().map(|r| Real3::from(r.exact_normal)).collect();
    let averaged: Vec<Real3> = c.averaged.samples.iter().map(|(_, l)| l.normalize()).collect();
    let style = RenderStyle {
        title: Some("exact loop normals vs averaged flow".into()),
        overlays: vec![averaged, exact],
        ..RenderStyle::default()
    };
    render_net(&net, &style)
}

/// Runs `cli`, writes its outputs and returns the process exit status.
pub fn execute(cli: &Cli) -> i32 {
    match run(cli).and_then(|o| o.write_to(&cli.out).map(|_| o)) {
        Ok(o) => {
            if let Some(s) = o.summary {
                println!("{s}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
