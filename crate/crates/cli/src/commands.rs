//! One function per pipeline stage. Each writes its artifacts, the effective
//! config and a run manifest into its output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gdmp_core::curvefit::{fit_samples, CurveDoc, ParametricCurve};
use gdmp_core::gdmp::{rollout, Gains, GdmpSystem, RolloutTrace, SystemDoc};
use gdmp_core::hilsim::{
    linear_loop_response, linspace, metrics, passivity_monitor, phase_margin, simulate, StabilityMap,
    StabilityResult,
};
use gdmp_core::io::{self, Table};
use gdmp_core::kinematics::joint_path_from_points;
use gdmp_core::phase::{timing_law_interpolant, PhaseSource};
use gdmp_core::phaseopt::min_time_phase;
use gdmp_core::sampling::{spatial_sample_with, timing_law, TimingLaw};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub type CliResult<T> = Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_table(path: &Path) -> CliResult<Table> {
    Ok(Table::read(&read_file(path)?[..])?)
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))
}

fn write_table(dir: &Path, name: &str, table: &Table) -> CliResult<()> {
    let mut buf = Vec::new();
    table.write(&mut buf)?;
    write_bytes(dir, name, &buf)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_bytes(dir, name, s.as_bytes())
}

fn prepare(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    inputs: Vec<InputRecord>,
    config_sha256: String,
    versions: Versions,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct Versions {
    gdmp: &'static str,
}

/// Writes the effective config and the run manifest.
fn finish(out: &Path, command: &str, inputs: &[&Path], cfg: &PipelineConfig, started: Instant) -> CliResult<()> {
    write_bytes(out, "config.json", cfg.to_json().as_bytes())?;
    let inputs = inputs
        .iter()
        .map(|p| {
            Ok(InputRecord { path: p.display().to_string(), sha256: hex::encode(Sha256::digest(read_file(p)?)) })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = Manifest {
        command,
        inputs,
        config_sha256: cfg.hash(),
        versions: Versions { gdmp: env!("CARGO_PKG_VERSION") },
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_json(out, "manifest.json", &manifest)
}

/// Spatially resamples a demonstration CSV.
pub fn resample(cfg: &PipelineConfig, input: &Path, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let traj = io::read_trajectory(&read_file(input)?[..], cfg.sampling.aux_kind)?;
    let path = spatial_sample_with(&traj, &cfg.sampling.options(traj.dim()))?;
    log::info!("resampled {} points into {} intervals", traj.len(), path.intervals());
    prepare(out)?;
    write_table(out, "path.csv", &io::path_table(&path))?;
    let law = timing_law(&path);
    write_table(out, "timing_law.csv", &io::timing_law_table(&law))?;
    write_json(out, "timing_law.json", &law)?;
    write_json(out, "summary.json", &path.summary)?;
    finish(out, "resample", &[input], cfg, started)
}

#[derive(Serialize)]
struct FitReport {
    rms_residual: f64,
    max_residual: f64,
    s_f: f64,
    samples: usize,
    joint_rms_residual: Option<f64>,
    warnings: Vec<String>,
}

/// Fits the arc-length curve of a resampled path and stores the GDMP system.
pub fn fit(cfg: &PipelineConfig, path_csv: &Path, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let samples = io::path_from_table(&read_table(path_csv)?)?;
    let c = &cfg.curvefit;
    let fitted = fit_samples(
        &samples.arclengths,
        &samples.points,
        samples.length(),
        c.n_basis,
        c.width_scale,
        c.ridge,
        samples.delta(),
    )?;
    let d = fitted.curve.dim();
    let alpha = cfg.gdmp.alpha;
    let beta = cfg.gdmp.beta.unwrap_or(alpha / 4.0);
    let gains = Gains::new(DVector::from_element(d, alpha), DVector::from_element(d, beta))?;
    let vec = |v: &Option<Vec<f64>>, name: &str| -> CliResult<Option<DVector<f64>>> {
        match v {
            Some(x) if x.len() != d => Err(CliError::input(format!("gdmp.{name} must have {d} entries"))),
            Some(x) => Ok(Some(DVector::from_column_slice(x))),
            None => Ok(None),
        }
    };
    let sys = GdmpSystem::new(fitted.curve.clone(), gains, vec(&cfg.gdmp.y0, "y0")?, vec(&cfg.gdmp.g, "g")?)?;
    let mut warnings = sys.warnings().to_vec();
    prepare(out)?;
    write_json(out, "curve.json", &fitted.curve.to_doc())?;
    write_json(out, "system.json", &sys.to_doc())?;
    let mut joint_rms = None;
    if let Some(k) = &cfg.kinematics {
        let arm = k.arm()?;
        let jp = joint_path_from_points(&arm, &samples.arclengths, &samples.points, k.plane_dims)?;
        let jfit = jp.fit(samples.length(), k.n_basis, k.width_scale, k.ridge)?;
        warnings.extend(jp.warnings.iter().cloned());
        joint_rms = Some(jfit.rms_residual);
        write_table(out, "joint_path.csv", &io::joint_path_table(&jp))?;
        write_json(out, "joint_curve.json", &jfit.curve.to_doc())?;
    }
    let report = FitReport {
        rms_residual: fitted.rms_residual,
        max_residual: fitted.max_residual,
        s_f: samples.length(),
        samples: samples.points.len(),
        joint_rms_residual: joint_rms,
        warnings,
    };
    write_json(out, "fit.json", &report)?;
    finish(out, "fit", &[path_csv], cfg, started)
}

/// Source of the phase driving a rollout.
#[derive(Debug, Clone)]
pub enum PhaseInput {
    /// Demonstrated timing law (timing_law.json from `resample`).
    Original(PathBuf),
    /// Profile CSV `t,s,sd,sdd`.
    Profile(PathBuf),
}

impl PhaseInput {
    fn path(&self) -> &Path {
        match self {
            PhaseInput::Original(p) | PhaseInput::Profile(p) => p,
        }
    }
}

#[derive(Serialize)]
struct RolloutReport {
    duration: f64,
    final_error: f64,
    reference_rms: Option<f64>,
    reference_samples: Option<usize>,
}

fn load_system(path: &Path) -> CliResult<GdmpSystem> {
    let doc: SystemDoc = read_json(path)?;
    Ok(GdmpSystem::from_doc(&doc)?)
}

/// RMS distance between the trace (linearly interpolated) and each reference
/// sample inside the trace horizon.
fn reference_rms(trace: &RolloutTrace, dt: f64, reference: &gdmp_core::sampling::TimedTrajectory) -> (f64, usize) {
    let end = *trace.t.last().unwrap();
    let (mut acc, mut n) = (0.0, 0usize);
    for (k, p) in reference.points().iter().enumerate() {
        let t = reference.time(k);
        if t > end + 1e-12 {
            break;
        }
        let u = (t / dt).min((trace.len() - 1) as f64);
        let i = (u.floor() as usize).min(trace.len() - 1);
        let j = (i + 1).min(trace.len() - 1);
        let w = u - i as f64;
        let y = &trace.y[i] * (1.0 - w) + &trace.y[j] * w;
        acc += (y - p).norm_squared();
        n += 1;
    }
    ((acc / n.max(1) as f64).sqrt(), n)
}

pub fn rollout_cmd(
    cfg: &PipelineConfig,
    system: &Path,
    phase: &PhaseInput,
    reference: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let started = Instant::now();
    let sys = load_system(system)?;
    let dt = cfg.gdmp.dt;
    let source: Box<dyn PhaseSource> = match phase {
        PhaseInput::Original(p) => {
            let law: TimingLaw = read_json(p)?;
            Box::new(timing_law_interpolant(&law)?)
        }
        PhaseInput::Profile(p) => Box::new(io::profile_from_table(&read_table(p)?)?),
    };
    let trace = rollout(&sys, source.as_ref(), dt, None)?;
    let mut report = RolloutReport {
        duration: source.duration(),
        final_error: trace.final_error(sys.goal()),
        reference_rms: None,
        reference_samples: None,
    };
    let mut inputs = vec![system, phase.path()];
    if let Some(r) = reference {
        let demo = io::read_trajectory(&read_file(r)?[..], cfg.sampling.aux_kind)?;
        if demo.dim() != sys.dim() {
            return Err(CliError::input(format!("reference has {} axes, system has {}", demo.dim(), sys.dim())));
        }
        let (rms, n) = reference_rms(&trace, dt, &demo);
        report.reference_rms = Some(rms);
        report.reference_samples = Some(n);
        inputs.push(r);
    }
    prepare(out)?;
    write_table(out, "rollout.csv", &io::rollout_table(&trace))?;
    write_json(out, "rollout.json", &report)?;
    finish(out, "rollout", &inputs, cfg, started)
}

#[derive(Serialize)]
struct OptimizeReport {
    duration: f64,
    stage1_duration: f64,
    inflation: f64,
    time_scale: f64,
    retries: usize,
    saturation_indicator: f64,
    excluded_indicator: f64,
    max_normalized: f64,
    family_max: std::collections::BTreeMap<String, f64>,
}

pub fn optimize(cfg: &PipelineConfig, system: &Path, joint_curve: Option<&Path>, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let sys = load_system(system)?;
    let kin = match joint_curve {
        Some(p) => {
            let doc: CurveDoc = read_json(p)?;
            Some(ParametricCurve::from_doc(&doc)?)
        }
        None => None,
    };
    let sol = min_time_phase(sys.curve(), sys.eta(), &cfg.phaseopt.constraints, cfg.phaseopt.grid, kin.as_ref())?;
    log::info!("optimal duration {:.6} s ({} retries)", sol.duration, sol.retries);
    prepare(out)?;
    write_table(out, "profile.csv", &io::profile_table(&sol.profile))?;
    write_table(out, "saturation.csv", &io::saturation_table(&sol.report))?;
    write_json(out, "saturation.json", &sol.report)?;
    let report = OptimizeReport {
        duration: sol.duration,
        stage1_duration: sol.stage1_duration,
        inflation: sol.inflation,
        time_scale: sol.time_scale,
        retries: sol.retries,
        saturation_indicator: sol.report.indicator,
        excluded_indicator: sol.report.excluded_indicator,
        max_normalized: sol.report.overall_max(),
        family_max: sol.report.family_max.clone(),
    };
    write_json(out, "optimize.json", &report)?;
    let mut inputs = vec![system];
    inputs.extend(joint_curve);
    finish(out, "optimize", &inputs, cfg, started)
}

#[derive(Serialize)]
struct SimulateReport {
    diverged: Option<gdmp_core::hilsim::DivergenceInfo>,
    final_s: f64,
    samples: usize,
    passivity: gdmp_core::hilsim::PassivityReport,
    metrics: Option<gdmp_core::hilsim::Metrics>,
}

pub fn simulate_cmd(cfg: &PipelineConfig, system: &Path, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let sys = load_system(system)?;
    let trace = simulate(&sys, &cfg.hil)?;
    let passivity = passivity_monitor(&trace);
    let metrics = if trace.len() > 1 { metrics(&trace, cfg.hil.metrics_window).ok() } else { None };
    prepare(out)?;
    write_table(out, "trace.csv", &io::sim_trace_table(&trace))?;
    let report = SimulateReport {
        diverged: trace.diverged,
        final_s: *trace.s.last().unwrap(),
        samples: trace.len(),
        passivity,
        metrics,
    };
    write_json(out, "simulate.json", &report)?;
    finish(out, "simulate", &[system], cfg, started)?;
    match trace.diverged {
        Some(d) => Err(CliError::Diverged { step: d.step, t: d.t }),
        None => Ok(()),
    }
}

/// Grid and delay for a stability sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    pub m: (f64, f64, usize),
    pub b: (f64, f64, usize),
    pub t0: f64,
    pub time_domain: bool,
    pub horizon: f64,
}

#[derive(Serialize)]
struct StabilityAxes<'a> {
    m: &'a [f64],
    b: &'a [f64],
    t0: f64,
    k_h: f64,
    b_h: f64,
    crossovers: &'a [Vec<Option<f64>>],
    min_margin: f64,
    all_positive: bool,
}

pub fn stability(cfg: &PipelineConfig, grid: &StabilityGrid, jobs: Option<usize>, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    for (name, (lo, hi, n)) in [("m", grid.m), ("b", grid.b)] {
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(CliError::input(format!("{name} range must be positive and non-empty")));
        }
    }
    let m = linspace(grid.m.0, grid.m.1, grid.m.2);
    let b = linspace(grid.b.0, grid.b.1, grid.b.2);
    let (k_h, b_h) = (cfg.hil.human.k_h, cfg.hil.human.b_h);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    let cells: Vec<(usize, usize)> = (0..m.len()).flat_map(|i| (0..b.len()).map(move |j| (i, j))).collect();
    let results: Vec<(StabilityResult, Option<bool>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, j)| {
                let r = phase_margin(m[i], b[j], k_h, b_h, grid.t0)?;
                let bounded = if grid.time_domain {
                    Some(linear_loop_response(m[i], b[j], k_h, b_h, grid.t0, grid.horizon)?.bounded)
                } else {
                    None
                };
                Ok((r, bounded))
            })
            .collect::<gdmp_core::Result<Vec<_>>>()
    })?;
    let rows: Vec<Vec<StabilityResult>> = results.chunks(b.len()).map(|c| c.iter().map(|r| r.0).collect()).collect();
    let map = StabilityMap::from_cells(&m, &b, k_h, b_h, grid.t0, &rows);
    prepare(out)?;
    write_table(out, "margins.csv", &io::stability_table(&map))?;
    if grid.time_domain {
        let mut t = Table::new(std::iter::once("m".to_string()).chain((1..=b.len()).map(|k| format!("b{k}"))).collect());
        for (i, chunk) in results.chunks(b.len()).enumerate() {
            let mut row = vec![m[i]];
            row.extend(chunk.iter().map(|r| if r.1 == Some(true) { 1.0 } else { 0.0 }));
            t.push(row);
        }
        write_table(out, "bounded.csv", &t)?;
    }
    let min_margin = map.margins.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let axes = StabilityAxes {
        m: &map.m,
        b: &map.b,
        t0: map.t0,
        k_h,
        b_h,
        crossovers: &map.crossovers,
        min_margin,
        all_positive: min_margin > 0.0,
    };
    write_json(out, "axes.json", &axes)?;
    finish(out, "stability", &[], cfg, started)
}

/// Every branch in sequence under `out/{resample,fit,rollout,optimize,simulate,stability}`.
pub fn pipeline(cfg: &PipelineConfig, input: &Path, out: &Path, jobs: Option<usize>) -> CliResult<()> {
    let d = |name: &str| out.join(name);
    resample(cfg, input, &d("resample"))?;
    fit(cfg, &d("resample").join("path.csv"), &d("fit"))?;
    rollout_cmd(
        cfg,
        &d("fit").join("system.json"),
        &PhaseInput::Original(d("resample").join("timing_law.json")),
        Some(input),
        &d("rollout"),
    )?;
    let joints = d("fit").join("joint_curve.json");
    let joints = cfg.kinematics.as_ref().map(|_| joints.as_path());
    optimize(cfg, &d("fit").join("system.json"), joints, &d("optimize"))?;
    rollout_cmd(
        cfg,
        &d("fit").join("system.json"),
        &PhaseInput::Profile(d("optimize").join("profile.csv")),
        None,
        &d("rollout_optimal"),
    )?;
    let grid = StabilityGrid { m: (0.2, 4.0, 5), b: (1.7, 34.0, 5), t0: cfg.hil.t0, time_domain: true, horizon: 10.0 };
    stability(cfg, &grid, jobs, &d("stability"))?;
    simulate_cmd(cfg, &d("fit").join("system.json"), &d("simulate"))
}
