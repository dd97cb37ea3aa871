//! Numeric CSV tables and the export formats of each pipeline stage.
//!
//! Every value is written with 17 significant digits and LF line endings so
//! that identical inputs give byte-identical files.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{GdmpError, Result};
use crate::gdmp::{ClassicTrace, RolloutTrace};
use crate::hilsim::{SimTrace, StabilityMap};
use crate::kinematics::JointPath;
use crate::phase::{PhaseProfile, PhaseSample};
use crate::phaseopt::SaturationReport;
use crate::sampling::{AuxChannels, AuxKind, SpatialPath, TimedTrajectory, TimingLaw};

/// Header plus rows of floating-point values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn parse_err(msg: impl Into<String>) -> GdmpError {
    GdmpError::Parse(msg.into())
}

fn csv_err(e: csv::Error) -> GdmpError {
    parse_err(e.to_string())
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().any(String::is_empty) {
            return Err(parse_err("missing or empty header"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != header.len() {
                return Err(parse_err(format!("row {} has {} fields, expected {}", i + 1, rec.len(), header.len())));
            }
            let row = rec
                .iter()
                .enumerate()
                .map(|(c, f)| {
                    f.parse::<f64>()
                        .map_err(|_| parse_err(format!("row {} column '{}': cannot parse '{f}'", i + 1, header[c])))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_value(*v))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(format!("missing column '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Indices of the columns `{prefix}1, {prefix}2, ...` in numeric order.
    pub fn numbered(&self, prefix: &str) -> Vec<usize> {
        let mut out = Vec::new();
        for k in 1.. {
            match self.header.iter().position(|h| *h == format!("{prefix}{k}")) {
                Some(c) => out.push(c),
                None => break,
            }
        }
        out
    }

    fn vectors(&self, cols: &[usize]) -> Vec<DVector<f64>> {
        self.rows.iter().map(|r| DVector::from_iterator(cols.len(), cols.iter().map(|&c| r[c]))).collect()
    }
}

fn numbered_header(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}{k}"))
}

/// Parses `t,x1..xd[,a1..am]`; aux columns are interpreted as `aux_kind`.
pub fn trajectory_from_table(table: &Table, aux_kind: AuxKind) -> Result<TimedTrajectory> {
    if table.header.first().map(String::as_str) != Some("t") {
        return Err(parse_err("first column must be 't'"));
    }
    let xs = table.numbered("x");
    if xs.is_empty() {
        return Err(parse_err("no position columns x1..xd"));
    }
    let extra = table.header.len() - 1 - xs.len();
    let aux_cols = table.numbered("a");
    if aux_cols.len() != extra {
        return Err(parse_err(format!(
            "unexpected columns in header {:?}; expected t,x1..xd[,a1..am]",
            table.header
        )));
    }
    let times = table.column("t")?;
    let aux = (!aux_cols.is_empty()).then(|| AuxChannels { kind: aux_kind, samples: table.vectors(&aux_cols) });
    TimedTrajectory::from_timestamps(&times, table.vectors(&xs), aux)
}

pub fn read_trajectory<R: Read>(reader: R, aux_kind: AuxKind) -> Result<TimedTrajectory> {
    trajectory_from_table(&Table::read(reader)?, aux_kind)
}

pub fn trajectory_table(traj: &TimedTrajectory) -> Table {
    let m = traj.aux().map(|a| a.samples[0].len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    header.extend(numbered_header("x", traj.dim()));
    header.extend(numbered_header("a", m));
    let mut table = Table::new(header);
    for (k, p) in traj.points().iter().enumerate() {
        let mut row = vec![traj.time(k)];
        row.extend(p.iter());
        if let Some(a) = traj.aux() {
            row.extend(a.samples[k].iter());
        }
        table.push(row);
    }
    table
}

/// `s,t,x1..xd[,a1..am]`.
pub fn path_table(path: &SpatialPath) -> Table {
    let m = path.aux.as_ref().map(|a| a.samples[0].len()).unwrap_or(0);
    let mut header = vec!["s".to_string(), "t".to_string()];
    header.extend(numbered_header("x", path.dim()));
    header.extend(numbered_header("a", m));
    let mut table = Table::new(header);
    for k in 0..path.points.len() {
        let mut row = vec![path.arclengths[k], path.times[k]];
        row.extend(path.points[k].iter());
        if let Some(a) = &path.aux {
            row.extend(a.samples[k].iter());
        }
        table.push(row);
    }
    table
}

/// Spatial samples read back from a path export.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSamples {
    pub arclengths: Vec<f64>,
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
}

impl PathSamples {
    pub fn delta(&self) -> f64 {
        if self.arclengths.len() > 1 { self.arclengths[1] - self.arclengths[0] } else { 0.0 }
    }

    pub fn length(&self) -> f64 {
        self.arclengths.last().copied().unwrap_or(0.0)
    }
}

pub fn path_from_table(table: &Table) -> Result<PathSamples> {
    let xs = table.numbered("x");
    if xs.is_empty() {
        return Err(parse_err("no position columns x1..xd"));
    }
    let samples = PathSamples { arclengths: table.column("s")?, times: table.column("t")?, points: table.vectors(&xs) };
    if samples.points.len() < 2 {
        return Err(GdmpError::InsufficientData("a path needs at least 2 samples".into()));
    }
    Ok(samples)
}

pub fn timing_law_table(law: &TimingLaw) -> Table {
    let mut table = Table::new(vec!["t".into(), "s".into()]);
    for &(t, s) in &law.samples {
        table.push(vec![t, s]);
    }
    table
}

/// `t,s,sd,x1..xd,v1..vd,a1..ad`.
pub fn rollout_table(trace: &RolloutTrace) -> Table {
    let d = trace.y.first().map(|y| y.len()).unwrap_or(0);
    let mut header = vec!["t".to_string(), "s".into(), "sd".into()];
    header.extend(numbered_header("x", d));
    header.extend(numbered_header("v", d));
    header.extend(numbered_header("a", d));
    let mut table = Table::new(header);
    for k in 0..trace.len() {
        let mut row = vec![trace.t[k], trace.s[k], trace.sd[k]];
        row.extend(trace.y[k].iter());
        row.extend(trace.yd[k].iter());
        row.extend(trace.ydd[k].iter());
        table.push(row);
    }
    table
}

/// `t,s,x1..xd,v1..vd` for the classic baseline (s is the canonical phase).
pub fn classic_table(trace: &ClassicTrace) -> Table {
    let d = trace.y.first().map(|y| y.len()).unwrap_or(0);
    let mut header = vec!["t".to_string(), "s".into()];
    header.extend(numbered_header("x", d));
    header.extend(numbered_header("v", d));
    let mut table = Table::new(header);
    for k in 0..trace.t.len() {
        let mut row = vec![trace.t[k], trace.s[k]];
        row.extend(trace.y[k].iter());
        row.extend(trace.yd[k].iter());
        table.push(row);
    }
    table
}

/// `t,s,sd,sdd`.
pub fn profile_table(profile: &PhaseProfile) -> Table {
    let mut table = Table::new(vec!["t".into(), "s".into(), "sd".into(), "sdd".into()]);
    for p in profile.samples() {
        table.push(vec![p.t, p.s, p.sd, p.sdd]);
    }
    table
}

pub fn profile_from_table(table: &Table) -> Result<PhaseProfile> {
    let (t, s, sd, sdd) = (table.column("t")?, table.column("s")?, table.column("sd")?, table.column("sdd")?);
    if t.len() < 2 {
        return Err(GdmpError::InsufficientData("a phase profile needs at least 2 samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let samples = (0..t.len()).map(|k| PhaseSample { t: t[k], s: s[k], sd: sd[k], sdd: sdd[k] }).collect();
    PhaseProfile::new(dt, samples)
}

/// `s,q1,q2`.
pub fn joint_path_table(jp: &JointPath) -> Table {
    let mut table = Table::new(vec!["s".into(), "q1".into(), "q2".into()]);
    for (s, q) in jp.arclengths.iter().zip(&jp.joints) {
        table.push(vec![*s, q[0], q[1]]);
    }
    table
}

/// `t` followed by every normalized constraint value and their maximum.
pub fn saturation_table(report: &SaturationReport) -> Table {
    let mut header = vec!["t".to_string()];
    header.extend(report.values.keys().cloned());
    header.push("max".into());
    let mut table = Table::new(header);
    for k in 0..report.t.len() {
        let mut row = vec![report.t[k]];
        row.extend(report.values.values().map(|v| v[k]));
        row.push(report.max_normalized[k]);
        table.push(row);
    }
    table
}

pub fn sim_trace_table(trace: &SimTrace) -> Table {
    let d = trace.y.first().map(|y| y.len()).unwrap_or(0);
    let mut header: Vec<String> = vec!["t".into(), "s".into(), "sd".into(), "sdd".into()];
    for p in ["x", "v", "xm", "vm", "fh"] {
        header.extend(numbered_header(p, d));
    }
    for h in ["f_tau", "tangent_norm", "p_tau", "p_t", "work", "e_k1", "e_u", "e_k2", "storage", "storage_rate", "residual"] {
        header.push(h.into());
    }
    let mut table = Table::new(header);
    for k in 0..trace.len() {
        let mut row = vec![trace.t[k], trace.s[k], trace.sd[k], trace.sdd[k]];
        for v in [&trace.y[k], &trace.yd[k], &trace.ym[k], &trace.ydm[k], &trace.f_h[k]] {
            row.extend(v.iter());
        }
        row.extend([
            trace.f_tau[k],
            trace.tangent_norm[k],
            trace.p_tau[k],
            trace.p_t[k],
            trace.work[k],
            trace.e_k1[k],
            trace.e_u[k],
            trace.e_k2[k],
            trace.storage[k],
            trace.storage_rate[k],
            trace.residual[k],
        ]);
        table.push(row);
    }
    table
}

/// One row per mass: `m,b1..bn` holds the margins (degrees) for each damping
/// value of the JSON axes.
pub fn stability_table(map: &StabilityMap) -> Table {
    let mut header = vec!["m".to_string()];
    header.extend(numbered_header("b", map.b.len()));
    let mut table = Table::new(header);
    for (m, row) in map.m.iter().zip(&map.margins) {
        let mut r = vec![*m];
        r.extend(row.iter());
        table.push(r);
    }
    table
}
