//! Minimum-time phase along a fitted curve under phase, task-space and
//! joint-space velocity/acceleration limits.
//!
//! Stage 1 is the classic path-velocity decomposition: a maximum velocity
//! curve in x = ṡ² followed by backward and forward integration of extremal
//! accelerations. Stage 2 (optional) smooths s̈ with a moving average to
//! bound jerk and zero the endpoint accelerations, then stretches time if
//! the smoothing pushed any constraint over its bound.

use std::collections::BTreeMap;

use log::{debug, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::curvefit::ParametricCurve;
use crate::error::{invalid, GdmpError, Result};
use crate::phase::{PhaseProfile, PhaseSample};

/// Tangent norm below which the curve is not treated as regular.
pub const MIN_TANGENT: f64 = 0.5;
/// Normalized value that counts as saturated.
pub const SATURATION_LEVEL: f64 = 0.99;
const MAX_RETRIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TaskNorm {
    /// Bound the Euclidean norm of the scaled task velocity/acceleration.
    #[default]
    Euclidean,
    /// Bound each scaled axis separately.
    PerAxis,
}

/// Bounds; `None` disables a constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSet {
    pub sd_max: Option<f64>,
    pub sdd_max: Option<f64>,
    pub sddd_max: Option<f64>,
    pub yd_max: Option<f64>,
    pub ydd_max: Option<f64>,
    pub qd_max: Option<Vec<f64>>,
    pub qdd_max: Option<Vec<f64>>,
    pub task_norm: TaskNorm,
    /// Request s̈(0) = s̈(T_f) = 0 even without a jerk bound.
    pub zero_end_accel: bool,
}

impl ConstraintSet {
    /// Phase-space velocity and acceleration bounds only.
    pub fn phase(sd_max: f64, sdd_max: f64) -> Self {
        ConstraintSet { sd_max: Some(sd_max), sdd_max: Some(sdd_max), ..Default::default() }
    }

    pub fn validate(&self, d: usize, joints: Option<usize>) -> Result<()> {
        let scalars = [
            ("sd_max", self.sd_max),
            ("sdd_max", self.sdd_max),
            ("sddd_max", self.sddd_max),
            ("yd_max", self.yd_max),
            ("ydd_max", self.ydd_max),
        ];
        for (name, v) in scalars {
            if let Some(v) = v {
                if !(v > 0.0) || v.is_nan() {
                    return Err(invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [("qd_max", &self.qd_max), ("qdd_max", &self.qdd_max)] {
            if let Some(v) = v {
                let Some(n) = joints else {
                    return Err(invalid(format!("{name} requires a kinematic map")));
                };
                if v.len() != n {
                    return Err(invalid(format!("{name} has {} entries for {n} joints", v.len())));
                }
                if v.iter().any(|x| !(*x > 0.0)) {
                    return Err(invalid(format!("{name} entries must be positive")));
                }
            }
        }
        if self.sd_max.is_none() && self.yd_max.is_none() && self.qd_max.is_none() {
            return Err(invalid("at least one velocity bound must be enabled"));
        }
        if self.sdd_max.is_none() && self.ydd_max.is_none() && self.qdd_max.is_none() {
            return Err(invalid("at least one acceleration bound must be enabled"));
        }
        let _ = d;
        Ok(())
    }

    fn wants_smoothing(&self) -> bool {
        self.sddd_max.is_some() || self.zero_end_accel
    }
}

/// Scaled path derivatives at one arc length.
struct Node {
    s: f64,
    e1: Vec<f64>,
    e2: Vec<f64>,
    q1: Vec<f64>,
    q2: Vec<f64>,
}

impl Node {
    fn new(s: f64, curve: &ParametricCurve, eta: &DVector<f64>, kin: Option<&ParametricCurve>) -> Result<Self> {
        let cp = curve.point(s)?;
        let norm = cp.d1.norm();
        if norm < MIN_TANGENT {
            return Err(GdmpError::RegularityViolation { s, norm });
        }
        let e1 = cp.d1.component_mul(eta).iter().copied().collect();
        let e2 = cp.d2.component_mul(eta).iter().copied().collect();
        let (q1, q2) = match kin {
            Some(k) => {
                let qp = k.point(s)?;
                (qp.d1.iter().copied().collect(), qp.d2.iter().copied().collect())
            }
            None => (vec![], vec![]),
        };
        Ok(Node { s, e1, e2, q1, q2 })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intersects [lo, hi] with {a : |c·x + e·a| ≤ bound}.
fn linear_cut(lo: &mut f64, hi: &mut f64, c: f64, e: f64, x: f64, bound: f64) -> bool {
    let base = c * x;
    if e.abs() < 1e-300 {
        return base.abs() <= bound * (1.0 + 1e-12);
    }
    let a1 = (-bound - base) / e;
    let a2 = (bound - base) / e;
    *lo = lo.max(a1.min(a2));
    *hi = hi.min(a1.max(a2));
    true
}

impl ConstraintSet {
    /// Squared-velocity ceiling from the velocity bounds alone.
    fn velocity_ceiling(&self, n: &Node) -> f64 {
        let mut v = f64::INFINITY;
        if let Some(m) = self.sd_max {
            v = v.min(m);
        }
        if let Some(m) = self.yd_max {
            match self.task_norm {
                TaskNorm::Euclidean => v = v.min(m / dot(&n.e1, &n.e1).sqrt()),
                TaskNorm::PerAxis => {
                    for e in &n.e1 {
                        v = v.min(m / e.abs());
                    }
                }
            }
        }
        if let Some(q) = &self.qd_max {
            for (m, e) in q.iter().zip(&n.q1) {
                v = v.min(m / e.abs());
            }
        }
        v * v
    }

    /// Admissible s̈ at (s, ṡ² = x), or `None` when empty.
    fn accel_bounds(&self, n: &Node, x: f64) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        if let Some(m) = self.sdd_max {
            lo = -m;
            hi = m;
        }
        if let Some(m) = self.ydd_max {
            match self.task_norm {
                TaskNorm::Euclidean => {
                    let ee = dot(&n.e1, &n.e1);
                    let ec = dot(&n.e1, &n.e2);
                    let cc = dot(&n.e2, &n.e2);
                    let disc = (x * ec).powi(2) - ee * (x * x * cc - m * m);
                    if disc < 0.0 {
                        return None;
                    }
                    let r = disc.sqrt();
                    lo = lo.max((-x * ec - r) / ee);
                    hi = hi.min((-x * ec + r) / ee);
                }
                TaskNorm::PerAxis => {
                    for (c, e) in n.e2.iter().zip(&n.e1) {
                        if !linear_cut(&mut lo, &mut hi, *c, *e, x, m) {
                            return None;
                        }
                    }
                }
            }
        }
        if let Some(q) = &self.qdd_max {
            for ((m, c), e) in q.iter().zip(&n.q2).zip(&n.q1) {
                if !linear_cut(&mut lo, &mut hi, *c, *e, x, *m) {
                    return None;
                }
            }
        }
        if lo <= hi { Some((lo, hi)) } else { None }
    }

    /// Largest x ≤ ceiling with a non-empty acceleration interval.
    fn max_velocity_curve(&self, n: &Node) -> f64 {
        let top = self.velocity_ceiling(n);
        let top = if top.is_finite() { top } else { 1e12 };
        if self.accel_bounds(n, top).is_some() {
            return top;
        }
        let (mut a, mut b) = (0.0, top);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.accel_bounds(n, mid).is_some() {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-14 * b {
                break;
            }
        }
        a
    }
}

/// Result of [`min_time_phase`].
#[derive(Debug, Clone)]
pub struct MinTimeSolution {
    pub profile: PhaseProfile,
    pub report: SaturationReport,
    /// Duration of the unsmoothed optimum.
    pub stage1_duration: f64,
    pub duration: f64,
    /// duration / stage1_duration (1 without stage 2).
    pub inflation: f64,
    /// Time-scaling factor applied after smoothing (1 if none was needed).
    pub time_scale: f64,
    /// Local ceiling reductions needed to get through singular points.
    pub retries: usize,
    /// Squared-velocity profile on the solver grid.
    pub grid_s: Vec<f64>,
    pub grid_x: Vec<f64>,
    pub grid_mvc: Vec<f64>,
}

/// Computes the time-optimal phase for `curve` scaled by `eta`.
pub fn min_time_phase(
    curve: &ParametricCurve,
    eta: &DVector<f64>,
    cons: &ConstraintSet,
    grid: usize,
    kin: Option<&ParametricCurve>,
) -> Result<MinTimeSolution> {
    if grid < 100 {
        return Err(invalid(format!("grid must have at least 100 points, got {grid}")));
    }
    if eta.len() != curve.dim() {
        return Err(invalid(format!("eta has {} entries for a {}-D curve", eta.len(), curve.dim())));
    }
    if let Some(k) = kin {
        if (k.s_f() - curve.s_f()).abs() > 1e-9 * curve.s_f() {
            return Err(invalid("kinematic map and curve have different arc-length domains"));
        }
    }
    cons.validate(curve.dim(), kin.map(|k| k.dim()))?;

    let s_f = curve.s_f();
    let n = grid - 1;
    let ds = s_f / n as f64;
    let nodes: Vec<Node> =
        (0..=n).map(|i| Node::new(i as f64 * ds, curve, eta, kin)).collect::<Result<_>>()?;
    let mut mvc: Vec<f64> = nodes.iter().map(|nd| cons.max_velocity_curve(nd)).collect();

    let mut retries = 0;
    let x = loop {
        match integrate_passes(cons, &nodes, &mvc, ds) {
            Ok(x) => break x,
            Err(i) => {
                if retries == MAX_RETRIES {
                    return Err(GdmpError::Infeasible { s: nodes[i].s });
                }
                retries += 1;
                warn!("singular point near s = {:.6}; lowering the ceiling locally (retry {retries})", nodes[i].s);
                for v in &mut mvc[i.saturating_sub(2)..=(i + 2).min(n)] {
                    *v *= 0.99;
                }
            }
        }
    };

    let stage1 = sample_grid_profile(&nodes, &x, ds)?;
    let t1 = stage1.total_duration();
    debug!("stage 1 duration {t1:.6} s after {retries} retries");

    let (profile, mask, time_scale) = if cons.wants_smoothing() {
        smooth(stage1, cons, curve, eta, kin)?
    } else {
        let len = stage1.samples().len();
        (stage1, vec![false; len], 1.0)
    };
    let report = saturation_masked(&profile, curve, eta, cons, kin, &mask)?;
    let duration = profile.total_duration();
    Ok(MinTimeSolution {
        profile,
        report,
        stage1_duration: t1,
        duration,
        inflation: duration / t1,
        time_scale,
        retries,
        grid_s: nodes.iter().map(|nd| nd.s).collect(),
        grid_x: x,
        grid_mvc: mvc,
    })
}

/// Backward then forward pass in x = ṡ². Each step is checked at both ends
/// of the interval with a few fixed-point corrections. Returns the index of
/// the first grid point with an empty admissible set on failure.
fn integrate_passes(cons: &ConstraintSet, nodes: &[Node], mvc: &[f64], ds: f64) -> std::result::Result<Vec<f64>, usize> {
    let n = nodes.len() - 1;
    let mut xb = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let (lo_next, _) = cons.accel_bounds(&nodes[i + 1], xb[i + 1]).ok_or(i + 1)?;
        let mut cand = (xb[i + 1] - 2.0 * ds * lo_next).min(mvc[i]);
        for _ in 0..3 {
            let (lo, _) = cons.accel_bounds(&nodes[i], cand).ok_or(i)?;
            cand = cand.min(xb[i + 1] - 2.0 * ds * lo);
        }
        xb[i] = cand.max(0.0);
    }
    let mut x = vec![0.0; n + 1];
    for i in 0..n {
        let (_, hi) = cons.accel_bounds(&nodes[i], x[i]).ok_or(i)?;
        let mut cand = (x[i] + 2.0 * ds * hi).min(xb[i + 1]);
        for _ in 0..3 {
            let (_, hi_next) = cons.accel_bounds(&nodes[i + 1], cand).ok_or(i + 1)?;
            cand = cand.min(x[i] + 2.0 * ds * hi_next);
        }
        x[i + 1] = cand.max(0.0);
        if i + 1 < n && x[i + 1] == 0.0 && x[i] == 0.0 {
            return Err(i + 1);
        }
    }
    Ok(x)
}

/// Exact piecewise-quadratic s(t) of a grid solution, sampled uniformly.
fn sample_grid_profile(nodes: &[Node], x: &[f64], ds: f64) -> Result<PhaseProfile> {
    let n = nodes.len() - 1;
    let v: Vec<f64> = x.iter().map(|xi| xi.max(0.0).sqrt()).collect();
    let mut t_knots = vec![0.0; n + 1];
    let mut acc = vec![0.0; n];
    for i in 0..n {
        let sum = v[i] + v[i + 1];
        if sum <= 0.0 {
            return Err(GdmpError::Infeasible { s: nodes[i].s });
        }
        t_knots[i + 1] = t_knots[i] + 2.0 * ds / sum;
        acc[i] = (x[i + 1] - x[i]) / (2.0 * ds);
    }
    let total = t_knots[n];
    if !total.is_finite() {
        return Err(GdmpError::Infeasible { s: nodes[n].s });
    }
    let dt_target = (total / 1e4).clamp(1e-4, 1e-2);
    let steps = (total / dt_target).ceil().max(1.0) as usize;
    let dt = total / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut i = 0;
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k == steps {
            samples.push(PhaseSample { t, s: nodes[n].s, sd: 0.0, sdd: acc[n - 1] });
            break;
        }
        while i + 1 < n && t_knots[i + 1] <= t {
            i += 1;
        }
        let tau = (t - t_knots[i]).max(0.0);
        let s = (nodes[i].s + v[i] * tau + 0.5 * acc[i] * tau * tau).min(nodes[i + 1].s);
        let sd = (v[i] + acc[i] * tau).max(0.0);
        samples.push(PhaseSample { t, s, sd, sdd: acc[i] });
    }
    PhaseProfile::new(dt, samples)
}

/// Moving-average smoothing of (s, ṡ, s̈) followed by uniform time scaling
/// if the smoothed profile violates a bound.
fn smooth(
    stage1: PhaseProfile,
    cons: &ConstraintSet,
    curve: &ParametricCurve,
    eta: &DVector<f64>,
    kin: Option<&ParametricCurve>,
) -> Result<(PhaseProfile, Vec<bool>, f64)> {
    let dt = stage1.dt();
    let src = stage1.samples();
    let a_max = src.iter().map(|p| p.sdd.abs()).fold(0.0f64, f64::max);
    // Jerk of the averaged s̈ is (s̈(t) − s̈(t − w))/w, so the window must
    // cover the largest s̈ jump over that window divided by the jerk bound.
    let window_steps = |w: f64| ((w / dt) - 1e-9).ceil().max(1.0) as usize;
    let nw = match cons.sddd_max {
        Some(j) if a_max > 0.0 => {
            let mut nw = window_steps(a_max / j);
            for _ in 0..4 {
                let jump = (nw..src.len()).map(|k| (src[k].sdd - src[k - nw].sdd).abs()).fold(a_max, f64::max);
                let need = window_steps(jump / j);
                if need <= nw {
                    break;
                }
                nw = need;
            }
            nw
        }
        _ => window_steps(0.02 * stage1.total_duration()),
    };
    let last = src.len() - 1;
    let s_f = src[last].s;
    let sdd_at = |j: isize| if j < 0 || j as usize >= last { 0.0 } else { src[j as usize].sdd };
    let total = last + nw;
    // Moving average of s̈ only; ṡ and s follow by exact integration of the
    // piecewise-linear s̈ so that every sample triple is consistent.
    let mut acc = Vec::with_capacity(total + 1);
    let mut sum: f64 = (-(nw as isize)..0).map(sdd_at).sum();
    let inv = 1.0 / nw as f64;
    for k in 0..=total {
        acc.push(sum * inv);
        sum += sdd_at(k as isize) - sdd_at(k as isize - nw as isize);
    }
    acc[0] = 0.0;
    acc[total] = 0.0;
    let integrate = |acc: &[f64]| {
        let (mut s, mut v) = (0.0, 0.0);
        let mut out = Vec::with_capacity(acc.len());
        for k in 0..acc.len() {
            out.push((s, v));
            if k + 1 < acc.len() {
                s += dt * v + dt * dt * (2.0 * acc[k] + acc[k + 1]) / 6.0;
                v += 0.5 * dt * (acc[k] + acc[k + 1]);
            }
        }
        out
    };
    // Remove the residual end velocity left by sampling with a sine bump,
    // then scale to land exactly on s_f.
    let end_v = integrate(&acc)[total].1;
    let span = total as f64 * dt;
    let bump_area = 2.0 * span / std::f64::consts::PI;
    for (k, a) in acc.iter_mut().enumerate() {
        *a -= end_v / bump_area * (std::f64::consts::PI * k as f64 / total as f64).sin();
    }
    let states = integrate(&acc);
    let gain = s_f / states[total].0;
    let mut out: Vec<PhaseSample> = states
        .iter()
        .zip(&acc)
        .enumerate()
        .map(|(k, ((s, v), a))| PhaseSample { t: k as f64 * dt, s: s * gain, sd: v * gain, sdd: a * gain })
        .collect();
    out[total].s = s_f;
    out[total].sd = 0.0;
    let mask: Vec<bool> = (0..=total).map(|k| k <= nw || k + nw >= total).collect();
    let smoothed = PhaseProfile::new(dt, out)?;

    let check = saturation_masked(&smoothed, curve, eta, cons, kin, &vec![false; total + 1])?;
    let rv = check.family_kind_max(Kind::Velocity);
    let ra = check.family_kind_max(Kind::Acceleration);
    let rj = check.family_kind_max(Kind::Jerk);
    let k = rv.max(ra.sqrt()).max(rj.cbrt()).max(1.0);
    if k <= 1.0 + 1e-12 {
        return Ok((smoothed, mask, 1.0));
    }
    debug!("smoothed profile exceeds bounds (v {rv:.4}, a {ra:.4}, j {rj:.4}); stretching time by {k:.6}");
    let scaled = smoothed
        .samples()
        .iter()
        .map(|p| PhaseSample { t: p.t * k, s: p.s, sd: p.sd / k, sdd: p.sdd / (k * k) })
        .collect();
    Ok((PhaseProfile::new(dt * k, scaled)?, mask, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Velocity,
    Acceleration,
    Jerk,
}

/// Normalized constraint values along a dense profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub t: Vec<f64>,
    /// Per constraint (e.g. `sd`, `ydd`, `qd1`), value / bound at each sample.
    pub values: BTreeMap<String, Vec<f64>>,
    /// Largest normalized value per family (`phase`, `task`, `joint`).
    pub family_max: BTreeMap<String, f64>,
    /// Largest normalized value over all constraints at each sample.
    pub max_normalized: Vec<f64>,
    /// Samples inside stage-2 smoothing windows.
    pub excluded: Vec<bool>,
    /// Fraction of non-excluded samples with max_normalized ≥ 0.99.
    pub indicator: f64,
    /// Same fraction restricted to the excluded samples (0 if none).
    pub excluded_indicator: f64,
}

impl SaturationReport {
    /// Largest normalized value overall.
    pub fn overall_max(&self) -> f64 {
        self.family_max.values().cloned().fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.overall_max() <= 1.0 + tol
    }

    fn family_kind_max(&self, kind: Kind) -> f64 {
        self.values
            .iter()
            .filter(|(k, _)| constraint_kind(k) == kind)
            .flat_map(|(_, v)| v.iter().cloned())
            .fold(0.0, f64::max)
    }
}

fn constraint_kind(name: &str) -> Kind {
    if name == "sddd" {
        Kind::Jerk
    } else if name.starts_with("sdd") || name.starts_with("ydd") || name.starts_with("qdd") {
        Kind::Acceleration
    } else {
        Kind::Velocity
    }
}

fn constraint_family(name: &str) -> &'static str {
    if name.starts_with('s') {
        "phase"
    } else if name.starts_with('y') {
        "task"
    } else {
        "joint"
    }
}

/// Evaluates every enabled constraint on the samples of `profile`.
pub fn saturation_check(
    profile: &PhaseProfile,
    curve: &ParametricCurve,
    eta: &DVector<f64>,
    cons: &ConstraintSet,
    kin: Option<&ParametricCurve>,
) -> Result<SaturationReport> {
    saturation_masked(profile, curve, eta, cons, kin, &vec![false; profile.samples().len()])
}

fn saturation_masked(
    profile: &PhaseProfile,
    curve: &ParametricCurve,
    eta: &DVector<f64>,
    cons: &ConstraintSet,
    kin: Option<&ParametricCurve>,
    mask: &[bool],
) -> Result<SaturationReport> {
    if eta.len() != curve.dim() {
        return Err(invalid("eta dimension mismatch"));
    }
    if (cons.qd_max.is_some() || cons.qdd_max.is_some()) && kin.is_none() {
        return Err(invalid("joint bounds require a kinematic map"));
    }
    let samples = profile.samples();
    let len = samples.len();
    let d = curve.dim();
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut push = |name: String, k: usize, v: f64| {
        values.entry(name).or_insert_with(|| vec![0.0; len])[k] = v;
    };
    for (k, p) in samples.iter().enumerate() {
        let cp = curve.point(p.s)?;
        let yd: Vec<f64> = (0..d).map(|j| eta[j] * cp.d1[j] * p.sd).collect();
        let ydd: Vec<f64> = (0..d).map(|j| eta[j] * (cp.d2[j] * p.sd * p.sd + cp.d1[j] * p.sdd)).collect();
        if let Some(m) = cons.sd_max {
            push("sd".into(), k, p.sd.abs() / m);
        }
        if let Some(m) = cons.sdd_max {
            push("sdd".into(), k, p.sdd.abs() / m);
        }
        if let Some(m) = cons.sddd_max {
            let jerk = if k + 1 < len { (samples[k + 1].sdd - p.sdd) / profile.dt() } else { 0.0 };
            push("sddd".into(), k, jerk.abs() / m);
        }
        match cons.task_norm {
            TaskNorm::Euclidean => {
                if let Some(m) = cons.yd_max {
                    push("yd".into(), k, dot(&yd, &yd).sqrt() / m);
                }
                if let Some(m) = cons.ydd_max {
                    push("ydd".into(), k, dot(&ydd, &ydd).sqrt() / m);
                }
            }
            TaskNorm::PerAxis => {
                for j in 0..d {
                    if let Some(m) = cons.yd_max {
                        push(format!("yd{}", j + 1), k, yd[j].abs() / m);
                    }
                    if let Some(m) = cons.ydd_max {
                        push(format!("ydd{}", j + 1), k, ydd[j].abs() / m);
                    }
                }
            }
        }
        if let Some(kin) = kin {
            if cons.qd_max.is_some() || cons.qdd_max.is_some() {
                let qp = kin.point(p.s)?;
                if let Some(q) = &cons.qd_max {
                    for (j, m) in q.iter().enumerate() {
                        push(format!("qd{}", j + 1), k, (qp.d1[j] * p.sd).abs() / m);
                    }
                }
                if let Some(q) = &cons.qdd_max {
                    for (j, m) in q.iter().enumerate() {
                        let a = qp.d2[j] * p.sd * p.sd + qp.d1[j] * p.sdd;
                        push(format!("qdd{}", j + 1), k, a.abs() / m);
                    }
                }
            }
        }
    }
    let mut family_max: BTreeMap<String, f64> = BTreeMap::new();
    let mut max_normalized = vec![0.0f64; len];
    for (name, v) in &values {
        let fam = family_max.entry(constraint_family(name).to_string()).or_insert(0.0);
        for (k, x) in v.iter().enumerate() {
            *fam = fam.max(*x);
            max_normalized[k] = max_normalized[k].max(*x);
        }
    }
    let excluded: Vec<bool> = (0..len).map(|k| mask.get(k).copied().unwrap_or(false)).collect();
    let frac = |want: bool| {
        let (hit, total) = max_normalized
            .iter()
            .zip(&excluded)
            .filter(|(_, e)| **e == want)
            .fold((0usize, 0usize), |(h, t), (m, _)| (h + usize::from(*m >= SATURATION_LEVEL), t + 1));
        if total == 0 { 0.0 } else { hit as f64 / total as f64 }
    };
    Ok(SaturationReport {
        t: samples.iter().map(|p| p.t).collect(),
        indicator: frac(false),
        excluded_indicator: frac(true),
        values,
        family_max,
        max_normalized,
        excluded,
    })
}
