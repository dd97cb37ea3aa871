//! Human-in-the-loop co-manipulation: admittance phase dynamics driven by the
//! tangential human force, the coupled transformation system, a delayed
//! tracking robot, passivity monitoring, linearized stability analysis and
//! interaction metrics.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gdmp::GdmpSystem;
use crate::integrate::Rk4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HumanKind {
    /// Spring-damper pulling the robot toward the path point at `s_goal`.
    #[default]
    Impedance,
    /// Spring-damper tracking a reference that moves along the path.
    Intent,
}

/// Simulated operator. Forces enter the transformation system as
/// accelerations (unit mass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanModel {
    pub kind: HumanKind,
    /// Impedance stiffness K_h (N/m).
    pub k_h: f64,
    /// Impedance damping B_h (N·s/m).
    pub b_h: f64,
    /// Phase the operator wants to reach; the end of the path if unset.
    pub s_goal: Option<f64>,
    /// Intent stiffness K_p (N/m).
    pub k_p: f64,
    /// Intent damping K_d (N·s/m).
    pub k_d: f64,
    /// Time the intent reference takes for each leg (s).
    pub ref_duration: f64,
    /// Optional second leg of the intent reference, back to this phase.
    pub s_return: Option<f64>,
    /// Peak tremor force per axis (N).
    pub tremor: f64,
    pub seed: u64,
}

impl Default for HumanModel {
    fn default() -> Self {
        HumanModel {
            kind: HumanKind::Impedance,
            k_h: 300.0,
            b_h: 20.0,
            s_goal: None,
            k_p: 300.0,
            k_d: 20.0,
            ref_duration: 3.0,
            s_return: None,
            tremor: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HilConfig {
    /// Virtual mass on the phase (kg).
    pub m: f64,
    /// Virtual damping on the phase (N·s/m).
    pub b: f64,
    /// Robot tracking delay (s).
    pub t0: f64,
    pub dt: f64,
    pub duration: f64,
    pub s_start: f64,
    /// Moving-average window for the ṡ oscillation metric (s).
    pub metrics_window: f64,
    pub human: HumanModel,
}

impl Default for HilConfig {
    fn default() -> Self {
        HilConfig {
            m: 2.0,
            b: 17.0,
            t0: 0.0,
            dt: 1e-3,
            duration: 10.0,
            s_start: 0.0,
            metrics_window: 0.5,
            human: HumanModel::default(),
        }
    }
}

impl HilConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 { Ok(()) } else { Err(invalid(format!("{name} must be positive, got {v}"))) }
        };
        pos("m", self.m)?;
        pos("b", self.b)?;
        pos("dt", self.dt)?;
        pos("duration", self.duration)?;
        if !(self.t0.is_finite() && self.t0 >= 0.0) {
            return Err(invalid(format!("t0 must be non-negative, got {}", self.t0)));
        }
        if self.t0 > 0.0 && self.dt > self.t0 {
            return Err(invalid(format!("dt {} must not exceed the delay {}", self.dt, self.t0)));
        }
        if !self.s_start.is_finite() {
            return Err(invalid("s_start must be finite"));
        }
        let h = &self.human;
        for (name, v) in [("k_h", h.k_h), ("b_h", h.b_h), ("k_p", h.k_p), ("k_d", h.k_d), ("tremor", h.tremor)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if h.kind == HumanKind::Intent {
            pos("ref_duration", h.ref_duration)?;
        }
        Ok(())
    }
}

/// Quintic rest-to-rest blend from 0 to 1.
fn min_jerk(u: f64) -> (f64, f64, f64) {
    let u = u.clamp(0.0, 1.0);
    (
        10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5),
        30.0 * u * u - 60.0 * u.powi(3) + 30.0 * u.powi(4),
        60.0 * u - 180.0 * u * u + 120.0 * u.powi(3),
    )
}

struct Human<'a> {
    sys: &'a GdmpSystem,
    model: HumanModel,
    anchor: DVector<f64>,
    waypoints: Vec<f64>,
    /// (amplitude, angular frequency, phase) per axis.
    tremor: Vec<Vec<(f64, f64, f64)>>,
}

impl<'a> Human<'a> {
    fn new(sys: &'a GdmpSystem, cfg: &HilConfig) -> Result<Self> {
        let model = cfg.human.clone();
        let s_goal = model.s_goal.unwrap_or(sys.curve().s_f());
        let anchor = sys.target(s_goal)?;
        let mut waypoints = vec![cfg.s_start, s_goal];
        if let Some(r) = model.s_return {
            waypoints.push(r);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        let tremor = (0..sys.dim())
            .map(|_| {
                (0..3)
                    .map(|_| {
                        let f: f64 = rng.random_range(8.0..12.0);
                        let ph: f64 = rng.random_range(0.0..2.0 * PI);
                        (model.tremor / 3.0, 2.0 * PI * f, ph)
                    })
                    .collect()
            })
            .collect();
        Ok(Human { sys, model, anchor, waypoints, tremor })
    }

    fn reference_phase(&self, t: f64) -> f64 {
        let legs = self.waypoints.len() - 1;
        let dur = self.model.ref_duration;
        let leg = ((t / dur).floor().max(0.0) as usize).min(legs - 1);
        let u = (t - leg as f64 * dur) / dur;
        let (a, b) = (self.waypoints[leg], self.waypoints[leg + 1]);
        a + (b - a) * min_jerk(u).0
    }

    fn force(&self, t: f64, ym: &[f64], ydm: &[f64], out: &mut [f64]) -> Result<()> {
        match self.model.kind {
            HumanKind::Impedance => {
                for k in 0..out.len() {
                    out[k] = self.model.k_h * (self.anchor[k] - ym[k]) - self.model.b_h * ydm[k];
                }
            }
            HumanKind::Intent => {
                let yref = self.sys.target(self.reference_phase(t))?;
                for k in 0..out.len() {
                    out[k] = self.model.k_p * (yref[k] - ym[k]) - self.model.k_d * ydm[k];
                }
            }
        }
        if self.model.tremor > 0.0 {
            for (k, comps) in self.tremor.iter().enumerate() {
                out[k] += comps.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum::<f64>();
            }
        }
        Ok(())
    }
}

/// Where a simulation stopped because its state blew up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceInfo {
    pub step: usize,
    pub t: f64,
}

/// Uniformly sampled closed-loop signals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub sd: Vec<f64>,
    pub sdd: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub yd: Vec<DVector<f64>>,
    pub ym: Vec<DVector<f64>>,
    pub ydm: Vec<DVector<f64>>,
    pub f_h: Vec<DVector<f64>>,
    pub f_tau: Vec<f64>,
    /// ‖E·y*′(s)‖, the scale of the tangential projection.
    pub tangent_norm: Vec<f64>,
    pub p_tau: Vec<f64>,
    pub p_t: Vec<f64>,
    /// ∫P_T dt, integrated with the state.
    pub work: Vec<f64>,
    pub e_k1: Vec<f64>,
    pub e_u: Vec<f64>,
    pub e_k2: Vec<f64>,
    pub storage: Vec<f64>,
    /// Analytic time derivative of the storage.
    pub storage_rate: Vec<f64>,
    /// storage_rate − p_t.
    pub residual: Vec<f64>,
    pub diverged: Option<DivergenceInfo>,
    pub m: f64,
    pub b: f64,
    pub t0: f64,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Integrates the coupled phase/transformation system with the human in the
/// loop. Divergence ends the run early and is recorded in the trace.
pub fn simulate(sys: &GdmpSystem, cfg: &HilConfig) -> Result<SimTrace> {
    cfg.validate()?;
    let d = sys.dim();
    let human = Human::new(sys, cfg)?;
    let dt = cfg.dt;
    let steps = ((cfg.duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let nd = if cfg.t0 > 0.0 { (cfg.t0 / dt).round().max(1.0) as usize } else { 0 };
    let alpha = sys.alpha();
    let beta = sys.beta();
    let eta = sys.eta();
    let goal = sys.goal();

    let y0 = sys.target(cfg.s_start)?;
    // [s, ṡ, y, ẏ, ∫P_T]
    let mut x: Vec<f64> = Vec::with_capacity(3 + 2 * d);
    x.extend([cfg.s_start, 0.0]);
    x.extend(y0.iter());
    x.extend(std::iter::repeat_n(0.0, d));
    x.push(0.0);
    // Robot history: [y, ẏ] per completed step.
    let mut hist: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);

    let delayed = |hist: &[Vec<f64>], t: f64, x: &[f64], out: &mut [f64]| {
        if nd == 0 {
            out.copy_from_slice(&x[2..2 + 2 * d]);
            return;
        }
        let mut j = t / dt - nd as f64;
        if (j - j.round()).abs() < 1e-9 {
            j = j.round();
        }
        if j <= 0.0 {
            out.copy_from_slice(&hist[0]);
            return;
        }
        let j0 = (j.floor() as usize).min(hist.len() - 1);
        let j1 = (j0 + 1).min(hist.len() - 1);
        let w = j - j0 as f64;
        for (o, (a, b)) in out.iter_mut().zip(hist[j0].iter().zip(&hist[j1])) {
            *o = a + w * (b - a);
        }
    };

    struct Eval {
        fh: Vec<f64>,
        f_tau: f64,
        sdd: f64,
        tan_norm: f64,
        tan: DVector<f64>,
        pos: DVector<f64>,
    }
    let evaluate = |hist: &[Vec<f64>], t: f64, x: &[f64], robot: &mut [f64], dx: &mut [f64]| -> Result<Eval> {
        delayed(hist, t, x, robot);
        let mut fh = vec![0.0; d];
        human.force(t, &robot[..d], &robot[d..], &mut fh)?;
        let cp = sys.curve().point(x[0])?;
        let tan = eta.component_mul(&cp.d1);
        let f_tau: f64 = tan.iter().zip(&fh).map(|(a, b)| a * b).sum();
        let sd = x[1];
        let sdd = (f_tau - cfg.b * sd) / cfg.m;
        let f = sys.forcing_at(&cp, sd, sdd);
        dx[0] = sd;
        dx[1] = sdd;
        for k in 0..d {
            dx[2 + k] = x[2 + d + k];
            dx[2 + d + k] = -alpha[k] * x[2 + d + k] - alpha[k] * beta[k] * (x[2 + k] - goal[k]) + f[k] + fh[k];
        }
        dx[2 + 2 * d] = robot[d..].iter().zip(&fh).map(|(a, b)| a * b).sum();
        let pos = goal + eta.component_mul(&(&cp.pos - sys.ref_goal()));
        Ok(Eval { fh, f_tau, sdd, tan_norm: tan.norm(), tan, pos })
    };

    let mut trace = SimTrace { dt, m: cfg.m, b: cfg.b, t0: cfg.t0, ..Default::default() };
    let mut rk = Rk4::new(3 + 2 * d);
    let mut robot = vec![0.0; 2 * d];
    let mut dx = vec![0.0; 3 + 2 * d];
    for k in 0..=steps {
        let t = k as f64 * dt;
        hist.push(x[2..2 + 2 * d].to_vec());
        let ev = evaluate(&hist, t, &x, &mut robot, &mut dx)?;
        let (s, sd) = (x[0], x[1]);
        let y = DVector::from_column_slice(&x[2..2 + d]);
        let yd = DVector::from_column_slice(&x[2 + d..2 + 2 * d]);
        let ytil = &y - &ev.pos;
        let ydtil = &yd - &ev.tan * sd;
        let e_k1 = 0.5 * ydtil.norm_squared();
        let e_u = 0.5 * (0..d).map(|j| alpha[j] * beta[j] * ytil[j] * ytil[j]).sum::<f64>();
        let e_k2 = 0.5 * cfg.m * sd * sd;
        let fh = DVector::from_vec(ev.fh);
        let ydm = DVector::from_column_slice(&robot[d..]);
        let p_t = ydm.dot(&fh);
        let rate = -(0..d).map(|j| alpha[j] * ydtil[j] * ydtil[j]).sum::<f64>() + yd.dot(&fh) - cfg.b * sd * sd;
        trace.t.push(t);
        trace.s.push(s);
        trace.sd.push(sd);
        trace.sdd.push(ev.sdd);
        trace.y.push(y);
        trace.yd.push(yd);
        trace.ym.push(DVector::from_column_slice(&robot[..d]));
        trace.ydm.push(ydm);
        trace.f_h.push(fh);
        trace.f_tau.push(ev.f_tau);
        trace.tangent_norm.push(ev.tan_norm);
        trace.p_tau.push(ev.f_tau * sd);
        trace.p_t.push(p_t);
        trace.work.push(x[2 + 2 * d]);
        trace.e_k1.push(e_k1);
        trace.e_u.push(e_u);
        trace.e_k2.push(e_k2);
        trace.storage.push(e_k1 + e_u + e_k2);
        trace.storage_rate.push(rate);
        trace.residual.push(rate - p_t);
        if k == steps {
            break;
        }
        let hist_ref = &hist;
        rk.step(&mut x, t, dt, |tt, xx, out| {
            let mut r = vec![0.0; 2 * d];
            evaluate(hist_ref, tt, xx, &mut r, out).map(|_| ())
        })?;
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e9) {
            log::warn!("simulation diverged at step {} (m = {}, b = {}, t0 = {})", k + 1, cfg.m, cfg.b, cfg.t0);
            trace.diverged = Some(DivergenceInfo { step: k + 1, t: t + dt });
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassivityReport {
    /// max |Ṡ_analytic − central difference of S| over interior samples.
    pub rate_error: f64,
    /// Truncation bound of the central difference, dt²/3·max|S‴|.
    pub rate_tolerance: f64,
    pub rate_consistent: bool,
    /// Largest Ṡ − ẏ_mᵀF_h.
    pub max_residual: f64,
    /// Samples where Ṡ − ẏ_mᵀF_h exceeds 1e-6 W.
    pub violations: usize,
    pub perfect_tracking: bool,
    pub passive: bool,
    pub min_storage: f64,
    /// Largest S(t) − S(0) − ∫P_T − 1e-6·(t + 1) over prefixes (≤ 0 when passive).
    pub max_prefix_excess: f64,
}

/// Tolerance on the pointwise passivity inequality (W).
pub const PASSIVITY_TOL: f64 = 1e-6;

pub fn passivity_monitor(trace: &SimTrace) -> PassivityReport {
    let n = trace.len();
    let dt = trace.dt;
    let s = &trace.storage;
    let mut rate_error = 0.0f64;
    let mut third = 0.0f64;
    for k in 1..n.saturating_sub(1) {
        let num = (s[k + 1] - s[k - 1]) / (2.0 * dt);
        rate_error = rate_error.max((num - trace.storage_rate[k]).abs());
        if k >= 2 && k + 2 < n {
            let d3 = (s[k + 2] - 2.0 * s[k + 1] + 2.0 * s[k - 1] - s[k - 2]) / (2.0 * dt.powi(3));
            third = third.max(d3.abs());
        }
    }
    let scale = trace.storage_rate.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let rate_tolerance = dt * dt / 3.0 * third + 1e-9 * scale.max(1.0);
    let max_residual = trace.residual.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let violations = trace.residual.iter().filter(|r| **r > PASSIVITY_TOL).count();
    let mut excess = f64::NEG_INFINITY;
    for k in 0..n {
        excess = excess.max(s[k] - s[0] - trace.work[k] - PASSIVITY_TOL * (trace.t[k] + 1.0));
    }
    PassivityReport {
        rate_error,
        rate_tolerance,
        rate_consistent: rate_error <= rate_tolerance,
        max_residual,
        violations,
        perfect_tracking: trace.t0 == 0.0,
        passive: violations == 0,
        min_storage: s.iter().cloned().fold(f64::INFINITY, f64::min),
        max_prefix_excess: excess,
    }
}

/// G_LG(jω) = (B_h·jω + K_h)/(jω) · e^(−jωt₀)/(m·jω + b).
pub fn loop_gain(m: f64, b: f64, k_h: f64, b_h: f64, t0: f64, omega: f64) -> Result<Complex64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(invalid(format!("frequency must be positive, got {omega}")));
    }
    let jw = Complex64::new(0.0, omega);
    Ok((jw * b_h + k_h) / jw * Complex64::new(0.0, -omega * t0).exp() / (jw * m + b))
}

/// Unwrapped phase of the loop gain in degrees.
pub fn loop_phase_deg(m: f64, b: f64, k_h: f64, b_h: f64, t0: f64, omega: f64) -> f64 {
    ((b_h * omega).atan2(k_h) - PI / 2.0 - (m * omega).atan2(b) - omega * t0).to_degrees()
}

fn loop_magnitude(m: f64, b: f64, k_h: f64, b_h: f64, omega: f64) -> f64 {
    (b_h * omega).hypot(k_h) / omega / (m * omega).hypot(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    /// Degrees; +∞ when the magnitude never crosses 1.
    pub phase_margin: f64,
    pub crossover: Option<f64>,
    pub stable: bool,
}

pub const OMEGA_MIN: f64 = 1e-3;
pub const OMEGA_MAX: f64 = 1e5;
const SWEEP_POINTS: usize = 2000;

pub fn phase_margin(m: f64, b: f64, k_h: f64, b_h: f64, t0: f64) -> Result<StabilityResult> {
    for (name, v) in [("m", m), ("b", b)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if !(k_h >= 0.0 && b_h >= 0.0 && t0 >= 0.0) {
        return Err(invalid("K_h, B_h and t0 must be non-negative"));
    }
    let f = |lw: f64| loop_magnitude(m, b, k_h, b_h, 10f64.powf(lw)) - 1.0;
    let (l0, l1) = (OMEGA_MIN.log10(), OMEGA_MAX.log10());
    let step = (l1 - l0) / (SWEEP_POINTS - 1) as f64;
    let mut best: Option<f64> = None;
    let mut prev = (l0, f(l0));
    for i in 1..SWEEP_POINTS {
        let lw = l0 + i as f64 * step;
        let v = f(lw);
        if prev.1 == 0.0 || prev.1 * v < 0.0 {
            let (mut a, mut fa, mut c) = (prev.0, prev.1, lw);
            if fa != 0.0 {
                for _ in 0..200 {
                    let mid = 0.5 * (a + c);
                    let fm = f(mid);
                    if fm == 0.0 {
                        a = mid;
                        break;
                    }
                    if fa * fm < 0.0 {
                        c = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                    if c - a < 1e-15 {
                        break;
                    }
                }
            }
            best = Some(10f64.powf(a));
        }
        prev = (lw, v);
    }
    Ok(match best {
        Some(wc) => {
            let pm = 180.0 + loop_phase_deg(m, b, k_h, b_h, t0, wc);
            StabilityResult { phase_margin: pm, crossover: Some(wc), stable: pm > 0.0 }
        }
        None => StabilityResult { phase_margin: f64::INFINITY, crossover: None, stable: true },
    })
}

/// Margins over an m × b grid (rows follow `m_grid`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub m: Vec<f64>,
    pub b: Vec<f64>,
    pub t0: f64,
    pub k_h: f64,
    pub b_h: f64,
    pub margins: Vec<Vec<f64>>,
    pub crossovers: Vec<Vec<Option<f64>>>,
}

pub fn stability_map(m_grid: &[f64], b_grid: &[f64], k_h: f64, b_h: f64, t0: f64) -> Result<StabilityMap> {
    if m_grid.is_empty() || b_grid.is_empty() {
        return Err(invalid("stability grids must not be empty"));
    }
    let cells: Vec<Vec<StabilityResult>> = m_grid
        .iter()
        .map(|&m| b_grid.iter().map(|&b| phase_margin(m, b, k_h, b_h, t0)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(StabilityMap::from_cells(m_grid, b_grid, k_h, b_h, t0, &cells))
}

impl StabilityMap {
    pub fn from_cells(
        m_grid: &[f64],
        b_grid: &[f64],
        k_h: f64,
        b_h: f64,
        t0: f64,
        cells: &[Vec<StabilityResult>],
    ) -> Self {
        StabilityMap {
            m: m_grid.to_vec(),
            b: b_grid.to_vec(),
            t0,
            k_h,
            b_h,
            margins: cells.iter().map(|r| r.iter().map(|c| c.phase_margin).collect()).collect(),
            crossovers: cells.iter().map(|r| r.iter().map(|c| c.crossover).collect()).collect(),
        }
    }
}

/// `n` points spaced evenly between `lo` and `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Outcome of the linearized delayed loop m·s̈ + b·ṡ = −K_h·s(t−t₀) − B_h·ṡ(t−t₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopResponse {
    /// Peak |s| over the first quarter of the horizon.
    pub early_peak: f64,
    /// Peak |s| over the last quarter.
    pub late_peak: f64,
    pub bounded: bool,
}

/// Time-domain response of the linearized human-robot loop to a small
/// initial displacement (history held at the initial state).
pub fn linear_loop_response(m: f64, b: f64, k_h: f64, b_h: f64, t0: f64, horizon: f64) -> Result<LoopResponse> {
    if !(m > 0.0 && b > 0.0 && t0 >= 0.0 && horizon > 0.0) {
        return Err(invalid("m, b and horizon must be positive, t0 non-negative"));
    }
    let max_dt = 5e-4;
    let (dt, nd) = if t0 > 0.0 {
        let n = (t0 / max_dt).ceil() as usize;
        (t0 / n as f64, n)
    } else {
        (max_dt, 0)
    };
    let steps = (horizon / dt).ceil() as usize;
    let mut x = [1e-3, 0.0];
    let mut hist: Vec<[f64; 2]> = Vec::with_capacity(steps + 1);
    let mut rk = Rk4::new(2);
    let quarter = steps / 4;
    let (mut early, mut late) = (0.0f64, 0.0f64);
    for k in 0..=steps {
        hist.push(x);
        if k <= quarter {
            early = early.max(x[0].abs());
        }
        if k >= steps - quarter {
            late = late.max(x[0].abs());
        }
        if k == steps || !x[0].is_finite() || x[0].abs() > 1e6 {
            if !x[0].is_finite() || x[0].abs() > 1e6 {
                late = f64::INFINITY;
            }
            break;
        }
        let t = k as f64 * dt;
        let h = &hist;
        rk.step::<(), _>(&mut x, t, dt, |tt, xx, out| {
            let past = if nd == 0 {
                [xx[0], xx[1]]
            } else {
                let mut j = tt / dt - nd as f64;
                if (j - j.round()).abs() < 1e-9 {
                    j = j.round();
                }
                if j <= 0.0 {
                    h[0]
                } else {
                    let j0 = (j.floor() as usize).min(h.len() - 1);
                    let j1 = (j0 + 1).min(h.len() - 1);
                    let w = j - j0 as f64;
                    [h[j0][0] + w * (h[j1][0] - h[j0][0]), h[j0][1] + w * (h[j1][1] - h[j0][1])]
                }
            };
            out[0] = xx[1];
            out[1] = (-b * xx[1] - k_h * past[0] - b_h * past[1]) / m;
            Ok(())
        })
        .ok();
    }
    Ok(LoopResponse { early_peak: early, late_peak: late, bounded: late < early })
}

/// Interaction metrics of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// RMS of F_τ/(‖E·y*′‖·‖F_h‖) over samples with ‖F_h‖ > 1e-6 N;
    /// `None` when no such sample exists.
    pub cos_theta_rms: Option<f64>,
    pub sd_rmsd: f64,
    pub e_norm_mean: f64,
    pub f_nontangential_mean: f64,
}

pub fn metrics(trace: &SimTrace, window: f64) -> Result<Metrics> {
    let n = trace.len();
    if n == 0 {
        return Err(invalid("empty trace"));
    }
    if !(window > trace.dt) {
        return Err(invalid(format!("window {window} must exceed dt {}", trace.dt)));
    }
    let (mut acc, mut cnt) = (0.0, 0usize);
    for k in 0..n {
        let fnorm = trace.f_h[k].norm();
        if fnorm > 1e-6 {
            let scale = trace.tangent_norm.get(k).copied().unwrap_or(1.0).max(1e-12);
            let c = trace.f_tau[k] / (scale * fnorm);
            acc += c * c;
            cnt += 1;
        }
    }
    let cos_theta_rms = if cnt > 0 { Some((acc / cnt as f64).sqrt()) } else { None };

    let half = ((window / trace.dt).round() as usize / 2).max(1);
    let mut prefix = vec![0.0; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] + trace.sd[k];
    }
    let mut sq = 0.0;
    for k in 0..n {
        let lo = k.saturating_sub(half);
        let hi = (k + half).min(n - 1);
        let avg = if trace.sd[lo..=hi].iter().all(|v| *v == trace.sd[k]) {
            trace.sd[k]
        } else {
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        };
        sq += (trace.sd[k] - avg).powi(2);
    }
    let e_norm_mean = (0..n).map(|k| (&trace.y[k] - &trace.ym[k]).norm()).sum::<f64>() / n as f64;
    let f_nontangential_mean = (0..n).map(|k| trace.f_h[k].norm() - trace.f_tau[k].abs()).sum::<f64>() / n as f64;
    Ok(Metrics { cos_theta_rms, sd_rmsd: (sq / n as f64).sqrt(), e_norm_mean, f_nontangential_mean })
}
