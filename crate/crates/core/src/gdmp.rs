//! Geometric transformation system driven by an arbitrary phase, plus the
//! classic time-indexed DMP used as a baseline.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curvefit::{CurveDoc, CurvePoint, ParametricCurve};
use crate::error::{invalid, GdmpError, Result};
use crate::integrate::Rk4;
use crate::phase::{PhasePoint, PhaseSource};
use crate::sampling::TimedTrajectory;

/// Axes whose demonstrated displacement is below this keep η = 1.
pub const ETA_EPS: f64 = 1e-6;

/// Per-axis stiffness α and damping ratio β of the attractor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
}

impl Gains {
    /// β = α/4 on every axis.
    pub fn critically_damped(alpha: f64, d: usize) -> Self {
        Gains { alpha: DVector::from_element(d, alpha), beta: DVector::from_element(d, alpha / 4.0) }
    }

    pub fn new(alpha: DVector<f64>, beta: DVector<f64>) -> Result<Self> {
        let g = Gains { alpha, beta };
        g.validate(g.alpha.len())?;
        Ok(g)
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.alpha.len() != d || self.beta.len() != d {
            return Err(invalid(format!("gains must have {d} components")));
        }
        if self.alpha.iter().chain(self.beta.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("alpha and beta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmpState {
    pub y: DVector<f64>,
    pub yd: DVector<f64>,
}

/// A fitted path with its attractor gains, start/goal and per-axis scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct GdmpSystem {
    curve: ParametricCurve,
    alpha: DVector<f64>,
    beta: DVector<f64>,
    goal: DVector<f64>,
    start: DVector<f64>,
    ref_goal: DVector<f64>,
    ref_start: DVector<f64>,
    eta: DVector<f64>,
    warnings: Vec<String>,
}

impl GdmpSystem {
    /// Builds the system; `start`/`goal` default to the curve's own ends.
    pub fn new(
        curve: ParametricCurve,
        gains: Gains,
        start: Option<DVector<f64>>,
        goal: Option<DVector<f64>>,
    ) -> Result<Self> {
        let d = curve.dim();
        gains.validate(d)?;
        let ref_start = curve.start().clone();
        let ref_goal = curve.goal().clone();
        let start = start.unwrap_or_else(|| ref_start.clone());
        let goal = goal.unwrap_or_else(|| ref_goal.clone());
        if start.len() != d || goal.len() != d {
            return Err(invalid(format!("start and goal must have {d} components")));
        }
        if start.iter().chain(goal.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("start and goal must be finite"));
        }
        let mut warnings = Vec::new();
        let eta = DVector::from_fn(d, |k, _| {
            let den = ref_goal[k] - ref_start[k];
            if den.abs() > ETA_EPS {
                (goal[k] - start[k]) / den
            } else {
                let msg = format!("axis {k}: demonstrated displacement {den:.3e} m is below {ETA_EPS:e} m; eta set to 1");
                warn!("{msg}");
                warnings.push(msg);
                1.0
            }
        });
        Ok(GdmpSystem {
            curve,
            alpha: gains.alpha,
            beta: gains.beta,
            goal,
            start,
            ref_goal,
            ref_start,
            eta,
            warnings,
        })
    }

    pub fn curve(&self) -> &ParametricCurve {
        &self.curve
    }

    pub fn dim(&self) -> usize {
        self.curve.dim()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn goal(&self) -> &DVector<f64> {
        &self.goal
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    pub fn ref_goal(&self) -> &DVector<f64> {
        &self.ref_goal
    }

    pub fn ref_start(&self) -> &DVector<f64> {
        &self.ref_start
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Copy with η overridden (start and goal are left as they were).
    pub fn with_eta(mut self, eta: DVector<f64>) -> Result<Self> {
        if eta.len() != self.dim() || eta.iter().any(|v| !v.is_finite()) {
            return Err(invalid("eta must be finite with one entry per axis"));
        }
        self.eta = eta;
        Ok(self)
    }

    /// g + E·(y*(s) − g_r): the point the system tracks at phase `s`.
    pub fn target(&self, s: f64) -> Result<DVector<f64>> {
        let p = self.curve.eval(s)?;
        Ok(&self.goal + self.eta.component_mul(&(p - &self.ref_goal)))
    }

    /// E·y*′(s).
    pub fn scaled_tangent(&self, s: f64) -> Result<DVector<f64>> {
        Ok(self.eta.component_mul(&self.curve.eval_d1(s)?))
    }

    /// Tangential component F_τ = (E·y*′(s))ᵀ·F_h.
    pub fn project_force(&self, s: f64, force: &DVector<f64>) -> Result<f64> {
        Ok(self.scaled_tangent(s)?.dot(force))
    }

    pub fn forcing_term(&self, s: f64, sd: f64, sdd: f64) -> Result<DVector<f64>> {
        let cp = self.curve.point(s)?;
        Ok(self.forcing_at(&cp, sd, sdd))
    }

    /// E·[y*″ṡ² + y*′s̈ + A·y*′ṡ + A·B·(y* − g_r)].
    pub fn forcing_at(&self, cp: &CurvePoint, sd: f64, sdd: f64) -> DVector<f64> {
        DVector::from_fn(self.dim(), |k, _| {
            let a = self.alpha[k];
            let inner = cp.d2[k] * sd * sd
                + cp.d1[k] * sdd
                + a * cp.d1[k] * sd
                + a * self.beta[k] * (cp.pos[k] - self.ref_goal[k]);
            self.eta[k] * inner
        })
    }

    /// State on the scaled curve at phase `p`, moving with it.
    pub fn matched_state(&self, p: PhasePoint) -> Result<DmpState> {
        let cp = self.curve.point(p.s)?;
        Ok(DmpState {
            y: &self.goal + self.eta.component_mul(&(&cp.pos - &self.ref_goal)),
            yd: self.eta.component_mul(&cp.d1) * p.sd,
        })
    }

    pub fn to_doc(&self) -> SystemDoc {
        let v = |x: &DVector<f64>| x.iter().copied().collect::<Vec<_>>();
        SystemDoc {
            curve: self.curve.to_doc(),
            alpha: v(&self.alpha),
            beta: v(&self.beta),
            g: v(&self.goal),
            y0: v(&self.start),
            g_r: v(&self.ref_goal),
            y_r0: v(&self.ref_start),
            eta: v(&self.eta),
        }
    }

    /// Restores a stored system; the stored η is kept verbatim.
    pub fn from_doc(doc: &SystemDoc) -> Result<Self> {
        let curve = ParametricCurve::from_doc(&doc.curve)?;
        let d = curve.dim();
        let vec = |name: &str, x: &[f64]| {
            if x.len() == d {
                Ok(DVector::from_column_slice(x))
            } else {
                Err(invalid(format!("{name} must have {d} entries")))
            }
        };
        let gains = Gains::new(vec("alpha", &doc.alpha)?, vec("beta", &doc.beta)?)?;
        let mut sys = GdmpSystem::new(curve, gains, Some(vec("y0", &doc.y0)?), Some(vec("g", &doc.g)?))?;
        sys.ref_goal = vec("g_r", &doc.g_r)?;
        sys.ref_start = vec("y_r0", &doc.y_r0)?;
        sys.eta = vec("eta", &doc.eta)?;
        Ok(sys)
    }
}

/// Curve document plus the attractor parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    #[serde(flatten)]
    pub curve: CurveDoc,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub g: Vec<f64>,
    pub y0: Vec<f64>,
    pub g_r: Vec<f64>,
    pub y_r0: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Sampled output of a rollout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutTrace {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub sd: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub yd: Vec<DVector<f64>>,
    pub ydd: Vec<DVector<f64>>,
}

impl RolloutTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// ‖y(T) − goal‖ at the last sample.
    pub fn final_error(&self, goal: &DVector<f64>) -> f64 {
        (self.y.last().unwrap() - goal).norm()
    }
}

/// Inverse-distance repulsive potential around a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec<f64>,
    /// Influence radius d₀ (m).
    pub radius: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObstacleField {
    pub obstacles: Vec<Obstacle>,
}

impl ObstacleField {
    pub fn validate(&self, d: usize) -> Result<()> {
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.center.len() != d {
                return Err(invalid(format!("obstacle {i} center must have {d} components")));
            }
            if !(o.radius > 0.0) || !(o.gain >= 0.0) {
                return Err(invalid(format!("obstacle {i}: radius must be positive and gain non-negative")));
            }
        }
        Ok(())
    }

    /// Σ k·(1/d − 1/d₀)·(1/d²)·(y − c)/d over obstacles with d < d₀.
    pub fn acceleration(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for o in &self.obstacles {
            let dist = y.iter().zip(&o.center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            if dist >= o.radius || o.gain == 0.0 {
                continue;
            }
            let d = dist.max(1e-9 * o.radius);
            let mag = o.gain * (1.0 / d - 1.0 / o.radius) / (d * d);
            for ((v, a), c) in out.iter_mut().zip(y).zip(&o.center) {
                *v += mag * (a - c) / d;
            }
        }
    }
}

/// Integrates the transformation system under `phase` with RK4.
/// `init = None` starts on the scaled curve with matched velocity.
pub fn rollout(sys: &GdmpSystem, phase: &dyn PhaseSource, dt: f64, init: Option<DmpState>) -> Result<RolloutTrace> {
    run(sys, phase, dt, init, None)
}

pub fn rollout_with_obstacles(
    sys: &GdmpSystem,
    phase: &dyn PhaseSource,
    dt: f64,
    init: Option<DmpState>,
    field: &ObstacleField,
) -> Result<RolloutTrace> {
    field.validate(sys.dim())?;
    run(sys, phase, dt, init, Some(field))
}

fn run(
    sys: &GdmpSystem,
    phase: &dyn PhaseSource,
    dt: f64,
    init: Option<DmpState>,
    field: Option<&ObstacleField>,
) -> Result<RolloutTrace> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let horizon = phase.duration();
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(invalid(format!("phase horizon must be finite, got {horizon}")));
    }
    let d = sys.dim();
    let init = match init {
        Some(s) => s,
        None => sys.matched_state(phase.at(0.0))?,
    };
    if init.y.len() != d || init.yd.len() != d {
        return Err(invalid(format!("initial state must have {d} components")));
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut x: Vec<f64> = init.y.iter().chain(init.yd.iter()).copied().collect();
    let mut rk = Rk4::new(2 * d);
    let mut rep = vec![0.0; d];

    let mut deriv = |t: f64, x: &[f64], dx: &mut [f64]| -> Result<()> {
        let p = phase.at(t);
        let cp = sys.curve.point(p.s)?;
        let f = sys.forcing_at(&cp, p.sd, p.sdd);
        if let Some(field) = field {
            field.acceleration(&x[..d], &mut rep);
        }
        for k in 0..d {
            let a = sys.alpha[k];
            dx[k] = x[d + k];
            dx[d + k] = -a * x[d + k] - a * sys.beta[k] * (x[k] - sys.goal[k]) + f[k] + rep[k];
        }
        Ok(())
    };

    let mut trace = RolloutTrace::default();
    let mut dx = vec![0.0; 2 * d];
    for i in 0..=steps {
        let t = i as f64 * dt;
        deriv(t, &x, &mut dx)?;
        let p = phase.at(t);
        trace.t.push(t);
        trace.s.push(p.s);
        trace.sd.push(p.sd);
        trace.y.push(DVector::from_column_slice(&x[..d]));
        trace.yd.push(DVector::from_column_slice(&x[d..]));
        trace.ydd.push(DVector::from_column_slice(&dx[d..]));
        if i == steps {
            break;
        }
        rk.step(&mut x, t, dt, &mut deriv)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GdmpError::Divergence { step: i + 1, t: t + dt });
        }
    }
    Ok(trace)
}

/// Normalized Gaussians over the canonical phase, each as wide as the gap to
/// its neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseKernels {
    pub centers: Vec<f64>,
    /// Variance of each kernel.
    pub widths: Vec<f64>,
}

impl PhaseKernels {
    pub fn new(centers: Vec<f64>) -> Result<Self> {
        let n = centers.len();
        if n < 2 || centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("need at least 2 strictly increasing centers"));
        }
        let widths = (0..n)
            .map(|i| {
                let gap = if i + 1 < n { centers[i + 1] - centers[i] } else { centers[i] - centers[i - 1] };
                gap * gap
            })
            .collect();
        Ok(PhaseKernels { centers, widths })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn phi(&self, s: f64) -> Vec<f64> {
        let e: Vec<f64> =
            self.centers.iter().zip(&self.widths).map(|(c, h)| -(s - c).powi(2) / (2.0 * h)).collect();
        let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let b: Vec<f64> = e.iter().map(|x| (x - top).exp()).collect();
        let sum: f64 = b.iter().sum();
        b.into_iter().map(|x| x / sum).collect()
    }
}

/// Time-indexed DMP with an exponentially decaying phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicDmp {
    pub tau: f64,
    pub delta_cs: f64,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub kernels: PhaseKernels,
    /// N×d weights.
    pub weights: DMatrix<f64>,
    pub goal: DVector<f64>,
    pub start: DVector<f64>,
    /// Duration of the demonstration it was fitted to.
    pub demo_duration: f64,
}

/// Fits with α = 40, β = 10 on every axis.
pub fn classic_fit(traj: &TimedTrajectory, n_basis: usize, tau: f64, delta_cs: f64) -> Result<ClassicDmp> {
    classic_fit_with(traj, n_basis, tau, delta_cs, &Gains::critically_damped(40.0, traj.dim()))
}

pub fn classic_fit_with(
    traj: &TimedTrajectory,
    n_basis: usize,
    tau: f64,
    delta_cs: f64,
    gains: &Gains,
) -> Result<ClassicDmp> {
    if !(tau.is_finite() && tau > 0.0) || !(delta_cs.is_finite() && delta_cs > 0.0) {
        return Err(invalid("tau and delta_cs must be positive"));
    }
    let d = traj.dim();
    gains.validate(d)?;
    let n = traj.len();
    if n < 3 {
        return Err(GdmpError::InsufficientData("need at least 3 samples to difference twice".into()));
    }
    let pts = traj.points();
    let y0 = pts[0].clone();
    let g = pts[n - 1].clone();
    for k in 0..d {
        if (g[k] - y0[k]).abs() <= ETA_EPS {
            return Err(GdmpError::DegenerateModulation { axis: k });
        }
    }
    let (vel, acc) = differentiate(pts, traj.period());
    let duration = traj.duration();
    let phase_at = |t: f64| (-delta_cs * t / tau).exp();
    let mut centers: Vec<f64> =
        (0..n_basis).map(|i| phase_at(duration * i as f64 / (n_basis.max(2) - 1) as f64)).collect();
    centers.reverse();
    let kernels = PhaseKernels::new(centers)?;

    let mut num = DMatrix::<f64>::zeros(n_basis, d);
    let mut den = DMatrix::<f64>::zeros(n_basis, d);
    for i in 0..n {
        let s = phase_at(traj.time(i));
        let phi = kernels.phi(s);
        for k in 0..d {
            let a = gains.alpha[k];
            let fr = tau * tau * acc[i][k] + a * tau * vel[i][k] + a * gains.beta[k] * (pts[i][k] - g[k]);
            let xi = s * (g[k] - y0[k]);
            for (j, w) in phi.iter().enumerate() {
                num[(j, k)] += w * xi * fr;
                den[(j, k)] += w * xi * xi;
            }
        }
    }
    let weights = DMatrix::from_fn(n_basis, d, |j, k| {
        if den[(j, k)] > 0.0 { num[(j, k)] / den[(j, k)] } else { 0.0 }
    });
    Ok(ClassicDmp {
        tau,
        delta_cs,
        alpha: gains.alpha.clone(),
        beta: gains.beta.clone(),
        kernels,
        weights,
        goal: g,
        start: y0,
        demo_duration: duration,
    })
}

/// Central differences inside, second-order one-sided stencils at the ends.
fn differentiate(pts: &[DVector<f64>], h: f64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let n = pts.len();
    let mut vel = Vec::with_capacity(n);
    let mut acc = Vec::with_capacity(n);
    for i in 0..n {
        let (v, a) = if i == 0 {
            let v = (&pts[1] * 4.0 - &pts[0] * 3.0 - &pts[2]) / (2.0 * h);
            let a = if n >= 4 {
                (&pts[0] * 2.0 - &pts[1] * 5.0 + &pts[2] * 4.0 - &pts[3]) / (h * h)
            } else {
                (&pts[0] - &pts[1] * 2.0 + &pts[2]) / (h * h)
            };
            (v, a)
        } else if i == n - 1 {
            let v = (&pts[n - 1] * 3.0 - &pts[n - 2] * 4.0 + &pts[n - 3]) / (2.0 * h);
            let a = if n >= 4 {
                (&pts[n - 1] * 2.0 - &pts[n - 2] * 5.0 + &pts[n - 3] * 4.0 - &pts[n - 4]) / (h * h)
            } else {
                (&pts[n - 1] - &pts[n - 2] * 2.0 + &pts[n - 3]) / (h * h)
            };
            (v, a)
        } else {
            (
                (&pts[i + 1] - &pts[i - 1]) / (2.0 * h),
                (&pts[i + 1] - &pts[i] * 2.0 + &pts[i - 1]) / (h * h),
            )
        };
        vel.push(v);
        acc.push(a);
    }
    (vel, acc)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassicTrace {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub yd: Vec<DVector<f64>>,
}

impl ClassicDmp {
    pub fn dim(&self) -> usize {
        self.goal.len()
    }

    /// Learned forcing Σ ω_i φ_i(s)·s·(g − y₀) for a given start and goal.
    pub fn forcing(&self, s: f64, start: &DVector<f64>, goal: &DVector<f64>) -> DVector<f64> {
        let phi = self.kernels.phi(s.clamp(0.0, 1.0));
        DVector::from_fn(self.dim(), |k, _| {
            let w: f64 = phi.iter().enumerate().map(|(j, p)| p * self.weights[(j, k)]).sum();
            w * s * (goal[k] - start[k])
        })
    }

    /// Rolls out from rest at the fitted start toward the fitted goal with
    /// time constant `tau`.
    pub fn rollout(&self, tau: f64, dt: f64, duration: f64) -> Result<ClassicTrace> {
        self.rollout_to(tau, dt, duration, &self.start, &self.goal)
    }

    pub fn rollout_to(
        &self,
        tau: f64,
        dt: f64,
        duration: f64,
        start: &DVector<f64>,
        goal: &DVector<f64>,
    ) -> Result<ClassicTrace> {
        if !(tau > 0.0 && dt > 0.0 && duration >= 0.0) {
            return Err(invalid("tau and dt must be positive, duration non-negative"));
        }
        let d = self.dim();
        let steps = ((duration / dt) - 1e-9).ceil().max(0.0) as usize;
        // State: y, z = τ·ẏ, s.
        let mut x: Vec<f64> = start.iter().copied().chain(std::iter::repeat_n(0.0, d)).chain([1.0]).collect();
        let mut rk = Rk4::new(2 * d + 1);
        let deriv = |_t: f64, x: &[f64], dx: &mut [f64]| -> Result<()> {
            let s = x[2 * d];
            let f = self.forcing(s, start, goal);
            for k in 0..d {
                let a = self.alpha[k];
                dx[d + k] = (a * (self.beta[k] * (goal[k] - x[k]) - x[d + k]) + f[k]) / tau;
                dx[k] = x[d + k] / tau;
            }
            dx[2 * d] = -self.delta_cs * s / tau;
            Ok(())
        };
        let mut trace = ClassicTrace::default();
        for i in 0..=steps {
            let t = i as f64 * dt;
            trace.t.push(t);
            trace.s.push(x[2 * d]);
            trace.y.push(DVector::from_column_slice(&x[..d]));
            trace.yd.push(DVector::from_iterator(d, x[d..2 * d].iter().map(|z| z / tau)));
            if i == steps {
                break;
            }
            rk.step(&mut x, t, dt, deriv)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(GdmpError::Divergence { step: i + 1, t: t + dt });
            }
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvefit::fit_samples;
    use crate::phase::FnPhase;
    use approx::assert_abs_diff_eq;

    /// Fitted unit-speed curve along a fixed direction.
    fn line_system(dir: &[f64], eta_goal: Option<DVector<f64>>) -> GdmpSystem {
        let u = DVector::from_column_slice(dir).normalize();
        let s: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let v: Vec<DVector<f64>> = s.iter().map(|&x| &u * x).collect();
        let curve = fit_samples(&s, &v, 1.0, 20, 1.0, 1e-10, 0.01).unwrap().curve;
        GdmpSystem::new(curve, Gains::critically_damped(40.0, dir.len()), None, eta_goal).unwrap()
    }

    fn wavy_system() -> GdmpSystem {
        let s: Vec<f64> = (0..=300).map(|k| k as f64 * 0.005).collect();
        let v: Vec<DVector<f64>> =
            s.iter().map(|&x| DVector::from_vec(vec![x, 0.2 * (3.0 * x).sin()])).collect();
        let curve = fit_samples(&s, &v, 1.5, 30, 1.0, 1e-8, 0.005).unwrap().curve;
        GdmpSystem::new(curve, Gains::critically_damped(40.0, 2), None, None).unwrap()
    }

    fn smooth_phase(s_f: f64, dur: f64) -> impl Fn(f64) -> PhasePoint {
        move |t: f64| {
            let u = (t / dur).clamp(0.0, 1.0);
            let active = (0.0..=dur).contains(&t);
            let s = s_f * (10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5));
            let sd = if active { s_f / dur * (30.0 * u * u - 60.0 * u.powi(3) + 30.0 * u.powi(4)) } else { 0.0 };
            let sdd = if active { s_f / (dur * dur) * (60.0 * u - 180.0 * u * u + 120.0 * u.powi(3)) } else { 0.0 };
            PhasePoint { s, sd, sdd }
        }
    }

    #[test]
    fn forcing_vanishes_at_goal_rest() {
        let sys = wavy_system();
        let f = sys.forcing_term(sys.curve().s_f(), 0.0, 0.0).unwrap();
        assert!(f.norm() < 1e-12);
    }

    #[test]
    fn forcing_on_straight_line() {
        let sys = line_system(&[0.6, 0.8], None);
        let (s, sd, sdd) = (0.4, 0.7, -1.3);
        let f = sys.forcing_term(s, sd, sdd).unwrap();
        let cp = sys.curve().point(s).unwrap();
        let u = DVector::from_vec(vec![0.6, 0.8]);
        // Symbolic substitution with y*'' = 0 and the fitted tangent ≈ u.
        let expect = &u * (sdd + 40.0 * sd) + (&cp.pos - sys.ref_goal()) * 400.0;
        assert!((&f - &expect).norm() < 2e-2 * (sdd.abs() + 40.0 * sd));
        let exact = &cp.d1 * (sdd + 40.0 * sd) + &cp.d2 * (sd * sd) + (&cp.pos - sys.ref_goal()) * 400.0;
        assert!((&f - &exact).norm() < 1e-12);
    }

    #[test]
    fn forcing_is_linear_in_eta() {
        let sys = wavy_system();
        let f1 = sys.forcing_term(0.7, 0.3, 0.2).unwrap();
        let sys2 = sys.clone().with_eta(sys.eta() * 2.0).unwrap();
        let f2 = sys2.forcing_term(0.7, 0.3, 0.2).unwrap();
        assert_eq!(f2, f1 * 2.0);
    }

    #[test]
    fn matched_rollout_tracks_curve() {
        let sys = wavy_system();
        let ph = FnPhase::new(2.0, smooth_phase(1.5, 2.0));
        let tr = rollout(&sys, &ph, 1e-3, None).unwrap();
        let worst = (0..tr.len())
            .map(|i| (&tr.y[i] - sys.target(tr.s[i]).unwrap()).norm())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-6, "tracking error {worst}");
    }

    #[test]
    fn frozen_phase_converges_to_goal() {
        let sys = wavy_system();
        let sf = sys.curve().s_f();
        let ph = FnPhase::new(20.0 / 40.0, move |_| PhasePoint { s: sf, sd: 0.0, sdd: 0.0 });
        let tr = rollout(&sys, &ph, 1e-3, None).unwrap();
        assert!(tr.final_error(sys.goal()) < 1e-6);
        // From an offset the error decays as (1 + 20t)·e^(-20t).
        let off = DVector::from_vec(vec![0.1, -0.05]);
        let init = DmpState { y: sys.goal() + &off, yd: DVector::zeros(2) };
        let ph = FnPhase::new(1.0, move |_| PhasePoint { s: sf, sd: 0.0, sdd: 0.0 });
        let tr = rollout(&sys, &ph, 1e-3, Some(init)).unwrap();
        let bound = off.norm() * 21.0 * (-20.0f64).exp();
        assert!(tr.final_error(sys.goal()) <= 1.01 * bound && tr.final_error(sys.goal()) < 1e-6);
    }

    #[test]
    fn rk4_order() {
        let sys = wavy_system();
        let ph = FnPhase::new(1.0, smooth_phase(1.5, 1.0));
        let init = DmpState { y: sys.start() + DVector::from_vec(vec![0.05, 0.02]), yd: DVector::zeros(2) };
        let err = |dt: f64| {
            let tr = rollout(&sys, &ph, dt, Some(init.clone())).unwrap();
            let fine = rollout(&sys, &ph, 1e-4, Some(init.clone())).unwrap();
            let step = (dt / 1e-4).round() as usize;
            (0..tr.len()).map(|i| (&tr.y[i] - &fine.y[i * step]).norm()).fold(0.0f64, f64::max)
        };
        let ratio = err(0.004) / err(0.002);
        assert!(ratio >= 8.0, "ratio {ratio}");
    }

    #[test]
    fn eta_degenerate_axis_warns() {
        let sys = line_system(&[1.0, 0.0], Some(DVector::from_vec(vec![2.0, 0.5])));
        assert_eq!(sys.eta()[1], 1.0);
        assert_eq!(sys.warnings().len(), 1);
        let den = sys.ref_goal()[0] - sys.ref_start()[0];
        assert_abs_diff_eq!(sys.eta()[0], (2.0 - sys.start()[0]) / den, epsilon = 1e-12);
    }

    #[test]
    fn project_force_examples() {
        let sys = line_system(&[1.0, 0.0, 0.0], Some(DVector::from_vec(vec![2.0, 0.0, 0.0])));
        let sys = sys.with_eta(DVector::from_vec(vec![2.0, 1.0, 1.0])).unwrap();
        let f = DVector::from_vec(vec![3.0, 4.0, 0.0]);
        let ft = sys.project_force(0.5, &f).unwrap();
        let t = sys.curve().eval_d1(0.5).unwrap();
        assert_abs_diff_eq!(ft, 2.0 * t[0] * 3.0 + t[1] * 4.0 + t[2] * 0.0, epsilon = 1e-12);
        assert!((ft - 6.0).abs() < 0.05);
    }

    #[test]
    fn system_json_round_trip() {
        let sys = wavy_system();
        let text = serde_json::to_string(&sys.to_doc()).unwrap();
        let back = GdmpSystem::from_doc(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.to_doc(), sys.to_doc());
        assert!(text.contains("\"centers\"") && text.contains("\"y_r0\""));
    }

    #[test]
    fn inactive_obstacles_change_nothing() {
        let sys = wavy_system();
        let ph = FnPhase::new(1.0, smooth_phase(1.5, 1.0));
        let base = rollout(&sys, &ph, 1e-3, None).unwrap();
        let zero = ObstacleField {
            obstacles: vec![Obstacle { center: vec![0.7, 0.2], radius: 0.3, gain: 0.0 }],
        };
        let far = ObstacleField {
            obstacles: vec![Obstacle { center: vec![10.0, 10.0], radius: 0.2, gain: 5.0 }],
        };
        for field in [zero, far] {
            let tr = rollout_with_obstacles(&sys, &ph, 1e-3, None, &field).unwrap();
            for i in 0..tr.len() {
                assert!((&tr.y[i] - &base.y[i]).amax() <= 1e-12);
            }
        }
    }

    fn min_jerk_traj(n: usize, dur: f64, to: &[f64]) -> TimedTrajectory {
        let pts = (0..=n)
            .map(|k| {
                let u = k as f64 / n as f64;
                let m = 10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5);
                DVector::from_iterator(to.len(), to.iter().map(|g| g * m))
            })
            .collect();
        TimedTrajectory::new(dur / n as f64, pts, None).unwrap()
    }

    #[test]
    fn classic_degenerate_axis() {
        let traj = min_jerk_traj(100, 1.0, &[1.0, 0.0]);
        assert!(matches!(classic_fit(&traj, 30, 1.0, 4.0), Err(GdmpError::DegenerateModulation { axis: 1 })));
    }

    #[test]
    fn classic_zero_forcing_is_point_attractor() {
        let traj = min_jerk_traj(100, 1.0, &[1.0]);
        let mut dmp = classic_fit(&traj, 30, 1.0, 4.0).unwrap();
        dmp.weights.fill(0.0);
        let tr = dmp.rollout(1.0, 1e-3, 2.0).unwrap();
        assert!((tr.y.last().unwrap()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn classic_forcing_fades_with_phase() {
        let traj = min_jerk_traj(200, 1.0, &[1.0]);
        let dmp = classic_fit(&traj, 30, 1.0, 4.0).unwrap();
        let fmax = (0..=1000)
            .map(|k| dmp.forcing(k as f64 / 1000.0, &dmp.start, &dmp.goal).norm())
            .fold(0.0f64, f64::max);
        for &s in &[1e-4, 5e-5, 1e-6] {
            assert!(dmp.forcing(s, &dmp.start, &dmp.goal).norm() <= 1e-3 * fmax);
        }
    }
}
