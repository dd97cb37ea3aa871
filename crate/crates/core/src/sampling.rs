//! Constant-chord resampling of time-sampled demonstrations.
//!
//! The walk follows the piecewise-linear interpolant of the input and emits a
//! point whenever the straight-line distance (restricted to the position
//! dimensions) from the last emitted point reaches `delta`. Stationary stretches
//! therefore produce no samples, and the output spacing is exactly `delta`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GdmpError, Result};

/// Relative slack on the chord test, so that a chord landing on `delta` up to
/// rounding still triggers an emission.
const EMIT_TOL: f64 = 1e-12;

/// Interpretation of auxiliary channels during interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AuxKind {
    #[default]
    Plain,
    /// Unit quaternion; renormalized after linear interpolation.
    Quaternion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxChannels {
    pub kind: AuxKind,
    pub samples: Vec<DVector<f64>>,
}

/// Uniformly time-sampled demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    period: f64,
    points: Vec<DVector<f64>>,
    aux: Option<AuxChannels>,
}

impl TimedTrajectory {
    pub fn new(period: f64, points: Vec<DVector<f64>>, aux: Option<AuxChannels>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid(format!("sampling period must be positive, got {period}")));
        }
        if points.len() < 2 {
            return Err(GdmpError::InsufficientData(format!(
                "a trajectory needs at least 2 points, got {}",
                points.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(invalid("points must have at least one dimension"));
        }
        for (k, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(invalid(format!("point {k} has dimension {}, expected {d}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("point {k} is not finite")));
            }
        }
        if let Some(aux) = &aux {
            if aux.samples.len() != points.len() {
                return Err(invalid(format!(
                    "aux has {} samples but there are {} points",
                    aux.samples.len(),
                    points.len()
                )));
            }
            if aux.kind == AuxKind::Quaternion && aux.samples.iter().any(|q| q.len() != 4) {
                return Err(invalid("quaternion aux channels must have 4 components"));
            }
        }
        Ok(TimedTrajectory { period, points, aux })
    }

    /// Builds a trajectory from explicit timestamps, checking that they are
    /// strictly increasing and uniformly spaced.
    pub fn from_timestamps(
        times: &[f64],
        points: Vec<DVector<f64>>,
        aux: Option<AuxChannels>,
    ) -> Result<Self> {
        if times.len() != points.len() {
            return Err(invalid("times and points differ in length"));
        }
        if times.len() < 2 {
            return Err(GdmpError::InsufficientData("need at least 2 samples".into()));
        }
        for (k, w) in times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(invalid(format!(
                    "timestamps must be strictly increasing (row {}: {} after {})",
                    k + 1,
                    w[1],
                    w[0]
                )));
            }
        }
        let n = times.len() - 1;
        let period = (times[n] - times[0]) / n as f64;
        let tol = 1e-6 * period + 1e-9;
        for (k, t) in times.iter().enumerate() {
            let expect = times[0] + k as f64 * period;
            if (t - expect).abs() > tol {
                return Err(invalid(format!(
                    "timestamps are not uniformly spaced (row {k}: {t}, expected {expect})"
                )));
            }
        }
        Self::new(period, points, aux)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn aux(&self) -> Option<&AuxChannels> {
        self.aux.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.period * (self.points.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.period * k as f64
    }
}

/// An interval of the demonstration during which the position stayed inside
/// a small ball; reported so the timing law can hold the phase still there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauseInterval {
    pub t_start: f64,
    pub t_end: f64,
    /// Arc length at which the pause happens.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSummary {
    /// Number of emitted intervals (M).
    pub intervals: usize,
    /// Arc length of the emitted path, M·Δ.
    pub length: f64,
    /// Chord from the last emitted sample to the final demonstration point.
    pub residual: f64,
    /// Length of the input polyline in the position dimensions.
    pub demo_length: f64,
    /// Final demonstration point (the alternative goal).
    pub demo_goal: Vec<f64>,
    pub pauses: Vec<PauseInterval>,
}

/// Constant-chord samples of a demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPath {
    pub delta: f64,
    pub points: Vec<DVector<f64>>,
    pub arclengths: Vec<f64>,
    pub times: Vec<f64>,
    pub aux: Option<AuxChannels>,
    pub position_dims: Vec<usize>,
    pub summary: SamplingSummary,
}

impl SpatialPath {
    /// Number of intervals M.
    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.delta * self.intervals() as f64
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.points[0]
    }

    /// Last emitted sample; the default goal.
    pub fn goal(&self) -> &DVector<f64> {
        self.points.last().unwrap()
    }

    /// Treats the samples as a uniformly timed trajectory with period Δ.
    pub fn as_timed(&self) -> Result<TimedTrajectory> {
        TimedTrajectory::new(self.delta, self.points.clone(), self.aux.clone())
    }
}

/// Sampling parameters beyond Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOptions {
    pub delta: f64,
    pub position_dims: Vec<usize>,
    /// Radius of the ball that counts as stationary; defaults to Δ/2.
    pub pause_radius: Option<f64>,
    /// Minimum stationary duration reported as a pause.
    pub min_pause: f64,
}

impl SamplingOptions {
    pub fn new(delta: f64, position_dims: Vec<usize>) -> Self {
        SamplingOptions { delta, position_dims, pause_radius: None, min_pause: 0.5 }
    }
}

fn chord(a: &DVector<f64>, b: &DVector<f64>, dims: &[usize]) -> f64 {
    dims.iter().map(|&j| (a[j] - b[j]).powi(2)).sum::<f64>().sqrt()
}

/// Larger root of ‖w + u·D‖ = Δ restricted to the position dimensions.
fn forward_root(p: &DVector<f64>, q: &DVector<f64>, yc: &DVector<f64>, dims: &[usize], delta: f64) -> f64 {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &j in dims {
        let dj = q[j] - p[j];
        let wj = p[j] - yc[j];
        a += dj * dj;
        b += wj * dj;
        c += wj * wj;
    }
    c -= delta * delta;
    if a == 0.0 {
        return 1.0;
    }
    let disc = (b * b - a * c).max(0.0);
    let sq = disc.sqrt();
    let u = if b >= 0.0 {
        let qv = -(b + sq);
        if qv == 0.0 { 0.0 } else { (qv / a).max(c / qv) }
    } else {
        (-b + sq) / a
    };
    u.clamp(0.0, 1.0)
}

fn lerp(a: &DVector<f64>, b: &DVector<f64>, u: f64) -> DVector<f64> {
    a + (b - a) * u
}

fn interp_aux(aux: &AuxChannels, i: usize, u: f64) -> DVector<f64> {
    let a = &aux.samples[i];
    let b = &aux.samples[(i + 1).min(aux.samples.len() - 1)];
    match aux.kind {
        AuxKind::Plain => lerp(a, b, u),
        AuxKind::Quaternion => {
            let b = if a.dot(b) < 0.0 { -b } else { b.clone() };
            let q = lerp(a, &b, u);
            let n = q.norm();
            if n > 0.0 { q / n } else { a.clone() }
        }
    }
}

fn validate_dims(dims: &[usize], d: usize) -> Result<()> {
    if dims.is_empty() {
        return Err(invalid("position_dims must not be empty"));
    }
    for (k, &j) in dims.iter().enumerate() {
        if j >= d {
            return Err(invalid(format!("position dim {j} out of range for d = {d}")));
        }
        if dims[..k].contains(&j) {
            return Err(invalid(format!("position dim {j} listed twice")));
        }
    }
    Ok(())
}

/// Resamples `traj` at constant chord `delta` measured on `position_dims`.
pub fn spatial_sample(traj: &TimedTrajectory, delta: f64, position_dims: &[usize]) -> Result<SpatialPath> {
    spatial_sample_with(traj, &SamplingOptions::new(delta, position_dims.to_vec()))
}

pub fn spatial_sample_with(traj: &TimedTrajectory, opts: &SamplingOptions) -> Result<SpatialPath> {
    let delta = opts.delta;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let dims = &opts.position_dims;
    validate_dims(dims, traj.dim())?;
    let pts = traj.points();
    let period = traj.period();

    let mut out_pts = vec![pts[0].clone()];
    let mut out_t = vec![0.0];
    let mut out_aux = traj.aux().map(|a| vec![a.samples[0].clone()]);
    let mut yc = pts[0].clone();
    let mut i = 0;
    let n_seg = pts.len() - 1;
    while i < n_seg {
        if chord(&pts[i + 1], &yc, dims) >= delta * (1.0 - EMIT_TOL) {
            let u = forward_root(&pts[i], &pts[i + 1], &yc, dims, delta);
            let y = lerp(&pts[i], &pts[i + 1], u);
            out_t.push((i as f64 + u) * period);
            if let (Some(v), Some(aux)) = (out_aux.as_mut(), traj.aux()) {
                v.push(interp_aux(aux, i, u));
            }
            out_pts.push(y.clone());
            yc = y;
        } else {
            i += 1;
        }
    }

    let demo_length: f64 = pts.windows(2).map(|w| chord(&w[1], &w[0], dims)).sum();
    let m = out_pts.len() - 1;
    if m == 0 {
        return Err(GdmpError::DegeneratePath { length: demo_length, delta });
    }
    let residual = chord(pts.last().unwrap(), &yc, dims);
    let arclengths: Vec<f64> = (0..=m).map(|k| k as f64 * delta).collect();
    let radius = opts.pause_radius.unwrap_or(0.5 * delta);
    let pauses = detect_pauses(traj, dims, radius, opts.min_pause, &out_pts, &out_t, delta);

    Ok(SpatialPath {
        delta,
        summary: SamplingSummary {
            intervals: m,
            length: m as f64 * delta,
            residual,
            demo_length,
            demo_goal: pts.last().unwrap().iter().copied().collect(),
            pauses,
        },
        points: out_pts,
        arclengths,
        times: out_t,
        aux: out_aux.map(|samples| AuxChannels { kind: traj.aux().unwrap().kind, samples }),
        position_dims: dims.clone(),
    })
}

/// Finds maximal stationary runs of input samples and tags each with the arc
/// length reached when it starts.
fn detect_pauses(
    traj: &TimedTrajectory,
    dims: &[usize],
    radius: f64,
    min_pause: f64,
    out_pts: &[DVector<f64>],
    out_t: &[f64],
    delta: f64,
) -> Vec<PauseInterval> {
    let pts = traj.points();
    let s_max = delta * (out_pts.len() - 1) as f64;
    // Progress along the emitted path at each input sample.
    let mut progress = Vec::with_capacity(pts.len());
    let mut k = 0;
    let mut running = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        let t = traj.time(i);
        while k + 1 < out_t.len() && out_t[k + 1] <= t {
            k += 1;
        }
        let sk = k as f64 * delta;
        let v = (sk + chord(p, &out_pts[k], dims).min(delta)).min(s_max);
        running = running.max(v);
        progress.push(running);
    }

    let mut pauses = Vec::new();
    let mut a = 0;
    while a < pts.len() {
        let mut b = a;
        while b + 1 < pts.len() && chord(&pts[b + 1], &pts[a], dims) <= radius {
            b += 1;
        }
        let (ta, tb) = (traj.time(a), traj.time(b));
        if tb - ta >= min_pause && b > a {
            pauses.push(PauseInterval { t_start: ta, t_end: tb, s: progress[a] });
        }
        a = b + 1;
    }
    pauses
}

/// Demonstrated timing law: (t, s) pairs of the emitted samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingLaw {
    pub samples: Vec<(f64, f64)>,
    #[serde(default)]
    pub pauses: Vec<PauseInterval>,
}

impl TimingLaw {
    pub fn duration(&self) -> f64 {
        self.samples.last().map(|p| p.0).unwrap_or(0.0)
    }

    pub fn final_arclength(&self) -> f64 {
        self.samples.last().map(|p| p.1).unwrap_or(0.0)
    }
}

pub fn timing_law(path: &SpatialPath) -> TimingLaw {
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(path.times.len());
    for (&t, &s) in path.times.iter().zip(&path.arclengths) {
        let t = match samples.last() {
            Some(&(prev, _)) if t <= prev => next_up(prev),
            _ => t,
        };
        samples.push((t, s));
    }
    TimingLaw { samples, pauses: path.summary.pauses.clone() }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

/// Largest pairwise chord among the samples inside the leading `hold_window`.
pub fn noise_floor_estimate(traj: &TimedTrajectory, hold_window: f64) -> Result<f64> {
    if !(hold_window.is_finite() && hold_window >= 0.0) {
        return Err(invalid(format!("hold window must be non-negative, got {hold_window}")));
    }
    if hold_window > traj.duration() * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "hold window {hold_window} s exceeds the trajectory duration {} s",
            traj.duration()
        )));
    }
    let count = ((hold_window / traj.period()) * (1.0 + 1e-12)).floor() as usize + 1;
    let count = count.min(traj.len());
    if count < 2 {
        return Err(GdmpError::InsufficientData(format!(
            "hold window {hold_window} s covers fewer than 2 samples"
        )));
    }
    let pts = &traj.points()[..count];
    let mut best = 0.0f64;
    for i in 0..count {
        for j in i + 1..count {
            best = best.max((&pts[i] - &pts[j]).norm());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_1d() -> TimedTrajectory {
        let pts = (0..=100).map(|k| DVector::from_element(1, k as f64 * 0.01)).collect();
        TimedTrajectory::new(0.01, pts, None).unwrap()
    }

    fn scalar_traj(period: f64, xs: &[f64]) -> TimedTrajectory {
        TimedTrajectory::new(period, xs.iter().map(|&x| DVector::from_element(1, x)).collect(), None).unwrap()
    }

    /// Dense piecewise-linear resampling plus cumulative chord test.
    fn dense_oracle(times: &[f64], xs: &[f64], delta: f64, step: f64) -> (Vec<f64>, Vec<f64>) {
        let t_end = *times.last().unwrap();
        let n = (t_end / step).round() as usize;
        let at = |t: f64| {
            let i = times.iter().rposition(|&ti| ti <= t).unwrap().min(times.len() - 2);
            let u = (t - times[i]) / (times[i + 1] - times[i]);
            xs[i] + u * (xs[i + 1] - xs[i])
        };
        let mut out_x = vec![xs[0]];
        let mut out_t = vec![0.0];
        for k in 1..=n {
            let t = k as f64 * step;
            let x = at(t);
            if (x - out_x.last().unwrap()).abs() >= delta - 1e-12 {
                out_x.push(x);
                out_t.push(t);
            }
        }
        (out_x, out_t)
    }

    #[test]
    fn constant_speed_line() {
        let path = spatial_sample(&line_1d(), 0.25, &[0]).unwrap();
        let xs: Vec<f64> = path.points.iter().map(|p| p[0]).collect();
        assert_eq!(xs.len(), 5);
        for (k, (&x, &t)) in xs.iter().zip(&path.times).enumerate() {
            assert_abs_diff_eq!(x, 0.25 * k as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(t, 0.25 * k as f64, epsilon = 1e-12);
        }
        assert_eq!(path.arclengths, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let law = timing_law(&path);
        for (k, &(t, s)) in law.samples.iter().enumerate() {
            assert_abs_diff_eq!(t, 0.25 * k as f64, epsilon = 1e-12);
            assert_eq!(s, 0.25 * k as f64);
        }
    }

    #[test]
    fn pause_emits_nothing() {
        let traj = scalar_traj(1.0, &[0.0, 0.0, 0.0, 0.0, 1.0]);
        let path = spatial_sample(&traj, 0.5, &[0]).unwrap();
        let (ox, ot) = dense_oracle(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 0.0, 0.0, 1.0], 0.5, 1e-5);
        assert_eq!(path.points.len(), ox.len());
        for k in 0..ox.len() {
            assert_abs_diff_eq!(path.points[k][0], ox[k], epsilon = 1e-4);
            assert_abs_diff_eq!(path.times[k], ot[k], epsilon = 1e-4);
        }
        assert_abs_diff_eq!(path.times[1], 3.5, epsilon = 1e-12);
        let law = timing_law(&path);
        assert_eq!(law.samples.len(), 3);
        assert_eq!(path.summary.pauses.len(), 1);
        let p = path.summary.pauses[0];
        assert_eq!((p.t_start, p.t_end, p.s), (0.0, 3.0, 0.0));
    }

    #[test]
    fn unit_circle_chords() {
        let n = 6283;
        let period = 2.0 * std::f64::consts::PI / n as f64;
        let pts = (0..=n)
            .map(|k| {
                let th = k as f64 * period;
                DVector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect();
        let traj = TimedTrajectory::new(period, pts, None).unwrap();
        let delta = 0.1;
        let path = spatial_sample(&traj, delta, &[0, 1]).unwrap();
        // Chord angle on the polygon is within rounding of the circle's.
        let theta = 2.0 * (delta / 2.0f64).asin();
        let expected = (2.0 * std::f64::consts::PI / theta).floor() as usize;
        assert_eq!(path.intervals(), expected);
        assert_eq!(expected, 62);
        for w in path.points.windows(2) {
            assert!(((&w[1] - &w[0]).norm() - delta).abs() <= 1e-9 * delta);
        }
    }

    #[test]
    fn long_segment_holds_many_samples() {
        let traj = scalar_traj(1.0, &[0.0, 1.0]);
        let path = spatial_sample(&traj, 0.1, &[0]).unwrap();
        assert_eq!(path.intervals(), 10);
        assert!(path.summary.residual < 1e-9);
    }

    #[test]
    fn bend_back_takes_forward_root() {
        // Goes out and comes back; the chord sphere is hit twice on the return.
        let traj = scalar_traj(1.0, &[0.0, 1.0, 0.0]);
        let path = spatial_sample(&traj, 0.3, &[0]).unwrap();
        for w in path.times.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for w in path.points.windows(2) {
            assert_abs_diff_eq!((w[1][0] - w[0][0]).abs(), 0.3, epsilon = 1e-12);
        }
        assert!(path.times.last().unwrap() > &1.0);
    }

    #[test]
    fn aux_dims_ignored_for_chord_and_interpolated() {
        let pts = (0..=10)
            .map(|k| DVector::from_vec(vec![k as f64 * 0.1, 5.0 * k as f64]))
            .collect();
        let aux = AuxChannels {
            kind: AuxKind::Plain,
            samples: (0..=10).map(|k| DVector::from_element(1, k as f64)).collect(),
        };
        let traj = TimedTrajectory::new(0.1, pts, Some(aux)).unwrap();
        let path = spatial_sample(&traj, 0.25, &[0]).unwrap();
        assert_eq!(path.intervals(), 4);
        let a = path.aux.as_ref().unwrap();
        assert_abs_diff_eq!(a.samples[1][0], 2.5, epsilon = 1e-9);
        assert_abs_diff_eq!(path.points[1][1], 12.5, epsilon = 1e-9);
    }

    #[test]
    fn quaternion_aux_is_renormalized() {
        let pts = vec![DVector::from_element(1, 0.0), DVector::from_element(1, 1.0)];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let aux = AuxChannels {
            kind: AuxKind::Quaternion,
            samples: vec![
                DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
                DVector::from_vec(vec![h, h, 0.0, 0.0]),
            ],
        };
        let traj = TimedTrajectory::new(1.0, pts, Some(aux)).unwrap();
        let path = spatial_sample(&traj, 0.5, &[0]).unwrap();
        for q in &path.aux.unwrap().samples {
            assert_abs_diff_eq!(q.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn errors() {
        let traj = line_1d();
        assert!(matches!(spatial_sample(&traj, 0.0, &[0]), Err(GdmpError::InvalidParameter(_))));
        assert!(matches!(spatial_sample(&traj, -1.0, &[0]), Err(GdmpError::InvalidParameter(_))));
        assert!(matches!(spatial_sample(&traj, 0.1, &[]), Err(GdmpError::InvalidParameter(_))));
        assert!(matches!(spatial_sample(&traj, 0.1, &[1]), Err(GdmpError::InvalidParameter(_))));
        match spatial_sample(&traj, 1.5, &[0]) {
            Err(GdmpError::DegeneratePath { length, delta }) => {
                assert_abs_diff_eq!(length, 1.0, epsilon = 1e-12);
                assert_eq!(delta, 1.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(TimedTrajectory::new(0.0, vec![DVector::zeros(1); 2], None).is_err());
        assert!(TimedTrajectory::new(0.1, vec![DVector::zeros(1)], None).is_err());
        assert!(TimedTrajectory::from_timestamps(
            &[0.0, 1.0, 1.0],
            vec![DVector::zeros(1); 3],
            None
        )
        .is_err());
    }

    #[test]
    fn single_interval_law() {
        let traj = scalar_traj(0.1, &[0.0, 0.05, 0.1, 0.15]);
        let path = spatial_sample(&traj, 0.1, &[0]).unwrap();
        let law = timing_law(&path);
        assert_eq!(law.samples.len(), 2);
        assert_eq!(law.samples[0].1, 0.0);
        assert_eq!(law.samples[1].1, 0.1);
        assert_abs_diff_eq!(path.summary.residual, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn tied_times_are_separated() {
        let mut path = spatial_sample(&line_1d(), 0.25, &[0]).unwrap();
        path.times[2] = path.times[1];
        let law = timing_law(&path);
        assert!(law.samples[2].0 > law.samples[1].0);
        assert!(law.samples[2].0 - law.samples[1].0 < 1e-15);
    }

    #[test]
    fn noise_floor_constant_and_tremor() {
        let flat = scalar_traj(0.01, &[0.3; 50]);
        assert_eq!(noise_floor_estimate(&flat, 0.3).unwrap(), 0.0);
        let xs: Vec<f64> = (0..200).map(|k| 1e-3 * (2.0 * std::f64::consts::PI * 5.0 * k as f64 * 0.001).sin()).collect();
        let tremor = scalar_traj(0.001, &xs);
        let v = noise_floor_estimate(&tremor, 0.19).unwrap();
        assert!((v - 2e-3).abs() <= 0.05 * 2e-3, "{v}");
        assert!(matches!(noise_floor_estimate(&tremor, 0.0005), Err(GdmpError::InsufficientData(_))));
        assert!(noise_floor_estimate(&tremor, 10.0).is_err());
    }
}
