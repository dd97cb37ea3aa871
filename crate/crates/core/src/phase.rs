//! Phase (timing-law) representations: uniformly sampled profiles, the
//! monotone interpolant of a demonstrated timing law, and closures.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sampling::TimingLaw;

/// Phase value with its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub s: f64,
    pub sd: f64,
    pub sdd: f64,
}

/// Anything that yields s(t), ṡ(t), s̈(t) over a finite horizon.
pub trait PhaseSource {
    fn at(&self, t: f64) -> PhasePoint;
    fn duration(&self) -> f64;
}

/// Phase given by a closure, mostly useful for tests and analytic profiles.
pub struct FnPhase<F> {
    f: F,
    duration: f64,
}

impl<F: Fn(f64) -> PhasePoint> FnPhase<F> {
    pub fn new(duration: f64, f: F) -> Self {
        FnPhase { f, duration }
    }
}

impl<F: Fn(f64) -> PhasePoint> PhaseSource for FnPhase<F> {
    fn at(&self, t: f64) -> PhasePoint {
        (self.f)(t)
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub t: f64,
    pub s: f64,
    pub sd: f64,
    pub sdd: f64,
}

/// Timing law sampled on a uniform grid t_k = k·dt.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    dt: f64,
    samples: Vec<PhaseSample>,
}

impl PhaseProfile {
    pub fn new(dt: f64, samples: Vec<PhaseSample>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("profile dt must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(invalid("a phase profile needs at least 2 samples"));
        }
        for (k, p) in samples.iter().enumerate() {
            if !(p.s.is_finite() && p.sd.is_finite() && p.sdd.is_finite()) {
                return Err(invalid(format!("profile sample {k} is not finite")));
            }
            let expect = k as f64 * dt;
            if (p.t - expect).abs() > 1e-6 * dt + 1e-9 * expect.abs() {
                return Err(invalid(format!("profile sample {k} at t = {} is off the uniform grid", p.t)));
            }
        }
        Ok(PhaseProfile { dt, samples })
    }

    /// Samples `src` on [0, duration] with step `dt`; the last sample lands
    /// on or just past `duration`.
    pub fn sample<P: PhaseSource + ?Sized>(src: &P, dt: f64) -> Result<Self> {
        let duration = src.duration();
        if !(duration.is_finite() && duration > 0.0) {
            return Err(invalid(format!("phase duration must be positive, got {duration}")));
        }
        let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let p = src.at(t);
                PhaseSample { t, s: p.s, sd: p.sd, sdd: p.sdd }
            })
            .collect();
        Self::new(dt, samples)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[PhaseSample] {
        &self.samples
    }

    pub fn total_duration(&self) -> f64 {
        self.samples.last().unwrap().t
    }

    pub fn final_s(&self) -> f64 {
        self.samples.last().unwrap().s
    }
}

impl PhaseSource for PhaseProfile {
    /// Quintic Hermite interpolation of (s, ṡ, s̈) between grid samples.
    /// Before the start the first sample is returned; past the end the
    /// final phase is held at rest.
    fn at(&self, t: f64) -> PhasePoint {
        let first = &self.samples[0];
        if t <= 0.0 {
            return PhasePoint { s: first.s, sd: first.sd, sdd: first.sdd };
        }
        let last = self.samples.last().unwrap();
        if t > last.t {
            return PhasePoint { s: last.s, sd: 0.0, sdd: 0.0 };
        }
        let h = self.dt;
        let i = ((t / h).floor() as usize).min(self.samples.len() - 2);
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let u = (t - a.t) / h;
        if u <= 0.0 {
            return PhasePoint { s: a.s, sd: a.sd, sdd: a.sdd };
        }
        if u >= 1.0 {
            return PhasePoint { s: b.s, sd: b.sd, sdd: b.sdd };
        }
        let c0 = a.s;
        let c1 = h * a.sd;
        let c2 = 0.5 * h * h * a.sdd;
        let p = b.s - c0 - c1 - c2;
        let v = h * b.sd - c1 - 2.0 * c2;
        let acc = h * h * b.sdd - 2.0 * c2;
        let c3 = 10.0 * p - 4.0 * v + 0.5 * acc;
        let c4 = -15.0 * p + 7.0 * v - acc;
        let c5 = 6.0 * p - 3.0 * v + 0.5 * acc;
        let s = c0 + u * (c1 + u * (c2 + u * (c3 + u * (c4 + u * c5))));
        let ds = c1 + u * (2.0 * c2 + u * (3.0 * c3 + u * (4.0 * c4 + u * 5.0 * c5)));
        let dds = 2.0 * c2 + u * (6.0 * c3 + u * (12.0 * c4 + u * 20.0 * c5));
        PhasePoint { s, sd: ds / h, sdd: dds / (h * h) }
    }

    fn duration(&self) -> f64 {
        self.total_duration()
    }
}

/// Shape-preserving piecewise-cubic interpolant of timing-law knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    t: Vec<f64>,
    s: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(t: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if t.len() != s.len() || t.len() < 2 {
            return Err(invalid("need at least 2 aligned knots"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("knot times must be strictly increasing"));
        }
        let n = t.len();
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let sec: Vec<f64> = (0..n - 1).map(|k| (s[k + 1] - s[k]) / h[k]).collect();
        let mut slope = vec![0.0; n];
        if n == 2 {
            slope[0] = sec[0];
            slope[1] = sec[0];
        } else {
            for k in 1..n - 1 {
                if sec[k - 1] * sec[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slope[k] = (w1 + w2) / (w1 / sec[k - 1] + w2 / sec[k]);
                }
            }
            slope[0] = end_slope(h[0], h[1], sec[0], sec[1]);
            slope[n - 1] = end_slope(h[n - 2], h[n - 3], sec[n - 2], sec[n - 3]);
        }
        Ok(MonotoneCubic { t, s, slope })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.t, &self.s)
    }
}

/// Three-point end slope with the usual shape-preserving limits.
fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d * m0 <= 0.0 {
        0.0
    } else if m0 * m1 <= 0.0 && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl PhaseSource for MonotoneCubic {
    fn at(&self, t: f64) -> PhasePoint {
        let n = self.t.len();
        if t < self.t[0] {
            return PhasePoint { s: self.s[0], sd: 0.0, sdd: 0.0 };
        }
        if t > self.t[n - 1] {
            return PhasePoint { s: self.s[n - 1], sd: 0.0, sdd: 0.0 };
        }
        let k = (self.t.partition_point(|&x| x <= t) - 1).min(n - 2);
        let h = self.t[k + 1] - self.t[k];
        let u = (t - self.t[k]) / h;
        let (p0, p1) = (self.s[k], self.s[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let s = (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1;
        let ds = (6.0 * u2 - 6.0 * u) * p0 + (3.0 * u2 - 4.0 * u + 1.0) * m0 + (-6.0 * u2 + 6.0 * u) * p1
            + (3.0 * u2 - 2.0 * u) * m1;
        let dds = (12.0 * u - 6.0) * p0 + (6.0 * u - 4.0) * m0 + (-12.0 * u + 6.0) * p1 + (6.0 * u - 2.0) * m1;
        PhasePoint { s, sd: ds / h, sdd: dds / (h * h) }
    }

    fn duration(&self) -> f64 {
        *self.t.last().unwrap()
    }
}

/// Interpolant of a timing law with its stationary intervals pinned flat.
pub fn timing_law_interpolant(law: &TimingLaw) -> Result<MonotoneCubic> {
    let mut knots: Vec<(f64, f64)> = law.samples.clone();
    for p in &law.pauses {
        knots.push((p.t_start, p.s));
        knots.push((p.t_end, p.s));
    }
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut t: Vec<f64> = Vec::with_capacity(knots.len());
    let mut s: Vec<f64> = Vec::with_capacity(knots.len());
    let horizon = law.duration().max(1.0);
    for (tk, sk) in knots {
        match t.last() {
            Some(&prev) if tk - prev <= 1e-12 * horizon => {
                let last = s.last_mut().unwrap();
                *last = last.max(sk);
            }
            _ => {
                let floor = s.last().copied().unwrap_or(f64::NEG_INFINITY);
                t.push(tk);
                s.push(sk.max(floor));
            }
        }
    }
    // Knots added for a pause must not push s above the law's own end value.
    let end = law.final_arclength();
    for v in s.iter_mut() {
        *v = v.min(end);
    }
    MonotoneCubic::new(t, s)
}

/// Samples the demonstrated timing law on a uniform grid.
pub fn phase_from_timing_law(law: &TimingLaw, dt: f64) -> Result<PhaseProfile> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    PhaseProfile::sample(&timing_law_interpolant(law)?, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{spatial_sample, timing_law, TimedTrajectory};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn pause_law() -> TimingLaw {
        let xs = [0.0, 0.0, 0.0, 0.0, 1.0];
        let traj = TimedTrajectory::new(1.0, xs.iter().map(|&x| DVector::from_element(1, x)).collect(), None).unwrap();
        timing_law(&spatial_sample(&traj, 0.5, &[0]).unwrap())
    }

    #[test]
    fn constant_speed_law() {
        let law = TimingLaw {
            samples: (0..=4).map(|k| (0.25 * k as f64, 0.25 * k as f64)).collect(),
            pauses: vec![],
        };
        let prof = phase_from_timing_law(&law, 1e-3).unwrap();
        for p in prof.samples().iter().take(1000) {
            assert!((p.sd - 1.0).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn pause_is_flat() {
        let law = pause_law();
        let interp = timing_law_interpolant(&law).unwrap();
        let h = 1e-5;
        let mut t = 0.5;
        while t < 3.0 {
            let fd = (interp.at(t + h).s - interp.at(t - h).s) / (2.0 * h);
            assert!(fd.abs() < 1e-3 && interp.at(t).sd.abs() < 1e-3, "t {t}");
            t += 0.01;
        }
        let prof = phase_from_timing_law(&law, 1e-3).unwrap();
        for p in prof.samples().iter().filter(|p| p.t >= 0.5 && p.t < 3.0) {
            assert!(p.sd.abs() < 1e-3);
        }
        // Motion starts right after the stationary part.
        assert!(interp.at(3.2).sd > 0.1);
    }

    #[test]
    fn interpolant_hits_knots() {
        let law = pause_law();
        let interp = timing_law_interpolant(&law).unwrap();
        for &(t, s) in &law.samples {
            assert_abs_diff_eq!(interp.at(t).s, s, epsilon = 1e-9);
        }
    }

    #[test]
    fn monotone_cubic_is_monotone() {
        let t = vec![0.0, 1.0, 1.5, 4.0, 4.1, 6.0];
        let s = vec![0.0, 0.2, 0.2, 1.0, 1.5, 1.6];
        let m = MonotoneCubic::new(t, s).unwrap();
        let mut prev = -1.0;
        for k in 0..=6000 {
            let p = m.at(k as f64 * 1e-3);
            assert!(p.s >= prev - 1e-12);
            prev = p.s;
        }
    }

    #[test]
    fn quintic_hermite_reproduces_quintic() {
        let f = |t: f64| PhasePoint {
            s: t.powi(5) - t.powi(3) + 0.5 * t,
            sd: 5.0 * t.powi(4) - 3.0 * t * t + 0.5,
            sdd: 20.0 * t.powi(3) - 6.0 * t,
        };
        let prof = PhaseProfile::sample(&FnPhase::new(1.0, f), 0.1).unwrap();
        for k in 0..100 {
            let t = 0.0137 + k as f64 * 0.0098;
            let p = prof.at(t);
            let q = f(t);
            assert_abs_diff_eq!(p.s, q.s, epsilon = 1e-12);
            assert_abs_diff_eq!(p.sd, q.sd, epsilon = 1e-10);
            assert_abs_diff_eq!(p.sdd, q.sdd, epsilon = 1e-8);
        }
        let end = prof.at(5.0);
        assert_eq!((end.sd, end.sdd), (0.0, 0.0));
    }

    #[test]
    fn rejects_off_grid_samples() {
        let bad = vec![
            PhaseSample { t: 0.0, s: 0.0, sd: 0.0, sdd: 0.0 },
            PhaseSample { t: 0.2, s: 0.0, sd: 0.0, sdd: 0.0 },
        ];
        assert!(PhaseProfile::new(0.1, bad).is_err());
    }
}
