//! Analytic planar two-link arm used to map Cartesian paths to joint paths.

use std::f64::consts::{PI, TAU};

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::curvefit::{fit_samples, CurveFit};
use crate::error::{invalid, GdmpError, Result};
use crate::sampling::SpatialPath;

/// Reachability slack on the annulus boundary.
pub const REACH_EPS: f64 = 1e-9;
/// Distance to the annulus boundary below which a sample is flagged.
pub const SINGULAR_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Elbow {
    /// q2 ≤ 0.
    Up,
    /// q2 ≥ 0.
    #[default]
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarArm {
    pub l1: f64,
    pub l2: f64,
    pub elbow: Elbow,
    /// [min, max] per joint (rad).
    pub limits: [[f64; 2]; 2],
}

impl PlanarArm {
    pub fn new(l1: f64, l2: f64, elbow: Elbow) -> Result<Self> {
        let arm = PlanarArm { l1, l2, elbow, limits: [[-TAU, TAU], [-PI, PI]] };
        arm.validate()?;
        Ok(arm)
    }

    pub fn with_limits(mut self, limits: [[f64; 2]; 2]) -> Result<Self> {
        self.limits = limits;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1.is_finite() && self.l1 > 0.0 && self.l2.is_finite() && self.l2 > 0.0) {
            return Err(invalid("link lengths must be positive"));
        }
        if self.limits.iter().any(|l| !(l[0] < l[1])) {
            return Err(invalid("joint limits must satisfy min < max"));
        }
        Ok(())
    }

    pub fn forward(&self, q: [f64; 2]) -> [f64; 2] {
        let a = q[0] + q[1];
        [self.l1 * q[0].cos() + self.l2 * a.cos(), self.l1 * q[0].sin() + self.l2 * a.sin()]
    }

    /// ∂p/∂q, row-major.
    pub fn jacobian(&self, q: [f64; 2]) -> [[f64; 2]; 2] {
        let a = q[0] + q[1];
        [
            [-self.l1 * q[0].sin() - self.l2 * a.sin(), -self.l2 * a.sin()],
            [self.l1 * q[0].cos() + self.l2 * a.cos(), self.l2 * a.cos()],
        ]
    }

    /// Law-of-cosines solution on the configured elbow branch.
    pub fn inverse(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(invalid("target must be finite"));
        }
        let r = p[0].hypot(p[1]);
        let outer = self.l1 + self.l2;
        let inner = (self.l1 - self.l2).abs();
        if r > outer + REACH_EPS {
            return Err(GdmpError::Unreachable { index: 0, s: 0.0, deficit: r - outer });
        }
        if r < inner - REACH_EPS {
            return Err(GdmpError::Unreachable { index: 0, s: 0.0, deficit: inner - r });
        }
        let c2 = ((r * r - self.l1 * self.l1 - self.l2 * self.l2) / (2.0 * self.l1 * self.l2)).clamp(-1.0, 1.0);
        let q2 = match self.elbow {
            Elbow::Down => c2.acos(),
            Elbow::Up => -c2.acos(),
        };
        let q1 = p[1].atan2(p[0]) - (self.l2 * q2.sin()).atan2(self.l1 + self.l2 * q2.cos());
        Ok([q1, q2])
    }

    /// Same branch, with q1 shifted by whole turns to land nearest `prev`.
    pub fn inverse_near(&self, p: [f64; 2], prev: [f64; 2]) -> Result<[f64; 2]> {
        let mut q = self.inverse(p)?;
        q[0] += TAU * ((prev[0] - q[0]) / TAU).round();
        Ok(q)
    }

    /// Distance from `p` to the nearest boundary circle of the workspace.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        let r = p[0].hypot(p[1]);
        (self.l1 + self.l2 - r).min(r - (self.l1 - self.l2).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointPath {
    pub arclengths: Vec<f64>,
    pub joints: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
}

impl JointPath {
    /// Fits q*(s) with the same basis machinery as the Cartesian curve.
    pub fn fit(&self, s_f: f64, n_basis: usize, width_scale: f64, ridge: f64) -> Result<CurveFit> {
        let values: Vec<DVector<f64>> = self.joints.iter().map(|q| DVector::from_column_slice(q)).collect();
        let delta = if self.arclengths.len() > 1 { self.arclengths[1] - self.arclengths[0] } else { s_f };
        fit_samples(&self.arclengths, &values, s_f, n_basis, width_scale, ridge, delta)
    }
}

/// IK of every spatial sample projected on `plane_dims`.
pub fn joint_path(arm: &PlanarArm, path: &SpatialPath, plane_dims: [usize; 2]) -> Result<JointPath> {
    joint_path_from_points(arm, &path.arclengths, &path.points, plane_dims)
}

pub fn joint_path_from_points(
    arm: &PlanarArm,
    arclengths: &[f64],
    points: &[DVector<f64>],
    plane_dims: [usize; 2],
) -> Result<JointPath> {
    arm.validate()?;
    if arclengths.len() != points.len() || points.is_empty() {
        return Err(invalid("arclengths and points must be aligned and non-empty"));
    }
    let d = points[0].len();
    if plane_dims[0] >= d || plane_dims[1] >= d || plane_dims[0] == plane_dims[1] {
        return Err(invalid(format!("plane dims {plane_dims:?} invalid for d = {d}")));
    }
    let mut joints: Vec<[f64; 2]> = Vec::with_capacity(points.len());
    let mut warnings = Vec::new();
    for (k, (p, &s)) in points.iter().zip(arclengths).enumerate() {
        let xy = [p[plane_dims[0]], p[plane_dims[1]]];
        let q = match joints.last() {
            Some(&prev) => arm.inverse_near(xy, prev),
            None => arm.inverse(xy),
        }
        .map_err(|e| match e {
            GdmpError::Unreachable { deficit, .. } => GdmpError::Unreachable { index: k, s, deficit },
            other => other,
        })?;
        for (j, (&v, [lo, hi])) in q.iter().zip(arm.limits).enumerate() {
            if v < lo || v > hi {
                return Err(GdmpError::JointLimit { index: k, joint: j + 1, value: v });
            }
        }
        if arm.boundary_distance(xy) < SINGULAR_MARGIN {
            let msg = format!("sample {k} (s = {s:.4}) is within {SINGULAR_MARGIN} m of the workspace boundary");
            warn!("{msg}");
            warnings.push(msg);
        }
        if let Some(prev) = joints.last() {
            let step = (q[0] - prev[0]).hypot(q[1] - prev[1]);
            if step > PI / 8.0 {
                let msg = format!("joint step {step:.3} rad between samples {} and {k}", k - 1);
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        joints.push(q);
    }
    Ok(JointPath { arclengths: arclengths.to_vec(), joints, warnings })
}
