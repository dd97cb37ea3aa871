//! Pipeline configuration document.

use gdmp_core::hilsim::HilConfig;
use gdmp_core::kinematics::{Elbow, PlanarArm};
use gdmp_core::phaseopt::ConstraintSet;
use gdmp_core::sampling::{AuxKind, SamplingOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    /// Spatial period Δ (m).
    pub delta: f64,
    /// Columns that define distance; all columns if unset.
    pub position_dims: Option<Vec<usize>>,
    pub pause_radius: Option<f64>,
    pub min_pause: f64,
    pub aux_kind: AuxKind,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection { delta: 0.01, position_dims: None, pause_radius: None, min_pause: 0.5, aux_kind: AuxKind::Plain }
    }
}

impl SamplingSection {
    pub fn options(&self, dim: usize) -> SamplingOptions {
        let dims = self.position_dims.clone().unwrap_or_else(|| (0..dim).collect());
        SamplingOptions { delta: self.delta, position_dims: dims, pause_radius: self.pause_radius, min_pause: self.min_pause }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvefitSection {
    pub n_basis: usize,
    pub width_scale: f64,
    pub ridge: f64,
}

impl Default for CurvefitSection {
    fn default() -> Self {
        CurvefitSection { n_basis: 30, width_scale: 2.0, ridge: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdmpSection {
    pub alpha: f64,
    /// α/4 if unset.
    pub beta: Option<f64>,
    /// New goal; the fitted path end if unset.
    pub g: Option<Vec<f64>>,
    /// New start; the fitted path start if unset.
    pub y0: Option<Vec<f64>>,
    /// Rollout step (s).
    pub dt: f64,
}

impl Default for GdmpSection {
    fn default() -> Self {
        GdmpSection { alpha: 40.0, beta: None, g: None, y0: None, dt: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseoptSection {
    pub constraints: ConstraintSet,
    pub grid: usize,
}

impl Default for PhaseoptSection {
    fn default() -> Self {
        PhaseoptSection {
            constraints: ConstraintSet { sd_max: Some(0.5), sdd_max: Some(2.0), ..Default::default() },
            grid: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicsSection {
    pub l1: f64,
    pub l2: f64,
    pub elbow: Elbow,
    pub limits: Option<[[f64; 2]; 2]>,
    /// Path columns mapped to the arm plane.
    pub plane_dims: [usize; 2],
    pub n_basis: usize,
    pub width_scale: f64,
    pub ridge: f64,
}

impl Default for KinematicsSection {
    fn default() -> Self {
        KinematicsSection {
            l1: 0.5,
            l2: 0.4,
            elbow: Elbow::Down,
            limits: None,
            plane_dims: [0, 1],
            n_basis: 30,
            width_scale: 2.0,
            ridge: 1e-8,
        }
    }
}

impl KinematicsSection {
    pub fn arm(&self) -> gdmp_core::Result<PlanarArm> {
        let arm = PlanarArm::new(self.l1, self.l2, self.elbow)?;
        match self.limits {
            Some(l) => arm.with_limits(l),
            None => Ok(arm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sampling: SamplingSection,
    pub curvefit: CurvefitSection,
    pub gdmp: GdmpSection,
    pub phaseopt: PhaseoptSection,
    /// Planar arm for joint-space constraints; disabled if unset.
    pub kinematics: Option<KinematicsSection>,
    pub hil: HilConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))
    }

    pub fn load(path: Option<&std::path::Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::input(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_json(&text)
            }
            None => Ok(Self::default()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = PipelineConfig::from_json(r#"{"sampling": {"delta": 0.02}}"#).unwrap();
        assert_eq!(c.sampling.delta, 0.02);
        assert_eq!(c.curvefit, CurvefitSection::default());
        assert_eq!(c.hil.human.k_h, 300.0);
        assert!(c.kinematics.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            r#"{"samplng": {}}"#,
            r#"{"sampling": {"dleta": 0.1}}"#,
            r#"{"phaseopt": {"constraints": {"v_max": 1}}}"#,
            r#"{"hil": {"human": {"kp": 1}}}"#,
        ] {
            assert!(PipelineConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = PipelineConfig::from_json(r#"{"kinematics": {"l1": 1.0}, "gdmp": {"g": [1, 2]}}"#).unwrap();
        let back = PipelineConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }
}
