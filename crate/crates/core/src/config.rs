//! Single pipeline configuration with a default for every field.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::completion::CompleterSpec;
use crate::depth::{CameraIntrinsics, CompensationParams};
use crate::error::{Error, Result};
use crate::executor::ExecParams;
use crate::grasp::{CostWeights, GripperModel, SamplerParams};
use crate::sim::NoiseModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchParams {
    pub size: usize,
    /// Points each patch completion returns.
    pub refine_budget: usize,
}

impl Default for PatchParams {
    fn default() -> Self {
        PatchParams {
            size: 2048,
            refine_budget: 2048,
        }
    }
}

/// Full-mode observation stances: the initial one, then alternating
/// `+step`, `-step`, `+2 step`, ... of yaw about the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewpointSchedule {
    pub count: usize,
    pub yaw_step_deg: f64,
}

impl Default for ViewpointSchedule {
    fn default() -> Self {
        ViewpointSchedule {
            count: 3,
            yaw_step_deg: 30.0,
        }
    }
}

impl ViewpointSchedule {
    /// Yaw offsets in radians, starting with 0.
    pub fn offsets(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| {
                let k = i.div_ceil(2) as f64;
                let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                sign * k * self.yaw_step_deg.to_radians()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionParams {
    pub max_retries: usize,
    /// Eroded target pixels with valid depth needed to accept a mask.
    pub min_mask_pixels: usize,
    pub erode_kernel: usize,
    pub erode_iterations: usize,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        PerceptionParams {
            max_retries: 3,
            min_mask_pixels: 50,
            erode_kernel: 3,
            erode_iterations: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub compensation: CompensationParams,
    pub completer: CompleterSpec,
    pub patch: PatchParams,
    pub voxel: f64,
    pub gripper: GripperModel,
    pub weights: CostWeights,
    pub exec: ExecParams,
    pub sampler: SamplerParams,
    pub candidates: usize,
    pub normals_k: usize,
    /// Scene points farther than this from the target centroid are ignored
    /// by the collision filter.
    pub collision_neighborhood: f64,
    /// Extra clearance required around the gripper bodies at the retreat
    /// poses along the approach; the grasp pose itself uses the bare bodies.
    pub approach_clearance: f64,
    pub intrinsics: CameraIntrinsics,
    pub viewpoints: ViewpointSchedule,
    pub noise: NoiseModel,
    pub perception: PerceptionParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            compensation: CompensationParams::default(),
            completer: CompleterSpec::default(),
            patch: PatchParams::default(),
            voxel: 0.005,
            gripper: GripperModel::default(),
            weights: CostWeights::default(),
            exec: ExecParams::default(),
            sampler: SamplerParams::default(),
            candidates: 1000,
            normals_k: 30,
            collision_neighborhood: 0.5,
            approach_clearance: 0.005,
            intrinsics: CameraIntrinsics::default(),
            viewpoints: ViewpointSchedule::default(),
            noise: NoiseModel::default(),
            perception: PerceptionParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.compensation.validate()?;
        self.completer.validate()?;
        self.gripper.validate()?;
        self.weights.validate()?;
        self.exec.validate()?;
        self.sampler.validate()?;
        self.intrinsics.validate()?;
        self.noise.validate()?;
        if self.patch.size == 0 || self.patch.refine_budget == 0 {
            return Err(Error::Config("patch size and refine budget must be at least 1".into()));
        }
        if !(self.voxel.is_finite() && self.voxel > 0.0) {
            return Err(Error::Config(format!("voxel size must be positive, got {}", self.voxel)));
        }
        if self.candidates == 0 {
            return Err(Error::Config("candidate count must be at least 1".into()));
        }
        if self.normals_k < 3 {
            return Err(Error::Config("normal estimation needs k ≥ 3".into()));
        }
        if !(self.collision_neighborhood.is_finite() && self.collision_neighborhood > 0.0) {
            return Err(Error::Config("collision neighborhood must be positive".into()));
        }
        if !(self.approach_clearance.is_finite() && self.approach_clearance >= 0.0) {
            return Err(Error::Config("approach clearance must be non-negative".into()));
        }
        if self.viewpoints.count == 0 || !self.viewpoints.yaw_step_deg.is_finite() {
            return Err(Error::Config("need at least one viewpoint with a finite yaw step".into()));
        }
        let p = &self.perception;
        if p.erode_kernel == 0 || p.erode_kernel % 2 == 0 {
            return Err(Error::Config("erosion kernel must be odd".into()));
        }
        if self.exec.standoff > self.weights.r_max {
            return Err(Error::Config(format!(
                "standoff {} exceeds the reach radius {}",
                self.exec.standoff, self.weights.r_max
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<PipelineConfig> {
        let config: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        PipelineConfig::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_json()? + "\n")?)
    }
}
