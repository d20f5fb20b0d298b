//! Antipodal candidate sampling, gripper collision filtering and
//! weighted-cost grasp selection.

mod collision;
mod sampler;
mod score;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};

pub use collision::{collision_filter, collision_mask, gripper_collides, padded_collision_mask};
pub use sampler::{antipodal_pair, sample_candidates, verify_candidate, SamplerParams};
pub use score::{score, score_all, select, CostWeights, ScoreBreakdown};

/// Parallel-jaw gripper dimensions in metres.
///
/// In the gripper frame the closing region is centred on the origin:
/// `x ∈ [-L/2, L/2]` along the approach axis, `y ∈ [-a/2, a/2]` along the
/// closing axis and `z ∈ [-h/2, h/2]`. The fingers sit just outside it on
/// either side of `y`, and the palm sits behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GripperModel {
    pub max_aperture: f64,
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub finger_height: f64,
    pub palm_depth: f64,
    pub palm_width: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        GripperModel {
            max_aperture: 0.10,
            finger_length: 0.08,
            finger_thickness: 0.02,
            finger_height: 0.03,
            palm_depth: 0.04,
            palm_width: 0.14,
        }
    }
}

/// Axis-aligned box in the gripper frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl LocalBox {
    /// Strict interior test; boundary points are outside.
    pub fn contains_strict(&self, q: &Vec3) -> bool {
        (0..3).all(|i| self.min[i] < q[i] && q[i] < self.max[i])
    }

    /// Closed containment; boundary points are inside.
    pub fn contains_closed(&self, q: &Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= q[i] && q[i] <= self.max[i])
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) / 2.0
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        std::array::from_fn(|i| {
            Vec3::new(
                if i & 1 == 0 { a.x } else { b.x },
                if i & 2 == 0 { a.y } else { b.y },
                if i & 4 == 0 { a.z } else { b.z },
            )
        })
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.max_aperture,
            self.finger_length,
            self.finger_thickness,
            self.finger_height,
            self.palm_depth,
            self.palm_width,
        ];
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("gripper dimensions must be positive".into()));
        }
        if self.palm_width < self.max_aperture + 2.0 * self.finger_thickness {
            return Err(Error::Config(
                "palm must be at least as wide as the open fingers".into(),
            ));
        }
        Ok(())
    }

    pub fn closing_region(&self) -> LocalBox {
        let (hl, ha, hh) = (self.finger_length / 2.0, self.max_aperture / 2.0, self.finger_height / 2.0);
        LocalBox {
            min: Vec3::new(-hl, -ha, -hh),
            max: Vec3::new(hl, ha, hh),
        }
    }

    /// Collision bodies: left finger, right finger, palm.
    pub fn collision_boxes(&self) -> [LocalBox; 3] {
        let (hl, ha, hh) = (self.finger_length / 2.0, self.max_aperture / 2.0, self.finger_height / 2.0);
        let t = self.finger_thickness;
        let hp = self.palm_width / 2.0;
        [
            LocalBox {
                min: Vec3::new(-hl, ha, -hh),
                max: Vec3::new(hl, ha + t, hh),
            },
            LocalBox {
                min: Vec3::new(-hl, -ha - t, -hh),
                max: Vec3::new(hl, -ha, hh),
            },
            LocalBox {
                min: Vec3::new(-hl - self.palm_depth, -hp, -hh),
                max: Vec3::new(-hl, hp, hh),
            },
        ]
    }

    /// Collision bodies grown by `margin` on every face except the finger
    /// faces bounding the closing region.
    pub fn padded_boxes(&self, margin: f64) -> [LocalBox; 3] {
        let pad = Vec3::repeat(margin);
        let [mut left, mut right, mut palm] = self.collision_boxes();
        for b in [&mut left, &mut right, &mut palm] {
            b.min -= pad;
            b.max += pad;
        }
        left.min.y += margin;
        right.max.y -= margin;
        [left, right, palm]
    }

    /// Box enclosing every collision body.
    pub fn hull(&self) -> LocalBox {
        let boxes = self.collision_boxes();
        let mut hull = boxes[0];
        for b in &boxes[1..] {
            hull.min = hull.min.inf(&b.min);
            hull.max = hull.max.sup(&b.max);
        }
        hull
    }

    /// Centre and radius of a sphere enclosing every collision body.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        let hull = self.hull();
        (hull.center(), (hull.max - hull.min).norm() / 2.0)
    }
}

/// One gripper pose proposal. `pose.translation` is the centre of the
/// closing region; `x̂` approaches, `ŷ` closes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub pose: Pose,
    pub width: f64,
    pub seed_index: usize,
}

impl GraspCandidate {
    pub fn approach(&self) -> Vec3 {
        self.pose.x_axis()
    }

    pub fn closing(&self) -> Vec3 {
        self.pose.y_axis()
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation
    }
}

/// Exported grasp list entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub position: [f64; 3],
    pub rotation: [f64; 9],
    pub width: f64,
    pub breakdown: Option<ScoreBreakdown>,
    pub rejected: bool,
    pub reject_reason: Option<String>,
}

impl GraspRecord {
    pub fn new(candidate: &GraspCandidate, breakdown: Option<ScoreBreakdown>, reject_reason: Option<String>) -> Self {
        let t = candidate.pose.translation;
        GraspRecord {
            position: [t.x, t.y, t.z],
            rotation: candidate.pose.rotation_row_major(),
            width: candidate.width,
            breakdown,
            rejected: reject_reason.is_some(),
            reject_reason,
        }
    }
}
