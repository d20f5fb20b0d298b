use serde::{Deserialize, Serialize};

use super::primitive::box_corners;
use super::{sample_object, Body, Scene, TABLE_LABEL};
use crate::error::Result;
use crate::executor::{ExecParams, FailureMode};
use crate::geometry::{PointCloud, Pose, Rotation, Vec3};
use crate::grasp::{antipodal_pair, gripper_collides, GraspCandidate, GripperModel, LocalBox};
use crate::seed::derive_seed;

/// Ground-truth surface points per object used for adjudication.
pub const ADJUDICATION_SAMPLES: usize = 4096;
const ADJUDICATION_SEED: u64 = 0x5EED_AD1D;
const MIN_CLOSURE_POINTS: usize = 10;
const DEFAULT_FRICTION_DEG: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Failure(FailureMode),
}

/// Where the adjudicated execution stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStage {
    PreGrasp,
    Insert,
    Closure,
    Lift,
    Passed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCheck {
    pub outcome: Outcome,
    pub stage: CheckStage,
    /// Label of the body that was hit, for collision outcomes.
    pub contact: Option<String>,
}

impl GraspCheck {
    fn fail(mode: FailureMode, stage: CheckStage, contact: Option<String>) -> Self {
        GraspCheck {
            outcome: Outcome::Failure(mode),
            stage,
            contact,
        }
    }
}

/// Oriented box in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub center: Vec3,
    pub rotation: Rotation,
    pub half: Vec3,
}

impl Obb {
    pub fn from_local(pose: &Pose, b: &LocalBox) -> Obb {
        Obb {
            center: pose.transform_point(&b.center()),
            rotation: pose.rotation,
            half: (b.max - b.min) / 2.0,
        }
    }
}

/// Separating-axis test; boxes that merely touch do not overlap.
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    let ax: [Vec3; 3] = std::array::from_fn(|i| a.rotation.matrix().column(i).into_owned());
    let bx: [Vec3; 3] = std::array::from_fn(|i| b.rotation.matrix().column(i).into_owned());
    let t = b.center - a.center;
    let mut axes: Vec<Vec3> = ax.iter().chain(bx.iter()).copied().collect();
    for u in &ax {
        for v in &bx {
            if let Some(c) = u.cross(v).try_normalize(1e-12) {
                axes.push(c);
            }
        }
    }
    axes.iter().all(|l| {
        let ra: f64 = (0..3).map(|i| a.half[i] * ax[i].dot(l).abs()).sum();
        let rb: f64 = (0..3).map(|i| b.half[i] * bx[i].dot(l).abs()).sum();
        t.dot(l).abs() < ra + rb
    })
}

fn lattice(b: &LocalBox) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(27);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let f = Vec3::new(i as f64, j as f64, k as f64) / 2.0;
                out.push(b.min + (b.max - b.min).component_mul(&f));
            }
        }
    }
    out
}

struct Solid {
    body: Body,
    samples: PointCloud,
    center: Vec3,
    radius: f64,
}

/// Dense ground-truth view of a scene for judging one target's grasps.
pub struct Adjudicator {
    solids: Vec<Solid>,
    target: usize,
    table: Obb,
    cos_gamma: f64,
}

impl Adjudicator {
    pub fn new(scene: &Scene, target: &str) -> Result<Adjudicator> {
        let target_obj = scene.object(target)?;
        let mut solids = Vec::with_capacity(scene.objects.len());
        let mut target_idx = 0;
        for (i, o) in scene.objects.iter().enumerate() {
            if o.id == target_obj.id {
                target_idx = i;
            }
            let (lo, hi) = o.shape.bounds();
            let corners = box_corners(&lo, &hi).map(|c| o.pose.transform_point(&c));
            let center = corners.iter().sum::<Vec3>() / 8.0;
            let radius = corners.iter().map(|c| (c - center).norm()).fold(0.0, f64::max);
            solids.push(Solid {
                body: Body {
                    label: o.id.clone(),
                    shape: o.shape.clone(),
                    pose: o.pose.clone(),
                },
                samples: sample_object(o, ADJUDICATION_SAMPLES, derive_seed(ADJUDICATION_SEED, i as u64)),
                center,
                radius,
            });
        }
        let table = scene.table.body();
        let Some(dims) = (match &table.shape {
            super::Primitive::Box { dims } => Some(*dims),
            _ => None,
        }) else {
            unreachable!("table is a box")
        };
        Ok(Adjudicator {
            solids,
            target: target_idx,
            table: Obb {
                center: table.pose.translation,
                rotation: table.pose.rotation,
                half: dims / 2.0,
            },
            cos_gamma: DEFAULT_FRICTION_DEG.to_radians().cos(),
        })
    }

    pub fn with_friction_half_angle(mut self, degrees: f64) -> Self {
        self.cos_gamma = degrees.to_radians().cos();
        self
    }

    pub fn target_samples(&self) -> &PointCloud {
        &self.solids[self.target].samples
    }

    fn near(&self, s: &Solid, pose: &Pose, gripper: &GripperModel) -> bool {
        let (c, r) = gripper.bounding_sphere();
        (pose.transform_point(&c) - s.center).norm() < r + s.radius
    }

    fn hits_solid(&self, s: &Solid, pose: &Pose, gripper: &GripperModel) -> bool {
        if !self.near(s, pose, gripper) {
            return false;
        }
        if gripper_collides(pose, gripper, &s.samples.points) {
            return true;
        }
        gripper.collision_boxes().iter().flat_map(lattice).any(|q| {
            let w = pose.transform_point(&q);
            s.body.shape.contains(&s.body.pose.inverse_transform_point(&w))
        })
    }

    fn hits_table(&self, pose: &Pose, gripper: &GripperModel) -> bool {
        gripper
            .collision_boxes()
            .iter()
            .any(|b| obb_overlap(&Obb::from_local(pose, b), &self.table))
    }

    /// First body a gripper at `pose` collides with: target, then clutter in
    /// scene order, then the table.
    pub fn first_contact(&self, pose: &Pose, gripper: &GripperModel) -> Option<String> {
        let order = std::iter::once(self.target).chain((0..self.solids.len()).filter(|&i| i != self.target));
        for i in order {
            if self.hits_solid(&self.solids[i], pose, gripper) {
                return Some(self.solids[i].body.label.clone());
            }
        }
        self.hits_table(pose, gripper).then(|| TABLE_LABEL.to_string())
    }

    fn collision_mode(&self, label: &str) -> FailureMode {
        if label == self.solids[self.target].body.label {
            FailureMode::Fm2ApproachCollisionTarget
        } else {
            FailureMode::Fm3ApproachCollisionClutter
        }
    }

    /// Approach sweep, closure test and lift sweep, in that order.
    pub fn check(&self, g_pre: &Pose, g_star: &GraspCandidate, gripper: &GripperModel, params: &ExecParams) -> GraspCheck {
        if let Some(fail) = self.check_approach(g_pre, &g_star.pose, gripper, params) {
            return fail;
        }
        if !self.closure_holds(&g_star.pose, gripper) {
            return GraspCheck::fail(FailureMode::Fm2ApproachCollisionTarget, CheckStage::Closure, None);
        }
        if let Some(fail) = self.check_lift(&g_star.pose, gripper, params) {
            return fail;
        }
        GraspCheck {
            outcome: Outcome::Success,
            stage: CheckStage::Passed,
            contact: None,
        }
    }

    /// Straight-line sweep from `g_pre` to `g_star` in `sweep_step`
    /// increments; the first pose is the pre-grasp itself.
    pub fn check_approach(&self, g_pre: &Pose, g_star: &Pose, gripper: &GripperModel, params: &ExecParams) -> Option<GraspCheck> {
        let span = g_star.translation - g_pre.translation;
        let steps = (span.norm() / params.sweep_step).ceil() as usize;
        for i in 0..=steps {
            let f = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
            let mut pose = g_pre.clone();
            pose.translation += f * span;
            if let Some(label) = self.first_contact(&pose, gripper) {
                let stage = if i == 0 { CheckStage::PreGrasp } else { CheckStage::Insert };
                return Some(GraspCheck::fail(self.collision_mode(&label), stage, Some(label)));
            }
        }
        None
    }

    /// Enough target surface between the fingers, nothing else, and an
    /// antipodal contact pair.
    pub fn closure_holds(&self, g_star: &Pose, gripper: &GripperModel) -> bool {
        let region = gripper.closing_region();
        let mut normals = Vec::new();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let target = &self.solids[self.target].samples;
        for (p, n) in target.points.iter().zip(target.normals.as_deref().unwrap_or_default()) {
            let q = g_star.inverse_transform_point(p);
            if region.contains_closed(&q) {
                normals.push(*n);
                lo = lo.min(q.y);
                hi = hi.max(q.y);
            }
        }
        if normals.len() < MIN_CLOSURE_POINTS || hi - lo > gripper.max_aperture {
            return false;
        }
        let intruder = self.solids.iter().enumerate().any(|(i, s)| {
            i != self.target
                && self.near(s, g_star, gripper)
                && s
                    .samples
                    .points
                    .iter()
                    .any(|p| region.contains_closed(&g_star.inverse_transform_point(p)))
        });
        !intruder && antipodal_pair(normals.iter(), &g_star.y_axis(), self.cos_gamma)
    }

    /// Raises gripper and target together by `lift_height`.
    pub fn check_lift(&self, g_star: &Pose, gripper: &GripperModel, params: &ExecParams) -> Option<GraspCheck> {
        let steps = (params.lift_height / params.sweep_step).ceil().max(1.0) as usize;
        let target = &self.solids[self.target].samples;
        for i in 1..=steps {
            let dz = Vec3::new(0.0, 0.0, (i as f64 * params.sweep_step).min(params.lift_height));
            let mut pose = g_star.clone();
            pose.translation += dz;
            for (k, s) in self.solids.iter().enumerate() {
                if k == self.target {
                    continue;
                }
                let carried = target.points.iter().any(|p| {
                    let w = p + dz;
                    (w - s.center).norm() < s.radius && s.body.shape.contains(&s.body.pose.inverse_transform_point(&w))
                });
                if carried || self.hits_solid(s, &pose, gripper) {
                    return Some(GraspCheck::fail(
                        FailureMode::Fm3ApproachCollisionClutter,
                        CheckStage::Lift,
                        Some(s.body.label.clone()),
                    ));
                }
            }
        }
        None
    }
}

/// One-shot adjudication of a grasp on `target`.
pub fn check_grasp_success(
    scene: &Scene,
    target: &str,
    g_pre: &Pose,
    g_star: &GraspCandidate,
    gripper: &GripperModel,
    params: &ExecParams,
) -> Result<GraspCheck> {
    Ok(Adjudicator::new(scene, target)?.check(g_pre, g_star, gripper, params))
}
