use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{plan_base_waypoint, pre_grasp, Collider, Event, FailureMode, Fsm, FsmState};
use crate::completion::{
    complete_stage1, merge_mid, patch_decompose_or_fallback, refine_stage2_raw, CompletionContext,
};
use crate::config::PipelineConfig;
use crate::depth::{
    accumulate, backproject, compensate_depth, erode_mask, extract_masked, is_valid_depth, DepthImage, MaskImage,
};
use crate::error::{Error, Result};
use crate::geometry::{
    centroid, estimate_normals, estimate_normals_outward, voxel_downsample, PointCloud, Pose, Rotation, Vec3,
};
use crate::grasp::{
    collision_mask, padded_collision_mask, sample_candidates, score_all, select, GraspCandidate, GraspRecord, ScoreBreakdown,
};
use crate::seed::derive_seed;
use crate::sim::{camera_pose, render_depth, Adjudicator, CheckStage, ObjectOracle, Outcome, Scene};

const STREAM_PERCEPTION: u64 = 1;
const STREAM_COMPLETION: u64 = 2;
const STREAM_PATCHES: u64 = 3;
const STREAM_SAMPLER: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Multi-view accumulation, completion and base repositioning.
    Full,
    /// One raw frame from the initial stance, nothing else.
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Baseline => "baseline",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "baseline" => Ok(Mode::Baseline),
            other => Err(Error::Input(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspSummary {
    pub pose: Pose,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub scenario: String,
    pub run: usize,
    pub mode: Mode,
    pub target: String,
    pub success: bool,
    pub failure_mode: Option<FailureMode>,
    pub grasp: Option<GraspSummary>,
    pub breakdown: Option<ScoreBreakdown>,
    pub states: Vec<FsmState>,
    pub frames_used: usize,
    pub seed: u64,
    pub completion_calls: usize,
    pub scene_hash: String,
    pub initial_base: Pose,
    /// Body hit by the gripper, for collision failures.
    pub contact: Option<String>,
}

/// One rendered observation.
#[derive(Clone, Debug)]
pub struct Frame {
    pub depth: DepthImage,
    pub mask: MaskImage,
    pub camera: Pose,
}

/// Intermediate products of an episode, for export.
#[derive(Clone, Debug, Default)]
pub struct EpisodeArtifacts {
    pub frames: Vec<Frame>,
    pub partial: Option<PointCloud>,
    pub mid: Option<PointCloud>,
    pub complete: Option<PointCloud>,
    pub grasps: Vec<GraspRecord>,
    pub fsm_log: String,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub result: TrialResult,
    pub artifacts: EpisodeArtifacts,
}

struct Geometry {
    object: PointCloud,
    scene: PointCloud,
    completion_calls: usize,
}

/// Same stance rotated by `yaw` about the vertical line through `pivot`.
fn orbit(base: &Pose, pivot: Vec3, yaw: f64) -> Pose {
    let r = Rotation::from_axis_angle(&Vec3::z_axis(), yaw);
    let axis = Vec3::new(pivot.x, pivot.y, base.translation.z);
    Pose::new(r * base.rotation, axis + r * (base.translation - axis)).in_frame(base.frame.clone())
}

fn masked_valid(depth: &DepthImage, mask: &MaskImage) -> usize {
    depth
        .data
        .iter()
        .zip(&mask.data)
        .filter(|(d, m)| **m && is_valid_depth(**d))
        .count()
}

/// Drives one pick attempt on `target` from `initial_base` and adjudicates
/// it against the scene's ground truth.
pub fn run_episode(
    scene: &Scene,
    target: &str,
    config: &PipelineConfig,
    mode: Mode,
    seed: u64,
    initial_base: &Pose,
) -> Result<Episode> {
    config.validate()?;
    let target = scene.resolve_target(target)?.id.clone();
    let mut fsm = Fsm::new(config.perception.max_retries);
    let mut artifacts = EpisodeArtifacts::default();
    let mut result = TrialResult {
        scenario: target.clone(),
        run: 0,
        mode,
        target: target.clone(),
        success: false,
        failure_mode: None,
        grasp: None,
        breakdown: None,
        states: Vec::new(),
        frames_used: 0,
        seed,
        completion_calls: 0,
        scene_hash: scene.hash(),
        initial_base: initial_base.clone(),
        contact: None,
    };

    fsm.fire(Event::Start)?;
    let mut attempt = 0u64;
    let frames = loop {
        let frames = perceive(scene, &target, config, mode, seed, attempt, initial_base)?;
        let visible: usize = frames.iter().map(|f| masked_valid(&f.depth, &f.mask)).sum();
        if visible >= config.perception.min_mask_pixels {
            fsm.fire(Event::MaskReady)?;
            break Some(frames);
        }
        attempt += 1;
        if fsm.fire(Event::MaskFailed)?.is_terminal() {
            break None;
        }
    };
    let Some(frames) = frames else {
        return Ok(finish(result, fsm, artifacts));
    };
    result.frames_used = frames.len();

    let geometry = estimate_geometry(scene, &target, config, mode, seed, &frames, &mut artifacts)?;
    artifacts.frames = frames;
    result.completion_calls = geometry.completion_calls;
    fsm.fire(Event::GeometryReady)?;

    let object_centroid = centroid(&geometry.object)?;
    let mut base = initial_base.clone();
    let candidates = sample_candidates(
        &geometry.object,
        &config.gripper,
        &config.sampler,
        config.candidates,
        derive_seed(seed, STREAM_SAMPLER),
    )?;
    let hits = approach_collisions(&candidates, &geometry.scene, object_centroid, config)?;
    let feasible: Vec<GraspCandidate> = candidates
        .iter()
        .zip(&hits)
        .filter(|(_, hit)| !**hit)
        .map(|(c, _)| c.clone())
        .collect();
    let scores = score_all(&feasible, &config.weights, object_centroid, base.translation)?;
    let mut scored = scores.iter();
    artifacts.grasps = candidates
        .iter()
        .zip(&hits)
        .map(|(c, hit)| match hit {
            true => GraspRecord::new(c, None, Some("collision".into())),
            false => GraspRecord::new(c, scored.next().cloned(), None),
        })
        .collect();

    let (g_star, breakdown) = match select(&feasible, &config.weights, object_centroid, base.translation) {
        Ok((_, g, b)) => (g, b),
        Err(Error::NoFeasibleGrasp) => {
            fsm.fire(Event::NoFeasibleGrasp)?;
            return Ok(finish(result, fsm, artifacts));
        }
        Err(e) => return Err(e),
    };
    result.grasp = Some(GraspSummary {
        pose: g_star.pose.clone(),
        width: g_star.width,
    });
    let out_of_reach = breakdown.reach_dist > config.weights.r_max;
    result.breakdown = Some(breakdown);

    let waypoint = match (mode, out_of_reach) {
        (Mode::Full, true) => plan_base_waypoint(&g_star, &base, &config.exec, config.weights.r_max)?,
        _ => None,
    };
    fsm.fire(Event::GraspSelected {
        reposition: waypoint.is_some(),
    })?;
    if let Some(w) = waypoint {
        base = w;
        fsm.fire(Event::BaseArrived)?;
    }

    let g_pre = pre_grasp(&g_star.pose, config.exec.delta)?;
    let r_max = config.weights.r_max;
    let reach = |p: &Vec3| (p - base.translation).norm() <= r_max;
    if !(reach(&g_pre.translation) && reach(&g_star.pose.translation)) {
        fsm.fire(Event::OutOfReach)?;
        return Ok(finish(result, fsm, artifacts));
    }

    let check = Adjudicator::new(scene, &target)?.check(&g_pre, &g_star, &config.gripper, &config.exec);
    result.contact = check.contact.clone();
    let collider = match check.outcome {
        Outcome::Failure(FailureMode::Fm2ApproachCollisionTarget) => Collider::Target,
        _ => Collider::Clutter,
    };
    let script: &[Event] = match (check.stage, check.outcome) {
        (CheckStage::PreGrasp, _) => &[Event::CollisionDetected(collider)],
        (CheckStage::Insert, _) => &[Event::ReachedPreGrasp, Event::CollisionDetected(collider)],
        (CheckStage::Closure, _) => &[
            Event::ReachedPreGrasp,
            Event::InsertionComplete,
            Event::GripperClosed,
            Event::LiftComplete,
            Event::VerifySlipped,
        ],
        (CheckStage::Lift, _) => &[
            Event::ReachedPreGrasp,
            Event::InsertionComplete,
            Event::GripperClosed,
            Event::CollisionDetected(collider),
        ],
        (CheckStage::Passed, _) => &[
            Event::ReachedPreGrasp,
            Event::InsertionComplete,
            Event::GripperClosed,
            Event::LiftComplete,
            Event::VerifyPassed,
        ],
    };
    for e in script {
        fsm.fire(*e)?;
    }
    Ok(finish(result, fsm, artifacts))
}

/// Collision flags for each candidate at its grasp pose and at retreats of
/// `delta / 2` and `delta` along the approach. Retreat poses must also keep
/// `approach_clearance` from every scene point.
fn approach_collisions(
    candidates: &[GraspCandidate],
    scene: &PointCloud,
    centroid: Vec3,
    config: &PipelineConfig,
) -> Result<Vec<bool>> {
    let mut hits = collision_mask(candidates, scene, centroid, &config.gripper, config.collision_neighborhood);
    for retreat in [config.exec.delta / 2.0, config.exec.delta] {
        let shifted = candidates
            .iter()
            .map(|c| {
                Ok(GraspCandidate {
                    pose: pre_grasp(&c.pose, retreat)?,
                    ..c.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mask = padded_collision_mask(
            &shifted,
            scene,
            centroid,
            &config.gripper,
            config.collision_neighborhood,
            config.approach_clearance,
        );
        for (h, m) in hits.iter_mut().zip(mask) {
            *h |= m;
        }
    }
    Ok(hits)
}

fn finish(mut result: TrialResult, fsm: Fsm, mut artifacts: EpisodeArtifacts) -> Episode {
    result.states = fsm.states();
    match fsm.state() {
        FsmState::Done => result.success = true,
        FsmState::Failed(m) => result.failure_mode = Some(m),
        other => unreachable!("episode ended in non-terminal state {other}"),
    }
    artifacts.fsm_log = fsm.log();
    Episode { result, artifacts }
}

/// Renders the observation set for one perception attempt. Full mode orbits
/// the initial stance about the first view's target estimate.
fn perceive(
    scene: &Scene,
    target: &str,
    config: &PipelineConfig,
    mode: Mode,
    seed: u64,
    attempt: u64,
    initial_base: &Pose,
) -> Result<Vec<Frame>> {
    let intr = &config.intrinsics;
    let p = &config.perception;
    let stream = derive_seed(derive_seed(seed, STREAM_PERCEPTION), attempt);
    let shoot = |base: &Pose, view: u64| -> Result<Frame> {
        let camera = camera_pose(base);
        let noise = config.noise.with_seed(derive_seed(stream, view) ^ config.noise.seed);
        let r = render_depth(scene, &camera, intr, Some(&noise))?;
        let truth = r
            .mask(target)
            .ok_or_else(|| Error::Input(format!("no object `{target}` in scene")))?;
        let mask = erode_mask(truth, p.erode_kernel, p.erode_iterations)?;
        Ok(Frame {
            depth: r.depth,
            mask,
            camera,
        })
    };
    let first = shoot(initial_base, 0)?;
    let mut frames = vec![first];
    if mode == Mode::Full {
        let seen = extract_masked(&frames[0].depth, &frames[0].mask, intr, &frames[0].camera)?;
        if let Ok(pivot) = centroid(&seen) {
            for (k, yaw) in config.viewpoints.offsets().into_iter().enumerate().skip(1) {
                frames.push(shoot(&orbit(initial_base, pivot, yaw), k as u64)?);
            }
        }
    }
    Ok(frames)
}

fn estimate_geometry(
    scene: &Scene,
    target: &str,
    config: &PipelineConfig,
    mode: Mode,
    seed: u64,
    frames: &[Frame],
    artifacts: &mut EpisodeArtifacts,
) -> Result<Geometry> {
    let intr = &config.intrinsics;
    let k = config.normals_k;
    match mode {
        Mode::Baseline => {
            let f = &frames[0];
            let raw = extract_masked(&f.depth, &f.mask, intr, &f.camera)?;
            let object = voxel_downsample(&estimate_normals(&raw, k, f.camera.translation)?, config.voxel)?;
            let scene_cloud = voxel_downsample(&backproject(&f.depth, intr, &f.camera)?, config.voxel)?;
            artifacts.partial = Some(object.clone());
            Ok(Geometry {
                object,
                scene: scene_cloud,
                completion_calls: 0,
            })
        }
        Mode::Full => {
            let triples: Vec<(DepthImage, MaskImage, Pose)> = frames
                .iter()
                .map(|f| (f.depth.clone(), f.mask.clone(), f.camera.clone()))
                .collect();
            let partial = accumulate(&triples, intr, &config.compensation, config.voxel)?;
            let oracle = ObjectOracle::new(scene, target)?;
            let view_origin =
                frames.iter().map(|f| f.camera.translation).sum::<Vec3>() / frames.len() as f64;
            let ctx = CompletionContext {
                view_origin: Some(view_origin),
                oracle: Some(&oracle),
            };
            let synthetic = complete_stage1(&partial, &config.completer, &ctx, derive_seed(seed, STREAM_COMPLETION))?;
            let mid = merge_mid(&partial, &synthetic)?;
            let patch_seed = derive_seed(seed, STREAM_PATCHES);
            let patches = patch_decompose_or_fallback(&mid, config.patch.size, patch_seed)?;
            let dense = refine_stage2_raw(&patches, &config.completer, &ctx, config.patch.refine_budget, patch_seed)?;
            // Normals come from the dense cloud; voxel averaging keeps them sharp.
            let c = centroid(&dense)?;
            let oriented = estimate_normals_outward(&dense, k, c)?;
            let object = voxel_downsample(&oriented, config.voxel)?;

            let mut everything = PointCloud::empty(partial.frame.clone());
            for f in frames {
                everything.extend_from(&backproject(&compensate_depth(&f.depth, &config.compensation)?, intr, &f.camera)?);
            }
            everything.extend_from(&object.clone().without_normals());
            let scene_cloud = voxel_downsample(&everything, config.voxel)?;

            let calls = 1 + patches.len();
            artifacts.partial = Some(partial);
            artifacts.mid = Some(mid);
            artifacts.complete = Some(object.clone());
            Ok(Geometry {
                object,
                scene: scene_cloud,
                completion_calls: calls,
            })
        }
    }
}
