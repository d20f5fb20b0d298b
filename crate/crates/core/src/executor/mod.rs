//! Pick state machine: perception, geometry, planning, optional base
//! repositioning, pre-grasp, insertion, closure, lift and verification.

mod episode;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::grasp::GraspCandidate;

pub use episode::{run_episode, Episode, EpisodeArtifacts, Frame, GraspSummary, Mode, TrialResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureMode {
    #[serde(rename = "FM1_Reachability")]
    Fm1Reachability,
    #[serde(rename = "FM2_ApproachCollisionTarget")]
    Fm2ApproachCollisionTarget,
    #[serde(rename = "FM3_ApproachCollisionClutter")]
    Fm3ApproachCollisionClutter,
    PerceptionFailure,
}

impl FailureMode {
    pub fn code(self) -> &'static str {
        match self {
            FailureMode::Fm1Reachability => "FM-1",
            FailureMode::Fm2ApproachCollisionTarget => "FM-2",
            FailureMode::Fm3ApproachCollisionClutter => "FM-3",
            FailureMode::PerceptionFailure => "PERCEPTION",
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FsmState {
    Idle,
    Perceive,
    EstimateGeometry,
    PlanGrasp,
    RepositionBase,
    PreGrasp,
    Insert,
    Close,
    Lift,
    Verify,
    Done,
    Failed(FailureMode),
}

impl FsmState {
    pub fn is_terminal(self) -> bool {
        matches!(self, FsmState::Done | FsmState::Failed(_))
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FsmState::Failed(m) => write!(f, "Failed({m})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// What a collision hit, by ground-truth label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Collider {
    Target,
    Clutter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    Start,
    MaskReady,
    MaskFailed,
    GeometryReady,
    GraspSelected { reposition: bool },
    NoFeasibleGrasp,
    OutOfReach,
    BaseArrived,
    ReachedPreGrasp,
    CollisionDetected(Collider),
    InsertionComplete,
    GripperClosed,
    LiftComplete,
    VerifyPassed,
    VerifySlipped,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::GraspSelected { reposition } => write!(f, "GraspSelected(reposition={reposition})"),
            Event::CollisionDetected(c) => write!(f, "CollisionDetected({c:?})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Transition table. Undefined pairs are protocol errors.
pub fn step_fsm(state: FsmState, event: Event) -> Result<FsmState> {
    use Event as E;
    use FsmState as S;
    let next = match (state, event) {
        (S::Idle, E::Start) => S::Perceive,
        (S::Perceive, E::MaskReady) => S::EstimateGeometry,
        (S::Perceive, E::MaskFailed) => S::Perceive,
        (S::EstimateGeometry, E::GeometryReady) => S::PlanGrasp,
        (S::PlanGrasp, E::GraspSelected { reposition: true }) => S::RepositionBase,
        (S::PlanGrasp, E::GraspSelected { reposition: false }) => S::PreGrasp,
        (S::PlanGrasp, E::NoFeasibleGrasp) => S::Failed(FailureMode::Fm1Reachability),
        (S::RepositionBase, E::BaseArrived) => S::PreGrasp,
        (S::PreGrasp, E::OutOfReach) => S::Failed(FailureMode::Fm1Reachability),
        (S::PreGrasp, E::ReachedPreGrasp) => S::Insert,
        (S::Insert, E::InsertionComplete) => S::Close,
        (S::Close, E::GripperClosed) => S::Lift,
        (S::Lift, E::LiftComplete) => S::Verify,
        (S::Verify, E::VerifyPassed) => S::Done,
        (S::Verify, E::VerifySlipped) => S::Failed(FailureMode::Fm2ApproachCollisionTarget),
        (S::RepositionBase | S::PreGrasp | S::Insert | S::Close | S::Lift, E::CollisionDetected(who)) => {
            S::Failed(match who {
                Collider::Target => FailureMode::Fm2ApproachCollisionTarget,
                Collider::Clutter => FailureMode::Fm3ApproachCollisionClutter,
            })
        }
        _ => {
            return Err(Error::Protocol {
                state: state.to_string(),
                event: event.to_string(),
            })
        }
    };
    Ok(next)
}

/// One recorded transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: FsmState,
    pub event: Event,
    pub to: FsmState,
}

/// State machine with a bounded perception retry counter and a trace.
#[derive(Clone, Debug)]
pub struct Fsm {
    state: FsmState,
    retries: usize,
    max_retries: usize,
    trace: Vec<Transition>,
}

impl Fsm {
    pub fn new(max_retries: usize) -> Self {
        Fsm {
            state: FsmState::Idle,
            retries: 0,
            max_retries,
            trace: Vec::new(),
        }
    }

    pub fn state(&self) -> FsmState {
        self.state
    }

    pub fn trace(&self) -> &[Transition] {
        &self.trace
    }

    /// Applies `event`; a mask failure past the retry bound ends the episode
    /// with a perception failure.
    pub fn fire(&mut self, event: Event) -> Result<FsmState> {
        let mut next = step_fsm(self.state, event)?;
        if self.state == FsmState::Perceive && event == Event::MaskFailed {
            self.retries += 1;
            if self.retries > self.max_retries {
                next = FsmState::Failed(FailureMode::PerceptionFailure);
            }
        }
        self.trace.push(Transition {
            from: self.state,
            event,
            to: next,
        });
        self.state = next;
        Ok(next)
    }

    /// States visited, starting with `Idle`.
    pub fn states(&self) -> Vec<FsmState> {
        std::iter::once(FsmState::Idle)
            .chain(self.trace.iter().map(|t| t.to))
            .collect()
    }

    /// One `from --event--> to` line per transition.
    pub fn log(&self) -> String {
        self.trace
            .iter()
            .map(|t| format!("{} --{}--> {}\n", t.from, t.event, t.to))
            .collect()
    }
}

/// Execution geometry in metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecParams {
    pub delta: f64,
    pub insertion_length: f64,
    pub standoff: f64,
    pub lift_height: f64,
    pub sweep_step: f64,
}

impl Default for ExecParams {
    fn default() -> Self {
        ExecParams {
            delta: 0.05,
            insertion_length: 0.05,
            standoff: 0.65,
            lift_height: 0.10,
            sweep_step: 0.005,
        }
    }
}

impl ExecParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.delta, self.insertion_length, self.standoff, self.lift_height, self.sweep_step];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("execution parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Pre-grasp pose: `g_star` backed off by `delta` along its own approach axis.
pub fn pre_grasp(g_star: &Pose, delta: f64) -> Result<Pose> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("pre-grasp offset must be non-negative, got {delta}")));
    }
    Ok(g_star.compose(&Pose::from_translation(Vec3::new(-delta, 0.0, 0.0))))
}

/// Straight insertion of `length` along the local approach axis.
pub fn insert(g_pre: &Pose, length: f64) -> Pose {
    g_pre.compose(&Pose::from_translation(Vec3::new(length, 0.0, 0.0)))
}

/// Approach directions closer than this to vertical fall back to the
/// base-to-target heading.
const VERTICAL_FALLBACK_DEG: f64 = 5.0;

/// Base waypoint that brings an out-of-reach grasp within reach: `standoff`
/// back from the grasp along the horizontal approach direction, facing the
/// grasp, at the current base height.
pub fn plan_base_waypoint(
    g_star: &GraspCandidate,
    base: &Pose,
    params: &ExecParams,
    r_max: f64,
) -> Result<Option<Pose>> {
    params.validate()?;
    if params.standoff > r_max {
        return Err(Error::Config(format!(
            "standoff {} exceeds the reach radius {r_max}",
            params.standoff
        )));
    }
    let p = g_star.position();
    if (p - base.translation).norm() <= r_max {
        return Ok(None);
    }
    let x = g_star.approach();
    let horizontal = Vec3::new(x.x, x.y, 0.0);
    let heading = if horizontal.norm() > VERTICAL_FALLBACK_DEG.to_radians().sin() {
        horizontal.normalize()
    } else {
        let to_target = p - base.translation;
        Vec3::new(to_target.x, to_target.y, 0.0)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateGeometry("grasp is directly above the base".into()))?
    };
    let position = Vec3::new(p.x - params.standoff * heading.x, p.y - params.standoff * heading.y, base.translation.z);
    let yaw = heading.y.atan2(heading.x);
    Ok(Some(
        Pose::new(Rotation::from_axis_angle(&Vec3::z_axis(), yaw), position).in_frame(base.frame.clone()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn candidate(rotation: Rotation, p: Vec3) -> GraspCandidate {
        GraspCandidate {
            pose: Pose::new(rotation, p),
            width: 0.05,
            seed_index: 0,
        }
    }

    #[test]
    fn pre_grasp_examples() {
        let g = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(pre_grasp(&g, 0.0).unwrap(), g);
        let pre = pre_grasp(&g, 0.05).unwrap();
        assert_relative_eq!(pre.translation, Vec3::new(0.95, 0.0, 0.0), epsilon = 1e-15);
        let down = Pose::rotation_from_axes(-Vec3::z(), Vec3::y(), Vec3::x()).unwrap();
        let top = Pose::new(down, Vec3::new(0.0, 0.0, 0.5));
        let pre = pre_grasp(&top, 0.05).unwrap();
        assert_relative_eq!(pre.translation, Vec3::new(0.0, 0.0, 0.55), epsilon = 1e-15);
        assert_eq!(pre.rotation, top.rotation);
        assert!(pre_grasp(&g, -0.01).is_err());
    }

    #[test]
    fn waypoint_examples() {
        let base = Pose::identity();
        let p = ExecParams::default();
        let near = candidate(Rotation::identity(), Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(plan_base_waypoint(&near, &base, &p, 0.9).unwrap(), None);

        let far = candidate(Rotation::identity(), Vec3::new(2.0, 0.0, 0.7));
        let w = plan_base_waypoint(&far, &base, &p, 0.9).unwrap().unwrap();
        assert_relative_eq!(w.translation, Vec3::new(1.35, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(w.x_axis(), Vec3::x(), epsilon = 1e-12);

        let down = Pose::rotation_from_axes(-Vec3::z(), Vec3::y(), Vec3::x()).unwrap();
        let top = candidate(down, Vec3::new(2.0, 0.0, 0.7));
        let w = plan_base_waypoint(&top, &base, &p, 0.9).unwrap().unwrap();
        assert_relative_eq!(w.translation, Vec3::new(1.35, 0.0, 0.0), epsilon = 1e-12);

        let wide = ExecParams {
            standoff: 1.0,
            ..ExecParams::default()
        };
        assert!(matches!(plan_base_waypoint(&far, &base, &wide, 0.9), Err(Error::Config(_))));
    }

    #[test]
    fn fsm_examples() {
        assert_eq!(step_fsm(FsmState::PreGrasp, Event::ReachedPreGrasp).unwrap(), FsmState::Insert);
        assert_eq!(
            step_fsm(FsmState::Insert, Event::CollisionDetected(Collider::Clutter)).unwrap(),
            FsmState::Failed(FailureMode::Fm3ApproachCollisionClutter)
        );
        assert_eq!(
            step_fsm(FsmState::Lift, Event::CollisionDetected(Collider::Target)).unwrap(),
            FsmState::Failed(FailureMode::Fm2ApproachCollisionTarget)
        );
        assert!(matches!(step_fsm(FsmState::Done, Event::Start), Err(Error::Protocol { .. })));
        assert!(step_fsm(FsmState::Failed(FailureMode::Fm1Reachability), Event::VerifyPassed).is_err());
        assert!(step_fsm(FsmState::Idle, Event::CollisionDetected(Collider::Target)).is_err());
    }

    #[test]
    fn perception_retries_are_bounded() {
        let mut fsm = Fsm::new(3);
        fsm.fire(Event::Start).unwrap();
        for _ in 0..3 {
            assert_eq!(fsm.fire(Event::MaskFailed).unwrap(), FsmState::Perceive);
        }
        assert_eq!(
            fsm.fire(Event::MaskFailed).unwrap(),
            FsmState::Failed(FailureMode::PerceptionFailure)
        );
        assert!(fsm.fire(Event::MaskReady).is_err());
        assert!(fsm.log().lines().count() == 5);
    }

    proptest! {
        #[test]
        fn insertion_undoes_pre_grasp(
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64, angle in 0.0..6.28f64,
            px in -2.0..2.0f64, py in -2.0..2.0f64, pz in -2.0..2.0f64,
        ) {
            let axis = nalgebra::Unit::new_normalize(Vec3::new(ax, ay, az + 1e-3));
            let g = Pose::new(Rotation::from_axis_angle(&axis, angle), Vec3::new(px, py, pz));
            let p = ExecParams::default();
            let back = insert(&pre_grasp(&g, p.delta).unwrap(), p.insertion_length);
            prop_assert!((back.translation - g.translation).norm() < 1e-12);
        }

        #[test]
        fn waypoints_put_the_grasp_at_standoff(
            px in -3.0..3.0f64, py in -3.0..3.0f64, pz in 0.3..0.8f64,
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64,
        ) {
            let x = Vec3::new(ax, ay, az);
            prop_assume!(x.norm() > 0.1);
            let x = x.normalize();
            let helper = if x.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
            let y = x.cross(&helper).normalize();
            let rot = Pose::rotation_from_axes(x, y, x.cross(&y)).unwrap();
            let g = candidate(rot, Vec3::new(px, py, pz));
            let base = Pose::from_translation(Vec3::new(0.0, 0.0, 0.5));
            let p = ExecParams::default();
            if let Some(w) = plan_base_waypoint(&g, &base, &p, 0.9).unwrap() {
                let d = g.position() - w.translation;
                prop_assert!((d.x.hypot(d.y) - p.standoff).abs() < 1e-9);
                // Within the shoulder-height band the 3-D reach holds too.
                if d.z.abs() <= (0.9f64.powi(2) - p.standoff.powi(2)).sqrt() {
                    prop_assert!(d.norm() <= 0.9 + 1e-12);
                }
                w.validate().unwrap();
            }
        }
    }
}
