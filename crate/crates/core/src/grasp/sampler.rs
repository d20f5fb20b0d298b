use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GraspCandidate, GripperModel, LocalBox};
use crate::error::{Error, Result};
use crate::geometry::{KdIndex, PointCloud, Pose, Vec3};
use crate::seed::rng;

/// Antipodal sampler settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerParams {
    /// Closing directions tried per seed, evenly spaced over half a turn.
    pub rotations: usize,
    pub friction_half_angle_deg: f64,
    pub min_points: usize,
    /// Seeds tried per requested candidate before giving up.
    pub seed_budget_factor: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            rotations: 8,
            friction_half_angle_deg: 20.0,
            min_points: 5,
            seed_budget_factor: 20,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.rotations == 0 || self.seed_budget_factor == 0 {
            return Err(Error::Config("sampler rotations and seed budget must be at least 1".into()));
        }
        if !(0.0..90.0).contains(&self.friction_half_angle_deg) {
            return Err(Error::Config("friction half-angle must lie in [0, 90) degrees".into()));
        }
        Ok(())
    }

    fn cos_gamma(&self) -> f64 {
        self.friction_half_angle_deg.to_radians().cos()
    }
}

/// Seeds evaluated together before checking whether enough candidates exist.
const SEED_CHUNK: usize = 64;
/// Added to every retraction so boundary points land cleanly outside.
const RETRACT_EPS: f64 = 1e-9;

/// Seeded antipodal sampling over `object`, returning at most `n`
/// candidates in seed order.
pub fn sample_candidates(
    object: &PointCloud,
    gripper: &GripperModel,
    params: &SamplerParams,
    n: usize,
    seed: u64,
) -> Result<Vec<GraspCandidate>> {
    params.validate()?;
    gripper.validate()?;
    if object.is_empty() {
        return Err(Error::Input("grasp sampling needs a non-empty cloud".into()));
    }
    let Some(normals) = object.normals.as_deref() else {
        return Err(Error::Input("grasp sampling needs surface normals".into()));
    };
    if n == 0 {
        return Err(Error::Parameter("candidate count must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..object.len()).collect();
    order.shuffle(&mut rng(seed));
    order.truncate(params.seed_budget_factor.saturating_mul(n).min(object.len()));

    let index = KdIndex::build(object);
    let reach = neighbor_radius(gripper);
    let mut out = Vec::with_capacity(n);
    for chunk in order.chunks(SEED_CHUNK) {
        let found: Vec<Vec<GraspCandidate>> = chunk
            .par_iter()
            .map(|&s| candidates_at_seed(object, normals, &index, gripper, params, s, reach))
            .collect();
        for c in found.into_iter().flatten() {
            if out.len() == n {
                break;
            }
            out.push(c);
        }
        if out.len() == n {
            break;
        }
    }
    log::debug!("sampled {} of {} requested grasp candidates", out.len(), n);
    Ok(out)
}

/// Distance from a seed to the farthest gripper point over every retraction
/// the sampler considers.
fn neighbor_radius(g: &GripperModel) -> f64 {
    let hull = g.hull();
    let dx = g.finger_length + g.palm_depth;
    let dy = hull.max.y.max(-hull.min.y);
    let dz = hull.max.z.max(-hull.min.z);
    (dx * dx + dy * dy + dz * dz).sqrt() + 1e-6
}

fn tangent_basis(approach: &Vec3) -> (Vec3, Vec3) {
    let t1 = approach
        .cross(&Vec3::z())
        .try_normalize(1e-6)
        .unwrap_or_else(|| approach.cross(&Vec3::x()).normalize());
    let t2 = approach.cross(&t1);
    (t1, t2)
}

fn candidates_at_seed(
    object: &PointCloud,
    normals: &[Vec3],
    index: &KdIndex,
    gripper: &GripperModel,
    params: &SamplerParams,
    s: usize,
    reach: f64,
) -> Vec<GraspCandidate> {
    let seed_pt = object.points[s];
    let approach = -normals[s];
    let (t1, t2) = tangent_basis(&approach);
    let neighbors = index.within_radius(&seed_pt, reach);
    let half_l = gripper.finger_length / 2.0;
    let bodies = gripper.collision_boxes();
    let mut out = Vec::new();
    for k in 0..params.rotations {
        let a = k as f64 * PI / params.rotations as f64;
        let closing = a.cos() * t1 + a.sin() * t2;
        let Ok(rotation) = Pose::rotation_from_axes(approach, closing, approach.cross(&closing)) else {
            continue;
        };
        // Seed on the palm-side face of the closing region, then back off.
        let start = seed_pt + half_l * approach;
        let local: Vec<Vec3> = neighbors
            .iter()
            .map(|&i| rotation.inverse_transform_vector(&(object.points[i] - start)))
            .collect();
        let retreat = min_retraction(&local, &bodies);
        if retreat > gripper.finger_length {
            continue;
        }
        let pose = Pose::new(rotation, start - retreat * approach).in_frame(object.frame.clone());
        if let Some(width) = closing_width(object, normals, &neighbors, &pose, gripper, params) {
            out.push(GraspCandidate {
                pose,
                width,
                seed_index: s,
            });
        }
    }
    out
}

/// Smallest backward shift along the approach axis that leaves every
/// neighbor outside every collision body.
fn min_retraction(local: &[Vec3], bodies: &[LocalBox; 3]) -> f64 {
    let mut forbidden: Vec<(f64, f64)> = Vec::new();
    for q in local {
        for b in bodies {
            if b.min.y < q.y && q.y < b.max.y && b.min.z < q.z && q.z < b.max.z {
                forbidden.push((b.min.x - q.x, b.max.x - q.x));
            }
        }
    }
    forbidden.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s = 0.0;
    for (lo, hi) in forbidden {
        if lo < s && s < hi {
            s = hi + RETRACT_EPS;
        }
    }
    s
}

/// Closing-axis extent of the contained points if the pose is an
/// acceptable antipodal grasp with point-free bodies.
fn closing_width(
    object: &PointCloud,
    normals: &[Vec3],
    neighbors: &[usize],
    pose: &Pose,
    gripper: &GripperModel,
    params: &SamplerParams,
) -> Option<f64> {
    let region = gripper.closing_region();
    let bodies = gripper.collision_boxes();
    let mut inside = Vec::new();
    for &i in neighbors {
        let q = pose.inverse_transform_point(&object.points[i]);
        if bodies.iter().any(|b| b.contains_strict(&q)) {
            return None;
        }
        if region.contains_closed(&q) {
            inside.push((q.y, normals[i]));
        }
    }
    if inside.len() < params.min_points {
        return None;
    }
    let closing = pose.y_axis();
    if !antipodal_pair(inside.iter().map(|(_, n)| n), &closing, params.cos_gamma()) {
        return None;
    }
    let lo = inside.iter().map(|(y, _)| *y).fold(f64::INFINITY, f64::min);
    let hi = inside.iter().map(|(y, _)| *y).fold(f64::NEG_INFINITY, f64::max);
    Some(hi - lo)
}

/// True when one normal lies within the friction cone of `+closing` and
/// another within that of `-closing`.
pub fn antipodal_pair<'a>(normals: impl IntoIterator<Item = &'a Vec3>, closing: &Vec3, cos_gamma: f64) -> bool {
    let (mut plus, mut minus) = (false, false);
    for n in normals {
        let d = n.dot(closing);
        plus |= d >= cos_gamma;
        minus |= d <= -cos_gamma;
        if plus && minus {
            return true;
        }
    }
    false
}

/// Brute-force check of one candidate against every point of `object`.
pub fn verify_candidate(
    candidate: &GraspCandidate,
    object: &PointCloud,
    gripper: &GripperModel,
    params: &SamplerParams,
) -> bool {
    let Some(normals) = object.normals.as_deref() else {
        return false;
    };
    let all: Vec<usize> = (0..object.len()).collect();
    match closing_width(object, normals, &all, &candidate.pose, gripper, params) {
        Some(w) => w <= gripper.max_aperture && (w - candidate.width).abs() <= 1e-12,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameId;
    use std::f64::consts::TAU;

    fn cylinder_shell(radius: f64, height: f64) -> PointCloud {
        let (mut pts, mut nrm) = (Vec::new(), Vec::new());
        for i in 0..120 {
            let a = TAU * i as f64 / 120.0;
            for j in 0..=40 {
                pts.push(Vec3::new(radius * a.cos(), radius * a.sin(), height * j as f64 / 40.0));
                nrm.push(Vec3::new(a.cos(), a.sin(), 0.0));
            }
        }
        PointCloud::with_normals(pts, nrm, FrameId::world()).unwrap()
    }

    fn sphere_shell(radius: f64, n: usize) -> PointCloud {
        let golden = PI * (3.0 - 5f64.sqrt());
        let (mut pts, mut nrm) = (Vec::new(), Vec::new());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            let u = Vec3::new(r * a.cos(), r * a.sin(), z);
            pts.push(radius * u);
            nrm.push(u);
        }
        PointCloud::with_normals(pts, nrm, FrameId::world()).unwrap()
    }

    #[test]
    fn cylinder_yields_verified_candidates() {
        let cloud = cylinder_shell(0.03, 0.15);
        let g = GripperModel::default();
        let p = SamplerParams::default();
        let cands = sample_candidates(&cloud, &g, &p, 1000, 7).unwrap();
        assert!(!cands.is_empty());
        for c in &cands {
            assert!(verify_candidate(c, &cloud, &g, &p));
            assert!(c.width <= g.max_aperture);
            c.pose.validate().unwrap();
        }
        assert_eq!(cands, sample_candidates(&cloud, &g, &p, 1000, 7).unwrap());
    }

    #[test]
    fn large_sphere_yields_nothing() {
        let cloud = sphere_shell(0.10, 6000);
        let cands = sample_candidates(&cloud, &GripperModel::default(), &SamplerParams::default(), 1000, 7).unwrap();
        assert!(cands.is_empty());
    }

    #[test]
    fn input_errors() {
        let g = GripperModel::default();
        let p = SamplerParams::default();
        assert!(matches!(
            sample_candidates(&PointCloud::default(), &g, &p, 10, 0),
            Err(Error::Input(_))
        ));
        let bare = PointCloud::new(vec![Vec3::zeros()], FrameId::world());
        assert!(matches!(sample_candidates(&bare, &g, &p, 10, 0), Err(Error::Input(_))));
    }

    #[test]
    fn retraction_clears_bodies() {
        let bodies = GripperModel::default().collision_boxes();
        let pts = vec![Vec3::new(0.0, 0.06, 0.0), Vec3::new(0.03, -0.06, 0.0)];
        let s = min_retraction(&pts, &bodies);
        // Both points sit in a finger; the one further back needs the
        // larger shift to clear the fingertip at x = 0.04.
        assert!((s - 0.04).abs() < 1e-6, "{s}");
        for q in &pts {
            let shifted = q + Vec3::new(s, 0.0, 0.0);
            assert!(bodies.iter().all(|b| !b.contains_strict(&shifted)));
        }
    }

    #[test]
    fn antipodal_needs_both_sides() {
        let y = Vec3::y();
        assert!(antipodal_pair([y, -y].iter(), &y, 0.9));
        assert!(!antipodal_pair([y, y].iter(), &y, 0.9));
        assert!(!antipodal_pair([Vec3::x(), -y].iter(), &y, 0.9));
    }
}
