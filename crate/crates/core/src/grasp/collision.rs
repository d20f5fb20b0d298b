use rayon::prelude::*;

use super::{GraspCandidate, GripperModel};
use crate::geometry::{KdIndex, PointCloud, Pose, Vec3};

/// True when any of `points` lies strictly inside a finger or the palm of a
/// gripper at `pose`.
pub fn gripper_collides<'a>(pose: &Pose, gripper: &GripperModel, points: impl IntoIterator<Item = &'a Vec3>) -> bool {
    let bodies = gripper.collision_boxes();
    points.into_iter().any(|p| {
        let q = pose.inverse_transform_point(p);
        bodies.iter().any(|b| b.contains_strict(&q))
    })
}

/// Per-candidate collision flags against scene points within
/// `neighborhood` of `target_centroid`, in input order.
pub fn collision_mask(
    candidates: &[GraspCandidate],
    scene: &PointCloud,
    target_centroid: Vec3,
    gripper: &GripperModel,
    neighborhood: f64,
) -> Vec<bool> {
    padded_collision_mask(candidates, scene, target_centroid, gripper, neighborhood, 0.0)
}

/// [`collision_mask`] with every collision body grown by `margin`
/// (see [`GripperModel::padded_boxes`]).
pub fn padded_collision_mask(
    candidates: &[GraspCandidate],
    scene: &PointCloud,
    target_centroid: Vec3,
    gripper: &GripperModel,
    neighborhood: f64,
    margin: f64,
) -> Vec<bool> {
    let local: Vec<Vec3> = scene
        .points
        .iter()
        .filter(|p| (*p - target_centroid).norm() <= neighborhood)
        .copied()
        .collect();
    if local.is_empty() {
        return vec![false; candidates.len()];
    }
    let index = KdIndex::from_points(local);
    let bodies = gripper.padded_boxes(margin);
    let (center, radius) = gripper.bounding_sphere();
    let radius = radius + margin * 3f64.sqrt();
    candidates
        .par_iter()
        .map(|c| {
            index
                .within_radius(&c.pose.transform_point(&center), radius)
                .iter()
                .any(|&i| {
                    let q = c.pose.inverse_transform_point(&index.points()[i]);
                    bodies.iter().any(|b| b.contains_strict(&q))
                })
        })
        .collect()
}

/// Candidates whose gripper bodies are free of nearby scene points.
pub fn collision_filter(
    candidates: &[GraspCandidate],
    scene: &PointCloud,
    target_centroid: Vec3,
    gripper: &GripperModel,
    neighborhood: f64,
) -> Vec<GraspCandidate> {
    let mask = collision_mask(candidates, scene, target_centroid, gripper, neighborhood);
    candidates
        .iter()
        .zip(mask)
        .filter(|(_, hit)| !hit)
        .map(|(c, _)| c.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameId;
    use nalgebra::Unit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_candidate(rng: &mut ChaCha8Rng) -> GraspCandidate {
        let axis = Unit::new_normalize(Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        let rotation = crate::geometry::Rotation::from_axis_angle(&axis, rng.random_range(0.0..6.3));
        let t = Vec3::new(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        );
        GraspCandidate {
            pose: Pose::new(rotation, t),
            width: 0.05,
            seed_index: 0,
        }
    }

    #[test]
    fn empty_scene_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cands: Vec<_> = (0..10).map(|_| random_candidate(&mut rng)).collect();
        let kept = collision_filter(&cands, &PointCloud::default(), Vec3::zeros(), &GripperModel::default(), 0.5);
        assert_eq!(kept, cands);
    }

    #[test]
    fn finger_center_point_rejects_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cands: Vec<_> = (0..5).map(|_| random_candidate(&mut rng)).collect();
        let g = GripperModel::default();
        let finger = cands[0].pose.transform_point(&g.collision_boxes()[0].center());
        let scene = PointCloud::new(vec![finger], FrameId::world());
        let mask = collision_mask(&cands, &scene, Vec3::zeros(), &g, 0.5);
        assert!(mask[0]);
    }

    #[test]
    fn closing_region_is_not_a_collision_body() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_candidate(&mut rng);
        let g = GripperModel::default();
        let p = c.pose.transform_point(&Vec3::zeros());
        let scene = PointCloud::new(vec![p], FrameId::world());
        assert_eq!(collision_mask(&[c], &scene, Vec3::zeros(), &g, 0.5), vec![false]);
    }

    #[test]
    fn points_beyond_neighborhood_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_candidate(&mut rng);
        let g = GripperModel::default();
        let palm = c.pose.transform_point(&g.collision_boxes()[2].center());
        let scene = PointCloud::new(vec![palm], FrameId::world());
        let far = palm + Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(collision_mask(&[c.clone()], &scene, far, &g, 0.5), vec![false]);
        assert_eq!(collision_mask(&[c], &scene, palm, &g, 0.5), vec![true]);
    }

    #[test]
    fn padding_catches_near_misses_but_not_the_closing_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_candidate(&mut rng);
        let g = GripperModel::default();
        let palm = g.collision_boxes()[2];
        let behind = Vec3::new(palm.min.x - 0.003, 0.0, 0.0);
        let inside_jaw = Vec3::new(0.0, g.max_aperture / 2.0 - 0.001, 0.0);
        for (q, padded_hit) in [(behind, true), (inside_jaw, false)] {
            let scene = PointCloud::new(vec![c.pose.transform_point(&q)], FrameId::world());
            let centroid = scene.points[0];
            assert!(!collision_mask(std::slice::from_ref(&c), &scene, centroid, &g, 0.5)[0]);
            let hit = padded_collision_mask(std::slice::from_ref(&c), &scene, centroid, &g, 0.5, 0.005)[0];
            assert_eq!(hit, padded_hit);
        }
    }

    #[test]
    fn zero_padding_matches_the_bare_bodies() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cands: Vec<_> = (0..40).map(|_| random_candidate(&mut rng)).collect();
        let pts: Vec<Vec3> = (0..2000)
            .map(|_| Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)))
            .collect();
        let scene = PointCloud::new(pts, FrameId::world());
        let g = GripperModel::default();
        assert_eq!(
            padded_collision_mask(&cands, &scene, Vec3::zeros(), &g, 0.5, 0.0),
            collision_mask(&cands, &scene, Vec3::zeros(), &g, 0.5)
        );
    }
}
