use super::{compensate_depth, is_valid_depth, CameraIntrinsics, CompensationParams, DepthImage, MaskImage};
use crate::error::{Error, Result};
use crate::geometry::{voxel_downsample, PointCloud, Pose, Vec3};

fn check_dims(depth: &DepthImage, intr: &CameraIntrinsics) -> Result<()> {
    if depth.width != intr.width || depth.height != intr.height {
        return Err(Error::Shape(format!(
            "depth is {}×{}, intrinsics expect {}×{}",
            depth.width, depth.height, intr.width, intr.height
        )));
    }
    Ok(())
}

#[inline]
fn pixel_ray_point(intr: &CameraIntrinsics, u: usize, v: usize, d: f64) -> Vec3 {
    Vec3::new(
        (u as f64 - intr.cx) * d / intr.fx,
        (v as f64 - intr.cy) * d / intr.fy,
        d,
    )
}

fn backproject_where<F: Fn(usize) -> bool>(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    cam_pose: &Pose,
    keep: F,
) -> PointCloud {
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let idx = v * depth.width + u;
            let d = depth.data[idx];
            if is_valid_depth(d) && keep(idx) {
                points.push(cam_pose.transform_point(&pixel_ray_point(intr, u, v, d)));
            }
        }
    }
    PointCloud::new(points, cam_pose.frame.clone())
}

/// Lifts every valid pixel through the pinhole model and maps it into the
/// frame of `cam_pose` (camera x right, y down, z forward).
pub fn backproject(depth: &DepthImage, intr: &CameraIntrinsics, cam_pose: &Pose) -> Result<PointCloud> {
    check_dims(depth, intr)?;
    Ok(backproject_where(depth, intr, cam_pose, |_| true))
}

/// [`backproject`] restricted to the pixels set in `mask`.
pub fn extract_masked(
    depth: &DepthImage,
    mask: &MaskImage,
    intr: &CameraIntrinsics,
    cam_pose: &Pose,
) -> Result<PointCloud> {
    check_dims(depth, intr)?;
    if mask.width != depth.width || mask.height != depth.height {
        return Err(Error::Shape(format!(
            "mask is {}×{}, depth is {}×{}",
            mask.width, mask.height, depth.width, depth.height
        )));
    }
    Ok(backproject_where(depth, intr, cam_pose, |i| mask.data[i]))
}

/// Compensates each frame, extracts its masked points, concatenates all
/// frames and voxel-filters the union once.
pub fn accumulate(
    frames: &[(DepthImage, MaskImage, Pose)],
    intr: &CameraIntrinsics,
    params: &CompensationParams,
    voxel: f64,
) -> Result<PointCloud> {
    let first = frames
        .first()
        .ok_or(Error::EmptyInput("accumulate needs at least one frame"))?;
    let mut merged = PointCloud::empty(first.2.frame.clone());
    for (depth, mask, pose) in frames {
        let compensated = compensate_depth(depth, params)?;
        let part = extract_masked(&compensated, mask, intr, pose)?;
        merged.points.extend(part.points);
    }
    voxel_downsample(&merged, voxel)
}

/// Z-buffers a cloud into a depth raster seen from `cam_pose`, rounding each
/// projection to the nearest pixel center.
pub fn project_to_depth(cloud: &PointCloud, intr: &CameraIntrinsics, cam_pose: &Pose) -> DepthImage {
    let mut depth = DepthImage::invalid(intr.width, intr.height);
    for p in &cloud.points {
        let c = cam_pose.inverse_transform_point(p);
        if c.z <= 0.0 {
            continue;
        }
        let u = (intr.fx * c.x / c.z + intr.cx).round();
        let v = (intr.fy * c.y / c.z + intr.cy).round();
        if u < 0.0 || v < 0.0 || u >= intr.width as f64 || v >= intr.height as f64 {
            continue;
        }
        let (u, v) = (u as usize, v as usize);
        let old = depth.get(u, v);
        if !is_valid_depth(old) || c.z < old {
            depth.set(u, v, c.z);
        }
    }
    depth
}
