//! Rigid transforms, point clouds and the basic cloud operations shared by
//! every other stage of the pipeline.
//!
//! All lengths are meters and all angles radians. Rotations use matrix
//! semantics (`nalgebra::Rotation3`); poses map points from a local frame into
//! the frame named by [`Pose::frame`].

mod kdtree;
mod ops;
pub mod ply;

use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kdtree::KdIndex;
pub use ops::{
    centroid, estimate_normals, estimate_normals_outward, farthest_point_indices,
    farthest_point_sample, transform_cloud, voxel_downsample,
};

pub type Vec3 = Vector3<f64>;
pub type Rotation = Rotation3<f64>;

/// Name of a reference frame ("world", "camera", ...).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameId(pub String);

impl FrameId {
    pub fn world() -> Self {
        FrameId("world".to_owned())
    }

    pub fn new(name: impl Into<String>) -> Self {
        FrameId(name.into())
    }
}

impl Default for FrameId {
    fn default() -> Self {
        Self::world()
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A rigid transform into `frame`: `p ↦ R·p + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
    pub frame: FrameId,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
            frame: FrameId::world(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Pose {
            rotation,
            translation,
            frame: FrameId::world(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Rotation::identity(), translation)
    }

    pub fn in_frame(mut self, frame: FrameId) -> Self {
        self.frame = frame;
        self
    }

    /// Builds a rotation from its three column axes. Fails unless the axes
    /// are orthonormal and right-handed.
    pub fn rotation_from_axes(x: Vec3, y: Vec3, z: Vec3) -> Result<Rotation> {
        let m = Matrix3::from_columns(&[x, y, z]);
        check_rotation_matrix(&m)?;
        Ok(Rotation::from_matrix_unchecked(m))
    }

    /// Builds a rotation from nine row-major entries.
    pub fn rotation_from_row_major(r: &[f64; 9]) -> Result<Rotation> {
        let m = Matrix3::from_row_slice(r);
        check_rotation_matrix(&m)?;
        Ok(Rotation::from_matrix_unchecked(m))
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let m = self.rotation.matrix();
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = m[(r, c)];
            }
        }
        out
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Maps a point expressed in `self.frame` back into the local frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.translation)
    }

    /// `self ⊕ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            frame: self.frame.clone(),
        }
    }

    /// The inverse transform, labelled as mapping into `frame`.
    pub fn inverse_into(&self, frame: FrameId) -> Pose {
        let rinv = self.rotation.inverse();
        Pose {
            translation: -(rinv * self.translation),
            rotation: rinv,
            frame,
        }
    }

    /// Local x axis expressed in the parent frame (the gripper approach axis).
    pub fn x_axis(&self) -> Vec3 {
        self.rotation.matrix().column(0).into_owned()
    }

    /// Local y axis (the gripper closing axis).
    pub fn y_axis(&self) -> Vec3 {
        self.rotation.matrix().column(1).into_owned()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.rotation.matrix().column(2).into_owned()
    }

    pub fn validate(&self) -> Result<()> {
        check_rotation_matrix(self.rotation.matrix())?;
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("pose translation is not finite".into()));
        }
        Ok(())
    }
}

fn check_rotation_matrix(m: &Matrix3<f64>) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Parameter("rotation has non-finite entries".into()));
    }
    let err = (m.transpose() * m - Matrix3::identity()).abs().max();
    if err > 1e-9 {
        return Err(Error::Parameter(format!(
            "rotation is not orthonormal (max |RᵀR − I| = {err:.3e})"
        )));
    }
    let det = m.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("rotation determinant is {det}")));
    }
    Ok(())
}

/// JSON form of a pose: translation plus row-major rotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub t: [f64; 3],
    pub r: [f64; 9],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        PoseRecord {
            t: [p.translation.x, p.translation.y, p.translation.z],
            r: p.rotation_row_major(),
        }
    }
}

impl TryFrom<&PoseRecord> for Pose {
    type Error = Error;

    fn try_from(rec: &PoseRecord) -> Result<Pose> {
        let rotation = Pose::rotation_from_row_major(&rec.r)?;
        Ok(Pose::new(rotation, Vec3::new(rec.t[0], rec.t[1], rec.t[2])))
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = PoseRecord::deserialize(d)?;
        Pose::try_from(&rec).map_err(serde::de::Error::custom)
    }
}

/// A set of 3-D points, optionally with one unit normal per point.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub frame: FrameId,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: FrameId) -> Self {
        PointCloud {
            points,
            normals: None,
            frame,
        }
    }

    pub fn empty(frame: FrameId) -> Self {
        Self::new(Vec::new(), frame)
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>, frame: FrameId) -> Result<Self> {
        let cloud = PointCloud {
            points,
            normals: Some(normals),
            frame,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::Shape(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::Input(format!("normal {i} is not unit length")));
            }
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::Input(format!("point {i} is not finite")));
        }
        Ok(())
    }

    /// Copies the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            frame: self.frame.clone(),
        }
    }

    /// Appends `other`; normals survive only if both sides carry them.
    pub fn extend_from(&mut self, other: &PointCloud) {
        self.normals = match (self.normals.take(), &other.normals) {
            (Some(mut mine), Some(theirs)) => {
                mine.extend_from_slice(theirs);
                Some(mine)
            }
            (None, Some(theirs)) if self.points.is_empty() => Some(theirs.clone()),
            (Some(mine), None) if other.points.is_empty() => Some(mine),
            _ => None,
        };
        self.points.extend_from_slice(&other.points);
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }
}
