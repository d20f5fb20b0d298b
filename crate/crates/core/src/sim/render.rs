use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::depth::{is_valid_depth, CameraIntrinsics, DepthImage, MaskImage};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::seed::rng;

/// Stereo-like depth corruption: additive Gaussian noise growing with the
/// square of depth, random dropout and quantization, in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub sigma0: f64,
    pub sigma1: f64,
    pub dropout_p: f64,
    pub quantization: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma0: 0.002,
            sigma1: 0.002,
            dropout_p: 0.05,
            quantization: 0.001,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.sigma0, self.sigma1, self.quantization]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !nonneg || !(0.0..=1.0).contains(&self.dropout_p) {
            return Err(Error::Config("noise parameters out of range".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> NoiseModel {
        NoiseModel { seed, ..self.clone() }
    }
}

/// Depth raster plus one ground-truth mask per body, in `labels` order
/// (scene objects, then the table).
#[derive(Clone, Debug, PartialEq)]
pub struct Rendering {
    pub depth: DepthImage,
    pub labels: Vec<String>,
    pub masks: Vec<MaskImage>,
}

impl Rendering {
    pub fn mask(&self, label: &str) -> Option<&MaskImage> {
        self.labels.iter().position(|l| l == label).map(|i| &self.masks[i])
    }
}

/// Camera-frame ray direction through pixel centre `(u, v)` with unit
/// optical-axis component, so the ray parameter equals z-depth.
pub(crate) fn pixel_ray(intr: &CameraIntrinsics, u: usize, v: usize) -> Vec3 {
    Vec3::new((u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0)
}

/// Ray-casts every pixel against the scene. Noise, when given, is applied
/// per pixel in raster order from `noise.seed`.
pub fn render_depth(
    scene: &Scene,
    cam_pose: &Pose,
    intr: &CameraIntrinsics,
    noise: Option<&NoiseModel>,
) -> Result<Rendering> {
    intr.validate()?;
    if let Some(n) = noise {
        n.validate()?;
    }
    let bodies = scene.bodies();
    let origin = cam_pose.translation;
    let local_origins: Vec<Vec3> = bodies.iter().map(|b| b.pose.inverse_transform_point(&origin)).collect();
    let (w, h) = (intr.width, intr.height);
    let rows: Vec<Vec<(f64, Option<usize>)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let dir = cam_pose.transform_vector(&pixel_ray(intr, u, v));
                    let mut best: (f64, Option<usize>) = (f64::NAN, None);
                    for (k, b) in bodies.iter().enumerate() {
                        let d = b.pose.rotation.inverse_transform_vector(&dir);
                        if let Some(t) = b.shape.ray(&local_origins[k], &d) {
                            if best.1.is_none() || t < best.0 {
                                best = (t, Some(k));
                            }
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();

    let mut depth = DepthImage::invalid(w, h);
    let mut masks = vec![MaskImage::filled(w, h, false); bodies.len()];
    for (v, row) in rows.iter().enumerate() {
        for (u, &(t, hit)) in row.iter().enumerate() {
            if let Some(k) = hit {
                depth.set(u, v, t);
                masks[k].set(u, v, true);
            }
        }
    }
    if let Some(model) = noise {
        apply_noise(&mut depth, model);
    }
    Ok(Rendering {
        depth,
        labels: bodies.into_iter().map(|b| b.label).collect(),
        masks,
    })
}

fn apply_noise(depth: &mut DepthImage, model: &NoiseModel) {
    let mut r = rng(model.seed);
    for d in depth.data.iter_mut() {
        let g: f64 = r.sample(StandardNormal);
        let drop = r.random::<f64>() < model.dropout_p;
        if !is_valid_depth(*d) {
            continue;
        }
        if drop {
            *d = 0.0;
            continue;
        }
        let mut noisy = *d + g * (model.sigma0 + model.sigma1 * *d * *d);
        if model.quantization > 0.0 {
            noisy = (noisy / model.quantization).round() * model.quantization;
        }
        *d = if noisy > 0.0 { noisy } else { 0.0 };
    }
}

/// Target mask pixel count seen from `cam_pose`, without noise.
pub fn target_pixels(scene: &Scene, target: &str, cam_pose: &Pose, intr: &CameraIntrinsics) -> Result<usize> {
    let r = render_depth(scene, cam_pose, intr, None)?;
    Ok(r.mask(target).map_or(0, MaskImage::count))
}
