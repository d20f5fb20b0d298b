//! Depth rasters, instance masks and their conversion into object-centric
//! point clouds.

mod compensate;
pub mod io;
mod mask;
mod projection;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compensate::compensate_depth;
pub use mask::erode_mask;
pub use projection::{accumulate, backproject, extract_masked, project_to_depth};

/// Pinhole camera parameters. Pixel `(u, v)` with integer coordinates denotes
/// the pixel center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraIntrinsics {
    /// A 424×240 stereo depth stream with roughly 70° horizontal field of view.
    fn default() -> Self {
        CameraIntrinsics {
            fx: 300.0,
            fy: 300.0,
            cx: 212.0,
            cy: 120.0,
            width: 424,
            height: 240,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Parameter("focal lengths must be positive".into()));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::Parameter("cx must lie inside the image".into()));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::Parameter("cy must lie inside the image".into()));
        }
        Ok(())
    }
}

/// Metric depth raster, row-major; `0` marks an invalid pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

#[inline]
pub fn is_valid_depth(d: f64) -> bool {
    d > 0.0 && d.is_finite()
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{} depth values for a {width}×{height} raster",
                data.len()
            )));
        }
        Ok(DepthImage {
            width,
            height,
            data,
        })
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        DepthImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, d: f64) {
        self.data[v * self.width + u] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| is_valid_depth(d)).count()
    }
}

/// Binary instance mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{} mask values for a {width}×{height} raster",
                data.len()
            )));
        }
        Ok(MaskImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        MaskImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        self.data[v * self.width + u] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Image-plane hole filling and flying-pixel rejection settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompensationParams {
    /// Odd window side length in pixels.
    pub window: usize,
    /// Valid neighbors required before a hole is filled.
    pub min_valid: usize,
    /// Largest neighbor depth spread (m) that still allows a fill.
    pub fill_spread_max: f64,
    /// Largest deviation (m) from the neighbor median before a pixel is dropped.
    pub outlier_dev_max: f64,
}

impl Default for CompensationParams {
    fn default() -> Self {
        CompensationParams {
            window: 5,
            min_valid: 6,
            fill_spread_max: 0.10,
            outlier_dev_max: 0.10,
        }
    }
}

impl CompensationParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Parameter(format!(
                "compensation window must be odd and ≥ 3, got {}",
                self.window
            )));
        }
        if self.min_valid > self.window * self.window - 1 {
            return Err(Error::Parameter(format!(
                "min_valid {} exceeds the {} window neighbors",
                self.min_valid,
                self.window * self.window - 1
            )));
        }
        if !(self.fill_spread_max >= 0.0 && self.outlier_dev_max >= 0.0) {
            return Err(Error::Parameter("compensation thresholds must be non-negative".into()));
        }
        Ok(())
    }
}
