//! Synthetic cluttered tabletop: primitive geometry, ray-cast depth
//! rendering, ground-truth surfaces, grasp adjudication and the paired
//! benchmark.

mod adjudicate;
mod bench;
mod generate;
mod primitive;
mod render;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::completion::SurfaceOracle;
use crate::error::{Error, Result};
use crate::geometry::{FrameId, PointCloud, Pose, Vec3};
use crate::seed::{derive_seed, rng};

pub use adjudicate::{check_grasp_success, obb_overlap, Adjudicator, CheckStage, GraspCheck, Obb, Outcome};
pub use bench::{
    run_paired_benchmark, sample_initial_base, BenchmarkResults, ModeTotals, PairRecord, TEMPLATE_NAMES,
};
pub use generate::{
    base_pose, camera_pose, generate_scene, nominal_base, Template, BASE_HEIGHT, MIN_VISIBLE_PIXELS,
};
pub use primitive::{Part, Primitive};
pub use render::{render_depth, target_pixels, NoiseModel, Rendering};

/// Label of the table slab in renderings and collision reports.
pub const TABLE_LABEL: &str = "table";
pub const TABLE_THICKNESS: f64 = 0.04;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub id: String,
    pub shape: Primitive,
    pub pose: Pose,
    #[serde(default)]
    pub is_target: bool,
}

/// Table slab centred on the world origin with its top at `height`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub height: f64,
    pub extent: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub table: Table,
    pub arena: [f64; 2],
}

/// Borrowed view of anything that can be hit: scene objects and the table.
#[derive(Clone, Debug)]
pub struct Body {
    pub label: String,
    pub shape: Primitive,
    pub pose: Pose,
}

impl Table {
    pub fn body(&self) -> Body {
        Body {
            label: TABLE_LABEL.to_string(),
            shape: Primitive::Box {
                dims: Vec3::new(self.extent[0], self.extent[1], TABLE_THICKNESS),
            },
            pose: Pose::from_translation(Vec3::new(0.0, 0.0, self.height - TABLE_THICKNESS / 2.0)),
        }
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input("object ids must be unique".into()));
        }
        if ids.contains(&TABLE_LABEL) {
            return Err(Error::Input(format!("`{TABLE_LABEL}` is reserved")));
        }
        for o in &self.objects {
            o.shape.validate()?;
            o.pose.validate()?;
        }
        let t = &self.table;
        if !(t.height.is_finite() && t.extent.iter().all(|e| e.is_finite() && *e > 0.0)) {
            return Err(Error::Input("table must have a finite height and positive extent".into()));
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Result<&SceneObject> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::Input(format!("no object `{id}` in scene")))
    }

    /// Exact id match first, then the first id containing `query`.
    pub fn resolve_target(&self, query: &str) -> Result<&SceneObject> {
        self.objects
            .iter()
            .find(|o| o.id == query)
            .or_else(|| self.objects.iter().find(|o| o.id.contains(query)))
            .ok_or_else(|| Error::Input(format!("no object matches `{query}`")))
    }

    /// The object flagged as target, if exactly one is.
    pub fn target(&self) -> Result<&SceneObject> {
        let mut it = self.objects.iter().filter(|o| o.is_target);
        match (it.next(), it.next()) {
            (Some(t), None) => Ok(t),
            _ => Err(Error::Input("scene must flag exactly one target".into())),
        }
    }

    /// Scene objects followed by the table.
    pub fn bodies(&self) -> Vec<Body> {
        self.objects
            .iter()
            .map(|o| Body {
                label: o.id.clone(),
                shape: o.shape.clone(),
                pose: o.pose.clone(),
            })
            .chain(std::iter::once(self.table.body()))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_json()? + "\n")?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scene> {
        Scene::from_json(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the compact JSON encoding, as lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scene serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `n` points uniform by area over object `id`, with outward normals, in
/// the world frame.
pub fn sample_surface(scene: &Scene, id: &str, n: usize, seed: u64) -> Result<PointCloud> {
    Ok(sample_object(scene.object(id)?, n, seed))
}

const SAMPLE_BATCH: usize = 1024;

fn sample_object(obj: &SceneObject, n: usize, seed: u64) -> PointCloud {
    let batches: Vec<(Vec<Vec3>, Vec<Vec3>)> = (0..n.div_ceil(SAMPLE_BATCH))
        .into_par_iter()
        .map(|b| {
            let mut r = rng(derive_seed(seed, b as u64));
            let count = SAMPLE_BATCH.min(n - b * SAMPLE_BATCH);
            (0..count)
                .map(|_| {
                    let (p, nrm) = obj.shape.sample_point(&mut r);
                    (obj.pose.transform_point(&p), obj.pose.transform_vector(&nrm).normalize())
                })
                .unzip()
        })
        .collect();
    let (mut points, mut normals) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (p, q) in batches {
        points.extend(p);
        normals.extend(q);
    }
    PointCloud {
        points,
        normals: Some(normals),
        frame: FrameId::world(),
    }
}

/// Ground-truth surface of one scene object, usable as a completion oracle.
pub struct ObjectOracle<'a> {
    object: &'a SceneObject,
}

impl<'a> ObjectOracle<'a> {
    pub fn new(scene: &'a Scene, id: &str) -> Result<Self> {
        Ok(ObjectOracle {
            object: scene.object(id)?,
        })
    }
}

impl SurfaceOracle for ObjectOracle<'_> {
    fn sample_surface(&self, n: usize, seed: u64) -> PointCloud {
        sample_object(self.object, n, seed)
    }
}
