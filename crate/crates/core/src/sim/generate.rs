use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{target_pixels, Part, Primitive, Scene, SceneObject, Table};
use crate::depth::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::seed::{derive_seed, rng};

/// Height of the arm shoulder above the floor; reach is measured from here.
pub const BASE_HEIGHT: f64 = 0.5;
pub const MIN_VISIBLE_PIXELS: usize = 200;

const TABLE_HEIGHT: f64 = 0.45;
const TABLE_EXTENT: [f64; 2] = [0.7, 1.2];
const ARENA: [f64; 2] = [4.0, 4.0];
const CAMERA_OFFSET: [f64; 3] = [0.3, 0.0, 0.2];
const CAMERA_PITCH_DEG: f64 = 20.0;
const NOMINAL_STANDOFF: f64 = 0.8;
const MIN_GAP: f64 = 0.008;
const PLACEMENT_TRIES: usize = 60;
const LAYOUT_TRIES: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    Drill,
    Bottle,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::Drill => "drill",
            Template::Bottle => "bottle",
        }
    }

    pub fn target_id(self) -> &'static str {
        self.name()
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drill" => Ok(Template::Drill),
            "bottle" => Ok(Template::Bottle),
            other => Err(Error::Input(format!("unknown scene template `{other}`"))),
        }
    }
}

/// Base pose on the floor plane at shoulder height, facing `yaw`.
pub fn base_pose(x: f64, y: f64, yaw: f64) -> Pose {
    Pose::new(Rotation::from_axis_angle(&Vec3::z_axis(), yaw), Vec3::new(x, y, BASE_HEIGHT))
}

/// Stance the templates are laid out against: facing the table from `-x`.
pub fn nominal_base() -> Pose {
    base_pose(-NOMINAL_STANDOFF, 0.0, 0.0)
}

/// Body camera for a base pose: mounted ahead of and above the shoulder,
/// pitched down. Camera axes are x right, y down, z forward.
pub fn camera_pose(base: &Pose) -> Pose {
    let (s, c) = CAMERA_PITCH_DEG.to_radians().sin_cos();
    let forward = Vec3::new(c, 0.0, -s);
    let right = -Vec3::y();
    let down = forward.cross(&right);
    let mount = Pose::new(
        Pose::rotation_from_axes(right, down, forward).expect("orthonormal mount"),
        Vec3::from(CAMERA_OFFSET),
    );
    base.compose(&mount)
}

/// Horizontal footprint radius of a shape at a given yaw-only pose.
fn footprint(shape: &Primitive) -> f64 {
    let (lo, hi) = shape.bounds();
    lo.x.abs().max(hi.x.abs()).hypot(lo.y.abs().max(hi.y.abs()))
}

struct Placed {
    xy: [f64; 2],
    radius: f64,
}

fn fits(xy: [f64; 2], radius: f64, placed: &[Placed]) -> bool {
    let [hx, hy] = [TABLE_EXTENT[0] / 2.0, TABLE_EXTENT[1] / 2.0];
    if xy[0].abs() + radius > hx || xy[1].abs() + radius > hy {
        return false;
    }
    placed
        .iter()
        .all(|p| (xy[0] - p.xy[0]).hypot(xy[1] - p.xy[1]) >= radius + p.radius + MIN_GAP)
}

fn random_clutter(r: &mut ChaCha8Rng) -> Primitive {
    if r.random::<f64>() < 0.6 {
        Primitive::Box {
            dims: Vec3::new(
                r.random_range(0.04..0.14),
                r.random_range(0.04..0.14),
                r.random_range(0.06..0.22),
            ),
        }
    } else {
        Primitive::Cylinder {
            radius: r.random_range(0.025..0.05),
            height: r.random_range(0.08..0.20),
        }
    }
}

/// Lower box set in front of the target, partly hiding it.
fn front_occluder(r: &mut ChaCha8Rng) -> Primitive {
    Primitive::Box {
        dims: Vec3::new(
            r.random_range(0.03..0.08),
            r.random_range(0.08..0.18),
            r.random_range(0.06..0.14),
        ),
    }
}

fn resting_pose(shape: &Primitive, xy: [f64; 2], yaw: f64) -> Pose {
    let (lo, _) = shape.bounds();
    Pose::new(
        Rotation::from_axis_angle(&Vec3::z_axis(), yaw),
        Vec3::new(xy[0], xy[1], TABLE_HEIGHT - lo.z),
    )
}

fn drill_shape() -> Primitive {
    Primitive::Composite {
        parts: vec![
            Part {
                shape: Primitive::Box {
                    dims: Vec3::new(0.045, 0.035, 0.135),
                },
                pose: Pose::from_translation(Vec3::new(0.0, 0.0, -0.0175)),
            },
            Part {
                shape: Primitive::Cylinder {
                    radius: 0.03,
                    height: 0.17,
                },
                pose: Pose::new(
                    Rotation::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
                    Vec3::new(0.035, 0.0, 0.055),
                ),
            },
        ],
    }
}

fn bottle_shape() -> Primitive {
    Primitive::Cylinder {
        radius: 0.035,
        height: 0.20,
    }
}

fn layout(template: Template, r: &mut ChaCha8Rng) -> Scene {
    let target_shape = match template {
        Template::Drill => drill_shape(),
        Template::Bottle => bottle_shape(),
    };
    let txy = [r.random_range(-0.08..0.08), r.random_range(-0.12..0.12)];
    let t_radius = footprint(&target_shape);
    let mut placed = vec![Placed {
        xy: txy,
        radius: t_radius,
    }];
    let mut objects = vec![SceneObject {
        id: template.target_id().to_string(),
        pose: resting_pose(&target_shape, txy, r.random_range(0.0..TAU)),
        shape: target_shape,
        is_target: true,
    }];
    let (front, near, total) = match template {
        Template::Drill => (r.random_range(1..=2), r.random_range(1..=3), r.random_range(4..=8)),
        Template::Bottle => (r.random_range(1..=3), r.random_range(1..=2), r.random_range(3..=6)),
    };
    let push = |shape: Primitive, xy: [f64; 2], yaw: f64, objects: &mut Vec<SceneObject>, placed: &mut Vec<Placed>| {
        let radius = footprint(&shape);
        if !fits(xy, radius, placed) {
            return false;
        }
        placed.push(Placed { xy, radius });
        let id = format!("clutter_{}", objects.len());
        objects.push(SceneObject {
            id,
            pose: resting_pose(&shape, xy, yaw),
            shape,
            is_target: false,
        });
        true
    };
    for k in 0..total {
        for _ in 0..PLACEMENT_TRIES {
            let (shape, xy, yaw) = if k < front {
                let shape = front_occluder(r);
                let gap = r.random_range(0.03..0.10);
                let xy = [
                    txy[0] - t_radius - footprint(&shape) - gap,
                    txy[1] + r.random_range(-0.08..0.08),
                ];
                (shape, xy, r.random_range(-0.3..0.3))
            } else if k < front + near {
                let shape = random_clutter(r);
                let dir = r.random_range(-1.9..1.9f64);
                let dist = t_radius + footprint(&shape) + r.random_range(0.01..0.05);
                (shape, [txy[0] + dist * dir.cos(), txy[1] + dist * dir.sin()], r.random_range(0.0..TAU))
            } else {
                let shape = random_clutter(r);
                let xy = [
                    r.random_range(-TABLE_EXTENT[0] / 2.0..TABLE_EXTENT[0] / 2.0),
                    r.random_range(-TABLE_EXTENT[1] / 2.0..TABLE_EXTENT[1] / 2.0),
                ];
                (shape, xy, r.random_range(0.0..TAU))
            };
            if push(shape, xy, yaw, &mut objects, &mut placed) {
                break;
            }
        }
    }
    Scene {
        objects,
        table: Table {
            height: TABLE_HEIGHT,
            extent: TABLE_EXTENT,
        },
        arena: ARENA,
    }
}

/// Seeded cluttered tabletop. Layouts whose target shows fewer than
/// [`MIN_VISIBLE_PIXELS`] from the nominal stance are redrawn.
pub fn generate_scene(template: Template, seed: u64) -> Scene {
    let cam = camera_pose(&nominal_base());
    let intr = CameraIntrinsics::default();
    let mut fallback = None;
    for attempt in 0..LAYOUT_TRIES {
        let scene = layout(template, &mut rng(derive_seed(seed, attempt)));
        let visible = target_pixels(&scene, template.target_id(), &cam, &intr).unwrap_or(0);
        if visible >= MIN_VISIBLE_PIXELS {
            return scene;
        }
        fallback.get_or_insert(scene);
    }
    // Strip clutter rather than return an invisible target.
    let mut scene = fallback.expect("at least one layout");
    scene.objects.truncate(1);
    scene
}
