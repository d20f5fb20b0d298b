use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};

/// Ray hits closer than this are ignored.
const T_MIN: f64 = 1e-9;
const MAX_NESTING: usize = 2;

/// Solid shape in its own local frame. Boxes, cylinders and spheres are
/// centred on the origin; cylinders run along local `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive {
    Box { dims: Vec3 },
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    Composite { parts: Vec<Part> },
}

/// A composite member placed relative to the composite's frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Part {
    pub shape: Primitive,
    pub pose: Pose,
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Primitive {
    pub fn kind(&self) -> &'static str {
        match self {
            Primitive::Box { .. } => "box",
            Primitive::Cylinder { .. } => "cylinder",
            Primitive::Sphere { .. } => "sphere",
            Primitive::Composite { .. } => "composite",
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(0)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        let ok = match self {
            Primitive::Box { dims } => dims.iter().all(|d| positive(*d)),
            Primitive::Cylinder { radius, height } => positive(*radius) && positive(*height),
            Primitive::Sphere { radius } => positive(*radius),
            Primitive::Composite { parts } => {
                if depth >= MAX_NESTING {
                    return Err(Error::Input("composite nesting is limited to two levels".into()));
                }
                if parts.is_empty() {
                    return Err(Error::Input("composite needs at least one part".into()));
                }
                for p in parts {
                    p.pose.validate()?;
                    p.shape.validate_at(depth + 1)?;
                }
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("non-positive dimension in {self:?}")))
        }
    }

    /// Nearest ray parameter `t > 0` where `origin + t·dir` meets the surface.
    pub fn ray(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self {
            Primitive::Box { dims } => ray_box(origin, dir, &(dims / 2.0)),
            Primitive::Cylinder { radius, height } => ray_cylinder(origin, dir, *radius, height / 2.0),
            Primitive::Sphere { radius } => {
                let b = origin.dot(dir);
                let a = dir.norm_squared();
                let c = origin.norm_squared() - radius * radius;
                smallest_root(a, b, c)
            }
            Primitive::Composite { parts } => parts
                .iter()
                .filter_map(|p| {
                    let o = p.pose.inverse_transform_point(origin);
                    let d = p.pose.rotation.inverse_transform_vector(dir);
                    p.shape.ray(&o, &d)
                })
                .min_by(f64::total_cmp),
        }
    }

    /// Strict interior test.
    pub fn contains(&self, q: &Vec3) -> bool {
        match self {
            Primitive::Box { dims } => (0..3).all(|i| q[i].abs() < dims[i] / 2.0),
            Primitive::Cylinder { radius, height } => {
                q.z.abs() < height / 2.0 && q.x * q.x + q.y * q.y < radius * radius
            }
            Primitive::Sphere { radius } => q.norm_squared() < radius * radius,
            Primitive::Composite { parts } => parts
                .iter()
                .any(|p| p.shape.contains(&p.pose.inverse_transform_point(q))),
        }
    }

    /// Unsigned distance to the surface; for composites, to the nearest part
    /// surface.
    pub fn surface_distance(&self, q: &Vec3) -> f64 {
        match self {
            Primitive::Box { dims } => box_sdf(q, &(dims / 2.0)).abs(),
            Primitive::Cylinder { radius, height } => {
                let radial = (q.x * q.x + q.y * q.y).sqrt() - radius;
                let axial = q.z.abs() - height / 2.0;
                let outside = (radial.max(0.0).powi(2) + axial.max(0.0).powi(2)).sqrt();
                (outside + radial.max(axial).min(0.0)).abs()
            }
            Primitive::Sphere { radius } => (q.norm() - radius).abs(),
            Primitive::Composite { parts } => parts
                .iter()
                .map(|p| p.shape.surface_distance(&p.pose.inverse_transform_point(q)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Total boundary area, summed over parts for composites.
    pub fn area(&self) -> f64 {
        match self {
            Primitive::Box { dims } => 2.0 * (dims.x * dims.y + dims.y * dims.z + dims.x * dims.z),
            Primitive::Cylinder { radius, height } => TAU * radius * (height + radius),
            Primitive::Sphere { radius } => 2.0 * TAU * radius * radius,
            Primitive::Composite { parts } => parts.iter().map(|p| p.shape.area()).sum(),
        }
    }

    /// Local-frame bounding box corners `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            Primitive::Box { dims } => (-dims / 2.0, dims / 2.0),
            Primitive::Cylinder { radius, height } => {
                let h = Vec3::new(*radius, *radius, height / 2.0);
                (-h, h)
            }
            Primitive::Sphere { radius } => (Vec3::repeat(-radius), Vec3::repeat(*radius)),
            Primitive::Composite { parts } => {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for p in parts {
                    let (a, b) = p.shape.bounds();
                    for c in box_corners(&a, &b) {
                        let w = p.pose.transform_point(&c);
                        lo = lo.inf(&w);
                        hi = hi.sup(&w);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// One point drawn uniformly by area over the boundary, with its
    /// outward normal. Composite draws that land inside another part are
    /// redrawn so the result covers only the union's outer surface.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec3, Vec3) {
        match self {
            Primitive::Box { dims } => {
                let h = dims / 2.0;
                let areas = [dims.y * dims.z, dims.x * dims.z, dims.x * dims.y];
                let total = areas.iter().sum::<f64>();
                let mut pick = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = i;
                        break;
                    }
                    pick -= a;
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut p = Vec3::zeros();
                for i in 0..3 {
                    p[i] = if i == axis { sign * h[i] } else { rng.random_range(-h[i]..=h[i]) };
                }
                let mut n = Vec3::zeros();
                n[axis] = sign;
                (p, n)
            }
            Primitive::Cylinder { radius, height } => {
                let lateral = TAU * radius * height;
                let cap = 0.5 * TAU * radius * radius;
                let pick = rng.random::<f64>() * (lateral + 2.0 * cap);
                let a = rng.random::<f64>() * TAU;
                if pick < lateral {
                    let z = rng.random_range(-height / 2.0..=height / 2.0);
                    let n = Vec3::new(a.cos(), a.sin(), 0.0);
                    (Vec3::new(radius * n.x, radius * n.y, z), n)
                } else {
                    let sign = if pick < lateral + cap { 1.0 } else { -1.0 };
                    let r = radius * rng.random::<f64>().sqrt();
                    (Vec3::new(r * a.cos(), r * a.sin(), sign * height / 2.0), Vec3::new(0.0, 0.0, sign))
                }
            }
            Primitive::Sphere { radius } => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let a = rng.random::<f64>() * TAU;
                let s = (1.0 - z * z).sqrt();
                let n = Vec3::new(s * a.cos(), s * a.sin(), z);
                (*radius * n, n)
            }
            Primitive::Composite { parts } => {
                let areas: Vec<f64> = parts.iter().map(|p| p.shape.area()).collect();
                let total: f64 = areas.iter().sum();
                loop {
                    let mut pick = rng.random::<f64>() * total;
                    let mut k = parts.len() - 1;
                    for (i, a) in areas.iter().enumerate() {
                        if pick < *a {
                            k = i;
                            break;
                        }
                        pick -= a;
                    }
                    let (lp, ln) = parts[k].shape.sample_point(rng);
                    let p = parts[k].pose.transform_point(&lp);
                    let buried = parts
                        .iter()
                        .enumerate()
                        .any(|(j, o)| j != k && o.shape.contains(&o.pose.inverse_transform_point(&p)));
                    if !buried {
                        return (p, parts[k].pose.transform_vector(&ln));
                    }
                }
            }
        }
    }
}

pub(crate) fn box_corners(lo: &Vec3, hi: &Vec3) -> [Vec3; 8] {
    std::array::from_fn(|i| {
        Vec3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        )
    })
}

fn box_sdf(q: &Vec3, half: &Vec3) -> f64 {
    let d = q.abs() - half;
    let outside = d.sup(&Vec3::zeros()).norm();
    outside + d.max().min(0.0)
}

fn smallest_root(a: f64, b_half: f64, c: f64) -> Option<f64> {
    let disc = b_half * b_half - a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // Stable form avoids cancellation in the near root.
    let q = -(b_half + b_half.signum() * s);
    let (mut t0, mut t1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    [t0, t1].into_iter().find(|t| *t > T_MIN)
}

fn ray_box(o: &Vec3, d: &Vec3, half: &Vec3) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let a = (-half[i] - o[i]) / d[i];
        let b = (half[i] - o[i]) / d[i];
        t_near = t_near.max(a.min(b));
        t_far = t_far.min(a.max(b));
    }
    if t_near > t_far {
        return None;
    }
    [t_near, t_far].into_iter().find(|t| *t > T_MIN)
}

fn ray_cylinder(o: &Vec3, d: &Vec3, r: f64, hh: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut take = |t: f64| {
        if t > T_MIN && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / a, (-b + s) / a] {
                if (o.z + t * d.z).abs() <= hh {
                    take(t);
                }
            }
        }
    }
    if d.z != 0.0 {
        for z in [-hh, hh] {
            let t = (z - o.z) / d.z;
            let (x, y) = (o.x + t * d.x, o.y + t * d.y);
            if x * x + y * y <= r * r {
                take(t);
            }
        }
    }
    best
}
