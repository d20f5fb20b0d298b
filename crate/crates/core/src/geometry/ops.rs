use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{KdIndex, PointCloud, Pose, Vec3};
use crate::error::{Error, Result};

/// Applies `pose` to every point (rotation + translation) and normal
/// (rotation only). The result is labelled with `pose.frame`.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| pose.transform_point(p)).collect(),
        normals: cloud
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| pose.transform_vector(n)).collect()),
        frame: pose.frame.clone(),
    }
}

/// Replaces the points of every occupied voxel by their centroid.
///
/// Output order follows the first point that landed in each voxel.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(Error::Parameter(format!(
            "voxel size must be positive, got {voxel}"
        )));
    }
    struct Cell {
        sum: Vec3,
        normal_sum: Vec3,
        first_normal: Vec3,
        count: usize,
    }
    let mut slots: HashMap<(i64, i64, i64), usize> = HashMap::with_capacity(cloud.len() / 2);
    let mut cells: Vec<Cell> = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        let n = cloud.normals.as_ref().map(|ns| ns[i]).unwrap_or_default();
        let slot = *slots.entry(key).or_insert_with(|| {
            cells.push(Cell {
                sum: Vec3::zeros(),
                normal_sum: Vec3::zeros(),
                first_normal: n,
                count: 0,
            });
            cells.len() - 1
        });
        let cell = &mut cells[slot];
        cell.sum += p;
        cell.normal_sum += n;
        cell.count += 1;
    }
    let points = cells.iter().map(|c| c.sum / c.count as f64).collect();
    let normals = cloud.normals.as_ref().map(|_| {
        cells
            .iter()
            .map(|c| {
                c.normal_sum
                    .try_normalize(1e-12)
                    .unwrap_or(c.first_normal)
            })
            .collect()
    });
    Ok(PointCloud {
        points,
        normals,
        frame: cloud.frame.clone(),
    })
}

/// PCA normals over the `k` nearest neighbors, flipped to face `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: Vec3) -> Result<PointCloud> {
    estimate_normals_with(cloud, k, |p, n| n.dot(&(viewpoint - p)) < 0.0)
}

/// PCA normals flipped to point away from `interior`. Used for completed,
/// all-around object clouds where a single sensor viewpoint is meaningless.
pub fn estimate_normals_outward(cloud: &PointCloud, k: usize, interior: Vec3) -> Result<PointCloud> {
    estimate_normals_with(cloud, k, |p, n| n.dot(&(p - interior)) < 0.0)
}

fn estimate_normals_with<F>(cloud: &PointCloud, k: usize, flip: F) -> Result<PointCloud>
where
    F: Fn(&Vec3, &Vec3) -> bool + Sync,
{
    if k < 3 {
        return Err(Error::Parameter(format!("normal estimation needs k ≥ 3, got {k}")));
    }
    if cloud.len() < k {
        return Err(Error::Size {
            needed: k,
            got: cloud.len(),
        });
    }
    let index = KdIndex::build(cloud);
    let normals = cloud
        .points
        .par_iter()
        .map(|p| {
            let neighbors = index.knn(p, k);
            let mean = neighbors
                .iter()
                .fold(Vec3::zeros(), |acc, &(i, _)| acc + cloud.points[i])
                / neighbors.len() as f64;
            let cov = neighbors.iter().fold(Matrix3::zeros(), |acc, &(i, _)| {
                let d = cloud.points[i] - mean;
                acc + d * d.transpose()
            });
            let eig = SymmetricEigen::new(cov);
            let smallest = eig.eigenvalues.imin();
            let mut n: Vec3 = eig.eigenvectors.column(smallest).into_owned();
            n = n.try_normalize(1e-300).unwrap_or_else(Vec3::z);
            if flip(p, &n) {
                n = -n;
            }
            n
        })
        .collect();
    Ok(PointCloud {
        points: cloud.points.clone(),
        normals: Some(normals),
        frame: cloud.frame.clone(),
    })
}

/// Greedy farthest-point subsampling; returns selected indices in pick order.
///
/// The first index is drawn from `seed`; every later pick maximizes the
/// distance to the chosen set, ties going to the lower index.
pub fn farthest_point_indices(points: &[Vec3], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Parameter("farthest point sampling needs n ≥ 1".into()));
    }
    if points.len() <= n {
        return Ok((0..points.len()).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut chosen = Vec::with_capacity(n);
    let mut min_d2 = vec![f64::INFINITY; points.len()];
    let mut current = first;
    chosen.push(first);
    while chosen.len() < n {
        let anchor = points[current];
        // Chosen points can never win again, even among exact duplicates.
        min_d2[current] = -1.0;
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, (p, d)) in points.iter().zip(min_d2.iter_mut()).enumerate() {
            let d2 = (p - anchor).norm_squared();
            if d2 < *d {
                *d = d2;
            }
            if *d > best_d2 {
                best_d2 = *d;
                best = i;
            }
        }
        current = best;
        chosen.push(best);
    }
    Ok(chosen)
}

pub fn farthest_point_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::Parameter("farthest point sampling needs n ≥ 1".into()));
    }
    if cloud.len() <= n {
        return Ok(cloud.clone());
    }
    let idx = farthest_point_indices(&cloud.points, n, seed)?;
    Ok(cloud.select(&idx))
}

pub fn centroid(cloud: &PointCloud) -> Result<Vec3> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("centroid of an empty cloud"));
    }
    Ok(cloud.points.iter().sum::<Vec3>() / cloud.len() as f64)
}
