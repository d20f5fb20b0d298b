use rand::seq::index;
use rand::Rng;

use super::{CompleterKind, CompletionContext, CompletionStage};
use crate::error::{Error, Result};
use crate::geometry::{centroid, PointCloud, Vec3};
use crate::seed::{derive_seed, rng};

/// Quantile of view depth where the mirror plane sits. Close to the rear
/// silhouette of the observation, but robust to a few stray far points.
const MIRROR_PLANE_QUANTILE: f64 = 0.98;

/// Runs one completer on `input`, returning exactly `n` points.
pub fn run_completer(
    kind: CompleterKind,
    input: &PointCloud,
    n: usize,
    ctx: &CompletionContext<'_>,
    stage: CompletionStage,
    seed: u64,
) -> Result<PointCloud> {
    if input.is_empty() {
        return Err(Error::EmptyInput("completer input"));
    }
    let out = match (kind, stage) {
        (CompleterKind::Identity, _) | (CompleterKind::Mirror, CompletionStage::Patch) => {
            resample(&input.clone().without_normals(), n, seed)
        }
        (CompleterKind::Mirror, CompletionStage::Object) => {
            let origin = ctx
                .view_origin
                .ok_or_else(|| Error::Config("mirror completer needs a view origin".into()))?;
            resample(&mirror_across_rear_plane(input, origin)?, n, seed)
        }
        (CompleterKind::Oracle, stage) => {
            let oracle = ctx
                .oracle
                .ok_or_else(|| Error::Config("oracle completer needs a simulator surface".into()))?;
            match stage {
                CompletionStage::Object => oracle.sample_surface(n, seed),
                CompletionStage::Patch => local_oracle_sample(oracle, input, n, seed)?,
            }
            .without_normals()
        }
    };
    debug_assert_eq!(out.len(), n);
    Ok(PointCloud {
        frame: input.frame.clone(),
        ..out
    })
}

/// Exactly `n` points drawn from `cloud`: a random subset when `n` fits,
/// otherwise every point once plus random repeats.
pub(crate) fn resample(cloud: &PointCloud, n: usize, seed: u64) -> PointCloud {
    let mut rng = rng(seed);
    let len = cloud.len();
    let indices: Vec<usize> = if n <= len {
        index::sample(&mut rng, len, n).into_vec()
    } else {
        (0..len)
            .chain((0..n - len).map(|_| rng.random_range(0..len)))
            .collect()
    };
    cloud.select(&indices)
}

/// Input ∪ its reflection across the plane orthogonal to the mean viewing
/// direction, placed at the rear of the observed depth range.
fn mirror_across_rear_plane(input: &PointCloud, origin: Vec3) -> Result<PointCloud> {
    let view = input
        .points
        .iter()
        .filter_map(|p| (p - origin).try_normalize(1e-12))
        .sum::<Vec3>()
        .try_normalize(1e-12)
        .ok_or_else(|| Error::DegenerateGeometry("no mean viewing direction".into()))?;
    let mut depths: Vec<f64> = input.points.iter().map(|p| (p - origin).dot(&view)).collect();
    depths.sort_unstable_by(f64::total_cmp);
    let q = ((depths.len() - 1) as f64 * MIRROR_PLANE_QUANTILE).floor() as usize;
    let plane = depths[q];
    let mut points = input.points.clone();
    points.extend(input.points.iter().map(|p| {
        let offset = (p - origin).dot(&view) - plane;
        p - 2.0 * offset * view
    }));
    Ok(PointCloud::new(points, input.frame.clone()))
}

/// Oracle draws restricted to the neighborhood of one patch.
fn local_oracle_sample(
    oracle: &dyn super::SurfaceOracle,
    patch: &PointCloud,
    n: usize,
    seed: u64,
) -> Result<PointCloud> {
    const ROUNDS: u64 = 8;
    let center = centroid(patch)?;
    let radius = patch
        .points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max)
        + 0.005;
    let mut kept = Vec::with_capacity(n);
    let mut rejected = Vec::new();
    for round in 0..ROUNDS {
        let draw = oracle.sample_surface(4 * n, derive_seed(seed, round));
        for p in draw.points {
            if (p - center).norm() <= radius {
                kept.push(p);
            } else {
                rejected.push(p);
            }
        }
        if kept.len() >= n {
            break;
        }
    }
    if kept.len() < n {
        rejected.sort_by(|a, b| (a - center).norm().total_cmp(&(b - center).norm()));
        kept.extend(rejected.into_iter().take(n - kept.len()));
    }
    kept.truncate(n);
    if kept.len() < n {
        return Err(Error::Input("surface oracle returned too few points".into()));
    }
    Ok(PointCloud::new(kept, patch.frame.clone()))
}
