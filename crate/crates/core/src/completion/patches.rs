use rayon::prelude::*;

use super::completer::resample;
use super::{run_completer, CompleterSpec, CompletionContext, CompletionStage};
use crate::error::{Error, Result};
use crate::geometry::{farthest_point_indices, voxel_downsample, KdIndex, PointCloud};
use crate::seed::derive_seed;

/// Overlapping fixed-size neighborhoods of a merged cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSet {
    /// The cloud the patches were cut from.
    pub source: PointCloud,
    pub patch_size: usize,
    pub patches: Vec<PointCloud>,
    /// Ascending indices into `source`, one list per patch.
    pub members: Vec<Vec<usize>>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// True when every source index belongs to at least one patch.
    pub fn covers_source(&self) -> bool {
        let mut seen = vec![false; self.source.len()];
        for m in &self.members {
            for &i in m {
                seen[i] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Cuts `mid` into `ceil(2·|mid| / patch_size)` nearest-neighbor patches
/// around farthest-point centers, adding centers at uncovered points until
/// every point belongs to some patch.
pub fn patch_decompose(mid: &PointCloud, patch_size: usize, seed: u64) -> Result<PatchSet> {
    if patch_size == 0 {
        return Err(Error::Parameter("patch size must be at least 1".into()));
    }
    if mid.len() < patch_size {
        return Err(Error::Size {
            needed: patch_size,
            got: mid.len(),
        });
    }
    let n_centers = (2 * mid.len()).div_ceil(patch_size);
    let centers = farthest_point_indices(&mid.points, n_centers, seed)?;
    let index = KdIndex::build(mid);
    let neighborhood = |center: usize| {
        let mut m: Vec<usize> = index
            .knn(&mid.points[center], patch_size)
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        m.sort_unstable();
        m
    };
    let mut members: Vec<Vec<usize>> = centers.par_iter().map(|&c| neighborhood(c)).collect();
    let mut covered = vec![false; mid.len()];
    for m in &members {
        for &i in m {
            covered[i] = true;
        }
    }
    let mut cursor = 0;
    while let Some(offset) = covered[cursor..].iter().position(|c| !c) {
        let center = cursor + offset;
        let m = neighborhood(center);
        for &i in &m {
            covered[i] = true;
        }
        members.push(m);
        cursor = center;
    }
    Ok(PatchSet {
        patches: members.iter().map(|m| mid.select(m)).collect(),
        source: mid.clone(),
        patch_size,
        members,
    })
}

/// [`patch_decompose`], or for an undersized cloud a single patch resampled
/// with repetition up to `patch_size`.
pub fn patch_decompose_or_fallback(mid: &PointCloud, patch_size: usize, seed: u64) -> Result<PatchSet> {
    match patch_decompose(mid, patch_size, seed) {
        Err(Error::Size { .. }) if !mid.is_empty() => {
            // `resample` keeps every index once before repeating any.
            let all: Vec<usize> = (0..mid.len()).collect();
            Ok(PatchSet {
                patches: vec![resample(mid, patch_size, seed)],
                source: mid.clone(),
                patch_size,
                members: vec![all],
            })
        }
        other => other,
    }
}

/// Completes each patch independently and returns `source ∪ outputs`
/// before any voxel merge, in patch order.
pub fn refine_stage2_raw(
    patches: &PatchSet,
    spec: &CompleterSpec,
    ctx: &CompletionContext<'_>,
    refine_budget: usize,
    seed: u64,
) -> Result<PointCloud> {
    if patches.is_empty() {
        return Err(Error::EmptyInput("refinement needs at least one patch"));
    }
    let outputs: Vec<PointCloud> = patches
        .patches
        .par_iter()
        .enumerate()
        .map(|(i, patch)| {
            run_completer(
                spec.kind,
                patch,
                refine_budget,
                ctx,
                CompletionStage::Patch,
                derive_seed(seed, i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let mut merged = patches.source.clone().without_normals();
    for out in &outputs {
        merged.points.extend_from_slice(&out.points);
    }
    Ok(merged)
}

/// Per-patch completion merged with the source cloud and voxel-filtered.
pub fn refine_stage2(
    patches: &PatchSet,
    spec: &CompleterSpec,
    ctx: &CompletionContext<'_>,
    refine_budget: usize,
    voxel: f64,
    seed: u64,
) -> Result<PointCloud> {
    voxel_downsample(&refine_stage2_raw(patches, spec, ctx, refine_budget, seed)?, voxel)
}
