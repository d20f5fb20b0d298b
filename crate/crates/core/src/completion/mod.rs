//! Two-stage completion of a partial object cloud.
//!
//! Stage one subsamples the observation to a fixed input budget and asks a
//! completer for a fixed-size synthetic cloud, which is concatenated with the
//! observation. Stage two cuts that merged cloud into overlapping fixed-size
//! patches, completes every patch independently and voxel-merges the result.
//!
//! Three completers share one contract: `identity` adds no geometry,
//! `mirror` applies a single-view symmetry prior, and `oracle` draws from a
//! ground-truth surface (simulation only).

mod completer;
mod patches;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sample, PointCloud, Vec3};
use crate::seed::derive_seed;

pub use completer::run_completer;
pub use patches::{patch_decompose, patch_decompose_or_fallback, refine_stage2, refine_stage2_raw, PatchSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompleterKind {
    Identity,
    Mirror,
    Oracle,
}

/// Completer selection and the fixed stage-one budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompleterSpec {
    pub kind: CompleterKind,
    pub input_size: usize,
    pub output_size: usize,
}

impl Default for CompleterSpec {
    fn default() -> Self {
        CompleterSpec {
            kind: CompleterKind::Oracle,
            input_size: 2048,
            output_size: 8192,
        }
    }
}

impl CompleterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.output_size == 0 {
            return Err(Error::Config("completer budgets must be at least 1".into()));
        }
        Ok(())
    }
}

/// Ground-truth surface sampler backing the oracle completer.
pub trait SurfaceOracle: Sync {
    fn sample_surface(&self, n: usize, seed: u64) -> PointCloud;
}

/// Runtime inputs a completer may need besides the cloud itself.
#[derive(Clone, Copy, Default)]
pub struct CompletionContext<'a> {
    /// Mean sensor position of the observation (mirror completer).
    pub view_origin: Option<Vec3>,
    pub oracle: Option<&'a dyn SurfaceOracle>,
}

/// Whether a completer sees the whole object or one local patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompletionStage {
    Object,
    Patch,
}

/// Subsamples `partial` to `input_size` points by farthest-point sampling and
/// returns exactly `output_size` synthetic points.
pub fn complete_stage1(
    partial: &PointCloud,
    spec: &CompleterSpec,
    ctx: &CompletionContext<'_>,
    seed: u64,
) -> Result<PointCloud> {
    spec.validate()?;
    if partial.is_empty() {
        return Err(Error::EmptyInput("completion of an empty partial cloud"));
    }
    let input = farthest_point_sample(partial, spec.input_size, derive_seed(seed, 1))?;
    run_completer(
        spec.kind,
        &input,
        spec.output_size,
        ctx,
        CompletionStage::Object,
        derive_seed(seed, 2),
    )
}

/// Multiset union of observed and synthetic points; no deduplication.
pub fn merge_mid(partial: &PointCloud, synthetic: &PointCloud) -> Result<PointCloud> {
    if partial.frame != synthetic.frame {
        return Err(Error::Frame {
            expected: partial.frame.to_string(),
            found: synthetic.frame.to_string(),
        });
    }
    let mut mid = partial.clone();
    mid.extend_from(synthetic);
    Ok(mid)
}
