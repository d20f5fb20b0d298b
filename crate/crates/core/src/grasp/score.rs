use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GraspCandidate;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Largest base-to-centroid or grasp-to-centroid distance the penalty bound
/// must dominate.
const COST_BOUND_DISTANCE: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub w_theta: f64,
    pub w_phi: f64,
    pub w_c: f64,
    pub r_max: f64,
    pub penalty_m: f64,
    /// World-z component of the approach axis above which the grasp counts
    /// as approaching from below.
    pub below_threshold: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            w_theta: 1.0,
            w_phi: 2.0,
            w_c: 5.0,
            r_max: 0.9,
            penalty_m: 1e6,
            below_threshold: 0.2,
        }
    }
}

impl CostWeights {
    /// Upper bound on the finite part of the cost.
    pub fn finite_bound(&self) -> f64 {
        self.w_theta * std::f64::consts::PI + self.w_phi + self.w_c * COST_BOUND_DISTANCE
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_theta, self.w_phi, self.w_c, self.r_max, self.penalty_m];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !self.below_threshold.is_finite() {
            return Err(Error::Config("cost weights must be finite and non-negative".into()));
        }
        if self.penalty_m < self.finite_bound() {
            return Err(Error::Config(format!(
                "reach penalty {} does not dominate the finite cost bound {}",
                self.penalty_m,
                self.finite_bound()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub delta_theta: f64,
    pub phi: u8,
    pub centroid_dist: f64,
    pub reach_dist: f64,
    pub total: f64,
}

/// Weighted cost of one candidate relative to a base position and the
/// target centroid.
pub fn score(candidate: &GraspCandidate, weights: &CostWeights, centroid: Vec3, base: Vec3) -> Result<ScoreBreakdown> {
    let heading = (centroid - base)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::DegenerateGeometry("base coincides with the target centroid".into()))?;
    let approach = candidate.approach();
    let delta_theta = heading.dot(&approach).clamp(-1.0, 1.0).acos();
    let phi = u8::from(approach.z > weights.below_threshold);
    let p = candidate.position();
    let centroid_dist = (p - centroid).norm();
    let reach_dist = (p - base).norm();
    let penalty = if reach_dist > weights.r_max { weights.penalty_m } else { 0.0 };
    let total = weights.w_theta * delta_theta.abs() + weights.w_phi * f64::from(phi) + weights.w_c * centroid_dist + penalty;
    Ok(ScoreBreakdown {
        delta_theta,
        phi,
        centroid_dist,
        reach_dist,
        total,
    })
}

pub fn score_all(
    candidates: &[GraspCandidate],
    weights: &CostWeights,
    centroid: Vec3,
    base: Vec3,
) -> Result<Vec<ScoreBreakdown>> {
    candidates
        .par_iter()
        .map(|c| score(c, weights, centroid, base))
        .collect()
}

/// Lowest-cost candidate; ties go to the earlier index.
pub fn select(
    candidates: &[GraspCandidate],
    weights: &CostWeights,
    centroid: Vec3,
    base: Vec3,
) -> Result<(usize, GraspCandidate, ScoreBreakdown)> {
    let scores = score_all(candidates, weights, centroid, base)?;
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s.total < scores[b].total) {
            best = Some(i);
        }
    }
    let i = best.ok_or(Error::NoFeasibleGrasp)?;
    Ok((i, candidates[i].clone(), scores[i].clone()))
}
