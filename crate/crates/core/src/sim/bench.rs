use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{base_pose, camera_pose, generate_scene, nominal_base, target_pixels, Scene, Template, MIN_VISIBLE_PIXELS};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::executor::{run_episode, FailureMode, Mode, TrialResult};
use crate::geometry::Pose;
use crate::seed::{derive_seed, rng};

pub const TEMPLATE_NAMES: [&str; 2] = ["drill", "bottle"];

const BASE_DISTANCE: [f64; 2] = [0.55, 0.95];
const BASE_HALF_ANGLE_DEG: f64 = 40.0;
/// Clearance between the base and the near table edge.
const TABLE_CLEARANCE: f64 = 0.10;
const STANCE_TRIES: u64 = 64;

/// Seeded initial stance on the `-x` side of the table, facing the target,
/// from which the target shows at least [`MIN_VISIBLE_PIXELS`].
pub fn sample_initial_base(scene: &Scene, config: &PipelineConfig, seed: u64) -> Result<Pose> {
    let target = scene.target()?;
    let t = target.pose.translation;
    let max_x = -(scene.table.extent[0] / 2.0 + TABLE_CLEARANCE);
    for attempt in 0..STANCE_TRIES {
        let mut r = rng(derive_seed(seed, attempt));
        let d = r.random_range(BASE_DISTANCE[0]..BASE_DISTANCE[1]);
        let a = r.random_range(-BASE_HALF_ANGLE_DEG..BASE_HALF_ANGLE_DEG).to_radians();
        let (x, y) = (t.x - d * a.cos(), t.y + d * a.sin());
        if x > max_x {
            continue;
        }
        let yaw = (t.y - y).atan2(t.x - x);
        let base = base_pose(x, y, yaw);
        let seen = target_pixels(scene, &target.id, &camera_pose(&base), &config.intrinsics)?;
        if seen >= MIN_VISIBLE_PIXELS {
            return Ok(base);
        }
    }
    let n = nominal_base();
    Ok(base_pose(n.translation.x, t.y, 0.0))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeTotals {
    pub trials: usize,
    pub successes: usize,
    pub fm1: usize,
    pub fm2: usize,
    pub fm3: usize,
    pub perception: usize,
}

impl ModeTotals {
    fn add(&mut self, r: &TrialResult) {
        self.trials += 1;
        match r.failure_mode {
            None => self.successes += 1,
            Some(FailureMode::Fm1Reachability) => self.fm1 += 1,
            Some(FailureMode::Fm2ApproachCollisionTarget) => self.fm2 += 1,
            Some(FailureMode::Fm3ApproachCollisionClutter) => self.fm3 += 1,
            Some(FailureMode::PerceptionFailure) => self.perception += 1,
        }
    }

    pub fn failures(&self) -> usize {
        self.trials - self.successes
    }

    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

/// One scene and stance, run once per mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub scenario: String,
    pub run: usize,
    pub scene_seed: u64,
    pub full: TrialResult,
    pub baseline: TrialResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResults {
    pub seed: u64,
    pub pairs: Vec<PairRecord>,
    pub full: ModeTotals,
    pub baseline: ModeTotals,
}

impl BenchmarkResults {
    /// Trials in pair order, full mode first within a pair.
    pub fn trials(&self) -> impl Iterator<Item = &TrialResult> {
        self.pairs.iter().flat_map(|p| [&p.full, &p.baseline])
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scenario", "run", "mode", "success", "failure_mode"])?;
        for t in self.trials() {
            let fm = t
                .failure_mode
                .map(|m| serde_json::to_value(m).map(|v| v.as_str().unwrap_or_default().to_string()))
                .transpose()?
                .unwrap_or_default();
            w.write_record([
                t.scenario.clone(),
                t.run.to_string(),
                t.mode.to_string(),
                t.success.to_string(),
                fm,
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Side-by-side per-run outcomes with success totals per mode.
    pub fn table(&self) -> String {
        let cell = |t: &TrialResult| match t.failure_mode {
            None => "Success".to_string(),
            Some(m) => format!("Failure ({m})"),
        };
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>4}  {:<22} {:<22}", "Scenario", "Run", "Our Method", "Baseline");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{:<10} {:>4}  {:<22} {:<22}",
                p.scenario,
                p.run,
                cell(&p.full),
                cell(&p.baseline)
            );
        }
        let total = |m: &ModeTotals| format!("{}/{} ({:.0}%)", m.successes, m.trials, 100.0 * m.success_rate());
        let _ = writeln!(
            out,
            "{:<15}  {:<22} {:<22}",
            "Total success rate",
            total(&self.full),
            total(&self.baseline)
        );
        out
    }
}

/// `pairs` seeded scenes per template, each run in full and baseline mode
/// from the same stance. Pairs run in parallel and merge in index order.
pub fn run_paired_benchmark(
    templates: &[Template],
    pairs: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<BenchmarkResults> {
    if pairs == 0 {
        return Err(Error::Parameter("benchmark needs at least one pair".into()));
    }
    config.validate()?;
    let jobs: Vec<(Template, usize)> = templates
        .iter()
        .flat_map(|&t| (0..pairs).map(move |j| (t, j)))
        .collect();
    let records: Vec<PairRecord> = jobs
        .par_iter()
        .map(|&(template, j)| {
            let pair_seed = derive_seed(derive_seed(seed, template as u64), j as u64);
            let scene_seed = derive_seed(pair_seed, 0);
            let scene = generate_scene(template, scene_seed);
            let base = sample_initial_base(&scene, config, derive_seed(pair_seed, 1))?;
            let episode_seed = derive_seed(pair_seed, 2);
            let run = |mode| -> Result<TrialResult> {
                let mut r = run_episode(&scene, template.target_id(), config, mode, episode_seed, &base)?.result;
                r.scenario = template.name().to_string();
                r.run = j + 1;
                Ok(r)
            };
            Ok(PairRecord {
                scenario: template.name().to_string(),
                run: j + 1,
                scene_seed,
                full: run(Mode::Full)?,
                baseline: run(Mode::Baseline)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut full = ModeTotals::default();
    let mut baseline = ModeTotals::default();
    for p in &records {
        full.add(&p.full);
        baseline.add(&p.baseline);
    }
    Ok(BenchmarkResults {
        seed,
        pairs: records,
        full,
        baseline,
    })
}
