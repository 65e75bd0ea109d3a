//! Tracker sessions and seeded experiments.

use std::fs;
use std::path::{Path, PathBuf};

use pfloc_core::metrics::{aggregate, average_over_seeds, evaluate_step, RunSummary, StepMetric, TargetTruth, DEFAULT_WINDOW_M};
use pfloc_core::pf::{summarize, FilterParams};
use pfloc_core::simworld::run_scenario;
use pfloc_core::tracker::{FrameReport, Tracker, TrackerParams};
use pfloc_core::{BinaryMask, CameraIntrinsics, CameraPose, WorldPoint};
use rayon::prelude::*;

use crate::config::Scenario;
use crate::error::{HarnessError, IoContext};
use crate::pgm;
use crate::records::{
    write_csv, write_ndjson, write_truth, EstimateRecord, FrameMeta, PoseRecord, SeedRow, StepRow, SummaryRow,
};

/// Everything recorded for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub frame: u64,
    pub translation_m: f64,
    pub report: FrameReport,
    /// One per active track after the update, in id order.
    pub estimates: Vec<EstimateRecord>,
    /// Present when ground truth is known.
    pub metric: Option<StepMetric>,
}

impl StepRecord {
    pub fn row(&self) -> StepRow {
        let m = self.metric.as_ref();
        StepRow {
            frame: self.frame,
            translation_m: self.translation_m,
            active_tracks: self.estimates.len(),
            scored_tracks: m.map_or(0, |m| m.tracks.len()),
            rmse_m: m.and_then(StepMetric::rmse),
            rmse_particle_m: m.and_then(StepMetric::rmse_particle),
            nlpd: m.and_then(StepMetric::nlpd),
        }
    }
}

/// A tracker plus optional ground truth.
#[derive(Debug, Clone)]
pub struct Session {
    tracker: Tracker,
    truths: Option<Vec<TargetTruth>>,
}

impl Session {
    pub fn new(
        intrinsics: CameraIntrinsics,
        filter: FilterParams,
        params: TrackerParams,
        seed: u64,
        truths: Option<Vec<TargetTruth>>,
    ) -> Result<Self, HarnessError> {
        Ok(Self {
            tracker: Tracker::new(intrinsics, filter, params, seed)?,
            truths,
        })
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn step(
        &mut self,
        mask: &BinaryMask,
        pose: &CameraPose,
        frame: u64,
        translation_m: f64,
    ) -> Result<StepRecord, HarnessError> {
        let report = self.tracker.update_with(mask, pose, frame)?;
        let metric = self
            .truths
            .as_deref()
            .map(|truths| evaluate_step(translation_m, self.tracker.scored(frame), truths));
        let estimates = self
            .tracker
            .active()
            .filter_map(|t| t.particles().map(|ps| (t.id(), ps)))
            .map(|(track_id, ps)| {
                let post = summarize(ps);
                let scored = metric
                    .as_ref()
                    .and_then(|m| m.tracks.iter().find(|tm| tm.track_id == track_id));
                let c = &post.covariance;
                EstimateRecord {
                    frame,
                    translation_m,
                    track_id,
                    mean: [post.mean.x, post.mean.y, post.mean.z],
                    covariance: [0, 1, 2].map(|i| [c[(i, 0)], c[(i, 1)], c[(i, 2)]]),
                    target_id: scored.map(|tm| tm.target_id),
                    rmse_mean_dist_m: scored.map(|tm| tm.rmse_mean_dist_m),
                    rmse_particle_m: scored.map(|tm| tm.rmse_particle_m),
                    nlpd: scored.map(|tm| tm.nlpd),
                }
            })
            .collect();
        Ok(StepRecord {
            frame,
            translation_m,
            report,
            estimates,
            metric,
        })
    }
}

/// Final state of a track that is still active at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalTrack {
    pub id: u32,
    pub mean: WorldPoint,
    pub target_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
    pub final_tracks: Vec<FinalTrack>,
}

impl SeedRun {
    pub fn metrics(&self) -> Vec<StepMetric> {
        self.steps.iter().filter_map(|s| s.metric.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub runs: Vec<SeedRun>,
    pub summary: RunSummary,
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

pub fn frame_file_name(frame: u64) -> String {
    format!("{frame:06}.pgm")
}

/// Summarises a sequence of steps into per-run aggregates.
pub fn summarise_steps(steps: &[StepRecord]) -> RunSummary {
    let metrics: Vec<StepMetric> = steps.iter().filter_map(|s| s.metric.clone()).collect();
    aggregate(&metrics, DEFAULT_WINDOW_M)
}

/// Runs one seed of the scenario. With `out`, writes `seed_<n>/steps.csv`,
/// `seed_<n>/estimates.ndjson` and, if enabled, frame dumps.
pub fn run_seed(s: &Scenario, seed: u64, out: Option<&Path>) -> Result<SeedRun, HarnessError> {
    let truths = s.truths();
    let mut session = Session::new(s.world.intrinsics, s.filter, s.tracker, seed, Some(truths.clone()))?;

    let dir = out.map(|o| seed_dir(o, seed));
    let dump_dir = dir.as_ref().filter(|_| s.dump_frames).map(|d| d.join("frames"));
    if let Some(d) = dir.as_ref() {
        fs::create_dir_all(d).at(d)?;
    }
    if let Some(d) = dump_dir.as_ref() {
        fs::create_dir_all(d).at(d)?;
    }

    let mut steps = Vec::new();
    let mut metas = Vec::new();
    for frame in run_scenario(&s.world, seed) {
        if let Some(d) = dump_dir.as_ref() {
            if frame.index % s.dump_stride == 0 {
                let name = frame_file_name(frame.index);
                pgm::write_mask(&d.join(&name), &frame.mask)?;
                metas.push(FrameMeta {
                    frame: frame.index,
                    translation_m: frame.translation_m,
                    mask: format!("frames/{name}"),
                    reported_pose: PoseRecord::from(&frame.reported_pose),
                    true_pose: Some(PoseRecord::from(&frame.true_pose)),
                });
            }
        }
        steps.push(session.step(&frame.mask, &frame.reported_pose, frame.index, frame.translation_m)?);
    }

    let summary = summarise_steps(&steps);
    let final_tracks = session
        .tracker()
        .active()
        .filter_map(|t| t.particles().map(|ps| (t.id(), ps.mean())))
        .map(|(id, mean)| FinalTrack {
            id,
            mean,
            target_id: pfloc_core::metrics::nearest_target(&mean, &truths),
        })
        .collect();

    if let Some(d) = dir.as_ref() {
        write_step_outputs(d, &steps)?;
        if dump_dir.is_some() {
            write_ndjson(&d.join("frames.ndjson"), &metas)?;
        }
    }
    Ok(SeedRun {
        seed,
        steps,
        summary,
        final_tracks,
    })
}

/// `steps.csv` and `estimates.ndjson` for a sequence of steps.
pub fn write_step_outputs(dir: &Path, steps: &[StepRecord]) -> Result<(), HarnessError> {
    let rows: Vec<StepRow> = steps.iter().map(StepRecord::row).collect();
    write_csv(&dir.join("steps.csv"), &rows)?;
    let estimates: Vec<&EstimateRecord> = steps.iter().flat_map(|s| &s.estimates).collect();
    write_ndjson(&dir.join("estimates.ndjson"), &estimates)
}

/// Runs every seed, in parallel, and averages the per-seed aggregates.
pub fn run_experiment(s: &Scenario, out: Option<&Path>) -> Result<Experiment, HarnessError> {
    if let Some(o) = out {
        fs::create_dir_all(o).at(o)?;
    }
    let seeds: Vec<u64> = s.seeds().collect();
    let mut runs = seeds
        .par_iter()
        .map(|&seed| run_seed(s, seed, out))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| r.seed);
    let per_seed: Vec<(u64, RunSummary)> = runs.iter().map(|r| (r.seed, r.summary)).collect();
    let summary = average_over_seeds(&per_seed);

    if let Some(o) = out {
        let seed_rows: Vec<SeedRow> = runs
            .iter()
            .map(|r| SeedRow::new(r.seed, &r.summary, r.final_tracks.len()))
            .collect();
        write_csv(&o.join("seeds.csv"), &seed_rows)?;
        write_csv(&o.join("summary.csv"), &[summary_row(s, &summary)])?;
        write_truth(&o.join("truth.json"), &s.truths())?;
    }
    Ok(Experiment { runs, summary })
}

pub fn summary_row(s: &Scenario, summary: &RunSummary) -> SummaryRow {
    let n = &s.world.segmentation_noise;
    SummaryRow {
        n_t: s.world.targets.len(),
        max_nu_rot_deg: s.world.pose_noise.max_rot_deg,
        max_nu_t_m: s.world.pose_noise.max_trans_m,
        rho_fp: n.rho_fp,
        delta_rho_fp: n.delta_rho_fp,
        max_fp: n.max_fp,
        rho_fn: n.rho_fn,
        rho_pfn: n.rho_pfn,
        delta_rho_pfn: n.delta_rho_pfn,
        rmse_min_m: summary.rmse_min,
        rmse_200_1k_m: summary.rmse_window_mean,
        nlpd_min: summary.nlpd_min,
    }
}
