//! Localisation error metrics and their aggregation over runs and seeds.
//!
//! Particle sets are treated as equally weighted, which is what the filter
//! holds after every resampling step.

use alloc::vec::Vec;

use nalgebra::{Cholesky, Matrix3, Vector3};

use crate::geometry::WorldPoint;
use crate::pf::{summarize, ParticleSet};

/// Translation window for the headline mean, metres (inclusive).
pub const DEFAULT_WINDOW_M: (f64, f64) = (200.0, 1000.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    pub id: u32,
    pub centre: WorldPoint,
}

/// Root mean squared particle distance to `truth`: `sqrt(sum |p_i - m|^2 / N)`.
pub fn rmse_particle(ps: &ParticleSet, truth: &WorldPoint) -> f64 {
    let n = ps.len() as f64;
    let sum: f64 = ps
        .positions()
        .iter()
        .map(|p| (p - truth).norm_squared())
        .sum();
    libm::sqrt(sum / n)
}

/// Distance between the particle mean and `truth`.
pub fn rmse_mean_dist(ps: &ParticleSet, truth: &WorldPoint) -> f64 {
    (ps.mean() - truth).norm()
}

/// Negative log-density of `x` under `N(mean, cov)`. Returns infinity if
/// `cov` is not positive definite.
pub fn nlpd_gaussian(mean: &WorldPoint, cov: &Matrix3<f64>, x: &WorldPoint) -> f64 {
    let Some(chol) = Cholesky::new(*cov) else {
        return f64::INFINITY;
    };
    let delta: Vector3<f64> = x - mean;
    let solved = chol.solve(&delta);
    let l = chol.l();
    let log_det = 2.0 * (0..3).map(|i| libm::log(l[(i, i)])).sum::<f64>();
    0.5 * (3.0 * libm::log(2.0 * core::f64::consts::PI) + log_det + delta.dot(&solved))
}

/// NLPD of `truth` under the moment-matched Gaussian of the cloud, with the
/// covariance regularised by `1e-6 I`. Averaging the identical per-particle
/// terms reduces to a single density evaluation.
pub fn nlpd(ps: &ParticleSet, truth: &WorldPoint) -> f64 {
    let s = summarize(ps);
    nlpd_gaussian(&s.mean, &s.covariance, truth)
}

/// Nearest truth to `mean`; ties go to the lower target id.
pub fn nearest_target(mean: &WorldPoint, truths: &[TargetTruth]) -> Option<u32> {
    truths
        .iter()
        .map(|t| ((t.centre - mean).norm_squared(), t.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Maps each `(track id, mean)` to its nearest target. Several tracks may
/// share a target.
pub fn assign_tracks(
    means: &[(u32, WorldPoint)],
    truths: &[TargetTruth],
) -> Vec<(u32, u32)> {
    means
        .iter()
        .filter_map(|(track, mean)| nearest_target(mean, truths).map(|t| (*track, t)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackMetric {
    pub track_id: u32,
    pub target_id: u32,
    pub rmse_mean_dist_m: f64,
    pub rmse_particle_m: f64,
    pub nlpd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetric {
    pub translation_m: f64,
    pub tracks: Vec<TrackMetric>,
}

impl StepMetric {
    /// Mean over tracks of `f`, or `None` with no tracks.
    fn track_mean(&self, f: impl Fn(&TrackMetric) -> f64) -> Option<f64> {
        if self.tracks.is_empty() {
            return None;
        }
        Some(self.tracks.iter().map(f).sum::<f64>() / self.tracks.len() as f64)
    }

    /// Headline error of the step: mean over tracks of the mean distance.
    pub fn rmse(&self) -> Option<f64> {
        self.track_mean(|t| t.rmse_mean_dist_m)
    }

    pub fn rmse_particle(&self) -> Option<f64> {
        self.track_mean(|t| t.rmse_particle_m)
    }

    pub fn nlpd(&self) -> Option<f64> {
        self.track_mean(|t| t.nlpd)
    }
}

/// Scores every `(track id, particles)` pair against its nearest target.
pub fn evaluate_step<'a>(
    translation_m: f64,
    tracks: impl IntoIterator<Item = (u32, &'a ParticleSet)>,
    truths: &[TargetTruth],
) -> StepMetric {
    let tracks = tracks
        .into_iter()
        .filter_map(|(track_id, ps)| {
            let mean = ps.mean();
            let target_id = nearest_target(&mean, truths)?;
            let truth = truths.iter().find(|t| t.id == target_id)?.centre;
            Some(TrackMetric {
                track_id,
                target_id,
                rmse_mean_dist_m: (mean - truth).norm(),
                rmse_particle_m: rmse_particle(ps, &truth),
                nlpd: nlpd(ps, &truth),
            })
        })
        .collect();
    StepMetric {
        translation_m,
        tracks,
    }
}

/// Aggregates of one run. Fields are `None` when no step qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSummary {
    pub rmse_min: Option<f64>,
    pub rmse_window_mean: Option<f64>,
    pub rmse_particle_min: Option<f64>,
    pub rmse_particle_window_mean: Option<f64>,
    pub nlpd_min: Option<f64>,
}

fn min_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Minimum over steps with at least one track, and mean over steps whose
/// translation lies in `window` (inclusive).
pub fn aggregate(steps: &[StepMetric], window: (f64, f64)) -> RunSummary {
    let in_window = |s: &&StepMetric| s.translation_m >= window.0 && s.translation_m <= window.1;
    RunSummary {
        rmse_min: min_of(steps.iter().filter_map(StepMetric::rmse)),
        rmse_window_mean: mean_of(steps.iter().filter(in_window).filter_map(StepMetric::rmse)),
        rmse_particle_min: min_of(steps.iter().filter_map(StepMetric::rmse_particle)),
        rmse_particle_window_mean: mean_of(
            steps
                .iter()
                .filter(in_window)
                .filter_map(StepMetric::rmse_particle),
        ),
        nlpd_min: min_of(steps.iter().filter_map(StepMetric::nlpd)),
    }
}

/// Arithmetic mean across seeds of each field, over the seeds where it is
/// present. Runs are summed in seed order so the result does not depend on
/// the order they are passed in.
pub fn average_over_seeds(runs: &[(u64, RunSummary)]) -> RunSummary {
    let mut sorted: Vec<&(u64, RunSummary)> = runs.iter().collect();
    sorted.sort_by_key(|(seed, _)| *seed);
    let field = |f: fn(&RunSummary) -> Option<f64>| mean_of(sorted.iter().filter_map(|(_, r)| f(r)));
    RunSummary {
        rmse_min: field(|r| r.rmse_min),
        rmse_window_mean: field(|r| r.rmse_window_mean),
        rmse_particle_min: field(|r| r.rmse_particle_min),
        rmse_particle_window_mean: field(|r| r.rmse_particle_window_mean),
        nlpd_min: field(|r| r.nlpd_min),
    }
}
