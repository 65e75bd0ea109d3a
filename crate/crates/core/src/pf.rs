//! Bootstrap particle filter for a single static 3D target observed through
//! binary masks.
//!
//! The filter is initialised from two back-projected rays, predicts with
//! isotropic Gaussian noise proportional to the camera-particle distance,
//! weights each particle by `exp(-d^2)` where `d` is the pixel distance from
//! its projection to the nearest positive pixel, and resamples
//! multinomially after every update.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ConfigError, FilterError};
use crate::geometry::{
    back_project_ray, discretise, ray_midpoint, CameraIntrinsics, CameraPose, Pixel, PixelPoint,
    WorldPoint,
};
use crate::mask::{BinaryMask, DistanceField};
use crate::simworld::FrameRecord;

/// Regularisation added to posterior covariances.
pub const COVARIANCE_JITTER: f64 = 1e-6;

/// Below this baseline two views cannot initialise a filter.
pub const MIN_BASELINE_M: f64 = 1.0;

/// `exp(-d2)` is exactly zero in f64 once `d2 >= 746`; 28 px clears that.
const WEIGHT_SUPPORT_PX: i64 = 28;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub n_particles: usize,
    /// Initial per-axis SD at `ref_distance_m`, metres.
    pub sd_init: f64,
    /// Consecutive observations required before initialisation.
    pub tau_min_obs: usize,
    /// Prediction SD per metre of camera-particle distance.
    pub pred_noise_coeff: f64,
    pub ref_distance_m: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            n_particles: 100_000,
            sd_init: 1000.0,
            tau_min_obs: 5,
            pred_noise_coeff: 0.001,
            ref_distance_m: 2000.0,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_particles < 1 {
            return Err(ConfigError::invalid("filter.n_particles", "must be >= 1"));
        }
        if !(self.sd_init > 0.0 && self.sd_init.is_finite()) {
            return Err(ConfigError::invalid("filter.sd_init", "must be positive"));
        }
        if self.tau_min_obs < 2 {
            return Err(ConfigError::invalid("filter.tau_min_obs", "must be >= 2"));
        }
        if !(self.pred_noise_coeff >= 0.0 && self.pred_noise_coeff.is_finite()) {
            return Err(ConfigError::invalid("filter.pred_noise_coeff", "must be >= 0"));
        }
        if !(self.ref_distance_m > 0.0 && self.ref_distance_m.is_finite()) {
            return Err(ConfigError::invalid("filter.ref_distance_m", "must be positive"));
        }
        Ok(())
    }
}

/// A camera pose and the image point where the target was seen from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub pose: CameraPose,
    pub centroid: PixelPoint,
}

/// Weighted 3D position hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    positions: Vec<WorldPoint>,
    weights: Vec<f64>,
    degenerate: bool,
}

impl ParticleSet {
    /// Equally weighted set.
    pub fn from_positions(positions: Vec<WorldPoint>) -> Self {
        let n = positions.len();
        Self {
            positions,
            weights: alloc::vec![1.0 / n as f64; n],
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[WorldPoint] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Set when the last weighting had to fall back to log-shifted weights.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn mean(&self) -> WorldPoint {
        let n = self.positions.len() as f64;
        let sum = self
            .positions
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        WorldPoint::from(sum / n)
    }

    /// Population covariance (divides by N), without regularisation.
    pub fn covariance(&self) -> Matrix3<f64> {
        let mean = self.mean();
        let n = self.positions.len() as f64;
        let mut cov = Matrix3::zeros();
        for p in &self.positions {
            let d = p - mean;
            cov += d * d.transpose();
        }
        cov / n
    }
}

/// Moment summary of an equally weighted particle set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: WorldPoint,
    /// Sample covariance plus `COVARIANCE_JITTER * I`.
    pub covariance: Matrix3<f64>,
}

pub fn summarize(ps: &ParticleSet) -> PosteriorSummary {
    PosteriorSummary {
        mean: ps.mean(),
        covariance: ps.covariance() + Matrix3::identity() * COVARIANCE_JITTER,
    }
}

/// Draws the initial particle cloud around the least-squares midpoint of the
/// two observation rays. The per-axis SD is `sd_init` scaled by the distance
/// from the midpoint to the second camera over `ref_distance_m`.
pub fn initialize<R: Rng + ?Sized>(
    first: &Observation,
    second: &Observation,
    intrinsics: &CameraIntrinsics,
    params: &FilterParams,
    rng: &mut R,
) -> Result<ParticleSet, FilterError> {
    let baseline = (first.pose.centre() - second.pose.centre()).norm();
    if !(baseline >= MIN_BASELINE_M) {
        return Err(FilterError::WeakBaseline);
    }
    for obs in [first, second] {
        let c = obs.centroid;
        let inside = c.u >= 0.0
            && c.v >= 0.0
            && c.u <= intrinsics.width as f64
            && c.v <= intrinsics.height as f64;
        if !inside {
            return Err(FilterError::CentroidOutsideFrame);
        }
    }
    let r1 = back_project_ray(first.centroid, intrinsics, &first.pose);
    let r2 = back_project_ray(second.centroid, intrinsics, &second.pose);
    let centre = ray_midpoint(&r1, &r2)?;
    let sd = params.sd_init * (centre - second.pose.centre()).norm() / params.ref_distance_m;
    let positions = (0..params.n_particles)
        .map(|_| centre + gaussian3(rng) * sd)
        .collect();
    Ok(ParticleSet::from_positions(positions))
}

#[inline]
fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

/// Displaces each particle by `N(0, (c * |p - camera|)^2 I)`. Weights are
/// left untouched.
pub fn predict<R: Rng + ?Sized>(
    ps: &mut ParticleSet,
    camera_centre: &WorldPoint,
    params: &FilterParams,
    rng: &mut R,
) {
    if params.pred_noise_coeff == 0.0 {
        return;
    }
    for p in ps.positions.iter_mut() {
        let sigma = params.pred_noise_coeff * (*p - camera_centre).norm();
        *p += gaussian3(rng) * sigma;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeighOutcome {
    Weighted,
    /// Every plain weight underflowed; log-shifted weights were used.
    Degenerate,
    /// No particle projects into the frame; all weights are zero.
    NoParticleInFrame,
}

/// Discretised in-frame projection of a particle.
#[inline]
pub fn project_particle(
    p: &WorldPoint,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<Pixel> {
    crate::geometry::project_point(p, intrinsics, pose)
        .filter(|px| px.u.is_finite() && px.v.is_finite())
        .map(discretise)
        .filter(|px| intrinsics.contains(*px))
}

/// Sets `w = exp(-d2)` for every particle, where `d2` is the squared pixel
/// distance from its discretised projection to the nearest positive pixel.
/// Particles behind the camera or outside the frame get zero.
///
/// When the weight sum underflows, weights are recomputed as
/// `exp(-(d2 - min d2))`, which preserves their ranking and gives the best
/// particle weight 1.
pub fn weigh(
    ps: &mut ParticleSet,
    mask: &BinaryMask,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<WeighOutcome, FilterError> {
    let field = DistanceField::around_seeds(mask, WEIGHT_SUPPORT_PX);
    if field.window().is_none() {
        return Err(FilterError::EmptyMask);
    }
    ps.degenerate = false;
    let mut sum = 0.0;
    let mut any_in_frame = false;
    for (p, w) in ps.positions.iter().zip(ps.weights.iter_mut()) {
        *w = match project_particle(p, intrinsics, pose) {
            Some(px) => {
                any_in_frame = true;
                // Outside the window the distance is at least 28 px.
                field.squared_distance(px).map_or(0.0, |d2| libm::exp(-d2))
            }
            None => 0.0,
        };
        sum += *w;
    }
    if sum >= f64::MIN_POSITIVE {
        return Ok(WeighOutcome::Weighted);
    }
    if !any_in_frame {
        return Ok(WeighOutcome::NoParticleInFrame);
    }

    let full = DistanceField::full(mask);
    let d2: Vec<Option<f64>> = ps
        .positions
        .iter()
        .map(|p| project_particle(p, intrinsics, pose).and_then(|px| full.squared_distance(px)))
        .collect();
    let min = d2.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    for (w, d) in ps.weights.iter_mut().zip(&d2) {
        *w = d.map_or(0.0, |d| libm::exp(-(d - min)));
    }
    ps.degenerate = true;
    Ok(WeighOutcome::Degenerate)
}

/// Multinomial resampling: `N` draws with replacement, probability
/// proportional to weight. Output weights are uniform.
///
/// Sorted uniforms come from normalised cumulative exponential spacings, so
/// the cumulative weights are walked once.
pub fn resample<R: Rng + ?Sized>(ps: &mut ParticleSet, rng: &mut R) -> Result<(), FilterError> {
    let n = ps.len();
    let total: f64 = ps.weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(FilterError::AllZeroWeights);
    }
    let mut spacings: Vec<f64> = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        acc += exp1(rng);
        spacings.push(acc);
    }
    let scale = total / (acc + exp1(rng));

    let mut out = Vec::with_capacity(n);
    let mut cdf = 0.0;
    let mut j = 0usize;
    let last_positive = ps.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    for s in spacings {
        let target = s * scale;
        while j < last_positive && cdf + ps.weights[j] <= target {
            cdf += ps.weights[j];
            j += 1;
        }
        out.push(ps.positions[j]);
    }
    ps.positions = out;
    let w = 1.0 / n as f64;
    ps.weights.iter_mut().for_each(|x| *x = w);
    Ok(())
}

#[inline]
fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // random::<f64>() is in [0, 1); 1 - u is in (0, 1].
    -libm::log(1.0 - rng.random::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Updated { degenerate: bool },
    /// Empty mask: prediction only.
    NoObservation,
    /// Nothing projected into the frame: prediction only.
    NoParticleInFrame,
}

/// One bootstrap cycle: predict, then weigh and resample if the mask has any
/// positive pixel.
pub fn step<R: Rng + ?Sized>(
    ps: &mut ParticleSet,
    frame: &FrameRecord,
    intrinsics: &CameraIntrinsics,
    params: &FilterParams,
    rng: &mut R,
) -> Result<StepOutcome, FilterError> {
    step_with_mask(ps, &frame.mask, &frame.reported_pose, intrinsics, params, rng)
}

pub fn step_with_mask<R: Rng + ?Sized>(
    ps: &mut ParticleSet,
    mask: &BinaryMask,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    params: &FilterParams,
    rng: &mut R,
) -> Result<StepOutcome, FilterError> {
    predict(ps, &pose.centre(), params, rng);
    if mask.is_empty() {
        return Ok(StepOutcome::NoObservation);
    }
    match weigh(ps, mask, intrinsics, pose)? {
        WeighOutcome::NoParticleInFrame => Ok(StepOutcome::NoParticleInFrame),
        outcome => {
            resample(ps, rng)?;
            Ok(StepOutcome::Updated {
                degenerate: outcome == WeighOutcome::Degenerate,
            })
        }
    }
}
