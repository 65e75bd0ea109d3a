//! Synthetic experiment generator: cuboid targets seen from a camera moving
//! along a straight line, rendered as convex-hull masks and corrupted by
//! persistent false-positive rectangles, partial false negatives and
//! whole-frame false negatives.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::error::ConfigError;
use crate::geometry::{
    discretise, perturb_pose, project_point, CameraIntrinsics, CameraPose, Pixel, PoseNoiseConfig,
    WorldPoint,
};
use crate::mask::{BinaryMask, PixelRect};
use crate::raster::{convex_hull, fill_hull};
use crate::rng::{stream, Purpose};

/// Axis-aligned box target that becomes visible once the camera has
/// travelled `appear_after_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuboidTarget {
    pub centre: WorldPoint,
    pub half_extents: Vector3<f64>,
    pub appear_after_m: f64,
}

impl CuboidTarget {
    pub fn cube(centre: WorldPoint, side_m: f64) -> Self {
        Self {
            centre,
            half_extents: Vector3::repeat(side_m * 0.5),
            appear_after_m: 0.0,
        }
    }

    pub fn appearing_after(mut self, metres: f64) -> Self {
        self.appear_after_m = metres;
        self
    }

    pub fn corners(&self) -> [WorldPoint; 8] {
        let h = self.half_extents;
        core::array::from_fn(|i| {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            self.centre + Vector3::new(sx * h.x, sy * h.y, sz * h.z)
        })
    }

    pub fn is_visible_at(&self, translation_m: f64) -> bool {
        self.appear_after_m <= translation_m
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !self.half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return Err(ConfigError::invalid("targets.half_extents", "must be positive"));
        }
        if !self.centre.coords.iter().all(|c| c.is_finite()) {
            return Err(ConfigError::invalid("targets.centre", "must be finite"));
        }
        if !(self.appear_after_m >= 0.0) {
            return Err(ConfigError::invalid("targets.appear_after_m", "must be >= 0"));
        }
        Ok(())
    }
}

/// Straight-line camera path sampled every `step_m` metres with a fixed
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub start: WorldPoint,
    pub end: WorldPoint,
    pub step_m: f64,
    pub camera_rotation: Matrix3<f64>,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Number of frames, including the one at the start position.
    pub fn frame_count(&self) -> usize {
        libm::floor(self.length() / self.step_m + 1e-9) as usize + 1
    }

    pub fn translation_at(&self, index: usize) -> f64 {
        index as f64 * self.step_m
    }

    pub fn pose_at(&self, index: usize) -> CameraPose {
        let dir = (self.end - self.start) / self.length();
        let centre = self.start + dir * self.translation_at(index);
        CameraPose::new(self.camera_rotation, centre).expect("validated trajectory")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.step_m > 0.0 && self.step_m.is_finite()) {
            return Err(ConfigError::invalid("trajectory.step_m", "must be positive"));
        }
        if !(self.length() > 0.0 && self.length().is_finite()) {
            return Err(ConfigError::invalid("trajectory.end", "must differ from start"));
        }
        if CameraPose::new(self.camera_rotation, self.start).is_err() {
            return Err(ConfigError::invalid("trajectory.rotation", "not a valid rotation"));
        }
        Ok(())
    }
}

/// Rates of the segmentation corruption processes. All probabilities are
/// per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationNoiseConfig {
    pub rho_fp: f64,
    pub delta_rho_fp: f64,
    pub max_fp: usize,
    pub rho_fn: f64,
    pub rho_pfn: f64,
    pub delta_rho_pfn: f64,
    /// Inclusive range of false-positive rectangle sides, pixels.
    pub fp_size_px: (u32, u32),
}

impl Default for SegmentationNoiseConfig {
    fn default() -> Self {
        Self {
            rho_fp: 0.0,
            delta_rho_fp: 0.0,
            max_fp: 0,
            rho_fn: 0.0,
            rho_pfn: 0.0,
            delta_rho_pfn: 0.0,
            fp_size_px: (5, 50),
        }
    }
}

impl SegmentationNoiseConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let probs = [
            (self.rho_fp, "segmentation_noise.rho_fp"),
            (self.delta_rho_fp, "segmentation_noise.delta_rho_fp"),
            (self.rho_fn, "segmentation_noise.rho_fn"),
            (self.rho_pfn, "segmentation_noise.rho_pfn"),
            (self.delta_rho_pfn, "segmentation_noise.delta_rho_pfn"),
        ];
        for (p, field) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::invalid(field, "must be a probability in [0, 1]"));
            }
        }
        let (lo, hi) = self.fp_size_px;
        if lo == 0 || lo > hi {
            return Err(ConfigError::invalid(
                "segmentation_noise.fp_size_px",
                "need 1 <= min <= max",
            ));
        }
        Ok(())
    }
}

/// Persistent partial false negative, re-anchored every frame to the
/// bounding box of the true segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialFalseNegative {
    pub frac_u: f64,
    pub frac_v: f64,
    /// 0: top-left, 1: top-right, 2: bottom-left, 3: bottom-right.
    pub corner: u8,
}

impl PartialFalseNegative {
    pub fn region(&self, bbox: &PixelRect) -> PixelRect {
        let w = libm::ceil(self.frac_u * bbox.width() as f64) as i64;
        let h = libm::ceil(self.frac_v * bbox.height() as f64) as i64;
        let (u0, u1) = if self.corner & 1 == 0 {
            (bbox.min.u, bbox.min.u + w - 1)
        } else {
            (bbox.max.u - w + 1, bbox.max.u)
        };
        let (v0, v1) = if self.corner & 2 == 0 {
            (bbox.min.v, bbox.min.v + h - 1)
        } else {
            (bbox.max.v - h + 1, bbox.max.v)
        };
        PixelRect::new(Pixel::new(u0, v0), Pixel::new(u1, v1))
    }
}

/// State of the persistent corruption processes between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRegistry {
    width: u32,
    height: u32,
    false_positives: Vec<PixelRect>,
    partial_fn: Option<PartialFalseNegative>,
}

impl NoiseRegistry {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            false_positives: Vec::new(),
            partial_fn: None,
        }
    }

    pub fn false_positives(&self) -> &[PixelRect] {
        &self.false_positives
    }

    pub fn partial_fn(&self) -> Option<&PartialFalseNegative> {
        self.partial_fn.as_ref()
    }

    fn paint_false_positives(&self, mask: &mut BinaryMask) {
        for r in &self.false_positives {
            mask.fill_rect(r, true);
        }
    }
}

/// Pixels of one target's convex-hull silhouette, or `None` when no corner
/// lies in front of the camera.
pub fn target_hull(
    target: &CuboidTarget,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<Vec<Pixel>> {
    let pts: Vec<Pixel> = target
        .corners()
        .iter()
        .filter_map(|c| project_point(c, intrinsics, pose))
        .map(discretise)
        .collect();
    (!pts.is_empty()).then(|| convex_hull(&pts))
}

/// Noise-free segmentation: the union of the filled convex hulls of every
/// visible target's projected corners.
pub fn render_truth_mask(
    targets: &[CuboidTarget],
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    translation_m: f64,
) -> BinaryMask {
    let mut mask = BinaryMask::new(intrinsics.width, intrinsics.height);
    for t in targets.iter().filter(|t| t.is_visible_at(translation_m)) {
        if let Some(hull) = target_hull(t, intrinsics, pose) {
            fill_hull(&mut mask, &hull);
        }
    }
    mask
}

fn draw<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    p > 0.0 && rng.random_bool(p)
}

/// Applies one frame of segmentation noise to `mask`.
///
/// A full false negative blanks the true segment but leaves the active
/// false-positive rectangles visible; the registry is not advanced on such a
/// frame. Otherwise existing false positives are dismissed, a new one may
/// spawn below the cap, the partial false negative is dismissed or spawned,
/// and the output is `(mask - partial region) | false positives`.
pub fn corrupt_mask<R: Rng + ?Sized>(
    mask: &BinaryMask,
    registry: &mut NoiseRegistry,
    cfg: &SegmentationNoiseConfig,
    rng: &mut R,
) -> BinaryMask {
    debug_assert_eq!((mask.width(), mask.height()), (registry.width, registry.height));
    if draw(rng, cfg.rho_fn) {
        let mut out = BinaryMask::new(mask.width(), mask.height());
        registry.paint_false_positives(&mut out);
        return out;
    }

    registry.false_positives.retain(|_| !draw(rng, cfg.delta_rho_fp));
    if registry.false_positives.len() < cfg.max_fp && draw(rng, cfg.rho_fp) {
        let (lo, hi) = cfg.fp_size_px;
        let w = rng.random_range(lo..=hi) as i64;
        let h = rng.random_range(lo..=hi) as i64;
        let u = rng.random_range(0..registry.width) as i64;
        let v = rng.random_range(0..registry.height) as i64;
        registry
            .false_positives
            .push(PixelRect::new(Pixel::new(u, v), Pixel::new(u + w - 1, v + h - 1)));
    }

    if registry.partial_fn.is_some() {
        if draw(rng, cfg.delta_rho_pfn) {
            registry.partial_fn = None;
        }
    } else if draw(rng, cfg.rho_pfn) {
        registry.partial_fn = Some(PartialFalseNegative {
            frac_u: rng.random_range(0.3..=0.7),
            frac_v: rng.random_range(0.3..=0.7),
            corner: rng.random_range(0..4u8),
        });
    }

    let mut out = mask.clone();
    if let (Some(pfn), Some(bbox)) = (registry.partial_fn, mask.bbox()) {
        out.fill_rect(&pfn.region(&bbox), false);
    }
    registry.paint_false_positives(&mut out);
    out
}

/// Everything needed to generate a synthetic frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub intrinsics: CameraIntrinsics,
    pub trajectory: Trajectory,
    pub targets: Vec<CuboidTarget>,
    pub pose_noise: PoseNoiseConfig,
    pub segmentation_noise: SegmentationNoiseConfig,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.trajectory.validate()?;
        for t in &self.targets {
            t.validate()?;
        }
        if PoseNoiseConfig::new(self.pose_noise.max_rot_deg, self.pose_noise.max_trans_m).is_err() {
            return Err(ConfigError::invalid("pose_noise", "bounds must be >= 0"));
        }
        self.segmentation_noise.validate()
    }
}

/// One observation step: where the camera really was, where it reports to
/// be, and the (possibly corrupted) segmentation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub index: u64,
    pub translation_m: f64,
    pub reported_pose: CameraPose,
    pub true_pose: CameraPose,
    pub mask: BinaryMask,
}

/// Frame generator for one seeded scenario run.
pub struct ScenarioRun<'a> {
    cfg: &'a WorldConfig,
    seed: u64,
    next: usize,
    frames: usize,
    registry: NoiseRegistry,
}

/// Generates one [`FrameRecord`] per trajectory step. Identical
/// `(cfg, seed)` pairs give identical streams.
pub fn run_scenario(cfg: &WorldConfig, seed: u64) -> ScenarioRun<'_> {
    ScenarioRun {
        cfg,
        seed,
        next: 0,
        frames: cfg.trajectory.frame_count(),
        registry: NoiseRegistry::new(cfg.intrinsics.width, cfg.intrinsics.height),
    }
}

impl ScenarioRun<'_> {
    pub fn registry(&self) -> &NoiseRegistry {
        &self.registry
    }
}

impl Iterator for ScenarioRun<'_> {
    type Item = FrameRecord;

    fn next(&mut self) -> Option<FrameRecord> {
        if self.next >= self.frames {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let cfg = self.cfg;
        let translation_m = cfg.trajectory.translation_at(i);
        let true_pose = cfg.trajectory.pose_at(i);
        let mut pose_rng = stream(self.seed, i as u64, Purpose::PoseNoise, 0);
        let reported_pose = perturb_pose(&true_pose, &cfg.pose_noise, &mut pose_rng);
        let truth = render_truth_mask(&cfg.targets, &cfg.intrinsics, &true_pose, translation_m);
        let mut seg_rng = stream(self.seed, i as u64, Purpose::SegmentationNoise, 0);
        let mask = corrupt_mask(&truth, &mut self.registry, &cfg.segmentation_noise, &mut seg_rng);
        Some(FrameRecord {
            index: i as u64,
            translation_m,
            reported_pose,
            true_pose,
            mask,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.frames - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for ScenarioRun<'_> {}
