//! JSON scenario configuration.
//!
//! Every section is optional except `targets`; omitted fields take the
//! library defaults. Unknown fields are rejected.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use pfloc_core::geometry::PoseNoiseConfig;
use pfloc_core::metrics::TargetTruth;
use pfloc_core::pf::FilterParams;
use pfloc_core::segmentation::camera_to_world;
use pfloc_core::simworld::{CuboidTarget, SegmentationNoiseConfig, Trajectory, WorldConfig};
use pfloc_core::tracker::{TrackerMode, TrackerParams};
use pfloc_core::{CameraIntrinsics, WorldPoint};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub intrinsics: IntrinsicsConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    pub targets: Vec<TargetConfig>,
    #[serde(default)]
    pub pose_noise: PoseNoiseSection,
    #[serde(default)]
    pub segmentation_noise: SegmentationNoiseSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default = "one")]
    pub n_seeds: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for IntrinsicsConfig {
    fn default() -> Self {
        let k = CameraIntrinsics::full_hd();
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

/// Camera attitude, degrees. Zero looks along world +z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeDeg {
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub roll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub step_m: f64,
    #[serde(default)]
    pub attitude_deg: AttitudeDeg,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0, 0.0],
            end: [1000.0, 0.0, 0.0],
            step_m: 10.0,
            attitude_deg: AttitudeDeg::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub centre: [f64; 3],
    /// Full edge lengths along x, y, z.
    pub size_m: [f64; 3],
    #[serde(default)]
    pub appear_after_m: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseNoiseSection {
    #[serde(default)]
    pub max_rot_deg: f64,
    #[serde(default)]
    pub max_trans_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationNoiseSection {
    pub rho_fp: f64,
    pub delta_rho_fp: f64,
    pub max_fp: usize,
    pub rho_fn: f64,
    pub rho_pfn: f64,
    pub delta_rho_pfn: f64,
    pub fp_size_px: [u32; 2],
}

impl Default for SegmentationNoiseSection {
    fn default() -> Self {
        let d = SegmentationNoiseConfig::default();
        Self {
            rho_fp: d.rho_fp,
            delta_rho_fp: d.delta_rho_fp,
            max_fp: d.max_fp,
            rho_fn: d.rho_fn,
            rho_pfn: d.rho_pfn,
            delta_rho_pfn: d.delta_rho_pfn,
            fp_size_px: [d.fp_size_px.0, d.fp_size_px.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub n_particles: usize,
    pub sd_init: f64,
    pub tau_min_obs: usize,
    pub pred_noise_coeff: f64,
    pub ref_distance_m: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let d = FilterParams::default();
        Self {
            n_particles: d.n_particles,
            sd_init: d.sd_init,
            tau_min_obs: d.tau_min_obs,
            pred_noise_coeff: d.pred_noise_coeff,
            ref_distance_m: d.ref_distance_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Single,
    #[default]
    Multi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub mode: ModeName,
    pub theta_po_sd: f64,
    pub theta_po_floor_px: f64,
    pub n_dismiss: usize,
    pub n_fuse: usize,
    pub min_component_px: usize,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let d = TrackerParams::default();
        Self {
            mode: ModeName::Multi,
            theta_po_sd: d.theta_po_sd,
            theta_po_floor_px: d.theta_po_floor_px,
            n_dismiss: d.n_dismiss,
            n_fuse: d.n_fuse,
            min_component_px: d.min_component_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dump_frames: bool,
    pub dump_stride: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dump_frames: false,
            dump_stride: 1,
        }
    }
}

/// A validated configuration converted to library types.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: WorldConfig,
    pub filter: FilterParams,
    pub tracker: TrackerParams,
    pub n_seeds: u64,
    pub base_seed: u64,
    pub dump_frames: bool,
    pub dump_stride: u64,
}

impl Scenario {
    /// Seeds `base_seed .. base_seed + n_seeds`.
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.base_seed..self.base_seed + self.n_seeds
    }

    /// Ground truth for scoring; target ids are positions in the list.
    pub fn truths(&self) -> Vec<TargetTruth> {
        self.world
            .targets
            .iter()
            .enumerate()
            .map(|(i, t)| TargetTruth {
                id: i as u32,
                centre: t.centre,
            })
            .collect()
    }
}

fn point(a: [f64; 3]) -> WorldPoint {
    WorldPoint::new(a[0], a[1], a[2])
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).at(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, HarnessError> {
        let k = &self.intrinsics;
        CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)
            .map_err(|e| HarnessError::config("intrinsics", e.to_string()))
    }

    pub fn camera_rotation(&self) -> Matrix3<f64> {
        let a = self.trajectory.attitude_deg;
        camera_to_world(a.yaw, a.pitch, a.roll).transpose()
    }

    /// Checks every field and converts to library types.
    pub fn build(&self) -> Result<Scenario, HarnessError> {
        let intrinsics = self.intrinsics()?;
        let targets = self
            .targets
            .iter()
            .map(|t| {
                let half = Vector3::from(t.size_m) * 0.5;
                CuboidTarget {
                    centre: point(t.centre),
                    half_extents: half,
                    appear_after_m: t.appear_after_m,
                }
            })
            .collect::<Vec<_>>();
        if targets.is_empty() {
            return Err(HarnessError::config("targets", "need at least one target"));
        }
        let s = &self.segmentation_noise;
        let world = WorldConfig {
            intrinsics,
            trajectory: Trajectory {
                start: point(self.trajectory.start),
                end: point(self.trajectory.end),
                step_m: self.trajectory.step_m,
                camera_rotation: self.camera_rotation(),
            },
            targets,
            pose_noise: PoseNoiseConfig {
                max_rot_deg: self.pose_noise.max_rot_deg,
                max_trans_m: self.pose_noise.max_trans_m,
            },
            segmentation_noise: SegmentationNoiseConfig {
                rho_fp: s.rho_fp,
                delta_rho_fp: s.delta_rho_fp,
                max_fp: s.max_fp,
                rho_fn: s.rho_fn,
                rho_pfn: s.rho_pfn,
                delta_rho_pfn: s.delta_rho_pfn,
                fp_size_px: (s.fp_size_px[0], s.fp_size_px[1]),
            },
        };
        world.validate()?;

        let f = &self.filter;
        let filter = FilterParams {
            n_particles: f.n_particles,
            sd_init: f.sd_init,
            tau_min_obs: f.tau_min_obs,
            pred_noise_coeff: f.pred_noise_coeff,
            ref_distance_m: f.ref_distance_m,
        };
        filter.validate()?;

        let t = &self.tracker;
        let tracker = TrackerParams {
            mode: match t.mode {
                ModeName::Single => TrackerMode::Single,
                ModeName::Multi => TrackerMode::Multi,
            },
            theta_po_sd: t.theta_po_sd,
            theta_po_floor_px: t.theta_po_floor_px,
            n_dismiss: t.n_dismiss,
            n_fuse: t.n_fuse,
            tau_min_obs: f.tau_min_obs,
            min_component_px: t.min_component_px,
        };
        tracker.validate()?;

        if self.n_seeds < 1 {
            return Err(HarnessError::config("n_seeds", "must be >= 1"));
        }
        if self.base_seed.checked_add(self.n_seeds).is_none() {
            return Err(HarnessError::config("base_seed", "seed range overflows"));
        }
        if self.output.dump_stride < 1 {
            return Err(HarnessError::config("output.dump_stride", "must be >= 1"));
        }
        Ok(Scenario {
            world,
            filter,
            tracker,
            n_seeds: self.n_seeds,
            base_seed: self.base_seed,
            dump_frames: self.output.dump_frames,
            dump_stride: self.output.dump_stride,
        })
    }
}
