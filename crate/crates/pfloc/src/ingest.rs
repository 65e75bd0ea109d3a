//! Pre-segmented and raw image sequences on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pfloc_core::segmentation::{parse_pose_log, pose_from_entry, segment, SegmentParams};
use pfloc_core::{CameraPose, WorldPoint};
use rayon::prelude::*;

use crate::config::Scenario;
use crate::error::{HarnessError, IoContext};
use crate::pgm;
use crate::records::{read_ndjson, read_truth, FrameMeta};
use crate::run::{write_step_outputs, Session, StepRecord};

/// A pose aligned with a mask file.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedFrame {
    pub frame: u64,
    pub translation_m: f64,
    pub pose: CameraPose,
}

/// `NNNNNN.pgm` files in `dir`, keyed by frame index.
pub fn list_frames(dir: &Path) -> Result<BTreeMap<u64, PathBuf>, HarnessError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        if let Some(frame) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            out.insert(frame, path);
        }
    }
    Ok(out)
}

/// Indices of the first sample at or after each multiple of `step_m`.
/// Samples that skip several boundaries are used once.
pub fn select_by_translation(translations: &[f64], step_m: f64) -> Vec<usize> {
    let mut picked = Vec::new();
    let mut next = 0.0;
    for (i, &t) in translations.iter().enumerate() {
        if t >= next {
            picked.push(i);
            next = ((t / step_m).floor() + 1.0) * step_m;
        }
    }
    picked
}

/// Loads poses from either a frame-metadata dump (`.ndjson`) or a pose log
/// (`frame_id,x,y,z,roll,pitch,yaw`). Dumps are used as recorded. Log
/// translations are cumulative path lengths of the camera centres.
pub fn load_poses(path: &Path) -> Result<Vec<PosedFrame>, HarnessError> {
    if path.extension().and_then(|e| e.to_str()) == Some("ndjson") {
        let metas: Vec<FrameMeta> = read_ndjson(path)?;
        return metas
            .into_iter()
            .map(|m| {
                let pose = m.reported_pose.to_pose().ok_or_else(|| {
                    HarnessError::bad_data(path, format!("frame {}: invalid rotation", m.frame))
                })?;
                Ok(PosedFrame {
                    frame: m.frame,
                    translation_m: m.translation_m,
                    pose,
                })
            })
            .collect();
    }
    let text = fs::read_to_string(path).at(path)?;
    let entries = parse_pose_log(&text)?;
    let mut travelled = 0.0;
    let mut prev: Option<WorldPoint> = None;
    Ok(entries
        .iter()
        .map(|e| {
            if let Some(p) = prev {
                travelled += (e.centre - p).norm();
            }
            prev = Some(e.centre);
            PosedFrame {
                frame: e.frame_id,
                translation_m: travelled,
                pose: pose_from_entry(e),
            }
        })
        .collect())
}

/// Every pose needs a mask and every mask a pose. Reports the lowest
/// offending frame.
pub fn check_alignment(poses: &[PosedFrame], masks: &BTreeMap<u64, PathBuf>) -> Result<(), HarnessError> {
    let pose_ids: std::collections::BTreeSet<u64> = poses.iter().map(|p| p.frame).collect();
    let no_mask = pose_ids.iter().find(|f| !masks.contains_key(f)).copied();
    let no_pose = masks.keys().find(|f| !pose_ids.contains(f)).copied();
    match (no_mask, no_pose) {
        (Some(a), Some(b)) if b < a => Err(HarnessError::FrameMismatch { frame: b, what: "mask has no pose" }),
        (Some(a), _) => Err(HarnessError::FrameMismatch { frame: a, what: "pose has no mask" }),
        (None, Some(b)) => Err(HarnessError::FrameMismatch { frame: b, what: "mask has no pose" }),
        (None, None) => Ok(()),
    }
}

/// Runs the tracker over masks on disk. Pose logs are thinned to one frame
/// per `trajectory.step_m`; metadata dumps are replayed frame by frame.
/// Writes `steps.csv` and `estimates.ndjson` into `out`.
pub fn run_track(
    s: &Scenario,
    seed: u64,
    masks_dir: &Path,
    poses_path: &Path,
    truth_path: Option<&Path>,
    out: &Path,
) -> Result<Vec<StepRecord>, HarnessError> {
    let masks = list_frames(masks_dir)?;
    let poses = load_poses(poses_path)?;
    check_alignment(&poses, &masks)?;
    let is_log = poses_path.extension().and_then(|e| e.to_str()) != Some("ndjson");
    let selected: Vec<&PosedFrame> = if is_log {
        let t: Vec<f64> = poses.iter().map(|p| p.translation_m).collect();
        select_by_translation(&t, s.world.trajectory.step_m)
            .into_iter()
            .map(|i| &poses[i])
            .collect()
    } else {
        poses.iter().collect()
    };
    let truths = truth_path.map(read_truth).transpose()?;

    let k = s.world.intrinsics;
    let mut session = Session::new(k, s.filter, s.tracker, seed, truths)?;
    let mut steps = Vec::with_capacity(selected.len());
    for p in selected {
        let path = &masks[&p.frame];
        let mask = pgm::read_mask(path)?;
        if mask.width() != k.width || mask.height() != k.height {
            return Err(HarnessError::bad_data(
                path,
                format!("mask is {}x{}, camera is {}x{}", mask.width(), mask.height(), k.width, k.height),
            ));
        }
        steps.push(session.step(&mask, &p.pose, p.frame, p.translation_m)?);
    }
    fs::create_dir_all(out).at(out)?;
    write_step_outputs(out, &steps)?;
    Ok(steps)
}

/// Segments every `.pgm` in `images` into a mask of the same name in
/// `out`. Returns the number of frames written.
pub fn run_segment(images: &Path, params: &SegmentParams, out: &Path) -> Result<usize, HarnessError> {
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in fs::read_dir(images).at(images)? {
        let path = entry.at(images)?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("pgm") {
            files.push(path);
        }
    }
    files.sort();
    fs::create_dir_all(out).at(out)?;
    files.par_iter().try_for_each(|path| {
        let img = pgm::read(path)?;
        let mask = segment(&img, params).map_err(|e| HarnessError::bad_data(path, e.to_string()))?;
        pgm::write_mask(&out.join(path.file_name().expect("file")), &mask)
    })?;
    Ok(files.len())
}
