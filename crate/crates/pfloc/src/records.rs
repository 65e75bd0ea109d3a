//! Serialised forms of poses, frames, estimates and metrics.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Matrix3;
use pfloc_core::metrics::{RunSummary, TargetTruth};
use pfloc_core::{CameraPose, WorldPoint};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext};

/// World-to-camera rotation (row-major rows) and camera centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub rotation: [[f64; 3]; 3],
    pub centre: [f64; 3],
}

impl From<&CameraPose> for PoseRecord {
    fn from(p: &CameraPose) -> Self {
        let r = p.rotation();
        let c = p.centre();
        Self {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            centre: [c.x, c.y, c.z],
        }
    }
}

impl PoseRecord {
    pub fn to_pose(&self) -> Option<CameraPose> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        let c = WorldPoint::new(self.centre[0], self.centre[1], self.centre[2]);
        CameraPose::new(r, c).ok()
    }
}

/// Metadata of one dumped frame; the mask is stored beside it as PGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameMeta {
    pub frame: u64,
    pub translation_m: f64,
    pub mask: String,
    pub reported_pose: PoseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_pose: Option<PoseRecord>,
}

/// Posterior of one active track after a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub frame: u64,
    pub translation_m: f64,
    pub track_id: u32,
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse_mean_dist_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse_particle_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlpd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub id: u32,
    pub centre: [f64; 3],
}

impl From<&TruthRecord> for TargetTruth {
    fn from(t: &TruthRecord) -> Self {
        TargetTruth {
            id: t.id,
            centre: WorldPoint::new(t.centre[0], t.centre[1], t.centre[2]),
        }
    }
}

impl From<&TargetTruth> for TruthRecord {
    fn from(t: &TargetTruth) -> Self {
        TruthRecord {
            id: t.id,
            centre: [t.centre.x, t.centre.y, t.centre.z],
        }
    }
}

/// One row of `steps.csv`. Metric columns are empty when no track was
/// scored on the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub frame: u64,
    pub translation_m: f64,
    pub active_tracks: usize,
    pub scored_tracks: usize,
    pub rmse_m: Option<f64>,
    pub rmse_particle_m: Option<f64>,
    pub nlpd: Option<f64>,
}

/// One row of `seeds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub rmse_min_m: Option<f64>,
    pub rmse_200_1k_m: Option<f64>,
    pub rmse_particle_min_m: Option<f64>,
    pub rmse_particle_200_1k_m: Option<f64>,
    pub nlpd_min: Option<f64>,
    pub final_active_tracks: usize,
}

impl SeedRow {
    pub fn new(seed: u64, s: &RunSummary, final_active_tracks: usize) -> Self {
        Self {
            seed,
            rmse_min_m: s.rmse_min,
            rmse_200_1k_m: s.rmse_window_mean,
            rmse_particle_min_m: s.rmse_particle_min,
            rmse_particle_200_1k_m: s.rmse_particle_window_mean,
            nlpd_min: s.nlpd_min,
            final_active_tracks,
        }
    }
}

/// The seed-averaged row of `summary.csv`, in the column order of the
/// published results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct SummaryRow {
    #[serde(rename = "N_T")]
    pub n_t: usize,
    pub max_nu_rot_deg: f64,
    pub max_nu_t_m: f64,
    pub rho_fp: f64,
    pub delta_rho_fp: f64,
    pub max_fp: usize,
    pub rho_fn: f64,
    pub rho_pfn: f64,
    pub delta_rho_pfn: f64,
    pub rmse_min_m: Option<f64>,
    #[serde(rename = "rmse_200_1k_m")]
    pub rmse_200_1k_m: Option<f64>,
    pub nlpd_min: Option<f64>,
}

pub const SUMMARY_HEADER: &str = "N_T,max_nu_rot_deg,max_nu_t_m,rho_fp,delta_rho_fp,max_fp,rho_fn,rho_pfn,delta_rho_pfn,rmse_min_m,rmse_200_1k_m,nlpd_min";

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let file = File::create(path).at(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().at(path)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = File::open(path).at(path)?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub fn write_ndjson<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let file = File::create(path).at(path)?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).expect("records serialise");
        w.write_all(b"\n").at(path)?;
    }
    w.flush().at(path)
}

/// Blank lines are skipped.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = File::open(path).at(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| HarnessError::bad_data(path, format!("line {}: {e}", i + 1)))?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_truth(path: &Path, truths: &[TargetTruth]) -> Result<(), HarnessError> {
    let records: Vec<TruthRecord> = truths.iter().map(TruthRecord::from).collect();
    let text = serde_json::to_string_pretty(&records).expect("truth serialises");
    fs::write(path, text + "\n").at(path)
}

pub fn read_truth(path: &Path) -> Result<Vec<TargetTruth>, HarnessError> {
    let text = fs::read_to_string(path).at(path)?;
    let records: Vec<TruthRecord> =
        serde_json::from_str(&text).map_err(|e| HarnessError::bad_data(path, e.to_string()))?;
    Ok(records.iter().map(TargetTruth::from).collect())
}
