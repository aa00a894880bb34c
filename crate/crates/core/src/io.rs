//! Plot-ready CSV and JSON emission with matching readers.
//!
//! Every CSV has a header row; floats use the shortest representation that
//! parses back to the same value.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::string_stability_coefficient;
use crate::model::{linearize, IdmParams, ModelError, Vehicle};
use crate::optimize::ExperimentReport;
use crate::sim::{NormProfile, SweepResult, Trajectory};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let file = create(path)?;
    write_csv_to(BufWriter::new(file), rows).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv_to<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv_from(file).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv_from<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = BufWriter::new(create(path)?);
    let json_err = |source| IoError::Json {
        path: path.to_path_buf(),
        source,
    };
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|source| IoError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let file = File::open(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Long-format trajectory sample. `vehicle` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub vehicle: usize,
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
}

/// Every `stride`-th sample of every vehicle, time-major; the final sample
/// is always included.
pub fn trajectory_rows(traj: &Trajectory, stride: usize) -> Vec<TrajectoryRow> {
    let stride = stride.max(1);
    let len = traj.len();
    let mut ks: Vec<usize> = (0..len).step_by(stride).collect();
    if len > 0 && ks.last() != Some(&(len - 1)) {
        ks.push(len - 1);
    }
    let mut out = Vec::with_capacity(ks.len() * traj.vehicle_count());
    for k in ks {
        for n in 0..traj.vehicle_count() {
            out.push(TrajectoryRow {
                time: traj.time[k],
                vehicle: n + 1,
                position: traj.position[n][k],
                speed: traj.speed[n][k],
                accel: traj.accel[n][k],
            });
        }
    }
    out
}

/// Per-vehicle speed-perturbation norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub vehicle: usize,
    pub l2: f64,
    pub linf: f64,
}

pub fn norm_rows(profile: &NormProfile) -> Vec<NormRow> {
    profile
        .l2
        .iter()
        .zip(&profile.linf)
        .enumerate()
        .map(|(n, (&l2, &linf))| NormRow {
            vehicle: n + 1,
            l2,
            linf,
        })
        .collect()
}

pub fn profile_from_rows(rows: &[NormRow]) -> NormProfile {
    NormProfile {
        l2: rows.iter().map(|r| r.l2).collect(),
        linf: rows.iter().map(|r| r.linf).collect(),
    }
}

/// Norms of one amplitude of a nonlinear sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub vehicle: usize,
    pub l2: f64,
    pub linf: f64,
}

pub fn sweep_rows(results: &[SweepResult]) -> Vec<SweepRow> {
    results
        .iter()
        .flat_map(|r| {
            norm_rows(&r.profile).into_iter().map(|n| SweepRow {
                amplitude: r.amplitude,
                vehicle: n.vehicle,
                l2: n.l2,
                linf: n.linf,
            })
        })
        .collect()
}

/// One sampled or configured vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleRow {
    pub vehicle: usize,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub s0: f64,
    pub v_max: f64,
    pub length: f64,
    pub automated: bool,
    /// `S` at the chain equilibrium speed, when one is known.
    pub s: Option<f64>,
}

pub fn vehicle_rows(
    vehicles: &[Vehicle],
    v_eq: Option<f64>,
) -> Result<Vec<VehicleRow>, ModelError> {
    vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let p = &v.params;
            let s = v_eq
                .map(|v_eq| linearize(p, v_eq).map(string_stability_coefficient))
                .transpose()?;
            Ok(VehicleRow {
                vehicle: i + 1,
                a: p.accel,
                b: p.decel,
                t: p.headway,
                s0: p.min_gap,
                v_max: p.v_max,
                length: p.length,
                automated: v.automated,
                s,
            })
        })
        .collect()
}

impl VehicleRow {
    pub fn params(&self) -> IdmParams {
        IdmParams::new(self.a, self.b, self.t, self.s0)
            .with_v_max(self.v_max)
            .with_length(self.length)
    }
}

/// `S` at one `(a, T)` grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourRow {
    pub a: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub s: f64,
}

/// Mean and sample standard deviation of ℒ₂ across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub fraction: f64,
    pub vehicle: usize,
    pub mean_l2: f64,
    pub std_l2: f64,
}

pub fn profile_rows(report: &ExperimentReport, fractions: &[f64]) -> Vec<ProfileRow> {
    fractions
        .iter()
        .flat_map(|&fraction| {
            report.mean_profile(fraction).into_iter().enumerate().map(
                move |(n, (mean_l2, std_l2))| ProfileRow {
                    fraction,
                    vehicle: n + 1,
                    mean_l2,
                    std_l2,
                },
            )
        })
        .collect()
}

/// Tuning outcome of one automated vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvRow {
    pub seed: u64,
    pub fraction: f64,
    pub vehicle: usize,
    pub gamma_hat: Option<f64>,
    pub gamma_star: f64,
    pub value: f64,
}

pub fn av_rows(report: &ExperimentReport) -> Vec<AvRow> {
    report
        .cells
        .iter()
        .flat_map(|c| {
            c.outcomes.iter().map(|o| AvRow {
                seed: c.seed,
                fraction: c.fraction,
                vehicle: o.vehicle,
                gamma_hat: o.gamma_hat,
                gamma_star: o.gamma_star,
                value: o.value,
            })
        })
        .collect()
}
