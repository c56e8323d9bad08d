//! Trajectory scoring.

use std::path::Path;

use omnipose::error::{Error, Result};
use omnipose::pose::rmse;
use omnipose::report::Fixed6;
use serde::{Deserialize, Serialize};

/// Published office-scene roll RMSE of the original method, in radians.
pub const PUBLISHED_OFFICE_ROLL_RMSE: f64 = 0.054;

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    frame_a: String,
    frame_b: String,
    roll: Option<f64>,
    pitch: Option<f64>,
    yaw: Option<f64>,
    status: String,
    runtime_s: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    frame_a: Option<String>,
    frame_b: Option<String>,
    roll: f64,
    pitch: f64,
    yaw: f64,
}

#[derive(Debug, Serialize)]
pub struct Axes {
    pub roll: Fixed6,
    pub pitch: Fixed6,
    pub yaw: Fixed6,
}

#[derive(Debug, Serialize)]
pub struct Reference {
    pub published_office_roll_rmse: Fixed6,
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub pairs: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub rmse: Axes,
    pub mean_runtime_s: Option<Fixed6>,
    pub reference: Reference,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

pub fn run(trajectory: &Path, truth: &Path) -> Result<Metrics> {
    let est: Vec<TrajectoryRow> = read_rows(trajectory)?;
    let gt: Vec<TruthRow> = read_rows(truth)?;
    if est.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory has {} rows, truth has {}",
            est.len(),
            gt.len()
        )));
    }
    let mut e = Vec::new();
    let mut t = Vec::new();
    let mut runtimes = Vec::new();
    for (i, (row, truth)) in est.iter().zip(&gt).enumerate() {
        let named = |n: &Option<String>, m: &str| n.as_deref().is_none_or(|n| n == m);
        if !named(&truth.frame_a, &row.frame_a) || !named(&truth.frame_b, &row.frame_b) {
            return Err(Error::DimensionMismatch(format!(
                "row {}: trajectory pair {} -> {} does not match truth",
                i + 1,
                row.frame_a,
                row.frame_b
            )));
        }
        if let Some(rt) = row.runtime_s {
            runtimes.push(rt);
        }
        if row.status != "ok" {
            continue;
        }
        match (row.roll, row.pitch, row.yaw) {
            (Some(r), Some(p), Some(y)) => {
                e.push([r, p, y]);
                t.push([truth.roll, truth.pitch, truth.yaw]);
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "row {}: status ok but angles missing",
                    i + 1
                )))
            }
        }
    }
    let [roll, pitch, yaw] = rmse(&e, &t)?;
    Ok(Metrics {
        pairs: est.len(),
        evaluated: e.len(),
        failed: est.len() - e.len(),
        rmse: Axes {
            roll: roll.into(),
            pitch: pitch.into(),
            yaw: yaw.into(),
        },
        mean_runtime_s: (!runtimes.is_empty())
            .then(|| Fixed6(runtimes.iter().sum::<f64>() / runtimes.len() as f64)),
        reference: Reference {
            published_office_roll_rmse: PUBLISHED_OFFICE_ROLL_RMSE.into(),
        },
    })
}
