//! Pairwise estimation: sweep, median filter, two robust fits, pose.

use crate::cylinder::PanoramaImage;
use crate::error::Result;
use crate::motionfield::{median_filter, sweep, MotionField, SweepConfig};
use crate::pose::{extract_pose, PoseEstimate};
use crate::sinusoid::{fit, FitConfig, FitReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub sweep: SweepConfig,
    /// Sliding-median width; `None` skips the filter.
    pub median: Option<usize>,
    pub fit: FitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sweep: SweepConfig::default(),
            median: Some(5),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimation {
    pub pose: PoseEstimate,
    pub raw: MotionField,
    pub filtered: MotionField,
    pub fit_u: FitReport,
    pub fit_v: FitReport,
}

/// Relative pose of `p2` with respect to `p1`. The panorama model of `p1`
/// sets the angular frequency of the fits.
pub fn estimate_pose(p1: &PanoramaImage, p2: &PanoramaImage, config: &PipelineConfig) -> Result<Estimation> {
    let raw = sweep(p1, p2, &config.sweep)?;
    let filtered = match config.median {
        Some(k) => median_filter(&raw, k)?,
        None => raw.clone(),
    };
    let (fit_u, fit_v) = fit_field(&filtered, p1.model.gamma(), &config.fit)?;
    let pose = extract_pose(&fit_v, &fit_u, &p1.model)?;
    Ok(Estimation {
        pose,
        raw,
        filtered,
        fit_u,
        fit_v,
    })
}

/// Fits the Δu and Δv series of a field.
pub fn fit_field(field: &MotionField, omega: f64, config: &FitConfig) -> Result<(FitReport, FitReport)> {
    let fit_u = fit(&field.du_series(), omega, config)?;
    let fit_v = fit(&field.dv_series(), omega, config)?;
    Ok((fit_u, fit_v))
}
