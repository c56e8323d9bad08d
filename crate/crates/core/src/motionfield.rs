//! Sliding-window sweep over two panoramas.
//!
//! Window `k` covers columns `[k·d, k·d + L)` and rows
//! `[row_offset, row_offset + L)` of both panoramas; its registration gives
//! the column shift at the window center.

use std::fmt::Write as _;
use std::path::Path;

use crate::cylinder::PanoramaImage;
use crate::error::{Error, Result};
use crate::fmi::{RegistrationResult, Registrar};
use crate::image::write_atomic;

/// Fewest valid samples a field may hold.
pub const MIN_SAMPLES: usize = 8;

pub const CSV_HEADER: &str = "u_p,du,dv,rotation,scale,response";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    /// Window-center column.
    pub u_p: f64,
    pub du: f64,
    pub dv: f64,
    pub rotation: f64,
    pub scale: f64,
    pub response: f64,
}

impl MotionSample {
    fn is_finite(&self) -> bool {
        [self.u_p, self.du, self.dv, self.rotation, self.scale, self.response]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    pub samples: Vec<MotionSample>,
    pub window: usize,
    pub step: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Window side `L`.
    pub window: usize,
    /// Step `d` between window starts.
    pub step: usize,
    /// Let windows run across the column seam.
    pub wrap: bool,
    pub row_offset: usize,
    /// Samples with a weaker registration peak are dropped.
    pub min_response: f64,
    /// Register windows on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            window: 110,
            step: 20,
            wrap: false,
            row_offset: 0,
            min_response: 0.05,
            parallel: true,
        }
    }
}

impl SweepConfig {
    /// Window start columns for a panorama of width `w`.
    pub fn window_starts(&self, w: usize) -> Vec<usize> {
        let (l, d) = (self.window, self.step);
        if d == 0 {
            return Vec::new();
        }
        if self.wrap {
            (0..).map(|k| k * d).take_while(|&s| s < w).collect()
        } else {
            (0..).map(|k| k * d).take_while(|&s| s + l <= w).collect()
        }
    }
}

pub fn sweep(p1: &PanoramaImage, p2: &PanoramaImage, config: &SweepConfig) -> Result<MotionField> {
    let (w, h) = (p1.width(), p1.height());
    if p2.width() != w || p2.height() != h {
        return Err(Error::DimensionMismatch(format!(
            "panoramas are {w}x{h} and {}x{}",
            p2.width(),
            p2.height()
        )));
    }
    let l = config.window;
    if config.step == 0 {
        return Err(Error::InvalidArgument("step must be at least 1".into()));
    }
    if l == 0 || config.row_offset + l > h || l > w {
        return Err(Error::InvalidArgument(format!(
            "window {l} at row offset {} does not fit a {w}x{h} panorama",
            config.row_offset
        )));
    }
    let registrar = Registrar::new(l)?;
    let starts = config.window_starts(w);
    let register = |&start: &usize| -> Option<MotionSample> {
        let a = p1.pixels.crop(start, config.row_offset, l, l, config.wrap).ok()?;
        let b = p2.pixels.crop(start, config.row_offset, l, l, config.wrap).ok()?;
        let RegistrationResult {
            du,
            dv,
            rotation,
            scale,
            response,
        } = registrar.register(&a, &b).ok()?;
        let center = start as f64 + (l as f64 - 1.0) / 2.0;
        let sample = MotionSample {
            u_p: center.rem_euclid(w as f64),
            du,
            dv,
            rotation,
            scale,
            response,
        };
        (sample.is_finite() && response >= config.min_response).then_some(sample)
    };
    let registered: Vec<Option<MotionSample>> = run_ordered(&starts, register, config.parallel);
    let mut samples: Vec<MotionSample> = registered.into_iter().flatten().collect();
    // seam-crossing windows wrap their centers back to the front
    samples.sort_by(|a, b| a.u_p.total_cmp(&b.u_p));
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientMotionData {
            valid: samples.len(),
            required: MIN_SAMPLES,
        });
    }
    Ok(MotionField {
        samples,
        window: l,
        step: config.step,
        width: w,
        height: h,
    })
}

#[cfg(feature = "parallel")]
fn run_ordered<T, R, F>(items: &[T], f: F, parallel: bool) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_ordered<T, R, F>(items: &[T], f: F, _parallel: bool) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Sliding median of width `k` over the `du` and `dv` series, replicating
/// the end samples.
pub fn median_filter(field: &MotionField, k: usize) -> Result<MotionField> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "median width must be odd and at least 3, got {k}"
        )));
    }
    let n = field.samples.len();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "median width {k} exceeds {n} samples"
        )));
    }
    let du: Vec<f64> = field.samples.iter().map(|s| s.du).collect();
    let dv: Vec<f64> = field.samples.iter().map(|s| s.dv).collect();
    let du = sliding_median(&du, k);
    let dv = sliding_median(&dv, k);
    let samples = field
        .samples
        .iter()
        .zip(du.into_iter().zip(dv))
        .map(|(s, (du, dv))| MotionSample { du, dv, ..*s })
        .collect();
    Ok(MotionField {
        samples,
        ..field.clone()
    })
}

fn sliding_median(values: &[f64], k: usize) -> Vec<f64> {
    let half = (k / 2) as isize;
    let n = values.len() as isize;
    let mut window = Vec::with_capacity(k);
    (0..n)
        .map(|i| {
            window.clear();
            window.extend((i - half..=i + half).map(|j| values[j.clamp(0, n - 1) as usize]));
            window.sort_by(f64::total_cmp);
            window[k / 2]
        })
        .collect()
}

impl MotionField {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(u_p, Δu)` pairs.
    pub fn du_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.u_p, s.du)).collect()
    }

    /// `(u_p, Δv)` pairs.
    pub fn dv_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.u_p, s.dv)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                s.u_p, s.du, s.dv, s.rotation, s.scale, s.response
            );
        }
        out
    }

    /// Parses the CSV layout written by [`to_csv`](Self::to_csv). Window
    /// geometry is not stored there and must be supplied.
    pub fn from_csv(
        text: &str,
        window: usize,
        step: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some(CSV_HEADER) => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "expected header {CSV_HEADER:?}, got {other:?}"
                )))
            }
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidArgument(format!("row {}: bad number", i + 2)))?;
            let [u_p, du, dv, rotation, scale, response] = <[f64; 6]>::try_from(vals)
                .map_err(|_| Error::InvalidArgument(format!("row {}: expected 6 fields", i + 2)))?;
            samples.push(MotionSample {
                u_p,
                du,
                dv,
                rotation,
                scale,
                response,
            });
        }
        Ok(Self {
            samples,
            window,
            step,
            width,
            height,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}
