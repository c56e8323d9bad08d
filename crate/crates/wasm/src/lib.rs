//! Browser bindings: render a synthetic panorama pair, estimate the pose
//! between them, and compare robust and plain fits on a corrupted series.
//!
//! Every function takes and returns plain numbers, strings and byte
//! vectors, so the same code runs in native tests.

use omnipose::cylinder::{CylinderModel, PanoramaImage};
use omnipose::error::Error;
use omnipose::pipeline::{estimate_pose, PipelineConfig};
use omnipose::report::{to_json, ErrorRecord, Fixed6, PoseRecord};
use omnipose::sinusoid::{fit, fit_least_squares, FitConfig, SinusoidParams};
use omnipose::synth::{make_texture, warp, RigidTransform, SceneDepth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const WIDTH: usize = omnipose::cylinder::DEFAULT_WIDTH;
pub const HEIGHT: usize = omnipose::cylinder::DEFAULT_HEIGHT;

fn model() -> CylinderModel {
    CylinderModel::new(WIDTH, HEIGHT).expect("default model is valid")
}

/// Scene depth as a multiple of the cylinder radius.
fn pair(
    seed: u32,
    rpy: [f64; 3],
    translation: [f64; 3],
    depth_radii: f64,
) -> Result<(PanoramaImage, PanoramaImage), Error> {
    let model = model();
    let base = make_texture(u64::from(seed), &model);
    let depth = SceneDepth::Constant(depth_radii * model.radius());
    depth.validate(&model)?;
    let t = RigidTransform::new(
        RigidTransform::from_euler(rpy[0], rpy[1], rpy[2]).rotation,
        translation,
    );
    let moved = warp(&base, &t, &depth)?;
    Ok((base, moved))
}

/// Grayscale panorama as RGBA bytes, `WIDTH`x`HEIGHT`. `frame` 0 is the
/// reference texture, anything else the moved view.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn panorama_rgba(
    seed: u32,
    roll: f64,
    pitch: f64,
    yaw: f64,
    tx: f64,
    ty: f64,
    tz: f64,
    depth_radii: f64,
    frame: u32,
) -> Vec<u8> {
    match pair(seed, [roll, pitch, yaw], [tx, ty, tz], depth_radii) {
        Ok((a, b)) => {
            let img = if frame == 0 { a } else { b };
            img.pixels
                .to_u8()
                .into_iter()
                .flat_map(|g| [g, g, g, 255])
                .collect()
        }
        Err(_) => Vec::new(),
    }
}

#[derive(Serialize)]
struct Sample {
    u_p: Fixed6,
    du: Fixed6,
    dv: Fixed6,
}

#[derive(Serialize)]
struct EstimateReport {
    pose: PoseRecord,
    raw: Vec<Sample>,
    filtered: Vec<Sample>,
    omega: Fixed6,
}

/// Renders the pair, runs the full estimator and returns a JSON report
/// holding the pose, fit diagnostics and both motion series. On failure
/// the JSON carries an `error` object instead.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn estimate_synthetic(
    seed: u32,
    roll: f64,
    pitch: f64,
    yaw: f64,
    tx: f64,
    ty: f64,
    tz: f64,
    depth_radii: f64,
) -> String {
    let run = || -> Result<String, Error> {
        let (a, b) = pair(seed, [roll, pitch, yaw], [tx, ty, tz], depth_radii)?;
        let config = PipelineConfig {
            sweep: omnipose::motionfield::SweepConfig {
                parallel: false,
                ..Default::default()
            },
            ..Default::default()
        };
        let est = estimate_pose(&a, &b, &config)?;
        let series = |f: &omnipose::motionfield::MotionField| {
            f.samples
                .iter()
                .map(|s| Sample {
                    u_p: s.u_p.into(),
                    du: s.du.into(),
                    dv: s.dv.into(),
                })
                .collect()
        };
        Ok(to_json(&EstimateReport {
            pose: PoseRecord::new(&est, None),
            raw: series(&est.raw),
            filtered: series(&est.filtered),
            omega: model().gamma().into(),
        }))
    };
    run().unwrap_or_else(|e| ErrorRecord::new(&e).to_json())
}

#[derive(Serialize)]
struct Curve {
    amplitude: Fixed6,
    phase: Fixed6,
    offset: Fixed6,
}

impl From<SinusoidParams> for Curve {
    fn from(p: SinusoidParams) -> Self {
        Self {
            amplitude: p.amplitude.into(),
            phase: p.phase.into(),
            offset: p.offset.into(),
        }
    }
}

#[derive(Serialize)]
struct FitComparison {
    omega: Fixed6,
    samples: Vec<[Fixed6; 2]>,
    outlier: Vec<bool>,
    truth: Curve,
    robust: Curve,
    least_squares: Curve,
}

/// Fifty samples of `B + A·sin(γu + φ)` with Gaussian noise of `noise` px,
/// a fraction of them replaced by ±`outlier_px` outliers, fitted with the
/// pseudo-Huber loss (scale `delta`) and with plain least squares.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn fit_comparison(
    seed: u32,
    amplitude: f64,
    phase: f64,
    offset: f64,
    noise: f64,
    outlier_fraction: f64,
    outlier_px: f64,
    delta: f64,
) -> String {
    let run = || -> Result<String, Error> {
        let omega = model().gamma();
        let truth = SinusoidParams::new(amplitude, phase, offset);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
        let n = 50;
        let mut outlier = vec![false; n];
        let mut samples: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let u = 55.0 + 20.0 * k as f64;
                let g: f64 = rng.sample(StandardNormal);
                (u, truth.eval(omega, u) + noise * g)
            })
            .collect();
        let count = ((outlier_fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = rng.random_range(i..n);
            idx.swap(i, j);
            let k = idx[i];
            samples[k].1 = if rng.random_bool(0.5) { outlier_px } else { -outlier_px };
            outlier[k] = true;
        }
        let robust = fit(
            &samples,
            omega,
            &FitConfig {
                delta,
                ..FitConfig::default()
            },
        )?;
        let l2 = fit_least_squares(&samples, omega)?;
        Ok(to_json(&FitComparison {
            omega: omega.into(),
            samples: samples.iter().map(|&(u, y)| [u.into(), y.into()]).collect(),
            outlier,
            truth: truth.canonical().into(),
            robust: robust.params.into(),
            least_squares: l2.into(),
        }))
    };
    run().unwrap_or_else(|e| ErrorRecord::new(&e).to_json())
}
