//! Exact-geometry synthetic data: procedural panoramas, warps under a rigid
//! transform, and closed-form column shifts.
//!
//! A [`RigidTransform`] `T = (R, t)` maps camera-2 coordinates to camera-1
//! coordinates, `P₁ = R·P₂ + t`. Warping renders frame 2 from frame 1: each
//! destination pixel is lifted to a scene point at the configured depth,
//! mapped through `T`, projected centrally onto the frame-1 cylinder and
//! sampled there.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::config::KeyValues;
use crate::cylinder::{CylinderModel, PanoramaImage};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::pose::RotationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    /// Pixels (cylinder units).
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(rotation: RotationMatrix, translation: [f64; 3]) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(RotationMatrix::from_euler(roll, pitch, yaw), [0.0; 3])
    }

    pub fn translation_only(t: [f64; 3]) -> Self {
        Self::new(RotationMatrix::identity(), t)
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let q = self.rotation.apply(p);
        [
            q[0] + self.translation[0],
            q[1] + self.translation[1],
            q[2] + self.translation[2],
        ]
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let t = rt.apply(self.translation);
        Self::new(rt, [-t[0], -t[1], -t[2]])
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(self.rotation * other.rotation, self.apply(other.translation))
    }

    /// `T^k` for `k ≥ 0`.
    pub fn power(&self, k: usize) -> Self {
        (0..k).fold(Self::identity(), |acc, _| acc.compose(self))
    }

    /// `(roll, pitch, yaw)` of the rotation block.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.rotation.to_euler()
    }
}

/// Distance of scene points from the camera axis, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneDepth {
    Constant(f64),
    /// One depth per panorama column, interpolated cyclically.
    PerColumn(Vec<f64>),
}

impl SceneDepth {
    /// Default scene: every point ten radii from the axis.
    pub fn default_for(model: &CylinderModel) -> Self {
        SceneDepth::Constant(10.0 * model.radius())
    }

    pub fn validate(&self, model: &CylinderModel) -> Result<()> {
        let r = model.radius();
        let ok = match self {
            SceneDepth::Constant(d) => *d > r && d.is_finite(),
            SceneDepth::PerColumn(v) => {
                v.len() == model.u_max() && v.iter().all(|d| *d > r && d.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "scene depth must exceed the cylinder radius {r:.3} (one value per column)"
            )))
        }
    }

    pub fn at(&self, u: f64) -> f64 {
        match self {
            SceneDepth::Constant(d) => *d,
            SceneDepth::PerColumn(v) => {
                let n = v.len();
                let x = u.rem_euclid(n as f64);
                let i = x.floor() as usize % n;
                let f = x - x.floor();
                v[i] * (1.0 - f) + v[(i + 1) % n] * f
            }
        }
    }
}

/// Deterministic band-limited random texture, cyclic in both axes, with
/// mean 128 and standard deviation 40.
pub fn make_texture(seed: u64, model: &CylinderModel) -> PanoramaImage {
    let (w, h) = (model.u_max(), model.v_max());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex<f64>> = (0..w * h)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    fft2_rect(&mut buf, w, h, &mut planner, false);
    // Gaussian low-pass, sigma in cycles per pixel
    let sigma = 0.08;
    for y in 0..h {
        let fy = signed_freq(y, h);
        for x in 0..w {
            let fx = signed_freq(x, w);
            let g = (-(fx * fx + fy * fy) / (2.0 * sigma * sigma)).exp();
            buf[y * w + x] *= g;
        }
    }
    buf[0] = Complex::new(0.0, 0.0);
    fft2_rect(&mut buf, w, h, &mut planner, true);
    let vals: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let data = vals
        .iter()
        .map(|v| 128.0 + 40.0 * (v - mean) / std.max(1e-300))
        .collect();
    let pixels = GrayImage::from_vec(w, h, data).expect("dimensions match");
    PanoramaImage::new(pixels, *model).expect("dimensions match")
}

fn signed_freq(i: usize, n: usize) -> f64 {
    let k = if i > n / 2 { i as f64 - n as f64 } else { i as f64 };
    k / n as f64
}

fn fft2_rect(buf: &mut [Complex<f64>], w: usize, h: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row.process(buf);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    if inverse {
        let s = 1.0 / (w * h) as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }
}

/// The frame seen after a camera yaw of `k·γ`: `out(u) = in(u + k)`.
pub fn yaw_columns(pano: &PanoramaImage, k: isize) -> PanoramaImage {
    let pixels = GrayImage::from_fn(pano.width(), pano.height(), |u, v| {
        pano.get(u as isize + k, v)
    });
    PanoramaImage::new(pixels, pano.model).expect("same dimensions")
}

/// Oracle resampler for single windows: content rotated by `rotation` and
/// magnified by `scale` about the window center, then shifted by
/// `(du, dv)`. Bilinear; samples outside are filled with the mean.
pub fn transform_window(win: &GrayImage, rotation: f64, scale: f64, du: f64, dv: f64) -> GrayImage {
    let (w, h) = (win.width(), win.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let fill = win.mean();
    let (s, c) = rotation.sin_cos();
    GrayImage::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx - du;
        let dy = y as f64 - cy - dv;
        // inverse similarity: R(−θ)/scale
        let sx = cx + (c * dx + s * dy) / scale;
        let sy = cy + (-s * dx + c * dy) / scale;
        win.bilinear(sx, sy).unwrap_or(fill)
    })
}

/// Where the frame-2 pixel `(u_p, v_p)` appears in frame 1, or `None` if the
/// ray becomes parallel to the axis.
pub fn source_position(
    t: &RigidTransform,
    u_p: f64,
    v_p: f64,
    depth: &SceneDepth,
    model: &CylinderModel,
) -> Option<(f64, f64)> {
    let on_cylinder = model.pano_to_cylinder(u_p, v_p);
    let k = depth.at(u_p) / model.radius();
    let scene = on_cylinder.map(|c| c * k);
    model.cylinder_to_pano(t.apply(scene)).ok()
}

/// Renders frame 2 from frame 1 and reports which pixels had a valid
/// source sample. Invalid pixels hold the mean intensity of `pano`.
pub fn warp_with_mask(
    pano: &PanoramaImage,
    t: &RigidTransform,
    depth: &SceneDepth,
) -> Result<(PanoramaImage, Vec<bool>)> {
    let model = pano.model;
    depth.validate(&model)?;
    let fill = pano.pixels.mean();
    let (w, h) = (pano.width(), pano.height());
    let mut mask = vec![false; w * h];
    let pixels = GrayImage::from_fn(w, h, |u, v| {
        let sample = source_position(t, u as f64, v as f64, depth, &model)
            .and_then(|(su, sv)| pano.pixels.bilinear_wrap_x(su, sv));
        match sample {
            Some(val) => {
                mask[v * w + u] = true;
                val
            }
            None => fill,
        }
    });
    Ok((PanoramaImage::new(pixels, model)?, mask))
}

pub fn warp(pano: &PanoramaImage, t: &RigidTransform, depth: &SceneDepth) -> Result<PanoramaImage> {
    Ok(warp_with_mask(pano, t, depth)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftModel {
    /// Exact projective geometry.
    #[default]
    Exact,
    /// First-order closed forms (the sinusoid motion model).
    SmallAngle,
}

/// Column shift `(Δu, Δv) = p₂ − p₁` at the horizon row `v = H/2`.
pub fn predicted_shift(
    t: &RigidTransform,
    u_p: f64,
    depth: &SceneDepth,
    model: &CylinderModel,
    mode: ShiftModel,
) -> (f64, f64) {
    predicted_shift_at(t, u_p, model.height() / 2.0, depth, model, mode)
}

/// Column shift at an arbitrary row. The small-angle model has no row
/// dependence.
pub fn predicted_shift_at(
    t: &RigidTransform,
    u_p: f64,
    v_p: f64,
    depth: &SceneDepth,
    model: &CylinderModel,
    mode: ShiftModel,
) -> (f64, f64) {
    match mode {
        ShiftModel::Exact => match source_position(t, u_p, v_p, depth, model) {
            Some((u1, v1)) => (model.wrap_column_delta(u_p - u1), v_p - v1),
            None => (f64::NAN, f64::NAN),
        },
        ShiftModel::SmallAngle => {
            let r = model.radius();
            let lambda = r / depth.at(u_p);
            let (roll, pitch, yaw) = t.euler();
            let [tx, ty, tz] = t.translation;
            let (s, c) = (u_p / r).sin_cos();
            let dv = lambda * tz + r * (roll * s - pitch * c);
            let du = -r * yaw + lambda * (tx * s - ty * c);
            (du, dv)
        }
    }
}

/// Δv of a pure roll `θ_x` written out in closed form, without any
/// small-angle simplification.
pub fn roll_shift_closed_form(theta_x: f64, u_p: f64, v_p: f64, model: &CylinderModel) -> f64 {
    let r = model.radius();
    let z = model.height() / 2.0 - v_p;
    let (s, c) = (u_p / r).sin_cos();
    let (st, ct) = theta_x.sin_cos();
    let num = r * (r * s * st + z * ct);
    let den = ((r * c).powi(2) + (r * s * ct - z * st).powi(2)).sqrt();
    num / den - z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeRow {
    pub theta: f64,
    /// `max_u |exact − θ·r·sin(u/r)| / (θ·r)` on the horizon row.
    pub horizon_rel_error: f64,
    /// Same maximum taken over every row of the panorama.
    pub full_height_rel_error: f64,
}

/// Discrepancy between the exact roll shift and its small-angle form.
pub fn approximation_envelope(thetas: &[f64], model: &CylinderModel) -> Vec<EnvelopeRow> {
    let r = model.radius();
    let horizon = model.height() / 2.0;
    thetas
        .iter()
        .map(|&theta| {
            let amp = theta.abs() * r;
            let mut horizon_err: f64 = 0.0;
            let mut full_err: f64 = 0.0;
            for u in 0..model.u_max() {
                let u = u as f64;
                let approx = theta * r * (u / r).sin();
                let e = (roll_shift_closed_form(theta, u, horizon, model) - approx).abs();
                horizon_err = horizon_err.max(e);
                for v in 0..=model.v_max() {
                    let e = (roll_shift_closed_form(theta, u, v as f64, model) - approx).abs();
                    full_err = full_err.max(e);
                }
            }
            EnvelopeRow {
                theta,
                horizon_rel_error: horizon_err / amp,
                full_height_rel_error: full_err / amp,
            }
        })
        .collect()
}

/// Parameters of a synthetic frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub model: CylinderModel,
    /// Motion between consecutive frames.
    pub transform: RigidTransform,
    pub depth: SceneDepth,
    pub frames: usize,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise: f64,
}

impl Scenario {
    /// Keys: `seed`, `u_max`, `v_max`, `axis` (`x,y,z`), `angle` (rad),
    /// `translation` (`tx,ty,tz` px), `depth` (px, default 10·r),
    /// `frames` (default 2), `noise` (default 0).
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        let model = CylinderModel::from_config(kv)?;
        let angle: f64 = kv.get_or("angle", 0.0)?;
        let axis = match kv.get_str("axis") {
            Some(s) => parse_vec3(s, "axis")?,
            None => [1.0, 0.0, 0.0],
        };
        let rotation = RotationMatrix::from_axis_angle(axis, angle)?;
        let translation = match kv.get_str("translation") {
            Some(s) => parse_vec3(s, "translation")?,
            None => [0.0; 3],
        };
        let depth = match kv.get::<f64>("depth")? {
            Some(d) => SceneDepth::Constant(d),
            None => SceneDepth::default_for(&model),
        };
        depth.validate(&model)?;
        let frames: usize = kv.get_or("frames", 2)?;
        if frames < 2 {
            return Err(Error::Config("frames must be at least 2".into()));
        }
        let noise: f64 = kv.get_or("noise", 0.0)?;
        if !(noise >= 0.0) {
            return Err(Error::Config("noise must be non-negative".into()));
        }
        Ok(Self {
            seed: kv.get_or("seed", 0)?,
            model,
            transform: RigidTransform::new(rotation, translation),
            depth,
            frames,
            noise,
        })
    }

    /// Frame `k` is the base texture warped by `T^k`.
    pub fn render(&self) -> Result<Vec<PanoramaImage>> {
        let base = make_texture(self.seed, &self.model);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        (0..self.frames)
            .map(|k| {
                let mut frame = if k == 0 {
                    base.clone()
                } else {
                    warp(&base, &self.transform.power(k), &self.depth)?
                };
                if self.noise > 0.0 {
                    for p in frame.pixels.data_mut() {
                        *p += self.noise * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                Ok(frame)
            })
            .collect()
    }
}

fn parse_vec3(s: &str, key: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("{key}: expected three comma-separated numbers")))?;
    <[f64; 3]>::try_from(parts)
        .map_err(|_| Error::Config(format!("{key}: expected three comma-separated numbers")))
}

/// Normalized cross-correlation of two equal-size images.
pub fn ncc(a: &GrayImage, b: &GrayImage) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    num / (da * db).sqrt()
}

/// Angle in `(-π, π]` of a planar vector, 0 for the zero vector.
pub fn planar_angle(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else {
        let a = y.atan2(x);
        if a <= -PI {
            a + 2.0 * PI
        } else {
            a
        }
    }
}
