//! Cylindrical camera model.
//!
//! A catadioptric omni image is unwrapped onto a cylinder of radius `r` and
//! height `H` around the camera's z-axis. Panorama column `u` is the azimuth
//! `u / r` measured from the camera x-axis (so the y-axis sits at
//! `u_max / 4`), and row `v` is the height `H/2 - z`. One full turn spans
//! exactly `u_max` columns, which fixes `r = u_max / 2π` and the per-pixel
//! opening angle `gamma = 1 / r`.

use std::f64::consts::TAU;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Panorama width used throughout the reference implementation.
pub const DEFAULT_WIDTH: usize = 1100;
/// Panorama height (and cylinder height in pixels).
pub const DEFAULT_HEIGHT: usize = 110;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderModel {
    u_max: usize,
    v_max: usize,
    aspect_ratio: f64,
}

impl Default for CylinderModel {
    fn default() -> Self {
        Self {
            u_max: DEFAULT_WIDTH,
            v_max: DEFAULT_HEIGHT,
            aspect_ratio: 1.0,
        }
    }
}

impl CylinderModel {
    pub fn new(u_max: usize, v_max: usize) -> Result<Self> {
        Self::with_aspect_ratio(u_max, v_max, 1.0)
    }

    /// `aspect_ratio` is the angle-per-pixel in v divided by the
    /// angle-per-pixel in u; 1.0 means square pixels.
    pub fn with_aspect_ratio(u_max: usize, v_max: usize, aspect_ratio: f64) -> Result<Self> {
        if u_max == 0 || v_max == 0 {
            return Err(Error::InvalidArgument(format!(
                "zero-size panorama {u_max}x{v_max}"
            )));
        }
        if !(aspect_ratio > 0.0 && aspect_ratio.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "aspect ratio must be positive, got {aspect_ratio}"
            )));
        }
        Ok(Self {
            u_max,
            v_max,
            aspect_ratio,
        })
    }

    /// Reads `u_max`, `v_max` and `aspect_ratio`, falling back to the
    /// defaults for missing keys.
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        Self::with_aspect_ratio(
            kv.get_or("u_max", DEFAULT_WIDTH)?,
            kv.get_or("v_max", DEFAULT_HEIGHT)?,
            kv.get_or("aspect_ratio", 1.0)?,
        )
    }

    #[inline]
    pub fn u_max(&self) -> usize {
        self.u_max
    }

    #[inline]
    pub fn v_max(&self) -> usize {
        self.v_max
    }

    /// Cylinder height in pixels.
    #[inline]
    pub fn height(&self) -> f64 {
        self.v_max as f64
    }

    #[inline]
    pub fn aspect_ratio(&self) -> f64 {
        self.aspect_ratio
    }

    /// Cylinder radius in pixels.
    #[inline]
    pub fn radius(&self) -> f64 {
        self.u_max as f64 / TAU
    }

    /// Opening angle of one pixel column, in radians.
    #[inline]
    pub fn gamma(&self) -> f64 {
        TAU / self.u_max as f64
    }

    /// Lifts a panorama pixel onto the cylinder surface.
    pub fn pano_to_cylinder(&self, u_p: f64, v_p: f64) -> [f64; 3] {
        let r = self.radius();
        let theta = u_p / r;
        let z = (self.height() / 2.0 - v_p) * self.aspect_ratio;
        [r * theta.cos(), r * theta.sin(), z]
    }

    /// Projects `p` centrally onto the cylinder and returns its panorama
    /// coordinates, with `u_p` in `[0, u_max)`.
    pub fn cylinder_to_pano(&self, p: [f64; 3]) -> Result<(f64, f64)> {
        let [x, y, z] = p;
        let rho = x.hypot(y);
        if !(rho > 0.0) || !rho.is_finite() || !z.is_finite() {
            return Err(Error::OnAxis);
        }
        let r = self.radius();
        let mut u = (r * y.atan2(x)).rem_euclid(self.u_max as f64);
        // rem_euclid can round up to the modulus itself
        if u >= self.u_max as f64 {
            u = 0.0;
        }
        let z_on_cylinder = z * r / rho;
        let v = self.height() / 2.0 - z_on_cylinder / self.aspect_ratio;
        Ok((u, v))
    }

    /// Signed column difference `a - b` folded into `(-u_max/2, u_max/2]`.
    pub fn wrap_column_delta(&self, delta: f64) -> f64 {
        let w = self.u_max as f64;
        let d = delta.rem_euclid(w);
        if d > w / 2.0 {
            d - w
        } else {
            d
        }
    }
}

/// Raw annular image from the catadioptric camera.
#[derive(Debug, Clone)]
pub struct OmniImage {
    pub pixels: GrayImage,
    pub center_u: f64,
    pub center_v: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl OmniImage {
    pub fn new(
        pixels: GrayImage,
        center_u: f64,
        center_v: f64,
        rho_min: f64,
        rho_max: f64,
    ) -> Result<Self> {
        if !(rho_min > 0.0 && rho_min < rho_max) {
            return Err(Error::InvalidArgument(format!(
                "annulus radii must satisfy 0 < rho_min < rho_max, got {rho_min}, {rho_max}"
            )));
        }
        let (w, h) = (pixels.width() as f64, pixels.height() as f64);
        if !(center_u >= 0.0 && center_u < w && center_v >= 0.0 && center_v < h) {
            return Err(Error::InvalidArgument(format!(
                "optical center ({center_u}, {center_v}) outside the image"
            )));
        }
        Ok(Self {
            pixels,
            center_u,
            center_v,
            rho_min,
            rho_max,
        })
    }

    /// Reads `center_u`, `center_v`, `rho_min`, `rho_max`; the center
    /// defaults to the image middle.
    pub fn from_config(pixels: GrayImage, kv: &KeyValues) -> Result<Self> {
        let cu = kv.get_or("center_u", (pixels.width() as f64 - 1.0) / 2.0)?;
        let cv = kv.get_or("center_v", (pixels.height() as f64 - 1.0) / 2.0)?;
        let rho_min = kv.require("rho_min")?;
        let rho_max = kv.require("rho_max")?;
        Self::new(pixels, cu, cv, rho_min, rho_max)
    }

    fn annulus_fits(&self) -> bool {
        let max_u = (self.pixels.width() - 1) as f64;
        let max_v = (self.pixels.height() - 1) as f64;
        self.center_u - self.rho_max >= 0.0
            && self.center_u + self.rho_max <= max_u
            && self.center_v - self.rho_max >= 0.0
            && self.center_v + self.rho_max <= max_v
    }
}

/// Unwrapped cylindrical panorama. Columns are cyclic.
#[derive(Debug, Clone, PartialEq)]
pub struct PanoramaImage {
    pub pixels: GrayImage,
    pub model: CylinderModel,
}

impl PanoramaImage {
    pub fn new(pixels: GrayImage, model: CylinderModel) -> Result<Self> {
        if pixels.width() != model.u_max() || pixels.height() != model.v_max() {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{}, model expects {}x{}",
                pixels.width(),
                pixels.height(),
                model.u_max(),
                model.v_max()
            )));
        }
        Ok(Self { pixels, model })
    }

    /// Wraps an image, deriving a square-pixel model from its dimensions.
    pub fn from_image(pixels: GrayImage) -> Result<Self> {
        let model = CylinderModel::new(pixels.width(), pixels.height())?;
        Self::new(pixels, model)
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    /// Pixel at a cyclic column index.
    pub fn get(&self, u: isize, v: usize) -> f64 {
        let w = self.width() as isize;
        self.pixels.get(u.rem_euclid(w) as usize, v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnwrapOptions {
    /// Map row 0 to the inner annulus radius instead of the outer one.
    pub flip_v: bool,
}

/// Cartesian-to-polar unwrapping with bilinear interpolation.
///
/// Panorama column `u` samples azimuth `gamma * u`, measured counterclockwise
/// in the displayed omni image from its +column direction; row 0 samples the
/// outer radius `rho_max` unless `flip_v` is set.
pub fn unwrap(omni: &OmniImage, model: &CylinderModel, opts: UnwrapOptions) -> Result<PanoramaImage> {
    if !omni.annulus_fits() {
        return Err(Error::AnnulusOutOfBounds);
    }
    let gamma = model.gamma();
    let span = omni.rho_max - omni.rho_min;
    let v_max = model.v_max() as f64;
    let pixels = GrayImage::from_fn(model.u_max(), model.v_max(), |u, v| {
        let frac = v as f64 / v_max;
        let rho = if opts.flip_v {
            omni.rho_min + frac * span
        } else {
            omni.rho_max - frac * span
        };
        let angle = gamma * u as f64;
        let x = omni.center_u + rho * angle.cos();
        let y = omni.center_v - rho * angle.sin();
        // annulus_fits guarantees the sample is inside; clamp only absorbs
        // rounding at the boundary
        omni.pixels
            .bilinear(
                x.clamp(0.0, (omni.pixels.width() - 1) as f64),
                y.clamp(0.0, (omni.pixels.height() - 1) as f64),
            )
            .unwrap_or(0.0)
    });
    PanoramaImage::new(pixels, *model)
}
