//! Fourier-Mellin registration of two equal-size square windows.
//!
//! Translation comes from phase correlation of Hann-apodized windows.
//! Rotation and scale come from phase correlation of the high-pass filtered
//! magnitude spectra after log-polar resampling, where a rotation becomes a
//! shift along the angle axis and a scaling a shift along the log-radius
//! axis. The magnitude spectrum is point symmetric, so the rotation is only
//! known modulo π; both candidates are tried and the one whose translation
//! stage correlates better wins.
//!
//! Conventions: a window is indexed `(column, row)`; a positive shift
//! `(du, dv)` means the content of `b` sits at larger column/row indices than
//! in `a`; a positive rotation turns content from the +column axis toward
//! the +row axis; `scale > 1` means `b` is magnified relative to `a`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Scales outside this range are reported with zero response.
pub const SCALE_RANGE: (f64, f64) = (0.5, 2.0);

/// Width in pixels of the Gaussian the correlation peak is shaped into.
pub const PEAK_SIGMA: f64 = 1.0;

/// Re-correlation passes after the first translation estimate.
const REFINE_PASSES: usize = 2;

/// Peak of a phase-correlation surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShift {
    pub du: f64,
    pub dv: f64,
    /// Normalized peak height in `[0, 1]`.
    pub response: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationResult {
    pub du: f64,
    pub dv: f64,
    /// Radians.
    pub rotation: f64,
    pub scale: f64,
    pub response: f64,
}

/// Registration engine for one window size. Holds shareable FFT plans, so a
/// single instance can serve any number of threads.
#[derive(Clone)]
pub struct Registrar {
    side: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    hann: Vec<f64>,
    hann_n: Vec<f64>,
    highpass: Vec<f64>,
    peak_weight: Vec<f64>,
}

impl std::fmt::Debug for Registrar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registrar")
            .field("side", &self.side)
            .field("n", &self.n)
            .finish()
    }
}

type Spectrum = Vec<Complex<f64>>;

impl Registrar {
    /// Engine for `side`x`side` windows. Windows are zero-padded to the next
    /// power of two after apodization.
    pub fn new(side: usize) -> Result<Self> {
        if side < 8 {
            return Err(Error::InvalidArgument(format!(
                "window side {side} is too small to register"
            )));
        }
        let n = side.next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft(n, FftDirection::Forward);
        let inverse = planner.plan_fft(n, FftDirection::Inverse);
        Ok(Self {
            side,
            n,
            forward,
            inverse,
            hann: hann(side),
            hann_n: hann(n),
            highpass: highpass(n),
            peak_weight: gaussian_peak_weight(n, PEAK_SIGMA),
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Padded FFT size.
    pub fn fft_size(&self) -> usize {
        self.n
    }

    fn check(&self, a: &GrayImage, b: &GrayImage) -> Result<()> {
        for w in [a, b] {
            if w.width() != self.side || w.height() != self.side {
                return Err(Error::DimensionMismatch(format!(
                    "expected {s}x{s} window, got {}x{}",
                    w.width(),
                    w.height(),
                    s = self.side
                )));
            }
        }
        Ok(())
    }

    /// Demeaned, apodized, zero-padded spectrum of a window.
    fn spectrum(&self, w: &GrayImage) -> Result<Spectrum> {
        let (side, n) = (self.side, self.n);
        let mean = w.mean();
        let mut buf = vec![Complex::new(0.0, 0.0); n * n];
        let mut energy = 0.0;
        for y in 0..side {
            for x in 0..side {
                let v = (w.get(x, y) - mean) * self.hann[x] * self.hann[y];
                energy += v * v;
                buf[y * n + x] = Complex::new(v, 0.0);
            }
        }
        if !energy.is_finite() {
            return Err(Error::InvalidArgument("non-finite window".into()));
        }
        if energy < 1e-9 {
            return Err(Error::DegenerateWindow);
        }
        fft2(&mut buf, n, &*self.forward);
        Ok(buf)
    }

    /// Normalized cross-power correlation of two spectra.
    fn correlate_spectra(&self, fa: &[Complex<f64>], fb: &[Complex<f64>]) -> Result<PhaseShift> {
        let n = self.n;
        let mut cross: Spectrum = fa
            .iter()
            .zip(fb)
            .map(|(a, b)| b * a.conj())
            .collect();
        let peak_mag = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(peak_mag > 0.0) {
            return Err(Error::DegenerateWindow);
        }
        let floor = peak_mag * 1e-12;
        let mut norm = 0.0;
        for (c, &g) in cross.iter_mut().zip(&self.peak_weight) {
            let m = c.norm();
            if m > floor {
                *c *= g / m;
                norm += g;
            } else {
                *c = Complex::new(0.0, 0.0);
            }
        }
        if !(norm > 0.0) {
            return Err(Error::DegenerateWindow);
        }
        fft2(&mut cross, n, &*self.inverse);
        let surface: Vec<f64> = cross.iter().map(|c| c.re / norm).collect();
        Ok(peak(&surface, n))
    }

    /// Translation-only phase correlation.
    pub fn phase_correlate(&self, a: &GrayImage, b: &GrayImage) -> Result<PhaseShift> {
        self.check(a, b)?;
        let fa = self.spectrum(a)?;
        let fb = self.spectrum(b)?;
        self.correlate_spectra(&fa, &fb)
    }

    /// Full translation, rotation and scale registration.
    pub fn register(&self, a: &GrayImage, b: &GrayImage) -> Result<RegistrationResult> {
        self.check(a, b)?;
        let fa = self.spectrum(a)?;
        let fb = self.spectrum(b)?;

        let lp_a = self.log_polar(&fa);
        let lp_b = self.log_polar(&fb);
        let rs = self.correlate_log_polar(&lp_a, &lp_b)?;
        let n = self.n as f64;
        // rows of the log-polar image are angle bins over [0, π)
        let rotation = rs.dv * PI / n;
        let scale = (-rs.du * self.log_radius_step()).exp();

        let mut best: Option<(RegistrationResult, f64)> = None;
        for candidate in [rotation, wrap_half_turn(rotation + PI)] {
            let b_aligned = unrotate(b, candidate, scale, (0.0, 0.0));
            let fb_aligned = match self.spectrum(&b_aligned) {
                Ok(f) => f,
                Err(Error::DegenerateWindow) => continue,
                Err(e) => return Err(e),
            };
            let mut t = self.correlate_spectra(&fa, &fb_aligned)?;
            // windowing the same region of both inputs pulls the peak toward
            // zero; re-correlating after undoing the shift leaves only a
            // residual small enough for that pull to vanish
            for _ in 0..REFINE_PASSES {
                let shifted = unrotate(b, candidate, scale, (t.du, t.dv));
                let Ok(fs) = self.spectrum(&shifted) else { break };
                let r = self.correlate_spectra(&fa, &fs)?;
                if r.du.abs() > 1.0 || r.dv.abs() > 1.0 {
                    break;
                }
                t.du += r.du;
                t.dv += r.dv;
            }
            // map the residual shift back through the similarity
            let (s, c) = candidate.sin_cos();
            let du = scale * (c * t.du - s * t.dv);
            let dv = scale * (s * t.du + c * t.dv);
            let result = RegistrationResult {
                du,
                dv,
                rotation: candidate,
                scale,
                response: t.response.min(rs.response),
            };
            if best.as_ref().is_none_or(|(_, r)| t.response > *r) {
                best = Some((result, t.response));
            }
        }
        let (mut result, _) = best.ok_or(Error::DegenerateWindow)?;
        if !(SCALE_RANGE.0..=SCALE_RANGE.1).contains(&result.scale) {
            result.response = 0.0;
        }
        Ok(result)
    }

    fn log_radius_step(&self) -> f64 {
        let max_radius = self.n as f64 / 2.0;
        max_radius.ln() / (self.n as f64 - 1.0)
    }

    /// High-pass filtered magnitude spectrum resampled to a log-polar grid:
    /// rows are angles in `[0, π)`, columns are radii from 1 to `n/2`.
    fn log_polar(&self, spectrum: &[Complex<f64>]) -> GrayImage {
        let n = self.n;
        let half = n / 2;
        // fftshifted, filtered magnitude
        let shifted = GrayImage::from_fn(n, n, |x, y| {
            let sx = (x + half) % n;
            let sy = (y + half) % n;
            spectrum[sy * n + sx].norm() * self.highpass[y * n + x]
        });
        let step = self.log_radius_step();
        let c = half as f64;
        GrayImage::from_fn(n, n, |j, i| {
            let theta = PI * i as f64 / n as f64;
            let rho = (step * j as f64).exp();
            let x = c + rho * theta.cos();
            let y = c + rho * theta.sin();
            shifted.bilinear(x, y).unwrap_or(0.0)
        })
    }

    /// Phase correlation of log-polar images. The angle axis is cyclic and
    /// left as is; only the radial axis is apodized.
    fn correlate_log_polar(&self, a: &GrayImage, b: &GrayImage) -> Result<PhaseShift> {
        let n = self.n;
        let prep = |img: &GrayImage| -> Result<Spectrum> {
            let mean = img.mean();
            let mut buf = vec![Complex::new(0.0, 0.0); n * n];
            let mut energy = 0.0;
            for y in 0..n {
                for x in 0..n {
                    let v = (img.get(x, y) - mean) * self.hann_n[x];
                    energy += v * v;
                    buf[y * n + x] = Complex::new(v, 0.0);
                }
            }
            if !(energy > 1e-18) {
                return Err(Error::DegenerateWindow);
            }
            fft2(&mut buf, n, &*self.forward);
            Ok(buf)
        };
        let fa = prep(a)?;
        let fb = prep(b)?;
        self.correlate_spectra(&fa, &fb)
    }
}

/// One-shot phase correlation of two windows.
pub fn phase_correlate(a: &GrayImage, b: &GrayImage) -> Result<PhaseShift> {
    if a.width() != a.height() {
        return Err(Error::DimensionMismatch("windows must be square".into()));
    }
    Registrar::new(a.width())?.phase_correlate(a, b)
}

/// One-shot Fourier-Mellin registration of two windows.
pub fn register_window(a: &GrayImage, b: &GrayImage) -> Result<RegistrationResult> {
    if a.width() != a.height() {
        return Err(Error::DimensionMismatch("windows must be square".into()));
    }
    Registrar::new(a.width())?.register(a, b)
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = (PI * (i as f64 + 0.5) / n as f64).sin();
            s * s
        })
        .collect()
}

/// Transfer function of a Gaussian of width `sigma` px in FFT bin order.
/// Applied to a whitened cross-power spectrum it turns the correlation peak
/// into that Gaussian, which three samples locate exactly.
fn gaussian_peak_weight(n: usize, sigma: f64) -> Vec<f64> {
    let freq = |k: usize| k.min(n - k) as f64 / n as f64;
    let c = 2.0 * PI * PI * sigma * sigma;
    let mut out = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            out.push((-c * (freq(x).powi(2) + freq(y).powi(2))).exp());
        }
    }
    out
}

/// `(1 - X)(2 - X)` with `X = cos(πξ)cos(πη)` on the fftshifted grid.
fn highpass(n: usize) -> Vec<f64> {
    let half = n as f64 / 2.0;
    let mut out = Vec::with_capacity(n * n);
    for y in 0..n {
        let eta = (y as f64 - half) / n as f64;
        for x in 0..n {
            let xi = (x as f64 - half) / n as f64;
            let v = (PI * xi).cos() * (PI * eta).cos();
            out.push((1.0 - v) * (2.0 - v));
        }
    }
    out
}

fn fft2(buf: &mut [Complex<f64>], n: usize, fft: &dyn Fft<f64>) {
    fft.process(buf);
    transpose(buf, n);
    fft.process(buf);
    transpose(buf, n);
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for y in 0..n {
        for x in (y + 1)..n {
            buf.swap(y * n + x, x * n + y);
        }
    }
}

fn wrap_half_turn(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Integer peak with per-axis three-point refinement: a parabola through the
/// log values (exact for a Gaussian peak), or through the values themselves
/// when a neighbour is not positive. The surface is cyclic so neighbours
/// wrap.
fn peak(surface: &[f64], n: usize) -> PhaseShift {
    let (idx, &val) = surface
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty surface");
    let (px, py) = (idx % n, idx / n);
    let at = |x: usize, y: usize| surface[(y % n) * n + (x % n)];
    let refine = |l: f64, c: f64, r: f64| {
        if l > 0.0 && c > 0.0 && r > 0.0 {
            let (l, c, r) = (l.ln(), c.ln(), r.ln());
            let denom = l - 2.0 * c + r;
            if denom < 0.0 {
                return (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
            }
        }
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let ox = refine(at(px + n - 1, py), val, at(px + 1, py));
    let oy = refine(at(px, py + n - 1), val, at(px, py + 1));
    let signed = |p: usize| {
        if p > n / 2 {
            p as f64 - n as f64
        } else {
            p as f64
        }
    };
    PhaseShift {
        du: signed(px) + ox,
        dv: signed(py) + oy,
        response: val.clamp(0.0, 1.0),
    }
}

/// Undoes a rotation by `angle` and a magnification by `scale` about the
/// window center, then a residual `shift` in the de-rotated frame. Samples
/// falling outside are filled with the window mean.
fn unrotate(b: &GrayImage, angle: f64, scale: f64, shift: (f64, f64)) -> GrayImage {
    let (w, h) = (b.width(), b.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let fill = b.mean();
    let (s, c) = angle.sin_cos();
    GrayImage::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx + shift.0;
        let dy = y as f64 - cy + shift.1;
        let sx = cx + scale * (c * dx - s * dy);
        let sy = cy + scale * (s * dx + c * dy);
        b.bilinear(sx, sy).unwrap_or(fill)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn texture(n: usize, seed: u64) -> GrayImage {
        // cheap deterministic broadband pattern
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let noise: Vec<f64> = (0..n * n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 33) as f64 / (1u64 << 31) as f64
            })
            .collect();
        // 3x3 box blur keeps it band-limited enough for sub-pixel work
        GrayImage::from_fn(n, n, |x, y| {
            let mut acc = 0.0;
            for dy in 0..3 {
                for dx in 0..3 {
                    let xx = (x + n + dx - 1) % n;
                    let yy = (y + n + dy - 1) % n;
                    acc += noise[yy * n + xx];
                }
            }
            acc * 255.0 / 9.0
        })
    }

    fn circular_shift(img: &GrayImage, du: isize, dv: isize) -> GrayImage {
        let (w, h) = (img.width() as isize, img.height() as isize);
        GrayImage::from_fn(img.width(), img.height(), |x, y| {
            let sx = (x as isize - du).rem_euclid(w) as usize;
            let sy = (y as isize - dv).rem_euclid(h) as usize;
            img.get(sx, sy)
        })
    }

    #[test]
    fn identical_windows() {
        let a = texture(64, 1);
        let s = phase_correlate(&a, &a).unwrap();
        assert_abs_diff_eq!(s.du, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.dv, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.response, 1.0, epsilon = 1e-9);
        let r = register_window(&a, &a).unwrap();
        assert_abs_diff_eq!(r.du, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.dv, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.rotation, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.scale, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn integer_circular_shift() {
        let a = texture(64, 2);
        let b = circular_shift(&a, 5, -3);
        let s = phase_correlate(&a, &b).unwrap();
        assert_abs_diff_eq!(s.du, 5.0, epsilon = 0.05);
        assert_abs_diff_eq!(s.dv, -3.0, epsilon = 0.05);
    }

    #[test]
    fn constant_window_is_degenerate() {
        let a = GrayImage::filled(32, 32, 9.0);
        let b = texture(32, 3);
        assert!(matches!(phase_correlate(&a, &b), Err(Error::DegenerateWindow)));
        assert!(matches!(register_window(&b, &a), Err(Error::DegenerateWindow)));
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let reg = Registrar::new(32).unwrap();
        let a = texture(32, 1);
        let b = texture(16, 1);
        assert!(reg.phase_correlate(&a, &b).is_err());
        assert!(Registrar::new(4).is_err());
        let rect = GrayImage::new(8, 16);
        assert!(phase_correlate(&rect, &rect).is_err());
    }

    #[test]
    fn constant_offset_does_not_move_the_peak() {
        let a = texture(64, 4);
        let b = circular_shift(&a, 2, 7);
        let b_bright = GrayImage::from_fn(64, 64, |x, y| b.get(x, y) + 40.0);
        let s1 = phase_correlate(&a, &b).unwrap();
        let s2 = phase_correlate(&a, &b_bright).unwrap();
        assert_abs_diff_eq!(s1.du, s2.du, epsilon = 1e-9);
        assert_abs_diff_eq!(s1.dv, s2.dv, epsilon = 1e-9);
    }

    #[test]
    fn parabolic_refinement_is_centered_for_symmetric_peak() {
        let n = 8;
        let mut s = vec![0.0; n * n];
        s[3 * n + 2] = 1.0;
        s[3 * n + 1] = 0.5;
        s[3 * n + 3] = 0.5;
        let p = peak(&s, n);
        assert_eq!((p.du, p.dv), (2.0, 3.0));
        s[3 * n + 3] = 0.9;
        assert!(peak(&s, n).du > 2.0);
    }

    #[test]
    fn wrap_half_turn_range() {
        assert_abs_diff_eq!(wrap_half_turn(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_half_turn(PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_half_turn(-PI), PI, epsilon = 1e-12);
    }
}
