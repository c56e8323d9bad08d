//! Mapping fitted sinusoids to a relative camera pose.
//!
//! The pose describes camera 2 in the frame of camera 1: a point `P₂` seen
//! from camera 2 has coordinates `P₁ = R·P₂ + t` in camera 1. With that
//! convention the column shifts `Δ = p₂ − p₁` follow
//!
//! ```text
//! Δv(u) = λ_z·t_z + θ·r·sin(γu − α)          (rotation θ about axis at angle α)
//! Δu(u) = −r·θ_z + λ·‖t_xy‖·sin(γu − β)      (translation direction β)
//! ```
//!
//! so both phase conventions reduce to a sign flip of the fitted phase.

use std::f64::consts::PI;
use std::ops::Mul;

use crate::cylinder::CylinderModel;
use crate::error::{Error, Result};
use crate::sinusoid::{wrap_angle, FitReport, SinusoidParams, MIN_AMPLITUDE};

/// In-plane rotations above this magnitude (radians) break the small-angle
/// approximation behind the model.
pub const SMALL_ANGLE_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationMatrix {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn rot_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// `R_z(yaw)·R_y(pitch)·R_x(roll)`.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::rot_z(yaw) * Self::rot_y(pitch) * Self::rot_x(roll)
    }

    /// Rodrigues rotation about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(n > 0.0) {
            if angle == 0.0 {
                return Ok(Self::identity());
            }
            return Err(Error::InvalidArgument("zero rotation axis".into()));
        }
        let [x, y, z] = axis.map(|v| v / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Ok(Self([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]))
    }

    /// Inverse of [`from_euler`](Self::from_euler), as `(roll, pitch, yaw)`.
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = (-m[2][0]).clamp(-1.0, 1.0).asin();
        let roll = m[2][1].atan2(m[2][2]);
        let yaw = m[1][0].atan2(m[0][0]);
        (roll, pitch, yaw)
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        Self(t)
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `MᵀM − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose() * *self;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        RotationMatrix(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseWarning {
    /// The in-plane rotation exceeds [`SMALL_ANGLE_LIMIT`].
    OutsideSmallAngle,
    /// The Δv amplitude vanished, so the rotation axis is arbitrary.
    DegenerateRotationAxis,
    /// The Δu amplitude vanished, so the translation direction is arbitrary.
    DegenerateTranslationDirection,
}

impl PoseWarning {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoseWarning::OutsideSmallAngle => "outside small-angle validity",
            PoseWarning::DegenerateRotationAxis => "rotation axis undetermined",
            PoseWarning::DegenerateTranslationDirection => "translation direction undetermined",
        }
    }
}

/// Rotation in full, translation up to an unknown scale.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseEstimate {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// `λ_z·t_z` in pixels.
    pub tz_scaled: f64,
    /// Direction of the in-plane translation from the x-axis, `[-π, π)`.
    pub txy_angle: f64,
    /// `λ·‖t_xy‖` in pixels.
    pub txy_mag_scaled: f64,
    /// Always false: monocular translation has no metric scale.
    pub scale_resolved: bool,
    pub warnings: Vec<PoseWarning>,
}

impl PoseEstimate {
    /// Angle of the in-plane rotation axis from the x-axis.
    pub fn rotation_axis_angle(&self) -> f64 {
        if self.roll == 0.0 && self.pitch == 0.0 {
            0.0
        } else {
            self.pitch.atan2(self.roll)
        }
    }

    /// Magnitude of the in-plane (roll/pitch) rotation.
    pub fn tilt(&self) -> f64 {
        self.roll.hypot(self.pitch)
    }

    pub fn rpy(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }
}

/// Angle of the in-plane rotation axis encoded by the Δv phase.
pub fn axis_from_phase(phase: f64) -> f64 {
    wrap_angle(-phase)
}

/// Direction of the in-plane translation encoded by the Δu phase.
pub fn dir_from_phase(phase: f64) -> f64 {
    wrap_angle(-phase)
}

/// Pose from the Δv and Δu sinusoids, without convergence checks.
pub fn pose_from_params(
    v: &SinusoidParams,
    u: &SinusoidParams,
    model: &CylinderModel,
) -> PoseEstimate {
    let gamma = model.gamma();
    let v = v.canonical();
    let u = u.canonical();
    let mut warnings = Vec::new();

    let tilt = v.amplitude * gamma;
    let (roll, pitch) = if v.amplitude < MIN_AMPLITUDE {
        warnings.push(PoseWarning::DegenerateRotationAxis);
        (0.0, 0.0)
    } else {
        let alpha = axis_from_phase(v.phase);
        (tilt * alpha.cos(), tilt * alpha.sin())
    };
    if tilt > SMALL_ANGLE_LIMIT {
        warnings.push(PoseWarning::OutsideSmallAngle);
    }

    let (txy_mag_scaled, txy_angle) = if u.amplitude < MIN_AMPLITUDE {
        warnings.push(PoseWarning::DegenerateTranslationDirection);
        (0.0, 0.0)
    } else {
        (u.amplitude, dir_from_phase(u.phase))
    };

    PoseEstimate {
        roll,
        pitch,
        yaw: -u.offset * gamma,
        tz_scaled: v.offset,
        txy_angle,
        txy_mag_scaled,
        scale_resolved: false,
        warnings,
    }
}

/// Pose from two converged fits.
pub fn extract_pose(fit_v: &FitReport, fit_u: &FitReport, model: &CylinderModel) -> Result<PoseEstimate> {
    if !fit_v.converged {
        return Err(Error::NotConverged { axis: "v" });
    }
    if !fit_u.converged {
        return Err(Error::NotConverged { axis: "u" });
    }
    Ok(pose_from_params(&fit_v.params, &fit_u.params, model))
}

pub fn to_rotation_matrix(pose: &PoseEstimate) -> RotationMatrix {
    RotationMatrix::from_euler(pose.roll, pose.pitch, pose.yaw)
}

/// Per-axis root mean square error of `(roll, pitch, yaw)`.
pub fn rmse(estimates: &[[f64; 3]], truth: &[[f64; 3]]) -> Result<[f64; 3]> {
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates vs {} ground-truth rows",
            estimates.len(),
            truth.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no poses to score".into()));
    }
    let mut acc = [0.0; 3];
    for (e, t) in estimates.iter().zip(truth) {
        for k in 0..3 {
            acc[k] += (e[k] - t[k]).powi(2);
        }
    }
    let n = estimates.len() as f64;
    Ok(acc.map(|s| (s / n).sqrt()))
}

/// [`rmse`] over pose estimates.
pub fn rmse_poses(estimates: &[PoseEstimate], truth: &[[f64; 3]]) -> Result<[f64; 3]> {
    let est: Vec<[f64; 3]> = estimates.iter().map(PoseEstimate::rpy).collect();
    rmse(&est, truth)
}

/// Folds an angle difference into `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn model() -> CylinderModel {
        CylinderModel::default()
    }

    #[test]
    fn zero_fits_give_identity_pose() {
        let z = SinusoidParams::default();
        let p = pose_from_params(&z, &z, &model());
        assert_eq!(p.roll, 0.0);
        assert_eq!(p.pitch, 0.0);
        assert_eq!(p.yaw, 0.0);
        assert_eq!(p.tz_scaled, 0.0);
        assert_eq!(p.txy_angle, 0.0);
        assert_eq!(p.txy_mag_scaled, 0.0);
        assert!(!p.scale_resolved);
        assert_eq!(to_rotation_matrix(&p), RotationMatrix::identity());
    }

    #[test]
    fn one_column_offset_is_one_gamma_of_yaw() {
        let m = model();
        let u = SinusoidParams::new(0.0, 0.0, -1.0);
        let p = pose_from_params(&SinusoidParams::default(), &u, &m);
        assert_abs_diff_eq!(p.yaw, 2.0 * PI / 1100.0, epsilon = 1e-15);
    }

    #[test]
    fn roll_amplitude_maps_to_roll() {
        let m = model();
        let amp = 0.05 * m.radius();
        assert_abs_diff_eq!(amp, 8.753_521_870_054_244, epsilon = 1e-9);
        // Δv = θ·r·sin(γu): phase 0, extrema at the y-axis columns
        let v = SinusoidParams::new(amp, 0.0, 0.0);
        let p = pose_from_params(&v, &SinusoidParams::default(), &m);
        assert_abs_diff_eq!(p.roll, 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(p.pitch, 0.0, epsilon = 1e-12);
        // pitch: Δv = −θ·r·cos(γu) = θ·r·sin(γu − π/2)
        let v = SinusoidParams::new(amp, -PI / 2.0, 0.0);
        let p = pose_from_params(&v, &SinusoidParams::default(), &m);
        assert_abs_diff_eq!(p.roll, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.pitch, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn large_tilt_is_flagged() {
        let m = model();
        let v = SinusoidParams::new(0.4 * m.radius(), 0.0, 0.0);
        let p = pose_from_params(&v, &SinusoidParams::new(1.0, 0.0, 0.0), &m);
        assert!(p.warnings.contains(&PoseWarning::OutsideSmallAngle));
    }

    #[test]
    fn non_converged_fit_is_rejected() {
        let ok = FitReport {
            params: SinusoidParams::default(),
            iterations: 1,
            final_cost: 0.0,
            inlier_rmse: 0.0,
            converged: true,
            degenerate_amplitude: false,
            cost_history: vec![0.0],
        };
        let bad = FitReport { converged: false, ..ok.clone() };
        let m = model();
        assert!(extract_pose(&ok, &ok, &m).is_ok());
        assert!(matches!(extract_pose(&bad, &ok, &m), Err(Error::NotConverged { axis: "v" })));
        assert!(matches!(extract_pose(&ok, &bad, &m), Err(Error::NotConverged { axis: "u" })));
    }

    #[test]
    fn roll_matrix_matches_closed_form() {
        let t: f64 = 0.05;
        let r = to_rotation_matrix(&PoseEstimate { roll: t, ..Default::default() });
        let expected = [[1.0, 0.0, 0.0], [0.0, t.cos(), -t.sin()], [0.0, t.sin(), t.cos()]];
        assert!(r.max_abs_diff(&RotationMatrix(expected)) < 1e-15);
        let back = RotationMatrix::rot_x(t) * RotationMatrix::rot_x(-t);
        assert!(back.max_abs_diff(&RotationMatrix::identity()) < 1e-12);
    }

    #[test]
    fn axis_angle_agrees_with_elementary_rotations() {
        let a = RotationMatrix::from_axis_angle([0.0, 0.0, 2.0], 0.3).unwrap();
        assert!(a.max_abs_diff(&RotationMatrix::rot_z(0.3)) < 1e-15);
        let b = RotationMatrix::from_axis_angle([0.0, 1.0, 0.0], -0.2).unwrap();
        assert!(b.max_abs_diff(&RotationMatrix::rot_y(-0.2)) < 1e-15);
        assert!(RotationMatrix::from_axis_angle([0.0; 3], 0.1).is_err());
    }

    #[test]
    fn rmse_examples() {
        let truth = vec![[0.1, -0.2, 0.3]; 4];
        assert_eq!(rmse(&truth, &truth).unwrap(), [0.0; 3]);
        let biased: Vec<[f64; 3]> = truth.iter().map(|t| [t[0] + 0.01, t[1], t[2]]).collect();
        let e = rmse(&biased, &truth).unwrap();
        assert_abs_diff_eq!(e[0], 0.01, epsilon = 1e-15);
        assert_eq!(e[1], 0.0);
        let zeros = vec![[0.0; 3]; 6];
        let alt: Vec<[f64; 3]> = (0..6)
            .map(|i| if i % 2 == 0 { [0.02; 3] } else { [-0.02; 3] })
            .collect();
        let e = rmse(&alt, &zeros).unwrap();
        assert!(e.iter().all(|v| (v - 0.02).abs() < 1e-15));
        assert!(rmse(&alt, &zeros[..3]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn euler_roundtrip_and_orthonormality(
            roll in -1.0f64..1.0, pitch in -1.2f64..1.2, yaw in -3.0f64..3.0
        ) {
            let r = RotationMatrix::from_euler(roll, pitch, yaw);
            prop_assert!(r.orthonormality_error() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            let (a, b, c) = r.to_euler();
            prop_assert!((a - roll).abs() < 1e-9);
            prop_assert!((b - pitch).abs() < 1e-9);
            prop_assert!((c - yaw).abs() < 1e-9);
        }

        #[test]
        fn yaw_is_linear_in_offset(c in -500.0f64..500.0) {
            let m = model();
            let p = pose_from_params(&SinusoidParams::default(), &SinusoidParams::new(0.0, 0.0, c), &m);
            prop_assert!((p.yaw + c * m.gamma()).abs() < 1e-12);
        }

        #[test]
        fn negated_amplitude_is_same_pose(a in 0.1f64..20.0, phi in -3.0f64..3.0) {
            let m = model();
            let p1 = pose_from_params(&SinusoidParams::new(a, phi, 0.0), &SinusoidParams::default(), &m);
            let p2 = pose_from_params(&SinusoidParams::new(-a, phi + PI, 0.0), &SinusoidParams::default(), &m);
            prop_assert!((p1.roll - p2.roll).abs() < 1e-9);
            prop_assert!((p1.pitch - p2.pitch).abs() < 1e-9);
        }
    }
}
