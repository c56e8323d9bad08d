//! JSON records for pose estimates, fit diagnostics and errors. Every number
//! is written with six fractional digits; non-finite values become `null`.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::Error;
use crate::pipeline::Estimation;
use crate::sinusoid::FitReport;

/// A number serialized with six fractional digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed6(pub f64);

impl Serialize for Fixed6 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        // `-0.000000` is valid JSON but reads badly
        let text = format!("{:.6}", self.0);
        let text = if text.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
            text.trim_start_matches('-').to_string()
        } else {
            text
        };
        RawValue::from_string(text)
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl From<f64> for Fixed6 {
    fn from(v: f64) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub amplitude: Fixed6,
    pub phase: Fixed6,
    pub offset: Fixed6,
    pub iterations: usize,
    pub final_cost: Fixed6,
    pub inlier_rmse: Fixed6,
    pub converged: bool,
}

impl From<&FitReport> for FitDiagnostics {
    fn from(f: &FitReport) -> Self {
        Self {
            amplitude: f.params.amplitude.into(),
            phase: f.params.phase.into(),
            offset: f.params.offset.into(),
            iterations: f.iterations,
            final_cost: f.final_cost.into(),
            inlier_rmse: f.inlier_rmse.into(),
            converged: f.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSection {
    pub u: FitDiagnostics,
    pub v: FitDiagnostics,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoseRecord {
    pub roll: Fixed6,
    pub pitch: Fixed6,
    pub yaw: Fixed6,
    pub tz_scaled: Fixed6,
    pub txy_angle: Fixed6,
    pub txy_mag_scaled: Fixed6,
    pub converged_u: bool,
    pub converged_v: bool,
    pub warnings: Vec<&'static str>,
    pub fit: FitSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<Fixed6>,
}

impl PoseRecord {
    pub fn new(est: &Estimation, runtime_s: Option<f64>) -> Self {
        let p = &est.pose;
        Self {
            roll: p.roll.into(),
            pitch: p.pitch.into(),
            yaw: p.yaw.into(),
            tz_scaled: p.tz_scaled.into(),
            txy_angle: p.txy_angle.into(),
            txy_mag_scaled: p.txy_mag_scaled.into(),
            converged_u: est.fit_u.converged,
            converged_v: est.fit_v.converged,
            warnings: p.warnings.iter().map(|w| w.as_str()).collect(),
            fit: FitSection {
                u: (&est.fit_u).into(),
                v: (&est.fit_v).into(),
                samples: est.filtered.len(),
            },
            runtime_s: runtime_s.map(Fixed6),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub error: ErrorBody,
}

impl ErrorRecord {
    pub fn new(err: &Error) -> Self {
        Self {
            error: ErrorBody {
                kind: err.kind(),
                message: err.to_string(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_digits() {
        let j = |v: f64| serde_json::to_string(&Fixed6(v)).unwrap();
        assert_eq!(j(0.05), "0.050000");
        assert_eq!(j(-1.5), "-1.500000");
        assert_eq!(j(-1e-9), "0.000000");
        assert_eq!(j(f64::NAN), "null");
        assert_eq!(j(f64::INFINITY), "null");
    }

    #[test]
    fn error_record_shape() {
        let e = Error::InsufficientMotionData {
            valid: 3,
            required: 8,
        };
        let v: serde_json::Value = serde_json::from_str(&ErrorRecord::new(&e).to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "insufficient_motion_data");
        assert!(v["error"]["message"]
            .as_str()
            .unwrap()
            .contains("insufficient motion data"));
    }
}
