//! Synthetic sequence output.

use std::path::Path;

use omnipose::error::{Error, Result};
use omnipose::synth::{planar_angle, Scenario, SceneDepth};

use crate::odometry::fmt6;
use crate::write_text;

pub const TRUTH_HEADER: [&str; 11] = [
    "frame_a",
    "frame_b",
    "roll",
    "pitch",
    "yaw",
    "tx",
    "ty",
    "tz",
    "tz_scaled",
    "txy_angle",
    "txy_mag_scaled",
];

pub fn frame_name(k: usize) -> String {
    format!("frame_{k:03}.pgm")
}

/// Writes `frame_NNN.pgm` for every frame and `truth.csv` with the motion
/// between consecutive frames.
pub fn write_sequence(sc: &Scenario, dir: &Path) -> Result<()> {
    let frames = sc.render()?;
    std::fs::create_dir_all(dir)?;
    for (k, f) in frames.iter().enumerate() {
        f.pixels.write_pgm(dir.join(frame_name(k)))?;
    }
    let (roll, pitch, yaw) = sc.transform.euler();
    let [tx, ty, tz] = sc.transform.translation;
    let lambda = match &sc.depth {
        SceneDepth::Constant(d) => sc.model.radius() / d,
        SceneDepth::PerColumn(_) => f64::NAN,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(TRUTH_HEADER).map_err(csv_err)?;
    for k in 0..frames.len() - 1 {
        let mut r = vec![frame_name(k), frame_name(k + 1)];
        r.extend(
            [
                roll,
                pitch,
                yaw,
                tx,
                ty,
                tz,
                lambda * tz,
                planar_angle(tx, ty),
                lambda * tx.hypot(ty),
            ]
            .map(fmt6),
        );
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    write_text(&dir.join("truth.csv"), &String::from_utf8_lossy(&bytes))
}
