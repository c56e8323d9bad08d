//! Pairwise estimates over a directory of panoramas.

use std::path::{Path, PathBuf};
use std::time::Instant;

use omnipose::cylinder::PanoramaImage;
use omnipose::error::{Error, Result};
use omnipose::pipeline::estimate_pose;
use rayon::prelude::*;

use crate::{load_panorama, write_text, Tuning};

pub const HEADER: [&str; 10] = [
    "frame_a",
    "frame_b",
    "roll",
    "pitch",
    "yaw",
    "tz_scaled",
    "txy_angle",
    "txy_mag_scaled",
    "status",
    "runtime_s",
];

enum Pair {
    Estimate { a: usize, b: usize },
    /// Frame `b` could not be read; the next pair starts from `a` again.
    Unreadable { a: Option<usize>, b: usize, kind: &'static str },
}

/// `.pgm` files of a directory in lexicographic order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|x| x.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn run(dir: &Path, tuning: &Tuning, out: &Path) -> Result<()> {
    let paths = list_frames(dir)?;
    if paths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "odometry needs at least 2 frames, found {} in {}",
            paths.len(),
            dir.display()
        )));
    }
    let kv = tuning.model_config()?;
    let parallel = !tuning.deterministic();
    let load = |p: &PathBuf| load_panorama(p, &kv);
    let frames: Vec<Result<PanoramaImage>> = if parallel {
        paths.par_iter().map(load).collect()
    } else {
        paths.iter().map(load).collect()
    };

    let mut pairs = Vec::new();
    let mut last_good = None;
    for (i, f) in frames.iter().enumerate() {
        match f {
            Ok(_) => {
                if let Some(a) = last_good {
                    pairs.push(Pair::Estimate { a, b: i });
                }
                last_good = Some(i);
            }
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", paths[i].display());
                pairs.push(Pair::Unreadable {
                    a: last_good,
                    b: i,
                    kind: e.kind(),
                });
            }
        }
    }

    let config = tuning.pipeline();
    let row = |pair: &Pair| -> Vec<String> {
        match *pair {
            Pair::Unreadable { a, b, kind } => {
                let mut r = vec![a.map(|a| name(&paths[a])).unwrap_or_default(), name(&paths[b])];
                r.extend(std::iter::repeat_n(String::new(), 6));
                r.push(format!("error:{kind}"));
                r.push(String::new());
                r
            }
            Pair::Estimate { a, b } => {
                let (fa, fb) = match (&frames[a], &frames[b]) {
                    (Ok(fa), Ok(fb)) => (fa, fb),
                    _ => unreachable!("pairs only join readable frames"),
                };
                let start = Instant::now();
                let result = estimate_pose(fa, fb, &config);
                let runtime = start.elapsed().as_secs_f64();
                let mut r = vec![name(&paths[a]), name(&paths[b])];
                match result {
                    Ok(est) => {
                        let p = &est.pose;
                        r.extend(
                            [p.roll, p.pitch, p.yaw, p.tz_scaled, p.txy_angle, p.txy_mag_scaled]
                                .map(fmt6),
                        );
                        r.push("ok".into());
                    }
                    Err(e) => {
                        eprintln!("warning: {} -> {}: {e}", r[0], r[1]);
                        r.extend(std::iter::repeat_n(String::new(), 6));
                        r.push(format!("error:{}", e.kind()));
                    }
                }
                r.push(if parallel { fmt6(runtime) } else { String::new() });
                r
            }
        }
    };
    let rows: Vec<Vec<String>> = if parallel {
        pairs.par_iter().map(row).collect()
    } else {
        pairs.iter().map(row).collect()
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in &rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    write_text(out, &String::from_utf8_lossy(&bytes))
}

/// Six fractional digits, without a negative sign on zero.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}
