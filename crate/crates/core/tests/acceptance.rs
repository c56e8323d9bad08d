//! One PASS/FAIL line per acceptance criterion on synthetic data.
//!
//! Exits 0 regardless of the outcome so the report is always printed as part
//! of `cargo test`; set `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero
//! exit.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use omnipose::cylinder::{CylinderModel, PanoramaImage};
use omnipose::motionfield::{median_filter, sweep, MotionField};
use omnipose::pipeline::{estimate_pose, fit_field, Estimation, PipelineConfig};
use omnipose::pose::{angle_diff, extract_pose, pose_from_params, PoseEstimate};
use omnipose::sinusoid::{
    fit, fit_least_squares, model_eval, FitConfig, HuberForm, RobustObjective, SinusoidParams,
};
use omnipose::synth::{
    approximation_envelope, make_texture, warp, yaw_columns, RigidTransform, SceneDepth,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

struct Bench {
    model: CylinderModel,
    base: PanoramaImage,
    depth: SceneDepth,
    cfg: PipelineConfig,
}

impl Bench {
    fn new() -> Self {
        let model = CylinderModel::new(1100, 110).unwrap();
        Self {
            base: make_texture(7, &model),
            depth: SceneDepth::default_for(&model),
            cfg: PipelineConfig::default(),
            model,
        }
    }

    fn estimate(&self, other: &PanoramaImage) -> Estimation {
        estimate_pose(&self.base, other, &self.cfg).unwrap()
    }

    fn warped(&self, t: &RigidTransform, depth: &SceneDepth) -> PanoramaImage {
        warp(&self.base, t, depth).unwrap()
    }
}

fn identity(b: &Bench, rep: &mut Report) {
    let start = Instant::now();
    let e = b.estimate(&b.base);
    let secs = start.elapsed().as_secs_f64();
    let p = &e.pose;
    let rot = p.roll.abs().max(p.pitch.abs()).max(p.yaw.abs());
    let off = e.fit_u.params.offset.abs().max(e.fit_v.params.offset.abs());
    rep.line(
        1,
        rot < 0.002 && off < 0.3 && secs < 2.0,
        format!("max|rpy| {rot:.2e} rad, max|offset| {off:.2e} px, runtime {secs:.3} s"),
    );
}

fn pure_yaw(b: &Bench, rep: &mut Report) {
    let mut pass = true;
    let mut detail = Vec::new();
    for k in [1isize, 3, 10] {
        let p = b.estimate(&yaw_columns(&b.base, k)).pose;
        let err = (p.yaw - k as f64 * b.model.gamma()).abs();
        let other = p.roll.abs().max(p.pitch.abs());
        pass &= err < 1e-4 && other < 0.002;
        detail.push(format!("k={k}: yaw err {err:.1e}, roll/pitch {other:.1e}"));
    }
    rep.line(2, pass, detail.join("; "));
}

fn roll_pitch(b: &Bench, rep: &mut Report) {
    let mut pass = true;
    let mut worst_rel: f64 = 0.0;
    let mut worst_alpha: f64 = 0.0;
    let mut worst_amp: f64 = 0.0;
    let mut amp_005 = 0.0;
    for (axis, alpha) in [("roll", 0.0), ("pitch", PI / 2.0)] {
        for theta in [0.02, 0.05, 0.1] {
            let (r, p) = if axis == "roll" { (theta, 0.0) } else { (0.0, theta) };
            let e = b.estimate(&b.warped(&RigidTransform::from_euler(r, p, 0.0), &b.depth));
            let driven = if axis == "roll" { e.pose.roll } else { e.pose.pitch };
            let rel = (driven / theta - 1.0).abs();
            let da = angle_diff(e.pose.rotation_axis_angle(), alpha).abs();
            let amp = (e.fit_v.params.amplitude / (theta * b.model.radius()) - 1.0).abs();
            if axis == "roll" && theta == 0.05 {
                amp_005 = e.fit_v.params.amplitude;
            }
            pass &= rel < 0.02 && da < 0.05 && amp < 0.03;
            worst_rel = worst_rel.max(rel);
            worst_alpha = worst_alpha.max(da);
            worst_amp = worst_amp.max(amp);
        }
    }
    rep.line(
        3,
        pass,
        format!(
            "worst rel err {:.2}%, worst axis err {worst_alpha:.4} rad, worst amplitude err {:.2}%, \
             amplitude at 0.05 rad {amp_005:.3} px (θ·r = {:.3})",
            100.0 * worst_rel,
            100.0 * worst_amp,
            0.05 * b.model.radius()
        ),
    );
}

fn roll_extrema(b: &Bench, rep: &mut Report) {
    let e = b.estimate(&b.warped(&RigidTransform::from_euler(0.05, 0.0, 0.0), &b.depth));
    let p = e.fit_v.params.canonical();
    let w = b.model.u_max() as f64;
    let gamma = b.model.gamma();
    let at = |target: f64| ((target - p.phase) / gamma).rem_euclid(w);
    let (max_u, min_u) = (at(PI / 2.0), at(-PI / 2.0));
    let circ = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(w);
        d.min(w - d)
    };
    let (q1, q3) = (w / 4.0, 3.0 * w / 4.0);
    let err = circ(max_u, q1).max(circ(min_u, q3)).min(circ(max_u, q3).max(circ(min_u, q1)));
    rep.line(
        4,
        err <= 3.0,
        format!("extrema at u={max_u:.1} (max) and u={min_u:.1} (min), expected {q1} and {q3}, worst offset {err:.2} columns"),
    );
}

fn corrupt(field: &MotionField, seed: u64) -> MotionField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = field.clone();
    let n = f.samples.len();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    for &i in &idx[..n / 5] {
        let s = &mut f.samples[i];
        s.du = if rng.random_bool(0.5) { 30.0 } else { -30.0 };
        s.dv = if rng.random_bool(0.5) { 30.0 } else { -30.0 };
    }
    f
}

fn robustness(b: &Bench, rep: &mut Report) {
    const SEEDS: u64 = 50;
    let gamma = b.model.gamma();
    let fit_cfg = FitConfig::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for theta in [0.02, 0.05, 0.1] {
        let within = |p: &PoseEstimate| {
            (p.tilt() / theta - 1.0).abs() < 0.02 && angle_diff(p.rotation_axis_angle(), 0.0).abs() < 0.05
        };
        let moved = b.warped(&RigidTransform::from_euler(theta, 0.0, 0.0), &b.depth);
        let clean = sweep(&b.base, &moved, &b.cfg.sweep).unwrap();
        let (mut robust, mut huber_only, mut l2_fail) = (0, 0, 0);
        for seed in 0..SEEDS {
            let raw = corrupt(&clean, seed);
            let filtered = median_filter(&raw, 5).unwrap();
            let ok = fit_field(&filtered, gamma, &fit_cfg)
                .and_then(|(fu, fv)| extract_pose(&fv, &fu, &b.model))
                .is_ok_and(|p| within(&p));
            robust += ok as usize;
            let ok = fit_field(&raw, gamma, &fit_cfg)
                .and_then(|(fu, fv)| extract_pose(&fv, &fu, &b.model))
                .is_ok_and(|p| within(&p));
            huber_only += ok as usize;
            let l2 = pose_from_params(
                &fit_least_squares(&raw.dv_series(), gamma).unwrap(),
                &fit_least_squares(&raw.du_series(), gamma).unwrap(),
                &b.model,
            );
            l2_fail += !within(&l2) as usize;
        }
        let need = (0.9 * SEEDS as f64).ceil() as usize;
        pass &= robust >= need && l2_fail >= need;
        detail.push(format!(
            "θ={theta}: median+huber {robust}/{SEEDS}, huber only {huber_only}/{SEEDS}, L2 outside {l2_fail}/{SEEDS}"
        ));
    }
    rep.line(5, pass, format!("(need ≥90% pass) {}", detail.join("; ")));
}

fn envelope(b: &Bench, rep: &mut Report) {
    let thetas: Vec<f64> = (1..=20).map(|k| 0.005 * k as f64).collect();
    let rows = approximation_envelope(&thetas, &b.model);
    let worst = rows.iter().map(|r| r.horizon_rel_error).fold(0.0, f64::max);
    let full = rows.iter().map(|r| r.full_height_rel_error).fold(0.0, f64::max);
    println!("  envelope θ, horizon rel err, full-height rel err");
    for r in rows.iter().step_by(4).chain(rows.last()) {
        println!("  {:.3}, {:.4}%, {:.2}%", r.theta, 100.0 * r.horizon_rel_error, 100.0 * r.full_height_rel_error);
    }
    rep.line(
        6,
        worst < 0.02,
        format!("worst horizon-row deviation {:.3}% for θ ≤ 0.1 (full height {:.1}%)", 100.0 * worst, 100.0 * full),
    );
}

fn optimizer(b: &Bench, rep: &mut Report) {
    let w = b.model.gamma();
    let us: Vec<f64> = (0..50).map(|k| 54.5 + 20.0 * k as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noisy: Vec<(f64, f64)> = us
        .iter()
        .map(|&u| (u, 4.0 * (w * u + 0.7).sin() + 0.5 + 2.0 * rng.sample::<f64, _>(StandardNormal)))
        .collect();

    let obj = RobustObjective::new(&noisy, w, 2.0, HuberForm::Paper);
    let mut worst_jac: f64 = 0.0;
    for _ in 0..100 {
        let p = [rng.random_range(0.5..10.0), rng.random_range(-PI..PI), rng.random_range(-5.0..5.0)];
        let jac = obj.jacobian(&SinusoidParams::new(p[0], p[1], p[2]));
        let h = 1e-6;
        for k in 0..3 {
            let (mut hi, mut lo) = (p, p);
            hi[k] += h;
            lo[k] -= h;
            let rh = obj.robust_residuals(&SinusoidParams::new(hi[0], hi[1], hi[2]));
            let rl = obj.robust_residuals(&SinusoidParams::new(lo[0], lo[1], lo[2]));
            for i in 0..noisy.len() {
                let fd = (rh[i] - rl[i]) / (2.0 * h);
                let an = jac[i][k];
                // absolute floor for entries that are zero up to round-off
                let e = if an.abs().max(fd.abs()) < 1e-6 { 0.0 } else { (an - fd).abs() / an.abs().max(fd.abs()) };
                worst_jac = worst_jac.max(e);
            }
        }
    }

    let mut monotone = true;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<(f64, f64)> = us
            .iter()
            .map(|&u| {
                let y = 6.0 * (w * u - 1.0).sin() - 2.0;
                let y = if rng.random_bool(0.2) { y + 25.0 } else { y + 0.5 * rng.sample::<f64, _>(StandardNormal) };
                (u, y)
            })
            .collect();
        let r = fit(&s, w, &FitConfig::default()).unwrap();
        monotone &= r.cost_history.windows(2).all(|c| c[1] <= c[0]);
    }

    let mut worst_rec: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let truth = SinusoidParams::new(rng.random_range(0.5..15.0), rng.random_range(-3.0..3.0), rng.random_range(-5.0..5.0));
        let s: Vec<(f64, f64)> = us.iter().map(|&u| (u, model_eval(&truth, w, u))).collect();
        let got = fit(&s, w, &FitConfig::default()).unwrap().params;
        worst_rec = worst_rec
            .max((got.amplitude - truth.amplitude).abs())
            .max(angle_diff(got.phase, truth.phase).abs())
            .max((got.offset - truth.offset).abs());
    }

    rep.line(
        7,
        worst_jac < 1e-4 && monotone && worst_rec < 1e-6,
        format!("jacobian worst rel err {worst_jac:.1e}, cost non-increasing: {monotone}, noise-free worst param err {worst_rec:.1e}"),
    );
}

fn translation(b: &Bench, rep: &mut Report) {
    let m = 0.1 * b.model.radius();
    let depth = SceneDepth::Constant(5.0 * b.model.radius());
    let gamma = b.model.gamma();
    let mut pass = true;
    let (mut worst_angle, mut worst_mean, mut worst_rms): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut mags = Vec::new();
    for dir in [0.0f64, 1.0, 2.5, -2.0] {
        let t = RigidTransform::translation_only([m * dir.cos(), m * dir.sin(), 0.0]);
        let e = b.estimate(&b.warped(&t, &depth));
        let res: Vec<f64> = e
            .raw
            .du_series()
            .iter()
            .map(|&(u, y)| e.fit_u.params.eval(gamma, u) - y)
            .collect();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
        let da = angle_diff(e.pose.txy_angle, dir).abs();
        pass &= da < 0.05 && mean.abs() < 0.3 && !e.pose.scale_resolved;
        worst_angle = worst_angle.max(da);
        worst_mean = worst_mean.max(mean.abs());
        worst_rms = worst_rms.max(rms);
        mags.push(format!("{:.3}", e.pose.txy_mag_scaled));
    }
    rep.line(
        8,
        pass,
        format!(
            "worst direction err {worst_angle:.4} rad, worst |mean residual| {worst_mean:.4} px (rms {worst_rms:.4}), \
             unscaled magnitudes [{}] px",
            mags.join(", ")
        ),
    );
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters come through here too
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let b = Bench::new();
    let mut rep = Report { failed: 0 };
    identity(&b, &mut rep);
    pure_yaw(&b, &mut rep);
    roll_pitch(&b, &mut rep);
    roll_extrema(&b, &mut rep);
    robustness(&b, &mut rep);
    envelope(&b, &mut rep);
    optimizer(&b, &mut rep);
    translation(&b, &mut rep);
    println!("acceptance: {} of 8 criteria pass", 8 - rep.failed);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && rep.failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
