use omnipose_wasm::{estimate_synthetic, fit_comparison, panorama_rgba};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("bad json ({e}): {s}"))
}

#[test]
fn panorama_is_full_rgba_frame() {
    let bytes = panorama_rgba(1, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 1);
    assert_eq!(bytes.len(), 1100 * 110 * 4);
    assert!(bytes.chunks(4).all(|p| p[0] == p[1] && p[1] == p[2] && p[3] == 255));
    let reference = panorama_rgba(1, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 0);
    assert_ne!(bytes, reference);
}

#[test]
fn panorama_with_bad_depth_is_empty() {
    assert!(panorama_rgba(1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0).is_empty());
}

#[test]
fn estimate_recovers_roll() {
    let v = parse(&estimate_synthetic(2, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0));
    let roll = v["pose"]["roll"].as_f64().unwrap();
    assert!((roll / 0.05 - 1.0).abs() < 0.02, "{roll}");
    assert_eq!(v["raw"].as_array().unwrap().len(), 50);
    assert_eq!(v["filtered"].as_array().unwrap().len(), 50);
    assert!(v["omega"].as_f64().unwrap() > 0.0);
}

#[test]
fn estimate_error_is_json() {
    let v = parse(&estimate_synthetic(2, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1));
    assert!(v["error"]["kind"].is_string());
}

#[test]
fn robust_fit_beats_least_squares_with_outliers() {
    let v = parse(&fit_comparison(3, 8.75, 0.0, 0.0, 0.3, 0.2, 30.0, 2.0));
    let err = |k: &str| {
        (v[k]["amplitude"].as_f64().unwrap() - 8.75)
            .abs()
            .max(v[k]["offset"].as_f64().unwrap().abs())
    };
    assert!(err("robust") < err("least_squares"), "{v}");
    assert_eq!(v["outlier"].as_array().unwrap().iter().filter(|o| o.as_bool().unwrap()).count(), 10);
    assert_eq!(v["samples"].as_array().unwrap().len(), 50);
}
