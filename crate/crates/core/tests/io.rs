mod common;

use common::{circle, random_potential, rng};
use finitegap::io::{curve_csv, curve_json, read_potential, to_json, write_potential, Chart, PotentialFile};
use finitegap::reconstruct::sym_reconstruct;
use finitegap::Error;
use serde_json::Value;

#[test]
fn potential_files_round_trip_bit_identically() {
    let mut r = rng(50);
    for _ in 0..5 {
        let q = random_potential(&mut r, 6, 2.0).with_theta(0.25);
        let mut file = PotentialFile::from_potential(&q);
        file.warning = Some("note".into());
        file.provenance = Some(serde_json::json!({ "n": 4 }));
        let text = write_potential(&file).unwrap();
        let back = read_potential(&text).unwrap();
        assert_eq!(write_potential(&back).unwrap(), text);
        assert_eq!(back.potential().unwrap(), q);
        assert_eq!(back.warning.as_deref(), Some("note"));
    }
}

#[test]
fn theta_defaults_to_zero() {
    let f = read_potential(r#"{"T": 6.283185307179586, "modes": [[0, 1.4142135623730951, 0.0]]}"#).unwrap();
    assert_eq!(f.theta, 0.0);
    assert_eq!(f.potential().unwrap(), circle());
}

#[test]
fn invalid_potentials_are_rejected() {
    let dup = read_potential(r#"{"T": 1.0, "modes": [[1, 0.0, 0.0], [1, 1.0, 0.0]]}"#).unwrap();
    assert!(matches!(dup.potential(), Err(Error::InvalidInput(_))));
    let bad = read_potential(r#"{"T": -1.0, "modes": []}"#).unwrap();
    assert!(matches!(bad.potential(), Err(Error::InvalidInput(_))));
    assert!(read_potential("[1, 2, 3]").is_err());
    assert!(read_potential(r#"{"modes": []}"#).is_err());
}

#[test]
fn curve_csv_layout() {
    let curve = sym_reconstruct(&circle(), 0.0, 16, 256).unwrap();
    let all = curve_csv(&curve, None);
    let lines: Vec<&str> = all.lines().collect();
    assert_eq!(lines[0], "t,x0,x1,x2,x3,b1,b2,b3");
    assert_eq!(lines.len(), 17);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 8));
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(curve_csv(&curve, Some(Chart::Ball)).lines().next(), Some("t,b1,b2,b3"));
    assert_eq!(curve_csv(&curve, Some(Chart::Hyperboloid)).lines().next(), Some("t,x0,x1,x2,x3"));
}

#[test]
fn curve_json_layout() {
    let curve = sym_reconstruct(&circle(), 0.0, 16, 256).unwrap();
    let v: Value = serde_json::from_str(&curve_json(&curve, None).unwrap()).unwrap();
    assert_eq!(v["t"].as_array().unwrap().len(), 16);
    assert_eq!(v["ball"].as_array().unwrap().len(), 16);
    assert_eq!(v["hyperboloid"][0].as_array().unwrap().len(), 4);
    assert!(v["endpoint_gap"].as_f64().unwrap() < 1e-7);
    let v: Value = serde_json::from_str(&curve_json(&curve, Some(Chart::Ball)).unwrap()).unwrap();
    assert!(v.get("hyperboloid").is_none());
}

#[test]
fn floats_are_written_exactly() {
    let x = [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX];
    let text = to_json(&x).unwrap();
    let back: Vec<f64> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, x);
    assert_eq!(to_json(&f64::NAN).unwrap().trim(), "null");
}
