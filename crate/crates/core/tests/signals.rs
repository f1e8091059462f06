use std::fs;

use raf_lab_core::problems::{load_signal, psnr, Psnr, SignalFormat};
use raf_lab_core::Error;
use tempfile::TempDir;

#[test]
fn pgm_round_trip_scores_its_own_pixels_as_perfect() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ramp.pgm");
    let pixels: Vec<String> = (0..12).map(|i| (i * 20).to_string()).collect();
    fs::write(&path, format!("P2\n# ramp\n4 3\n255\n{}\n", pixels.join(" "))).unwrap();
    let ds = load_signal(&path, SignalFormat::from_path(&path).unwrap()).unwrap();
    assert_eq!(ds.len(), 12);
    assert_eq!(ds.dim(), 2);
    // values within half a level of the truth round back onto it
    let nudged: Vec<f64> = ds.values.iter().map(|v| v + 0.9 / 255.0).collect();
    assert_eq!(psnr(&nudged, &ds).unwrap(), Psnr::PerfectFit);
    let off: Vec<f64> = ds.values.iter().map(|v| v + 0.1).collect();
    assert!(matches!(psnr(&off, &ds).unwrap(), Psnr::Finite(db) if db > 20.0 && db < 40.0));
}

#[test]
fn csv_series_loads_one_dimensional_coordinates() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("s.csv");
    fs::write(&path, "0.0,1.0\n0.5,-1.0\n1.0,0.0\n").unwrap();
    let ds = load_signal(&path, SignalFormat::Csv).unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.dim(), 1);
}

#[test]
fn missing_and_malformed_files_are_errors() {
    let dir = TempDir::new().unwrap();
    assert!(matches!(load_signal(&dir.path().join("none.pgm"), SignalFormat::Pgm), Err(Error::Io(_))));
    let bad = dir.path().join("bad.pgm");
    fs::write(&bad, "P2\n2 2\n255\n1 2 3\n").unwrap();
    assert!(load_signal(&bad, SignalFormat::Pgm).is_err());
}
