#![cfg(feature = "onnx")]

use std::path::PathBuf;

use diffpad::onnx::OnnxDenoiser;
use diffpad::{predict_noise, Image, NoiseSchedule, Shape};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/affine_eps.onnx")
}

// The fixture computes ε = 0.5·x + (t − 1)/1000 and pads with extra zero channels.
#[test]
fn evaluates_the_fixture_network() {
    let den = OnnxDenoiser::load(&fixture(), Shape::new(8, 8, 3)).unwrap();
    let sched = NoiseSchedule::default();
    let x = Image::from_fn(8, 8, 3, |y, xx, c| (y as f64 - xx as f64) / 8.0 + c as f64 * 0.1);
    let eps = predict_noise(&den, &x, 251, &sched).unwrap();
    for (e, v) in eps.as_slice().iter().zip(x.as_slice()) {
        assert!((e - (0.5 * v + 0.25)).abs() < 1e-6, "{e} vs {v}");
    }
    assert!(predict_noise(&den, &Image::zeros(4, 4, 3), 1, &sched).is_err());
}

#[test]
fn load_errors_are_reported() {
    assert!(OnnxDenoiser::load(&PathBuf::from("/nonexistent.onnx"), Shape::new(8, 8, 3)).is_err());
    let junk = std::env::temp_dir().join("diffpad-junk.onnx");
    std::fs::write(&junk, b"not a model").unwrap();
    assert!(matches!(
        OnnxDenoiser::load(&junk, Shape::new(8, 8, 3)),
        Err(diffpad::Error::Model(_))
    ));
}
