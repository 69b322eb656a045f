#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffpad::pipeline::synthetic_scene;
use diffpad::{Image, CANONICAL_MAX};

pub const GALLERY_SIZE: usize = 5;
pub const GALLERY_SIDE: usize = 64;

pub fn gallery_images(side: usize) -> Vec<Image> {
    (0..GALLERY_SIZE as u64)
        .map(|i| synthetic_scene(side, side, 700 + i))
        .collect()
}

pub fn save_png(path: &Path, img: &Image) {
    let bytes: Vec<u8> = img
        .to_interleaved()
        .into_iter()
        .map(|v| v.round().clamp(0.0, CANONICAL_MAX) as u8)
        .collect();
    image::RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .unwrap()
        .save(path)
        .unwrap();
}

/// Writes `images` as `img0.png`, `img1.png`, … and returns the paths.
pub fn write_gallery(dir: &Path, images: &[Image]) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let p = dir.join(format!("img{i}.png"));
            save_png(&p, img);
            p
        })
        .collect()
}

/// Gallery rasters after an 8-bit round trip, as the CLI sees them.
pub fn quantized(images: &[Image]) -> Vec<Image> {
    images
        .iter()
        .map(|i| i.map(|v| v.round().clamp(0.0, CANONICAL_MAX)))
        .collect()
}

pub fn diffpad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffpad"))
        .args(args)
        .env_remove("DIFFPAD_THREADS")
        .output()
        .expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
