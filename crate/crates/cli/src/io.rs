//! Image files to and from canonical rasters.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use diffpad::{Image, CANONICAL_MAX};
use image::{DynamicImage, ImageFormat, ImageReader};

const EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Decodes an 8-bit grayscale or RGB image. Alpha is dropped.
pub fn read_image(path: &Path) -> Result<Image> {
    let decoded = ImageReader::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?
        .with_guessed_format()
        .with_context(|| format!("cannot read {}", path.display()))?
        .decode()
        .with_context(|| format!("cannot decode {}", path.display()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let img = match decoded {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            let raw: Vec<f64> = decoded.to_luma8().into_raw().into_iter().map(f64::from).collect();
            Image::from_interleaved(h, w, 1, &raw)?
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let raw: Vec<f64> = decoded.to_rgb8().into_raw().into_iter().map(f64::from).collect();
            Image::from_interleaved(h, w, 3, &raw)?
        }
        other => bail!(
            "{}: unsupported pixel format {:?}, expected 8-bit gray or RGB",
            path.display(),
            other.color()
        ),
    };
    Ok(img)
}

fn output_format(path: &Path) -> Result<ImageFormat> {
    match ImageFormat::from_path(path) {
        Ok(f @ (ImageFormat::Png | ImageFormat::Pnm)) => Ok(f),
        _ => bail!("{}: output must end in .png, .ppm, .pgm or .pnm", path.display()),
    }
}

/// Rounds to 8 bits and writes in the format named by the extension.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let format = output_format(path)?;
    let bytes: Vec<u8> = img
        .to_interleaved()
        .into_iter()
        .map(|v| v.round().clamp(0.0, CANONICAL_MAX) as u8)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, bytes).context("raster size")?),
        3 => DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, bytes).context("raster size")?),
        c => bail!("cannot write a {c}-channel image"),
    };
    dynamic
        .save_with_format(path, format)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && is_image_path(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = Image::from_fn(5, 7, 3, |y, x, c| ((y * 31 + x * 7 + c * 50) % 256) as f64);
        let gray = Image::from_fn(4, 3, 1, |y, x, _| (y * 60 + x) as f64);
        for (img, name) in [
            (&rgb, "a.png"),
            (&rgb, "a.ppm"),
            (&gray, "g.png"),
            (&gray, "g.pgm"),
        ] {
            let p = dir.path().join(name);
            write_image(&p, img).unwrap();
            assert_eq!(&read_image(&p).unwrap(), img, "{name}");
        }
        assert!(write_image(&dir.path().join("x.jpg"), &rgb).is_err());
        assert!(read_image(&dir.path().join("missing.png")).is_err());
        std::fs::write(dir.path().join("junk.png"), b"not an image").unwrap();
        assert!(read_image(&dir.path().join("junk.png")).is_err());
        let listed = list_images(dir.path()).unwrap();
        let names: Vec<_> = listed
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap())
            .collect();
        assert_eq!(names, ["a.png", "a.ppm", "g.pgm", "g.png", "junk.png"]);
    }
}
