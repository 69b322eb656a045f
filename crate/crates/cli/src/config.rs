//! Configuration layering: command-line flag, then JSON file, then defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use diffpad::pipeline::working_dims;
use diffpad::{Denoiser, DiffPadConfig, GalleryDenoiser, Image, Shape};

use crate::io::{list_images, read_image};

/// Options shared by the commands that run the defense.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config with sections schedule, sampler, localizer, denoiser, pipeline.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Down-sampling factor of the degradation.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Denoiser evaluations per restoration.
    #[arg(long)]
    pub nfe: Option<usize>,
    /// Observation noise level, in the denoiser's value range.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Slope of the dynamic threshold in the restoration MSE.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Offset of the dynamic threshold.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Residual level for the localization mask.
    #[arg(long)]
    pub tau_prime: Option<f64>,
    /// Inputs with restoration MSE below this are returned unchanged.
    #[arg(long)]
    pub clean_gate: Option<f64>,
    /// Directory of clean images used as the diffusion prior.
    #[arg(long)]
    pub gallery_dir: Option<PathBuf>,
    /// ONNX noise-prediction network (needs the `onnx` feature).
    #[arg(long)]
    pub model_path: Option<PathBuf>,
    /// Write 0 for runtime_ms so artifacts are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
}

pub fn load_config(path: Option<&Path>) -> Result<DiffPadConfig> {
    let Some(path) = path else {
        return Ok(DiffPadConfig::default());
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

impl RunArgs {
    /// Effective configuration after applying flags over the file.
    pub fn resolve(&self) -> Result<DiffPadConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(seed => pipeline.seed);
        set!(scale => pipeline.scale);
        set!(nfe => sampler.nfe);
        set!(sigma => sampler.sigma);
        set!(mu => localizer.mu);
        set!(nu => localizer.nu);
        set!(tau_prime => localizer.tau_prime);
        set!(clean_gate => localizer.clean_gate);
        if let Some(p) = &self.model_path {
            cfg.denoiser.model_path = Some(p.clone());
            cfg.denoiser.gallery_dir = None;
        }
        if let Some(p) = &self.gallery_dir {
            cfg.denoiser.gallery_dir = Some(p.clone());
            if self.model_path.is_none() {
                cfg.denoiser.model_path = None;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Gallery images reflect-padded to the working size of `shape`.
pub fn load_gallery(paths: &[PathBuf], shape: Shape, scale: usize) -> Result<Vec<Image>> {
    let (hp, wp) = working_dims(shape.height, shape.width, scale);
    paths
        .iter()
        .map(|p| {
            let img = read_image(p)?;
            if img.shape() != shape {
                bail!(
                    "gallery image {} is {}x{}x{}, input is {}x{}x{}",
                    p.display(),
                    img.height(),
                    img.width(),
                    img.channels(),
                    shape.height,
                    shape.width,
                    shape.channels
                );
            }
            Ok(if (hp, wp) == (img.height(), img.width()) {
                img
            } else {
                img.pad_reflect(hp, wp)?
            })
        })
        .collect()
}

/// Builds the configured denoiser for inputs of `shape`. `fallback` is used as
/// the gallery when neither a model nor a gallery directory is configured.
pub fn build_denoiser(
    cfg: &DiffPadConfig,
    shape: Shape,
    fallback: Option<&[PathBuf]>,
) -> Result<Box<dyn Denoiser>> {
    if let Some(path) = &cfg.denoiser.model_path {
        return load_model(path, shape, cfg.pipeline.scale);
    }
    let listed;
    let paths = match (&cfg.denoiser.gallery_dir, fallback) {
        (Some(dir), _) => {
            listed = list_images(dir)?;
            &listed[..]
        }
        (None, Some(paths)) => paths,
        (None, None) => bail!("no denoiser configured: pass --gallery-dir or --model-path"),
    };
    if paths.is_empty() {
        bail!("gallery is empty");
    }
    let images = load_gallery(paths, shape, cfg.pipeline.scale)?;
    Ok(Box::new(GalleryDenoiser::with_temperature(
        images,
        cfg.denoiser.temperature,
    )?))
}

#[cfg(feature = "onnx")]
fn load_model(path: &Path, shape: Shape, scale: usize) -> Result<Box<dyn Denoiser>> {
    let (h, w) = working_dims(shape.height, shape.width, scale);
    let model = diffpad::onnx::OnnxDenoiser::load(path, Shape::new(h, w, shape.channels))?;
    Ok(Box::new(model))
}

#[cfg(not(feature = "onnx"))]
fn load_model(path: &Path, _shape: Shape, _scale: usize) -> Result<Box<dyn Denoiser>> {
    bail!("cannot load {}: built without the `onnx` feature", path.display())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"sampler": {"nfe": 8}, "pipeline": {"seed": 5, "scale": 2}}"#,
        )
        .unwrap();
        let args = RunArgs {
            config: Some(path.clone()),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.pipeline.seed, 9);
        assert_eq!(cfg.pipeline.scale, 2);
        assert_eq!(cfg.sampler.nfe, 8);
        assert_eq!(cfg.localizer.clean_gate, 62.0);

        std::fs::write(&path, r#"{"sampler": {"nfe": 8}, "extra": 1}"#).unwrap();
        assert!(args.resolve().is_err());
        let bad = RunArgs {
            sigma: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
    }
}
