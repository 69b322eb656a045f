//! End-to-end decontamination: restore, localize, inpaint.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::{Denoiser, DEFAULT_GALLERY_TEMPERATURE};
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, PatchBox};
use crate::image::{Image, CANONICAL_MAX};
use crate::kernel::{blur_decimate, make_bicubic_kernel};
use crate::localizer::{
    binarize, dynamic_threshold, estimate_patch_area, estimate_side, is_clean, locate_patch, residual_map,
    restoration_mse, LocalizerConfig, ResidualMap,
};
use crate::sampler::{restore, RestorationTask, SamplerConfig};
use crate::schedule::{NoiseSchedule, ScheduleConfig};

pub const DEFAULT_SCALE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    pub model_path: Option<PathBuf>,
    pub gallery_dir: Option<PathBuf>,
    pub temperature: f64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            model_path: None,
            gallery_dir: None,
            temperature: DEFAULT_GALLERY_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Down-sampling factor s of the resolution degradation.
    pub scale: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scale: DEFAULT_SCALE,
            seed: 0,
        }
    }
}

/// Every tunable of the defense, grouped as in the JSON config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffPadConfig {
    pub schedule: ScheduleConfig,
    pub sampler: SamplerConfig,
    pub localizer: LocalizerConfig,
    pub denoiser: DenoiserConfig,
    pub pipeline: PipelineConfig,
}

impl DiffPadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pipeline.scale == 0 {
            return Err(Error::invalid("pipeline.scale", "must be at least 1"));
        }
        self.sampler.validate()?;
        if self.sampler.nfe > self.schedule.steps {
            return Err(Error::invalid(
                "sampler.nfe",
                format!(
                    "{} exceeds schedule.T = {}",
                    self.sampler.nfe, self.schedule.steps
                ),
            ));
        }
        let l = &self.localizer;
        for (name, v) in [
            ("localizer.mu", l.mu),
            ("localizer.nu", l.nu),
            ("localizer.tau_prime", l.tau_prime),
            ("localizer.clean_gate", l.clean_gate),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        self.schedule.build().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub restoration_mse: f64,
    /// Dynamic threshold; absent when the clean gate fires.
    pub tau: Option<f64>,
    pub estimated_area: Option<usize>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecontaminationResult {
    pub output: Image,
    pub clean_flag: bool,
    pub detected: Option<PatchBox>,
    pub diagnostics: Diagnostics,
}

/// Serializable part of a [`DecontaminationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub clean_flag: bool,
    pub detected: Option<PatchBox>,
    pub diagnostics: Diagnostics,
}

impl DecontaminationResult {
    pub fn summary(&self) -> ResultSummary {
        ResultSummary {
            clean_flag: self.clean_flag,
            detected: self.detected,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Copy with the wall-clock field zeroed, for reproducible artifacts.
    pub fn without_timing(mut self) -> Self {
        self.diagnostics.runtime_ms = 0.0;
        self
    }
}

/// Output of the localization half of the pipeline (restore + locate, no inpainting).
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub restored: Image,
    pub residual: ResidualMap,
    pub clean_flag: bool,
    pub detected: Option<PatchBox>,
    pub restoration_mse: f64,
    pub tau: Option<f64>,
    pub estimated_area: Option<usize>,
}

/// Seed for stream `stream` of a run seeded with `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Size the sampler works at: each side rounded up to a multiple of `s`.
/// Shape-bound denoisers must accept this size.
pub fn working_dims(height: usize, width: usize, s: usize) -> (usize, usize) {
    (height.div_ceil(s) * s, width.div_ceil(s) * s)
}

/// Bicubic anti-aliased down-sampling by `s`, reflect-padding first if needed.
pub fn bicubic_downsample(x: &Image, s: usize) -> Result<Image> {
    let k = make_bicubic_kernel(s)?;
    let (hp, wp) = working_dims(x.height(), x.width(), s);
    let padded;
    let src = if (hp, wp) == (x.height(), x.width()) {
        x
    } else {
        padded = x.pad_reflect(hp, wp)?;
        &padded
    };
    let mut data = Vec::with_capacity(hp * wp / (s * s) * x.channels());
    for c in 0..x.channels() {
        data.extend(blur_decimate(src.plane(c), hp, wp, s, &k)?);
    }
    Image::from_planar(hp / s, wp / s, x.channels(), data)
}

/// (1 − A)⊙x_c + A⊙δ, with A the indicator of `b`; `delta` is full-size.
pub fn apply_patch(x_c: &Image, delta: &Image, b: &PatchBox) -> Result<Image> {
    x_c.ensure_same_shape(delta)?;
    b.check_fits(x_c.height(), x_c.width())?;
    let mut out = x_c.clone();
    for c in 0..x_c.channels() {
        for y in b.top..b.top + b.side {
            for x in b.left..b.left + b.side {
                out.set(y, x, c, delta.get(y, x, c));
            }
        }
    }
    Ok(out)
}

/// Pastes a side×side patch content at `b`.
pub fn paste_patch(x_c: &Image, patch: &Image, b: &PatchBox) -> Result<Image> {
    if (patch.height(), patch.width(), patch.channels()) != (b.side, b.side, x_c.channels()) {
        return Err(Error::shape(
            format!("{0}x{0}x{1} patch", b.side, x_c.channels()),
            patch.shape(),
        ));
    }
    b.check_fits(x_c.height(), x_c.width())?;
    let delta = Image::from_fn(x_c.height(), x_c.width(), x_c.channels(), |y, x, c| {
        if b.contains(y, x) {
            patch.get(y - b.top, x - b.left, c)
        } else {
            x_c.get(y, x, c)
        }
    });
    apply_patch(x_c, &delta, b)
}

/// Stand-in patch patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    UniformNoise,
    Checker,
    HighContrast,
}

impl PatchKind {
    pub const ALL: [PatchKind; 3] = [
        PatchKind::UniformNoise,
        PatchKind::Checker,
        PatchKind::HighContrast,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PatchKind::UniformNoise => "uniform_noise",
            PatchKind::Checker => "checker",
            PatchKind::HighContrast => "high_contrast",
        }
    }
}

impl std::str::FromStr for PatchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PatchKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("kind", format!("unknown patch kind `{s}`")))
    }
}

/// Deterministic 3-channel patch content of the given kind.
pub fn make_synthetic_patch(kind: PatchKind, side: usize, seed: u64) -> Result<Image> {
    if side == 0 {
        return Err(Error::invalid("side", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        PatchKind::UniformNoise => {
            let data = (0..side * side * 3)
                .map(|_| rng.random_range(0.0..=CANONICAL_MAX))
                .collect();
            Image::from_planar(side, side, 3, data)?
        }
        PatchKind::Checker => {
            Image::from_fn(
                side,
                side,
                3,
                |y, x, _| {
                    if (x + y) % 2 == 0 {
                        0.0
                    } else {
                        CANONICAL_MAX
                    }
                },
            )
        }
        PatchKind::HighContrast => {
            let cells = side.div_ceil(2);
            let bits: Vec<bool> = (0..cells * cells * 3).map(|_| rng.random_bool(0.5)).collect();
            Image::from_fn(side, side, 3, |y, x, c| {
                if bits[(c * cells + y / 2) * cells + x / 2] {
                    CANONICAL_MAX
                } else {
                    0.0
                }
            })
        }
    })
}

/// Smooth pseudo-natural RGB scene, values within [20, 235].
pub fn synthetic_scene(height: usize, width: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(70.0..185.0));
    let gradient: [(f64, f64); 3] =
        std::array::from_fn(|_| (rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)));
    let waves: Vec<(f64, f64, f64, f64, usize)> = (0..4)
        .map(|i| {
            (
                rng.random_range(0.5..3.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..tau),
                rng.random_range(10.0..30.0),
                i % 3,
            )
        })
        .collect();
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..0.9),
                rng.random_range(0.08..0.2),
                std::array::from_fn(|_| rng.random_range(-50.0..50.0)),
            )
        })
        .collect();
    Image::from_fn(height, width, 3, |y, x, c| {
        let (u, v) = (y as f64 / height as f64, x as f64 / width as f64);
        let mut val = base[c] + gradient[c].0 * (u - 0.5) + gradient[c].1 * (v - 0.5);
        for &(fu, fv, ph, amp, ch) in &waves {
            let gain = if ch == c { 1.0 } else { 0.4 };
            val += gain * amp * (tau * (fu * u + fv * v) + ph).sin();
        }
        for &(cu, cv, r, amp) in &blobs {
            let d2 = ((u - cu).powi(2) + (v - cv).powi(2)) / (r * r);
            val += amp[c] * (-d2).exp();
        }
        val.clamp(20.0, 235.0)
    })
}

/// Side length whose square is closest to `fraction` of the image area.
pub fn side_for_fraction(height: usize, width: usize, fraction: f64) -> usize {
    estimate_side(
        (fraction * (height * width) as f64).round() as usize,
        height,
        width,
    )
}

/// Uniformly placed box of the given side.
pub fn random_box(height: usize, width: usize, side: usize, seed: u64) -> Result<PatchBox> {
    if side == 0 || side > height.min(width) {
        return Err(Error::invalid(
            "side",
            format!("{side} does not fit {height}x{width}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(PatchBox::new(
        rng.random_range(0..=height - side),
        rng.random_range(0..=width - side),
        side,
    ))
}

/// Steps 1–5: degrade, restore, gate, threshold and locate.
pub fn localize(x: &Image, cfg: &DiffPadConfig, den: &dyn Denoiser) -> Result<Localization> {
    cfg.validate()?;
    let sched = cfg.schedule.build()?;
    localize_with(x, cfg, &sched, den)
}

fn localize_with(
    x: &Image,
    cfg: &DiffPadConfig,
    sched: &NoiseSchedule,
    den: &dyn Denoiser,
) -> Result<Localization> {
    let s = cfg.pipeline.scale;
    let (h, w) = (x.height(), x.width());
    let (hp, wp) = working_dims(h, w, s);
    let y = bicubic_downsample(x, s)?;
    let task = RestorationTask::super_resolution(y, s, make_bicubic_kernel(s)?, cfg.sampler.sigma)?;
    let restored = restore(&task, den, sched, &cfg.sampler, derive_seed(cfg.pipeline.seed, 0))?;
    let restored = if (hp, wp) == (h, w) {
        restored
    } else {
        restored.crop(h, w)?
    };

    let residual = residual_map(x, &restored)?;
    let mse = restoration_mse(x, &restored)?;
    let l = &cfg.localizer;
    if is_clean(mse, l.clean_gate) {
        return Ok(Localization {
            restored,
            residual,
            clean_flag: true,
            detected: None,
            restoration_mse: mse,
            tau: None,
            estimated_area: None,
        });
    }
    let tau = dynamic_threshold(mse, l.mu, l.nu);
    let area = estimate_patch_area(&residual, tau);
    let side = estimate_side(area, h, w);
    let detected = locate_patch(&binarize(&residual, l.tau_prime), side)?;
    Ok(Localization {
        restored,
        residual,
        clean_flag: false,
        detected: Some(detected),
        restoration_mse: mse,
        tau: Some(tau),
        estimated_area: Some(area),
    })
}

/// Runs the full defense on a canonical-scale image.
pub fn defend(x: &Image, cfg: &DiffPadConfig, den: &dyn Denoiser) -> Result<DecontaminationResult> {
    let start = Instant::now();
    cfg.validate()?;
    if !x.is_finite() {
        return Err(Error::NonFinite("input image".into()));
    }
    let sched = cfg.schedule.build()?;
    let loc = localize_with(x, cfg, &sched, den)?;

    let output = match loc.detected {
        None => x.clone(),
        Some(b) => {
            // inpaint at the working size so the denoiser sees one shape per run
            let (h, w) = (x.height(), x.width());
            let (hp, wp) = working_dims(h, w, cfg.pipeline.scale);
            let mask = BinaryMask::from_box(hp, wp, &b)?.invert();
            let y = if (hp, wp) == (h, w) {
                x.clone()
            } else {
                x.pad_reflect(hp, wp)?
            };
            let task = RestorationTask::inpainting(y, mask, cfg.sampler.sigma)?;
            let filled = restore(
                &task,
                den,
                &sched,
                &cfg.sampler,
                derive_seed(cfg.pipeline.seed, 1),
            )?;
            if (hp, wp) == (h, w) {
                filled
            } else {
                filled.crop(h, w)?
            }
        }
    };
    Ok(DecontaminationResult {
        output,
        clean_flag: loc.clean_flag,
        detected: loc.detected,
        diagnostics: Diagnostics {
            restoration_mse: loc.restoration_mse,
            tau: loc.tau,
            estimated_area: loc.estimated_area,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// Defends each image concurrently; image `i` runs with seed `derive_seed(base, i)`.
pub fn defend_batch(
    images: &[Image],
    cfg: &DiffPadConfig,
    den: &dyn Denoiser,
) -> Vec<Result<DecontaminationResult>> {
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut c = cfg.clone();
            c.pipeline.seed = derive_seed(cfg.pipeline.seed, 1000 + i as u64);
            defend(img, &c, den)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::GalleryDenoiser;
    use crate::localizer::{DEFAULT_CLEAN_GATE, DEFAULT_MU, DEFAULT_NU, DEFAULT_TAU_PRIME};
    use crate::sampler::{DEFAULT_NFE, DEFAULT_SIGMA};

    #[test]
    fn shipped_defaults() {
        let cfg = DiffPadConfig::default();
        assert_eq!(cfg.localizer.mu, 0.066);
        assert_eq!(cfg.localizer.nu, 14.90);
        assert_eq!(cfg.localizer.tau_prime, 9.0);
        assert_eq!(cfg.localizer.clean_gate, 62.0);
        assert_eq!(cfg.sampler.nfe, 20);
        assert_eq!(cfg.sampler.sigma, 0.001);
        assert_eq!(cfg.pipeline.scale, 4);
        assert_eq!(
            (DEFAULT_MU, DEFAULT_NU, DEFAULT_TAU_PRIME, DEFAULT_CLEAN_GATE),
            (0.066, 14.90, 9.0, 62.0)
        );
        assert_eq!((DEFAULT_NFE, DEFAULT_SIGMA, DEFAULT_SCALE), (20, 0.001, 4));
        cfg.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let mut cfg = DiffPadConfig::default();
        cfg.pipeline.scale = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = DiffPadConfig::default();
        cfg.sampler.sigma = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DiffPadConfig::default();
        cfg.schedule.steps = 10;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn apply_patch_examples() {
        let x = synthetic_scene(4, 4, 1);
        assert_eq!(apply_patch(&x, &x, &PatchBox::new(1, 1, 2)).unwrap(), x);
        let delta = Image::filled(4, 4, 3, 200.0);
        assert_eq!(apply_patch(&x, &delta, &PatchBox::new(0, 0, 4)).unwrap(), delta);
        let out = apply_patch(&x, &delta, &PatchBox::new(1, 1, 2)).unwrap();
        for c in 0..3 {
            for y in 0..4 {
                for xx in 0..4 {
                    let inside = (1..3).contains(&y) && (1..3).contains(&xx);
                    let want = if inside { 200.0 } else { x.get(y, xx, c) };
                    assert_eq!(out.get(y, xx, c), want);
                }
            }
        }
        assert!(matches!(
            apply_patch(&x, &delta, &PatchBox::new(3, 3, 2)),
            Err(Error::BoxOutOfBounds { .. })
        ));
    }

    #[test]
    fn synthetic_patch_examples() {
        let c = make_synthetic_patch(PatchKind::Checker, 2, 9).unwrap();
        for ch in 0..3 {
            assert_eq!(c.plane(ch), &[0.0, 255.0, 255.0, 0.0]);
        }
        let a = make_synthetic_patch(PatchKind::UniformNoise, 6, 42).unwrap();
        assert_eq!(a, make_synthetic_patch(PatchKind::UniformNoise, 6, 42).unwrap());
        assert_ne!(a, make_synthetic_patch(PatchKind::UniformNoise, 6, 43).unwrap());

        let hc = make_synthetic_patch(PatchKind::HighContrast, 8, 5).unwrap();
        let n = hc.as_slice().len() as f64;
        let mean = hc.as_slice().iter().sum::<f64>() / n;
        let std = (hc.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(std >= 64.0, "{std}");
        let (lo, hi) = hc.min_max();
        assert!(hi - lo >= 127.5);
        assert!(make_synthetic_patch(PatchKind::Checker, 0, 0).is_err());
        assert_eq!("checker".parse::<PatchKind>().unwrap(), PatchKind::Checker);
        assert!("plaid".parse::<PatchKind>().is_err());
    }

    #[test]
    fn downsample_examples() {
        let x = synthetic_scene(8, 8, 3);
        assert_eq!(bicubic_downsample(&x, 1).unwrap(), x);
        let flat = Image::filled(8, 12, 3, 77.0);
        let low = bicubic_downsample(&flat, 4).unwrap();
        assert_eq!((low.height(), low.width()), (2, 3));
        assert!(low.as_slice().iter().all(|v| (v - 77.0).abs() < 1e-9));
        // odd sizes are reflect-padded up to the next multiple
        let odd = bicubic_downsample(&Image::filled(9, 10, 1, 5.0), 4).unwrap();
        assert_eq!((odd.height(), odd.width()), (3, 3));
    }

    #[test]
    fn ramp_downsample_matches_dense_operator() {
        let x = Image::from_fn(8, 8, 1, |y, xx, _| (3 * y + 5 * xx) as f64);
        let low = bicubic_downsample(&x, 2).unwrap();
        let k = make_bicubic_kernel(2).unwrap();
        for ly in 0..4 {
            for lx in 0..4 {
                let mut acc = 0.0;
                for (dy, dx, wt) in k.offsets() {
                    let sy = ((2 * ly) as isize - dy).rem_euclid(8) as usize;
                    let sx = ((2 * lx) as isize - dx).rem_euclid(8) as usize;
                    acc += wt * x.get(sy, sx, 0);
                }
                assert!((low.get(ly, lx, 0) - acc).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn seeds_are_distinct_per_stream() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn clean_image_passes_through() {
        let gallery: Vec<Image> = (0..3).map(|i| synthetic_scene(32, 32, 100 + i)).collect();
        let den = GalleryDenoiser::new(gallery.clone()).unwrap();
        let cfg = DiffPadConfig::default();
        let r = defend(&gallery[1], &cfg, &den).unwrap();
        assert!(r.clean_flag);
        assert!(r.detected.is_none());
        assert_eq!(r.output, gallery[1]);
    }

    #[test]
    fn patched_image_is_detected_and_repaired() {
        let gallery: Vec<Image> = (0..3).map(|i| synthetic_scene(32, 32, 200 + i)).collect();
        let den = GalleryDenoiser::new(gallery.clone()).unwrap();
        let truth = PatchBox::new(9, 14, 8);
        let patch = make_synthetic_patch(PatchKind::HighContrast, 8, 4).unwrap();
        let x = paste_patch(&gallery[0], &patch, &truth).unwrap();
        let cfg = DiffPadConfig::default();
        let r = defend(&x, &cfg, &den).unwrap();
        assert!(!r.clean_flag);
        let found = r.detected.unwrap();
        assert!(
            crate::metrics::box_miou(Some(&found), Some(&truth)) >= 0.5,
            "{found:?}"
        );
        let again = defend(&x, &cfg, &den).unwrap();
        assert_eq!(r.clone().without_timing(), again.without_timing());
        assert!(
            crate::metrics::psnr_canonical(&r.output, &gallery[0]).unwrap()
                > crate::metrics::psnr_canonical(&x, &gallery[0]).unwrap()
        );
    }

    #[test]
    fn batch_matches_individual_runs() {
        let gallery: Vec<Image> = (0..2).map(|i| synthetic_scene(16, 16, 300 + i)).collect();
        let den = GalleryDenoiser::new(gallery.clone()).unwrap();
        let cfg = DiffPadConfig::default();
        let batch = defend_batch(&gallery, &cfg, &den);
        for (i, r) in batch.into_iter().enumerate() {
            let mut c = cfg.clone();
            c.pipeline.seed = derive_seed(cfg.pipeline.seed, 1000 + i as u64);
            assert_eq!(
                r.unwrap().without_timing(),
                defend(&gallery[i], &c, &den).unwrap().without_timing()
            );
        }
    }

    #[test]
    fn odd_sizes_run_at_one_working_shape() {
        let (h, w) = (30, 27);
        assert_eq!(working_dims(h, w, 4), (32, 28));
        let gallery: Vec<Image> = (0..2)
            .map(|i| synthetic_scene(h, w, 400 + i).pad_reflect(32, 28).unwrap())
            .collect();
        let den = GalleryDenoiser::new(gallery).unwrap();
        let clean = synthetic_scene(h, w, 400);
        let patch = make_synthetic_patch(PatchKind::Checker, 7, 0).unwrap();
        let x = paste_patch(&clean, &patch, &PatchBox::new(20, 18, 7)).unwrap();
        let r = defend(&x, &DiffPadConfig::default(), &den).unwrap();
        assert_eq!(r.output.shape(), x.shape());
        assert!(r.detected.unwrap().fits(h, w));
    }
}
