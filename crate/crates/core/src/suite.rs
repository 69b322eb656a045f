//! Synthetic patch suite: paste stand-in patches of fixed area fractions onto
//! clean images, run the defense, and score the localization.

use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::geometry::PatchBox;
use crate::image::Image;
use crate::metrics::{box_miou, psnr_canonical, spearman};
use crate::pipeline::{
    defend, derive_seed, make_synthetic_patch, paste_patch, random_box, side_for_fraction,
    DecontaminationResult, DiffPadConfig, PatchKind,
};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.03, 0.05, 0.07];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    /// Patch areas as fractions of the image area.
    pub fractions: Vec<f64>,
    pub kinds: Vec<PatchKind>,
    /// Number of placements per (fraction, kind).
    pub seeds: u64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            kinds: PatchKind::ALL.to_vec(),
            seeds: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub kind: PatchKind,
    pub fraction: f64,
    pub seed: u64,
    pub truth: PatchBox,
    /// Seed of the patch content.
    pub content_seed: u64,
}

impl SuiteCase {
    /// Short label such as `checker-5pct-s2`.
    pub fn label(&self) -> String {
        format!(
            "{}-{}pct-s{}",
            self.kind.name(),
            (self.fraction * 100.0).round(),
            self.seed
        )
    }
}

/// Cases for one image, in (kind, fraction, seed) order. Placements depend on
/// `base_seed` and `image_index` only.
pub fn suite_cases(
    spec: &SuiteSpec,
    height: usize,
    width: usize,
    image_index: u64,
    base_seed: u64,
) -> Result<Vec<SuiteCase>> {
    let stream = derive_seed(base_seed, image_index);
    let mut out = Vec::new();
    for (ki, &kind) in spec.kinds.iter().enumerate() {
        for (fi, &fraction) in spec.fractions.iter().enumerate() {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::invalid("fraction", format!("{fraction} not in (0, 1)")));
            }
            let side = side_for_fraction(height, width, fraction);
            for seed in 0..spec.seeds {
                let key = ((ki as u64) << 40) | ((fi as u64) << 20) | seed;
                let truth = random_box(height, width, side, derive_seed(stream, 2 * key))?;
                out.push(SuiteCase {
                    kind,
                    fraction,
                    seed,
                    truth,
                    content_seed: derive_seed(stream, 2 * key + 1),
                });
            }
        }
    }
    Ok(out)
}

pub fn patched_input(clean: &Image, case: &SuiteCase) -> Result<Image> {
    let patch = make_synthetic_patch(case.kind, case.truth.side, case.content_seed)?;
    paste_patch(clean, &patch, &case.truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub case: SuiteCase,
    pub result: DecontaminationResult,
    pub miou: f64,
    /// PSNR of the defended output against the clean image.
    pub psnr: f64,
}

pub fn run_case(
    clean: &Image,
    case: &SuiteCase,
    cfg: &DiffPadConfig,
    den: &dyn Denoiser,
) -> Result<CaseOutcome> {
    let x = patched_input(clean, case)?;
    let result = defend(&x, cfg, den)?;
    Ok(CaseOutcome {
        case: *case,
        miou: box_miou(result.detected.as_ref(), Some(&case.truth)),
        psnr: psnr_canonical(&result.output, clean)?,
        result,
    })
}

/// Spearman correlation between true patch area and restoration MSE within
/// each group, averaged over the groups where it is defined.
pub fn mean_area_mse_correlation<'a>(
    groups: impl IntoIterator<Item = &'a [CaseOutcome]>,
) -> Result<Option<f64>> {
    let mut acc = Vec::new();
    for g in groups {
        let area: Vec<f64> = g.iter().map(|o| o.case.truth.area() as f64).collect();
        let mse: Vec<f64> = g.iter().map(|o| o.result.diagnostics.restoration_mse).collect();
        if let Some(r) = spearman(&area, &mse)? {
            acc.push(r);
        }
    }
    Ok((!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64))
}
