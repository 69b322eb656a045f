//! Noise-prediction models ε_θ(x_t, t).
//!
//! The pipeline only needs a noise predictor. Three implementations ship here:
//! a null model, the exact predictor for a diagonal Gaussian data distribution,
//! and a gallery prior whose posterior mean is available in closed form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::{Image, Shape, CANONICAL_MAX};
use crate::schedule::NoiseSchedule;

/// Value range a denoiser expects its inputs in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    /// The `[-1, 1]` range DDPM-style networks are trained on.
    pub const SYMMETRIC_UNIT: ValueRange = ValueRange { lo: -1.0, hi: 1.0 };
    pub const CANONICAL: ValueRange = ValueRange {
        lo: 0.0,
        hi: CANONICAL_MAX,
    };

    /// Maps a canonical `[0, 255]` value into this range.
    pub fn from_canonical(&self, v: f64) -> f64 {
        self.lo + v / CANONICAL_MAX * (self.hi - self.lo)
    }

    pub fn to_canonical(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo) * CANONICAL_MAX
    }

    /// Multiplier taking canonical-scale differences into this range.
    pub fn scale(&self) -> f64 {
        (self.hi - self.lo) / CANONICAL_MAX
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// A noise predictor. Implementations must be pure in `(xt, t)`.
pub trait Denoiser: Send + Sync {
    /// Raw evaluation; callers go through [`predict_noise`], which validates.
    fn eval(&self, xt: &Image, t: usize, sched: &NoiseSchedule) -> Result<Image>;

    /// Input shape the model is bound to, if any.
    fn expected_shape(&self) -> Option<Shape> {
        None
    }

    fn value_range(&self) -> ValueRange {
        ValueRange::SYMMETRIC_UNIT
    }
}

/// Shared handle used across concurrent pipeline runs.
pub type DenoiserHandle = Arc<dyn Denoiser>;

/// Evaluates `den` with range, shape and finiteness checks on both sides.
pub fn predict_noise(den: &dyn Denoiser, xt: &Image, t: usize, sched: &NoiseSchedule) -> Result<Image> {
    sched.check_step(t)?;
    if let Some(shape) = den.expected_shape() {
        if shape != xt.shape() {
            return Err(Error::shape(shape, xt.shape()));
        }
    }
    let eps = den.eval(xt, t, sched)?;
    if eps.shape() != xt.shape() {
        return Err(Error::shape(xt.shape(), eps.shape()));
    }
    if xt.is_finite() && !eps.is_finite() {
        return Err(Error::NonFinite(format!("noise prediction at t={t}")));
    }
    Ok(eps)
}

/// Predicts zero noise everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn eval(&self, xt: &Image, _t: usize, _sched: &NoiseSchedule) -> Result<Image> {
        let s = xt.shape();
        Ok(Image::zeros(s.height, s.width, s.channels))
    }
}

/// Diagonal Gaussian N(μ0, diag(σ0²)) used as an analytic data distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    mean: Vec<f64>,
    variances: Vec<f64>,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.len() != variances.len() {
            return Err(Error::shape(format!("{} variances", mean.len()), variances.len()));
        }
        if mean.is_empty() {
            return Err(Error::invalid("mean", "prior needs at least one dimension"));
        }
        if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid("variances", format!("{v} must be finite and > 0")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mean", "entries must be finite"));
        }
        Ok(Self { mean, variances })
    }

    /// N(0, I_d).
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Score of the diffused marginal N(√ᾱ μ0, ᾱ Σ0 + (1 − ᾱ) I) at an explicit ᾱ.
    pub fn score_at(&self, x: &[f64], alpha_bar: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.score_into(x, alpha_bar, &mut out)?;
        Ok(out)
    }

    /// Allocation-free form of [`score_at`](Self::score_at).
    pub fn score_into(&self, x: &[f64], alpha_bar: f64, out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::shape(self.dim(), x.len()));
        }
        let root = alpha_bar.sqrt();
        for (((o, &xi), &m), &v) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.variances) {
            *o = -(xi - root * m) / (alpha_bar * v + (1.0 - alpha_bar));
        }
        Ok(())
    }
}

/// Analytic score of the VP-diffused Gaussian prior at step `t`.
pub fn gaussian_score(prior: &GaussianPrior, x: &[f64], t: usize, sched: &NoiseSchedule) -> Result<Vec<f64>> {
    prior.score_at(x, sched.alpha_bar(t)?)
}

/// Exact noise predictor for a Gaussian data distribution: ε̂ = −√(1−ᾱ_t)·score.
///
/// Images are flattened in planar order, so the prior dimension must equal
/// `H·W·C`. Works on unscaled values.
#[derive(Debug, Clone)]
pub struct GaussianAnalyticDenoiser {
    prior: GaussianPrior,
}

impl GaussianAnalyticDenoiser {
    pub fn new(prior: GaussianPrior) -> Self {
        Self { prior }
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }
}

impl Denoiser for GaussianAnalyticDenoiser {
    fn eval(&self, xt: &Image, t: usize, sched: &NoiseSchedule) -> Result<Image> {
        let alpha_bar = sched.alpha_bar(t)?;
        let score = self.prior.score_at(xt.as_slice(), alpha_bar)?;
        let k = -(1.0 - alpha_bar).sqrt();
        let s = xt.shape();
        Image::from_planar(
            s.height,
            s.width,
            s.channels,
            score.into_iter().map(|v| k * v).collect(),
        )
    }

    fn value_range(&self) -> ValueRange {
        ValueRange::CANONICAL
    }
}

pub const DEFAULT_GALLERY_TEMPERATURE: f64 = 1.0;

/// Posterior mean of x0 under a uniform prior over `gallery`, given x_t.
///
/// Weights are ∝ exp(−‖x_t − √ᾱ_t g‖² / (2(1 − ᾱ_t)·temperature)), evaluated with
/// log-sum-exp so the small-noise end of the schedule does not underflow.
/// A temperature of zero selects the nearest member outright.
pub fn gallery_x0(
    gallery: &[Image],
    xt: &Image,
    t: usize,
    sched: &NoiseSchedule,
    temperature: f64,
) -> Result<Image> {
    let weights = gallery_weights(gallery, xt, sched.alpha_bar(t)?, temperature)?;
    let s = xt.shape();
    let mut out = Image::zeros(s.height, s.width, s.channels);
    for (g, w) in gallery.iter().zip(&weights) {
        if *w == 0.0 {
            continue;
        }
        for (o, v) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn gallery_weights(gallery: &[Image], xt: &Image, alpha_bar: f64, temperature: f64) -> Result<Vec<f64>> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(
            "temperature",
            format!("{temperature} must be finite and >= 0"),
        ));
    }
    let root = alpha_bar.sqrt();
    let mut sq = Vec::with_capacity(gallery.len());
    for g in gallery {
        g.ensure_same_shape(xt)?;
        let d: f64 = xt
            .as_slice()
            .iter()
            .zip(g.as_slice())
            .map(|(x, v)| {
                let r = x - root * v;
                r * r
            })
            .sum();
        sq.push(d);
    }
    let denom = 2.0 * (1.0 - alpha_bar) * temperature;
    let min = sq.iter().cloned().fold(f64::INFINITY, f64::min);
    if denom == 0.0 {
        // hard-min limit; ties share the weight
        let ties = sq.iter().filter(|&&d| d == min).count() as f64;
        return Ok(sq
            .iter()
            .map(|&d| if d == min { 1.0 / ties } else { 0.0 })
            .collect());
    }
    let logits: Vec<f64> = sq.iter().map(|d| -(d - min) / denom).collect();
    let total: f64 = logits.iter().map(|l| l.exp()).sum();
    Ok(logits.iter().map(|l| l.exp() / total).collect())
}

/// Denoiser whose prior is a finite set of images.
///
/// Gallery members are given on the canonical scale and stored in
/// `[-1, 1]`, matching the range the pipeline feeds DDPM-style models.
#[derive(Debug, Clone)]
pub struct GalleryDenoiser {
    images: Vec<Image>,
    temperature: f64,
}

impl GalleryDenoiser {
    pub fn new(canonical: Vec<Image>) -> Result<Self> {
        Self::with_temperature(canonical, DEFAULT_GALLERY_TEMPERATURE)
    }

    pub fn with_temperature(canonical: Vec<Image>, temperature: f64) -> Result<Self> {
        let first = canonical.first().ok_or(Error::EmptyGallery)?.shape();
        if let Some(bad) = canonical.iter().find(|g| g.shape() != first) {
            return Err(Error::shape(first, bad.shape()));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                format!("{temperature} must be finite and >= 0"),
            ));
        }
        let range = ValueRange::SYMMETRIC_UNIT;
        let images = canonical
            .iter()
            .map(|g| g.map(|v| range.from_canonical(v)))
            .collect();
        Ok(Self { images, temperature })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Gallery members in the denoiser's working range.
    pub fn images(&self) -> &[Image] {
        &self.images
    }
}

impl Denoiser for GalleryDenoiser {
    fn eval(&self, xt: &Image, t: usize, sched: &NoiseSchedule) -> Result<Image> {
        let alpha_bar = sched.alpha_bar(t)?;
        let x0 = gallery_x0(&self.images, xt, t, sched, self.temperature)?;
        let root = alpha_bar.sqrt();
        let inv = 1.0 / (1.0 - alpha_bar).sqrt();
        xt.zip_map(&x0, |x, g| (x - root * g) * inv)
    }

    fn expected_shape(&self) -> Option<Shape> {
        self.images.first().map(Image::shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::estimate_x0;
    use proptest::prelude::*;

    fn sched() -> NoiseSchedule {
        NoiseSchedule::default()
    }

    /// Schedule whose first step has ᾱ = 0.25.
    fn quarter() -> NoiseSchedule {
        NoiseSchedule::from_betas(vec![0.75, 0.5]).unwrap()
    }

    #[test]
    fn zero_denoiser_predicts_zero() {
        let x = Image::filled(3, 2, 3, 9.0);
        let e = predict_noise(&ZeroDenoiser, &x, 17, &sched()).unwrap();
        assert!(e.as_slice().iter().all(|&v| v == 0.0));
        assert!(predict_noise(&ZeroDenoiser, &x, 1001, &sched()).is_err());
    }

    #[test]
    fn standard_prior_score_is_minus_x() {
        let prior = GaussianPrior::standard(3).unwrap();
        let x = [0.3, -2.0, 5.0];
        for t in [1, 250, 1000] {
            let s = gaussian_score(&prior, &x, t, &sched()).unwrap();
            for (a, b) in s.iter().zip(&x) {
                assert!((a + b).abs() < 1e-12);
            }
        }
        // terminal limit: any prior looks standard
        let other = GaussianPrior::new(vec![4.0, -1.0, 2.0], vec![9.0, 0.1, 3.0]).unwrap();
        let s = other.score_at(&x, 1e-30).unwrap();
        for (a, b) in s.iter().zip(&x) {
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn score_closed_form_example() {
        let prior = GaussianPrior::new(vec![3.0], vec![4.0]).unwrap();
        let s = gaussian_score(&prior, &[0.0], 1, &quarter()).unwrap();
        assert!((s[0] - 1.5 / 1.75).abs() < 1e-15);
    }

    #[test]
    fn analytic_denoiser_matches_score_relation() {
        let prior = GaussianPrior::new(vec![1.0, -2.0, 0.5, 3.0], vec![0.5, 2.0, 1.0, 0.25]).unwrap();
        let den = GaussianAnalyticDenoiser::new(prior.clone());
        let x = Image::from_planar(2, 2, 1, vec![0.1, 0.9, -1.3, 2.2]).unwrap();
        let s = sched();
        for t in [1, 10, 500, 1000] {
            let eps = predict_noise(&den, &x, t, &s).unwrap();
            let score = gaussian_score(&prior, x.as_slice(), t, &s).unwrap();
            let k = (1.0 - s.alpha_bar(t).unwrap()).sqrt();
            for (e, sc) in eps.as_slice().iter().zip(&score) {
                assert_eq!(*e, -k * sc);
            }
        }
    }

    #[test]
    fn prior_validation() {
        assert!(GaussianPrior::new(vec![0.0], vec![0.0]).is_err());
        assert!(GaussianPrior::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(GaussianPrior::new(vec![], vec![]).is_err());
        let p = GaussianPrior::standard(2).unwrap();
        assert!(p.score_at(&[1.0], 0.5).is_err());
    }

    #[test]
    fn single_gallery_collapses() {
        let g = Image::from_fn(4, 4, 3, |y, x, c| (y * 40 + x * 7 + c * 3) as f64);
        let xt = Image::filled(4, 4, 3, 0.2);
        let s = sched();
        let x0 = gallery_x0(std::slice::from_ref(&g), &xt, 300, &s, 1.0).unwrap();
        assert_eq!(x0, g);

        let den = GalleryDenoiser::new(vec![g.clone()]).unwrap();
        let t = 300;
        let a = s.alpha_bar(t).unwrap();
        let eps = predict_noise(&den, &xt, t, &s).unwrap();
        let g_unit = &den.images()[0];
        for ((e, x), v) in eps.as_slice().iter().zip(xt.as_slice()).zip(g_unit.as_slice()) {
            let want = (x - a.sqrt() * v) / (1.0 - a).sqrt();
            assert!((e - want).abs() < 1e-12);
        }
        let back = estimate_x0(&xt, t, &eps, &s).unwrap();
        assert!(back.distance(g_unit).unwrap() < 1e-9);
    }

    #[test]
    fn zero_temperature_picks_nearest() {
        let a = Image::filled(2, 2, 1, 0.0);
        let b = Image::filled(2, 2, 1, 1.0);
        let xt = Image::filled(2, 2, 1, 0.8);
        let s = sched();
        let x0 = gallery_x0(&[a.clone(), b.clone()], &xt, 1, &s, 0.0).unwrap();
        assert_eq!(x0, b);
        let soft = gallery_x0(&[a, b.clone()], &xt, 1, &s, 1e-9).unwrap();
        assert!(soft.distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn equidistant_pair_gives_midpoint() {
        let a = Image::filled(2, 3, 1, -1.0);
        let b = Image::filled(2, 3, 1, 1.0);
        let xt = Image::zeros(2, 3, 1);
        let x0 = gallery_x0(&[a, b], &xt, 400, &sched(), 1.0).unwrap();
        assert!(x0.as_slice().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn gallery_errors() {
        let xt = Image::zeros(2, 2, 1);
        assert_eq!(gallery_x0(&[], &xt, 1, &sched(), 1.0), Err(Error::EmptyGallery));
        assert!(GalleryDenoiser::new(vec![]).is_err());
        assert!(GalleryDenoiser::new(vec![Image::zeros(2, 2, 1), Image::zeros(2, 3, 1)]).is_err());
        let den = GalleryDenoiser::new(vec![Image::zeros(2, 2, 1)]).unwrap();
        assert!(predict_noise(&den, &Image::zeros(3, 2, 1), 5, &sched()).is_err());
    }

    proptest! {
        #[test]
        fn gallery_output_in_convex_hull(
            vals in proptest::collection::vec(-1.0f64..1.0, 4 * 8),
            x in proptest::collection::vec(-3.0f64..3.0, 8),
            t in 1usize..=1000,
            temp in 0.0f64..4.0,
        ) {
            let gallery: Vec<Image> = vals
                .chunks(8)
                .map(|c| Image::from_planar(2, 4, 1, c.to_vec()).unwrap())
                .collect();
            let xt = Image::from_planar(2, 4, 1, x).unwrap();
            let out = gallery_x0(&gallery, &xt, t, &sched(), temp).unwrap();
            for i in 0..8 {
                let lo = gallery.iter().map(|g| g.as_slice()[i]).fold(f64::INFINITY, f64::min);
                let hi = gallery.iter().map(|g| g.as_slice()[i]).fold(f64::NEG_INFINITY, f64::max);
                let v = out.as_slice()[i];
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }
}
