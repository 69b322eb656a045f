//! Closed-form data-consistency steps for super-resolution and inpainting.
//!
//! The super-resolution step minimizes
//! `‖y − (k ⊛ x)↓s‖² + η‖x − x̂₀‖²` exactly. With `d = F̄(k)·F(y↑s) + η·F(x̂₀)`,
//! the minimizer is
//!
//! ```text
//! x = F⁻¹( (d − F̄(k) ⊙s [(F(k)·d)↓s / ((F̄(k)F(k))↓s + η)]) / η )
//! ```
//!
//! where `↓s` averages the s×s distinct spectral blocks and `⊙s` multiplies
//! every block by the same low-resolution factor.
//!
//! Dividing by η cancels badly once η drops below ~1e-8, which is the normal
//! regime early in sampling. Because F(y↑s) is block-periodic, the same
//! minimizer can be written without that division:
//!
//! ```text
//! x = F⁻¹( F(x̂₀) + F̄(k) ⊙s [(F(y) − (F(k)·F(x̂₀))↓s) / ((F̄(k)F(k))↓s + η)] )
//! ```
//!
//! [`SrOperator::solve`] uses this form; [`SrOperator::solve_expanded`] keeps
//! the expanded one for cross-checking.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{Fft2d, Spectrum};
use crate::geometry::BinaryMask;
use crate::image::Image;
use crate::kernel::{blur_decimate, zero_fill_upsample, ConvKernel};

fn check_blocks(height: usize, width: usize, s: usize) -> Result<(usize, usize)> {
    if s == 0 || height % s != 0 || width % s != 0 {
        return Err(Error::invalid(
            "scale",
            format!("{height}x{width} spectrum is not divisible into {s}x{s} blocks"),
        ));
    }
    Ok((height / s, width / s))
}

/// Elementwise mean of the s×s grid of (H/s)×(W/s) blocks.
pub fn block_average(spec: &Spectrum, s: usize) -> Result<Spectrum> {
    let (bh, bw) = check_blocks(spec.height(), spec.width(), s)?;
    let w = spec.width();
    let mut out = vec![Complex64::new(0.0, 0.0); bh * bw];
    for (i, z) in spec.as_slice().iter().enumerate() {
        let (y, x) = (i / w, i % w);
        out[(y % bh) * bw + x % bw] += z;
    }
    let inv = 1.0 / (s * s) as f64;
    for z in &mut out {
        *z *= inv;
    }
    Spectrum::new(bh, bw, out)
}

/// Multiplies every (H/s)×(W/s) block of `spec` elementwise by `factor`.
pub fn block_multiply(spec: &Spectrum, factor: &Spectrum, s: usize) -> Result<Spectrum> {
    let (bh, bw) = check_blocks(spec.height(), spec.width(), s)?;
    if (factor.height(), factor.width()) != (bh, bw) {
        return Err(Error::shape(
            format!("{bh}x{bw} factor"),
            format!("{}x{}", factor.height(), factor.width()),
        ));
    }
    let w = spec.width();
    let data = spec
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, z)| z * factor.get((i / w) % bh, (i % w) % bw))
        .collect();
    Spectrum::new(spec.height(), spec.width(), data)
}

/// Precomputed super-resolution data step for a fixed geometry and kernel.
#[derive(Debug, Clone)]
pub struct SrOperator {
    fft: Fft2d,
    fft_low: Fft2d,
    scale: usize,
    kernel: ConvKernel,
    fk: Spectrum,
    fk_conj: Spectrum,
    /// (F̄(k)F(k))↓s
    power_avg: Spectrum,
}

type PlaneSolver = fn(&SrOperator, &[f64], &[f64], f64) -> Result<Vec<f64>>;

impl SrOperator {
    pub fn new(height: usize, width: usize, scale: usize, kernel: ConvKernel) -> Result<Self> {
        check_blocks(height, width, scale)?;
        let fft = Fft2d::new(height, width);
        let fk = kernel.spectrum(&fft)?;
        let fk_conj = fk.conj();
        let power = fk.map(|z| Complex64::new(z.norm_sqr(), 0.0));
        let power_avg = block_average(&power, scale)?;
        Ok(Self {
            fft,
            fft_low: Fft2d::new(height / scale, width / scale),
            scale,
            kernel,
            fk,
            fk_conj,
            power_avg,
        })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn kernel(&self) -> &ConvKernel {
        &self.kernel
    }

    /// High-resolution plane size.
    pub fn dims(&self) -> (usize, usize) {
        (self.fft.height(), self.fft.width())
    }

    pub fn low_dims(&self) -> (usize, usize) {
        let (h, w) = self.dims();
        (h / self.scale, w / self.scale)
    }

    /// Degradation (k ⊛ x)↓s applied per channel.
    pub fn degrade(&self, x: &Image) -> Result<Image> {
        let (h, w) = self.dims();
        if (x.height(), x.width()) != (h, w) {
            return Err(Error::shape(format!("{h}x{w}"), x.shape()));
        }
        let (lh, lw) = self.low_dims();
        let mut data = Vec::with_capacity(lh * lw * x.channels());
        for c in 0..x.channels() {
            data.extend(blur_decimate(x.plane(c), h, w, self.scale, &self.kernel)?);
        }
        Image::from_planar(lh, lw, x.channels(), data)
    }

    /// Exact minimizer of ‖y − (k⊛x)↓s‖² + η‖x − x̂₀‖², channel by channel.
    pub fn solve(&self, x0_hat: &Image, y: &Image, eta: f64) -> Result<Image> {
        self.solve_with(x0_hat, y, eta, Self::solve_plane)
    }

    /// Same minimizer through the expanded `(d − …)/η` form.
    pub fn solve_expanded(&self, x0_hat: &Image, y: &Image, eta: f64) -> Result<Image> {
        self.solve_with(x0_hat, y, eta, Self::solve_plane_expanded)
    }

    fn solve_with(&self, x0_hat: &Image, y: &Image, eta: f64, plane_fn: PlaneSolver) -> Result<Image> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", format!("{eta} must be finite and > 0")));
        }
        let (h, w) = self.dims();
        let (lh, lw) = self.low_dims();
        if (x0_hat.height(), x0_hat.width()) != (h, w) {
            return Err(Error::shape(format!("{h}x{w} estimate"), x0_hat.shape()));
        }
        if (y.height(), y.width(), y.channels()) != (lh, lw, x0_hat.channels()) {
            return Err(Error::shape(
                format!("{lh}x{lw}x{} observation", x0_hat.channels()),
                y.shape(),
            ));
        }
        let mut data = Vec::with_capacity(h * w * x0_hat.channels());
        for c in 0..x0_hat.channels() {
            data.extend(plane_fn(self, x0_hat.plane(c), y.plane(c), eta)?);
        }
        Image::from_planar(h, w, x0_hat.channels(), data)
    }

    fn solve_plane(&self, x0_hat: &[f64], y: &[f64], eta: f64) -> Result<Vec<f64>> {
        let fx = self.fft.forward_real(x0_hat)?;
        let fy = self.fft_low.forward_real(y)?;
        let predicted = block_average(&self.fk.zip_map(&fx, |k, v| k * v)?, self.scale)?;
        let ratio = fy
            .zip_map(&predicted, |a, b| a - b)?
            .zip_map(&self.power_avg, |r, p| r / (p + eta))?;
        let correction = block_multiply(&self.fk_conj, &ratio, self.scale)?;
        self.fft.inverse_real(&fx.zip_map(&correction, |a, b| a + b)?)
    }

    fn solve_plane_expanded(&self, x0_hat: &[f64], y: &[f64], eta: f64) -> Result<Vec<f64>> {
        let (lh, lw) = self.low_dims();
        let up = zero_fill_upsample(y, lh, lw, self.scale)?;
        let fy = self.fft.forward_real(&up)?;
        let fx = self.fft.forward_real(x0_hat)?;
        let d = self
            .fk_conj
            .zip_map(&fy, |k, v| k * v)?
            .zip_map(&fx, |a, b| a + eta * b)?;
        let num = block_average(&self.fk.zip_map(&d, |k, v| k * v)?, self.scale)?;
        let ratio = num.zip_map(&self.power_avg, |n, p| n / (p + eta))?;
        let correction = block_multiply(&self.fk_conj, &ratio, self.scale)?;
        let inv_eta = 1.0 / eta;
        let fx_new = d.zip_map(&correction, |a, b| (a - b) * inv_eta)?;
        self.fft.inverse_real(&fx_new)
    }
}

/// One-shot form of [`SrOperator::solve`].
pub fn sr_data_solution(x0_hat: &Image, y_s: &Image, s: usize, k: &ConvKernel, eta_t: f64) -> Result<Image> {
    SrOperator::new(x0_hat.height(), x0_hat.width(), s, k.clone())?.solve(x0_hat, y_s, eta_t)
}

/// (M⊙y + η·x̂₀)/(M + η), elementwise; the mask is shared across channels.
pub fn inpaint_data_solution(x0_hat: &Image, y_i: &Image, mask: &BinaryMask, eta_t: f64) -> Result<Image> {
    if !(eta_t > 0.0 && eta_t.is_finite()) {
        return Err(Error::invalid("eta", format!("{eta_t} must be finite and > 0")));
    }
    x0_hat.ensure_same_shape(y_i)?;
    if (mask.height(), mask.width()) != (x0_hat.height(), x0_hat.width()) {
        return Err(Error::shape(
            format!("{}x{} mask", x0_hat.height(), x0_hat.width()),
            format!("{}x{}", mask.height(), mask.width()),
        ));
    }
    let plane = x0_hat.height() * x0_hat.width();
    let data = x0_hat
        .as_slice()
        .iter()
        .zip(y_i.as_slice())
        .enumerate()
        .map(|(i, (&xh, &y))| {
            if mask.bits()[i % plane] {
                (y + eta_t * xh) / (1.0 + eta_t)
            } else {
                xh
            }
        })
        .collect();
    Image::from_planar(x0_hat.height(), x0_hat.width(), x0_hat.channels(), data)
}
