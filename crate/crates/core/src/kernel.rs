//! Convolution kernels and the spatial resampling operators built on them.
//!
//! All convolutions are circular. A kernel's anchor tap sits at offset (0, 0),
//! so once zero-padded to image size the anchor lands on index 0.

use crate::error::{Error, Result};
use crate::fft::{Fft2d, Spectrum};

/// Keys cubic convolution parameter.
pub const KEYS_A: f64 = -0.5;

/// 2-D tap array with a designated anchor, normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    rows: usize,
    cols: usize,
    anchor: (usize, usize),
    taps: Vec<f64>,
}

impl ConvKernel {
    /// Builds a kernel, normalizing the taps to sum to one.
    pub fn new(rows: usize, cols: usize, anchor: (usize, usize), taps: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || taps.len() != rows * cols {
            return Err(Error::shape(format!("{rows}x{cols} taps"), taps.len()));
        }
        if anchor.0 >= rows || anchor.1 >= cols {
            return Err(Error::invalid(
                "anchor",
                format!("{anchor:?} outside {rows}x{cols}"),
            ));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("taps", "must be finite"));
        }
        let sum: f64 = taps.iter().sum();
        if sum.abs() < 1e-12 {
            return Err(Error::invalid("taps", "sum to zero; cannot normalize"));
        }
        Ok(Self {
            rows,
            cols,
            anchor,
            taps: taps.into_iter().map(|t| t / sum).collect(),
        })
    }

    /// Single unit tap.
    pub fn delta() -> Self {
        Self {
            rows: 1,
            cols: 1,
            anchor: (0, 0),
            taps: vec![1.0],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Iterates `(dy, dx, weight)` with offsets relative to the anchor.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let (ar, ac) = (self.anchor.0 as isize, self.anchor.1 as isize);
        let cols = self.cols;
        self.taps
            .iter()
            .enumerate()
            .map(move |(i, &w)| ((i / cols) as isize - ar, (i % cols) as isize - ac, w))
    }

    /// Zero-pads (with wrap-around) to `height × width` and transforms.
    pub fn spectrum(&self, fft: &Fft2d) -> Result<Spectrum> {
        let (h, w) = (fft.height(), fft.width());
        let mut padded = vec![0.0; h * w];
        for (dy, dx, wt) in self.offsets() {
            let y = dy.rem_euclid(h as isize) as usize;
            let x = dx.rem_euclid(w as isize) as usize;
            padded[y * w + x] += wt;
        }
        fft.forward_real(&padded)
    }
}

/// Keys cubic convolution weight at distance `x`.
pub fn keys_weight(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Anti-aliasing bicubic kernel for down-scaling by `s`.
///
/// The Keys kernel stretched by `s` spans 4s samples per axis; its two end
/// points fall on zeros of the kernel, so the stored support is the 4s − 1
/// interior taps at integer offsets −(2s−1)..=(2s−1). Separable, anchored
/// at the center, unit sum.
pub fn make_bicubic_kernel(s: usize) -> Result<ConvKernel> {
    if s == 0 {
        return Err(Error::invalid("scale", "must be at least 1"));
    }
    if s == 1 {
        return Ok(ConvKernel::delta());
    }
    let radius = 2 * s - 1;
    let n = 2 * radius + 1;
    let line: Vec<f64> = (0..n)
        .map(|i| keys_weight((i as f64 - radius as f64) / s as f64, KEYS_A))
        .collect();
    let taps = line
        .iter()
        .flat_map(|a| line.iter().map(move |b| a * b))
        .collect();
    ConvKernel::new(n, n, (radius, radius), taps)
}

/// (k ⊛ x)[p] = Σ_o k[o]·x[p − o], periodic boundary.
pub fn circular_convolve(plane: &[f64], height: usize, width: usize, k: &ConvKernel) -> Result<Vec<f64>> {
    if plane.len() != height * width {
        return Err(Error::shape(format!("{height}x{width} plane"), plane.len()));
    }
    let mut out = vec![0.0; plane.len()];
    let (h, w) = (height as isize, width as isize);
    for (dy, dx, wt) in k.offsets() {
        if wt == 0.0 {
            continue;
        }
        for y in 0..height {
            let sy = (y as isize - dy).rem_euclid(h) as usize;
            let src = &plane[sy * width..(sy + 1) * width];
            let dst = &mut out[y * width..(y + 1) * width];
            for (x, d) in dst.iter_mut().enumerate() {
                let sx = (x as isize - dx).rem_euclid(w) as usize;
                *d += wt * src[sx];
            }
        }
    }
    Ok(out)
}

fn check_divisible(height: usize, width: usize, s: usize) -> Result<()> {
    if s == 0 || height % s != 0 || width % s != 0 {
        return Err(Error::invalid(
            "scale",
            format!("{height}x{width} is not divisible by {s}"),
        ));
    }
    Ok(())
}

/// Keeps every `s`-th sample starting at (0, 0).
pub fn decimate(plane: &[f64], height: usize, width: usize, s: usize) -> Result<Vec<f64>> {
    check_divisible(height, width, s)?;
    let (lh, lw) = (height / s, width / s);
    let mut out = Vec::with_capacity(lh * lw);
    for y in 0..lh {
        for x in 0..lw {
            out.push(plane[y * s * width + x * s]);
        }
    }
    Ok(out)
}

/// Standard s-fold up-sampler: low-res samples at multiples of `s`, zeros elsewhere.
pub fn zero_fill_upsample(plane: &[f64], low_height: usize, low_width: usize, s: usize) -> Result<Vec<f64>> {
    if plane.len() != low_height * low_width || s == 0 {
        return Err(Error::shape(
            format!("{low_height}x{low_width} plane"),
            plane.len(),
        ));
    }
    let width = low_width * s;
    let mut out = vec![0.0; low_height * s * width];
    for y in 0..low_height {
        for x in 0..low_width {
            out[y * s * width + x * s] = plane[y * low_width + x];
        }
    }
    Ok(out)
}

/// Each low-res sample repeated over its s×s block.
pub fn replicate_upsample(plane: &[f64], low_height: usize, low_width: usize, s: usize) -> Result<Vec<f64>> {
    if plane.len() != low_height * low_width || s == 0 {
        return Err(Error::shape(
            format!("{low_height}x{low_width} plane"),
            plane.len(),
        ));
    }
    let width = low_width * s;
    Ok((0..low_height * s * width)
        .map(|i| plane[(i / width / s) * low_width + (i % width) / s])
        .collect())
}

/// (k ⊛ x)↓s for one plane.
pub fn blur_decimate(
    plane: &[f64],
    height: usize,
    width: usize,
    s: usize,
    k: &ConvKernel,
) -> Result<Vec<f64>> {
    check_divisible(height, width, s)?;
    decimate(&circular_convolve(plane, height, width, k)?, height, width, s)
}
