//! Patch boxes and binary masks shared by the localizer, solvers and metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned square region `[top, top+side) × [left, left+side)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchBox {
    pub top: usize,
    pub left: usize,
    pub side: usize,
}

impl PatchBox {
    pub fn new(top: usize, left: usize, side: usize) -> Self {
        Self { top, left, side }
    }

    pub fn area(&self) -> usize {
        self.side * self.side
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.side >= 1 && self.top + self.side <= height && self.left + self.side <= width
    }

    pub fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        if self.fits(height, width) {
            Ok(())
        } else {
            Err(Error::BoxOutOfBounds {
                top: self.top,
                left: self.left,
                side: self.side,
                height,
                width,
            })
        }
    }

    #[inline]
    pub fn contains(&self, y: usize, x: usize) -> bool {
        y >= self.top && y < self.top + self.side && x >= self.left && x < self.left + self.side
    }

    /// Number of cells shared with `other`.
    pub fn intersection(&self, other: &PatchBox) -> usize {
        let span = |a0: usize, a1: usize, b0: usize, b1: usize| a1.min(b1).saturating_sub(a0.max(b0));
        span(self.top, self.top + self.side, other.top, other.top + other.side)
            * span(
                self.left,
                self.left + self.side,
                other.left,
                other.left + other.side,
            )
    }
}

/// H×W mask over {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            bits: vec![value; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::shape(
                format!("{height}x{width} mask"),
                format!("{} bits", bits.len()),
            ));
        }
        Ok(Self { height, width, bits })
    }

    /// Parses 0/1 values; anything else is rejected.
    pub fn from_values(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        let bits = values
            .iter()
            .map(|&v| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                other => Err(Error::invalid("mask", format!("value {other} is not binary"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(height, width, bits)
    }

    /// Ones inside `b`, zeros elsewhere.
    pub fn from_box(height: usize, width: usize, b: &PatchBox) -> Result<Self> {
        b.check_fits(height, width)?;
        let mut m = Self::new(height, width, false);
        for y in b.top..b.top + b.side {
            for x in b.left..b.left + b.side {
                m.set(y, x, true);
            }
        }
        Ok(m)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn invert(&self) -> BinaryMask {
        Self {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn as_f64(&self, y: usize, x: usize) -> f64 {
        if self.get(y, x) {
            1.0
        } else {
            0.0
        }
    }
}
