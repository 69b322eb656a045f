//! Patch localization from the restoration residual.

use serde::{Deserialize, Serialize};

pub use crate::geometry::{BinaryMask, PatchBox};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_MU: f64 = 0.066;
pub const DEFAULT_NU: f64 = 14.90;
pub const DEFAULT_TAU_PRIME: f64 = 9.0;
pub const DEFAULT_CLEAN_GATE: f64 = 62.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizerConfig {
    /// Slope of the dynamic threshold in the restoration MSE.
    pub mu: f64,
    /// Intercept of the dynamic threshold.
    pub nu: f64,
    /// Fixed threshold used for the sliding-window search.
    pub tau_prime: f64,
    /// Inputs whose restoration MSE falls below this are treated as clean.
    pub clean_gate: f64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            mu: DEFAULT_MU,
            nu: DEFAULT_NU,
            tau_prime: DEFAULT_TAU_PRIME,
            clean_gate: DEFAULT_CLEAN_GATE,
        }
    }
}

/// Real-valued H×W map (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ResidualMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(format!("{height}x{width} map"), values.len()));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Mean value over the cells where `region` is set.
    pub fn mean_over(&self, region: &BinaryMask) -> Option<f64> {
        let (sum, n) = self
            .values
            .iter()
            .zip(region.bits())
            .filter(|(_, &b)| b)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Per-pixel mean over channels of |x_a − x_hat|.
pub fn residual_map(x_a: &Image, x_hat: &Image) -> Result<ResidualMap> {
    x_a.ensure_same_shape(x_hat)?;
    let (h, w, ch) = (x_a.height(), x_a.width(), x_a.channels());
    let mut values = vec![0.0; h * w];
    for c in 0..ch {
        for (acc, (a, b)) in values.iter_mut().zip(x_a.plane(c).iter().zip(x_hat.plane(c))) {
            *acc += (a - b).abs();
        }
    }
    let inv = 1.0 / ch as f64;
    values.iter_mut().for_each(|v| *v *= inv);
    ResidualMap::new(h, w, values)
}

/// Mean over all H·W·C entries of the squared difference.
pub fn restoration_mse(x_a: &Image, x_hat: &Image) -> Result<f64> {
    x_a.ensure_same_shape(x_hat)?;
    let n = x_a.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sq: f64 = x_a
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / n as f64)
}

/// τ = μ·mse + ν.
pub fn dynamic_threshold(mse: f64, mu: f64, nu: f64) -> f64 {
    mu * mse + nu
}

/// 1 where the map strictly exceeds `tau`.
pub fn binarize(map: &ResidualMap, tau: f64) -> BinaryMask {
    BinaryMask::from_bits(
        map.height,
        map.width,
        map.values.iter().map(|&v| v > tau).collect(),
    )
    .expect("map dimensions are consistent")
}

/// Number of cells above `tau`.
pub fn estimate_patch_area(map: &ResidualMap, tau: f64) -> usize {
    map.values.iter().filter(|&&v| v > tau).count()
}

/// round(√area), clamped to [1, min(H, W)].
pub fn estimate_side(area: usize, height: usize, width: usize) -> usize {
    let side = (area as f64).sqrt().round() as usize;
    side.clamp(1, height.min(width).max(1))
}

pub fn is_clean(mse: f64, gate: f64) -> bool {
    mse < gate
}

/// Summed-area table with a zero border: `table[(y+1)(W+1) + x+1]` counts ones in `[0..=y, 0..=x]`.
fn prefix_counts(mask: &BinaryMask) -> Vec<u32> {
    let (h, w) = (mask.height(), mask.width());
    let stride = w + 1;
    let mut table = vec![0u32; (h + 1) * stride];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += mask.get(y, x) as u32;
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
        }
    }
    table
}

/// The side×side window holding the most ones; ties go to the smallest top,
/// then the smallest left.
pub fn locate_patch(mask: &BinaryMask, side: usize) -> Result<PatchBox> {
    let (h, w) = (mask.height(), mask.width());
    if side == 0 || side > h.min(w) {
        return Err(Error::invalid(
            "side",
            format!("{side} outside [1, {}]", h.min(w)),
        ));
    }
    let table = prefix_counts(mask);
    let stride = w + 1;
    let at = |y: usize, x: usize| table[y * stride + x] as i64;
    let mut best = (i64::MIN, PatchBox::new(0, 0, side));
    for top in 0..=h - side {
        for left in 0..=w - side {
            let (b, r) = (top + side, left + side);
            let count = at(b, r) - at(top, r) - at(b, left) + at(top, left);
            if count > best.0 {
                best = (count, PatchBox::new(top, left, side));
            }
        }
    }
    Ok(best.1)
}

/// Count of ones inside `b`.
pub fn window_count(mask: &BinaryMask, b: &PatchBox) -> usize {
    (b.top..b.top + b.side)
        .flat_map(|y| (b.left..b.left + b.side).map(move |x| (y, x)))
        .filter(|&(y, x)| mask.get(y, x))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(h: usize, w: usize, v: Vec<f64>) -> ResidualMap {
        ResidualMap::new(h, w, v).unwrap()
    }

    #[test]
    fn residual_examples() {
        let a = Image::from_fn(3, 3, 3, |y, x, c| (y * 10 + x + c) as f64);
        assert!(residual_map(&a, &a).unwrap().values().iter().all(|&v| v == 0.0));
        let mut b = a.clone();
        b.set(1, 2, 0, a.get(1, 2, 0) + 30.0);
        let r = residual_map(&a, &b).unwrap();
        assert_eq!(r.get(1, 2), 10.0);
        assert_eq!(r.values().iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(residual_map(&b, &a).unwrap(), r);
        assert!(residual_map(&a, &Image::zeros(3, 3, 1)).is_err());
    }

    #[test]
    fn mse_examples() {
        let a = Image::filled(4, 4, 3, 50.0);
        assert_eq!(restoration_mse(&a, &a).unwrap(), 0.0);
        assert_eq!(restoration_mse(&a, &a.map(|v| v + 2.0)).unwrap(), 4.0);
        let checker = Image::from_fn(4, 4, 3, |y, x, _| if (x + y) % 2 == 0 { 53.0 } else { 47.0 });
        assert_eq!(restoration_mse(&a, &checker).unwrap(), 9.0);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(dynamic_threshold(0.0, DEFAULT_MU, DEFAULT_NU), 14.90);
        assert!((dynamic_threshold(100.0, DEFAULT_MU, DEFAULT_NU) - 21.5).abs() < 1e-12);
        assert_eq!(dynamic_threshold(1234.0, 0.0, 3.0), 3.0);
    }

    #[test]
    fn binarize_examples() {
        let m = map(1, 3, vec![1.0, 5.0, 9.0]);
        assert_eq!(binarize(&m, 0.0).count_ones(), 3);
        assert_eq!(binarize(&m, 9.0).count_ones(), 0);
        assert_eq!(binarize(&m, 5.0).bits(), &[false, false, true]);
    }

    #[test]
    fn area_examples() {
        assert_eq!(estimate_patch_area(&map(2, 2, vec![0.0; 4]), 1.0), 0);
        assert_eq!(estimate_patch_area(&map(1, 4, vec![3.0, 0.0, 3.0, 3.0]), 2.0), 3);
        // side-8 patch at 40 over faint background
        let (h, w) = (32, 32);
        let vals = (0..h * w)
            .map(|i| {
                let (y, x) = (i / w, i % w);
                if (5..13).contains(&y) && (17..25).contains(&x) {
                    40.0
                } else {
                    ((i * 7919) % 90) as f64 / 10.0
                }
            })
            .collect();
        assert_eq!(estimate_patch_area(&map(h, w, vals), 14.9), 64);
    }

    #[test]
    fn side_examples() {
        assert_eq!(estimate_side(64, 32, 32), 8);
        assert_eq!(estimate_side(0, 32, 32), 1);
        assert_eq!(estimate_side(50, 32, 32), 7);
        assert_eq!(estimate_side(5000, 32, 20), 20);
    }

    #[test]
    fn clean_gate_examples() {
        assert!(is_clean(0.0, DEFAULT_CLEAN_GATE));
        assert!(is_clean(61.9, 62.0));
        assert!(!is_clean(62.0, 62.0));
    }

    #[test]
    fn locate_examples() {
        let truth = PatchBox::new(3, 4, 5);
        let m = BinaryMask::from_box(12, 14, &truth).unwrap();
        assert_eq!(locate_patch(&m, 5).unwrap(), truth);
        assert_eq!(
            locate_patch(&BinaryMask::new(6, 6, false), 3).unwrap(),
            PatchBox::new(0, 0, 3)
        );
        assert!(locate_patch(&m, 0).is_err());
        assert!(locate_patch(&m, 13).is_err());
    }

    fn brute_force(mask: &BinaryMask, side: usize) -> PatchBox {
        let mut best = (0usize, None);
        for top in 0..=mask.height() - side {
            for left in 0..=mask.width() - side {
                let b = PatchBox::new(top, left, side);
                let c = window_count(mask, &b);
                if best.1.is_none() || c > best.0 {
                    best = (c, Some(b));
                }
            }
        }
        best.1.unwrap()
    }

    proptest! {
        #[test]
        fn locate_matches_exhaustive_scan(
            h in 1usize..14,
            w in 1usize..14,
            density in 0.0f64..1.0,
            seed in any::<u64>(),
            side_frac in 0.0f64..1.0,
        ) {
            let bits: Vec<bool> = (0..h * w)
                .map(|i| {
                    let r = (seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                    ((r >> 11) as f64 / (1u64 << 53) as f64) < density
                })
                .collect();
            let m = BinaryMask::from_bits(h, w, bits).unwrap();
            let side = 1 + ((h.min(w) - 1) as f64 * side_frac) as usize;
            prop_assert_eq!(locate_patch(&m, side).unwrap(), brute_force(&m, side));
        }

        #[test]
        fn area_non_increasing_in_tau(
            vals in proptest::collection::vec(0.0f64..100.0, 1..200),
            t1 in 0.0f64..100.0,
            dt in 0.0f64..50.0,
        ) {
            let n = vals.len();
            let m = map(1, n, vals);
            prop_assert!(estimate_patch_area(&m, t1 + dt) <= estimate_patch_area(&m, t1));
        }
    }
}
