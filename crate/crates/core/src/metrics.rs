//! Image-quality and localization metrics.

use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, PatchBox};
use crate::image::{Image, CANONICAL_MAX};
use crate::localizer::restoration_mse;

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &Image, b: &Image, max_value: f64) -> Result<f64> {
    let mse = restoration_mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}

/// PSNR on the canonical scale.
pub fn psnr_canonical(a: &Image, b: &Image) -> Result<f64> {
    psnr(a, b, CANONICAL_MAX)
}

/// Intersection over union of two masks. Two empty masks score 1.
pub fn miou(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if (pred.height(), pred.width()) != (truth.height(), truth.width()) {
        return Err(Error::shape(
            format!("{}x{}", truth.height(), truth.width()),
            format!("{}x{}", pred.height(), pred.width()),
        ));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        inter += (p && t) as usize;
        union += (p || t) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// IoU of two optional boxes; `None` stands for "no region".
pub fn box_miou(pred: Option<&PatchBox>, truth: Option<&PatchBox>) -> f64 {
    match (pred, truth) {
        (None, None) => 1.0,
        (Some(_), None) | (None, Some(_)) => 0.0,
        (Some(p), Some(t)) => {
            let inter = p.intersection(t);
            let union = p.area() + t.area() - inter;
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        }
    }
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// `None` when fewer than two points are given or either series is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Ok(None);
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (va * vb).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psnr_examples() {
        let a = Image::filled(4, 4, 3, 0.0);
        assert_eq!(psnr_canonical(&a, &a).unwrap(), f64::INFINITY);
        assert!(psnr_canonical(&a, &a.map(|v| v + 255.0)).unwrap().abs() < 1e-12);
        assert!((psnr_canonical(&a, &a.map(|v| v + 25.5)).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr_canonical(&a, &Image::zeros(4, 4, 1)).is_err());
    }

    #[test]
    fn box_iou_examples() {
        let b = PatchBox::new(2, 3, 4);
        assert_eq!(box_miou(Some(&b), Some(&b)), 1.0);
        assert_eq!(box_miou(Some(&b), Some(&PatchBox::new(10, 10, 2))), 0.0);
        let v = box_miou(Some(&PatchBox::new(0, 0, 2)), Some(&PatchBox::new(1, 1, 2)));
        assert!((v - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(box_miou(None, None), 1.0);
        assert_eq!(box_miou(None, Some(&b)), 0.0);
    }

    #[test]
    fn mask_iou_agrees_with_boxes() {
        let (p, t) = (PatchBox::new(0, 0, 2), PatchBox::new(1, 1, 2));
        let pm = BinaryMask::from_box(5, 5, &p).unwrap();
        let tm = BinaryMask::from_box(5, 5, &t).unwrap();
        assert!((miou(&pm, &tm).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        let empty = BinaryMask::new(5, 5, false);
        assert_eq!(miou(&empty, &empty).unwrap(), 1.0);
        assert_eq!(miou(&empty, &tm).unwrap(), 0.0);
        assert!(miou(&pm, &BinaryMask::new(5, 4, false)).is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric_and_bounded(
            a in (0usize..10, 0usize..10, 1usize..6),
            b in (0usize..10, 0usize..10, 1usize..6),
            xs in proptest::collection::vec(0.0f64..255.0, 12),
            ys in proptest::collection::vec(0.0f64..255.0, 12),
        ) {
            let (pa, pb) = (PatchBox::new(a.0, a.1, a.2), PatchBox::new(b.0, b.1, b.2));
            let v = box_miou(Some(&pa), Some(&pb));
            prop_assert_eq!(v, box_miou(Some(&pb), Some(&pa)));
            prop_assert!((0.0..=1.0).contains(&v));
            let ma = BinaryMask::from_box(16, 16, &pa).unwrap();
            let mb = BinaryMask::from_box(16, 16, &pb).unwrap();
            prop_assert!((miou(&ma, &mb).unwrap() - v).abs() < 1e-12);

            let ia = Image::from_planar(2, 2, 3, xs).unwrap();
            let ib = Image::from_planar(2, 2, 3, ys).unwrap();
            let p = psnr_canonical(&ia, &ib).unwrap();
            prop_assert_eq!(p, psnr_canonical(&ib, &ia).unwrap());
            prop_assert!(p >= 0.0);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 1.0, 5.0]), vec![3.0, 3.0, 1.0, 3.0]);
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 90.0]).unwrap(),
            Some(1.0)
        );
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), None);
        assert_eq!(spearman(&[1.0], &[1.0]).unwrap(), None);
        assert!(spearman(&[1.0], &[1.0, 2.0]).is_err());
        // three tied groups of two, perfectly ordered: sqrt(between / total variance of 1..6)
        let r = spearman(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap()
            .unwrap();
        assert!((r - (8.0f64 / 8.75).sqrt()).abs() < 1e-12, "{r}");
    }
}
