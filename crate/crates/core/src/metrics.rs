//! Overlap and boundary-distance evaluation metrics. Distances are in pixel units.

use serde::{Deserialize, Serialize};

use crate::error::{PtaError, Result};
use crate::geometry::{distance_transform, ensure_same_dims, extract_boundary, BinaryMask, LabelMask, Pixel};

/// Dice similarity `2|G n S| / (|G| + |S|)`; 1 when both masks are empty.
pub fn dsc_metric(gt: &BinaryMask, seg: &BinaryMask) -> Result<f64> {
    let inter = gt.intersection_count(seg)?;
    let total = gt.count() + seg.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// `(|G n S| / |S|, |G n S| / |G|)`, each 1 when its denominator is empty.
pub fn precision_recall(gt: &BinaryMask, seg: &BinaryMask) -> Result<(f64, f64)> {
    let inter = gt.intersection_count(seg)? as f64;
    let ratio = |n: usize| if n == 0 { 1.0 } else { inter / n as f64 };
    Ok((ratio(seg.count()), ratio(gt.count())))
}

struct BoundaryPair {
    gt: Vec<Pixel>,
    seg: Vec<Pixel>,
    // distances from each seg boundary pixel to the gt boundary, and vice versa
    seg_to_gt: Vec<f64>,
    gt_to_seg: Vec<f64>,
}

fn boundary_pair(gt: &BinaryMask, seg: &BinaryMask) -> Result<BoundaryPair> {
    ensure_same_dims(gt.dims(), seg.dims())?;
    if gt.is_empty() || seg.is_empty() {
        return Err(PtaError::empty("boundary distances need two non-empty masks"));
    }
    let (w, h) = gt.dims();
    let gt_b = extract_boundary(gt)?;
    let seg_b = extract_boundary(seg)?;
    let to_gt = distance_transform(&gt_b, w, h)?;
    let to_seg = distance_transform(&seg_b, w, h)?;
    Ok(BoundaryPair {
        seg_to_gt: seg_b.iter().map(|p| to_gt.get(p.x, p.y)).collect(),
        gt_to_seg: gt_b.iter().map(|p| to_seg.get(p.x, p.y)).collect(),
        gt: gt_b,
        seg: seg_b,
    })
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between the two region boundaries.
pub fn hausdorff(gt: &BinaryMask, seg: &BinaryMask) -> Result<f64> {
    let b = boundary_pair(gt, seg)?;
    Ok(max_of(&b.seg_to_gt).max(max_of(&b.gt_to_seg)))
}

/// Average symmetric surface distance between the two region boundaries.
pub fn assd(gt: &BinaryMask, seg: &BinaryMask) -> Result<f64> {
    let b = boundary_pair(gt, seg)?;
    let sum: f64 = b.seg_to_gt.iter().sum::<f64>() + b.gt_to_seg.iter().sum::<f64>();
    Ok(sum / (b.seg.len() + b.gt.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: u16,
    pub dsc: f64,
    pub precision: f64,
    pub recall: f64,
    pub hd: f64,
    pub assd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub dsc: f64,
    pub precision: f64,
    pub recall: f64,
    pub hd: f64,
    pub assd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
}

pub fn class_metrics(label: u16, gt: &BinaryMask, seg: &BinaryMask) -> Result<ClassMetrics> {
    let (precision, recall) = precision_recall(gt, seg)?;
    let b = boundary_pair(gt, seg)?;
    let hd = max_of(&b.seg_to_gt).max(max_of(&b.gt_to_seg));
    let assd = (b.seg_to_gt.iter().sum::<f64>() + b.gt_to_seg.iter().sum::<f64>())
        / (b.seg.len() + b.gt.len()) as f64;
    Ok(ClassMetrics {
        label,
        dsc: dsc_metric(gt, seg)?,
        precision,
        recall,
        hd,
        assd,
    })
}

fn macro_average(per_class: &[ClassMetrics]) -> MacroMetrics {
    let n = per_class.len().max(1) as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    MacroMetrics {
        dsc: mean(|c| c.dsc),
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        hd: mean(|c| c.hd),
        assd: mean(|c| c.assd),
    }
}

pub fn evaluate_binary(gt: &BinaryMask, seg: &BinaryMask) -> Result<MetricsReport> {
    let per_class = vec![class_metrics(1, gt, seg)?];
    Ok(MetricsReport {
        macro_avg: macro_average(&per_class),
        per_class,
    })
}

/// Per-class (one-vs-rest) metrics for labels `1..=classes` plus their macro-average.
pub fn evaluate_labels(gt: &LabelMask, seg: &LabelMask, classes: u16) -> Result<MetricsReport> {
    ensure_same_dims(gt.dims(), seg.dims())?;
    if classes == 0 {
        return Err(PtaError::invalid("need at least one foreground class"));
    }
    let per_class = (1..=classes)
        .map(|c| class_metrics(c, &gt.class_mask(c), &seg.class_mask(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        macro_avg: macro_average(&per_class),
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: usize, x1: usize, y0: usize, y1: usize) -> BinaryMask {
        BinaryMask::rect(200, 200, x0, x1, y0, y1).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let g = rect(70, 130, 70, 130);
        assert_eq!(dsc_metric(&g, &g).unwrap(), 1.0);
        assert_eq!(precision_recall(&g, &g).unwrap(), (1.0, 1.0));

        let s4 = rect(75, 135, 70, 130);
        assert_eq!(dsc_metric(&g, &s4).unwrap(), 6600.0 / 7200.0);
        let s5 = rect(75, 135, 75, 135);
        assert_eq!(dsc_metric(&g, &s5).unwrap(), 6050.0 / 7200.0);

        let (p, r) = precision_recall(&g, &rect(68, 132, 68, 132)).unwrap();
        assert_eq!((p, r), (3600.0 / 4096.0, 1.0));
        let (p, r) = precision_recall(&g, &rect(72, 128, 72, 128)).unwrap();
        assert_eq!((p, r), (1.0, 3136.0 / 3600.0));

        let empty = BinaryMask::empty(200, 200).unwrap();
        assert_eq!(dsc_metric(&empty, &empty).unwrap(), 1.0);
        assert_eq!(precision_recall(&empty, &empty).unwrap(), (1.0, 1.0));
        assert_eq!(precision_recall(&g, &empty).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn distance_examples() {
        let g = rect(70, 130, 70, 130);
        assert_eq!(hausdorff(&g, &g).unwrap(), 0.0);
        assert_eq!(assd(&g, &g).unwrap(), 0.0);
        let big = rect(68, 132, 68, 132);
        assert!((hausdorff(&g, &big).unwrap() - 8f64.sqrt()).abs() < 1e-12);

        let mut a = BinaryMask::empty(10, 10).unwrap();
        a.set(0, 0, true);
        let mut b = BinaryMask::empty(10, 10).unwrap();
        b.set(3, 4, true);
        assert_eq!(assd(&b, &a).unwrap(), 5.0);
        assert_eq!(hausdorff(&b, &a).unwrap(), 5.0);

        let empty = BinaryMask::empty(200, 200).unwrap();
        assert!(matches!(hausdorff(&g, &empty), Err(PtaError::EmptyRegion(_))));
        assert!(matches!(assd(&empty, &g), Err(PtaError::EmptyRegion(_))));
    }

    #[test]
    fn macro_average_of_labels() {
        let mut gt = vec![0u16; 40 * 40];
        let mut seg = vec![0u16; 40 * 40];
        for y in 0..40 {
            for x in 0..40 {
                let i = y * 40 + x;
                gt[i] = match (x, y) {
                    (5..=14, 5..=14) => 1,
                    (20..=34, 5..=14) => 2,
                    (5..=34, 20..=30) => 3,
                    _ => 0,
                };
                seg[i] = match (x, y) {
                    (6..=15, 5..=14) => 1,
                    (20..=33, 4..=14) => 2,
                    (5..=34, 21..=31) => 3,
                    _ => 0,
                };
            }
        }
        let gt = LabelMask::new(40, 40, gt).unwrap();
        let seg = LabelMask::new(40, 40, seg).unwrap();
        let r = evaluate_labels(&gt, &seg, 3).unwrap();
        assert_eq!(r.per_class.len(), 3);
        for (i, c) in r.per_class.iter().enumerate() {
            let label = i as u16 + 1;
            let single = class_metrics(label, &gt.class_mask(label), &seg.class_mask(label)).unwrap();
            assert_eq!(*c, single);
        }
        let mean_dsc = r.per_class.iter().map(|c| c.dsc).sum::<f64>() / 3.0;
        assert!((r.macro_avg.dsc - mean_dsc).abs() < 1e-15);
        let mean_hd = r.per_class.iter().map(|c| c.hd).sum::<f64>() / 3.0;
        assert!((r.macro_avg.hd - mean_hd).abs() < 1e-15);
    }
}
