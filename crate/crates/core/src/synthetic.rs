//! Synthetic offset experiments: a noisy square "organ", five perturbed
//! segmentations of it, and their piecewise band losses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PtaError, Result};
use crate::geometry::{sectorize, BinaryMask, GrayImage, LabelMask};
use crate::losses::{pt_for_mask, PtaConfig};
use crate::metrics::dsc_metric;

pub const CASE_NAMES: [&str; 5] = ["correct", "large", "small", "horizontal", "diagonal"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Ground-truth rectangle `[x0, x1) x [y0, y1)`.
    pub gt_rect: [usize; 4],
    pub inside_mean: f64,
    pub inside_sd: f64,
    pub outside_mean: f64,
    pub outside_sd: f64,
    pub seed: u64,
    pub replicates: usize,
    /// Dilation/erosion radius for the large and small cases.
    pub grow: usize,
    /// Translation for the horizontal and diagonal cases.
    pub shift: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 200,
            height: 200,
            gt_rect: [70, 130, 70, 130],
            inside_mean: 3.5,
            inside_sd: 2.0,
            outside_mean: 0.0,
            outside_sd: 2.0,
            seed: 0,
            replicates: 20,
            grow: 2,
            shift: 5,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let [x0, x1, y0, y1] = self.gt_rect;
        if self.width == 0 || self.height == 0 {
            return Err(PtaError::invalid("domain must be non-empty"));
        }
        if x0 >= x1 || y0 >= y1 || x1 > self.width || y1 > self.height {
            return Err(PtaError::invalid(format!(
                "ground-truth rectangle {:?} does not fit a {}x{} domain",
                self.gt_rect, self.width, self.height
            )));
        }
        if !(self.inside_sd > 0.0 && self.outside_sd > 0.0) {
            return Err(PtaError::invalid("standard deviations must be positive"));
        }
        if !(self.inside_mean.is_finite() && self.outside_mean.is_finite()) {
            return Err(PtaError::invalid("means must be finite"));
        }
        if self.replicates == 0 {
            return Err(PtaError::invalid("need at least one replicate"));
        }
        Ok(())
    }

    pub fn gt_mask(&self) -> Result<BinaryMask> {
        let [x0, x1, y0, y1] = self.gt_rect;
        BinaryMask::rect(self.width, self.height, x0, x1, y0, y1)
    }
}

/// Generator for replicate `replicate`: ChaCha8 keyed by the seed, one stream per replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws an image with i.i.d. normal intensities inside and outside the ground truth.
pub fn generate_image(spec: &SyntheticSpec, replicate: u64) -> Result<(GrayImage, BinaryMask)> {
    spec.validate()?;
    let gt = spec.gt_mask()?;
    let inside = Normal::new(spec.inside_mean, spec.inside_sd).map_err(|e| PtaError::invalid(e.to_string()))?;
    let outside = Normal::new(spec.outside_mean, spec.outside_sd).map_err(|e| PtaError::invalid(e.to_string()))?;
    let mut rng = replicate_rng(spec.seed, replicate);
    let image = GrayImage::from_fn(spec.width, spec.height, |x, y| {
        if gt.get(x, y) {
            inside.sample(&mut rng)
        } else {
            outside.sample(&mut rng)
        }
    })?;
    Ok((image, gt))
}

/// The five perturbed segmentations: identical, dilated by `grow`, eroded by `grow`,
/// shifted `shift` pixels along +x, and shifted `shift` pixels along both axes.
pub fn offset_cases(gt: &BinaryMask, grow: usize, shift: usize) -> Result<[BinaryMask; 5]> {
    if gt.is_empty() {
        return Err(PtaError::empty("offset cases need a non-empty ground truth"));
    }
    let small = gt.eroded(grow)?;
    if small.is_empty() {
        return Err(PtaError::OutOfBounds(format!(
            "erosion by {grow} pixels removes the whole region"
        )));
    }
    let s = shift as isize;
    Ok([gt.clone(), gt.dilated(grow)?, small, gt.shifted(s, 0)?, gt.shifted(s, s)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    /// 1-based case number.
    pub case: usize,
    pub replicate: usize,
    pub sector_losses: Vec<Option<f64>>,
    pub aggregate: f64,
    pub f1: f64,
}

fn evaluate_cases(image: &GrayImage, gt: &BinaryMask, cases: &[BinaryMask; 5], replicate: usize, cfg: &PtaConfig) -> Result<Vec<CaseResult>> {
    cases
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let report = pt_for_mask(image, seg, cfg)?;
            Ok(CaseResult {
                case: i + 1,
                replicate,
                sector_losses: report.sector_losses(),
                aggregate: report.aggregate,
                f1: dsc_metric(gt, seg)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: usize,
    pub name: String,
    pub f1: f64,
    pub mean_aggregate: f64,
    /// Sample standard deviation across replicates (0 for a single replicate).
    pub sd_aggregate: f64,
    /// Per-sector mean over replicates where the sector was valid.
    pub mean_sector_losses: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    /// Replicate means satisfy 1 < 3 and 1 < 2 < 4 < 5.
    pub mean_order_holds: bool,
    /// Fraction of replicates where case 1 is strictly minimal and case 5 strictly maximal.
    pub extremes_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub results: Vec<CaseResult>,
    pub summary: Vec<CaseSummary>,
    pub ordering: OrderingCheck,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(results: &[CaseResult]) -> (Vec<CaseSummary>, OrderingCheck) {
    let mut summary = Vec::new();
    for case in 1..=5 {
        let rows: Vec<&CaseResult> = results.iter().filter(|r| r.case == case).collect();
        if rows.is_empty() {
            continue;
        }
        let aggregates: Vec<f64> = rows.iter().map(|r| r.aggregate).collect();
        let (mean, sd) = mean_sd(&aggregates);
        let k = rows[0].sector_losses.len();
        let mean_sector_losses = (0..k)
            .map(|i| {
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.sector_losses[i]).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        summary.push(CaseSummary {
            case,
            name: CASE_NAMES[case - 1].to_string(),
            f1: rows[0].f1,
            mean_aggregate: mean,
            sd_aggregate: sd,
            mean_sector_losses,
        });
    }

    let m: Vec<f64> = summary.iter().map(|s| s.mean_aggregate).collect();
    let mean_order_holds = m.len() == 5 && m[0] < m[2] && m[0] < m[1] && m[1] < m[3] && m[3] < m[4];

    let replicates: Vec<usize> = {
        let mut r: Vec<usize> = results.iter().map(|r| r.replicate).collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let hits = replicates
        .iter()
        .filter(|&&rep| {
            let mut agg = [f64::NAN; 5];
            for r in results.iter().filter(|r| r.replicate == rep) {
                agg[r.case - 1] = r.aggregate;
            }
            (1..5).all(|i| agg[0] < agg[i]) && (0..4).all(|i| agg[i] < agg[4])
        })
        .count();
    let ordering = OrderingCheck {
        mean_order_holds,
        extremes_fraction: if replicates.is_empty() {
            0.0
        } else {
            hits as f64 / replicates.len() as f64
        },
    };
    (summary, ordering)
}

/// Runs all replicates of the five-case experiment. Replicates run in parallel; each
/// draws from its own generator stream, so results do not depend on scheduling.
pub fn run_table1(spec: &SyntheticSpec, cfg: &PtaConfig) -> Result<Table1> {
    spec.validate()?;
    cfg.validate()?;
    let gt = spec.gt_mask()?;
    let cases = offset_cases(&gt, spec.grow, spec.shift)?;
    let per_replicate = (0..spec.replicates)
        .into_par_iter()
        .map(|rep| {
            let (image, _) = generate_image(spec, rep as u64)?;
            evaluate_cases(&image, &gt, &cases, rep, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<CaseResult> = per_replicate.into_iter().flatten().collect();
    let (summary, ordering) = summarize(&results);
    Ok(Table1 {
        results,
        summary,
        ordering,
    })
}

/// Five-case analysis of a supplied image and ground truth, using `offset` for both
/// the dilation/erosion radius and the shifts. Deterministic.
pub fn run_real_overlay(image: &GrayImage, gt: &BinaryMask, offset: usize, cfg: &PtaConfig) -> Result<Vec<CaseResult>> {
    cfg.validate()?;
    if image.dims() != gt.dims() {
        return Err(PtaError::DimensionMismatch {
            expected: image.dims(),
            found: gt.dims(),
        });
    }
    let cases = offset_cases(gt, offset, offset)?;
    evaluate_cases(image, gt, &cases, 0, cfg)
}

/// CSV with one row per case and replicate: `case,replicate,loss_1..loss_K,aggregate,f1`.
/// Invalid sectors leave their cell empty.
pub fn results_csv(results: &[CaseResult]) -> String {
    let k = results.first().map_or(0, |r| r.sector_losses.len());
    let mut out = String::from("case,replicate");
    for i in 1..=k {
        out.push_str(&format!(",loss_{i}"));
    }
    out.push_str(",aggregate,f1\n");
    for r in results {
        out.push_str(&format!("{},{}", r.case, r.replicate));
        for l in &r.sector_losses {
            match l {
                Some(v) => out.push_str(&format!(",{v}")),
                None => out.push(','),
            }
        }
        out.push_str(&format!(",{},{}\n", r.aggregate, r.f1));
    }
    out
}

/// Band/sector map: inner-band pixels of sector `i` get value `i`, outer-band pixels
/// `128 + i`, everything else 0.
pub fn sector_map(mask: &BinaryMask, band_width: f64, sectors: usize) -> Result<LabelMask> {
    if sectors > 127 {
        return Err(PtaError::invalid("sector maps encode at most 127 sectors"));
    }
    let s = sectorize(mask, band_width, sectors)?;
    let (w, h) = mask.dims();
    let mut labels = vec![0u16; w * h];
    for (i, sector) in s.sectors.iter().enumerate() {
        for p in &sector.inner {
            labels[p.y * w + p.x] = (i + 1) as u16;
        }
        for p in &sector.outer {
            labels[p.y * w + p.x] = (128 + i + 1) as u16;
        }
    }
    LabelMask::new(w, h, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_image() {
        let spec = SyntheticSpec { seed: 7, ..SyntheticSpec::default() };
        let (a, _) = generate_image(&spec, 3).unwrap();
        let (b, _) = generate_image(&spec, 3).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate_image(&spec, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_means_within_clt_bounds() {
        let spec = SyntheticSpec { seed: 11, ..SyntheticSpec::default() };
        let (image, gt) = generate_image(&spec, 0).unwrap();
        let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
        for y in 0..200 {
            for x in 0..200 {
                if gt.get(x, y) {
                    si += image.get(x, y);
                    ni += 1;
                } else {
                    so += image.get(x, y);
                    no += 1;
                }
            }
        }
        assert_eq!((ni, no), (3600, 36400));
        assert!((si / ni as f64 - 3.5).abs() < 4.0 * 2.0 / 3600f64.sqrt());
        assert!((so / no as f64).abs() < 4.0 * 2.0 / 36400f64.sqrt());
    }

    #[test]
    fn default_case_geometry() {
        let spec = SyntheticSpec::default();
        let gt = spec.gt_mask().unwrap();
        let cases = offset_cases(&gt, 2, 5).unwrap();
        assert_eq!(cases[0], gt);
        let areas: Vec<usize> = cases.iter().map(|c| c.count()).collect();
        assert_eq!(areas, vec![3600, 4096, 3136, 3600, 3600]);
        let f1: Vec<f64> = cases.iter().map(|c| dsc_metric(&gt, c).unwrap()).collect();
        let expected = [1.0, 0.9356, 0.9311, 0.9167, 0.8403];
        for (a, e) in f1.iter().zip(expected) {
            assert!((a - e).abs() < 5e-5, "{a} vs {e}");
        }
    }

    #[test]
    fn offset_errors() {
        let gt = BinaryMask::rect(20, 20, 0, 5, 0, 5).unwrap();
        assert!(matches!(offset_cases(&gt, 1, 1), Err(PtaError::OutOfBounds(_))));
        let tiny = BinaryMask::rect(20, 20, 8, 10, 8, 10).unwrap();
        assert!(matches!(offset_cases(&tiny, 2, 1), Err(PtaError::OutOfBounds(_))));
        let spec = SyntheticSpec { gt_rect: [70, 230, 70, 130], ..SyntheticSpec::default() };
        assert!(generate_image(&spec, 0).is_err());
        let spec = SyntheticSpec { inside_sd: 0.0, ..SyntheticSpec::default() };
        assert!(generate_image(&spec, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![CaseResult {
            case: 2,
            replicate: 0,
            sector_losses: vec![Some(0.5), None],
            aggregate: 0.5,
            f1: 1.0,
        }];
        assert_eq!(results_csv(&rows), "case,replicate,loss_1,loss_2,aggregate,f1\n2,0,0.5,,0.5,1\n");
    }

    #[test]
    fn sector_map_encoding() {
        let gt = BinaryMask::rect(40, 40, 10, 30, 10, 30).unwrap();
        let map = sector_map(&gt, 2.0, 4).unwrap();
        let values: std::collections::BTreeSet<u16> = map.labels().iter().copied().collect();
        assert_eq!(values.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 129, 130, 131, 132]);
        assert_eq!(map.get(20, 20), 0);
        assert!(sector_map(&gt, 2.0, 128).is_err());
    }
}
