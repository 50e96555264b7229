//! Two-sample statistics over boundary bands and the piecewise band loss.

use serde::{Deserialize, Serialize};

use crate::error::{PtaError, Result};
use crate::geometry::{GrayImage, Pixel, SectorizedBands};

/// Default lower cap applied to `|t|` (or the mean difference) before taking the reciprocal.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Magnitude reported for a t statistic whose denominator vanished with unequal means.
pub const T_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance (divisor `n - 1`).
    pub var: f64,
}

impl SampleStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        sample_stats(values)
    }
}

pub fn sample_stats(values: &[f64]) -> Result<SampleStats> {
    let n = values.len();
    if n < 2 {
        return Err(PtaError::InsufficientSample { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(SampleStats {
        n,
        mean,
        var: ss / (n - 1) as f64,
    })
}

/// Welch two-sample statistic `(mean+ - mean-) / sqrt(var+/n+ + var-/n-)`.
///
/// When both variances are zero the result is `0.0` for equal means and a signed
/// infinity otherwise.
pub fn welch_t(plus: &SampleStats, minus: &SampleStats) -> f64 {
    let diff = plus.mean - minus.mean;
    let se2 = plus.var / plus.n as f64 + minus.var / minus.n as f64;
    if se2 == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / se2.sqrt()
    }
}

pub fn mean_diff(plus: &SampleStats, minus: &SampleStats) -> f64 {
    (plus.mean - minus.mean).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Reciprocal absolute Welch statistic per sector.
    #[default]
    TTest,
    /// Reciprocal absolute mean difference per sector (simplified variant).
    MeanDiff,
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossMode::TTest => "t-test",
            LossMode::MeanDiff => "mean-diff",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorStatistic {
    /// 1-based sector index.
    pub index: usize,
    /// Welch statistic, capped at `+-T_CAP`; `None` for invalid sectors.
    pub t: Option<f64>,
    /// Absolute mean difference; `None` for invalid sectors.
    pub v: Option<f64>,
    pub n_plus: usize,
    pub n_minus: usize,
    pub valid: bool,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLossReport {
    pub mode: LossMode,
    pub per_sector: Vec<SectorStatistic>,
    /// Mean per-sector loss over valid sectors.
    pub aggregate: f64,
    pub skipped: usize,
}

impl PiecewiseLossReport {
    pub fn sector_losses(&self) -> Vec<Option<f64>> {
        self.per_sector.iter().map(|s| s.loss).collect()
    }
}

fn gather(image: &GrayImage, pixels: &[Pixel], buf: &mut Vec<f64>) -> Result<()> {
    buf.clear();
    for p in pixels {
        if p.x >= image.width() || p.y >= image.height() {
            return Err(PtaError::OutOfBounds(format!(
                "band pixel ({}, {}) outside the {}x{} image",
                p.x,
                p.y,
                image.width(),
                image.height()
            )));
        }
        buf.push(image.at(*p));
    }
    Ok(())
}

/// Per-sector reciprocal contrast between the outer and inner band samples.
///
/// Sectors with fewer than two pixels on either side are marked invalid and left
/// out of the mean.
pub fn piecewise_loss(
    image: &GrayImage,
    sectors: &SectorizedBands,
    mode: LossMode,
    eps: f64,
) -> Result<PiecewiseLossReport> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(PtaError::invalid(format!("epsilon must be positive, got {eps}")));
    }
    let mut plus_buf = Vec::new();
    let mut minus_buf = Vec::new();
    let mut per_sector = Vec::with_capacity(sectors.k());
    for (i, sector) in sectors.sectors.iter().enumerate() {
        gather(image, &sector.outer, &mut plus_buf)?;
        gather(image, &sector.inner, &mut minus_buf)?;
        let (n_plus, n_minus) = (plus_buf.len(), minus_buf.len());
        let stat = match (sample_stats(&plus_buf), sample_stats(&minus_buf)) {
            (Ok(plus), Ok(minus)) => {
                let t = welch_t(&plus, &minus).clamp(-T_CAP, T_CAP);
                let v = mean_diff(&plus, &minus);
                let loss = match mode {
                    LossMode::TTest => 1.0 / t.abs().max(eps),
                    LossMode::MeanDiff => 1.0 / v.max(eps),
                };
                SectorStatistic {
                    index: i + 1,
                    t: Some(t),
                    v: Some(v),
                    n_plus,
                    n_minus,
                    valid: true,
                    loss: Some(loss),
                }
            }
            _ => SectorStatistic {
                index: i + 1,
                t: None,
                v: None,
                n_plus,
                n_minus,
                valid: false,
                loss: None,
            },
        };
        per_sector.push(stat);
    }
    let valid: Vec<f64> = per_sector.iter().filter_map(|s| s.loss).collect();
    if valid.is_empty() {
        return Err(PtaError::DegenerateBands {
            sectors: sectors.k(),
        });
    }
    let aggregate = valid.iter().sum::<f64>() / valid.len() as f64;
    Ok(PiecewiseLossReport {
        mode,
        skipped: per_sector.len() - valid.len(),
        per_sector,
        aggregate,
    })
}
