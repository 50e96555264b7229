//! Region losses and the composed boundary-contrast objective.

use serde::{Deserialize, Serialize};

use crate::error::{PtaError, Result};
use crate::geometry::{ensure_same_dims, sectorize, threshold, BinaryMask, GrayImage, LabelMask, ProbabilityMap};
use crate::stats::{piecewise_loss, LossMode, PiecewiseLossReport, DEFAULT_EPSILON};

/// Probabilities are clamped into `[P_MIN, 1]` before taking logarithms.
pub const P_MIN: f64 = 1e-12;

/// Per-class weights, indexed by label (0 is background).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WceWeights(Vec<f64>);

impl WceWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(PtaError::invalid("class weights must be finite and non-negative"));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(PtaError::invalid("at least one class weight must be positive"));
        }
        Ok(WceWeights(weights))
    }

    /// 0.1 for background and 0.3 for each of `foreground_classes` classes.
    pub fn background_foreground(foreground_classes: usize) -> Self {
        let mut w = vec![0.1];
        w.extend(std::iter::repeat_n(0.3, foreground_classes));
        WceWeights(w)
    }

    pub fn uniform(classes: usize) -> Self {
        WceWeights(vec![1.0; classes.max(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Ce,
    Wce,
    Dsc,
}

impl std::fmt::Display for BaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaseKind::Ce => "ce",
            BaseKind::Wce => "wce",
            BaseKind::Dsc => "dsc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseLoss {
    Ce,
    Wce(WceWeights),
    Dsc,
}

impl BaseLoss {
    pub fn kind(&self) -> BaseKind {
        match self {
            BaseLoss::Ce => BaseKind::Ce,
            BaseLoss::Wce(_) => BaseKind::Wce,
            BaseLoss::Dsc => BaseKind::Dsc,
        }
    }
}

/// Hyperparameters of the composed objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtaConfig {
    pub lambda: f64,
    pub sectors: usize,
    pub band_width: f64,
    pub threshold: f64,
    pub epsilon: f64,
    pub mode: LossMode,
}

impl Default for PtaConfig {
    fn default() -> Self {
        PtaConfig {
            lambda: 3.0,
            sectors: 10,
            band_width: 2.0,
            threshold: 0.5,
            epsilon: DEFAULT_EPSILON,
            mode: LossMode::TTest,
        }
    }
}

impl PtaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(PtaError::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.sectors == 0 {
            return Err(PtaError::invalid("sector count must be at least 1"));
        }
        if !(self.band_width > 0.0 && self.band_width.is_finite()) {
            return Err(PtaError::invalid(format!(
                "band width must be > 0, got {}",
                self.band_width
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(PtaError::invalid(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(PtaError::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

fn neg_log(p: f64) -> f64 {
    -p.clamp(P_MIN, 1.0).ln()
}

/// `-sum g(x) log f(x)` over foreground pixels of `gt`.
pub fn ce_loss(gt: &BinaryMask, pred: &ProbabilityMap) -> Result<f64> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    Ok(gt
        .bits()
        .iter()
        .zip(pred.probs())
        .filter(|(&g, _)| g)
        .map(|(_, &f)| neg_log(f))
        .sum())
}

fn check_class_maps(gt: &LabelMask, preds: &[ProbabilityMap]) -> Result<()> {
    for p in preds {
        ensure_same_dims(gt.dims(), p.dims())?;
    }
    let needed = gt.max_label() as usize + 1;
    if preds.len() < needed {
        return Err(PtaError::invalid(format!(
            "missing class map: labels go up to {}, but only {} maps were given",
            needed - 1,
            preds.len()
        )));
    }
    if preds.len() > 1 {
        for i in 0..gt.labels().len() {
            let total: f64 = preds.iter().map(|p| p.probs()[i]).sum();
            if total > 1.0 + 1e-6 {
                return Err(PtaError::invalid(format!(
                    "class probabilities sum to {total} at pixel index {i}"
                )));
            }
        }
    }
    Ok(())
}

/// `-sum w(label(x)) log f_label(x)(x)` with one probability map per class.
pub fn wce_loss(gt: &LabelMask, preds: &[ProbabilityMap], w: &WceWeights) -> Result<f64> {
    check_class_maps(gt, preds)?;
    if w.num_classes() < preds.len() {
        return Err(PtaError::invalid(format!(
            "{} class weights given for {} classes",
            w.num_classes(),
            preds.len()
        )));
    }
    Ok(gt
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| w.as_slice()[l as usize] * neg_log(preds[l as usize].probs()[i]))
        .sum())
}

/// `1 - 2|G n S| / (|G| + |S|)`, zero when both masks are empty.
pub fn dsc_loss(gt: &BinaryMask, seg: &BinaryMask) -> Result<f64> {
    let inter = gt.intersection_count(seg)?;
    let total = gt.count() + seg.count();
    if total == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - 2.0 * inter as f64 / total as f64)
}

/// Piecewise band loss of the region `mask` on `image`.
pub fn pt_for_mask(image: &GrayImage, mask: &BinaryMask, cfg: &PtaConfig) -> Result<PiecewiseLossReport> {
    ensure_same_dims(image.dims(), mask.dims())?;
    let sectors = sectorize(mask, cfg.band_width, cfg.sectors)?;
    piecewise_loss(image, &sectors, cfg.mode, cfg.epsilon)
}

#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Binary(&'a BinaryMask),
    Labels(&'a LabelMask),
}

#[derive(Debug, Clone, Copy)]
pub enum Prediction<'a> {
    /// Foreground probability of a two-class task.
    Binary(&'a ProbabilityMap),
    /// One map per class, background first.
    PerClass(&'a [ProbabilityMap]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PtStatus {
    Available,
    EmptySegmentation,
    DegenerateBands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPt {
    pub label: u16,
    pub status: PtStatus,
    pub report: Option<PiecewiseLossReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub base_kind: BaseKind,
    pub base: f64,
    pub lambda: f64,
    /// Piecewise band loss averaged over foreground classes; `None` if any class is unavailable.
    pub pt: Option<f64>,
    /// `base + lambda * pt`; `None` whenever `pt` is.
    pub total: Option<f64>,
    /// Set when the band term could not be evaluated.
    pub degenerate: bool,
    pub classes: Vec<ClassPt>,
}

fn class_pt(image: &GrayImage, label: u16, seg: &BinaryMask, cfg: &PtaConfig) -> Result<ClassPt> {
    if seg.is_empty() {
        return Ok(ClassPt {
            label,
            status: PtStatus::EmptySegmentation,
            report: None,
        });
    }
    match pt_for_mask(image, seg, cfg) {
        Ok(report) => Ok(ClassPt {
            label,
            status: PtStatus::Available,
            report: Some(report),
        }),
        Err(PtaError::DegenerateBands { .. }) => Ok(ClassPt {
            label,
            status: PtStatus::DegenerateBands,
            report: None,
        }),
        Err(e) => Err(e),
    }
}

/// Base loss plus `lambda` times the piecewise band loss of the thresholded prediction.
///
/// Multi-class inputs evaluate the band loss per foreground class (one-vs-rest) and
/// average. An empty or degenerate segmentation leaves the band term unavailable and
/// sets `degenerate`.
pub fn pta_loss(
    image: &GrayImage,
    target: Target<'_>,
    pred: Prediction<'_>,
    base: &BaseLoss,
    cfg: &PtaConfig,
) -> Result<LossReport> {
    cfg.validate()?;
    let (base_value, segs): (f64, Vec<(u16, BinaryMask)>) = match (target, pred) {
        (Target::Binary(gt), Prediction::Binary(f)) => {
            ensure_same_dims(image.dims(), gt.dims())?;
            ensure_same_dims(gt.dims(), f.dims())?;
            let seg = threshold(f, cfg.threshold)?;
            let value = match base {
                BaseLoss::Ce => ce_loss(gt, f)?,
                BaseLoss::Wce(w) => {
                    let background = ProbabilityMap::from_fn(f.width(), f.height(), |x, y| 1.0 - f.get(x, y))?;
                    wce_loss(&LabelMask::from_binary(gt), &[background, f.clone()], w)?
                }
                BaseLoss::Dsc => dsc_loss(gt, &seg)?,
            };
            (value, vec![(1, seg)])
        }
        (Target::Labels(gt), Prediction::PerClass(maps)) => {
            ensure_same_dims(image.dims(), gt.dims())?;
            check_class_maps(gt, maps)?;
            if maps.len() < 2 {
                return Err(PtaError::invalid("multi-class input needs at least two class maps"));
            }
            let segs = (1..maps.len())
                .map(|c| Ok((c as u16, threshold(&maps[c], cfg.threshold)?)))
                .collect::<Result<Vec<_>>>()?;
            let value = match base {
                BaseLoss::Ce => wce_loss(gt, maps, &WceWeights::uniform(maps.len()))?,
                BaseLoss::Wce(w) => wce_loss(gt, maps, w)?,
                BaseLoss::Dsc => {
                    let mut sum = 0.0;
                    for (label, seg) in &segs {
                        sum += dsc_loss(&gt.class_mask(*label), seg)?;
                    }
                    sum / segs.len() as f64
                }
            };
            (value, segs)
        }
        _ => {
            return Err(PtaError::invalid(
                "target and prediction must both be binary or both be multi-class",
            ))
        }
    };

    let classes = segs
        .iter()
        .map(|(label, seg)| class_pt(image, *label, seg, cfg))
        .collect::<Result<Vec<_>>>()?;
    let available: Vec<f64> = classes
        .iter()
        .filter_map(|c| c.report.as_ref().map(|r| r.aggregate))
        .collect();
    let pt = (available.len() == classes.len()).then(|| available.iter().sum::<f64>() / available.len() as f64);
    Ok(LossReport {
        base_kind: base.kind(),
        base: base_value,
        lambda: cfg.lambda,
        pt,
        total: pt.map(|v| base_value + cfg.lambda * v),
        degenerate: pt.is_none(),
        classes,
    })
}
