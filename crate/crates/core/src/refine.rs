//! Gradient-free refinement of a candidate mask by single-pixel flips along its
//! boundary, minimising the piecewise band loss plus a fidelity penalty.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PtaError, Result};
use crate::geometry::{ensure_same_dims, BinaryMask, GrayImage, Pixel};
use crate::losses::{pt_for_mask, PtaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Acceptance {
    /// Accept a move only if it strictly lowers the objective.
    Greedy,
    /// Metropolis acceptance at temperature `initial * cooling^iteration`.
    Annealing { initial: f64, cooling: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Penalty weight on `|S xor init| / |init|`.
    pub mu: f64,
    pub max_iters: usize,
    /// Candidate flips scored per iteration; the best one is proposed.
    pub moves_per_iter: usize,
    pub acceptance: Acceptance,
    pub seed: u64,
    pub pta: PtaConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            mu: 0.5,
            max_iters: 2000,
            moves_per_iter: 4,
            acceptance: Acceptance::Greedy,
            seed: 0,
            pta: PtaConfig::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        self.pta.validate()?;
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(PtaError::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.max_iters == 0 {
            return Err(PtaError::invalid("max_iters must be at least 1"));
        }
        if self.moves_per_iter == 0 {
            return Err(PtaError::invalid("moves_per_iter must be at least 1"));
        }
        if let Acceptance::Annealing { initial, cooling } = self.acceptance {
            if !(initial >= 0.0 && (0.0..=1.0).contains(&cooling)) {
                return Err(PtaError::invalid("annealing needs initial >= 0 and cooling in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Objective of the current mask after this iteration's decision.
    pub objective: f64,
    pub pt: f64,
    /// `|S xor init|`.
    pub changed: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineTrace {
    pub initial_objective: f64,
    pub rows: Vec<TraceRow>,
    pub final_mask: BinaryMask,
}

impl RefineTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,pt,changed_pixels,accepted\n");
        out.push_str(&format!("0,{},{},0,true\n", self.initial_objective, self.initial_objective));
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iteration, r.objective, r.pt, r.changed, r.accepted
            ));
        }
        out
    }

    /// Objective values of the accepted states, starting with the initial mask.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.rows.iter().filter(|r| r.accepted).map(|r| r.objective))
            .collect()
    }
}

/// `(J, L_PT)` with `J(S) = L_PT(S) + mu * |S xor init| / |init|`.
pub fn objective(image: &GrayImage, mask: &BinaryMask, init: &BinaryMask, rc: &RefineConfig) -> Result<(f64, f64)> {
    let init_count = init.count();
    if init_count == 0 {
        return Err(PtaError::empty("refinement needs a non-empty initial mask"));
    }
    let pt = pt_for_mask(image, mask, &rc.pta)?.aggregate;
    let changed = mask.symmetric_difference_count(init)?;
    Ok((pt + rc.mu * changed as f64 / init_count as f64, pt))
}

/// Pixels whose flip keeps changes local: region pixels on the boundary and
/// background pixels 4-adjacent to one. Row-major order.
pub fn candidate_moves(mask: &BinaryMask) -> Vec<Pixel> {
    let Some((x0, x1, y0, y1)) = mask.bounding_box() else {
        return Vec::new();
    };
    let (w, h) = mask.dims();
    let inside = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize);
    let mut out = Vec::new();
    for y in y0.saturating_sub(1)..=(y1 + 1).min(h - 1) {
        for x in x0.saturating_sub(1)..=(x1 + 1).min(w - 1) {
            let (xi, yi) = (x as isize, y as isize);
            let neighbours = [(xi - 1, yi), (xi + 1, yi), (xi, yi - 1), (xi, yi + 1)];
            let keep = if mask.get(x, y) {
                neighbours.iter().any(|&(a, b)| !inside(a, b))
            } else {
                neighbours.iter().any(|&(a, b)| inside(a, b))
            };
            if keep {
                out.push(Pixel::new(x, y));
            }
        }
    }
    out
}

fn temperature(acceptance: Acceptance, iteration: usize) -> f64 {
    match acceptance {
        Acceptance::Greedy => 0.0,
        Acceptance::Annealing { initial, cooling } => initial * cooling.powi(iteration as i32),
    }
}

fn accept(delta: f64, temp: f64, rng: &mut ChaCha8Rng) -> bool {
    if delta < 0.0 {
        return true;
    }
    if temp <= 0.0 || !delta.is_finite() {
        return false;
    }
    rng.random::<f64>() < (-delta / temp).exp()
}

/// Local search from `init`. Under greedy acceptance the returned mask never has a
/// larger objective than `init`.
pub fn refine(image: &GrayImage, init: &BinaryMask, rc: &RefineConfig) -> Result<(BinaryMask, RefineTrace)> {
    rc.validate()?;
    ensure_same_dims(image.dims(), init.dims())?;
    if init.is_empty() {
        return Err(PtaError::empty("refinement needs a non-empty initial mask"));
    }
    let (initial_objective, _) = objective(image, init, init, rc)?;
    let total = init.width() * init.height();

    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let mut mask = init.clone();
    let mut count = init.count();
    let mut current = initial_objective;
    let mut current_pt = initial_objective;
    let mut changed = 0usize;
    let mut rows = Vec::with_capacity(rc.max_iters);

    for iteration in 1..=rc.max_iters {
        let moves: Vec<Pixel> = candidate_moves(&mask)
            .into_iter()
            .filter(|&p| if mask.contains(p) { count > 1 } else { count + 1 < total })
            .collect();
        let picked: Vec<Pixel> = moves.choose_multiple(&mut rng, rc.moves_per_iter).copied().collect();

        // Score candidates; ties go to the lowest row-major index.
        let best = picked
            .par_iter()
            .map(|&p| {
                let mut trial = mask.clone();
                trial.toggle(p);
                let scored = match objective(image, &trial, init, rc) {
                    Ok(v) => Ok(Some(v)),
                    Err(PtaError::DegenerateBands { .. }) => Ok(None),
                    Err(e) => Err(e),
                };
                scored.map(|s| s.map(|(j, pt)| (j, pt, p)))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .min_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then((a.2.y, a.2.x).cmp(&(b.2.y, b.2.x)))
            });

        let mut accepted = false;
        if let Some((j, pt, p)) = best {
            if accept(j - current, temperature(rc.acceptance, iteration - 1), &mut rng) {
                let was_in = mask.contains(p);
                mask.toggle(p);
                count = if was_in { count - 1 } else { count + 1 };
                if init.contains(p) == was_in {
                    changed += 1;
                } else {
                    changed -= 1;
                }
                current = j;
                current_pt = pt;
                accepted = true;
            }
        }
        rows.push(TraceRow {
            iteration,
            objective: current,
            pt: current_pt,
            changed,
            accepted,
        });
    }

    Ok((
        mask.clone(),
        RefineTrace {
            initial_objective,
            rows,
            final_mask: mask,
        },
    ))
}
