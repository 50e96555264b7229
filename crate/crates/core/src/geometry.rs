//! Pixel grids, boundary extraction, exact Euclidean distance transform,
//! boundary bands and angular sector partitions.
//!
//! Coordinates are `(x, y)` with `x` the column and `y` the row, origin at the
//! top-left pixel. All grids are stored row-major.

use std::f64::consts::PI;

use crate::error::{PtaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub fn new(x: usize, y: usize) -> Self {
        Pixel { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(PtaError::invalid(format!(
            "grid dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(PtaError::invalid(format!(
            "expected {} values for a {width}x{height} grid, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(PtaError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Real-valued grayscale intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PtaError::invalid(format!(
                "image value at index {i} is not finite"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn at(&self, p: Pixel) -> f64 {
        self.get(p.x, p.y)
    }

    /// Applies `v -> scale * v + offset` to every intensity.
    pub fn affine(&self, scale: f64, offset: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|v| scale * v + offset).collect(),
        )
    }
}

/// Per-pixel membership of a region.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)` inside a `width x height` frame.
    pub fn rect(width: usize, height: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> Result<Self> {
        if x0 > x1 || y0 > y1 || x1 > width || y1 > height {
            return Err(PtaError::OutOfBounds(format!(
                "rectangle [{x0},{x1})x[{y0},{y1}) does not fit a {width}x{height} frame"
            )));
        }
        Self::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.get(p.x, p.y)
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn toggle(&mut self, p: Pixel) {
        let i = p.y * self.width + p.x;
        self.bits[i] = !self.bits[i];
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// Member pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| Pixel::new(i % w, i / w))
    }

    /// Inclusive bounding box `(x_min, x_max, y_min, y_max)`, `None` when empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let w = self.width;
        let mut rows = self.bits.chunks(w).enumerate().filter(|(_, r)| r.contains(&true));
        let (y0, first) = rows.next()?;
        let (mut x0, mut x1) = row_extent(first);
        let mut y1 = y0;
        for (y, row) in rows {
            let (a, b) = row_extent(row);
            x0 = x0.min(a);
            x1 = x1.max(b);
            y1 = y;
        }
        Some((x0, x1, y0, y1))
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    /// Number of pixels whose membership differs between the two masks.
    pub fn symmetric_difference_count(&self, other: &BinaryMask) -> Result<usize> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a != b)
            .count())
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Translates the mask by `(dx, dy)`; fails if any member pixel would leave the frame.
    pub fn shifted(&self, dx: isize, dy: isize) -> Result<BinaryMask> {
        let mut out = BinaryMask::empty(self.width, self.height)?;
        for p in self.pixels() {
            let nx = p.x as isize + dx;
            let ny = p.y as isize + dy;
            if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                return Err(PtaError::OutOfBounds(format!(
                    "shift by ({dx}, {dy}) moves pixel ({}, {}) outside the frame",
                    p.x, p.y
                )));
            }
            out.set(nx as usize, ny as usize, true);
        }
        Ok(out)
    }

    /// Dilation by a `(2r+1) x (2r+1)` square; fails if the result would need pixels outside the frame.
    pub fn dilated(&self, radius: usize) -> Result<BinaryMask> {
        if let Some((x0, x1, y0, y1)) = self.bounding_box() {
            if x0 < radius || y0 < radius || x1 + radius >= self.width || y1 + radius >= self.height {
                return Err(PtaError::OutOfBounds(format!(
                    "dilation by {radius} pixels leaves the {}x{} frame",
                    self.width, self.height
                )));
            }
        }
        let rows = self.row_max_filter(radius, false);
        Ok(rows.col_filter(radius, false))
    }

    /// Erosion by a `(2r+1) x (2r+1)` square. Pixels beyond the frame count as background.
    pub fn eroded(&self, radius: usize) -> Result<BinaryMask> {
        let rows = self.row_max_filter(radius, true);
        Ok(rows.col_filter(radius, true))
    }

    // Separable square filter: `all == false` is dilation (any), `all == true` erosion (all).
    fn row_max_filter(&self, radius: usize, all: bool) -> BinaryMask {
        let (w, h) = self.dims();
        let mut out = vec![false; w * h];
        for y in 0..h {
            let row = &self.bits[y * w..(y + 1) * w];
            for x in 0..w {
                let lo = x as isize - radius as isize;
                let hi = x + radius;
                out[y * w + x] = if all {
                    lo >= 0 && hi < w && row[lo as usize..=hi].iter().all(|&b| b)
                } else {
                    row[lo.max(0) as usize..=hi.min(w - 1)].iter().any(|&b| b)
                };
            }
        }
        BinaryMask {
            width: w,
            height: h,
            bits: out,
        }
    }

    fn col_filter(&self, radius: usize, all: bool) -> BinaryMask {
        let (w, h) = self.dims();
        let mut out = vec![false; w * h];
        for x in 0..w {
            for y in 0..h {
                let lo = y as isize - radius as isize;
                let hi = y + radius;
                let mut column = (lo.max(0) as usize..=hi.min(h - 1)).map(|yy| self.bits[yy * w + x]);
                out[y * w + x] = if all {
                    lo >= 0 && hi < h && column.all(|b| b)
                } else {
                    column.any(|b| b)
                };
            }
        }
        BinaryMask {
            width: w,
            height: h,
            bits: out,
        }
    }
}

fn row_extent(row: &[bool]) -> (usize, usize) {
    let a = row.iter().position(|&b| b).unwrap_or(0);
    let b = row.iter().rposition(|&b| b).unwrap_or(0);
    (a, b)
}

/// Per-pixel class labels; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        check_dims(width, height, labels.len())?;
        Ok(LabelMask {
            width,
            height,
            labels,
        })
    }

    pub fn from_binary(mask: &BinaryMask) -> Self {
        LabelMask {
            width: mask.width,
            height: mask.height,
            labels: mask.bits.iter().map(|&b| u16::from(b)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn max_label(&self) -> u16 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// One-vs-rest mask of `label`.
    pub fn class_mask(&self, label: u16) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }
}

/// Per-pixel foreground probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    probs: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, probs: Vec<f64>) -> Result<Self> {
        check_dims(width, height, probs.len())?;
        if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(PtaError::invalid(format!(
                "probability {} at index {i} is outside [0, 1]",
                probs[i]
            )));
        }
        Ok(ProbabilityMap {
            width,
            height,
            probs,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut probs = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                probs.push(f(x, y));
            }
        }
        Self::new(width, height, probs)
    }

    /// Hard 0/1 probabilities from a mask.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        ProbabilityMap {
            width: mask.width,
            height: mask.height,
            probs: mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[y * self.width + x]
    }
}

/// Exact Euclidean distance of every pixel to a reference pixel set.
///
/// Squared distances are kept as integers so equality checks are exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    squared: Vec<u64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn squared(&self, x: usize, y: usize) -> u64 {
        self.squared[y * self.width + x]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        (self.squared(x, y) as f64).sqrt()
    }

    pub fn squared_values(&self) -> &[u64] {
        &self.squared
    }
}

/// Inner and outer boundary bands of a region.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPair {
    /// Pixels of the region closer than `band_width` to its boundary.
    pub inner: Vec<Pixel>,
    /// Pixels outside the region closer than `band_width` to its boundary.
    pub outer: Vec<Pixel>,
    pub band_width: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sector {
    pub inner: Vec<Pixel>,
    pub outer: Vec<Pixel>,
}

/// Band pixels split into `K` angular wedges around the region centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorizedBands {
    pub sectors: Vec<Sector>,
    pub centroid: Point,
}

impl SectorizedBands {
    pub fn k(&self) -> usize {
        self.sectors.len()
    }
}

/// Pixels with probability strictly above `delta`.
pub fn threshold(map: &ProbabilityMap, delta: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(PtaError::invalid(format!(
            "threshold {delta} is outside [0, 1]"
        )));
    }
    BinaryMask::new(
        map.width,
        map.height,
        map.probs.iter().map(|&p| p > delta).collect(),
    )
}

fn is_boundary(mask: &BinaryMask, x: usize, y: usize) -> bool {
    let (w, h) = mask.dims();
    mask.get(x, y)
        && (x == 0
            || y == 0
            || x + 1 == w
            || y + 1 == h
            || !mask.get(x - 1, y)
            || !mask.get(x + 1, y)
            || !mask.get(x, y - 1)
            || !mask.get(x, y + 1))
}

/// Region pixels with at least one 4-neighbour outside the region; the frame counts as outside.
pub fn extract_boundary(mask: &BinaryMask) -> Result<Vec<Pixel>> {
    let bbox = mask
        .bounding_box()
        .ok_or_else(|| PtaError::empty("cannot extract the boundary of an empty mask"))?;
    Ok(boundary_in(mask, bbox))
}

type BBox = (usize, usize, usize, usize);

fn boundary_in(mask: &BinaryMask, (x0, x1, y0, y1): BBox) -> Vec<Pixel> {
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if is_boundary(mask, x, y) {
                out.push(Pixel::new(x, y));
            }
        }
    }
    out
}

const INF: u64 = u64::MAX;

// Intersection abscissa of the parabolas rooted at p < q, as an exact fraction (num, den), den > 0.
fn intersection(f: &[u64], p: usize, q: usize) -> (i128, i128) {
    let num = (f[q] as i128 + (q * q) as i128) - (f[p] as i128 + (p * p) as i128);
    let den = 2 * (q as i128 - p as i128);
    (num, den)
}

// Lower envelope of parabolas y = (x - q)^2 + f(q); entries equal to INF carry no parabola.
fn envelope_1d(f: &[u64], out: &mut [u64], vertices: &mut Vec<usize>, bounds: &mut Vec<(i128, i128)>) {
    vertices.clear();
    bounds.clear();
    for q in 0..f.len() {
        if f[q] == INF {
            continue;
        }
        loop {
            let Some(&p) = vertices.last() else {
                vertices.push(q);
                bounds.push((0, 1));
                break;
            };
            let s = intersection(f, p, q);
            let last = bounds.len() - 1;
            let z = bounds[last];
            if last > 0 && s.0 * z.1 <= z.0 * s.1 {
                vertices.pop();
                bounds.pop();
            } else {
                vertices.push(q);
                bounds.push(s);
                break;
            }
        }
    }
    if vertices.is_empty() {
        out.fill(INF);
        return;
    }
    let mut k = 0;
    for (x, slot) in out.iter_mut().enumerate() {
        while k + 1 < vertices.len() && bounds[k + 1].0 < x as i128 * bounds[k + 1].1 {
            k += 1;
        }
        let dx = x.abs_diff(vertices[k]) as u64;
        *slot = dx * dx + f[vertices[k]];
    }
}

/// Squared EDT of a `width x height` grid where `seeds[i]` marks reference pixels.
pub(crate) fn squared_edt(width: usize, height: usize, seeds: &[bool]) -> Vec<u64> {
    debug_assert_eq!(seeds.len(), width * height);
    // Column pass: squared vertical distance to the nearest seed in the same column.
    let mut col = vec![INF; width * height];
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if seeds[y * width + x] {
                last = Some(y);
            }
            if let Some(l) = last {
                col[y * width + x] = ((y - l) as u64).pow(2);
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..height).rev() {
            if seeds[y * width + x] {
                next = Some(y);
            }
            if let Some(n) = next {
                let d = ((n - y) as u64).pow(2);
                let slot = &mut col[y * width + x];
                if d < *slot {
                    *slot = d;
                }
            }
        }
    }
    // Row pass: lower envelope of parabolas.
    let mut out = vec![INF; width * height];
    let mut vertices = Vec::with_capacity(width);
    let mut bounds = Vec::with_capacity(width);
    for y in 0..height {
        let row = y * width..(y + 1) * width;
        envelope_1d(&col[row.clone()], &mut out[row], &mut vertices, &mut bounds);
    }
    out
}

/// Exact Euclidean distance from every pixel to `ref_set`.
pub fn distance_transform(ref_set: &[Pixel], width: usize, height: usize) -> Result<DistanceField> {
    if width == 0 || height == 0 {
        return Err(PtaError::invalid("distance transform needs a non-empty grid"));
    }
    if ref_set.is_empty() {
        return Err(PtaError::empty("distance transform of an empty reference set"));
    }
    let mut seeds = vec![false; width * height];
    for p in ref_set {
        if p.x >= width || p.y >= height {
            return Err(PtaError::OutOfBounds(format!(
                "reference pixel ({}, {}) outside a {width}x{height} grid",
                p.x, p.y
            )));
        }
        seeds[p.y * width + p.x] = true;
    }
    Ok(DistanceField {
        width,
        height,
        squared: squared_edt(width, height, &seeds),
    })
}

/// Inner/outer bands of pixels closer than `d` to the region boundary.
pub fn compute_bands(mask: &BinaryMask, d: f64) -> Result<BandPair> {
    check_band_width(d)?;
    let bbox = mask
        .bounding_box()
        .ok_or_else(|| PtaError::empty("cannot build bands around an empty mask"))?;
    Ok(bands_in(mask, bbox, d))
}

fn check_band_width(d: f64) -> Result<()> {
    if d.is_nan() || d <= 0.0 || !d.is_finite() {
        return Err(PtaError::invalid(format!("band width must be positive and finite, got {d}")));
    }
    Ok(())
}

fn bands_in(mask: &BinaryMask, bbox: BBox, d: f64) -> BandPair {
    let boundary = boundary_in(mask, bbox);
    let (w, h) = mask.dims();
    let (bx0, bx1, by0, by1) = bbox;

    // Any pixel further than ceil(d) from the bounding box along one axis is at distance > d,
    // so the transform only needs the expanded box.
    let margin = d.ceil().min((w.max(h)) as f64) as usize;
    let wx0 = bx0.saturating_sub(margin);
    let wy0 = by0.saturating_sub(margin);
    let wx1 = (bx1 + margin).min(w - 1);
    let wy1 = (by1 + margin).min(h - 1);
    let ww = wx1 - wx0 + 1;
    let wh = wy1 - wy0 + 1;

    let mut seeds = vec![false; ww * wh];
    for p in &boundary {
        seeds[(p.y - wy0) * ww + (p.x - wx0)] = true;
    }
    let sq = squared_edt(ww, wh, &seeds);
    let limit = d * d;

    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for ly in 0..wh {
        for lx in 0..ww {
            if (sq[ly * ww + lx] as f64) < limit {
                let p = Pixel::new(lx + wx0, ly + wy0);
                if mask.contains(p) {
                    inner.push(p);
                } else {
                    outer.push(p);
                }
            }
        }
    }
    BandPair {
        inner,
        outer,
        band_width: d,
    }
}

/// Mean coordinate of the region pixels.
pub fn centroid(mask: &BinaryMask) -> Result<Point> {
    let bbox = mask
        .bounding_box()
        .ok_or_else(|| PtaError::empty("centroid of an empty mask"))?;
    Ok(centroid_in(mask, bbox))
}

fn centroid_in(mask: &BinaryMask, (x0, x1, y0, y1): BBox) -> Point {
    let mut n = 0usize;
    let (mut sx, mut sy) = (0usize, 0usize);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask.get(x, y) {
                n += 1;
                sx += x;
                sy += y;
            }
        }
    }
    Point {
        x: sx as f64 / n as f64,
        y: sy as f64 / n as f64,
    }
}

/// Polar angle of `p` around `c` in `(0, 2*pi]`, counter-clockwise from the +x axis as
/// displayed (rows grow downwards, so the vertical component is negated).
pub fn polar_angle(p: Pixel, c: Point) -> Option<f64> {
    let dx = p.x as f64 - c.x;
    let dy = c.y - p.y as f64;
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    let a = dy.atan2(dx);
    Some(if a <= 0.0 { a + 2.0 * PI } else { a })
}

/// 1-based sector index of `p`: sector `i` covers angles in `((i-1) 2pi/K, i 2pi/K]`.
/// A pixel exactly at the centroid goes to sector 1.
pub fn sector_of(p: Pixel, c: Point, k: usize) -> usize {
    match polar_angle(p, c) {
        None => 1,
        Some(a) => ((a * k as f64 / (2.0 * PI)).ceil() as usize).clamp(1, k),
    }
}

pub fn partition_sectors(bands: &BandPair, c: Point, k: usize) -> Result<SectorizedBands> {
    if k == 0 {
        return Err(PtaError::invalid("sector count must be at least 1"));
    }
    if !c.x.is_finite() || !c.y.is_finite() {
        return Err(PtaError::invalid("centroid must be finite"));
    }
    let mut sectors = vec![Sector::default(); k];
    for &p in &bands.inner {
        sectors[sector_of(p, c, k) - 1].inner.push(p);
    }
    for &p in &bands.outer {
        sectors[sector_of(p, c, k) - 1].outer.push(p);
    }
    Ok(SectorizedBands { sectors, centroid: c })
}

/// Bands of `mask` at width `d`, partitioned into `k` sectors around the mask centroid.
pub fn sectorize(mask: &BinaryMask, d: f64, k: usize) -> Result<SectorizedBands> {
    check_band_width(d)?;
    let bbox = mask
        .bounding_box()
        .ok_or_else(|| PtaError::empty("cannot build bands around an empty mask"))?;
    let bands = bands_in(mask, bbox, d);
    partition_sectors(&bands, centroid_in(mask, bbox), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density)).unwrap()
    }

    fn brute_force_sq(ref_set: &[Pixel], x: usize, y: usize) -> u64 {
        ref_set
            .iter()
            .map(|p| {
                let dx = p.x.abs_diff(x) as u64;
                let dy = p.y.abs_diff(y) as u64;
                dx * dx + dy * dy
            })
            .min()
            .unwrap()
    }

    fn brute_force_boundary(mask: &BinaryMask) -> Vec<Pixel> {
        let (w, h) = mask.dims();
        let inside = |x: isize, y: isize| {
            x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize)
        };
        let mut out = Vec::new();
        for y in 0..h as isize {
            for x in 0..w as isize {
                if inside(x, y)
                    && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .any(|(dx, dy)| !inside(x + dx, y + dy))
                {
                    out.push(Pixel::new(x as usize, y as usize));
                }
            }
        }
        out
    }

    fn square() -> BinaryMask {
        BinaryMask::rect(200, 200, 70, 130, 70, 130).unwrap()
    }

    #[test]
    fn threshold_cases() {
        let ones = ProbabilityMap::new(3, 2, vec![1.0; 6]).unwrap();
        assert!(threshold(&ones, 0.5).unwrap().is_full());
        let halves = ProbabilityMap::new(3, 2, vec![0.5; 6]).unwrap();
        assert!(threshold(&halves, 0.5).unwrap().is_empty());
        assert!(matches!(threshold(&halves, 1.5), Err(PtaError::InvalidArgument(_))));
        assert!(matches!(threshold(&halves, -0.1), Err(PtaError::InvalidArgument(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let map = ProbabilityMap::from_fn(8, 8, |_, _| rng.random::<f64>()).unwrap();
        let mask = threshold(&map, 0.3).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(mask.get(x, y), map.get(x, y) > 0.3);
            }
        }
    }

    #[test]
    fn boundary_of_single_pixel_and_square() {
        let mut m = BinaryMask::empty(5, 5).unwrap();
        m.set(2, 3, true);
        assert_eq!(extract_boundary(&m).unwrap(), vec![Pixel::new(2, 3)]);
        assert_eq!(extract_boundary(&square()).unwrap().len(), 236);
        assert!(matches!(
            extract_boundary(&BinaryMask::empty(4, 4).unwrap()),
            Err(PtaError::EmptyRegion(_))
        ));
    }

    #[test]
    fn boundary_touching_frame() {
        let full = BinaryMask::from_fn(4, 3, |_, _| true).unwrap();
        // every pixel of a 4x3 frame except the two centre ones
        assert_eq!(extract_boundary(&full).unwrap().len(), 10);
    }

    #[test]
    fn boundary_matches_neighbour_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_mask(&mut rng, 17, 13, 0.6);
            if m.is_empty() {
                continue;
            }
            assert_eq!(extract_boundary(&m).unwrap(), brute_force_boundary(&m));
        }
    }

    #[test]
    fn distance_transform_axis_and_345() {
        let df = distance_transform(&[Pixel::new(5, 5)], 11, 11).unwrap();
        assert_eq!(df.get(5, 8), 3.0);
        assert_eq!(df.get(8, 9), 5.0);
        assert_eq!(df.get(5, 5), 0.0);
        assert!(matches!(distance_transform(&[], 3, 3), Err(PtaError::EmptyRegion(_))));
        assert!(matches!(
            distance_transform(&[Pixel::new(3, 0)], 3, 3),
            Err(PtaError::OutOfBounds(_))
        ));
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for round in 0..12 {
            let (w, h) = (1 + rng.random_range(0..40), 1 + rng.random_range(0..40));
            let density = [0.002, 0.02, 0.2, 0.7][round % 4];
            let mut m = random_mask(&mut rng, w, h, density);
            if m.is_empty() {
                m.set(w / 2, h / 2, true);
            }
            let refs: Vec<Pixel> = m.pixels().collect();
            let df = distance_transform(&refs, w, h).unwrap();
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(df.squared(x, y), brute_force_sq(&refs, x, y), "({x},{y})");
                    assert_eq!(df.squared(x, y) == 0, m.get(x, y));
                }
            }
        }
    }

    #[test]
    fn bands_of_square() {
        let sq = square();
        let b = compute_bands(&sq, 2.0).unwrap();
        assert_eq!(b.inner.len(), 236 + 228);
        // side rows plus the four diagonal corner pixels at distance sqrt(2)
        assert_eq!(b.outer.len(), 240 + 4);
        let thin = compute_bands(&sq, 0.5).unwrap();
        assert_eq!(thin.inner, extract_boundary(&sq).unwrap());
        assert!(thin.outer.is_empty());
        assert!(matches!(compute_bands(&sq, 0.0), Err(PtaError::InvalidArgument(_))));
        assert!(matches!(compute_bands(&sq, -1.0), Err(PtaError::InvalidArgument(_))));
        assert!(matches!(
            compute_bands(&BinaryMask::empty(3, 3).unwrap(), 2.0),
            Err(PtaError::EmptyRegion(_))
        ));
    }

    #[test]
    fn bands_match_full_frame_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let m = random_mask(&mut rng, 24, 19, 0.4);
            if m.is_empty() {
                continue;
            }
            let d = rng.random_range(0.3..5.0);
            let b = compute_bands(&m, d).unwrap();
            let boundary = brute_force_boundary(&m);
            let mut inner = Vec::new();
            let mut outer = Vec::new();
            for y in 0..19 {
                for x in 0..24 {
                    if (brute_force_sq(&boundary, x, y) as f64).sqrt() < d {
                        if m.get(x, y) {
                            inner.push(Pixel::new(x, y));
                        } else {
                            outer.push(Pixel::new(x, y));
                        }
                    }
                }
            }
            assert_eq!(b.inner, inner);
            assert_eq!(b.outer, outer);
            assert!(b.inner.iter().all(|&p| m.contains(p)));
            assert!(b.outer.iter().all(|&p| !m.contains(p)));
        }
    }

    #[test]
    fn centroid_cases() {
        let c = centroid(&square()).unwrap();
        assert_eq!((c.x, c.y), (99.5, 99.5));
        let mut m = BinaryMask::empty(10, 10).unwrap();
        m.set(3, 7, true);
        let c = centroid(&m).unwrap();
        assert_eq!((c.x, c.y), (3.0, 7.0));
        assert!(centroid(&BinaryMask::empty(2, 2).unwrap()).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_mask(&mut rng, 30, 20, 0.3);
        let pts: Vec<(f64, f64)> = (0..20)
            .flat_map(|y| (0..30).map(move |x| (x, y)))
            .filter(|&(x, y)| m.get(x, y))
            .map(|(x, y)| (x as f64, y as f64))
            .collect();
        let n = pts.len() as f64;
        let ox = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let oy = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let c = centroid(&m).unwrap();
        assert!((c.x - ox).abs() < 1e-12 && (c.y - oy).abs() < 1e-12);
    }

    #[test]
    fn sector_conventions() {
        let c = Point { x: 0.5, y: 0.5 };
        // right of centre on the horizontal axis would be angle 0 -> 2pi -> last sector
        let on_axis = Point { x: 0.0, y: 0.0 };
        assert_eq!(sector_of(Pixel::new(1, 0), on_axis, 4), 4);
        // straight up (row above) is pi/2 -> first sector for K = 4
        assert_eq!(sector_of(Pixel::new(0, 0), Point { x: 0.0, y: 1.0 }, 4), 1);
        assert_eq!(sector_of(Pixel::new(0, 0), Point { x: 0.0, y: 0.0 }, 7), 1);
        // upper-right quadrant
        assert_eq!(sector_of(Pixel::new(1, 0), c, 4), 1);
        assert_eq!(sector_of(Pixel::new(0, 0), c, 4), 2);
        assert_eq!(sector_of(Pixel::new(0, 1), c, 4), 3);
        assert_eq!(sector_of(Pixel::new(1, 1), c, 4), 4);
    }

    #[test]
    fn sectors_k1_and_fourfold_symmetry() {
        let sq = square();
        let bands = compute_bands(&sq, 2.0).unwrap();
        let c = centroid(&sq).unwrap();
        let one = partition_sectors(&bands, c, 1).unwrap();
        assert_eq!(one.sectors[0].inner, bands.inner);
        assert_eq!(one.sectors[0].outer, bands.outer);

        let four = partition_sectors(&bands, c, 4).unwrap();
        let inner: Vec<usize> = four.sectors.iter().map(|s| s.inner.len()).collect();
        let outer: Vec<usize> = four.sectors.iter().map(|s| s.outer.len()).collect();
        assert!(inner.iter().all(|&n| n == inner[0]), "{inner:?}");
        assert!(outer.iter().all(|&n| n == outer[0]), "{outer:?}");
        assert!(partition_sectors(&bands, c, 0).is_err());
    }

    #[test]
    fn sectors_match_angle_binning() {
        let sq = square();
        let bands = compute_bands(&sq, 2.0).unwrap();
        let c = centroid(&sq).unwrap();
        let s = partition_sectors(&bands, c, 10).unwrap();
        // independent oracle: bin by comparing against sector edges in degrees
        let bin = |p: &Pixel| {
            let mut deg = (c.y - p.y as f64).atan2(p.x as f64 - c.x).to_degrees();
            if deg <= 0.0 {
                deg += 360.0;
            }
            (1..=10).find(|&i| deg > 36.0 * (i - 1) as f64 && deg <= 36.0 * i as f64).unwrap()
        };
        for i in 1..=10 {
            let n_in = bands.inner.iter().filter(|p| bin(p) == i).count();
            let n_out = bands.outer.iter().filter(|p| bin(p) == i).count();
            assert_eq!(s.sectors[i - 1].inner.len(), n_in);
            assert_eq!(s.sectors[i - 1].outer.len(), n_out);
        }
    }

    #[test]
    fn morphology_and_shift() {
        let sq = square();
        assert_eq!(sq.dilated(2).unwrap(), BinaryMask::rect(200, 200, 68, 132, 68, 132).unwrap());
        assert_eq!(sq.eroded(2).unwrap(), BinaryMask::rect(200, 200, 72, 128, 72, 128).unwrap());
        assert_eq!(sq.shifted(5, 0).unwrap(), BinaryMask::rect(200, 200, 75, 135, 70, 130).unwrap());
        assert!(matches!(sq.shifted(80, 0), Err(PtaError::OutOfBounds(_))));
        let edge = BinaryMask::rect(10, 10, 0, 3, 0, 3).unwrap();
        assert!(edge.dilated(1).is_err());
        let core = edge.eroded(1).unwrap();
        assert_eq!(core.pixels().collect::<Vec<_>>(), vec![Pixel::new(1, 1)]);
    }
}
