//! Intensity images from ground returns, and their edge-pruned tiling.
//!
//! Row 0 of an [`IntensityImage`] is the southern (minimum y) row. PGM
//! files are written north-up; the flip happens when converting to and
//! from [`GrayImage`].

mod pgm;
mod tiles;

pub use pgm::{read_pgm, write_pgm, GrayImage, PgmFormat};
pub use tiles::{edge_density, split_tiles, write_tiles, Tile, TileInfo, TileManifest, TileSet};

use serde::{Deserialize, Serialize};

use crate::cloud::{Bounds, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub x0: f64,
    pub y0: f64,
    /// Metres per pixel.
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 south. Empty cells are 0.
    pub pixels: Vec<f64>,
}

impl IntensityImage {
    pub fn new(x0: f64, y0: f64, resolution: f64, width: usize, height: usize) -> Self {
        IntensityImage {
            x0,
            y0,
            resolution,
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.pixels[row * self.width + col] = v;
    }

    /// Smallest and largest pixel value.
    pub fn range(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Copy with values min-max scaled onto 0..=255.
    pub fn scaled_to_u8_range(&self) -> IntensityImage {
        let (lo, hi) = self.range();
        let mut out = self.clone();
        for v in &mut out.pixels {
            *v = scale_255(*v, lo, hi);
        }
        out
    }
}

/// Maps `v` from `[lo, hi]` onto `[0, 255]`; a flat range maps to 0.
pub(crate) fn scale_255(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo) * 255.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    #[default]
    Otsu,
    /// Keep points at or above this percentile (0..=100).
    Percentile(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterParams {
    /// Metres per pixel.
    pub resolution: f64,
    pub aggregator: Aggregator,
    pub threshold_method: ThresholdMethod,
    /// Gaussian standard deviation in pixels.
    pub sigma: f64,
    pub window: usize,
    pub stride: usize,
    /// Sobel magnitude, on the 0–255 scale, at which a pixel counts as edge.
    pub edge_mag_thresh: f64,
    pub min_edge_density: f64,
}

impl Default for RasterParams {
    fn default() -> Self {
        RasterParams {
            resolution: 0.05,
            aggregator: Aggregator::Max,
            threshold_method: ThresholdMethod::Otsu,
            sigma: 1.0,
            window: 256,
            stride: 256,
            edge_mag_thresh: 64.0,
            min_edge_density: 0.01,
        }
    }
}

impl RasterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::param(format!("resolution must be positive, got {}", self.resolution)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.stride < 1 || self.window < self.stride {
            return Err(Error::param(format!(
                "need window >= stride >= 1, got window {} and stride {}",
                self.window, self.stride
            )));
        }
        if !(self.min_edge_density > 0.0 && self.min_edge_density < 1.0) {
            return Err(Error::param(format!(
                "min_edge_density must lie in (0, 1), got {}",
                self.min_edge_density
            )));
        }
        if !(self.edge_mag_thresh >= 0.0 && self.edge_mag_thresh.is_finite()) {
            return Err(Error::param(format!("edge_mag_thresh must be non-negative, got {}", self.edge_mag_thresh)));
        }
        if let ThresholdMethod::Percentile(p) = self.threshold_method {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::param(format!("percentile must lie in [0, 100], got {p}")));
            }
        }
        Ok(())
    }
}

/// 256-bin histogram of intensities min-max scaled onto 0..=255.
fn bin_of(v: f64, lo: f64, hi: f64) -> usize {
    (((v - lo) / (hi - lo) * 255.0).floor() as usize).min(255)
}

/// Otsu's threshold as a bin index `t` in 1..=255: bins `>= t` are the
/// bright class. Ties go to the smallest `t`.
pub fn otsu_bin(values: &[f64]) -> Result<(usize, f64, f64)> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() {
        return Err(Error::EmptyInput("no intensities to threshold".into()));
    }
    if !(hi > lo) {
        return Err(Error::degenerate("constant intensities give a degenerate histogram"));
    }
    let mut hist = [0u64; 256];
    for &v in values {
        hist[bin_of(v, lo, hi)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best_t, mut best_var) = (1, f64::NEG_INFINITY);
    for t in 1..256 {
        w0 += hist[t - 1] as f64;
        sum0 += (t - 1) as f64 * hist[t - 1] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1).powi(2);
        if var > best_var {
            best_var = var;
            best_t = t;
        }
    }
    Ok((best_t, lo, hi))
}

/// Linearly interpolated `p`-th percentile (0..=100) of `values`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no intensities to threshold".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::param(format!("percentile must lie in [0, 100], got {p}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    let j = (i + 1).min(sorted.len() - 1);
    Ok(sorted[i] + frac * (sorted[j] - sorted[i]))
}

/// Outcome of intensity thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholded {
    /// Indices of retained points, ascending.
    pub retained: Vec<usize>,
    /// Intensity threshold in the input units.
    pub threshold: f64,
}

/// Keeps the points whose intensity reaches the threshold chosen by
/// `method`.
pub fn threshold_points(points: &[Point], method: ThresholdMethod) -> Result<Thresholded> {
    let values: Vec<f64> = points.iter().map(|p| p.intensity).collect();
    match method {
        ThresholdMethod::Otsu => {
            let (t, lo, hi) = otsu_bin(&values)?;
            Ok(Thresholded {
                retained: (0..values.len()).filter(|&i| bin_of(values[i], lo, hi) >= t).collect(),
                threshold: lo + t as f64 * (hi - lo) / 255.0,
            })
        }
        ThresholdMethod::Percentile(p) => {
            let threshold = percentile(&values, p)?;
            Ok(Thresholded {
                retained: (0..values.len()).filter(|&i| values[i] >= threshold).collect(),
                threshold,
            })
        }
    }
}

/// Grids point intensities into cells of `params.resolution`, anchored at
/// the points' XY minimum.
pub fn rasterize_intensity(points: &[Point], params: &RasterParams) -> Result<IntensityImage> {
    let b = crate::cloud::Bounds::of(points).ok_or_else(|| Error::EmptyInput("no points to rasterize".into()))?;
    rasterize_intensity_in(points, params, &b)
}

/// Like [`rasterize_intensity`] but over the XY extent of `bounds`, so
/// thresholded subsets share the grid of the full ground set. Points
/// outside `bounds` are ignored.
pub fn rasterize_intensity_in(points: &[Point], params: &RasterParams, bounds: &Bounds) -> Result<IntensityImage> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput("no points to rasterize".into()));
    }
    let b = bounds;
    let res = params.resolution;
    let width = ((b.width() / res).floor() as usize) + 1;
    let height = ((b.height() / res).floor() as usize) + 1;
    let mut img = IntensityImage::new(b.min_x, b.min_y, res, width, height);
    let mut counts = vec![0u32; width * height];
    for p in points.iter().filter(|p| (b.min_x..=b.max_x).contains(&p.x) && (b.min_y..=b.max_y).contains(&p.y)) {
        let col = (((p.x - b.min_x) / res).floor() as usize).min(width - 1);
        let row = (((p.y - b.min_y) / res).floor() as usize).min(height - 1);
        let k = row * width + col;
        counts[k] += 1;
        img.pixels[k] = match params.aggregator {
            Aggregator::Max if counts[k] == 1 => p.intensity,
            Aggregator::Max => img.pixels[k].max(p.intensity),
            Aggregator::Mean => img.pixels[k] + p.intensity,
        };
    }
    if params.aggregator == Aggregator::Mean {
        for (v, &n) in img.pixels.iter_mut().zip(&counts) {
            if n > 0 {
                *v /= n as f64;
            }
        }
    }
    Ok(img)
}

/// Normalized 1D Gaussian truncated at radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Half-sample symmetric reflection of `i` into `0..n` (`… b a | a b …`).
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_smooth(image: &IntensityImage, sigma: f64) -> Result<IntensityImage> {
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as i64;
    let (w, h) = (image.width, image.height);
    let mut tmp = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            tmp[row * w + col] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * image.get(row, reflect(col as i64 + k as i64 - r, w)))
                .sum();
        }
    }
    let mut out = image.clone();
    for row in 0..h {
        for col in 0..w {
            out.pixels[row * w + col] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * tmp[reflect(row as i64 + k as i64 - r, h) * w + col])
                .sum();
        }
    }
    Ok(out)
}

/// Threshold, rasterize and smooth a set of ground points. The image
/// covers the extent of all `points`, not only the retained ones.
pub fn intensity_image(points: &[Point], params: &RasterParams) -> Result<(IntensityImage, Thresholded)> {
    params.validate()?;
    let bounds = Bounds::of(points).ok_or_else(|| Error::EmptyInput("no points to rasterize".into()))?;
    let kept = threshold_points(points, params.threshold_method)?;
    let selected: Vec<Point> = kept.retained.iter().map(|&i| points[i]).collect();
    let raw = rasterize_intensity_in(&selected, params, &bounds)?;
    Ok((gaussian_smooth(&raw, params.sigma)?, kept))
}
