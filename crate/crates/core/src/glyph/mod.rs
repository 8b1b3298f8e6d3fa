//! Degraded-character generator: contour distortion, median smoothing,
//! salt-and-pepper noise and downsampling of binary glyph bitmaps.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::{read_pgm, write_pgm, GrayImage, PgmFormat};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    /// Row-major, `true` = foreground (ink).
    bits: Vec<bool>,
}

impl BinaryImage {
    /// All-background image.
    pub fn new(width: usize, height: usize) -> Result<BinaryImage> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!("glyph dimensions must be positive, got {width}x{height}")));
        }
        Ok(BinaryImage { width, height, bits: vec![false; width * height] })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<BinaryImage> {
        let mut img = BinaryImage::new(width, height)?;
        for r in 0..height {
            for c in 0..width {
                img.bits[r * width + c] = f(r, c);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    /// Pixel value with everything outside the image reading as background.
    #[inline]
    fn at(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    pub fn count_foreground(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> BinaryImage {
        BinaryImage { bits: self.bits.iter().map(|b| !b).collect(), ..self.clone() }
    }

    /// Number of pixels that differ from `other` (same dimensions).
    pub fn hamming(&self, other: &BinaryImage) -> usize {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// 8-bit rendering: background 0, foreground 255.
    pub fn to_gray(&self) -> GrayImage {
        let mut g = GrayImage::new(self.width, self.height);
        for (dst, &b) in g.pixels.iter_mut().zip(&self.bits) {
            *dst = if b { 255 } else { 0 };
        }
        g
    }

    /// Pixels above half of `maxval` are foreground.
    pub fn from_gray(gray: &GrayImage) -> Result<BinaryImage> {
        let half = gray.maxval as u16;
        BinaryImage::from_fn(gray.width, gray.height, |r, c| 2 * gray.get(r, c) as u16 > half)
    }
}

pub fn read_glyph(path: impl AsRef<Path>) -> Result<BinaryImage> {
    BinaryImage::from_gray(&read_pgm(path)?)
}

/// Writes `img` as binary PGM (P5, 0 = background, 255 = foreground).
pub fn write_glyph(path: impl AsRef<Path>, img: &BinaryImage) -> Result<()> {
    write_pgm(path, &img.to_gray(), PgmFormat::Binary)
}

fn contour_pixels(img: &BinaryImage) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..img.height {
        for c in 0..img.width {
            if !img.get(r, c) {
                continue;
            }
            let (ri, ci) = (r as isize, c as isize);
            if !img.at(ri - 1, ci) || !img.at(ri + 1, ci) || !img.at(ri, ci - 1) || !img.at(ri, ci + 1) {
                out.push((r, c));
            }
        }
    }
    out
}

/// Foreground pixels with at least one background 4-neighbour, in
/// row-major order. The image border counts as background.
pub fn extract_contour(img: &BinaryImage) -> Result<Vec<(usize, usize)>> {
    if img.count_foreground() == 0 {
        return Err(Error::EmptyInput("glyph has no foreground pixels".into()));
    }
    Ok(contour_pixels(img))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortMode {
    /// Erosion only: a selected contour pixel turns background.
    #[default]
    Basic,
    /// A selected contour pixel either erodes or grows a protrusion into
    /// one of its background 4-neighbours, 50/50.
    Optimized,
}

/// Roughens the glyph outline. Every contour pixel of the input is
/// selected independently with probability `p`; see [`DistortMode`].
///
/// In optimized mode, a selected pixel whose only background neighbours
/// lie outside the image erodes instead.
pub fn distort_contour(img: &BinaryImage, p: f64, mode: DistortMode, rng: &mut impl Rng) -> Result<BinaryImage> {
    check_probability("p_distort", p)?;
    let mut out = img.clone();
    for (r, c) in contour_pixels(img) {
        if !rng.gen_bool(p) {
            continue;
        }
        match mode {
            DistortMode::Basic => out.set(r, c, false),
            DistortMode::Optimized => {
                if rng.gen_bool(0.5) {
                    out.set(r, c, false);
                    continue;
                }
                let (ri, ci) = (r as isize, c as isize);
                let free: Vec<(usize, usize)> = [(ri - 1, ci), (ri + 1, ci), (ri, ci - 1), (ri, ci + 1)]
                    .into_iter()
                    .filter(|&(nr, nc)| {
                        nr >= 0 && nc >= 0 && (nr as usize) < img.height && (nc as usize) < img.width
                    })
                    .map(|(nr, nc)| (nr as usize, nc as usize))
                    .filter(|&(nr, nc)| !img.get(nr, nc))
                    .collect();
                if free.is_empty() {
                    out.set(r, c, false);
                } else {
                    let (nr, nc) = free[rng.gen_range(0..free.len())];
                    out.set(nr, nc, true);
                }
            }
        }
    }
    Ok(out)
}

/// `passes` rounds of 3×3 majority voting (at least 5 of 9 foreground),
/// with background outside the image.
pub fn median_filter(img: &BinaryImage, passes: usize) -> BinaryImage {
    let mut cur = img.clone();
    for _ in 0..passes {
        let prev = cur.clone();
        for r in 0..prev.height {
            for c in 0..prev.width {
                let (ri, ci) = (r as isize, c as isize);
                let mut votes = 0;
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        votes += usize::from(prev.at(ri + dr, ci + dc));
                    }
                }
                cur.set(r, c, votes >= 5);
            }
        }
    }
    cur
}

/// Flips every pixel independently with probability `density`.
pub fn add_salt_pepper(img: &BinaryImage, density: f64, rng: &mut impl Rng) -> Result<BinaryImage> {
    check_probability("noise_density", density)?;
    let mut out = img.clone();
    for b in &mut out.bits {
        if rng.gen_bool(density) {
            *b = !*b;
        }
    }
    Ok(out)
}

/// Output size for scaling the longest side to `target`.
pub fn downsampled_size(width: usize, height: usize, target: usize) -> (usize, usize) {
    let longest = width.max(height);
    let scale = |n: usize| ((n * target) as f64 / longest as f64).round().max(1.0) as usize;
    if width >= height {
        (target, scale(height))
    } else {
        (scale(width), target)
    }
}

/// Area-averaging downsample with the longest side scaled to `target`.
/// An output pixel is foreground when at least half of its footprint is.
pub fn downsample(img: &BinaryImage, target: usize) -> Result<BinaryImage> {
    if target == 0 || target > img.width.max(img.height) {
        return Err(Error::param(format!(
            "target size {target} must lie in 1..={} for a {}x{} glyph",
            img.width.max(img.height),
            img.width,
            img.height
        )));
    }
    let (ow, oh) = downsampled_size(img.width, img.height, target);
    let sx = img.width as f64 / ow as f64;
    let sy = img.height as f64 / oh as f64;
    let overlap = |lo: f64, hi: f64, i: usize| (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
    BinaryImage::from_fn(ow, oh, |r, c| {
        let (y0, y1) = (r as f64 * sy, (r + 1) as f64 * sy);
        let (x0, x1) = (c as f64 * sx, (c + 1) as f64 * sx);
        let mut covered = 0.0;
        for yr in (y0.floor() as usize)..(y1.ceil() as usize).min(img.height) {
            let wy = overlap(y0, y1, yr);
            for xc in (x0.floor() as usize)..(x1.ceil() as usize).min(img.width) {
                if img.get(yr, xc) {
                    covered += wy * overlap(x0, x1, xc);
                }
            }
        }
        // The relative slack keeps exact half coverage on the foreground
        // side despite rounding in the footprint bounds.
        covered >= 0.5 * sx * sy * (1.0 - 1e-12)
    })
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in [0, 1], got {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeConfig {
    /// Per-contour-pixel distortion probability; 0 skips the step.
    pub p_distort: f64,
    pub distort_mode: DistortMode,
    /// 0, 1 or 2.
    pub median_passes: usize,
    /// Per-pixel flip probability; 0 skips the step.
    pub noise_density: f64,
    pub target_size: usize,
    pub rng_seed: u64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        DegradeConfig {
            p_distort: 0.3,
            distort_mode: DistortMode::Basic,
            median_passes: 1,
            noise_density: 0.02,
            target_size: 32,
            rng_seed: 0,
        }
    }
}

impl DegradeConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("p_distort", self.p_distort)?;
        check_probability("noise_density", self.noise_density)?;
        if self.median_passes > 2 {
            return Err(Error::param(format!("median_passes must be 0, 1 or 2, got {}", self.median_passes)));
        }
        if self.target_size < 8 {
            return Err(Error::param(format!("target_size must be at least 8, got {}", self.target_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Downsampling only.
    Plain,
    /// Basic distortion, nothing else.
    Distort,
    /// Basic distortion, one median pass, noise.
    Standard,
    /// Optimized distortion, one median pass, noise.
    Optimized1,
    /// Optimized distortion, two median passes, noise.
    Optimized2,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Plain, Preset::Distort, Preset::Standard, Preset::Optimized1, Preset::Optimized2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Plain => "plain",
            Preset::Distort => "distort",
            Preset::Standard => "standard",
            Preset::Optimized1 => "optimized1",
            Preset::Optimized2 => "optimized2",
        }
    }

    /// `base` with the step switches of this preset applied. Probabilities,
    /// target size and seed come from `base`.
    pub fn apply(self, base: &DegradeConfig) -> DegradeConfig {
        let (mode, distort, passes, noise) = match self {
            Preset::Plain => (DistortMode::Basic, false, 0, false),
            Preset::Distort => (DistortMode::Basic, true, 0, false),
            Preset::Standard => (DistortMode::Basic, true, 1, true),
            Preset::Optimized1 => (DistortMode::Optimized, true, 1, true),
            Preset::Optimized2 => (DistortMode::Optimized, true, 2, true),
        };
        DegradeConfig {
            p_distort: if distort { base.p_distort } else { 0.0 },
            distort_mode: mode,
            median_passes: passes,
            noise_density: if noise { base.noise_density } else { 0.0 },
            ..base.clone()
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param(format!("unknown preset {s:?}")))
    }
}

/// Distort, median-filter, add noise, downsample; in that order, from one
/// generator seeded with `config.rng_seed`.
pub fn degrade(img: &BinaryImage, config: &DegradeConfig) -> Result<BinaryImage> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut cur = img.clone();
    if config.p_distort > 0.0 {
        cur = distort_contour(&cur, config.p_distort, config.distort_mode, &mut rng)?;
    }
    cur = median_filter(&cur, config.median_passes);
    if config.noise_density > 0.0 {
        cur = add_salt_pepper(&cur, config.noise_density, &mut rng)?;
    }
    downsample(&cur, config.target_size)
}

/// Seed for glyph `index` of a batch.
pub fn glyph_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Degrades every glyph with `config`, glyph `i` seeded by
/// [`glyph_seed`]`(config.rng_seed, i)`. Results are in input order.
pub fn degrade_batch(glyphs: &[BinaryImage], config: &DegradeConfig) -> Result<Vec<BinaryImage>> {
    config.validate()?;
    glyphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| degrade(g, &DegradeConfig { rng_seed: glyph_seed(config.rng_seed, i), ..config.clone() }))
        .collect()
}

/// Outline roughness `perimeter² / area`, with the perimeter counted as
/// foreground/background 4-adjacent pixel edges (image border included).
pub fn roughness(img: &BinaryImage) -> Result<f64> {
    let area = img.count_foreground();
    if area == 0 {
        return Err(Error::EmptyInput("glyph has no foreground pixels".into()));
    }
    let mut perimeter = 0usize;
    for r in 0..img.height {
        for c in 0..img.width {
            if img.get(r, c) {
                let (ri, ci) = (r as isize, c as isize);
                perimeter += [(ri - 1, ci), (ri + 1, ci), (ri, ci - 1), (ri, ci + 1)]
                    .into_iter()
                    .filter(|&(nr, nc)| !img.at(nr, nc))
                    .count();
            }
        }
    }
    Ok((perimeter * perimeter) as f64 / area as f64)
}
