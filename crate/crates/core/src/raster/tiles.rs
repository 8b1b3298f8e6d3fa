use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GrayImage, IntensityImage, PgmFormat, RasterParams};
use crate::{Error, Result};

/// Fraction of interior pixels of `region` whose Sobel gradient magnitude
/// reaches `mag_thresh`. Values are taken as-is; callers scale to 0–255
/// first.
pub fn edge_density(region: &IntensityImage, mag_thresh: f64) -> Result<f64> {
    let (w, h) = (region.width, region.height);
    if w < 3 || h < 3 {
        return Err(Error::param(format!("edge density needs at least 3x3 pixels, got {w}x{h}")));
    }
    let g = |r: usize, c: usize| region.get(r, c);
    let mut edges = 0usize;
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let gx = (g(r - 1, c + 1) + 2.0 * g(r, c + 1) + g(r + 1, c + 1))
                - (g(r - 1, c - 1) + 2.0 * g(r, c - 1) + g(r + 1, c - 1));
            let gy = (g(r + 1, c - 1) + 2.0 * g(r + 1, c) + g(r + 1, c + 1))
                - (g(r - 1, c - 1) + 2.0 * g(r - 1, c) + g(r - 1, c + 1));
            if (gx * gx + gy * gy).sqrt() >= mag_thresh {
                edges += 1;
            }
        }
    }
    Ok(edges as f64 / ((w - 2) * (h - 2)) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileInfo {
    pub row: usize,
    pub col: usize,
    /// World coordinates of the tile's south-west corner.
    pub x0: f64,
    pub y0: f64,
    pub edge_density: f64,
}

impl TileInfo {
    pub fn file_name(&self) -> String {
        format!("tile_{}_{}.pgm", self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub info: TileInfo,
    /// `window × window` pixels; the part beyond the source image is 0.
    pub image: IntensityImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileSet {
    pub window: usize,
    pub stride: usize,
    pub tile_rows: usize,
    pub tile_cols: usize,
    /// Value range of the source image, shared by every tile's 8-bit
    /// rendering.
    pub value_range: (f64, f64),
    pub kept: Vec<Tile>,
    pub dropped: Vec<TileInfo>,
}

impl TileSet {
    pub fn total(&self) -> usize {
        self.kept.len() + self.dropped.len()
    }
}

fn window_count(len: usize, window: usize, stride: usize) -> usize {
    if len <= window {
        1
    } else {
        (len - window).div_ceil(stride) + 1
    }
}

/// Cuts `image` into `window × window` tiles at multiples of `stride` and
/// keeps those whose edge density reaches `min_edge_density`.
///
/// Edges are measured on the source image scaled to 0–255 and clipped to
/// the tile, so the zero padding of border tiles never reads as an edge.
pub fn split_tiles(image: &IntensityImage, params: &RasterParams) -> Result<TileSet> {
    params.validate()?;
    if image.width == 0 || image.height == 0 {
        return Err(Error::EmptyInput("image has no pixels".into()));
    }
    let (win, stride) = (params.window, params.stride);
    let scaled = image.scaled_to_u8_range();
    let tile_rows = window_count(image.height, win, stride);
    let tile_cols = window_count(image.width, win, stride);

    let tiles: Vec<(Tile, bool)> = (0..tile_rows * tile_cols)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / tile_cols, k % tile_cols);
            let (r0, c0) = (i * stride, j * stride);
            let (r1, c1) = ((r0 + win).min(image.height), (c0 + win).min(image.width));
            let x0 = image.x0 + c0 as f64 * image.resolution;
            let y0 = image.y0 + r0 as f64 * image.resolution;
            let mut tile = IntensityImage::new(x0, y0, image.resolution, win, win);
            let mut clipped = IntensityImage::new(x0, y0, image.resolution, c1 - c0, r1 - r0);
            for r in r0..r1 {
                for c in c0..c1 {
                    tile.set(r - r0, c - c0, image.get(r, c));
                    clipped.set(r - r0, c - c0, scaled.get(r, c));
                }
            }
            let density = edge_density(&clipped, params.edge_mag_thresh).unwrap_or(0.0);
            let info = TileInfo { row: i, col: j, x0, y0, edge_density: density };
            (Tile { info, image: tile }, density >= params.min_edge_density)
        })
        .collect();

    let mut set = TileSet {
        window: win,
        stride,
        tile_rows,
        tile_cols,
        value_range: image.range(),
        kept: Vec::new(),
        dropped: Vec::new(),
    };
    for (tile, keep) in tiles {
        if keep {
            set.kept.push(tile);
        } else {
            set.dropped.push(tile.info);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptTile {
    pub file: String,
    #[serde(flatten)]
    pub info: TileInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileManifest {
    pub window: usize,
    pub stride: usize,
    pub resolution: f64,
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub kept: Vec<KeptTile>,
    pub dropped: Vec<TileInfo>,
}

/// Writes each kept tile as `tile_{row}_{col}.pgm` (P5) plus
/// `manifest.json` into `dir`.
pub fn write_tiles(set: &TileSet, dir: impl AsRef<Path>) -> Result<TileManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (lo, hi) = set.value_range;
    let mut kept = Vec::with_capacity(set.kept.len());
    for tile in &set.kept {
        let file = tile.info.file_name();
        let gray = GrayImage::from_intensity(&tile.image, lo, hi);
        super::write_pgm(dir.join(&file), &gray, PgmFormat::Binary)?;
        kept.push(KeptTile { file, info: tile.info.clone() });
    }
    let manifest = TileManifest {
        window: set.window,
        stride: set.stride,
        resolution: set.kept.first().map_or(0.0, |t| t.image.resolution),
        tile_rows: set.tile_rows,
        tile_cols: set.tile_cols,
        kept,
        dropped: set.dropped.clone(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
