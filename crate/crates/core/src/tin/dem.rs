use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::{barycentric_z, Location, Tin};
use crate::{Error, Result};

/// Cell value for centers outside the triangulated hull.
pub const NODATA: f64 = -9999.0;

/// Regular elevation grid. Row 0 is the southern (minimum y) row;
/// [`RasterGrid::to_esri_ascii`] writes rows north first.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub x0: f64,
    pub y0: f64,
    pub cell: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub cells: Vec<f64>,
}

impl RasterGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.n_cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x0 + (col as f64 + 0.5) * self.cell,
            self.y0 + (row as f64 + 0.5) * self.cell,
        )
    }

    pub fn valid_cells(&self) -> usize {
        self.cells.iter().filter(|&&z| z != NODATA).count()
    }

    pub fn to_esri_ascii(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.n_cols);
        let _ = writeln!(out, "nrows {}", self.n_rows);
        let _ = writeln!(out, "xllcorner {}", self.x0);
        let _ = writeln!(out, "yllcorner {}", self.y0);
        let _ = writeln!(out, "cellsize {}", self.cell);
        let _ = writeln!(out, "NODATA_value {}", NODATA);
        for row in (0..self.n_rows).rev() {
            let line: Vec<String> = (0..self.n_cols)
                .map(|col| {
                    let z = self.get(row, col);
                    if z == NODATA {
                        format!("{NODATA}")
                    } else {
                        format!("{z:.6}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn write_esri_ascii(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_esri_ascii()).map_err(|e| Error::io(path, e))
    }
}

/// Samples the TIN surface at every cell center of a grid anchored at the
/// vertices' XY minimum. Centers outside the hull get [`NODATA`].
pub fn rasterize_dem(tin: &Tin, cell: f64) -> Result<RasterGrid> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(Error::param(format!("DEM cell size must be positive, got {cell}")));
    }
    let verts = tin.vertices();
    if verts.is_empty() || tin.num_triangles() == 0 {
        return Err(Error::EmptyInput("TIN has no triangles".into()));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for v in verts {
        x0 = x0.min(v.x);
        y0 = y0.min(v.y);
        x1 = x1.max(v.x);
        y1 = y1.max(v.y);
    }
    let n_cols = (((x1 - x0) / cell).ceil() as usize).max(1);
    let n_rows = (((y1 - y0) / cell).ceil() as usize).max(1);

    let rows: Vec<Vec<f64>> = (0..n_rows)
        .into_par_iter()
        .map(|row| {
            let mut hint = 0;
            (0..n_cols)
                .map(|col| {
                    let x = x0 + (col as f64 + 0.5) * cell;
                    let y = y0 + (row as f64 + 0.5) * cell;
                    let t = match tin.walk(x, y, hint) {
                        Location::Inside(t) | Location::OnEdge { triangle: t, .. } => t,
                        Location::OnVertex(v) => return tin.vertex(v).z,
                        Location::Outside => return NODATA,
                    };
                    hint = t;
                    let [a, b, c] = tin.triangle_corners(t);
                    barycentric_z(&a, &b, &c, x, y)
                })
                .collect()
        })
        .collect();

    Ok(RasterGrid {
        x0,
        y0,
        cell,
        n_rows,
        n_cols,
        cells: rows.concat(),
    })
}
