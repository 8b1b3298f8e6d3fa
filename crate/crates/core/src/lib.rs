//! Point-cloud-to-road-model toolkit.
//!
//! The pipeline stages, in the order a survey normally flows through them:
//!
//! 1. [`cloud`] – ASCII XYZI I/O, k-d tree radius queries, radius outlier removal.
//! 2. [`groundfilter`] – progressive TIN densification over a halving grid
//!    pyramid, with virtual corner seeds and the non-obtuse / normal
//!    constraints on accepted insertions.
//! 3. [`tin`] – the 2.5D Delaunay kernel the filter densifies, plus DEM
//!    rasterization to an Esri ASCII grid.
//! 4. [`raster`] – ground-point intensity images, histogram thresholding,
//!    Gaussian smoothing and Sobel-pruned tiling for road-marking recognition.
//! 5. [`glyph`] – degraded-character generator for recognizer training sets.
//! 6. [`pose`] – plane-induced homographies and the iterative camera-pose
//!    refinement loop.

pub mod cloud;
mod error;
pub mod glyph;
pub mod groundfilter;
pub mod pose;
pub mod raster;
pub mod tin;

pub use error::{Error, Result};
