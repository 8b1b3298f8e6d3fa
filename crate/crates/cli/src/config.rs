use std::path::Path;

use serde::{Deserialize, Serialize};

use roadforge::glyph::DegradeConfig;
use roadforge::groundfilter::FilterParams;
use roadforge::pose::{RefineParams, SceneConfig};
use roadforge::raster::RasterParams;

use crate::Failure;

/// Stream identifiers mixed into the root seed, one per consumer.
pub const STREAM_GLYPH: u64 = 0;
pub const STREAM_SCENE: u64 = 1;
pub const STREAM_RANSAC: u64 = 2;
pub const STREAM_OFFSET: u64 = 3;

/// Seed handed to consumer `stream` for root seed `root`.
///
/// Stream 0 gets the root itself, so a glyph batch run with `--seed 5`
/// matches the library's own seeding with `rng_seed = 5`.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    root ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierParams {
    /// Neighbourhood radius (m).
    pub radius: f64,
    /// Points with fewer neighbours than this are outliers.
    pub k_min: usize,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams { radius: 1.0, k_min: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemParams {
    /// Grid cell size (m).
    pub cell: f64,
}

impl Default for DemParams {
    fn default() -> Self {
        DemParams { cell: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSimParams {
    /// Rotation offset of the initial pose (degrees).
    pub angle_deg: f64,
    /// Position offset of the initial pose (m).
    pub distance_m: f64,
    /// Seed of the random offset direction.
    pub offset_seed: u64,
}

impl Default for PoseSimParams {
    fn default() -> Self {
        PoseSimParams { angle_deg: 10.0, distance_m: 5.0, offset_seed: derive_seed(0, STREAM_OFFSET) }
    }
}

/// Every tunable of every subcommand. Missing keys take their defaults,
/// unknown keys are an error.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root seed; when set it overrides every per-consumer seed.
    pub seed: Option<u64>,
    pub outliers: OutlierParams,
    pub filter: FilterParams,
    pub dem: DemParams,
    pub raster: RasterParams,
    pub glyph: DegradeConfig,
    pub refine: RefineParams,
    pub scene: SceneConfig,
    pub pose_sim: PoseSimParams,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }

    /// Pushes the root seed, if any, into every consumer.
    pub fn apply_seed(&mut self) {
        if let Some(root) = self.seed {
            self.glyph.rng_seed = derive_seed(root, STREAM_GLYPH);
            self.scene.seed = derive_seed(root, STREAM_SCENE);
            self.refine.ransac.seed = derive_seed(root, STREAM_RANSAC);
            self.pose_sim.offset_seed = derive_seed(root, STREAM_OFFSET);
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let block = |name: &str, r: roadforge::Result<()>| r.map_err(|e| Failure::config(format!("{name}: {e}")));
        if !(self.outliers.radius > 0.0 && self.outliers.radius.is_finite()) {
            return Err(Failure::config(format!("outliers.radius must be positive, got {}", self.outliers.radius)));
        }
        if self.outliers.k_min == 0 {
            return Err(Failure::config("outliers.k_min must be at least 1"));
        }
        block("filter", self.filter.validate())?;
        if !(self.dem.cell > 0.0 && self.dem.cell.is_finite()) {
            return Err(Failure::config(format!("dem.cell must be positive, got {}", self.dem.cell)));
        }
        block("raster", self.raster.validate())?;
        block("glyph", self.glyph.validate())?;
        block("refine", self.refine.validate())?;
        block("scene", self.scene.validate())?;
        if !(self.pose_sim.angle_deg >= 0.0 && self.pose_sim.distance_m >= 0.0) {
            return Err(Failure::config("pose_sim.angle_deg and pose_sim.distance_m must be non-negative"));
        }
        Ok(())
    }
}
