use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};

/// Axis-aligned flat-roofed object standing on the terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxObject {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl BoxObject {
    fn covers(&self, x: f64, y: f64) -> bool {
        (self.x..=self.x + self.width).contains(&x) && (self.y..=self.y + self.depth).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSceneConfig {
    /// Side length of the square survey area (m).
    pub size: f64,
    /// Terrain and roof samples, excluding noise.
    pub n_points: usize,
    /// Terrain gradient along x, mirrored at the centre line (m/m).
    pub slope_x: f64,
    /// Terrain gradient along y (m/m).
    pub slope_y: f64,
    pub boxes: Vec<BoxObject>,
    /// Extra gross-error returns as a fraction of `n_points`.
    pub noise_fraction: f64,
    /// Vertical offset range of noise returns (m), either sign.
    pub noise_offset: (f64, f64),
    /// Standard deviation of elevation jitter on every surface sample (m).
    pub z_sigma: f64,
    pub intensity_ground: f64,
    pub intensity_roof: f64,
    pub seed: u64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        SyntheticSceneConfig {
            size: 200.0,
            n_points: 500_000,
            slope_x: 0.014,
            slope_y: 0.014,
            boxes: vec![
                BoxObject { x: 30.0, y: 30.0, width: 20.0, depth: 20.0, height: 5.0 },
                BoxObject { x: 120.0, y: 60.0, width: 30.0, depth: 15.0, height: 5.0 },
                BoxObject { x: 60.0, y: 140.0, width: 10.0, depth: 10.0, height: 5.0 },
            ],
            noise_fraction: 0.01,
            noise_offset: (5.0, 30.0),
            z_sigma: 0.0,
            intensity_ground: 40.0,
            intensity_roof: 90.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneLabel {
    Ground,
    Object,
    Noise,
}

/// Labelled point cloud of a sloped plane with raised boxes and gross
/// errors.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub config: SyntheticSceneConfig,
    pub cloud: PointCloud,
    pub labels: Vec<SceneLabel>,
}

impl SyntheticScene {
    pub fn generate(config: &SyntheticSceneConfig) -> SyntheticScene {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let jitter = Normal::new(0.0, config.z_sigma.max(0.0)).expect("finite sigma");
        let n_noise = (config.n_points as f64 * config.noise_fraction).round() as usize;
        let mut points = Vec::with_capacity(config.n_points + n_noise);
        let mut labels = Vec::with_capacity(config.n_points + n_noise);

        for _ in 0..config.n_points {
            let x = rng.gen_range(0.0..config.size);
            let y = rng.gen_range(0.0..config.size);
            let ground = config.terrain_z(x, y);
            let (z, label, intensity) = match config.boxes.iter().find(|b| b.covers(x, y)) {
                Some(b) => (ground + b.height, SceneLabel::Object, config.intensity_roof),
                None => (ground, SceneLabel::Ground, config.intensity_ground),
            };
            points.push(Point::new(x, y, z + jitter.sample(&mut rng), intensity));
            labels.push(label);
        }
        for _ in 0..n_noise {
            let x = rng.gen_range(0.0..config.size);
            let y = rng.gen_range(0.0..config.size);
            let (lo, hi) = config.noise_offset;
            let offset = rng.gen_range(lo..hi) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            points.push(Point::new(x, y, config.terrain_z(x, y) + offset, config.intensity_ground));
            labels.push(SceneLabel::Noise);
        }

        SyntheticScene {
            config: config.clone(),
            cloud: PointCloud::new(points, format!("synthetic-{}", config.seed)),
            labels,
        }
    }
}

impl SyntheticSceneConfig {
    /// Bare-earth elevation: a valley along `x = size / 2` tilted along y.
    pub fn terrain_z(&self, x: f64, y: f64) -> f64 {
        let mid = 0.5 * self.size;
        self.slope_x * (x - mid).abs() + self.slope_y * (y - mid)
    }
}

/// Type I (ground rejected) and Type II (non-ground accepted) error rates.
/// Noise returns count as non-ground.
pub fn error_rates(labels: &[SceneLabel], is_ground: &[bool]) -> (f64, f64) {
    assert_eq!(labels.len(), is_ground.len());
    let (mut ground, mut rejected, mut other, mut accepted) = (0usize, 0usize, 0usize, 0usize);
    for (label, &g) in labels.iter().zip(is_ground) {
        if *label == SceneLabel::Ground {
            ground += 1;
            rejected += usize::from(!g);
        } else {
            other += 1;
            accepted += usize::from(g);
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    (rate(rejected, ground), rate(accepted, other))
}
