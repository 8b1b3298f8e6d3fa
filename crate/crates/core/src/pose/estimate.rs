use nalgebra::{DMatrix, Matrix3, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Homography;
use crate::{Error, Result};

/// A pixel in view 1 and its match in view 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub x1: Vector2<f64>,
    pub x2: Vector2<f64>,
}

impl Correspondence {
    pub fn new(x1: Vector2<f64>, x2: Vector2<f64>) -> Self {
        Correspondence { x1, x2 }
    }
}

/// Ratio of the second-smallest to the largest singular value of the DLT
/// system at or below which the solution is not unique.
const DEGENERACY_RATIO: f64 = 1e-9;

/// Similarity moving the centroid to the origin and the mean distance to
/// √2.
fn hartley_transform(points: impl Iterator<Item = Vector2<f64>> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let centroid = points.clone().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let mean_dist = points.map(|p| (p - centroid).norm()).sum::<f64>() / n;
    if !(mean_dist > 0.0) {
        return Err(Error::degenerate("all points coincide"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * centroid.x, 0.0, s, -s * centroid.y, 0.0, 0.0, 1.0))
}

fn apply(m: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    let h = m * p.push(1.0);
    Vector2::new(h.x / h.z, h.y / h.z)
}

/// Normalized direct linear transform: least-squares algebraic fit of
/// `x2 ∝ H·x1` after Hartley conditioning of both point sets.
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: pairs.len() });
    }
    let t1 = hartley_transform(pairs.iter().map(|c| c.x1))?;
    let t2 = hartley_transform(pairs.iter().map(|c| c.x2))?;

    // At least nine rows so the SVD exposes the full right null space.
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let p = apply(&t1, &c.x1);
        let q = apply(&t2, &c.x2);
        let (x, y, u, v) = (p.x, p.y, q.x, q.y);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let largest = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[order[1]] <= DEGENERACY_RATIO * largest {
        return Err(Error::degenerate("correspondences do not determine a unique homography (collinear points?)"));
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t2_inv = t2.try_inverse().expect("similarity is invertible");
    Homography::from_matrix(t2_inv * hn * t1)
}

/// RMS of the forward (`x2` vs `H·x1`) and backward (`x1` vs `H⁻¹·x2`)
/// transfer distances, in pixels.
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, c: &Correspondence) -> f64 {
    let fwd = (h.apply(&c.x1) - c.x2).norm_squared();
    let bwd = (h_inv.apply(&c.x2) - c.x1).norm_squared();
    let e = (0.5 * (fwd + bwd)).sqrt();
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Inlier bound on the symmetric transfer error (px).
    pub threshold: f64,
    pub confidence: f64,
    pub max_trials: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams { threshold: 2.0, confidence: 0.999, max_trials: 2000, seed: 0 }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::param(format!("RANSAC threshold must be positive, got {}", self.threshold)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::param(format!("RANSAC confidence must lie in (0, 1), got {}", self.confidence)));
        }
        if self.max_trials == 0 {
            return Err(Error::param("RANSAC max_trials must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub trials: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Inlier flags and the summed error over inliers.
fn score(h: &Homography, pairs: &[Correspondence], threshold: f64) -> Option<(Vec<bool>, f64)> {
    let h_inv = h.inverse().ok()?;
    let mut total = 0.0;
    let flags = pairs
        .iter()
        .map(|c| {
            let e = symmetric_transfer_error(h, &h_inv, c);
            let inlier = e <= threshold;
            if inlier {
                total += e;
            }
            inlier
        })
        .collect();
    Some((flags, total))
}

fn count(flags: &[bool]) -> usize {
    flags.iter().filter(|&&b| b).count()
}

/// Four-point RANSAC with an adaptive trial count, then least-squares refits
/// on the inlier set until it stops changing.
pub fn ransac_homography(pairs: &[Correspondence], params: &RansacParams) -> Result<RansacResult> {
    params.validate()?;
    if pairs.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: pairs.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, Vec<bool>, f64)> = None;
    let mut needed = params.max_trials;
    let mut trials = 0;
    while trials < needed.min(params.max_trials) {
        trials += 1;
        let sample: Vec<Correspondence> = rand::seq::index::sample(&mut rng, pairs.len(), 4)
            .into_iter()
            .map(|i| pairs[i])
            .collect();
        let Ok(h) = estimate_homography(&sample) else { continue };
        let Some((flags, err)) = score(&h, pairs, params.threshold) else { continue };
        let n_in = count(&flags);
        let better = match &best {
            None => true,
            Some((_, bf, be)) => n_in > count(bf) || (n_in == count(bf) && err < *be),
        };
        if better {
            let w = n_in as f64 / pairs.len() as f64;
            let miss = 1.0 - w.powi(4);
            needed = if miss <= 0.0 {
                trials
            } else {
                ((1.0 - params.confidence).ln() / miss.ln()).ceil().max(1.0) as usize
            };
            best = Some((h, flags, err));
        }
    }

    let (mut h, mut flags, _) = best.ok_or_else(|| Error::RobustFailure("no non-degenerate minimal sample".into()))?;
    if count(&flags) < 4 {
        return Err(Error::RobustFailure(format!("best model has only {} inliers", count(&flags))));
    }
    for _ in 0..10 {
        let inliers: Vec<Correspondence> = pairs.iter().zip(&flags).filter(|(_, &f)| f).map(|(c, _)| *c).collect();
        let Ok(refit) = estimate_homography(&inliers) else { break };
        let Some((new_flags, _)) = score(&refit, pairs, params.threshold) else { break };
        if count(&new_flags) < 4 {
            break;
        }
        h = refit;
        if new_flags == flags {
            break;
        }
        flags = new_flags;
    }
    log::debug!("ransac: {} of {} inliers after {trials} trials", count(&flags), pairs.len());
    Ok(RansacResult { homography: h, inliers: flags, trials })
}
