use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use super::{
    decompose_homography, project, ransac_homography, rotation_error, translation_error, Correspondence, Intrinsics,
    Plane, Pose, RansacParams,
};
use crate::{Error, Result};

/// One matched feature: the world point behind the rendered pixel, where
/// it was rendered at the current estimate, and where the target camera
/// observed it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneMatch {
    pub world: Vector3<f64>,
    pub rendered: Vector2<f64>,
    pub observed: Vector2<f64>,
}

/// Supplies matches between a view rendered at an estimated pose and the
/// camera being localized.
pub trait CorrespondenceSource {
    /// Intrinsics shared by the rendered view and the target camera.
    fn intrinsics(&self) -> Intrinsics;

    /// World road plane `nᵀ·X = d`.
    fn world_plane(&self) -> (Vector3<f64>, f64);

    fn correspondences(&self, estimate: &Pose) -> Result<Vec<PlaneMatch>>;

    /// True pose, when known, for error reporting.
    fn ground_truth(&self) -> Option<Pose> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub intrinsics: Intrinsics,
    pub image_width: f64,
    pub image_height: f64,
    /// True camera centre (world, m).
    pub camera_center: [f64; 3],
    /// World point the true camera looks at.
    pub camera_target: [f64; 3],
    pub plane_normal: [f64; 3],
    pub plane_offset: f64,
    /// Side of the square plane patch, centred under the target, that
    /// road points are drawn from (m).
    pub extent: f64,
    pub n_plane_points: usize,
    /// Points above the plane that the plane homography does not explain.
    pub n_clutter: usize,
    pub clutter_height: (f64, f64),
    /// Gaussian noise on every observed pixel (px).
    pub pixel_sigma: f64,
    /// Fraction of matches whose observation is replaced by a random pixel.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            intrinsics: Intrinsics { fx: 800.0, fy: 800.0, cx: 640.0, cy: 360.0, skew: 0.0 },
            image_width: 1280.0,
            image_height: 720.0,
            camera_center: [0.0, -25.0, 15.0],
            camera_target: [0.0, 15.0, 0.0],
            plane_normal: [0.0, 0.0, 1.0],
            plane_offset: 0.0,
            extent: 120.0,
            n_plane_points: 200,
            n_clutter: 20,
            clutter_height: (0.5, 3.0),
            pixel_sigma: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validated()?;
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::param("image dimensions must be positive"));
        }
        if self.n_plane_points < 4 {
            return Err(Error::param(format!("need at least 4 plane points, got {}", self.n_plane_points)));
        }
        if !(self.pixel_sigma >= 0.0) {
            return Err(Error::param(format!("pixel_sigma must be non-negative, got {}", self.pixel_sigma)));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::param(format!("outlier_fraction must lie in [0, 1), got {}", self.outlier_fraction)));
        }
        if !(self.extent > 0.0) || !(self.clutter_height.0 <= self.clutter_height.1) {
            return Err(Error::param("extent must be positive and clutter_height ordered"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub world: [f64; 3],
    pub on_plane: bool,
    /// Pixel in the true camera, after noise or mismatch.
    pub observed: [f64; 2],
    pub mismatched: bool,
}

/// Road-plane points and clutter seen by a camera at a known pose, standing
/// in for a renderer plus feature matcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub config: SceneConfig,
    pub true_pose: Pose,
    pub points: Vec<ScenePoint>,
}

impl SyntheticScene {
    pub fn generate(config: &SceneConfig) -> Result<SyntheticScene> {
        config.validate()?;
        let k = config.intrinsics;
        let center = Vector3::from(config.camera_center);
        let target = Vector3::from(config.camera_target);
        let n = Vector3::from(config.plane_normal)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::param("plane normal has zero length"))?;
        let up = if n.dot(&(center - target)) >= 0.0 { n } else { -n };
        let true_pose = Pose::look_at(center, target, up)?;

        // Plane patch around the target's foot point.
        let foot = target - n * (n.dot(&target) - config.plane_offset);
        let seed_axis = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (seed_axis - n * n.dot(&seed_axis)).normalize();
        let e2 = n.cross(&e1);

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let visible = |x: &Vector3<f64>| -> Option<Vector2<f64>> {
            let p = project(x, &k, &true_pose).ok()?;
            (p.x >= 0.0 && p.y >= 0.0 && p.x < config.image_width && p.y < config.image_height).then_some(p)
        };
        let mut points = Vec::with_capacity(config.n_plane_points + config.n_clutter);
        let mut pixels = Vec::with_capacity(points.capacity());
        let wanted = config.n_plane_points + config.n_clutter;
        let mut attempts = 0usize;
        while points.len() < wanted {
            attempts += 1;
            if attempts > 1000 * wanted {
                return Err(Error::degenerate("camera sees too little of the plane patch"));
            }
            let half = 0.5 * config.extent;
            let on_plane = points.len() < config.n_plane_points;
            let mut x = foot + e1 * rng.gen_range(-half..half) + e2 * rng.gen_range(-half..half);
            if !on_plane {
                let (lo, hi) = config.clutter_height;
                x += up * if hi > lo { rng.gen_range(lo..hi) } else { lo };
            }
            if let Some(p) = visible(&x) {
                points.push(ScenePoint { world: x.into(), on_plane, observed: p.into(), mismatched: false });
                pixels.push(p);
            }
        }

        let noise = Normal::new(0.0, config.pixel_sigma).expect("validated sigma");
        for (pt, px) in points.iter_mut().zip(&pixels) {
            pt.observed = [px.x + noise.sample(&mut rng), px.y + noise.sample(&mut rng)];
        }
        let n_bad = (config.outlier_fraction * points.len() as f64).round() as usize;
        for i in rand::seq::index::sample(&mut rng, points.len(), n_bad) {
            points[i].observed = [rng.gen_range(0.0..config.image_width), rng.gen_range(0.0..config.image_height)];
            points[i].mismatched = true;
        }
        Ok(SyntheticScene { config: config.clone(), true_pose, points })
    }

    fn in_image(&self, p: &Vector2<f64>) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.config.image_width && p.y < self.config.image_height
    }

    /// The true pose rotated by `angle` (rad) about a random axis and moved
    /// `distance` (m) in a random direction, redrawn until at least 8 scene
    /// plane points fall inside its image.
    pub fn perturbed_pose(&self, angle: f64, distance: f64, rng: &mut impl Rng) -> Result<Pose> {
        for _ in 0..1000 {
            let axis = Vector3::from(UnitSphere.sample(rng));
            let dir = Vector3::from(UnitSphere.sample(rng));
            let rotation = Rotation3::from_scaled_axis(axis * angle) * self.true_pose.rotation;
            let center = self.true_pose.center() + dir * distance;
            let pose = Pose::new(rotation, -(rotation * center));
            let seen = self
                .points
                .iter()
                .filter(|p| p.on_plane)
                .filter(|p| project(&Vector3::from(p.world), &self.config.intrinsics, &pose).is_ok_and(|x| self.in_image(&x)))
                .count();
            if seen >= 8 {
                return Ok(pose);
            }
        }
        Err(Error::degenerate("no perturbed pose keeps the road in view"))
    }
}

impl CorrespondenceSource for SyntheticScene {
    fn intrinsics(&self) -> Intrinsics {
        self.config.intrinsics
    }

    fn world_plane(&self) -> (Vector3<f64>, f64) {
        (Vector3::from(self.config.plane_normal), self.config.plane_offset)
    }

    /// Every scene point that lands inside the image rendered at
    /// `estimate`, paired with its observation in the true camera.
    fn correspondences(&self, estimate: &Pose) -> Result<Vec<PlaneMatch>> {
        Ok(self
            .points
            .iter()
            .filter_map(|p| {
                let world = Vector3::from(p.world);
                let rendered = project(&world, &self.config.intrinsics, estimate).ok()?;
                self.in_image(&rendered).then_some(PlaneMatch { world, rendered, observed: Vector2::from(p.observed) })
            })
            .collect())
    }

    fn ground_truth(&self) -> Option<Pose> {
        Some(self.true_pose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussNewtonParams {
    pub enabled: bool,
    pub max_iters: usize,
    /// Stop once a step's parameter change falls below this (relative to
    /// `1 + ‖p‖`).
    pub step_tol: f64,
}

impl Default for GaussNewtonParams {
    fn default() -> Self {
        GaussNewtonParams { enabled: true, max_iters: 50, step_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineParams {
    pub max_iters: usize,
    /// Stop once `‖Δp‖ / max(‖p‖, stop_floor) < stop_rel_change`, `p` being
    /// the 6-vector of axis-angle and translation.
    pub stop_rel_change: f64,
    pub stop_floor: f64,
    pub ransac: RansacParams,
    pub gauss_newton: GaussNewtonParams,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            max_iters: 20,
            stop_rel_change: 0.05,
            stop_floor: 1e-8,
            ransac: RansacParams::default(),
            gauss_newton: GaussNewtonParams::default(),
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.stop_rel_change > 0.0) || !(self.stop_floor > 0.0) {
            return Err(Error::param("max_iters, stop_rel_change and stop_floor must be positive"));
        }
        if self.gauss_newton.max_iters == 0 || !(self.gauss_newton.step_tol > 0.0) {
            return Err(Error::param("Gauss-Newton max_iters and step_tol must be positive"));
        }
        self.ransac.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Pose after this iteration as `(axis·angle, t)`.
    pub pose: [f64; 6],
    pub matches: usize,
    pub inliers: usize,
    /// The corrected pose came from decomposing the fitted homography
    /// (otherwise from Gauss–Newton alone).
    pub via_homography: bool,
    /// Reprojection RMSE of the inliers at the updated pose (px).
    pub rmse_px: f64,
    pub rel_change: f64,
    pub rotation_error_deg: Option<f64>,
    pub translation_error_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub pose: Pose,
    pub trace: Vec<IterationRecord>,
    /// The stop rule fired before `max_iters`.
    pub converged: bool,
}

/// Consecutive RMSE increases that count as divergence.
const DIVERGENCE_RUN: usize = 3;

/// Iterative pose correction: render at the estimate, match, fit a plane
/// homography with RANSAC, decompose it into a corrected pose, optionally
/// polish by Gauss–Newton on the inliers, and repeat until the pose stops
/// changing.
pub fn refine_pose(source: &impl CorrespondenceSource, initial: &Pose, params: &RefineParams) -> Result<Refinement> {
    params.validate()?;
    let k = source.intrinsics();
    let (n_world, d_world) = source.world_plane();
    let truth = source.ground_truth();
    let mut estimate = *initial;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut rising = 0;

    for iteration in 1..=params.max_iters {
        let matches = source.correspondences(&estimate)?;
        if matches.len() < 4 {
            return Err(Error::InsufficientData { needed: 4, got: matches.len() });
        }
        let plane = Plane::world_in_camera(n_world, d_world, &estimate)?;
        let pairs: Vec<Correspondence> = matches.iter().map(|m| Correspondence::new(m.rendered, m.observed)).collect();
        let ransac = RansacParams { seed: params.ransac.seed ^ iteration as u64, ..params.ransac.clone() };
        let fit = ransac_homography(&pairs, &ransac)?;
        let decomposed = decompose_homography(&fit.homography, &k, &k, &estimate, &plane);
        let (mut corrected, via_homography) = match decomposed {
            Ok(pose) => (pose, true),
            // A noisy fit can fail the plane-consistency check; the inliers
            // still support direct re-estimation from the current pose.
            Err(Error::InconsistentHomography(msg)) if params.gauss_newton.enabled => {
                log::warn!("iteration {iteration}: {msg}; re-estimating from the current pose");
                (estimate, false)
            }
            Err(e) => return Err(e),
        };

        let (world, observed): (Vec<_>, Vec<_>) = matches
            .iter()
            .zip(&fit.inliers)
            .filter(|(_, &inlier)| inlier)
            .map(|(m, _)| (m.world, m.observed))
            .unzip();
        if params.gauss_newton.enabled {
            corrected = gauss_newton(&k, &world, &observed, &corrected, &params.gauss_newton);
        }
        let rmse = rmse(&k, &world, &observed, &corrected);

        let (p_old, p_new) = (estimate.params(), corrected.params());
        let delta = p_old.iter().zip(&p_new).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
        let scale = p_old.iter().map(|v| v * v).sum::<f64>().sqrt().max(params.stop_floor);
        let rel_change = delta / scale;

        let record = IterationRecord {
            iteration,
            pose: p_new,
            matches: matches.len(),
            inliers: fit.inlier_count(),
            via_homography,
            rmse_px: rmse,
            rel_change,
            rotation_error_deg: truth.map(|t| rotation_error(&corrected, &t).to_degrees()),
            translation_error_m: truth.map(|t| translation_error(&corrected, &t)),
        };
        log::debug!(
            "iteration {iteration}: {} inliers of {}, rmse {rmse:.4} px, change {rel_change:.3e}",
            record.inliers,
            record.matches
        );
        let increased = trace.last().is_some_and(|prev| rmse > prev.rmse_px * (1.0 + 1e-9) + 1e-12);
        rising = if increased { rising + 1 } else { 0 };
        trace.push(record);
        if rising >= DIVERGENCE_RUN {
            return Err(Error::Divergence { trace });
        }
        estimate = corrected;
        if rel_change < params.stop_rel_change {
            return Ok(Refinement { pose: estimate, trace, converged: true });
        }
    }
    Ok(Refinement { pose: estimate, trace, converged: false })
}

fn rmse(k: &Intrinsics, world: &[Vector3<f64>], observed: &[Vector2<f64>], pose: &Pose) -> f64 {
    match reprojection_residuals(&pose.params(), k, world, observed) {
        Ok(r) if !world.is_empty() => (r.norm_squared() / world.len() as f64).sqrt(),
        _ => f64::INFINITY,
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Left Jacobian of the SO(3) exponential: `exp(ω + δ) ≈ exp(J·δ)·exp(ω)`.
fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let s = skew(w);
    if theta < 1e-6 {
        Matrix3::identity() + s * 0.5 + s * s / 6.0
    } else {
        let t2 = theta * theta;
        Matrix3::identity() + s * ((1.0 - theta.cos()) / t2) + s * s * ((theta - theta.sin()) / (t2 * theta))
    }
}

/// Stacked `(u, v)` pixel residuals `project(X_i) − observed_i` for the pose
/// with parameters `(axis·angle, t)`.
pub fn reprojection_residuals(
    params: &[f64; 6],
    k: &Intrinsics,
    world: &[Vector3<f64>],
    observed: &[Vector2<f64>],
) -> Result<DVector<f64>> {
    let pose = Pose::from_params(params);
    let mut r = DVector::zeros(2 * world.len());
    for (i, (x, obs)) in world.iter().zip(observed).enumerate() {
        let p = project(x, k, &pose)?;
        r[2 * i] = p.x - obs.x;
        r[2 * i + 1] = p.y - obs.y;
    }
    Ok(r)
}

/// Analytic Jacobian of [`reprojection_residuals`] with respect to the six
/// pose parameters.
pub fn reprojection_jacobian(params: &[f64; 6], k: &Intrinsics, world: &[Vector3<f64>]) -> Result<DMatrix<f64>> {
    let w = Vector3::new(params[0], params[1], params[2]);
    let pose = Pose::from_params(params);
    let jl = left_jacobian(&w);
    let mut jac = DMatrix::zeros(2 * world.len(), 6);
    for (i, x) in world.iter().enumerate() {
        let rx = pose.rotation * x;
        let xc = rx + pose.translation;
        if xc.z <= 0.0 {
            return Err(Error::BehindCamera { z: xc.z });
        }
        let (zi, zi2) = (1.0 / xc.z, 1.0 / (xc.z * xc.z));
        let d_proj = Matrix2x3::new(
            k.fx * zi,
            k.skew * zi,
            -(k.fx * xc.x + k.skew * xc.y) * zi2,
            0.0,
            k.fy * zi,
            -k.fy * xc.y * zi2,
        );
        let d_rot = d_proj * (-skew(&rx) * jl);
        for c in 0..3 {
            jac[(2 * i, c)] = d_rot[(0, c)];
            jac[(2 * i + 1, c)] = d_rot[(1, c)];
            jac[(2 * i, 3 + c)] = d_proj[(0, c)];
            jac[(2 * i + 1, 3 + c)] = d_proj[(1, c)];
        }
    }
    Ok(jac)
}

fn cost(params: &[f64; 6], k: &Intrinsics, world: &[Vector3<f64>], observed: &[Vector2<f64>]) -> f64 {
    reprojection_residuals(params, k, world, observed).map_or(f64::INFINITY, |r| r.norm_squared())
}

/// Gauss–Newton on the squared reprojection error with step halving. The
/// rotation is rebuilt from its axis-angle after every step.
fn gauss_newton(
    k: &Intrinsics,
    world: &[Vector3<f64>],
    observed: &[Vector2<f64>],
    init: &Pose,
    gn: &GaussNewtonParams,
) -> Pose {
    if world.len() < 3 {
        return *init;
    }
    let mut p = init.params();
    let mut current = cost(&p, k, world, observed);
    for _ in 0..gn.max_iters {
        let (Ok(r), Ok(j)) = (reprojection_residuals(&p, k, world, observed), reprojection_jacobian(&p, k, world)) else {
            break;
        };
        let jt = j.transpose();
        let Some(chol) = (&jt * &j).cholesky() else { break };
        let step = chol.solve(&(-(&jt * r)));
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-6 {
            let mut trial = p;
            for (t, s) in trial.iter_mut().zip(step.iter()) {
                *t += alpha * s;
            }
            let trial = Pose::from_params(&trial).params();
            let c = cost(&trial, k, world, observed);
            if c <= current {
                accepted = Some((trial, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, c)) = accepted else { break };
        let moved = p.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size = 1.0 + next.iter().map(|v| v * v).sum::<f64>().sqrt();
        p = next;
        current = c;
        if moved < gn.step_tol * size {
            break;
        }
    }
    Pose::from_params(&p)
}
