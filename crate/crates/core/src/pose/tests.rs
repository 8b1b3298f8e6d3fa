use nalgebra::{Matrix3, Vector2, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use super::*;

fn unit_k() -> Intrinsics {
    Intrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap()
}

struct Config {
    k1: Intrinsics,
    k2: Intrinsics,
    pose1: Pose,
    pose2: Pose,
    /// Plane in camera-1 coordinates.
    plane: Plane,
    /// World points on the plane in front of both cameras.
    points: Vec<Vector3<f64>>,
}

fn random_k(rng: &mut impl Rng) -> Intrinsics {
    Intrinsics {
        fx: rng.gen_range(300.0..1500.0),
        fy: rng.gen_range(300.0..1500.0),
        cx: rng.gen_range(200.0..800.0),
        cy: rng.gen_range(150.0..600.0),
        skew: rng.gen_range(-2.0..2.0),
    }
}

/// Two cameras above the world plane z = 0, looking at nearby targets.
fn random_config(rng: &mut impl Rng) -> Config {
    let camera = |rng: &mut dyn rand::RngCore| {
        let center = Vector3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(4.0..30.0));
        let target = Vector3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), 0.0);
        Pose::look_at(center, target, Vector3::z()).unwrap()
    };
    let pose1 = camera(rng);
    let pose2 = camera(rng);
    let plane = Plane::world_in_camera(Vector3::z(), 0.0, &pose1).unwrap();
    let mut points = Vec::new();
    while points.len() < 50 {
        let x = Vector3::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0), 0.0);
        if pose1.transform(&x).z > 0.5 && pose2.transform(&x).z > 0.5 {
            points.push(x);
        }
    }
    Config { k1: random_k(rng), k2: random_k(rng), pose1, pose2, plane, points }
}

#[test]
fn project_trivial_cases() {
    let k = unit_k();
    let id = Pose::identity();
    assert_eq!(project(&Vector3::new(0.0, 0.0, 1.0), &k, &id).unwrap(), Vector2::new(0.0, 0.0));
    assert_eq!(project(&Vector3::new(2.0, 3.0, 1.0), &k, &id).unwrap(), Vector2::new(2.0, 3.0));
    assert!(matches!(project(&Vector3::new(0.0, 0.0, -1.0), &k, &id), Err(Error::BehindCamera { .. })));
    assert!(matches!(project(&Vector3::new(1.0, 0.0, 0.0), &k, &id), Err(Error::BehindCamera { .. })));
}

#[test]
fn project_matches_step_by_step_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let k = random_k(&mut rng);
        let c = random_config(&mut rng);
        let x = c.points[0];
        // Camera coordinates by hand, then the pinhole equations.
        let r = c.pose1.rotation.matrix();
        let xc: Vec<f64> = (0..3).map(|i| (0..3).map(|j| r[(i, j)] * x[j]).sum::<f64>() + c.pose1.translation[i]).collect();
        let u = k.fx * xc[0] / xc[2] + k.skew * xc[1] / xc[2] + k.cx;
        let v = k.fy * xc[1] / xc[2] + k.cy;
        let p = project(&x, &k, &c.pose1).unwrap();
        assert!((p.x - u).abs() < 1e-9 && (p.y - v).abs() < 1e-9);
    }
}

#[test]
fn intrinsics_inverse_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let k = random_k(&mut rng);
        assert!((k.matrix() * k.inverse() - Matrix3::identity()).abs().max() < 1e-12);
    }
    assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
}

#[test]
fn pose_validation_and_json() {
    assert!(Pose::from_matrix(&Matrix3::identity(), Vector3::zeros()).is_ok());
    assert!(Pose::from_matrix(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)), Vector3::zeros()).is_err());
    assert!(Pose::from_matrix(&(Matrix3::identity() * 1.001), Vector3::zeros()).is_err());
    let pose = Pose::look_at(Vector3::new(1.0, -3.0, 5.0), Vector3::zeros(), Vector3::z()).unwrap();
    let json = serde_json::to_string(&pose).unwrap();
    let back: Pose = serde_json::from_str(&json).unwrap();
    assert!(rotation_error(&pose, &back) < 1e-12 && translation_error(&pose, &back) < 1e-12);
}

#[test]
fn look_at_points_the_optical_axis() {
    let center = Vector3::new(0.0, -10.0, 8.0);
    let target = Vector3::new(2.0, 5.0, 0.0);
    let pose = Pose::look_at(center, target, Vector3::z()).unwrap();
    assert!((pose.center() - center).norm() < 1e-12);
    let xc = pose.transform(&target);
    assert!(xc.x.abs() < 1e-12 && xc.y.abs() < 1e-12 && xc.z > 0.0);
    // Image y points down: a point above the target has smaller v.
    assert!(pose.transform(&(target + Vector3::z())).y < 0.0);
}

#[test]
fn params_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let pose = random_config(&mut rng).pose1;
        let back = Pose::from_params(&pose.params());
        assert!(rotation_error(&pose, &back) < 1e-12);
        assert!((pose.translation - back.translation).norm() < 1e-12);
    }
}

#[test]
fn homography_normalization() {
    let h = Homography::from_matrix(Matrix3::identity() * -4.0).unwrap();
    assert!((h.matrix() - Matrix3::identity() / 3f64.sqrt()).abs().max() < 1e-15);
    assert!((h.matrix().norm() - 1.0).abs() < 1e-15);
    assert!(Homography::from_matrix(Matrix3::zeros()).is_err());
}

#[test]
fn compose_same_pose_gives_identity_in_both_modes() {
    let k = unit_k();
    let pose = Pose::identity();
    let plane = Plane::new(Vector3::z(), 4.0).unwrap();
    let id = Homography::from_matrix(Matrix3::identity()).unwrap();
    for mode in [ComposeMode::Consistent, ComposeMode::Verbatim] {
        let h = compose_homography(&k, &k, &pose, &pose, &plane, mode).unwrap();
        assert!(h.max_diff(&id) < 1e-15, "{mode:?}");
    }
}

#[test]
fn compose_camera_on_plane_collapses_normal_axis() {
    let k = unit_k();
    let d = 2.5;
    let n = Vector3::z();
    let pose1 = Pose::new(Rotation3::identity(), Vector3::new(0.3, -1.0, 0.7));
    let pose2 = Pose::new(Rotation3::identity(), pose1.translation - n * d);
    let plane = Plane::new(n, d).unwrap();
    let expected = Homography::from_matrix(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0))).unwrap();
    let h = compose_homography(&k, &k, &pose1, &pose2, &plane, ComposeMode::Consistent).unwrap();
    assert!(h.max_diff(&expected) < 1e-15);
}

#[test]
fn compose_rejects_bad_plane() {
    let bad = Plane { normal: nalgebra::Unit::new_normalize(Vector3::z()), d: 0.0 };
    let k = unit_k();
    let p = Pose::identity();
    assert!(compose_homography(&k, &k, &p, &p, &bad, ComposeMode::Consistent).is_err());
    assert!(Plane::new(Vector3::z(), -1.0).is_err());
}

#[test]
fn consistent_homography_transfers_plane_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let c = random_config(&mut rng);
        let h = compose_homography(&c.k1, &c.k2, &c.pose1, &c.pose2, &c.plane, ComposeMode::Consistent).unwrap();
        for x in &c.points {
            let x1 = project(x, &c.k1, &c.pose1).unwrap();
            let x2 = project(x, &c.k2, &c.pose2).unwrap();
            assert!((h.apply(&x1) - x2).norm() < 1e-7);
        }
    }
}

#[test]
fn verbatim_homography_does_not_transfer_in_general() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = random_config(&mut rng);
    let h = compose_homography(&c.k1, &c.k2, &c.pose1, &c.pose2, &c.plane, ComposeMode::Verbatim).unwrap();
    let x = c.points[0];
    let err = (h.apply(&project(&x, &c.k1, &c.pose1).unwrap()) - project(&x, &c.k2, &c.pose2).unwrap()).norm();
    assert!(err > 1.0, "verbatim transfer error {err}");
}

#[test]
fn decompose_inverts_compose() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let c = random_config(&mut rng);
        let h = compose_homography(&c.k1, &c.k2, &c.pose1, &c.pose2, &c.plane, ComposeMode::Consistent).unwrap();
        let got = decompose_homography(&h, &c.k1, &c.k2, &c.pose1, &c.plane).unwrap();
        assert!(rotation_error(&got, &c.pose2) < 1e-7);
        assert!((got.translation - c.pose2.translation).norm() < 1e-7);
        assert!(translation_error(&got, &c.pose2) < 1e-7);
        let same = compose_homography(&c.k1, &c.k2, &c.pose1, &c.pose1, &c.plane, ComposeMode::Consistent).unwrap();
        let back = decompose_homography(&same, &c.k1, &c.k2, &c.pose1, &c.plane).unwrap();
        assert!(rotation_error(&back, &c.pose1) < 1e-9 && translation_error(&back, &c.pose1) < 1e-9);
    }
}

#[test]
fn decompose_ignores_scale_and_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let c = random_config(&mut rng);
        let h = compose_homography(&c.k1, &c.k2, &c.pose1, &c.pose2, &c.plane, ComposeMode::Consistent).unwrap();
        let base = decompose_homography(&h, &c.k1, &c.k2, &c.pose1, &c.plane).unwrap();
        for lambda in [-3.0, 0.5, 10.0] {
            let scaled = Homography::from_matrix(h.matrix() * lambda).unwrap();
            assert!(scaled.max_diff(&h) < 1e-15);
            // Bypass normalization to exercise the sign fix in decomposition.
            let raw = Homography(h.matrix() * lambda);
            let got = decompose_homography(&raw, &c.k1, &c.k2, &c.pose1, &c.plane).unwrap();
            assert!(rotation_error(&got, &base) < 1e-9 && translation_error(&got, &base) < 1e-9);
        }
    }
}

#[test]
fn decompose_tolerates_small_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let c = random_config(&mut rng);
        let h = compose_homography(&c.k1, &c.k2, &c.pose1, &c.pose2, &c.plane, ComposeMode::Consistent).unwrap();
        let noisy = h.matrix().map(|v| v * (1.0 + 1e-4 * rng.gen_range(-1.0..1.0)));
        match decompose_homography(&Homography::from_matrix(noisy).unwrap(), &c.k1, &c.k2, &c.pose1, &c.plane) {
            Ok(got) => assert!(rotation_error(&got, &c.pose2).to_degrees() < 0.1),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn decompose_rejects_non_plane_induced_maps() {
    let k = unit_k();
    let plane = Plane::new(Vector3::z(), 1.0).unwrap();
    let h = Homography::from_matrix(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 1.0))).unwrap();
    assert!(matches!(
        decompose_homography(&h, &k, &k, &Pose::identity(), &plane),
        Err(Error::InconsistentHomography(_))
    ));
}

fn random_homography(rng: &mut impl Rng) -> Homography {
    let m = Matrix3::from_fn(|i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3));
    let m = Matrix3::new(600.0, 0.0, 320.0, 0.0, 600.0, 240.0, 0.0, 0.0, 1.0)
        * m
        * Matrix3::new(1.0 / 600.0, 0.0, -320.0 / 600.0, 0.0, 1.0 / 600.0, -240.0 / 600.0, 0.0, 0.0, 1.0);
    Homography::from_matrix(m).unwrap()
}

fn pairs_from(h: &Homography, n: usize, rng: &mut impl Rng) -> Vec<Correspondence> {
    (0..n)
        .map(|_| {
            let x1 = Vector2::new(rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0));
            Correspondence::new(x1, h.apply(&x1))
        })
        .collect()
}

#[test]
fn dlt_recovers_from_four_exact_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let h = random_homography(&mut rng);
        let got = estimate_homography(&pairs_from(&h, 4, &mut rng)).unwrap();
        assert!(got.max_diff(&h) < 1e-8, "{}", got.max_diff(&h));
    }
}

#[test]
fn dlt_transfer_error_with_many_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let h = random_homography(&mut rng);
        let pairs = pairs_from(&h, 100, &mut rng);
        let got = estimate_homography(&pairs).unwrap();
        for c in &pairs {
            assert!((got.apply(&c.x1) - c.x2).norm() < 1e-8);
        }
    }
}

#[test]
fn dlt_rejects_collinear_and_short_input() {
    let line: Vec<Correspondence> = (0..4)
        .map(|i| {
            let p = Vector2::new(i as f64 * 10.0, i as f64 * 5.0 + 1.0);
            Correspondence::new(p, p * 2.0)
        })
        .collect();
    assert!(matches!(estimate_homography(&line), Err(Error::Degenerate(_))));
    assert!(matches!(estimate_homography(&line[..3]), Err(Error::InsufficientData { needed: 4, got: 3 })));
    let same = vec![Correspondence::new(Vector2::new(1.0, 1.0), Vector2::new(2.0, 2.0)); 5];
    assert!(estimate_homography(&same).is_err());
}

#[test]
fn ransac_keeps_everything_without_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = random_homography(&mut rng);
    let pairs = pairs_from(&h, 60, &mut rng);
    let fit = ransac_homography(&pairs, &RansacParams::default()).unwrap();
    assert!(fit.inliers.iter().all(|&b| b));
    assert!(fit.homography.max_diff(&h) < 1e-8);
}

fn corrupt(pairs: &mut [Correspondence], fraction: f64, rng: &mut impl Rng) -> Vec<bool> {
    let n_bad = (fraction * pairs.len() as f64).round() as usize;
    let mut truth = vec![true; pairs.len()];
    for i in rand::seq::index::sample(rng, pairs.len(), n_bad) {
        // Gross mismatch: at least 40 px away from the true match.
        let shift = Vector2::new(rng.gen_range(40.0..300.0), rng.gen_range(40.0..300.0));
        pairs[i].x2 += shift.component_mul(&Vector2::new(if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, 1.0));
        truth[i] = false;
    }
    truth
}

#[test]
fn ransac_finds_exact_inlier_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..20 {
        let h = random_homography(&mut rng);
        let mut pairs = pairs_from(&h, 100, &mut rng);
        let truth = corrupt(&mut pairs, 0.3, &mut rng);
        let fit = ransac_homography(&pairs, &RansacParams { seed: trial, ..Default::default() }).unwrap();
        assert_eq!(fit.inliers, truth, "trial {trial}");
    }
}

#[test]
fn ransac_with_noise_transfers_held_out_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let noise = rand_distr::Normal::new(0.0, 1.0).unwrap();
    for trial in 0..20 {
        let h = random_homography(&mut rng);
        let mut pairs = pairs_from(&h, 150, &mut rng);
        for c in &mut pairs {
            c.x2 += Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng));
        }
        corrupt(&mut pairs, 0.2, &mut rng);
        let fit = ransac_homography(&pairs, &RansacParams { seed: trial, ..Default::default() }).unwrap();
        for c in pairs_from(&h, 50, &mut rng) {
            assert!((fit.homography.apply(&c.x1) - c.x2).norm() < 2.0);
        }
    }
}

#[test]
fn ransac_is_deterministic_per_seed_and_fails_cleanly() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let h = random_homography(&mut rng);
    let mut pairs = pairs_from(&h, 80, &mut rng);
    corrupt(&mut pairs, 0.4, &mut rng);
    let params = RansacParams { seed: 5, ..Default::default() };
    assert_eq!(ransac_homography(&pairs, &params).unwrap(), ransac_homography(&pairs, &params).unwrap());
    assert!(matches!(ransac_homography(&pairs[..3], &params), Err(Error::InsufficientData { .. })));
    let line: Vec<Correspondence> = (0..10)
        .map(|i| Correspondence::new(Vector2::new(i as f64, 0.0), Vector2::new(0.0, i as f64)))
        .collect();
    assert!(matches!(ransac_homography(&line, &params), Err(Error::RobustFailure(_))));
}

fn scene(sigma: f64, outliers: f64, seed: u64) -> SyntheticScene {
    SyntheticScene::generate(&SceneConfig { pixel_sigma: sigma, outlier_fraction: outliers, seed, ..Default::default() })
        .unwrap()
}

#[test]
fn scene_points_are_visible_and_labelled() {
    let s = scene(0.0, 0.2, 1);
    let cfg = &s.config;
    assert_eq!(s.points.len(), cfg.n_plane_points + cfg.n_clutter);
    assert_eq!(s.points.iter().filter(|p| p.mismatched).count(), 44);
    for p in s.points.iter().filter(|p| !p.mismatched) {
        let x = project(&Vector3::from(p.world), &cfg.intrinsics, &s.true_pose).unwrap();
        assert!((x - Vector2::from(p.observed)).norm() < 1e-9);
        assert_eq!(p.on_plane, p.world[2].abs() < 1e-12);
    }
}

#[test]
fn refinement_from_truth_stops_at_once() {
    let s = scene(0.0, 0.0, 2);
    let out = refine_pose(&s, &s.true_pose, &RefineParams::default()).unwrap();
    assert_eq!(out.trace.len(), 1);
    assert!(out.converged);
    assert!(out.trace[0].rel_change < 0.05);
}

#[test]
fn noiseless_refinement_is_exact() {
    let s = scene(0.0, 0.0, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let init = s.perturbed_pose(10f64.to_radians(), 5.0, &mut rng).unwrap();
    let out = refine_pose(&s, &init, &RefineParams::default()).unwrap();
    assert!(out.converged);
    assert!(rotation_error(&out.pose, &s.true_pose) < 1e-6);
    assert!(translation_error(&out.pose, &s.true_pose) < 1e-6);
    for w in out.trace.windows(2) {
        assert!(w[1].rmse_px <= w[0].rmse_px + 1e-9);
    }
    let last = out.trace.last().unwrap();
    assert!(last.rel_change < 0.05);
    assert!(out.trace[..out.trace.len() - 1].iter().all(|r| r.rel_change >= 0.05));
}

#[test]
fn noisy_refinement_stays_within_field_accuracy() {
    for seed in 0..5 {
        let s = scene(1.0, 0.2, 100 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = s.perturbed_pose(15f64.to_radians(), 10.0, &mut rng).unwrap();
        let params = RefineParams { ransac: RansacParams { seed, ..Default::default() }, ..Default::default() };
        let out = refine_pose(&s, &init, &params).unwrap();
        let rot = rotation_error(&out.pose, &s.true_pose).to_degrees();
        let trans = translation_error(&out.pose, &s.true_pose);
        assert!(rot < 1.0 && trans < 1.0, "seed {seed}: {rot}° {trans} m");
    }
}

#[test]
fn refinement_without_polish_still_converges() {
    let s = scene(0.0, 0.1, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let init = s.perturbed_pose(10f64.to_radians(), 5.0, &mut rng).unwrap();
    let params = RefineParams { gauss_newton: GaussNewtonParams { enabled: false, ..Default::default() }, ..Default::default() };
    let out = refine_pose(&s, &init, &params).unwrap();
    assert!(rotation_error(&out.pose, &s.true_pose) < 1e-6);
}

/// Matcher whose observations drift further from the estimate every call,
/// so the reprojection error keeps growing.
struct Drifting {
    inner: SyntheticScene,
    calls: std::cell::Cell<usize>,
}

impl CorrespondenceSource for Drifting {
    fn intrinsics(&self) -> Intrinsics {
        self.inner.intrinsics()
    }

    fn world_plane(&self) -> (Vector3<f64>, f64) {
        self.inner.world_plane()
    }

    fn correspondences(&self, estimate: &Pose) -> Result<Vec<PlaneMatch>> {
        let n = self.calls.get();
        self.calls.set(n + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let noise = rand_distr::Normal::new(0.0, 0.3 * (n + 1) as f64).unwrap();
        let mut m = self.inner.correspondences(estimate)?;
        for x in &mut m {
            x.observed = x.rendered + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng));
        }
        Ok(m)
    }
}

#[test]
fn growing_error_is_reported_as_divergence() {
    let src = Drifting { inner: scene(0.0, 0.0, 5), calls: Default::default() };
    let params = RefineParams { stop_rel_change: 1e-12, ..Default::default() };
    match refine_pose(&src, &src.inner.true_pose, &params) {
        Err(Error::Divergence { trace }) => {
            assert!(trace.len() >= 4);
            let n = trace.len();
            assert!(trace[n - 3..].iter().zip(&trace[n - 4..n - 1]).all(|(a, b)| a.rmse_px > b.rmse_px));
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn trace_serializes_to_json() {
    let s = scene(0.5, 0.1, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let init = s.perturbed_pose(5f64.to_radians(), 2.0, &mut rng).unwrap();
    let out = refine_pose(&s, &init, &RefineParams::default()).unwrap();
    let json = serde_json::to_value(&out.trace).unwrap();
    assert!(json[0]["rotation_error_deg"].is_number());
    let scene_json = serde_json::to_string(&s).unwrap();
    let back: SyntheticScene = serde_json::from_str(&scene_json).unwrap();
    assert_eq!(back.points, s.points);
}

fn central_difference(p: &[f64; 6], k: &Intrinsics, w: &[Vector3<f64>], o: &[Vector2<f64>]) -> nalgebra::DMatrix<f64> {
    let h = 1e-6;
    let mut jac = nalgebra::DMatrix::zeros(2 * w.len(), 6);
    for c in 0..6 {
        let (mut plus, mut minus) = (*p, *p);
        plus[c] += h;
        minus[c] -= h;
        let d = (reprojection_residuals(&plus, k, w, o).unwrap() - reprojection_residuals(&minus, k, w, o).unwrap()) / (2.0 * h);
        jac.set_column(c, &d);
    }
    jac
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut states = 0;
    while states < 100 {
        let k = random_k(&mut rng);
        let axis = Vector3::from(UnitSphere.sample(&mut rng));
        let angle = if states < 5 { 1e-9 * states as f64 } else { rng.gen_range(0.0..3.0) };
        let rot = Rotation3::from_scaled_axis(axis * angle);
        let pose = Pose::new(rot, Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
        // Points well in front of the camera.
        let world: Vec<Vector3<f64>> = (0..8)
            .map(|_| {
                let xc = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(5.0..20.0));
                pose.rotation.inverse() * (xc - pose.translation)
            })
            .collect();
        let obs = vec![Vector2::zeros(); world.len()];
        let p = pose.params();
        let analytic = reprojection_jacobian(&p, &k, &world).unwrap();
        let numeric = central_difference(&p, &k, &world, &obs);
        let rel = (&analytic - &numeric).norm() / analytic.norm();
        assert!(rel < 1e-5, "state {states}: relative error {rel:e}");
        states += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homography_normal_form_is_scale_invariant(seed in any::<u64>(), lambda in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_homography(&mut rng);
        let scaled = Homography::from_matrix(h.matrix() * lambda).unwrap();
        prop_assert!(scaled.max_diff(&h) < 1e-14);
        prop_assert!((scaled.matrix().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotations_stay_orthonormal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_config(&mut rng);
        let h = compose_homography(&c.k1, &c.k2, &c.pose1, &c.pose2, &c.plane, ComposeMode::Consistent).unwrap();
        let noisy = h.matrix().map(|v| v * (1.0 + 1e-3 * rng.gen_range(-1.0..1.0)));
        if let Ok(p) = decompose_homography(&Homography::from_matrix(noisy).unwrap(), &c.k1, &c.k2, &c.pose1, &c.plane) {
            let r = p.rotation.matrix();
            prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
