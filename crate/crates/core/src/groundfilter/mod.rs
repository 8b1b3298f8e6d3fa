//! Progressive TIN densification ground filter.
//!
//! The filter seeds a TIN with the lowest point of every cell of a coarse
//! grid plus four virtual corners, then halves the grid until it drops
//! below `min_cell`. Each level offers the lowest unclassified point of
//! every finer cell to the surface; a last pass offers everything left.
//! A candidate joins the ground surface when it lies close to the plane of
//! the triangle containing it, subtends a small angle with that triangle's
//! vertices and, optionally, keeps the local mesh free of obtuse corners
//! and sharp normal changes.

mod synthetic;

pub use synthetic::{error_rates, BoxObject, SceneLabel, SyntheticScene, SyntheticSceneConfig};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cloud::{Bounds, Point, PointCloud};
use crate::tin::{self, Location, Tin, Vertex, VertexOrigin, AREA_EPS};
use crate::{Error, Result};

/// Dot products within this of zero count as right angles.
pub const EPS_DOT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerSeedMode {
    /// Copy the elevation of the XY-nearest real seed.
    #[default]
    NearestSeedZ,
    /// Inverse-distance (power 2) blend of the three XY-nearest seeds.
    IdwK3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Seed grid cell size of the first level (m); should exceed the
    /// largest building footprint.
    pub initial_cell: f64,
    /// The pyramid stops before cells get smaller than this (m).
    pub min_cell: f64,
    /// Maximum vertical offset from the containing triangle (m).
    pub dist_thresh: f64,
    /// Maximum vertex angle (degrees).
    pub angle_thresh: f64,
    /// Sub-triangle normals must deviate from the containing triangle's
    /// normal by strictly less than this (degrees).
    pub normal_limit: f64,
    pub enable_nonobtuse: bool,
    pub enable_normal: bool,
    pub virtual_corners: bool,
    pub corner_seed_mode: CornerSeedMode,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            initial_cell: 40.0,
            min_cell: 2.0,
            dist_thresh: 0.3,
            angle_thresh: 8.0,
            normal_limit: 90.0,
            enable_nonobtuse: true,
            enable_normal: true,
            virtual_corners: true,
            corner_seed_mode: CornerSeedMode::NearestSeedZ,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_cell > 0.0 && self.min_cell.is_finite()) {
            return Err(Error::param(format!("min_cell must be positive, got {}", self.min_cell)));
        }
        if !(self.initial_cell > self.min_cell && self.initial_cell.is_finite()) {
            return Err(Error::param(format!(
                "initial_cell ({}) must be greater than min_cell ({})",
                self.initial_cell, self.min_cell
            )));
        }
        if !(self.dist_thresh > 0.0 && self.dist_thresh.is_finite()) {
            return Err(Error::param(format!("dist_thresh must be positive, got {}", self.dist_thresh)));
        }
        if !(self.angle_thresh > 0.0 && self.angle_thresh < 90.0) {
            return Err(Error::param(format!(
                "angle_thresh must lie in (0, 90) degrees, got {}",
                self.angle_thresh
            )));
        }
        if !(self.normal_limit > 0.0 && self.normal_limit <= 90.0) {
            return Err(Error::param(format!(
                "normal_limit must lie in (0, 90] degrees, got {}",
                self.normal_limit
            )));
        }
        Ok(())
    }

    /// Cell sizes of the pyramid levels: `initial_cell / 2^k` while not
    /// below `min_cell`.
    pub fn level_cells(&self) -> Vec<f64> {
        let mut cells = Vec::new();
        let mut k = 0;
        loop {
            let cell = self.initial_cell / f64::powi(2.0, k);
            if cell < self.min_cell {
                return cells;
            }
            cells.push(cell);
            k += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    /// Point indices, one per non-empty cell, in row-major cell order.
    pub real: Vec<usize>,
    pub virtual_seeds: Vec<Vertex>,
}

/// Per-cell lowest points of a grid anchored at `(x0, y0)`.
///
/// Ties in z go to the lowest point index; the result is sorted by cell
/// (row-major).
fn lowest_per_cell(
    cloud: &PointCloud,
    indices: impl IntoIterator<Item = usize>,
    x0: f64,
    y0: f64,
    cell: f64,
) -> Vec<usize> {
    let mut best: HashMap<(i64, i64), usize> = HashMap::new();
    for i in indices {
        let p = &cloud[i];
        let key = (((p.y - y0) / cell).floor() as i64, ((p.x - x0) / cell).floor() as i64);
        best.entry(key)
            .and_modify(|j| {
                let q = &cloud[*j];
                if p.z < q.z || (p.z == q.z && i < *j) {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut cells: Vec<_> = best.into_iter().collect();
    cells.sort_unstable_by_key(|&(key, _)| key);
    cells.into_iter().map(|(_, i)| i).collect()
}

/// Lowest point of every non-empty cell of a grid anchored at the cloud's
/// XY minimum.
pub fn select_seeds(cloud: &PointCloud, cell: f64) -> Result<SeedSet> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(Error::param(format!("seed cell size must be positive, got {cell}")));
    }
    let b = cloud.bounds().ok_or_else(|| Error::EmptyInput("cloud has no points".into()))?;
    Ok(SeedSet {
        real: lowest_per_cell(cloud, 0..cloud.len(), b.min_x, b.min_y, cell),
        virtual_seeds: Vec::new(),
    })
}

/// Vertices at the four XY corners of `bounds`, elevated from the real
/// seeds according to `mode`.
pub fn virtual_corner_seeds(
    bounds: &Bounds,
    seeds: &[Point],
    mode: CornerSeedMode,
) -> Result<[Vertex; 4]> {
    if seeds.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(bounds.xy_corners().map(|(x, y)| {
        let z = match mode {
            CornerSeedMode::NearestSeedZ => nearest_z(seeds, x, y),
            CornerSeedMode::IdwK3 => idw_z(seeds, x, y, 3),
        };
        Vertex::virtual_at(x, y, z)
    }))
}

fn xy_dist2(p: &Point, x: f64, y: f64) -> f64 {
    (p.x - x).powi(2) + (p.y - y).powi(2)
}

fn nearest_z(seeds: &[Point], x: f64, y: f64) -> f64 {
    seeds
        .iter()
        .min_by(|a, b| xy_dist2(a, x, y).total_cmp(&xy_dist2(b, x, y)))
        .map(|p| p.z)
        .expect("non-empty seeds")
}

fn idw_z(seeds: &[Point], x: f64, y: f64, k: usize) -> f64 {
    let mut by_dist: Vec<(f64, f64)> = seeds.iter().map(|p| (xy_dist2(p, x, y), p.z)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    by_dist.truncate(k);
    if let Some(&(_, z)) = by_dist.iter().find(|(d2, _)| *d2 == 0.0) {
        return z;
    }
    // Power 2 weights are 1 / d².
    let (num, den) = by_dist
        .iter()
        .fold((0.0, 0.0), |(num, den), &(d2, z)| (num + z / d2, den + 1.0 / d2));
    num / den
}

/// Sign class of the angle at `apex` between the edges to `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleClass {
    Acute,
    Right,
    Obtuse,
}

pub fn classify_angle(apex: [f64; 3], u: [f64; 3], v: [f64; 3]) -> AngleClass {
    let d = tin::dot(&tin::sub(&u, &apex), &tin::sub(&v, &apex));
    if d > EPS_DOT {
        AngleClass::Acute
    } else if d >= -EPS_DOT {
        AngleClass::Right
    } else {
        AngleClass::Obtuse
    }
}

fn is_degenerate(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> bool {
    let n = tin::cross(&tin::sub(&b, &a), &tin::sub(&c, &a));
    0.5 * tin::dot(&n, &n).sqrt() <= AREA_EPS
}

/// True iff no interior angle of the 3D triangle `abc` is obtuse; right
/// angles pass.
pub fn nonobtuse_ok(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Result<bool> {
    if is_degenerate(a, b, c) {
        return Err(Error::degenerate("triangle has no area"));
    }
    Ok([(a, b, c), (b, c, a), (c, a, b)]
        .iter()
        .all(|&(apex, u, v)| classify_angle(apex, u, v) != AngleClass::Obtuse))
}

/// True iff the angle between the two normals is strictly below 90°.
pub fn normal_ok(existing: [f64; 3], new: [f64; 3]) -> Result<bool> {
    normal_within(existing, new, 90.0)
}

/// True iff the angle between the two normals is strictly below
/// `limit_deg`.
pub fn normal_within(existing: [f64; 3], new: [f64; 3], limit_deg: f64) -> Result<bool> {
    let la = tin::dot(&existing, &existing).sqrt();
    let lb = tin::dot(&new, &new).sqrt();
    if la == 0.0 || lb == 0.0 {
        return Err(Error::degenerate("zero normal"));
    }
    let cos = tin::dot(&existing, &new) / (la * lb);
    Ok(cos > limit_deg.to_radians().cos().max(0.0) + EPS_DOT)
}

fn xy_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// The three triangles that would replace `corners` if `p` were inserted,
/// as (existing, existing, new) vertex triples; sub-triangles collapsed by
/// a point on an edge are dropped.
fn sub_triangles(corners: &[Vertex; 3], p: [f64; 3]) -> Vec<[[f64; 3]; 3]> {
    let [a, b, c] = corners.map(|v| v.xyz());
    [[a, b, p], [b, c, p], [c, a, p]]
        .into_iter()
        .filter(|t| xy_area(t[0], t[1], t[2]) > AREA_EPS)
        .collect()
}

/// Non-obtuse check applied to a hypothetical insertion: no corner at an
/// existing vertex may turn obtuse unless the host corner already was.
///
/// Corners at the new point are not tested. They sum to a full turn in
/// the plane, so one of them is always obtuse. Splitting a planar corner
/// only narrows it; what the check catches is a fold in 3D, where the new
/// point sits far above or below the surface seen from a neighbouring
/// vertex.
pub fn insertion_nonobtuse_ok(corners: &[Vertex; 3], p: [f64; 3]) -> bool {
    let host = corners.map(|v| v.xyz());
    let host_ok: [bool; 3] =
        std::array::from_fn(|k| classify_angle(host[k], host[(k + 1) % 3], host[(k + 2) % 3]) != AngleClass::Obtuse);
    (0..3).all(|k| {
        let (u, v) = (host[k], host[(k + 1) % 3]);
        if xy_area(u, v, p) <= AREA_EPS {
            return true;
        }
        (!host_ok[k] || classify_angle(u, v, p) != AngleClass::Obtuse)
            && (!host_ok[(k + 1) % 3] || classify_angle(v, p, u) != AngleClass::Obtuse)
    })
}

/// Normal check of every sub-triangle of a hypothetical insertion against
/// the containing triangle.
pub fn insertion_normals_ok(corners: &[Vertex; 3], p: [f64; 3], limit_deg: f64) -> bool {
    let Ok(base) = tin::unit_normal(corners) else {
        return false;
    };
    sub_triangles(corners, p).iter().all(|&[u, v, q]| {
        let n = tin::cross(&tin::sub(&v, &u), &tin::sub(&q, &u));
        normal_within(base, n, limit_deg).unwrap_or(false)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Insert,
    /// Same XY as an existing vertex and within the distance threshold:
    /// ground, but nothing to insert.
    Coincident,
    Reject,
}

fn evaluate(tin: &Tin, loc: Location, p: &Point, params: &FilterParams) -> Verdict {
    let t = match loc {
        Location::Inside(t) | Location::OnEdge { triangle: t, .. } => t,
        Location::OnVertex(v) => {
            return if (p.z - tin.vertex(v).z).abs() <= params.dist_thresh {
                Verdict::Coincident
            } else {
                Verdict::Reject
            };
        }
        Location::Outside => return Verdict::Reject,
    };
    let Ok(dist) = tin.vertical_distance(t, p) else {
        return Verdict::Reject;
    };
    if dist > params.dist_thresh {
        return Verdict::Reject;
    }
    match tin.vertex_angle(t, p) {
        Ok(angle) if angle <= params.angle_thresh => {}
        _ => return Verdict::Reject,
    }
    let corners = tin.triangle_corners(t);
    // Shape constraints would only measure the synthesized elevation of a
    // virtual corner, so triangles touching one are exempt.
    if corners.iter().any(|v| v.origin == VertexOrigin::Virtual) {
        return Verdict::Insert;
    }
    let q = [p.x, p.y, p.z];
    if params.enable_nonobtuse && !insertion_nonobtuse_ok(&corners, q) {
        return Verdict::Reject;
    }
    if params.enable_normal && !insertion_normals_ok(&corners, q, params.normal_limit) {
        return Verdict::Reject;
    }
    Verdict::Insert
}

/// One accepted candidate together with the triangle it was tested
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedInsertion {
    pub point: usize,
    pub containing: Option<[Vertex; 3]>,
}

/// Offers `candidates` to the surface in repeated passes until a pass
/// accepts nothing. Accepted points are inserted immediately. Returns the
/// accepted indices in acceptance order.
pub fn densify_level(
    tin: &mut Tin,
    cloud: &PointCloud,
    candidates: &[usize],
    params: &FilterParams,
) -> Result<Vec<usize>> {
    densify_logged(tin, cloud, candidates, params, None)
}

fn densify_logged(
    tin: &mut Tin,
    cloud: &PointCloud,
    candidates: &[usize],
    params: &FilterParams,
    mut log: Option<&mut Vec<AcceptedInsertion>>,
) -> Result<Vec<usize>> {
    let mut pending = morton_sorted(cloud, candidates);
    let mut accepted = Vec::new();
    let mut hint = 0;
    loop {
        let before = accepted.len();
        let mut rejected = Vec::with_capacity(pending.len());
        for &i in &pending {
            let p = &cloud[i];
            let loc = tin.walk(p.x, p.y, hint);
            if let Location::Inside(t) | Location::OnEdge { triangle: t, .. } = loc {
                hint = t;
            }
            match evaluate(tin, loc, p, params) {
                Verdict::Insert => {
                    let containing = match loc {
                        Location::Inside(t) | Location::OnEdge { triangle: t, .. } => Some(tin.triangle_corners(t)),
                        _ => None,
                    };
                    tin.insert_at(Vertex::from_point(p, i), loc)?;
                    accepted.push(i);
                    if let Some(log) = log.as_deref_mut() {
                        log.push(AcceptedInsertion { point: i, containing });
                    }
                }
                Verdict::Coincident => {
                    accepted.push(i);
                    if let Some(log) = log.as_deref_mut() {
                        log.push(AcceptedInsertion { point: i, containing: None });
                    }
                }
                Verdict::Reject => rejected.push(i),
            }
        }
        if accepted.len() == before || rejected.is_empty() {
            return Ok(accepted);
        }
        pending = rejected;
    }
}

/// Re-derives the elevation of the virtual corners from every ground
/// point accepted so far. Each finer level's ground points are seeds of
/// that finer grid, so corners track the surface as the pyramid descends.
fn relevel_corners(tin: &mut Tin, corner_ids: &[usize], cloud: &PointCloud, is_ground: &[bool], mode: CornerSeedMode) {
    if corner_ids.is_empty() {
        return;
    }
    let ground: Vec<Point> = cloud.iter().zip(is_ground).filter(|(_, &g)| g).map(|(p, _)| *p).collect();
    if ground.is_empty() {
        return;
    }
    for &v in corner_ids {
        let (x, y) = (tin.vertex(v).x, tin.vertex(v).y);
        let z = match mode {
            CornerSeedMode::NearestSeedZ => nearest_z(&ground, x, y),
            CornerSeedMode::IdwK3 => idw_z(&ground, x, y, 3),
        };
        tin.set_vertex_z(v, z);
    }
}

/// Candidates ordered along a Z-order curve so consecutive walks start
/// next to their target.
fn morton_sorted(cloud: &PointCloud, candidates: &[usize]) -> Vec<usize> {
    let Some(b) = Bounds::of(candidates.iter().map(|&i| &cloud[i])) else {
        return Vec::new();
    };
    let scale = |v: f64, lo: f64, span: f64| -> u32 {
        if span > 0.0 {
            (((v - lo) / span) * 65535.0).round() as u32
        } else {
            0
        }
    };
    let spread = |mut v: u32| -> u32 {
        v &= 0xffff;
        v = (v | (v << 8)) & 0x00ff_00ff;
        v = (v | (v << 4)) & 0x0f0f_0f0f;
        v = (v | (v << 2)) & 0x3333_3333;
        (v | (v << 1)) & 0x5555_5555
    };
    let mut keyed: Vec<(u32, usize)> = candidates
        .iter()
        .map(|&i| {
            let p = &cloud[i];
            let kx = spread(scale(p.x, b.min_x, b.width()));
            let ky = spread(scale(p.y, b.min_y, b.height()));
            (kx | (ky << 1), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub cell: f64,
    pub candidates: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundResult {
    /// Ground point indices, ascending.
    pub ground: Vec<usize>,
    /// Non-ground point indices, ascending.
    pub nonground: Vec<usize>,
    /// One record per pyramid level; level 0 counts the initial seeds.
    pub levels: Vec<LevelRecord>,
    /// The closing pass that offers every remaining point.
    pub final_pass: LevelRecord,
    pub virtual_seeds: usize,
}

/// Ground classification together with the surface it produced.
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub result: GroundResult,
    pub tin: Tin,
    pub log: Vec<AcceptedInsertion>,
}

/// Classifies an outlier-free cloud into ground and non-ground points.
pub fn filter_ground(cloud: &PointCloud, params: &FilterParams) -> Result<GroundResult> {
    Ok(filter_ground_run(cloud, params)?.result)
}

/// [`filter_ground`] that also returns the final TIN and the acceptance log.
pub fn filter_ground_run(cloud: &PointCloud, params: &FilterParams) -> Result<FilterRun> {
    params.validate()?;
    let bounds = cloud.bounds().ok_or_else(|| Error::EmptyInput("cloud has no points".into()))?;
    if let Some(p) = cloud.iter().find(|p| !p.is_valid()) {
        return Err(Error::param(format!("invalid point ({}, {}, {})", p.x, p.y, p.z)));
    }
    let cells = params.level_cells();

    let seeds = lowest_per_cell(cloud, 0..cloud.len(), bounds.min_x, bounds.min_y, cells[0]);
    let mut vertices: Vec<Vertex> = seeds.iter().map(|&i| Vertex::from_point(&cloud[i], i)).collect();
    let mut corner_ids = Vec::new();
    if params.virtual_corners {
        let seed_points: Vec<Point> = seeds.iter().map(|&i| cloud[i]).collect();
        for corner in virtual_corner_seeds(&bounds, &seed_points, params.corner_seed_mode)? {
            if !vertices.iter().any(|v| v.x == corner.x && v.y == corner.y) {
                corner_ids.push(vertices.len());
                vertices.push(corner);
            }
        }
    }
    if vertices.len() < 3 {
        return Err(Error::degenerate(format!("need at least 3 seeds, got {}", vertices.len())));
    }
    let mut tin = Tin::delaunay(vertices)?;
    log::debug!("initial TIN: {} seeds, {} virtual corners", seeds.len(), corner_ids.len());

    let mut is_ground = vec![false; cloud.len()];
    for &i in &seeds {
        is_ground[i] = true;
    }
    let mut levels = vec![LevelRecord { cell: cells[0], candidates: seeds.len(), accepted: seeds.len() }];
    let mut accepted_log = Vec::new();

    for &cell in &cells[1..] {
        relevel_corners(&mut tin, &corner_ids, cloud, &is_ground, params.corner_seed_mode);
        let open = (0..cloud.len()).filter(|&i| !is_ground[i]);
        let candidates = lowest_per_cell(cloud, open, bounds.min_x, bounds.min_y, cell);
        let accepted = densify_logged(&mut tin, cloud, &candidates, params, Some(&mut accepted_log))?;
        for &i in &accepted {
            is_ground[i] = true;
        }
        log::debug!("level cell {cell}: {} candidates, {} accepted", candidates.len(), accepted.len());
        levels.push(LevelRecord { cell, candidates: candidates.len(), accepted: accepted.len() });
    }

    relevel_corners(&mut tin, &corner_ids, cloud, &is_ground, params.corner_seed_mode);
    let remaining: Vec<usize> = (0..cloud.len()).filter(|&i| !is_ground[i]).collect();
    let accepted = densify_logged(&mut tin, cloud, &remaining, params, Some(&mut accepted_log))?;
    for &i in &accepted {
        is_ground[i] = true;
    }
    let final_pass = LevelRecord {
        cell: cells[cells.len() - 1],
        candidates: remaining.len(),
        accepted: accepted.len(),
    };

    let (ground, nonground): (Vec<usize>, Vec<usize>) = (0..cloud.len()).partition(|&i| is_ground[i]);
    Ok(FilterRun {
        result: GroundResult {
            ground,
            nonground,
            levels,
            final_pass,
            virtual_seeds: corner_ids.len(),
        },
        tin,
        log: accepted_log,
    })
}
