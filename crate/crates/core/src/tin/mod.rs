//! 2.5D Delaunay triangulation over the XY projection of elevation samples.
//!
//! Triangles are stored counter-clockwise. `neighbors[i]` is the triangle
//! across the edge opposite `vertices[i]`, i.e. the edge
//! `(vertices[i + 1], vertices[i + 2])`, or `None` on the hull.
//!
//! Orientation and in-circle signs come from adaptive-exact predicates so
//! long densification runs never see contradictory answers. When four
//! vertices are exactly cocircular the diagonal whose smaller vertex index
//! is smallest wins; this makes the triangulation a pure function of the
//! vertex set and its indexing, independent of insertion order.

mod dem;

pub use dem::{rasterize_dem, RasterGrid, NODATA};

use robust::{incircle, orient2d, Coord};

use crate::cloud::Point;
use crate::{Error, Result};

/// Triangles with |area| at or below this (m²) are treated as degenerate.
pub const AREA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexOrigin {
    /// Index of the source point in the cloud being triangulated.
    Point(usize),
    /// Synthesized vertex (e.g. a survey-area corner).
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub origin: VertexOrigin,
}

impl Vertex {
    pub fn new(x: f64, y: f64, z: f64, origin: VertexOrigin) -> Self {
        Vertex { x, y, z, origin }
    }

    pub fn from_point(p: &Point, index: usize) -> Self {
        Vertex::new(p.x, p.y, p.z, VertexOrigin::Point(index))
    }

    pub fn virtual_at(x: f64, y: f64, z: f64) -> Self {
        Vertex::new(x, y, z, VertexOrigin::Virtual)
    }

    #[inline]
    fn coord(&self) -> Coord<f64> {
        Coord { x: self.x, y: self.y }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub neighbors: [Option<usize>; 3],
}

impl Triangle {
    fn index_of(&self, v: usize) -> usize {
        self.vertices.iter().position(|&w| w == v).expect("vertex not in triangle")
    }

    fn index_of_neighbor(&self, t: usize) -> usize {
        self.neighbors
            .iter()
            .position(|&n| n == Some(t))
            .expect("triangles are not adjacent")
    }
}

/// Where a query point falls relative to the triangulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside(usize),
    /// On the edge opposite `vertices[edge]` of the triangle.
    OnEdge { triangle: usize, edge: usize },
    OnVertex(usize),
    Outside,
}

#[derive(Debug, Clone, Default)]
pub struct Tin {
    vertices: Vec<Vertex>,
    triangles: Vec<Triangle>,
    /// One incident triangle per vertex.
    vertex_triangle: Vec<usize>,
    /// Walk start for the next mutating location query.
    hint: usize,
    /// Hull bookkeeping, present only during batch construction.
    hull: Option<Hull>,
}

#[derive(Debug, Clone)]
struct Hull {
    next: Vec<usize>,
    prev: Vec<usize>,
    /// Triangle holding the boundary edge `(v, next[v])`.
    edge_triangle: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl Tin {
    /// Delaunay triangulation of the XY convex hull of `vertices`.
    ///
    /// Vertex indices in the result equal positions in `vertices`.
    pub fn delaunay(vertices: Vec<Vertex>) -> Result<Tin> {
        if vertices.len() < 3 {
            return Err(Error::degenerate(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite())) {
            return Err(Error::degenerate(format!("non-finite vertex ({}, {}, {})", v.x, v.y, v.z)));
        }

        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (&vertices[a], &vertices[b]);
            va.x.total_cmp(&vb.x).then(va.y.total_cmp(&vb.y))
        });
        for w in order.windows(2) {
            let (a, b) = (&vertices[w[0]], &vertices[w[1]]);
            if a.x == b.x && a.y == b.y {
                return Err(Error::Duplicate { x: a.x, y: a.y });
            }
        }

        let n = vertices.len();
        let mut tin = Tin {
            vertices,
            triangles: Vec::with_capacity(2 * n),
            vertex_triangle: vec![NIL; n],
            hint: 0,
            hull: Some(Hull {
                next: vec![NIL; n],
                prev: vec![NIL; n],
                edge_triangle: vec![NIL; n],
            }),
        };

        let (s0, s1) = (order[0], order[1]);
        let k = (2..n)
            .find(|&k| tin.orient(s0, s1, order[k]) != 0.0)
            .ok_or_else(|| Error::degenerate("all vertices are collinear"))?;
        tin.seed_fan(&order[..k], order[k]);
        let mut last = order[k];
        for &v in &order[k + 1..] {
            tin.insert_outside(v, last);
            last = v;
        }
        tin.hull = None;
        Ok(tin)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> &Triangle {
        &self.triangles[t]
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_corners(&self, t: usize) -> [Vertex; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    /// Vertices on the hull boundary, including collinear ones.
    pub fn hull_vertex_count(&self) -> usize {
        let mut on_hull = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for i in 0..3 {
                if tri.neighbors[i].is_none() {
                    on_hull[tri.vertices[(i + 1) % 3]] = true;
                    on_hull[tri.vertices[(i + 2) % 3]] = true;
                }
            }
        }
        on_hull.into_iter().filter(|&b| b).count()
    }

    /// Deterministic point location: the lowest-index triangle whose closed
    /// area contains `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> Result<usize> {
        match self.walk(x, y, 0) {
            Location::Inside(t) => Ok(t),
            Location::OnEdge { triangle, edge } => {
                let other = self.triangles[triangle].neighbors[edge];
                Ok(other.map_or(triangle, |o| o.min(triangle)))
            }
            Location::OnVertex(v) => Ok(self
                .triangles_around(v)
                .into_iter()
                .min()
                .expect("vertex has an incident triangle")),
            Location::Outside => Err(Error::OutsideHull { x, y }),
        }
    }

    /// Visibility walk from `start`. Any containing triangle may be
    /// reported for points on edges; use [`Tin::locate`] when the choice
    /// must not depend on the start.
    pub fn walk(&self, x: f64, y: f64, start: usize) -> Location {
        if self.triangles.is_empty() {
            return Location::Outside;
        }
        let p = Coord { x, y };
        let mut t = start.min(self.triangles.len() - 1);
        let max_steps = 4 * self.triangles.len() + 64;
        'walk: for step in 0..max_steps {
            let tri = &self.triangles[t];
            for k in 0..3 {
                let i = (k + step) % 3;
                let a = self.vertices[tri.vertices[(i + 1) % 3]].coord();
                let b = self.vertices[tri.vertices[(i + 2) % 3]].coord();
                if orient2d(a, b, p) < 0.0 {
                    match tri.neighbors[i] {
                        Some(u) => {
                            t = u;
                            continue 'walk;
                        }
                        None => return Location::Outside,
                    }
                }
            }
            return self.classify(t, p);
        }
        // The visibility walk terminates on Delaunay meshes; this scan only
        // guards against a corrupted mesh looping forever.
        (0..self.triangles.len())
            .find_map(|t| {
                let tri = &self.triangles[t];
                let inside = (0..3).all(|i| {
                    let a = self.vertices[tri.vertices[(i + 1) % 3]].coord();
                    let b = self.vertices[tri.vertices[(i + 2) % 3]].coord();
                    orient2d(a, b, p) >= 0.0
                });
                inside.then(|| self.classify(t, p))
            })
            .unwrap_or(Location::Outside)
    }

    fn classify(&self, t: usize, p: Coord<f64>) -> Location {
        let tri = &self.triangles[t];
        let zero: Vec<usize> = (0..3)
            .filter(|&i| {
                let a = self.vertices[tri.vertices[(i + 1) % 3]].coord();
                let b = self.vertices[tri.vertices[(i + 2) % 3]].coord();
                orient2d(a, b, p) == 0.0
            })
            .collect();
        match zero.as_slice() {
            [] => Location::Inside(t),
            [e] => Location::OnEdge { triangle: t, edge: *e },
            [e1, e2] => Location::OnVertex(tri.vertices[3 - e1 - e2]),
            _ => unreachable!("non-degenerate triangle"),
        }
    }

    /// Inserts a vertex inside or on the hull and restores the Delaunay
    /// property. Returns the new vertex index.
    pub fn insert_vertex(&mut self, v: Vertex) -> Result<usize> {
        if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
            return Err(Error::degenerate("non-finite vertex"));
        }
        let loc = self.walk(v.x, v.y, self.hint);
        self.insert_at(v, loc)
    }

    /// Like [`Tin::insert_vertex`] but reuses a location the caller already
    /// computed with [`Tin::walk`] on the current mesh.
    pub fn insert_at(&mut self, v: Vertex, loc: Location) -> Result<usize> {
        let p = self.vertices.len();
        match loc {
            Location::Outside => return Err(Error::OutsideHull { x: v.x, y: v.y }),
            Location::OnVertex(_) => return Err(Error::Duplicate { x: v.x, y: v.y }),
            Location::Inside(t) => {
                self.vertices.push(v);
                self.vertex_triangle.push(NIL);
                self.split_triangle(t, p);
            }
            Location::OnEdge { triangle, edge } => {
                self.vertices.push(v);
                self.vertex_triangle.push(NIL);
                self.split_edge(triangle, edge, p);
            }
        }
        self.hint = self.vertex_triangle[p];
        Ok(p)
    }

    /// Moves vertex `v` vertically. The triangulation depends only on XY,
    /// so connectivity is unaffected.
    pub fn set_vertex_z(&mut self, v: usize, z: f64) {
        self.vertices[v].z = z;
    }

    /// Triangles incident to vertex `v`.
    pub fn triangles_around(&self, v: usize) -> Vec<usize> {
        let t0 = self.vertex_triangle[v];
        let mut out = vec![t0];
        // Counter-clockwise: cross the edge (v, next).
        let mut t = t0;
        loop {
            let tri = &self.triangles[t];
            let i = tri.index_of(v);
            match tri.neighbors[(i + 2) % 3] {
                Some(u) if u == t0 => return out,
                Some(u) => {
                    out.push(u);
                    t = u;
                }
                None => break,
            }
        }
        // Hit the hull; sweep clockwise from the start as well.
        let mut t = t0;
        loop {
            let tri = &self.triangles[t];
            let i = tri.index_of(v);
            match tri.neighbors[(i + 1) % 3] {
                Some(u) => {
                    out.push(u);
                    t = u;
                }
                None => return out,
            }
        }
    }

    #[inline]
    fn orient(&self, a: usize, b: usize, c: usize) -> f64 {
        orient2d(self.vertices[a].coord(), self.vertices[b].coord(), self.vertices[c].coord())
    }

    fn push_triangle(&mut self, tri: Triangle) -> usize {
        self.triangles.push(tri);
        let t = self.triangles.len() - 1;
        self.touch(t);
        t
    }

    fn set_triangle(&mut self, t: usize, tri: Triangle) {
        self.triangles[t] = tri;
        self.touch(t);
    }

    /// Refreshes per-vertex and hull bookkeeping after triangle `t` changed.
    fn touch(&mut self, t: usize) {
        let tri = self.triangles[t];
        for &v in &tri.vertices {
            self.vertex_triangle[v] = t;
        }
        if let Some(hull) = self.hull.as_mut() {
            for i in 0..3 {
                if tri.neighbors[i].is_none() {
                    hull.edge_triangle[tri.vertices[(i + 1) % 3]] = t;
                }
            }
        }
    }

    fn replace_neighbor(&mut self, t: Option<usize>, old: usize, new: usize) {
        if let Some(t) = t {
            let i = self.triangles[t].index_of_neighbor(old);
            self.triangles[t].neighbors[i] = Some(new);
        }
    }

    /// Initial fan from `apex` over the collinear, sorted `chain`.
    fn seed_fan(&mut self, chain: &[usize], apex: usize) {
        let ccw = self.orient(chain[0], chain[1], apex) > 0.0;
        let first = self.triangles.len();
        let m = chain.len() - 1;
        for j in 0..m {
            let (a, b) = if ccw { (chain[j], chain[j + 1]) } else { (chain[j + 1], chain[j]) };
            // Triangle [a, b, apex]; the edges (b, apex) and (apex, a) are
            // shared with the fan neighbors.
            let (to_next, to_prev) = (
                (j + 1 < m).then_some(first + j + 1),
                (j > 0).then(|| first + j - 1),
            );
            let neighbors = if ccw {
                [to_next, to_prev, None]
            } else {
                [to_prev, to_next, None]
            };
            self.push_triangle(Triangle {
                vertices: [a, b, apex],
                neighbors,
            });
        }
        let hull = self.hull.as_mut().expect("hull active during construction");
        let mut ring: Vec<usize> = chain.to_vec();
        if !ccw {
            ring.reverse();
        }
        ring.push(apex);
        for w in 0..ring.len() {
            let (a, b) = (ring[w], ring[(w + 1) % ring.len()]);
            hull.next[a] = b;
            hull.prev[b] = a;
        }
    }

    fn hull_edge_visible(&self, v: usize, p: usize) -> bool {
        let hull = self.hull.as_ref().expect("hull active during construction");
        self.orient(v, hull.next[v], p) < 0.0
    }

    /// Adds `p`, which lies strictly outside the current hull, by fanning it
    /// to every visible hull edge. `near` is a hull vertex close to `p`.
    fn insert_outside(&mut self, p: usize, near: usize) {
        let next = |tin: &Tin, v: usize| tin.hull.as_ref().unwrap().next[v];
        let prev = |tin: &Tin, v: usize| tin.hull.as_ref().unwrap().prev[v];

        let mut first = if self.hull_edge_visible(near, p) {
            near
        } else if self.hull_edge_visible(prev(self, near), p) {
            prev(self, near)
        } else {
            let mut v = next(self, near);
            while !self.hull_edge_visible(v, p) {
                assert_ne!(v, near, "a point outside the hull sees at least one edge");
                v = next(self, v);
            }
            v
        };
        // Visible edges form one contiguous run; never the whole ring.
        while self.hull_edge_visible(prev(self, first), p) {
            first = prev(self, first);
        }
        let mut chain = vec![first];
        let mut v = first;
        while self.hull_edge_visible(v, p) {
            v = next(self, v);
            chain.push(v);
        }

        let base = self.triangles.len();
        let m = chain.len() - 1;
        for j in 0..m {
            let (u, w) = (chain[j], chain[j + 1]);
            let old = self.hull.as_ref().unwrap().edge_triangle[u];
            let t = base + j;
            let tri = Triangle {
                vertices: [w, u, p],
                neighbors: [
                    (j > 0).then(|| t - 1),
                    (j + 1 < m).then_some(t + 1),
                    Some(old),
                ],
            };
            let old_tri = &self.triangles[old];
            // Edge (u, w) of `old` is opposite its third vertex.
            let e = (0..3)
                .find(|&i| old_tri.vertices[i] != u && old_tri.vertices[i] != w)
                .expect("hull edge triangle holds the edge");
            self.triangles[old].neighbors[e] = Some(t);
            self.push_triangle(tri);
        }
        {
            let hull = self.hull.as_mut().unwrap();
            for &mid in &chain[1..m] {
                hull.next[mid] = NIL;
                hull.prev[mid] = NIL;
            }
            let (a, b) = (chain[0], chain[m]);
            hull.next[a] = p;
            hull.prev[p] = a;
            hull.next[p] = b;
            hull.prev[b] = p;
            hull.edge_triangle[a] = base;
            hull.edge_triangle[p] = base + m - 1;
        }
        let stack: Vec<usize> = (base..base + m).collect();
        self.legalize(p, stack);
    }

    fn split_triangle(&mut self, t: usize, p: usize) {
        let Triangle {
            vertices: [a, b, c],
            neighbors: [na, nb, nc],
        } = self.triangles[t];
        let tb = self.triangles.len();
        let tc = tb + 1;
        self.set_triangle(t, Triangle {
            vertices: [p, b, c],
            neighbors: [na, Some(tb), Some(tc)],
        });
        self.push_triangle(Triangle {
            vertices: [p, c, a],
            neighbors: [nb, Some(tc), Some(t)],
        });
        self.push_triangle(Triangle {
            vertices: [p, a, b],
            neighbors: [nc, Some(t), Some(tb)],
        });
        self.replace_neighbor(nb, t, tb);
        self.replace_neighbor(nc, t, tc);
        self.legalize(p, vec![t, tb, tc]);
    }

    fn split_edge(&mut self, t: usize, edge: usize, p: usize) {
        let tri = self.triangles[t];
        let c = tri.vertices[edge];
        let a = tri.vertices[(edge + 1) % 3];
        let b = tri.vertices[(edge + 2) % 3];
        let n_bc = tri.neighbors[(edge + 1) % 3];
        let n_ca = tri.neighbors[(edge + 2) % 3];
        let across = tri.neighbors[edge];

        let t2 = self.triangles.len();
        let mut stack = vec![t, t2];
        match across {
            None => {
                self.set_triangle(t, Triangle {
                    vertices: [c, a, p],
                    neighbors: [None, Some(t2), n_ca],
                });
                self.push_triangle(Triangle {
                    vertices: [c, p, b],
                    neighbors: [None, n_bc, Some(t)],
                });
                self.replace_neighbor(n_bc, t, t2);
            }
            Some(u) => {
                let ut = self.triangles[u];
                let j = ut.index_of_neighbor(t);
                let d = ut.vertices[j];
                // ut = [d, b, a] up to rotation.
                let n_db = ut.neighbors[ut.index_of(a)];
                let n_ad = ut.neighbors[ut.index_of(b)];
                let u2 = t2 + 1;
                self.set_triangle(t, Triangle {
                    vertices: [c, a, p],
                    neighbors: [Some(u2), Some(t2), n_ca],
                });
                self.push_triangle(Triangle {
                    vertices: [c, p, b],
                    neighbors: [Some(u), n_bc, Some(t)],
                });
                self.set_triangle(u, Triangle {
                    vertices: [d, b, p],
                    neighbors: [Some(t2), Some(u2), n_db],
                });
                self.push_triangle(Triangle {
                    vertices: [d, p, a],
                    neighbors: [Some(t), n_ad, Some(u)],
                });
                self.replace_neighbor(n_bc, t, t2);
                self.replace_neighbor(n_ad, u, u2);
                stack.extend([u, u2]);
            }
        }
        self.legalize(p, stack);
    }

    /// Lawson flips on the edges opposite `p` until all are locally Delaunay.
    fn legalize(&mut self, p: usize, mut stack: Vec<usize>) {
        while let Some(t) = stack.pop() {
            let tri = self.triangles[t];
            let i = tri.index_of(p);
            let Some(u) = tri.neighbors[i] else { continue };
            let a = tri.vertices[(i + 1) % 3];
            let b = tri.vertices[(i + 2) % 3];
            let ut = self.triangles[u];
            let j = ut.index_of_neighbor(t);
            let q = ut.vertices[j];
            if !self.should_flip(p, a, b, q) {
                continue;
            }
            let n_bp = tri.neighbors[(i + 1) % 3];
            let n_pa = tri.neighbors[(i + 2) % 3];
            let n_aq = ut.neighbors[ut.index_of(b)];
            let n_qb = ut.neighbors[ut.index_of(a)];
            self.set_triangle(t, Triangle {
                vertices: [p, a, q],
                neighbors: [n_aq, Some(u), n_pa],
            });
            self.set_triangle(u, Triangle {
                vertices: [p, q, b],
                neighbors: [n_qb, n_bp, Some(t)],
            });
            self.replace_neighbor(n_aq, u, t);
            self.replace_neighbor(n_bp, t, u);
            stack.push(t);
            stack.push(u);
        }
    }

    /// `(p, a, b)` is counter-clockwise and `q` lies across edge `(a, b)`.
    fn should_flip(&self, p: usize, a: usize, b: usize, q: usize) -> bool {
        let det = incircle(
            self.vertices[p].coord(),
            self.vertices[a].coord(),
            self.vertices[b].coord(),
            self.vertices[q].coord(),
        );
        det > 0.0 || (det == 0.0 && p.min(q) < a.min(b))
    }

    // ── Triangle metrics ────────────────────────────────────────────────

    /// Signed XY area of triangle `t` (positive for counter-clockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_corners(t);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
    }

    fn check_nondegenerate(&self, t: usize) -> Result<[Vertex; 3]> {
        let area = self.signed_area(t);
        if area.abs() <= AREA_EPS {
            return Err(Error::degenerate(format!("triangle {t} has area {area:e}")));
        }
        Ok(self.triangle_corners(t))
    }

    /// Elevation of triangle `t`'s supporting plane at `(x, y)`.
    pub fn plane_z(&self, t: usize, x: f64, y: f64) -> Result<f64> {
        let [a, b, c] = self.check_nondegenerate(t)?;
        Ok(barycentric_z(&a, &b, &c, x, y))
    }

    /// `|p.z − plane_z(p.x, p.y)|` for triangle `t`.
    pub fn vertical_distance(&self, t: usize, p: &Point) -> Result<f64> {
        Ok((p.z - self.plane_z(t, p.x, p.y)?).abs())
    }

    /// Largest angle, in degrees, between triangle `t`'s plane and the
    /// segments joining each of its vertices to `p`.
    pub fn vertex_angle(&self, t: usize, p: &Point) -> Result<f64> {
        let corners = self.check_nondegenerate(t)?;
        let normal = unit_normal(&corners)?;
        let [a, ..] = corners;
        let off = [p.x - a.x, p.y - a.y, p.z - a.z];
        let d_perp = dot(&normal, &off).abs();
        let mut best: f64 = 0.0;
        for v in &corners {
            let seg = [p.x - v.x, p.y - v.y, p.z - v.z];
            let len2 = dot(&seg, &seg);
            if len2.sqrt() <= 1e-12 {
                return Err(Error::degenerate("point coincides with a triangle vertex"));
            }
            let in_plane = (len2 - d_perp * d_perp).max(0.0).sqrt();
            best = best.max(d_perp.atan2(in_plane).to_degrees());
        }
        Ok(best)
    }

    /// Upward unit normal of triangle `t`.
    pub fn normal(&self, t: usize) -> Result<[f64; 3]> {
        unit_normal(&self.check_nondegenerate(t)?)
    }
}

fn barycentric_z(a: &Vertex, b: &Vertex, c: &Vertex, x: f64, y: f64) -> f64 {
    let det = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
    let l1 = ((b.y - c.y) * (x - c.x) + (c.x - b.x) * (y - c.y)) / det;
    let l2 = ((c.y - a.y) * (x - c.x) + (a.x - c.x) * (y - c.y)) / det;
    let l3 = 1.0 - l1 - l2;
    l1 * a.z + l2 * b.z + l3 * c.z
}

#[inline]
pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Unit normal of a triangle, oriented so its z component is non-negative.
pub(crate) fn unit_normal(corners: &[Vertex; 3]) -> Result<[f64; 3]> {
    let [a, b, c] = corners.map(|v| v.xyz());
    let mut n = cross(&sub(&b, &a), &sub(&c, &a));
    let len = dot(&n, &n).sqrt();
    if len <= 1e-300 {
        return Err(Error::degenerate("zero-area triangle has no normal"));
    }
    if n[2] < 0.0 {
        n = n.map(|x| -x);
    }
    Ok(n.map(|x| x / len))
}
