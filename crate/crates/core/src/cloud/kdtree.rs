use super::Point;
use crate::{Error, Result};

const LEAF_SIZE: usize = 8;

/// Balanced 3-d tree over point positions. Immutable once built.
///
/// The tree is implicit: each subrange `[lo, hi)` of the node arrays stores
/// its splitting element at the midpoint, split along the subrange's widest
/// axis. Coordinates are kept in tree order so leaf scans read memory
/// sequentially.
#[derive(Debug, Clone)]
pub struct KdTree {
    coords: Vec<[f64; 3]>,
    /// Original point index of each tree slot.
    ids: Vec<usize>,
    /// Split axis of the node whose midpoint is this slot.
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[Point]) -> KdTree {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<usize> = (0..coords.len()).collect();
        let mut axes = vec![0u8; coords.len()];
        build_rec(&coords, &mut order, &mut axes);
        KdTree {
            coords: order.iter().map(|&i| coords[i]).collect(),
            ids: order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Indices of all points with `‖q − p‖ ≤ r`, ascending.
    pub fn within_radius(&self, p: &Point, r: f64) -> Result<Vec<usize>> {
        check_radius(r)?;
        let mut out = Vec::new();
        self.visit(0, self.len(), [p.x, p.y, p.z], r * r, &mut |i, _| {
            out.push(i);
            true
        });
        out.sort_unstable();
        Ok(out)
    }

    /// Number of indexed points within `r` of `p`, not counting `p` itself.
    ///
    /// Self-exclusion removes exactly one indexed point coincident with `p`
    /// when one exists, so duplicated returns still see each other.
    pub fn count_within_radius(&self, p: &Point, r: f64) -> Result<usize> {
        check_radius(r)?;
        let mut count = 0usize;
        let mut coincident = false;
        self.visit(0, self.len(), [p.x, p.y, p.z], r * r, &mut |_, d2| {
            count += 1;
            coincident |= d2 == 0.0;
            true
        });
        Ok(count - usize::from(coincident))
    }

    /// `count_within_radius(p, r) >= k`, stopping the search as soon as the
    /// answer is known.
    pub fn has_at_least(&self, p: &Point, r: f64, k: usize) -> Result<bool> {
        check_radius(r)?;
        let (mut count, mut coincident) = (0usize, false);
        self.visit(0, self.len(), [p.x, p.y, p.z], r * r, &mut |_, d2| {
            count += 1;
            coincident |= d2 == 0.0;
            // A coincident point found later would still cost one.
            count <= k
        });
        Ok(count - usize::from(coincident) >= k)
    }

    /// Calls `f(index, d²)` for every point within the radius until it
    /// returns false. Returns false if the search was cut short.
    fn visit(&self, lo: usize, hi: usize, q: [f64; 3], r2: f64, f: &mut impl FnMut(usize, f64) -> bool) -> bool {
        if hi - lo <= LEAF_SIZE {
            for k in lo..hi {
                let d2 = dist2(&self.coords[k], &q);
                if d2 <= r2 && !f(self.ids[k], d2) {
                    return false;
                }
            }
            return true;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axes[mid] as usize;
        let sp = &self.coords[mid];
        let d2 = dist2(sp, &q);
        if d2 <= r2 && !f(self.ids[mid], d2) {
            return false;
        }
        let diff = q[axis] - sp[axis];
        if (diff <= 0.0 || diff * diff <= r2) && !self.visit(lo, mid, q, r2, f) {
            return false;
        }
        if diff >= 0.0 || diff * diff <= r2 {
            return self.visit(mid + 1, hi, q, r2, f);
        }
        true
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("search radius must be positive, got {r}")))
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build_rec(coords: &[[f64; 3]], order: &mut [usize], axes: &mut [u8]) {
    if order.len() <= LEAF_SIZE {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(coords[i][a]);
            hi[a] = hi[a].max(coords[i][a]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| coords[a][axis].total_cmp(&coords[b][axis]));
    axes[mid] = axis as u8;
    let (left, right) = order.split_at_mut(mid);
    let (axes_left, axes_right) = axes.split_at_mut(mid);
    build_rec(coords, left, axes_left);
    build_rec(coords, &mut right[1..], &mut axes_right[1..]);
}
