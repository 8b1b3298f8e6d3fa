use rayon::prelude::*;

use super::{KdTree, PointCloud};
use crate::{Error, Result};

/// Flags each point whose neighbor count within `radius` is below `k_min`.
///
/// Every point is judged against the original cloud in one pass; removing
/// a point never changes another point's verdict.
pub fn classify_outliers(cloud: &PointCloud, radius: f64, k_min: usize) -> Result<Vec<bool>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("outlier radius must be positive, got {radius}")));
    }
    if k_min < 1 {
        return Err(Error::param("outlier k_min must be at least 1"));
    }
    let tree = KdTree::build(&cloud.points);
    cloud
        .points
        .par_iter()
        .map(|p| tree.has_at_least(p, radius, k_min).map(|enough| !enough))
        .collect()
}

/// Splits `cloud` into (inliers, outliers), both in input order.
pub fn remove_outliers(
    cloud: &PointCloud,
    radius: f64,
    k_min: usize,
) -> Result<(PointCloud, PointCloud)> {
    let flags = classify_outliers(cloud, radius, k_min)?;
    let (out, inl): (Vec<usize>, Vec<usize>) = (0..cloud.len()).partition(|&i| flags[i]);
    Ok((cloud.select(&inl), cloud.select(&out)))
}
