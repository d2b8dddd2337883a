//! Set specifications and their discretizations.
//!
//! Time sets live in (0, inf)^N, space sets in R^d. A discretization is a
//! finite cover by cells, each carrying a representative point inside the set
//! and a half-diameter bounding how far any covered point can be from the
//! representative. Product grids pair a time discretization with a space
//! discretization; the pair index is the row/column index of energy matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{all_finite, dist, norm, Fnv64};

/// Distance in the parabolic metric: max(|s-t|^(1/2), |x-y|).
/// Time components use the square root of their Euclidean gap, so time
/// directions count double in dimension computations.
pub fn parabolic_distance(s: &[f64], x: &[f64], t: &[f64], y: &[f64]) -> Result<f64> {
    if s.len() != t.len() {
        return Err(Error::DimensionMismatch(format!(
            "time points have dims {} and {}",
            s.len(),
            t.len()
        )));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "space points have dims {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(dist(s, t).sqrt().max(dist(x, y)))
}

/// Description of a compact subset of R^n. The IFS variant is represented at
/// finite depth: the set *is* the union of its depth-k cylinder boxes, and
/// refinement studies deepen k through the discretization resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    /// Axis-aligned box [lo_1, hi_1] x ... x [lo_n, hi_n].
    IntervalBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Attractor of the maps x -> ratio * x + offsets[i]. All maps share one
    /// contraction ratio; first-level images must have disjoint interiors.
    SelfSimilarIfs {
        ratio: f64,
        offsets: Vec<Vec<f64>>,
        depth: usize,
    },
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Finite set of points.
    PointCloud { points: Vec<Vec<f64>> },
    /// Union of finitely many sets with a common ambient dimension.
    Union { parts: Vec<SetSpec> },
}

/// One cell of a finite cover: a representative point inside the set and the
/// half-diameter of the covered region around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub rep: Vec<f64>,
    pub half_diameter: f64,
}

/// Budgets for discretization. Exceeding one is an error, never a silent
/// truncation.
#[derive(Debug, Clone, Copy)]
pub struct DiscretizeLimits {
    pub max_cells: usize,
    /// Half-diameter assigned to point-cloud atoms.
    pub atom_radius: f64,
}

impl Default for DiscretizeLimits {
    fn default() -> Self {
        DiscretizeLimits {
            max_cells: 1 << 20,
            atom_radius: 1e-6,
        }
    }
}

impl SetSpec {
    pub fn ambient_dim(&self) -> usize {
        match self {
            SetSpec::IntervalBox { lo, .. } => lo.len(),
            SetSpec::SelfSimilarIfs { offsets, .. } => {
                offsets.first().map(|o| o.len()).unwrap_or(0)
            }
            SetSpec::Ball { center, .. } => center.len(),
            SetSpec::PointCloud { points } => points.first().map(|p| p.len()).unwrap_or(0),
            SetSpec::Union { parts } => parts.first().map(|p| p.ambient_dim()).unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SetSpec::IntervalBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "interval_box lo/hi dims {} vs {}",
                        lo.len(),
                        hi.len()
                    )));
                }
                if !all_finite(lo) || !all_finite(hi) {
                    return Err(Error::InvalidInput("interval_box has non-finite bound".into()));
                }
                for k in 0..lo.len() {
                    if lo[k] >= hi[k] {
                        return Err(Error::InvalidInput(format!(
                            "interval_box degenerate on axis {k}: lo {} >= hi {}",
                            lo[k], hi[k]
                        )));
                    }
                }
                Ok(())
            }
            SetSpec::SelfSimilarIfs { ratio, offsets, .. } => {
                if !(ratio.is_finite() && *ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "ifs ratio must be in (0,1), got {ratio}"
                    )));
                }
                if offsets.is_empty() {
                    return Err(Error::InvalidInput("ifs needs at least one offset".into()));
                }
                let n = offsets[0].len();
                if n == 0 {
                    return Err(Error::InvalidInput("ifs offsets must be non-empty vectors".into()));
                }
                for o in offsets {
                    if o.len() != n {
                        return Err(Error::DimensionMismatch(
                            "ifs offsets have mixed dimensions".into(),
                        ));
                    }
                    if !all_finite(o) {
                        return Err(Error::InvalidInput("ifs offset has non-finite entry".into()));
                    }
                }
                // Open set condition on the bounding box: first-level images
                // must have pairwise disjoint interiors.
                let (lo, hi) = ifs_bounding_box(*ratio, offsets);
                for i in 0..offsets.len() {
                    for j in (i + 1)..offsets.len() {
                        let mut separated = false;
                        for k in 0..n {
                            let (ai, bi) = (ratio * lo[k] + offsets[i][k], ratio * hi[k] + offsets[i][k]);
                            let (aj, bj) = (ratio * lo[k] + offsets[j][k], ratio * hi[k] + offsets[j][k]);
                            if bi <= aj || bj <= ai {
                                separated = true;
                                break;
                            }
                        }
                        if !separated {
                            return Err(Error::InvalidInput(format!(
                                "ifs first-level images {i} and {j} overlap"
                            )));
                        }
                    }
                }
                Ok(())
            }
            SetSpec::Ball { center, radius } => {
                if center.is_empty() || !all_finite(center) {
                    return Err(Error::InvalidInput("ball center invalid".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidInput(format!("ball radius must be > 0, got {radius}")));
                }
                Ok(())
            }
            SetSpec::PointCloud { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidInput("point_cloud is empty".into()));
                }
                let n = points[0].len();
                if n == 0 {
                    return Err(Error::InvalidInput("point_cloud points must be non-empty".into()));
                }
                for p in points {
                    if p.len() != n {
                        return Err(Error::DimensionMismatch(
                            "point_cloud points have mixed dimensions".into(),
                        ));
                    }
                    if !all_finite(p) {
                        return Err(Error::InvalidInput("point_cloud point non-finite".into()));
                    }
                }
                Ok(())
            }
            SetSpec::Union { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidInput("union is empty".into()));
                }
                let n = parts[0].ambient_dim();
                for p in parts {
                    p.validate()?;
                    if p.ambient_dim() != n {
                        return Err(Error::DimensionMismatch(
                            "union parts have mixed ambient dimensions".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Componentwise bounding box of the set (of the finite-depth
    /// representation, for IFS sets; cylinders only shrink it).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            SetSpec::IntervalBox { lo, hi } => (lo.clone(), hi.clone()),
            SetSpec::SelfSimilarIfs { ratio, offsets, .. } => ifs_bounding_box(*ratio, offsets),
            SetSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            SetSpec::PointCloud { points } => {
                let n = points[0].len();
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for p in points {
                    for k in 0..n {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (lo, hi)
            }
            SetSpec::Union { parts } => {
                let n = self.ambient_dim();
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for p in parts {
                    let (l, h) = p.bounding_box();
                    for k in 0..n {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
                (lo, hi)
            }
        }
    }
}

/// Attractor bounding box for maps x -> r x + o_i: every point is a series
/// sum_j r^(j-1) o_(w_j), so componentwise bounds are min/max offset / (1-r).
fn ifs_bounding_box(ratio: f64, offsets: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = offsets[0].len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for o in offsets {
        for k in 0..n {
            lo[k] = lo[k].min(o[k]);
            hi[k] = hi[k].max(o[k]);
        }
    }
    for k in 0..n {
        lo[k] /= 1.0 - ratio;
        hi[k] /= 1.0 - ratio;
    }
    (lo, hi)
}

/// Depth at which level-k cylinders have half-diameter <= resolution,
/// never less than the stored depth.
fn ifs_effective_depth(stored: usize, ratio: f64, half_diam: f64, resolution: f64) -> Result<usize> {
    let mut k = 0usize;
    let mut hd = half_diam;
    while hd > resolution {
        k += 1;
        hd *= ratio;
        if k > 4096 {
            return Err(Error::ResourceLimit(format!(
                "ifs depth needed for resolution {resolution} exceeds 4096"
            )));
        }
    }
    Ok(stored.max(k))
}

/// Cover the set by cells of half-diameter <= resolution (point clouds keep
/// their atom radius; IFS cells refine to max(stored depth, needed depth)).
/// Every representative lies in the set.
pub fn discretize_set(
    spec: &SetSpec,
    resolution: f64,
    limits: &DiscretizeLimits,
) -> Result<Vec<Cell>> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidInput(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    spec.validate()?;
    let cells = match spec {
        SetSpec::IntervalBox { lo, hi } => {
            let n = lo.len();
            let mut counts = Vec::with_capacity(n);
            let mut total = 1.0f64;
            for k in 0..n {
                let c = ((hi[k] - lo[k]) / resolution).ceil().max(1.0);
                total *= c;
                counts.push(c as usize);
            }
            check_cell_budget(total, limits.max_cells)?;
            let sides: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / counts[k] as f64).collect();
            let hd = 0.5 * norm(&sides);
            let mut cells = Vec::with_capacity(total as usize);
            let mut idx = vec![0usize; n];
            loop {
                let rep: Vec<f64> = (0..n)
                    .map(|k| lo[k] + (idx[k] as f64 + 0.5) * sides[k])
                    .collect();
                cells.push(Cell {
                    rep,
                    half_diameter: hd,
                });
                if !advance(&mut idx, &counts) {
                    break;
                }
            }
            cells
        }
        SetSpec::SelfSimilarIfs {
            ratio,
            offsets,
            depth,
        } => {
            let (lo, hi) = ifs_bounding_box(*ratio, offsets);
            let hd0 = 0.5 * dist(&lo, &hi);
            let k = ifs_effective_depth(*depth, *ratio, hd0, resolution)?;
            let m = offsets.len() as f64;
            check_cell_budget(m.powi(k as i32), limits.max_cells)?;
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            // Corner offsets of level-j cylinders: c' = o_i + r * c.
            let mut corners: Vec<Vec<f64>> = vec![vec![0.0; lo.len()]];
            let mut scale = 1.0;
            for _ in 0..k {
                let mut next = Vec::with_capacity(corners.len() * offsets.len());
                for o in offsets {
                    for c in &corners {
                        next.push(
                            o.iter()
                                .zip(c)
                                .map(|(oi, ci)| oi + ratio * ci)
                                .collect::<Vec<f64>>(),
                        );
                    }
                }
                corners = next;
                scale *= ratio;
            }
            corners
                .into_iter()
                .map(|c| Cell {
                    rep: c.iter().zip(&center).map(|(ci, mi)| ci + scale * mi).collect(),
                    half_diameter: scale * hd0,
                })
                .collect()
        }
        SetSpec::Ball { center, radius } => {
            let n = center.len();
            let per_axis = ((2.0 * radius) / resolution).ceil().max(1.0);
            check_cell_budget(per_axis.powi(n as i32), limits.max_cells)?;
            let m = per_axis as usize;
            let side = 2.0 * radius / per_axis;
            let hd = 0.5 * side * (n as f64).sqrt();
            let counts = vec![m; n];
            let mut cells = Vec::new();
            let mut idx = vec![0usize; n];
            loop {
                // Keep the cell if its closed box meets the ball; project the
                // box center onto the ball so the representative is inside.
                // Projection onto a convex set is 1-Lipschitz, so every ball
                // point in the box stays within one half-diameter of the rep.
                let bc: Vec<f64> = (0..n)
                    .map(|k| center[k] - radius + (idx[k] as f64 + 0.5) * side)
                    .collect();
                let mut box_gap2 = 0.0;
                for k in 0..n {
                    let g = ((center[k] - bc[k]).abs() - 0.5 * side).max(0.0);
                    box_gap2 += g * g;
                }
                if box_gap2.sqrt() <= *radius {
                    let r_c = dist(&bc, center);
                    let rep = if r_c <= *radius {
                        bc
                    } else {
                        bc.iter()
                            .zip(center)
                            .map(|(b, c)| c + (b - c) * radius / r_c)
                            .collect()
                    };
                    cells.push(Cell {
                        rep,
                        half_diameter: hd,
                    });
                }
                if !advance(&mut idx, &counts) {
                    break;
                }
            }
            cells
        }
        SetSpec::PointCloud { points } => {
            check_cell_budget(points.len() as f64, limits.max_cells)?;
            points
                .iter()
                .map(|p| Cell {
                    rep: p.clone(),
                    half_diameter: limits.atom_radius,
                })
                .collect()
        }
        SetSpec::Union { parts } => {
            let mut cells = Vec::new();
            for p in parts {
                cells.extend(discretize_set(p, resolution, limits)?);
                check_cell_budget(cells.len() as f64, limits.max_cells)?;
            }
            cells
        }
    };
    Ok(cells)
}

fn check_cell_budget(count: f64, cap: usize) -> Result<()> {
    if count > cap as f64 {
        return Err(Error::ResourceLimit(format!(
            "discretization would produce {count:.0} cells, cap is {cap}"
        )));
    }
    Ok(())
}

/// Odometer increment over a mixed-radix index. Returns false on wraparound.
fn advance(idx: &mut [usize], counts: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < counts[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Hausdorff and packing dimension where a closed form exists. The two agree
/// for every supported kind; unions have no general closed form.
pub fn closed_form_dimensions(spec: &SetSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    match spec {
        SetSpec::IntervalBox { lo, .. } => {
            let d = lo.len() as f64;
            Ok((d, d))
        }
        SetSpec::Ball { center, .. } => {
            let d = center.len() as f64;
            Ok((d, d))
        }
        SetSpec::PointCloud { .. } => Ok((0.0, 0.0)),
        SetSpec::SelfSimilarIfs { ratio, offsets, .. } => {
            // Similarity dimension log m / log(1/r); the open set condition
            // checked at validation makes it the Hausdorff and packing value.
            let s = (offsets.len() as f64).ln() / (1.0 / ratio).ln();
            Ok((s, s))
        }
        SetSpec::Union { .. } => Err(Error::Unsupported(
            "closed-form dimension is not defined for unions".into(),
        )),
    }
}

/// Product of a time discretization and a space discretization. Pairs are
/// indexed row-major: pair k = (k / n_space, k % n_space).
#[derive(Debug, Clone)]
pub struct ProductGrid {
    pub time_cells: Vec<Cell>,
    pub space_cells: Vec<Cell>,
}

/// Budgets for product grids. The pair count bounds the dense energy matrix,
/// so the default keeps matrices under ~2 GB.
#[derive(Debug, Clone, Copy)]
pub struct GridLimits {
    pub max_pairs: usize,
}

impl Default for GridLimits {
    fn default() -> Self {
        GridLimits { max_pairs: 15_000 }
    }
}

impl ProductGrid {
    pub fn n_pairs(&self) -> usize {
        self.time_cells.len() * self.space_cells.len()
    }

    pub fn n_time(&self) -> usize {
        self.time_cells.len()
    }

    pub fn n_space(&self) -> usize {
        self.space_cells.len()
    }

    /// (time index, space index) of pair k.
    pub fn pair(&self, k: usize) -> (usize, usize) {
        (k / self.space_cells.len(), k % self.space_cells.len())
    }

    /// Order-sensitive hash of all representatives and half-diameters; ties
    /// measures and matrices to the grid they were built from.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u64(self.time_cells.len() as u64);
        h.write_u64(self.space_cells.len() as u64);
        for c in self.time_cells.iter().chain(&self.space_cells) {
            for &v in &c.rep {
                h.write_f64(v);
            }
            h.write_f64(c.half_diameter);
        }
        h.finish()
    }
}

/// Discretize both factors and form their product. The time set must lie
/// strictly inside (0, inf)^N.
pub fn build_product_grid(
    time_set: &SetSpec,
    space_set: &SetSpec,
    time_resolution: f64,
    space_resolution: f64,
    limits: &GridLimits,
) -> Result<ProductGrid> {
    time_set.validate()?;
    space_set.validate()?;
    let (lo, _) = time_set.bounding_box();
    if lo.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidInput(
            "time set must lie strictly inside (0, inf)^N".into(),
        ));
    }
    let cell_limits = DiscretizeLimits {
        max_cells: limits.max_pairs,
        ..DiscretizeLimits::default()
    };
    let time_cells = discretize_set(time_set, time_resolution, &cell_limits)?;
    let space_cells = discretize_set(space_set, space_resolution, &cell_limits)?;
    let pairs = time_cells.len().saturating_mul(space_cells.len());
    if pairs > limits.max_pairs {
        return Err(Error::ResourceLimit(format!(
            "product grid has {pairs} pairs ({} time x {} space), cap is {}",
            time_cells.len(),
            space_cells.len(),
            limits.max_pairs
        )));
    }
    Ok(ProductGrid {
        time_cells,
        space_cells,
    })
}

/// Precomputed Euclidean distance-to-set queries against the finite-depth
/// representation of a spec. IFS sets contribute their cylinder boxes at
/// max(stored depth, depth needed for the given resolution).
#[derive(Debug, Clone)]
pub struct SetDistance {
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
    balls: Vec<(Vec<f64>, f64)>,
    points: Vec<Vec<f64>>,
}

impl SetDistance {
    pub fn build(spec: &SetSpec, resolution: f64) -> Result<Self> {
        spec.validate()?;
        let mut sd = SetDistance {
            boxes: Vec::new(),
            balls: Vec::new(),
            points: Vec::new(),
        };
        sd.collect(spec, resolution)?;
        Ok(sd)
    }

    fn collect(&mut self, spec: &SetSpec, resolution: f64) -> Result<()> {
        match spec {
            SetSpec::IntervalBox { lo, hi } => {
                self.boxes.push((lo.clone(), hi.clone()));
            }
            SetSpec::Ball { center, radius } => {
                self.balls.push((center.clone(), *radius));
            }
            SetSpec::PointCloud { points } => {
                self.points.extend(points.iter().cloned());
            }
            SetSpec::SelfSimilarIfs {
                ratio,
                offsets,
                depth,
            } => {
                let (lo, hi) = ifs_bounding_box(*ratio, offsets);
                let hd0 = 0.5 * dist(&lo, &hi);
                let k = ifs_effective_depth(*depth, *ratio, hd0, resolution)?;
                if (offsets.len() as f64).powi(k as i32) > 4e6 {
                    return Err(Error::ResourceLimit(
                        "ifs distance table would exceed 4e6 boxes".into(),
                    ));
                }
                let mut corners: Vec<Vec<f64>> = vec![vec![0.0; lo.len()]];
                let mut scale = 1.0;
                for _ in 0..k {
                    let mut next = Vec::with_capacity(corners.len() * offsets.len());
                    for o in offsets {
                        for c in &corners {
                            next.push(
                                o.iter()
                                    .zip(c)
                                    .map(|(oi, ci)| oi + ratio * ci)
                                    .collect::<Vec<f64>>(),
                            );
                        }
                    }
                    corners = next;
                    scale *= ratio;
                }
                for c in corners {
                    let blo: Vec<f64> = c.iter().zip(&lo).map(|(ci, l)| ci + scale * l).collect();
                    let bhi: Vec<f64> = c.iter().zip(&hi).map(|(ci, h)| ci + scale * h).collect();
                    self.boxes.push((blo, bhi));
                }
            }
            SetSpec::Union { parts } => {
                for p in parts {
                    self.collect(p, resolution)?;
                }
            }
        }
        Ok(())
    }

    /// Euclidean distance from x to the represented set (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for (lo, hi) in &self.boxes {
            let mut s = 0.0;
            for k in 0..x.len() {
                let g = (lo[k] - x[k]).max(x[k] - hi[k]).max(0.0);
                s += g * g;
                if s >= best * best {
                    break;
                }
            }
            best = best.min(s.sqrt());
        }
        for (c, r) in &self.balls {
            best = best.min((dist(x, c) - r).max(0.0));
        }
        for p in &self.points {
            best = best.min(dist(x, p));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn middle_thirds() -> SetSpec {
        SetSpec::SelfSimilarIfs {
            ratio: 1.0 / 3.0,
            offsets: vec![vec![0.0], vec![2.0 / 3.0]],
            depth: 2,
        }
    }

    #[test]
    fn parabolic_distance_matches_hand_value() {
        // |s-t| = sqrt(5), x = y: distance is 5^(1/4).
        let d = parabolic_distance(&[1.0, 2.0], &[0.3, 0.3], &[2.0, 4.0], &[0.3, 0.3]).unwrap();
        assert!((d - 5.0f64.powf(0.25)).abs() < 1e-15);
        assert!((d - 1.4953487812212205).abs() < 1e-12);
    }

    #[test]
    fn parabolic_distance_takes_space_branch() {
        let d = parabolic_distance(&[1.0], &[0.0], &[1.0009], &[2.0]).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn parabolic_distance_rejects_mismatched_dims() {
        assert!(parabolic_distance(&[1.0], &[0.0], &[1.0, 2.0], &[0.0]).is_err());
        assert!(parabolic_distance(&[1.0], &[0.0], &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn unit_interval_at_quarter_resolution() {
        let spec = SetSpec::IntervalBox {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let cells = discretize_set(&spec, 0.25, &DiscretizeLimits::default()).unwrap();
        assert_eq!(cells.len(), 4);
        let reps: Vec<f64> = cells.iter().map(|c| c.rep[0]).collect();
        assert_eq!(reps, vec![0.125, 0.375, 0.625, 0.875]);
        for c in &cells {
            assert!((c.half_diameter - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn cantor_depth_two_cells() {
        let cells = discretize_set(&middle_thirds(), 1.0, &DiscretizeLimits::default()).unwrap();
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert!((c.half_diameter - 1.0 / 18.0).abs() < 1e-15);
        }
        let mut reps: Vec<f64> = cells.iter().map(|c| c.rep[0]).collect();
        reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [1.0 / 18.0, 5.0 / 18.0, 13.0 / 18.0, 17.0 / 18.0];
        for (r, e) in reps.iter().zip(expect) {
            assert!((r - e).abs() < 1e-15, "rep {r} vs {e}");
        }
    }

    #[test]
    fn cantor_resolution_deepens_past_stored_depth() {
        // Resolution below the depth-2 half-diameter forces extra levels.
        let cells = discretize_set(&middle_thirds(), 1.0 / 60.0, &DiscretizeLimits::default())
            .unwrap();
        // Need (1/2) * 3^-k <= 1/60, so k = 4: 16 cells.
        assert_eq!(cells.len(), 16);
        assert!((cells[0].half_diameter - 0.5 / 81.0).abs() < 1e-15);
    }

    #[test]
    fn ifs_overlapping_images_rejected() {
        let spec = SetSpec::SelfSimilarIfs {
            ratio: 0.6,
            offsets: vec![vec![0.0], vec![0.4]],
            depth: 1,
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn degenerate_interval_rejected() {
        let spec = SetSpec::IntervalBox {
            lo: vec![1.0],
            hi: vec![1.0],
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cell_budget_enforced() {
        let spec = SetSpec::IntervalBox {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let limits = DiscretizeLimits {
            max_cells: 8,
            ..DiscretizeLimits::default()
        };
        assert!(matches!(
            discretize_set(&spec, 0.01, &limits),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn ball_representatives_stay_inside() {
        let spec = SetSpec::Ball {
            center: vec![1.0, -2.0],
            radius: 0.7,
        };
        let cells = discretize_set(&spec, 0.1, &DiscretizeLimits::default()).unwrap();
        assert!(!cells.is_empty());
        for c in &cells {
            assert!(dist(&c.rep, &[1.0, -2.0]) <= 0.7 + 1e-12);
        }
    }

    #[test]
    fn closed_form_dimensions_agree_with_similarity_arithmetic() {
        let (h, p) = closed_form_dimensions(&middle_thirds()).unwrap();
        let expect = 2.0f64.ln() / 3.0f64.ln();
        assert!((h - expect).abs() < 1e-15);
        assert_eq!(h, p);
        assert!((h - 0.6309297535714574).abs() < 1e-12);

        let box2 = SetSpec::IntervalBox {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 2.0],
        };
        assert_eq!(closed_form_dimensions(&box2).unwrap(), (2.0, 2.0));

        let pt = SetSpec::PointCloud {
            points: vec![vec![0.0]],
        };
        assert_eq!(closed_form_dimensions(&pt).unwrap(), (0.0, 0.0));

        let u = SetSpec::Union {
            parts: vec![pt.clone(), pt],
        };
        assert!(closed_form_dimensions(&u).is_err());
    }

    #[test]
    fn product_grid_counts_and_pair_index() {
        let e = SetSpec::IntervalBox {
            lo: vec![1.0],
            hi: vec![2.0],
        };
        let f = SetSpec::IntervalBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        };
        let g = build_product_grid(&e, &f, 0.25, 0.5, &GridLimits::default()).unwrap();
        assert_eq!(g.n_time(), 4);
        assert_eq!(g.n_space(), 4);
        assert_eq!(g.n_pairs(), 16);
        assert_eq!(g.pair(0), (0, 0));
        assert_eq!(g.pair(5), (1, 1));
        assert_eq!(g.pair(15), (3, 3));
    }

    #[test]
    fn product_grid_requires_strictly_positive_times() {
        let e = SetSpec::IntervalBox {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let f = SetSpec::PointCloud {
            points: vec![vec![0.0]],
        };
        assert!(matches!(
            build_product_grid(&e, &f, 0.25, 0.25, &GridLimits::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn product_grid_pair_cap() {
        let e = SetSpec::IntervalBox {
            lo: vec![1.0],
            hi: vec![2.0],
        };
        let f = SetSpec::IntervalBox {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let limits = GridLimits { max_pairs: 10 };
        assert!(matches!(
            build_product_grid(&e, &f, 0.1, 0.1, &limits),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn grid_fingerprint_distinguishes_grids() {
        let e = SetSpec::IntervalBox {
            lo: vec![1.0],
            hi: vec![2.0],
        };
        let f = SetSpec::PointCloud {
            points: vec![vec![0.0]],
        };
        let g1 = build_product_grid(&e, &f, 0.25, 1.0, &GridLimits::default()).unwrap();
        let g2 = build_product_grid(&e, &f, 0.125, 1.0, &GridLimits::default()).unwrap();
        assert_ne!(g1.fingerprint(), g2.fingerprint());
        let g1b = build_product_grid(&e, &f, 0.25, 1.0, &GridLimits::default()).unwrap();
        assert_eq!(g1.fingerprint(), g1b.fingerprint());
    }

    #[test]
    fn set_distance_box_ball_points() {
        let sd = SetDistance::build(
            &SetSpec::IntervalBox {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            0.1,
        )
        .unwrap();
        assert_eq!(sd.distance(&[0.5, 0.5]), 0.0);
        assert!((sd.distance(&[2.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((sd.distance(&[2.0, 2.0]) - 2.0f64.sqrt()).abs() < 1e-15);

        let sd = SetDistance::build(
            &SetSpec::Ball {
                center: vec![0.0],
                radius: 1.0,
            },
            0.1,
        )
        .unwrap();
        assert!((sd.distance(&[3.0]) - 2.0).abs() < 1e-15);
        assert_eq!(sd.distance(&[-0.2]), 0.0);
    }

    #[test]
    fn set_distance_cantor_cylinders() {
        // Depth-2 representation: boxes [0,1/9], [2/9,1/3], [2/3,7/9], [8/9,1].
        let sd = SetDistance::build(&middle_thirds(), 1.0).unwrap();
        assert_eq!(sd.distance(&[1.0 / 18.0]), 0.0);
        assert!((sd.distance(&[0.5]) - (0.5 - 1.0 / 3.0)).abs() < 1e-15);
        assert!((sd.distance(&[1.5]) - 0.5).abs() < 1e-15);
    }
}
