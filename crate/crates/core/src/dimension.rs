//! Box-counting dimension estimators and the exponent calculus that links
//! product dimensions, capacity positivity, and hitting behaviour.
//!
//! The anisotropic metric scales time by the square root: a box at scale r
//! has side r^2 on time axes and r on state axes, so a smooth curve in time
//! costs 2 and each state direction costs 1.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{all_finite, linear_fit};

/// Metric driving the box grid. `Parabolic` squares the side on the leading
/// `time_axes` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoxMetric {
    Euclidean,
    Parabolic { time_axes: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimReport {
    pub estimate: f64,
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub fit_r2: f64,
    /// Set when every scale sees a single occupied box; the estimate is then
    /// 0 by convention rather than by fit.
    pub degenerate: bool,
}

/// Dyadic scales 2^-3 .. 2^-12, the default fitting range.
pub fn default_scale_schedule() -> Vec<f64> {
    (3..=12).map(|k| (2.0f64).powi(-k)).collect()
}

/// Box-counting dimension of a finite point sample: slope of ln N(r)
/// against ln(1/r) over the given scales.
pub fn box_dimension(points: &[Vec<f64>], metric: BoxMetric, scales: &[f64]) -> Result<DimReport> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points to count".into()));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim || !all_finite(p)) {
        return Err(Error::InvalidInput(
            "points must be finite and share a dimension".into(),
        ));
    }
    if scales.is_empty() || scales.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::InvalidInput("scales must lie in (0, 1)".into()));
    }
    if scales.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidInput("scales must be strictly decreasing".into()));
    }
    let time_axes = match metric {
        BoxMetric::Euclidean => 0,
        BoxMetric::Parabolic { time_axes } => {
            if time_axes == 0 || time_axes > dim {
                return Err(Error::InvalidInput(format!(
                    "time_axes {time_axes} outside 1..={dim}"
                )));
            }
            time_axes
        }
    };

    let mut counts = Vec::with_capacity(scales.len());
    let mut key = vec![0i64; dim];
    for &r in scales {
        let mut boxes: HashSet<Vec<i64>> = HashSet::new();
        for p in points {
            for (axis, (slot, &x)) in key.iter_mut().zip(p).enumerate() {
                let side = if axis < time_axes { r * r } else { r };
                *slot = (x / side).floor() as i64;
            }
            boxes.insert(key.clone());
        }
        counts.push(boxes.len());
    }

    if counts.iter().all(|&c| c == 1) {
        return Ok(DimReport {
            estimate: 0.0,
            scales: scales.to_vec(),
            counts,
            fit_r2: 1.0,
            degenerate: true,
        });
    }
    if scales.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two scales to fit a slope".into(),
        ));
    }
    let xs: Vec<f64> = scales.iter().map(|r| (1.0 / r).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(DimReport {
        estimate: slope,
        scales: scales.to_vec(),
        counts,
        fit_r2: r2,
        degenerate: false,
    })
}

/// Anisotropic dimension bounds for a product of a time set E (counted
/// double) and a state set F, from the Hausdorff and packing dimensions of
/// the factors:
/// dimH F + 2 dimH E <= dim(E x F) <= min(dimH F + 2 dimP E, dimP F + 2 dimH E).
pub fn product_dim_bounds(
    dim_h_e: f64,
    dim_p_e: f64,
    dim_h_f: f64,
    dim_p_f: f64,
) -> Result<(f64, f64)> {
    for (h, p, label) in [(dim_h_e, dim_p_e, "E"), (dim_h_f, dim_p_f, "F")] {
        if !(h.is_finite() && p.is_finite() && h >= 0.0 && h <= p) {
            return Err(Error::InvalidInput(format!(
                "need 0 <= dimH <= dimP for {label}, got ({h}, {p})"
            )));
        }
    }
    let lower = dim_h_f + 2.0 * dim_h_e;
    let upper = (dim_h_f + 2.0 * dim_p_e).min(dim_p_f + 2.0 * dim_h_e);
    Ok((lower, upper))
}

/// Trichotomy of hitting against the state dimension: the product set is
/// non-polar exactly when its anisotropic dimension exceeds d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitVerdict {
    Hits,
    NoHit,
    Critical,
}

pub fn hit_dichotomy(dim_rho: f64, d: usize) -> Result<HitVerdict> {
    if !dim_rho.is_finite() || dim_rho < 0.0 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "dim_rho {dim_rho} and d {d} out of range"
        )));
    }
    let d = d as f64;
    Ok(if dim_rho > d {
        HitVerdict::Hits
    } else if dim_rho < d {
        HitVerdict::NoHit
    } else {
        HitVerdict::Critical
    })
}

/// Two-sided bracket for the critical exponent gamma*: the supremum of
/// exponents whose weighted capacity stays positive.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaStarBracket {
    pub lower: f64,
    pub upper: f64,
    /// Present when the bracket collapses, e.g. whenever Hausdorff and
    /// packing dimensions of the factors coincide.
    pub closed_form: Option<f64>,
}

pub fn gamma_star_bracket(
    dim_rho: f64,
    dim_h_e: f64,
    dim_h_f: f64,
    d: usize,
) -> Result<GammaStarBracket> {
    if d == 0 {
        return Err(Error::InvalidInput("state dimension must be >= 1".into()));
    }
    if !(dim_rho.is_finite() && dim_h_e.is_finite() && dim_h_f.is_finite())
        || dim_rho < 0.0
        || dim_h_e < 0.0
        || dim_h_f < 0.0
    {
        return Err(Error::InvalidInput("dimensions must be finite and >= 0".into()));
    }
    if dim_rho < dim_h_f + 2.0 * dim_h_e - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "dim_rho {dim_rho} below the product lower bound {}",
            dim_h_f + 2.0 * dim_h_e
        )));
    }
    let d = d as f64;
    let (lower, upper) = if dim_rho <= d {
        (0.0, 0.0)
    } else {
        (
            dim_h_f.min(dim_h_f + 2.0 * dim_h_e - d).max(0.0),
            dim_h_f.min(dim_rho - d),
        )
    };
    let closed_form = if (upper - lower).abs() <= 1e-12 {
        Some(lower)
    } else {
        None
    };
    Ok(GammaStarBracket {
        lower,
        upper,
        closed_form,
    })
}

/// gamma* when the factor dimensions are exact (Hausdorff = packing):
/// max(0, dimH F + min(0, 2 dimH E - d)).
pub fn gamma_star_closed_form(dim_h_e: f64, dim_h_f: f64, d: usize) -> Result<f64> {
    if d == 0 || !(dim_h_e.is_finite() && dim_h_f.is_finite()) || dim_h_e < 0.0 || dim_h_f < 0.0 {
        return Err(Error::InvalidInput("invalid dimensions".into()));
    }
    Ok((dim_h_f + (2.0 * dim_h_e - d as f64).min(0.0)).max(0.0))
}

/// Essential-supremum dimension of the intersection of the image with a
/// state set F. When F has positive Lebesgue measure the answer is
/// min(d, 2 dimH E); otherwise the formula needs d >= 2N and reads
/// max(0, dim_rho - d).
pub fn intersection_dim_formula(
    dim_rho: f64,
    dim_h_e: f64,
    n: usize,
    d: usize,
    f_positive_lebesgue: bool,
) -> Result<f64> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("n and d must be >= 1".into()));
    }
    if !(dim_rho.is_finite() && dim_h_e.is_finite()) || dim_rho < 0.0 || dim_h_e < 0.0 {
        return Err(Error::InvalidInput("dimensions must be finite and >= 0".into()));
    }
    if f_positive_lebesgue {
        return Ok((d as f64).min(2.0 * dim_h_e));
    }
    if d < 2 * n {
        return Err(Error::Unsupported(format!(
            "intersection dimension for a thin state set needs d >= 2N, got d={d}, N={n}"
        )));
    }
    Ok((dim_rho - d as f64).max(0.0))
}
