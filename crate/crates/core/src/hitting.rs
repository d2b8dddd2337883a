//! Monte Carlo hitting estimators: does the sheet restricted to a time set
//! reach a state set, how large is the intersection when it does, and the
//! matching probe for the additive stable field.
//!
//! A "hit at level epsilon" means some lattice image point comes within
//! epsilon of the target set. Each path records its minimal distance once,
//! so the hit indicators are exactly nested across the epsilon schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{classify_capacity_trend, riesz_min_energy, CapacityTrend, SolverParams};
use crate::dimension::{box_dimension, BoxMetric};
use crate::error::{Error, Result};
use crate::geometry::{discretize_set, DiscretizeLimits, SetDistance, SetSpec};
use crate::simulate::{path_rng, sample_additive_stable_with, sample_sheet_with};
use crate::util::{linear_fit, wilson_halfwidth};

/// Hard ceiling on Monte Carlo path counts.
pub const MAX_PATHS: usize = 1_000_000;

/// Decay exponents above this value read as "the rate is heading to zero".
const DECAY_EXPONENT_CUTOFF: f64 = 0.08;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HitParams {
    pub n_paths: usize,
    /// Time lattice pitch; must not exceed (min epsilon)^2 / 4 so the sheet
    /// cannot wander more than the hit tolerance between lattice nodes.
    pub lattice_resolution: f64,
    pub seed: u64,
    pub max_nodes: usize,
}

impl Default for HitParams {
    fn default() -> Self {
        HitParams {
            n_paths: 2000,
            lattice_resolution: 1e-3,
            seed: 0,
            max_nodes: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HitEstimate {
    pub epsilon_schedule: Vec<f64>,
    pub rates: Vec<f64>,
    pub wilson_halfwidths: Vec<f64>,
    pub n_paths: usize,
    /// Extrapolated hit rate at epsilon -> 0.
    pub floor: f64,
    /// Fitted slope of ln rate against ln epsilon; near 0 when the rate
    /// stabilizes, positive when it decays with epsilon.
    pub decay_exponent: f64,
    /// Whether the floor clears twice the Wilson halfwidth at the finest
    /// epsilon, i.e. the evidence supports a genuinely positive limit.
    pub positive: bool,
}

fn validate_epsilons(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidInput("empty epsilon schedule".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput("epsilons must be positive and finite".into()));
    }
    if eps.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidInput(
            "epsilon schedule must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn validate_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    if n_paths > MAX_PATHS {
        return Err(Error::ResourceLimit(format!(
            "{n_paths} paths exceeds the ceiling of {MAX_PATHS}"
        )));
    }
    Ok(())
}

/// Product time lattice covering the discretization of a time set: per-axis
/// sorted unique representative coordinates, plus the flat node index of
/// every representative.
struct TimeLattice {
    axes: Vec<Vec<f64>>,
    rep_flats: Vec<usize>,
}

fn build_time_lattice(spec: &SetSpec, resolution: f64, max_nodes: usize) -> Result<TimeLattice> {
    let (lo, _) = spec.bounding_box();
    if lo.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidInput(
            "time set must be strictly positive in every coordinate".into(),
        ));
    }
    let cells = discretize_set(spec, resolution, &DiscretizeLimits::default())?;
    let rank = spec.ambient_dim();
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); rank];
    for cell in &cells {
        for (axis, &x) in axes.iter_mut().zip(&cell.rep) {
            axis.push(x);
        }
    }
    for axis in axes.iter_mut() {
        axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        axis.dedup();
    }
    let n_nodes: usize = axes.iter().map(|a| a.len()).product();
    if n_nodes > max_nodes {
        return Err(Error::ResourceLimit(format!(
            "time lattice needs {n_nodes} nodes, cap is {max_nodes}"
        )));
    }
    // Representatives sit exactly on lattice nodes by construction.
    let mut rep_flats = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut flat = 0usize;
        for (axis, &x) in axes.iter().zip(&cell.rep) {
            let i = axis
                .binary_search_by(|v| v.partial_cmp(&x).unwrap())
                .expect("representative off its own lattice");
            flat = flat * axis.len() + i;
        }
        rep_flats.push(flat);
    }
    Ok(TimeLattice { axes, rep_flats })
}

/// Estimate the probability that the sheet image of `time_set` meets
/// `space_set`, across a decreasing epsilon schedule, with a floor
/// extrapolation toward epsilon = 0.
pub fn estimate_hit_prob(
    time_set: &SetSpec,
    space_set: &SetSpec,
    eps_schedule: &[f64],
    params: &HitParams,
) -> Result<HitEstimate> {
    validate_epsilons(eps_schedule)?;
    validate_paths(params.n_paths)?;
    let eps_min = *eps_schedule.last().unwrap();
    if !(params.lattice_resolution > 0.0)
        || params.lattice_resolution > eps_min * eps_min / 4.0
    {
        return Err(Error::InvalidInput(format!(
            "lattice resolution {} must be positive and at most (min epsilon)^2/4 = {}",
            params.lattice_resolution,
            eps_min * eps_min / 4.0
        )));
    }
    space_set.validate()?;
    let lattice = build_time_lattice(time_set, params.lattice_resolution, params.max_nodes)?;
    let target = SetDistance::build(space_set, eps_min / 4.0)?;
    let d = space_set.ambient_dim();

    let min_dists: Vec<f64> = (0..params.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(params.seed, i);
            let path = sample_sheet_with(&mut rng, &lattice.axes, d, params.seed)?;
            let values = path.values();
            let mut best = f64::INFINITY;
            for &flat in &lattice.rep_flats {
                let dist = target.distance(&values[flat * d..(flat + 1) * d]);
                if dist < best {
                    best = dist;
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = params.n_paths;
    let mut rates = Vec::with_capacity(eps_schedule.len());
    let mut halfwidths = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let hits = min_dists.iter().filter(|&&m| m < eps).count();
        rates.push(hits as f64 / n as f64);
        halfwidths.push(wilson_halfwidth(hits, n));
    }

    let pts: Vec<(f64, f64)> = eps_schedule
        .iter()
        .zip(&rates)
        .filter(|(_, &r)| r > 0.0)
        .map(|(&e, &r)| (e.ln(), r.ln()))
        .collect();
    // The extrapolation cares about the limit, so fit the tail of the
    // schedule: a positive limit plus an O(eps^theta) correction looks like
    // decay at coarse eps and only flattens near the end.
    let tail = pts.len().div_ceil(2).max(3).min(pts.len());
    let pts = &pts[pts.len() - tail..];
    let decay_exponent = if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        linear_fit(&xs, &ys).0
    } else {
        0.0
    };
    let rate_at_min = *rates.last().unwrap();
    let floor = if pts.len() >= 2 && decay_exponent > DECAY_EXPONENT_CUTOFF {
        0.0
    } else {
        rate_at_min
    };
    let positive = floor > 2.0 * *halfwidths.last().unwrap();

    Ok(HitEstimate {
        epsilon_schedule: eps_schedule.to_vec(),
        rates,
        wilson_halfwidths: halfwidths,
        n_paths: n,
        floor,
        decay_exponent,
        positive,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntersectionDimStat {
    /// Box-dimension estimate of the hit image per path; None when the path
    /// collected fewer than `min_points` hit points.
    pub per_path: Vec<Option<f64>>,
    /// Largest per-path estimate, the Monte Carlo stand-in for the essential
    /// supremum over realizations.
    pub ess_sup: Option<f64>,
    pub n_hit_paths: usize,
    pub min_points: usize,
    pub epsilon: f64,
}

/// Estimate the dimension of the intersection of the sheet image with the
/// state set: per path, box-count the image points that land within
/// `epsilon` of the target, on dyadic scales from 1/2 down to epsilon.
pub fn estimate_intersection_dim(
    time_set: &SetSpec,
    space_set: &SetSpec,
    epsilon: f64,
    params: &HitParams,
    min_points: usize,
) -> Result<IntersectionDimStat> {
    if !(epsilon > 0.0 && epsilon <= 0.25) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be in (0, 0.25] to leave room for a scale fit, got {epsilon}"
        )));
    }
    if min_points < 2 {
        return Err(Error::InvalidInput("min_points must be at least 2".into()));
    }
    validate_paths(params.n_paths)?;
    if !(params.lattice_resolution > 0.0) || params.lattice_resolution > epsilon * epsilon / 4.0 {
        return Err(Error::InvalidInput(format!(
            "lattice resolution {} must be positive and at most epsilon^2/4 = {}",
            params.lattice_resolution,
            epsilon * epsilon / 4.0
        )));
    }
    space_set.validate()?;
    let lattice = build_time_lattice(time_set, params.lattice_resolution, params.max_nodes)?;
    let target = SetDistance::build(space_set, epsilon / 4.0)?;
    let d = space_set.ambient_dim();
    let k_max = (1.0 / epsilon).log2().ceil() as i32;
    let scales: Vec<f64> = (1..=k_max).map(|k| (2.0f64).powi(-k)).collect();

    let per_path: Vec<Option<f64>> = (0..params.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(params.seed, i);
            let path = sample_sheet_with(&mut rng, &lattice.axes, d, params.seed)?;
            let values = path.values();
            let mut hit_points: Vec<Vec<f64>> = Vec::new();
            for &flat in &lattice.rep_flats {
                let x = &values[flat * d..(flat + 1) * d];
                if target.distance(x) < epsilon {
                    hit_points.push(x.to_vec());
                }
            }
            if hit_points.len() < min_points {
                return Ok(None);
            }
            let rep = box_dimension(&hit_points, BoxMetric::Euclidean, &scales)?;
            Ok(Some(rep.estimate))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;

    let n_hit_paths = per_path.iter().filter(|p| p.is_some()).count();
    let ess_sup = per_path
        .iter()
        .flatten()
        .copied()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));

    Ok(IntersectionDimStat {
        per_path,
        ess_sup,
        n_hit_paths,
        min_points,
        epsilon,
    })
}

/// Settings for the additive stable field hitting probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodimProbe {
    pub alpha: f64,
    /// Number of time axes of the field.
    pub time_rank: usize,
    /// Field sampled on [u_hole, u_box]^time_rank; the hole keeps the
    /// degenerate corner at 0 out of the grid.
    pub u_box: f64,
    pub u_hole: f64,
    pub u_cells: usize,
    pub epsilon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Target discretization resolutions, coarse to fine, for the Riesz
    /// energy trend at exponent gamma = d - alpha * time_rank.
    pub cap_resolutions: Vec<f64>,
    pub solver: SolverParams,
    /// Per-refinement energy growth that reads as divergence.
    pub growth_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodimReport {
    /// Riesz exponent d - alpha * time_rank matched by the field's range.
    pub gamma: f64,
    pub hits: usize,
    pub n_paths: usize,
    pub hit_rate: f64,
    pub capacity_positive: bool,
    pub trend_energies: Vec<f64>,
}

/// Probe whether the additive stable field hits `space_set`, and compare
/// against the Riesz capacity of the target at the matching exponent. The
/// field's range behaves like a gamma-codimensional object, so hits should
/// occur exactly when the gamma-capacity of the target is positive.
pub fn codimension_probe(space_set: &SetSpec, probe: &CodimProbe) -> Result<CodimReport> {
    if !(probe.alpha > 0.0 && probe.alpha <= 2.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be in (0, 2], got {}",
            probe.alpha
        )));
    }
    if probe.time_rank == 0 || probe.time_rank > 3 {
        return Err(Error::Unsupported(format!(
            "time rank {} outside the supported range 1..=3",
            probe.time_rank
        )));
    }
    if !(probe.u_hole > 0.0 && probe.u_box > probe.u_hole && probe.u_box.is_finite()) {
        return Err(Error::InvalidInput(
            "need 0 < u_hole < u_box < inf".into(),
        ));
    }
    if probe.u_cells < 2 {
        return Err(Error::InvalidInput("u_cells must be at least 2".into()));
    }
    if !(probe.epsilon > 0.0 && probe.epsilon.is_finite()) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    validate_paths(probe.n_paths)?;
    if probe.cap_resolutions.is_empty()
        || probe.cap_resolutions.windows(2).any(|p| p[1] >= p[0])
    {
        return Err(Error::InvalidInput(
            "cap_resolutions must be nonempty and strictly decreasing".into(),
        ));
    }
    space_set.validate()?;
    let d = space_set.ambient_dim();
    let gamma = d as f64 - probe.alpha * probe.time_rank as f64;
    if gamma <= 0.0 {
        return Err(Error::Unsupported(format!(
            "field codimension d - alpha n = {gamma} is not positive; the range is space-filling"
        )));
    }
    let n_nodes = (probe.u_cells as f64).powi(probe.time_rank as i32);
    if n_nodes > (1 << 20) as f64 {
        return Err(Error::ResourceLimit(format!(
            "{n_nodes} field nodes exceeds the cap of {}",
            1 << 20
        )));
    }

    let grid: Vec<f64> = (0..probe.u_cells)
        .map(|k| {
            probe.u_hole
                + (probe.u_box - probe.u_hole) * k as f64 / (probe.u_cells - 1) as f64
        })
        .collect();
    let grids: Vec<Vec<f64>> = vec![grid; probe.time_rank];
    let target = SetDistance::build(space_set, probe.epsilon / 4.0)?;

    let hit_flags: Vec<bool> = (0..probe.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(probe.seed, i);
            let path = sample_additive_stable_with(&mut rng, &grids, d, probe.alpha, probe.seed)?;
            let mut idx = vec![0usize; probe.time_rank];
            let mut x = vec![0.0f64; d];
            loop {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (j, &i_ax) in idx.iter().enumerate() {
                    let m = &path.marginal(j)[i_ax * d..(i_ax + 1) * d];
                    for (xv, mv) in x.iter_mut().zip(m) {
                        *xv += mv;
                    }
                }
                if target.distance(&x) < probe.epsilon {
                    return Ok(true);
                }
                let mut axis = 0;
                loop {
                    if axis == probe.time_rank {
                        return Ok(false);
                    }
                    idx[axis] += 1;
                    if idx[axis] < probe.u_cells {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
            }
        })
        .collect::<Result<Vec<bool>>>()?;
    let hits = hit_flags.iter().filter(|&&h| h).count();

    // Capacity side: Riesz energies of successively finer discretizations.
    let cap_limits = DiscretizeLimits {
        max_cells: 4096,
        ..DiscretizeLimits::default()
    };
    let mut trend_energies = Vec::with_capacity(probe.cap_resolutions.len());
    for &res in &probe.cap_resolutions {
        let cells = discretize_set(space_set, res, &cap_limits)?;
        let points: Vec<Vec<f64>> = cells.into_iter().map(|c| c.rep).collect();
        trend_energies.push(riesz_min_energy(&points, gamma, &probe.solver)?);
    }
    let capacity_positive = classify_capacity_trend(
        &trend_energies,
        probe.solver.divergence_threshold,
        probe.growth_factor,
    ) == CapacityTrend::Positive;

    Ok(CodimReport {
        gamma,
        hits,
        n_paths: probe.n_paths,
        hit_rate: hits as f64 / probe.n_paths as f64,
        capacity_positive,
        trend_energies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsistencyVerdict {
    ConsistentHits,
    ConsistentNoHit,
    Inconsistent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub verdict: ConsistencyVerdict,
    pub hit_positive: bool,
    pub capacity_positive: bool,
    pub details: String,
}

/// Cross-check a Monte Carlo hit estimate against a capacity verdict: the
/// two should agree on positivity.
pub fn capacity_consistency_check(hit: &HitEstimate, capacity_positive: bool) -> ConsistencyReport {
    let verdict = match (hit.positive, capacity_positive) {
        (true, true) => ConsistencyVerdict::ConsistentHits,
        (false, false) => ConsistencyVerdict::ConsistentNoHit,
        _ => ConsistencyVerdict::Inconsistent,
    };
    let details = format!(
        "hit floor {} (decay exponent {}), capacity {}",
        hit.floor,
        hit.decay_exponent,
        if capacity_positive { "positive" } else { "vanishing" }
    );
    ConsistencyReport {
        verdict,
        hit_positive: hit.positive,
        capacity_positive,
        details,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(lo: f64, hi: f64) -> SetSpec {
        SetSpec::IntervalBox {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    fn ball1(center: f64, radius: f64) -> SetSpec {
        SetSpec::Ball {
            center: vec![center],
            radius,
        }
    }

    fn middle_thirds(depth: usize) -> SetSpec {
        SetSpec::SelfSimilarIfs {
            ratio: 1.0 / 3.0,
            offsets: vec![vec![0.0], vec![2.0 / 3.0]],
            depth,
        }
    }

    #[test]
    fn enclosing_ball_is_always_hit() {
        // W(t) for t in [1, 1.2] stays within |W| < 5 with probability
        // essentially 1, and the ball has distance 0 there.
        let params = HitParams {
            n_paths: 300,
            lattice_resolution: 1.0 / 64.0,
            seed: 7,
            max_nodes: 1 << 20,
        };
        let est = estimate_hit_prob(
            &interval(1.0, 1.2),
            &ball1(0.0, 5.0),
            &[0.5, 0.25],
            &params,
        )
        .unwrap();
        assert!(est.rates[1] >= 0.99, "rate {}", est.rates[1]);
        assert!(est.positive);
        assert!((est.floor - est.rates[1]).abs() < 1e-12);
    }

    #[test]
    fn distant_ball_is_never_hit() {
        let params = HitParams {
            n_paths: 300,
            lattice_resolution: 1.0 / 64.0,
            seed: 8,
            max_nodes: 1 << 20,
        };
        let est = estimate_hit_prob(
            &interval(1.0, 1.2),
            &ball1(100.0, 0.5),
            &[0.5, 0.25],
            &params,
        )
        .unwrap();
        assert_eq!(est.rates, vec![0.0, 0.0]);
        assert_eq!(est.floor, 0.0);
        assert!(!est.positive);
    }

    #[test]
    fn rates_are_nested_and_reruns_identical() {
        let params = HitParams {
            n_paths: 400,
            lattice_resolution: 0.0009765625,
            seed: 9,
            max_nodes: 1 << 20,
        };
        let schedule = [0.5, 0.25, 0.125, 0.0625];
        let a = estimate_hit_prob(&interval(1.0, 2.0), &ball1(1.0, 0.1), &schedule, &params)
            .unwrap();
        for w in a.rates.windows(2) {
            assert!(w[1] <= w[0], "rates not nested: {:?}", a.rates);
        }
        let b = estimate_hit_prob(&interval(1.0, 2.0), &ball1(1.0, 0.1), &schedule, &params)
            .unwrap();
        assert_eq!(a.rates, b.rates);
        assert_eq!(a.floor, b.floor);
    }

    #[test]
    fn resolution_coupling_is_enforced() {
        let params = HitParams {
            n_paths: 10,
            lattice_resolution: 0.05, // > 0.25^2 / 4
            seed: 0,
            max_nodes: 1 << 20,
        };
        assert!(matches!(
            estimate_hit_prob(&interval(1.0, 2.0), &ball1(0.0, 1.0), &[0.5, 0.25], &params),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn resource_limits_are_reported() {
        let too_many = HitParams {
            n_paths: MAX_PATHS + 1,
            lattice_resolution: 1e-3,
            seed: 0,
            max_nodes: 1 << 20,
        };
        assert!(matches!(
            estimate_hit_prob(&interval(1.0, 2.0), &ball1(0.0, 1.0), &[0.5], &too_many),
            Err(Error::ResourceLimit(_))
        ));
        let tiny_lattice = HitParams {
            n_paths: 10,
            lattice_resolution: 1e-3,
            seed: 0,
            max_nodes: 16,
        };
        assert!(matches!(
            estimate_hit_prob(&interval(1.0, 2.0), &ball1(0.0, 1.0), &[0.5], &tiny_lattice),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn time_set_touching_zero_is_rejected() {
        let params = HitParams {
            n_paths: 10,
            lattice_resolution: 1e-3,
            seed: 0,
            max_nodes: 1 << 20,
        };
        assert!(estimate_hit_prob(&interval(0.0, 1.0), &ball1(0.0, 1.0), &[0.5], &params).is_err());
    }

    #[test]
    fn image_of_an_interval_counts_one_dimensional() {
        // F a fat interval: every node is a hit point, and the image of
        // [1, 2] under a scalar sheet is an interval.
        let params = HitParams {
            n_paths: 40,
            lattice_resolution: 1.0 / 1024.0,
            seed: 3,
            max_nodes: 1 << 20,
        };
        let stat = estimate_intersection_dim(
            &interval(1.0, 2.0),
            &interval(-4.0, 4.0),
            0.0625,
            &params,
            32,
        )
        .unwrap();
        assert_eq!(stat.n_hit_paths, 40);
        let sup = stat.ess_sup.unwrap();
        assert!((sup - 1.0).abs() < 0.35, "ess sup {sup}");
    }

    #[test]
    fn intersection_dim_empty_when_target_far() {
        let params = HitParams {
            n_paths: 30,
            lattice_resolution: 0.0009765625,
            seed: 4,
            max_nodes: 1 << 20,
        };
        let stat = estimate_intersection_dim(
            &interval(1.0, 1.5),
            &ball1(100.0, 0.25),
            0.0625,
            &params,
            4,
        )
        .unwrap();
        assert_eq!(stat.n_hit_paths, 0);
        assert!(stat.ess_sup.is_none());
        assert!(stat.per_path.iter().all(|p| p.is_none()));
    }

    fn base_probe() -> CodimProbe {
        CodimProbe {
            alpha: 0.5,
            time_rank: 1,
            u_box: 1.0,
            u_hole: 0.05,
            u_cells: 48,
            epsilon: 0.05,
            n_paths: 300,
            seed: 17,
            cap_resolutions: vec![0.056, 0.0021, 7.7e-5],
            solver: SolverParams::default(),
            // Calibrated on the middle-thirds ladder: below the set's
            // dimension the last stride ratio settles near 1.44, above it
            // the ratios hold near 1.8.
            growth_factor: 1.55,
        }
    }

    #[test]
    fn codim_probe_classifies_capacity_sides() {
        // gamma = 1 - 0.5 = 0.5 < dim(middle thirds): capacity positive.
        let rep = codimension_probe(&middle_thirds(2), &base_probe()).unwrap();
        assert!((rep.gamma - 0.5).abs() < 1e-12);
        assert_eq!(rep.trend_energies.len(), 3);
        assert!(rep.capacity_positive, "energies {:?}", rep.trend_energies);

        // gamma = 0.8 > dim: energies blow up along refinement.
        let mut probe = base_probe();
        probe.alpha = 0.2;
        probe.n_paths = 50;
        let rep = codimension_probe(&middle_thirds(2), &probe).unwrap();
        assert!((rep.gamma - 0.8).abs() < 1e-12);
        assert!(!rep.capacity_positive, "energies {:?}", rep.trend_energies);
    }

    #[test]
    fn codim_probe_validation() {
        let mut p = base_probe();
        p.alpha = 1.2; // gamma = -0.2
        assert!(matches!(
            codimension_probe(&middle_thirds(3), &p),
            Err(Error::Unsupported(_))
        ));
        let mut p = base_probe();
        p.u_hole = 0.0;
        assert!(codimension_probe(&middle_thirds(3), &p).is_err());
        let mut p = base_probe();
        p.cap_resolutions = vec![0.1, 0.2];
        assert!(codimension_probe(&middle_thirds(3), &p).is_err());
    }

    #[test]
    fn consistency_verdicts() {
        let est = HitEstimate {
            epsilon_schedule: vec![0.5],
            rates: vec![0.4],
            wilson_halfwidths: vec![0.05],
            n_paths: 100,
            floor: 0.4,
            decay_exponent: 0.01,
            positive: true,
        };
        assert_eq!(
            capacity_consistency_check(&est, true).verdict,
            ConsistencyVerdict::ConsistentHits
        );
        assert_eq!(
            capacity_consistency_check(&est, false).verdict,
            ConsistencyVerdict::Inconsistent
        );
        let mut none = est.clone();
        none.positive = false;
        assert_eq!(
            capacity_consistency_check(&none, false).verdict,
            ConsistencyVerdict::ConsistentNoHit
        );
    }
}
