//! Thermal and Riesz energies on product grids, and their capacities.
//!
//! The central object is the energy matrix: kernel evaluations between all
//! pairs of (time cell, space cell) product points. Capacity is the
//! reciprocal of the minimal quadratic energy over probability weights, with
//! an anti-concentration cap per time slice standing in for the "no atom in
//! time" side condition on admissible measures.

pub mod kappa;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ProductGrid;
use crate::util::{all_finite, dist};

/// How the matrix diagonal (a cell paired with itself) is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalPolicy {
    /// Self-energy excluded: diagonal entries are 0.
    #[default]
    Exclude,
    /// Kernel evaluated at an intra-cell displacement of one half-diameter
    /// per factor; a finite proxy for the cell's self-energy.
    CellProxy,
}

/// Heat-type kernel exp(-|x-y|^2 / (2|s-t|)) / (|s-t|^(d/2) |x-y|^gamma)
/// evaluated from the two factor distances.
///
/// Edge rules: equal times with distinct states give 0 (the Gaussian factor
/// vanishes faster than the power blows up); equal times and equal states is
/// the singular diagonal, reported as +inf for the caller to police.
pub fn thermal_kernel_value(time_dist: f64, space_dist: f64, gamma: f64, d: usize) -> f64 {
    debug_assert!(time_dist >= 0.0 && space_dist >= 0.0 && gamma >= 0.0);
    if time_dist == 0.0 {
        return if space_dist == 0.0 { f64::INFINITY } else { 0.0 };
    }
    // 0^0 = 1, so gamma = 0 needs no special case for coincident states.
    let gauss = (-space_dist * space_dist / (2.0 * time_dist)).exp();
    gauss / (time_dist.powf(d as f64 / 2.0) * space_dist.powf(gamma))
}

/// Kernel between explicit points; `d` is taken from the state vectors.
pub fn thermal_kernel(s: &[f64], t: &[f64], x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if s.len() != t.len() || x.len() != y.len() {
        return Err(Error::DimensionMismatch(
            "thermal_kernel arguments disagree".into(),
        ));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma must be finite and >= 0, got {gamma}"
        )));
    }
    Ok(thermal_kernel_value(dist(s, t), dist(x, y), gamma, x.len()))
}

/// Dense symmetric matrix of kernel values over the pairs of a product grid.
#[derive(Debug, Clone)]
pub struct EnergyMatrix {
    n_time: usize,
    n_space: usize,
    gamma: f64,
    policy: DiagonalPolicy,
    grid_fingerprint: u64,
    entries: Vec<f64>,
}

impl EnergyMatrix {
    pub fn n(&self) -> usize {
        self.n_time * self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn policy(&self) -> DiagonalPolicy {
        self.policy
    }

    pub fn grid_fingerprint(&self) -> u64 {
        self.grid_fingerprint
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.n() + b]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.is_finite())
    }

    /// Assemble a matrix from raw entries. `n_time * n_space` must match the
    /// entry count; the slice structure is "pair a belongs to time slice
    /// a / n_space", exactly as for grid-built matrices. Intended for solver
    /// tests and synthetic instances.
    pub fn from_parts(
        entries: Vec<f64>,
        n_time: usize,
        n_space: usize,
        gamma: f64,
        policy: DiagonalPolicy,
    ) -> Result<Self> {
        let n = n_time * n_space;
        if n == 0 || entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n_time}x{n_space} grid, got {}",
                n * n,
                entries.len()
            )));
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let (x, y) = (entries[a * n + b], entries[b * n + a]);
                if x != y && !(x.is_nan() && y.is_nan()) {
                    return Err(Error::InvalidInput(format!(
                        "entries not symmetric at ({a},{b})"
                    )));
                }
            }
        }
        Ok(EnergyMatrix {
            n_time,
            n_space,
            gamma,
            policy,
            grid_fingerprint: 0,
            entries,
        })
    }
}

/// Kernel matrix over all grid pairs. Row/column index is the pair index;
/// same-time off-diagonal entries are 0 by the kernel edge rule, and the
/// diagonal follows `policy`.
pub fn build_energy_matrix(
    grid: &ProductGrid,
    gamma: f64,
    policy: DiagonalPolicy,
) -> Result<EnergyMatrix> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma must be finite and >= 0, got {gamma}"
        )));
    }
    let n_time = grid.n_time();
    let n_space = grid.n_space();
    let n = n_time * n_space;
    if n == 0 {
        return Err(Error::InvalidInput("empty product grid".into()));
    }
    let d = grid.space_cells[0].rep.len();
    let mut entries = vec![0.0f64; n * n];
    entries
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(a, row)| {
            let (i, j) = (a / n_space, a % n_space);
            let ti = &grid.time_cells[i];
            let xj = &grid.space_cells[j];
            for (b, slot) in row.iter_mut().enumerate() {
                if b == a {
                    *slot = match policy {
                        DiagonalPolicy::Exclude => 0.0,
                        DiagonalPolicy::CellProxy => thermal_kernel_value(
                            ti.half_diameter,
                            xj.half_diameter,
                            gamma,
                            d,
                        ),
                    };
                    continue;
                }
                let (k, l) = (b / n_space, b % n_space);
                let r = if i == k {
                    0.0
                } else {
                    dist(&ti.rep, &grid.time_cells[k].rep)
                };
                // Pairs sharing a state cell sit at zero representative
                // distance; for gamma > 0 that would put a spurious +inf off
                // the diagonal, where the continuous energy integrates the
                // state singularity inside the cell. Stand in the intra-cell
                // displacement there so distinct-time entries stay finite.
                // At gamma = 0 the raw value is already the exact limit.
                let mut u = if j == l {
                    0.0
                } else {
                    dist(&xj.rep, &grid.space_cells[l].rep)
                };
                if u == 0.0 && gamma > 0.0 {
                    u = 0.5 * (xj.half_diameter + grid.space_cells[l].half_diameter);
                }
                *slot = thermal_kernel_value(r, u, gamma, d);
            }
        });
    Ok(EnergyMatrix {
        n_time,
        n_space,
        gamma,
        policy,
        grid_fingerprint: grid.fingerprint(),
        entries,
    })
}

/// Probability weights over the pairs of a specific grid. Construction
/// validates the simplex condition and, when the grid has at least two time
/// cells, the per-slice mass cap.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    grid_fingerprint: u64,
    n_space: usize,
}

impl DiscreteMeasure {
    pub fn new(grid: &ProductGrid, weights: Vec<f64>, slice_cap: f64) -> Result<Self> {
        if weights.len() != grid.n_pairs() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a grid with {} pairs",
                weights.len(),
                grid.n_pairs()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        if grid.n_time() >= 2 {
            let n_space = grid.n_space();
            for s in 0..grid.n_time() {
                let mass: f64 = weights[s * n_space..(s + 1) * n_space].iter().sum();
                if mass > slice_cap + 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "time slice {s} carries mass {mass} > cap {slice_cap}"
                    )));
                }
            }
        }
        Ok(DiscreteMeasure {
            weights,
            grid_fingerprint: grid.fingerprint(),
            n_space: grid.n_space(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid_fingerprint(&self) -> u64 {
        self.grid_fingerprint
    }
}

/// w^T K w with the convention that unsupported pairs contribute nothing,
/// so infinite entries only matter where both weights are positive.
pub fn quadratic_energy(weights: &[f64], k: &EnergyMatrix) -> Result<f64> {
    let n = k.n();
    if weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for an order-{n} matrix",
            weights.len()
        )));
    }
    let mut acc = 0.0;
    for a in 0..n {
        let wa = weights[a];
        if wa <= 0.0 {
            continue;
        }
        let row = &k.entries[a * n..(a + 1) * n];
        for b in 0..n {
            let wb = weights[b];
            if wb <= 0.0 {
                continue;
            }
            let e = row[b];
            if e == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
            acc += wa * wb * e;
        }
    }
    Ok(acc)
}

/// Energy of a validated measure against a matrix built on the same grid.
pub fn thermal_energy(mu: &DiscreteMeasure, k: &EnergyMatrix) -> Result<f64> {
    if mu.grid_fingerprint != k.grid_fingerprint {
        return Err(Error::InvalidInput(
            "measure and energy matrix were built on different grids".into(),
        ));
    }
    if mu.n_space != k.n_space {
        return Err(Error::DimensionMismatch(
            "measure and matrix disagree on grid shape".into(),
        ));
    }
    quadratic_energy(&mu.weights, k)
}

/// Minimizer settings. `slice_cap` is the per-time-slice mass bound (1.0
/// disables it); for Riesz problems the same field caps single atoms.
/// `tol` is the Frank-Wolfe gap tolerance relative to max(1, energy).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverParams {
    pub slice_cap: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Energies above this are reported as capacity 0.
    pub divergence_threshold: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            slice_cap: 0.5,
            tol: 1e-8,
            max_iters: 100_000,
            divergence_threshold: 1e12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub weights: Vec<f64>,
    pub energy: f64,
    /// Frank-Wolfe gap at the returned point, relative to max(1, energy).
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize w^T K w over probability weights with per-time-slice caps.
///
/// Frank-Wolfe with exact line search does the bulk of the work; because
/// diagonal-excluded kernel matrices are indefinite, a pairwise-exchange
/// polish (which sees curvature, not just the gradient) follows on small
/// problems, with deterministic multistart on tiny instances. Non-convergence
/// within `max_iters` returns the best point found with `converged = false`.
pub fn minimize_energy(k: &EnergyMatrix, params: &SolverParams) -> Result<MinimizeReport> {
    if !k.is_finite() {
        return Err(Error::InvalidInput(
            "energy matrix has non-finite entries (coincident grid points?)".into(),
        ));
    }
    let n = k.n();
    let slice_of: Vec<usize> = (0..n).map(|a| a / k.n_space).collect();
    minimize_quadratic_sliced(&k.entries, n, &slice_of, k.n_time, params)
}

/// Shared implementation: `slice_of[a]` maps weight a to its cap group.
fn minimize_quadratic_sliced(
    entries: &[f64],
    n: usize,
    slice_of: &[usize],
    n_slices: usize,
    params: &SolverParams,
) -> Result<MinimizeReport> {
    if !(params.slice_cap > 0.0 && params.slice_cap <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "slice_cap must be in (0, 1], got {}",
            params.slice_cap
        )));
    }
    if !(params.tol > 0.0) || params.max_iters == 0 {
        return Err(Error::InvalidInput("tol must be > 0 and max_iters >= 1".into()));
    }
    if params.slice_cap * (n_slices as f64) < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "{n_slices} slices with cap {} cannot carry total mass 1",
            params.slice_cap
        )));
    }
    if !all_finite(entries) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }

    let mut slice_size = vec![0usize; n_slices];
    for &s in slice_of {
        slice_size[s] += 1;
    }
    if slice_size.iter().any(|&c| c == 0) {
        return Err(Error::InvalidInput("empty time slice".into()));
    }

    let uniform: Vec<f64> = (0..n)
        .map(|a| 1.0 / (n_slices as f64 * slice_size[slice_of[a]] as f64))
        .collect();

    let mut best = solve_from(entries, n, slice_of, n_slices, params, uniform);
    if n <= 24 {
        for lead in 0..n {
            let start = concentrated_start(n, slice_of, n_slices, &slice_size, params.slice_cap, lead);
            let cand = solve_from(entries, n, slice_of, n_slices, params, start);
            if cand.energy < best.energy {
                best = cand;
            }
        }
    }
    Ok(best)
}

fn solve_from(
    entries: &[f64],
    n: usize,
    slice_of: &[usize],
    n_slices: usize,
    params: &SolverParams,
    mut w: Vec<f64>,
) -> MinimizeReport {
    let cap = params.slice_cap;
    let matvec = |w: &[f64]| -> Vec<f64> {
        if n >= 256 {
            entries
                .par_chunks(n)
                .map(|row| 2.0 * row.iter().zip(w).map(|(k, x)| k * x).sum::<f64>())
                .collect()
        } else {
            entries
                .chunks(n)
                .map(|row| 2.0 * row.iter().zip(w).map(|(k, x)| k * x).sum::<f64>())
                .collect()
        }
    };

    let mut g = matvec(&w);
    let mut energy = 0.5 * dot(&g, &w);
    let mut gap_rel = f64::INFINITY;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut window_anchor = energy;

    for it in 0..params.max_iters {
        iterations = it + 1;
        // Linear minimization oracle over the capped simplex: each slice
        // offers its cheapest index, slices are filled cheapest-first.
        let mut slice_best: Vec<usize> = vec![usize::MAX; n_slices];
        for a in 0..n {
            let s = slice_of[a];
            if slice_best[s] == usize::MAX || g[a] < g[slice_best[s]] {
                slice_best[s] = a;
            }
        }
        let mut order: Vec<usize> = (0..n_slices).collect();
        order.sort_by(|&p, &q| {
            g[slice_best[p]]
                .partial_cmp(&g[slice_best[q]])
                .unwrap()
                .then(p.cmp(&q))
        });
        let mut v_idx = Vec::with_capacity(n_slices);
        let mut remaining = 1.0f64;
        for s in order {
            if remaining <= 0.0 {
                break;
            }
            let m = cap.min(remaining);
            v_idx.push((slice_best[s], m));
            remaining -= m;
        }

        let g_dot_w = dot(&g, &w);
        let g_dot_v: f64 = v_idx.iter().map(|&(a, m)| g[a] * m).sum();
        let gap = g_dot_w - g_dot_v;
        gap_rel = gap / energy.abs().max(1.0);
        if gap_rel <= params.tol {
            converged = true;
            break;
        }

        // Exact line search along d = v - w for the quadratic objective.
        // d^T K d = e(v) - 2 w^T K v + 2 e(w); assemble from the pieces.
        let kv = {
            // K v, exploiting sparsity of v.
            let mut kv = vec![0.0f64; n];
            for &(a, m) in &v_idx {
                let col = &entries[a * n..(a + 1) * n];
                for b in 0..n {
                    kv[b] += col[b] * m;
                }
            }
            kv
        };
        let w_kv = dot(&w, &kv);
        let v_kv: f64 = v_idx.iter().map(|&(a, m)| kv[a] * m).sum();
        let d_kd = v_kv - 2.0 * w_kv + 2.0 * energy;
        let d_kw = w_kv - 2.0 * energy; // d^T K w = v^T K w - w^T K w
        let eta = if d_kd > 0.0 {
            (-d_kw / d_kd).clamp(0.0, 1.0)
        } else {
            1.0
        };
        if eta == 0.0 {
            break;
        }
        for x in w.iter_mut() {
            *x *= 1.0 - eta;
            // Repeated (1 - eta) decay drags dropped weights into the
            // subnormal range, which wrecks matvec throughput; flush them.
            if *x < 1e-250 {
                *x = 0.0;
            }
        }
        for &(a, m) in &v_idx {
            w[a] += eta * m;
        }
        g = matvec(&w);
        energy = 0.5 * dot(&g, &w);
        // The gap certificate closes at O(1/it) and may never reach tol
        // within the budget. Line search keeps energy non-increasing, so a
        // flat window means the iterate has stopped moving; stop early.
        if it % 128 == 127 {
            if window_anchor - energy <= params.tol * energy.abs().max(1.0) {
                break;
            }
            window_anchor = energy;
        }
    }

    // Curvature-aware polish: exact minimization over mass transfers between
    // index pairs. Escapes flat saddles of indefinite matrices that leave the
    // Frank-Wolfe gap at zero. Quadratic in n, so gated to small problems
    // where indefiniteness actually bites (synthetic matrices, tiny grids).
    if n <= 512 {
        polish_exchanges(entries, n, slice_of, n_slices, cap, &mut w);
        g = matvec(&w);
        energy = 0.5 * dot(&g, &w);
        let mut slice_best: Vec<usize> = vec![usize::MAX; n_slices];
        for a in 0..n {
            let s = slice_of[a];
            if slice_best[s] == usize::MAX || g[a] < g[slice_best[s]] {
                slice_best[s] = a;
            }
        }
        let mut costs: Vec<f64> = (0..n_slices).map(|s| g[slice_best[s]]).collect();
        costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut g_dot_v = 0.0;
        let mut remaining = 1.0f64;
        for c in costs {
            if remaining <= 0.0 {
                break;
            }
            let m = cap.min(remaining);
            g_dot_v += c * m;
            remaining -= m;
        }
        gap_rel = (dot(&g, &w) - g_dot_v) / energy.abs().max(1.0);
        converged = gap_rel <= params.tol || converged;
    }

    MinimizeReport {
        weights: w,
        energy,
        gap: gap_rel,
        iterations,
        converged,
    }
}

/// Feasible start concentrating as much mass as allowed on `lead`, spreading
/// the remainder uniformly over the other slices.
fn concentrated_start(
    n: usize,
    slice_of: &[usize],
    n_slices: usize,
    slice_size: &[usize],
    cap: f64,
    lead: usize,
) -> Vec<f64> {
    let mut w = vec![0.0f64; n];
    let lead_mass = cap.min(1.0);
    w[lead] = lead_mass;
    let rest = 1.0 - lead_mass;
    if rest > 0.0 {
        let others = n_slices - 1;
        if others == 0 {
            // Single slice: put the remainder on lead's slice uniformly.
            let share = rest / slice_size[slice_of[lead]] as f64;
            for a in 0..n {
                if slice_of[a] == slice_of[lead] {
                    w[a] += share;
                }
            }
        } else {
            let per_slice = rest / others as f64;
            for a in 0..n {
                let s = slice_of[a];
                if s != slice_of[lead] {
                    w[a] += per_slice / slice_size[s] as f64;
                }
            }
        }
    }
    w
}

fn polish_exchanges(
    entries: &[f64],
    n: usize,
    slice_of: &[usize],
    n_slices: usize,
    cap: f64,
    w: &mut Vec<f64>,
) {
    let mut g: Vec<f64> = entries
        .chunks(n)
        .map(|row| 2.0 * row.iter().zip(w.iter()).map(|(k, x)| k * x).sum::<f64>())
        .collect();
    let mut slice_mass = vec![0.0f64; n_slices];
    for a in 0..n {
        slice_mass[slice_of[a]] += w[a];
    }
    let energy_scale = (0.5 * dot(&g, w)).abs().max(1.0);
    for _sweep in 0..64 {
        let mut improved = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                // Transfer t > 0 moves mass j -> i; t < 0 moves i -> j.
                let a2 = entries[i * n + i] - 2.0 * entries[i * n + j] + entries[j * n + j];
                let b1 = g[i] - g[j];
                if a2 == 0.0 && b1 == 0.0 {
                    continue;
                }
                let (si, sj) = (slice_of[i], slice_of[j]);
                let head_i = if si == sj {
                    f64::INFINITY
                } else {
                    cap - slice_mass[si]
                };
                let head_j = if si == sj {
                    f64::INFINITY
                } else {
                    cap - slice_mass[sj]
                };
                let t_max = w[j].min(head_i.max(0.0));
                let t_min = -w[i].min(head_j.max(0.0));
                if t_max <= 0.0 && t_min >= 0.0 {
                    continue;
                }
                // f(t) = f(0) + b1 t + a2 t^2
                let cand = if a2 > 0.0 {
                    (-b1 / (2.0 * a2)).clamp(t_min, t_max)
                } else {
                    // Concave or linear: an endpoint wins.
                    let f_at = |t: f64| b1 * t + a2 * t * t;
                    if f_at(t_min) <= f_at(t_max) {
                        t_min
                    } else {
                        t_max
                    }
                };
                let delta = b1 * cand + a2 * cand * cand;
                if delta >= -1e-15 * energy_scale || cand == 0.0 {
                    continue;
                }
                w[i] += cand;
                w[j] -= cand;
                if si != sj {
                    slice_mass[si] += cand;
                    slice_mass[sj] -= cand;
                }
                for b in 0..n {
                    g[b] += 2.0 * cand * (entries[i * n + b] - entries[j * n + b]);
                }
                improved += -delta;
            }
        }
        if improved <= 1e-14 * energy_scale {
            break;
        }
    }
    // Clean tiny negative dust from the transfers.
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 && (total - 1.0).abs() > 1e-15 {
        for x in w.iter_mut() {
            *x /= total;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Map a minimal energy to a capacity under the divergence threshold.
pub fn capacity_from_energy(energy: f64, divergence_threshold: f64) -> f64 {
    if !energy.is_finite() || energy > divergence_threshold {
        0.0
    } else if energy <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / energy
    }
}

#[derive(Debug, Clone)]
pub struct CapacityEstimate {
    pub energy: f64,
    pub capacity: f64,
    pub n_pairs: usize,
    pub report: MinimizeReport,
}

/// Build the energy matrix for `gamma` on `grid`, minimize, and invert.
pub fn thermal_capacity(
    grid: &ProductGrid,
    gamma: f64,
    policy: DiagonalPolicy,
    params: &SolverParams,
) -> Result<CapacityEstimate> {
    let k = build_energy_matrix(grid, gamma, policy)?;
    // The anti-atom proxy tightens with the grid: finer grids must spread
    // mass over at least sqrt(#slices) time slices, so a refinement study
    // cannot park everything on two far-apart slices forever.
    let mut eff = *params;
    eff.slice_cap = params.slice_cap.min(1.0 / (grid.n_time() as f64).sqrt());
    let report = minimize_energy(&k, &eff)?;
    Ok(CapacityEstimate {
        energy: report.energy,
        capacity: capacity_from_energy(report.energy, params.divergence_threshold),
        n_pairs: grid.n_pairs(),
        report,
    })
}

/// Minimal excluded-diagonal Riesz energy sum w_i w_j |x_i - x_j|^(-beta)
/// over probability weights with a per-atom cap of
/// min(params.slice_cap, n^{-1/2}). The cap is what keeps the
/// excluded-diagonal estimator away from its degenerate vertex minimum, and
/// its n^{-1/2} tightening makes refinement trends meaningful: finer point
/// sets must spread mass over ever more atoms, as a nonatomic measure would.
/// Degenerate configurations (a lone atom, or too few atoms for the cap)
/// report +inf. For beta <= 0 the kernel is 1 everywhere (diagonal included)
/// and every probability measure has energy exactly 1.
pub fn riesz_min_energy(points: &[Vec<f64>], beta: f64, params: &SolverParams) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points".into()));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d || !all_finite(p)) {
        return Err(Error::InvalidInput("points must be finite, same dimension".into()));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidInput("beta must be finite".into()));
    }
    if beta <= 0.0 {
        return Ok(1.0);
    }
    let n = points.len();
    if n == 1 {
        // A single atom sees only the singular diagonal.
        return Ok(f64::INFINITY);
    }
    let mut eff = *params;
    eff.slice_cap = params.slice_cap.min(1.0 / (n as f64).sqrt());
    if eff.slice_cap * (n as f64) < 1.0 - 1e-12 {
        // Too few atoms to satisfy the cap.
        return Ok(f64::INFINITY);
    }
    let mut entries = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = dist(&points[i], &points[j]);
            if r == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "points {i} and {j} coincide"
                )));
            }
            let k = r.powf(-beta);
            entries[i * n + j] = k;
            entries[j * n + i] = k;
        }
    }
    let slice_of: Vec<usize> = (0..n).collect();
    let report = minimize_quadratic_sliced(&entries, n, &slice_of, n, &eff)?;
    Ok(report.energy)
}

/// Discrete Riesz capacity: reciprocal of `riesz_min_energy`, 0 when the
/// energy diverges.
pub fn riesz_capacity(points: &[Vec<f64>], beta: f64, params: &SolverParams) -> Result<f64> {
    let energy = riesz_min_energy(points, beta, params)?;
    Ok(capacity_from_energy(energy, params.divergence_threshold))
}

/// Verdict on a refinement study's energy sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapacityTrend {
    Positive,
    Vanishing,
}

/// Classify the energies of successively finer grids. Divergence is declared
/// when the finest energy tops the threshold or when energy keeps growing by
/// at least `growth_factor` per refinement over the last few steps.
pub fn classify_capacity_trend(
    energies: &[f64],
    divergence_threshold: f64,
    growth_factor: f64,
) -> CapacityTrend {
    let Some(&last) = energies.last() else {
        return CapacityTrend::Vanishing;
    };
    if !last.is_finite() || last > divergence_threshold {
        return CapacityTrend::Vanishing;
    }
    if energies.len() >= 2 {
        let k = (energies.len() - 1).min(3);
        let tail = &energies[energies.len() - 1 - k..];
        let sustained = tail.windows(2).all(|p| p[1] >= growth_factor * p[0]);
        if sustained {
            return CapacityTrend::Vanishing;
        }
    }
    CapacityTrend::Positive
}
