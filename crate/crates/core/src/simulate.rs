//! Lattice samplers for the Brownian sheet and the additive stable field,
//! plus the pinning transform used by the local analysis.
//!
//! Every path draws from its own counter-based stream: `path_rng(root, i)`
//! seeds ChaCha8 with the root seed and selects stream i + 1. Path i is the
//! same bytes no matter how many threads run, so parallel studies reduce in
//! path order and reproduce exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as IoRead, Write as IoWrite};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::util::all_finite;

const SHEET_MAGIC: &[u8; 8] = b"BSHEET01";

/// RNG for path `path_index` under `root_seed`. Stream 0 is reserved for
/// whole-study draws, so paths start at stream 1.
pub fn path_rng(root_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(path_index.wrapping_add(1));
    rng
}

fn validate_lattice(axes: &[Vec<f64>]) -> Result<()> {
    if axes.is_empty() {
        return Err(Error::InvalidInput("lattice needs at least one axis".into()));
    }
    for (k, axis) in axes.iter().enumerate() {
        if axis.is_empty() {
            return Err(Error::InvalidInput(format!("axis {k} is empty")));
        }
        if !all_finite(axis) || axis[0] < 0.0 {
            return Err(Error::InvalidInput(format!(
                "axis {k} must be finite and nonnegative"
            )));
        }
        if axis.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidInput(format!(
                "axis {k} must be strictly increasing"
            )));
        }
    }
    Ok(())
}

/// One sheet realization on a product lattice. Values are stored node-major
/// (row-major over axes) with the d state components innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetPath {
    axes: Vec<Vec<f64>>,
    d: usize,
    values: Vec<f64>,
    seed: u64,
}

impl SheetPath {
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flat node index of a multi-index, row-major over the axes.
    pub fn flat(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.axes.len() {
            return Err(Error::DimensionMismatch(format!(
                "index rank {} vs lattice rank {}",
                idx.len(),
                self.axes.len()
            )));
        }
        let mut flat = 0usize;
        for (i, axis) in idx.iter().zip(&self.axes) {
            if *i >= axis.len() {
                return Err(Error::InvalidInput(format!(
                    "index {i} out of range for an axis of length {}",
                    axis.len()
                )));
            }
            flat = flat * axis.len() + i;
        }
        Ok(flat)
    }

    pub fn value(&self, idx: &[usize]) -> Result<&[f64]> {
        let flat = self.flat(idx)?;
        Ok(&self.values[flat * self.d..(flat + 1) * self.d])
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(SHEET_MAGIC)?;
        w.write_all(&(self.axes.len() as u64).to_le_bytes())?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for axis in &self.axes {
            w.write_all(&(axis.len() as u64).to_le_bytes())?;
            for &x in axis {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        for &v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SHEET_MAGIC {
            return Err(Error::InvalidInput("not a sheet path file".into()));
        }
        let n_axes = read_u64(&mut r)? as usize;
        let d = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        if n_axes == 0 || n_axes > 16 || d == 0 || d > 1024 {
            return Err(Error::InvalidInput("implausible sheet header".into()));
        }
        let mut axes = Vec::with_capacity(n_axes);
        for _ in 0..n_axes {
            let len = read_u64(&mut r)? as usize;
            if len == 0 || len > (1 << 32) {
                return Err(Error::InvalidInput("implausible axis length".into()));
            }
            let mut axis = Vec::with_capacity(len);
            for _ in 0..len {
                axis.push(read_f64(&mut r)?);
            }
            axes.push(axis);
        }
        validate_lattice(&axes)?;
        let n_values = axes.iter().map(|a| a.len()).product::<usize>() * d;
        let mut values = Vec::with_capacity(n_values);
        for _ in 0..n_values {
            values.push(read_f64(&mut r)?);
        }
        Ok(SheetPath {
            axes,
            d,
            values,
            seed,
        })
    }
}

fn read_u64(r: &mut impl IoRead) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl IoRead) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Sample one sheet path with the canonical per-path stream for `seed`.
pub fn sample_sheet(lattice: &[Vec<f64>], d: usize, seed: u64) -> Result<SheetPath> {
    let mut rng = path_rng(seed, 0);
    sample_sheet_with(&mut rng, lattice, d, seed)
}

/// Sample one sheet path from a caller-managed rng. Cell increments are
/// independent centered Gaussians with variance the cell volume (the cell
/// below each node stretches to 0 on the near side), and prefix sums along
/// every axis turn them into sheet values: the covariance of the result is
/// the product of coordinate minima, componentwise.
pub fn sample_sheet_with(
    rng: &mut ChaCha8Rng,
    lattice: &[Vec<f64>],
    d: usize,
    seed: u64,
) -> Result<SheetPath> {
    validate_lattice(lattice)?;
    if d == 0 {
        return Err(Error::InvalidInput("state dimension must be >= 1".into()));
    }
    let n_nodes: usize = lattice.iter().map(|a| a.len()).product();
    let mut values = vec![0.0f64; n_nodes * d];

    // Increments first, in flat node order, components innermost; this is
    // the byte-stable draw order.
    let rank = lattice.len();
    let mut idx = vec![0usize; rank];
    for node in 0..n_nodes {
        let mut vol = 1.0f64;
        for (axis, &i) in lattice.iter().zip(&idx) {
            let lo = if i == 0 { 0.0 } else { axis[i - 1] };
            vol *= axis[i] - lo;
        }
        let sd = vol.sqrt();
        for c in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            values[node * d + c] = sd * z;
        }
        for a in (0..rank).rev() {
            idx[a] += 1;
            if idx[a] < lattice[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }

    // Prefix-sum along one axis at a time. Flat order guarantees the
    // neighbour at distance `stride` is already accumulated for this axis.
    let mut stride = n_nodes;
    for axis in lattice {
        let len = axis.len();
        stride /= len;
        for node in 0..n_nodes {
            if (node / stride) % len == 0 {
                continue;
            }
            let (prev, cur) = values.split_at_mut(node * d);
            let prev = &prev[(node - stride) * d..];
            for c in 0..d {
                cur[c] += prev[c];
            }
        }
    }

    Ok(SheetPath {
        axes: lattice.to_vec(),
        d,
        values,
        seed,
    })
}

/// prod_k min(s_k, t_k) / s_k, the regression coefficient of the sheet at t
/// on its value at s.
pub fn pinned_coefficient(s: &[f64], t: &[f64]) -> Result<f64> {
    if s.len() != t.len() || s.is_empty() {
        return Err(Error::DimensionMismatch(
            "pin point and target must share a nonzero rank".into(),
        ));
    }
    if s.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || !all_finite(t) || t.iter().any(|&x| x < 0.0)
    {
        return Err(Error::InvalidInput(
            "pin point must be strictly positive, target nonnegative".into(),
        ));
    }
    Ok(s.iter().zip(t).map(|(&si, &ti)| ti.min(si) / si).product())
}

/// Values of the sheet pinned at lattice node `s`: W(t) - c(s, t) W(s),
/// which is independent of W(s) at every t. `s` must match lattice
/// coordinates exactly.
pub fn pinned_sheet_values(path: &SheetPath, s: &[f64]) -> Result<Vec<f64>> {
    let rank = path.axes.len();
    if s.len() != rank {
        return Err(Error::DimensionMismatch(format!(
            "pin point rank {} vs lattice rank {rank}",
            s.len()
        )));
    }
    let mut s_idx = Vec::with_capacity(rank);
    for (k, (axis, &sk)) in path.axes.iter().zip(s).enumerate() {
        match axis.binary_search_by(|x| x.partial_cmp(&sk).unwrap()) {
            Ok(i) => s_idx.push(i),
            Err(_) => {
                return Err(Error::InvalidInput(format!(
                    "pin coordinate {sk} is not a node of axis {k}"
                )))
            }
        }
        if sk <= 0.0 {
            return Err(Error::InvalidInput("pin point must be strictly positive".into()));
        }
    }
    // Per-axis factors min(s_k, t_k) / s_k, combined per node.
    let factors: Vec<Vec<f64>> = path
        .axes
        .iter()
        .zip(s)
        .map(|(axis, &sk)| axis.iter().map(|&t| t.min(sk) / sk).collect())
        .collect();
    let w_s = path.value(&s_idx)?.to_vec();
    let d = path.d;
    let n_nodes = path.n_nodes();
    let mut out = vec![0.0f64; n_nodes * d];
    let mut idx = vec![0usize; rank];
    for node in 0..n_nodes {
        let mut coef = 1.0f64;
        for (f, &i) in factors.iter().zip(&idx) {
            coef *= f[i];
        }
        for c in 0..d {
            out[node * d + c] = path.values[node * d + c] - coef * w_s[c];
        }
        for a in (0..rank).rev() {
            idx[a] += 1;
            if idx[a] < path.axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(out)
}

/// Positive beta-stable draw, beta in (0, 1], normalized so the Laplace
/// transform is exp(-lambda^beta). Kanter's representation: U uniform on
/// (0, pi) and W unit exponential give
/// (sin(beta U) / sin(U)^(1/beta)) * (sin((1-beta) U) / W)^((1-beta)/beta).
pub fn sample_positive_stable(beta: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "stability index must be in (0, 1], got {beta}"
        )));
    }
    if beta == 1.0 {
        // Degenerate case: the transform is exp(-lambda).
        return Ok(1.0);
    }
    let u: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let w: f64 = Exp1.sample(rng);
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let b = (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    Ok(a * b)
}

/// One realization of the additive stable field on a product of per-axis
/// grids: X(u) = sum_j X_j(u_j) with independent isotropic alpha-stable
/// marginal processes, so only the marginals are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct StablePath {
    axes: Vec<Vec<f64>>,
    d: usize,
    alpha: f64,
    axis_values: Vec<Vec<f64>>,
    seed: u64,
}

impl StablePath {
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Field value at a multi-index into the axis grids.
    pub fn value(&self, idx: &[usize]) -> Result<Vec<f64>> {
        if idx.len() != self.axes.len() {
            return Err(Error::DimensionMismatch(format!(
                "index rank {} vs field rank {}",
                idx.len(),
                self.axes.len()
            )));
        }
        let mut out = vec![0.0f64; self.d];
        for (j, &i) in idx.iter().enumerate() {
            if i >= self.axes[j].len() {
                return Err(Error::InvalidInput(format!(
                    "index {i} out of range on axis {j}"
                )));
            }
            let vals = &self.axis_values[j][i * self.d..(i + 1) * self.d];
            for (o, v) in out.iter_mut().zip(vals) {
                *o += v;
            }
        }
        Ok(out)
    }

    pub fn marginal(&self, axis: usize) -> &[f64] {
        &self.axis_values[axis]
    }
}

/// Sample the additive field with the canonical stream for `seed`.
pub fn sample_additive_stable(
    u_grids: &[Vec<f64>],
    d: usize,
    alpha: f64,
    seed: u64,
) -> Result<StablePath> {
    let mut rng = path_rng(seed, 0);
    sample_additive_stable_with(&mut rng, u_grids, d, alpha, seed)
}

/// Increments are subordinated Gaussians: over a step du the marginal gains
/// sqrt(c S) Z with Z standard normal in R^d, S positive (alpha/2)-stable,
/// and c = du^(2/alpha) 2^(1 - 2/alpha), which gives the characteristic
/// function exp(-du |xi|^alpha / 2) exactly.
pub fn sample_additive_stable_with(
    rng: &mut ChaCha8Rng,
    u_grids: &[Vec<f64>],
    d: usize,
    alpha: f64,
    seed: u64,
) -> Result<StablePath> {
    validate_lattice(u_grids)?;
    if d == 0 {
        return Err(Error::InvalidInput("state dimension must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be in (0, 2], got {alpha}"
        )));
    }
    let beta = alpha / 2.0;
    let mut axis_values = Vec::with_capacity(u_grids.len());
    for grid in u_grids {
        let mut vals = vec![0.0f64; grid.len() * d];
        let mut prev_u = 0.0f64;
        for (i, &u) in grid.iter().enumerate() {
            let du = u - prev_u;
            prev_u = u;
            let scale = if du > 0.0 {
                let c = du.powf(2.0 / alpha) * (2.0f64).powf(1.0 - 2.0 / alpha);
                let s = sample_positive_stable(beta, rng)?;
                (c * s).sqrt()
            } else {
                0.0
            };
            for c_i in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                let inc = scale * z;
                vals[i * d + c_i] = if i == 0 {
                    inc
                } else {
                    vals[(i - 1) * d + c_i] + inc
                };
            }
        }
        axis_values.push(vals);
    }
    Ok(StablePath {
        axes: u_grids.to_vec(),
        d,
        alpha,
        axis_values,
        seed,
    })
}

/// Mean/covariance summary of a scalar pair observed per path.
#[derive(Debug, Clone, Copy)]
pub struct PairStats {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
    pub n: usize,
}

/// Evaluate `obs` on `n_paths` independent path streams and summarize.
/// Paths are generated in parallel but reduced in path order, so the result
/// does not depend on the thread count. Variances are the unbiased ones.
pub fn empirical_pair_stats<F>(n_paths: usize, root_seed: u64, obs: F) -> Result<PairStats>
where
    F: Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync,
{
    if n_paths < 2 {
        return Err(Error::InvalidInput("need at least two paths".into()));
    }
    let pairs: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(root_seed, i);
            obs(&mut rng)
        })
        .collect();
    let n = n_paths as f64;
    let (mut sa, mut sb) = (0.0f64, 0.0f64);
    for &(a, b) in &pairs {
        sa += a;
        sb += b;
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut va, mut vb, mut cab) = (0.0f64, 0.0f64, 0.0f64);
    for &(a, b) in &pairs {
        va += (a - ma) * (a - ma);
        vb += (b - mb) * (b - mb);
        cab += (a - ma) * (b - mb);
    }
    Ok(PairStats {
        mean_a: ma,
        mean_b: mb,
        var_a: va / (n - 1.0),
        var_b: vb / (n - 1.0),
        cov: cab / (n - 1.0),
        n: n_paths,
    })
}
