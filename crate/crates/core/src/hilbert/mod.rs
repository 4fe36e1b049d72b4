//! Dense linear algebra on small tensor-product spaces.
//!
//! Index convention: a composite space lists its factors in order, factor 0
//! (the system) is the slowest index of the row-major flattening, and memory
//! bins follow in exit order (factor 1 leaves the memory next). Every module
//! relies on this convention.

mod expm;
mod matrix;

pub use expm::{expm, expm_apply};
pub use matrix::{qubit, ComplexMatrix, C64, DEFAULT_HERMITIAN_TOL, I, ONE, ZERO};

use crate::error::{Error, Result};

/// Default cap on any composite dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// State amplitudes with a carried likelihood factor.
///
/// The weight is stored as its logarithm so that long records of
/// Gaussian measure factors do not underflow. A normalized state has
/// `log_weight == 0` and unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    log_weight: f64,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("hilbert", "state vector must have dim >= 1"));
        }
        Ok(Self {
            amplitudes,
            log_weight: 0.0,
        })
    }

    pub fn with_log_weight(amplitudes: Vec<C64>, log_weight: f64) -> Result<Self> {
        let mut v = Self::new(amplitudes)?;
        v.log_weight = log_weight;
        Ok(v)
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Self {
            amplitudes,
            log_weight: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn add_log_weight(&mut self, delta: f64) {
        self.log_weight += delta;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Rescales to unit norm, moving `‖ψ‖²` into the weight so that
    /// `weight · ‖ψ‖²` is unchanged.
    pub fn normalize_into_weight(&mut self) -> Result<()> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::InvalidState(format!(
                "cannot normalize a state with squared norm {n2}"
            )));
        }
        let inv = 1.0 / n2.sqrt();
        self.amplitudes.iter_mut().for_each(|z| *z *= inv);
        self.log_weight += n2.ln();
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes, &self.amplitudes)
    }
}

/// Ordered tensor factors; factor 0 is the slowest flattened index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositeSpace {
    factor_dims: Vec<usize>,
    total_dim: usize,
}

impl CompositeSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        Self::with_cap(factor_dims, usize::MAX)
    }

    pub fn with_cap(factor_dims: Vec<usize>, cap: usize) -> Result<Self> {
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return Err(Error::invalid(
                "hilbert",
                "composite space needs at least one factor, all of positive dimension",
            ));
        }
        let mut total: usize = 1;
        for &d in &factor_dims {
            total = total.checked_mul(d).filter(|&t| t <= cap).ok_or(Error::DimensionCap {
                requested: factor_dims.iter().fold(1usize, |a, &b| a.saturating_mul(b)),
                cap,
            })?;
        }
        Ok(Self {
            factor_dims,
            total_dim: total,
        })
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Product of the dimensions after `factor` (its flattening stride).
    pub fn stride(&self, factor: usize) -> usize {
        self.factor_dims[factor + 1..].iter().product()
    }

    pub fn flatten(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.factor_dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn unflatten(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factor_dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.factor_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn without_factor(&self, factor: usize) -> Result<Self> {
        self.check_factor(factor)?;
        let mut dims = self.factor_dims.clone();
        dims.remove(factor);
        Self::new(dims)
    }

    pub fn with_factor_appended(&self, dim: usize) -> Result<Self> {
        let mut dims = self.factor_dims.clone();
        dims.push(dim);
        Self::new(dims)
    }

    fn check_factor(&self, factor: usize) -> Result<()> {
        if factor >= self.factor_dims.len() {
            return Err(Error::FactorIndex {
                index: factor,
                factors: self.factor_dims.len(),
            });
        }
        Ok(())
    }

    /// For every flat index: (flat index within the kept factors, flat index
    /// within the traced factors).
    fn split_indices(&self, keep: &[bool]) -> (usize, usize, Vec<(usize, usize)>) {
        let kept_dim: usize = self
            .factor_dims
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(d, _)| d)
            .product();
        let traced_dim = self.total_dim / kept_dim;
        let mut table = Vec::with_capacity(self.total_dim);
        for i in 0..self.total_dim {
            let multi = self.unflatten(i);
            let (mut k, mut t) = (0, 0);
            for ((&m, &d), &kf) in multi.iter().zip(&self.factor_dims).zip(keep) {
                if kf {
                    k = k * d + m;
                } else {
                    t = t * d + m;
                }
            }
            table.push((k, t));
        }
        (kept_dim, traced_dim, table)
    }

    fn keep_mask(&self, keep: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.factor_dims.len()];
        for &k in keep {
            self.check_factor(k)?;
            mask[k] = true;
        }
        Ok(mask)
    }
}

/// Kronecker product with the first argument as the slow index.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_capped(a, b, DEFAULT_DIMENSION_CAP)
}

pub fn tensor_capped(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r <= cap && c <= cap => (r, c),
        (r, c) => {
            return Err(Error::DimensionCap {
                requested: r.unwrap_or(usize::MAX).max(c.unwrap_or(usize::MAX)),
                cap,
            })
        }
    };
    let (br, bc) = (b.rows(), b.cols());
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    }))
}

/// Tensor product of state vectors, first argument slowest.
pub fn tensor_vectors(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// Reduced density matrix on the factors in `keep` (listed in space order).
pub fn partial_trace(rho: &ComplexMatrix, space: &CompositeSpace, keep: &[usize]) -> Result<ComplexMatrix> {
    if !rho.is_square() || rho.rows() != space.total_dim() {
        return Err(Error::Shape {
            context: "partial_trace",
            expected: format!("{0}x{0} density matrix", space.total_dim()),
            found: format!("{}x{}", rho.rows(), rho.cols()),
        });
    }
    let mask = space.keep_mask(keep)?;
    let (kept_dim, traced_dim, table) = space.split_indices(&mask);
    let mut full = vec![0usize; space.total_dim()];
    for (i, &(k, t)) in table.iter().enumerate() {
        full[k * traced_dim + t] = i;
    }
    Ok(ComplexMatrix::from_fn(kept_dim, kept_dim, |k1, k2| {
        (0..traced_dim)
            .map(|t| rho[(full[k1 * traced_dim + t], full[k2 * traced_dim + t])])
            .sum()
    }))
}

/// Reduced density matrix of the pure (possibly unnormalized) state `psi`.
pub fn reduced_density(psi: &[C64], space: &CompositeSpace, keep: &[usize]) -> Result<ComplexMatrix> {
    if psi.len() != space.total_dim() {
        return Err(Error::Shape {
            context: "reduced_density",
            expected: format!("vector of length {}", space.total_dim()),
            found: format!("length {}", psi.len()),
        });
    }
    let mask = space.keep_mask(keep)?;
    // Fast path: keeping a prefix of factors is a plain reshape.
    let prefix = mask.iter().take_while(|&&k| k).count();
    if mask[prefix..].iter().all(|&k| !k) {
        let kept_dim: usize = space.factor_dims()[..prefix].iter().product();
        let traced_dim = space.total_dim() / kept_dim;
        return Ok(ComplexMatrix::from_fn(kept_dim, kept_dim, |a, b| {
            let ra = &psi[a * traced_dim..(a + 1) * traced_dim];
            let rb = &psi[b * traced_dim..(b + 1) * traced_dim];
            ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum()
        }));
    }
    let (kept_dim, traced_dim, table) = space.split_indices(&mask);
    let mut reshaped = vec![ZERO; space.total_dim()];
    for (i, &(k, t)) in table.iter().enumerate() {
        reshaped[k * traced_dim + t] = psi[i];
    }
    Ok(ComplexMatrix::from_fn(kept_dim, kept_dim, |a, b| {
        let ra = &reshaped[a * traced_dim..(a + 1) * traced_dim];
        let rb = &reshaped[b * traced_dim..(b + 1) * traced_dim];
        ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum()
    }))
}

/// Contracts one factor of `psi` against `weights`:
/// `out(a, c) = Σ_n weights[n] · psi(a, n, c)`. The factor disappears.
pub fn contract_factor(
    psi: &[C64],
    space: &CompositeSpace,
    factor: usize,
    weights: &[C64],
) -> Result<(Vec<C64>, CompositeSpace)> {
    space.check_factor(factor)?;
    let d = space.factor_dims()[factor];
    if weights.len() != d || psi.len() != space.total_dim() {
        return Err(Error::Shape {
            context: "contract_factor",
            expected: format!("{d} weights and a vector of length {}", space.total_dim()),
            found: format!("{} weights, length {}", weights.len(), psi.len()),
        });
    }
    let inner = space.stride(factor);
    let outer = space.total_dim() / (d * inner);
    let mut out = vec![ZERO; outer * inner];
    for a in 0..outer {
        let dst = &mut out[a * inner..(a + 1) * inner];
        for (n, &w) in weights.iter().enumerate() {
            if w == ZERO {
                continue;
            }
            let src = &psi[(a * d + n) * inner..(a * d + n + 1) * inner];
            for (o, &x) in dst.iter_mut().zip(src) {
                *o += w * x;
            }
        }
    }
    Ok((out, space.without_factor(factor)?))
}

/// Truncated annihilation operator on Fock states `0..=cutoff`.
pub fn ladder(cutoff: usize) -> ComplexMatrix {
    let d = cutoff + 1;
    ComplexMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// Unnormalized Bargmann coherent vector `exp(ξ b†)|0⟩` truncated at `cutoff`.
#[derive(Clone, Debug)]
pub struct CoherentVector {
    pub vector: StateVector,
    /// `|ξ|² ≤ cutoff / 2`; outside this radius truncation error is large.
    pub within_radius: bool,
}

pub fn coherent(xi: C64, cutoff: usize) -> CoherentVector {
    CoherentVector {
        vector: StateVector::new(coherent_components(xi, cutoff)).expect("cutoff + 1 >= 1"),
        within_radius: xi.norm_sqr() <= cutoff as f64 / 2.0,
    }
}

/// Components `ξⁿ/√(n!)`, n = 0..=cutoff.
pub fn coherent_components(xi: C64, cutoff: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut term = ONE;
    out.push(term);
    for n in 1..=cutoff {
        term = term * xi / (n as f64).sqrt();
        out.push(term);
    }
    out
}

/// Projects `factor` of `psi` on the heterodyne outcome `ξ`: contracts the
/// factor with the bra `⟨ξ| = Σ_n (ξ*)ⁿ/√(n!) ⟨n|`. The Gaussian measure
/// factor is not applied here; see [`bargmann_log_measure`].
pub fn bargmann_contract(
    psi: &[C64],
    space: &CompositeSpace,
    factor: usize,
    xi: C64,
) -> Result<(Vec<C64>, CompositeSpace)> {
    space.check_factor(factor)?;
    let cutoff = space.factor_dims()[factor] - 1;
    let weights = coherent_components(xi.conj(), cutoff);
    contract_factor(psi, space, factor, &weights)
}

/// `ln(e^{−|ξ|²}/π)`, the log density of the heterodyne outcome measure.
pub fn bargmann_log_measure(xi: C64) -> f64 {
    -xi.norm_sqr() - std::f64::consts::PI.ln()
}

/// Trace distance `½‖a − b‖₁` between Hermitian matrices.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let diff = a - b;
    0.5 * diff.hermitian_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
}

/// `Tr ρ²` for a density matrix.
pub fn purity(rho: &ComplexMatrix) -> f64 {
    rho.trace_product(rho).re
}
