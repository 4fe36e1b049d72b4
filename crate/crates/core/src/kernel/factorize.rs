//! Causal spectral factorization of a stationary correlation function.
//!
//! The correlation samples define a Hermitian Toeplitz covariance. Its
//! Cholesky factor is computed with the Schur generator recursion in
//! `O(W²)` time and `O(W)` memory; the last row of the factor, read
//! backwards, converges to the causal (minimum-phase) kernel as the window
//! `W` grows.

use super::{reconstruct, CorrelationFunction, CouplingKernel};
use crate::error::{Error, Result};
use crate::hilbert::{ComplexMatrix, C64, ZERO};

#[derive(Clone, Debug)]
pub struct FactorizeOptions {
    /// Initial window, in multiples of the kernel length.
    pub window_factor: usize,
    /// Largest window, in multiples of the kernel length.
    pub max_window_factor: usize,
    /// Window growth stops once the residual is below `target · α₀`.
    pub target_relative_residual: f64,
    /// Eigenvalues down to `−psd_tolerance · λ_max` are treated as zero.
    pub psd_tolerance: f64,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        Self {
            window_factor: 8,
            max_window_factor: 64,
            target_relative_residual: 1e-13,
            psd_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub kernel: CouplingKernel,
    /// `max_m |reconstruct(κ)_m − α_m|` over lags `0..N`.
    pub residual: f64,
    /// Toeplitz window used for the returned kernel.
    pub window: usize,
    /// Diagonal loading added to `α₀` when the covariance was singular
    /// within tolerance (zero when none was needed).
    pub loading: f64,
}

enum Schur {
    Done(Vec<C64>),
    /// Breakdown at column `k`: the leading `(k+1)×(k+1)` block is not
    /// positive definite.
    Breakdown(usize),
}

/// Last `n` entries of the last row of the Cholesky factor of the `w × w`
/// Toeplitz matrix with first column `col` (`T_ij = col[i−j]`, `i ≥ j`).
fn schur_last_row(col: &[C64], w: usize, n: usize) -> Schur {
    let t0 = col[0].re;
    if !(t0 > 0.0) {
        return Schur::Breakdown(0);
    }
    let s0 = t0.sqrt();
    let at = |m: usize| col.get(m).copied().unwrap_or(ZERO);
    let mut u: Vec<C64> = (0..w).map(|m| at(m) / s0).collect();
    let mut v: Vec<C64> = (0..w).map(|m| if m == 0 { ZERO } else { at(m) / s0 }).collect();
    u[0] = C64::new(s0, 0.0);
    let mut row = vec![ZERO; n];
    for k in 0..w {
        if k > 0 {
            let uk = u[k].re;
            let rho = v[k] / uk;
            let one_minus = 1.0 - rho.norm_sqr();
            if !(uk > 0.0) || !(one_minus > 1e-15) {
                return Schur::Breakdown(k);
            }
            let s = one_minus.sqrt();
            let rc = rho.conj();
            for i in k..w {
                let (ui, vi) = (u[i], v[i]);
                u[i] = (ui - rc * vi) / s;
                v[i] = (vi - rho * ui) / s;
            }
            // the rotation makes u_k real up to rounding
            u[k] = C64::new(u[k].re, 0.0);
            v[k] = ZERO;
        }
        if k + n >= w {
            row[k + n - w] = u[w - 1];
        }
        // shift u down for the next column
        for i in (k + 1..w).rev() {
            u[i] = u[i - 1];
        }
        u[k] = ZERO;
    }
    Schur::Done(row)
}

fn toeplitz_block(col: &[C64], size: usize) -> ComplexMatrix {
    let at = |m: usize| col.get(m).copied().unwrap_or(ZERO);
    ComplexMatrix::from_fn(size, size, |i, j| if i >= j { at(i - j) } else { at(j - i).conj() })
}

fn kernel_from_row(row: &[C64], dt: f64) -> Vec<C64> {
    let inv = 1.0 / dt.sqrt();
    row.iter().rev().map(|z| z.conj() * inv).collect()
}

fn residual_of(kernel: &CouplingKernel, alpha: &[C64]) -> f64 {
    let back = reconstruct(kernel);
    back.samples()
        .iter()
        .enumerate()
        .map(|(m, z)| (z - alpha.get(m).copied().unwrap_or(ZERO)).norm())
        .fold(0.0, f64::max)
}

/// Factorizes `α` into a causal kernel of `n` bins with default options.
///
/// Lags `0..n` of `α` are used; missing lags count as zero and lags `≥ n`
/// are outside the kernel's memory window and ignored.
pub fn factorize(alpha: &CorrelationFunction, n: usize) -> Result<Factorization> {
    factorize_with(alpha, n, &FactorizeOptions::default())
}

pub fn factorize_with(alpha: &CorrelationFunction, n: usize, opts: &FactorizeOptions) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::invalid("kernel", "kernel length must be >= 1"));
    }
    if opts.window_factor == 0 || opts.max_window_factor < opts.window_factor {
        return Err(Error::invalid(
            "kernel",
            "window factors must satisfy 1 <= initial <= max",
        ));
    }
    let dt = alpha.dt();
    let lags: Vec<C64> = (0..n)
        .map(|m| alpha.samples().get(m).copied().unwrap_or(ZERO))
        .collect();
    // The Cholesky factor of the time-reversed process is lower triangular;
    // its covariance has first column conj(α_m).
    let mut col: Vec<C64> = lags.iter().map(|z| z.conj()).collect();
    col[0] = C64::new(col[0].re, 0.0);
    let scale = col[0].re.abs().max(f64::MIN_POSITIVE);

    let mut loading = 0.0;
    let mut window = opts.window_factor * n;
    let mut best: Option<Factorization> = None;
    let mut previous: Option<Vec<C64>> = None;
    let mut attempts = 0;
    loop {
        let mut loaded = col.clone();
        loaded[0] += loading;
        match schur_last_row(&loaded, window, n) {
            Schur::Breakdown(k) => {
                attempts += 1;
                let block = toeplitz_block(&loaded, (k + 1).max(2).min(window));
                let eig = block.hermitian_eigenvalues();
                let (min, max) = (eig[0], *eig.last().unwrap());
                if min < -opts.psd_tolerance * max.abs().max(scale) || attempts > 8 {
                    return Err(Error::NotFactorizable { min_eigenvalue: min });
                }
                loading = (loading * 10.0).max(min.abs() + opts.psd_tolerance * max.abs().max(scale));
                best = None;
                previous = None;
                continue;
            }
            Schur::Done(row) => {
                let kernel = CouplingKernel::new(dt, kernel_from_row(&row, dt))?;
                let residual = residual_of(&kernel, &lags);
                let stalled = previous.as_ref().is_some_and(|p| {
                    p.iter()
                        .zip(kernel.samples())
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max)
                        <= 1e-15 * kernel.samples()[0].norm().max(1.0)
                });
                previous = Some(kernel.samples().to_vec());
                let candidate = Factorization {
                    kernel,
                    residual,
                    window,
                    loading,
                };
                if best.as_ref().is_none_or(|b| candidate.residual <= b.residual) {
                    best = Some(candidate);
                }
                let done = residual <= opts.target_relative_residual * scale
                    || stalled
                    || window >= opts.max_window_factor * n;
                if done {
                    return Ok(best.expect("at least one window factorized"));
                }
                window *= 2;
            }
        }
    }
}
