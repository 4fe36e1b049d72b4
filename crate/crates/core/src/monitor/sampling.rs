//! Exact sampling of heterodyne outcomes for a Fock-truncated bin.
//!
//! For a bin with reduced state `R` the outcome density is
//! `p(ξ) = e^{−|ξ|²}/π · ⟨ξ|R|ξ⟩`. In polar form `ξ = r e^{iφ}` the radial
//! marginal of `u = r²` is the Gamma mixture `Σ_n R_nn e^{−u} uⁿ/n!`, and the
//! conditional angular density is a trigonometric polynomial
//! `c₀ + 2 Re Σ_q c_q e^{iqφ}`. Both are sampled without discretization: the
//! Gamma component by a sum of exponentials, the angle by bisection on the
//! closed-form CDF.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::hilbert::{coherent_components, ComplexMatrix, C64};

/// `p(ξ) = e^{−|ξ|²}/π · ⟨ξ|R|ξ⟩` for a unit-trace bin state `R`.
pub fn outcome_density(rho: &ComplexMatrix, xi: C64) -> f64 {
    let v = coherent_components(xi, rho.rows() - 1);
    (-xi.norm_sqr()).exp() / std::f64::consts::PI * rho.expectation(&v).re
}

fn check_bin_state(rho: &ComplexMatrix) -> Result<()> {
    if !rho.is_square() || rho.rows() == 0 {
        return Err(Error::invalid("monitor", "bin state must be a nonempty square matrix"));
    }
    let tr = rho.trace().re;
    if !rho.is_finite() || !((tr - 1.0).abs() < 1e-8) {
        return Err(Error::InvalidState(format!("bin state has trace {tr}, expected 1")));
    }
    Ok(())
}

/// Fourier coefficients `c_q = Σ_n R_{n,n+q} r^{2n+q} / √(n!(n+q)!)`.
fn angular_coefficients(rho: &ComplexMatrix, r: f64) -> Vec<C64> {
    let d = rho.rows();
    // r^k / √(k!) for k = 0..d
    let mut pw = Vec::with_capacity(d);
    let mut term = 1.0;
    pw.push(term);
    for k in 1..d {
        term *= r / (k as f64).sqrt();
        pw.push(term);
    }
    (0..d)
        .map(|q| (0..d - q).map(|n| rho[(n, n + q)] * (pw[n] * pw[n + q])).sum())
        .collect()
}

/// Unnormalized angular CDF `∫₀^φ f`, with `f = c₀ + 2 Re Σ c_q e^{iqφ}`.
fn angular_cdf(c: &[C64], phi: f64) -> f64 {
    let mut acc = c[0].re * phi;
    for (q, cq) in c.iter().enumerate().skip(1) {
        let q = q as f64;
        // ∫₀^φ 2 Re(c e^{iqθ}) dθ = 2 Re(c (e^{iqφ} − 1)/(iq))
        let e = C64::new((q * phi).cos() - 1.0, (q * phi).sin());
        acc += 2.0 * (cq * e / C64::new(0.0, q)).re;
    }
    acc
}

/// Draws `ξ` from the heterodyne outcome density of the unit-trace bin
/// state `rho`.
pub fn sample_outcome<R: Rng + ?Sized>(rho: &ComplexMatrix, rng: &mut R) -> Result<C64> {
    check_bin_state(rho)?;
    let d = rho.rows();
    let pops: Vec<f64> = (0..d).map(|n| rho[(n, n)].re.max(0.0)).collect();
    let total: f64 = pops.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut n = d - 1;
    for (k, &p) in pops.iter().enumerate() {
        if pick < p {
            n = k;
            break;
        }
        pick -= p;
    }
    let u: f64 = (0..=n).map(|_| rng.sample::<f64, _>(Exp1)).sum();
    let r = u.sqrt();

    let c = angular_coefficients(rho, r);
    let two_pi = 2.0 * std::f64::consts::PI;
    let target = rng.random::<f64>() * c[0].re * two_pi;
    if !(c[0].re > 0.0) || d == 1 {
        return Ok(C64::from_polar(r, rng.random::<f64>() * two_pi));
    }
    let (mut lo, mut hi) = (0.0, two_pi);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if angular_cdf(&c, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(C64::from_polar(r, 0.5 * (lo + hi)))
}
