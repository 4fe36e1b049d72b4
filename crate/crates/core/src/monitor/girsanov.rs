//! Colored-noise form of a heterodyne record.
//!
//! Writing the record as innovation plus drift,
//! `ξ̄_j = ν_j + Σ_l θ_l ⟨s⟩_{j−l−1}`, and coloring both sides with the
//! coupling kernel gives
//! `color(ξ̄)_m = a_m + dt Σ_{τ=−(N−1)}^{N−1} α_τ ⟨s⟩_{m−τ−1}` with
//! `a = color(ν)` and `α_{−τ} = α_τ*`. The drift is two-sided because the
//! coloring anticipates by up to `N − 1` bins while the drift lags by up to
//! `N − 1` bins.

use crate::error::{Error, Result};
use crate::hilbert::{C64, ZERO};
use crate::kernel::{color, reconstruct, CouplingKernel, NoisePath, Normalization};
use crate::lattice::convolve_coupling_means;

use super::HeterodyneRecord;

#[derive(Clone, Debug)]
pub struct GirsanovCheck {
    /// Colored innovations `a = color(ν)` (continuum normalization).
    pub colored_innovation: Vec<C64>,
    /// `a_m + dt Σ_τ α_τ ⟨s⟩_{m−τ−1}`.
    pub shifted: Vec<C64>,
    /// `color(ξ̄)` computed directly from the record.
    pub colored_record: Vec<C64>,
    /// `max_m |colored_record_m − shifted_m|`.
    pub residual: f64,
    /// Number of record bins used.
    pub used_bins: usize,
}

/// `coupling_means[p]` is `⟨s⟩` in the state after `p` steps. The record
/// prefix of length `min(record, coupling_means)` is used.
pub fn girsanov_colored(
    record: &HeterodyneRecord,
    kernel: &CouplingKernel,
    coupling_means: &[C64],
) -> Result<GirsanovCheck> {
    let n = kernel.len();
    let len = record.len().min(coupling_means.len());
    if len < n {
        return Err(Error::Length {
            module: "monitor",
            context: "girsanov_colored (record and coupling means)",
            needed: n,
            got: len,
        });
    }
    if (record.dt - kernel.dt()).abs() > 1e-12 * kernel.dt() {
        return Err(Error::invalid("monitor", "record and kernel time steps differ"));
    }
    let theta = kernel.step_amplitudes();
    let s = &coupling_means[..len];
    let bins = &record.bins()[..len];
    let innovation: Vec<C64> = (1..=len)
        .map(|j| bins[j - 1] - convolve_coupling_means(&theta, s, j))
        .collect();
    let path = |v: Vec<C64>| NoisePath {
        dt: record.dt,
        bins: v,
        seed: record.seed,
        normalization: Normalization::Bin,
    };
    let a = color(&path(innovation), kernel)?.bins;
    let colored_record = color(&path(bins.to_vec()), kernel)?.bins;

    let alpha = reconstruct(kernel);
    let dt = kernel.dt();
    let s_at = |i: isize| if i < 0 { ZERO } else { s[i as usize] };
    let shifted: Vec<C64> = a
        .iter()
        .enumerate()
        .map(|(i, &am)| {
            let m = i as isize + 1;
            let drift: C64 = (-(n as isize - 1)..=(n as isize - 1))
                .map(|tau| alpha.at(tau) * s_at(m - tau - 1))
                .sum();
            am + drift * dt
        })
        .collect();
    let residual = shifted
        .iter()
        .zip(&colored_record)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    Ok(GirsanovCheck {
        colored_innovation: a,
        shifted,
        colored_record,
        residual,
        used_bins: len,
    })
}
