//! Correlation functions, causal coupling kernels and noise paths.
//!
//! Discrete conventions (time step `dt`, kernel samples at left endpoints
//! `κ_k = κ(k·dt)`):
//!
//! * reconstruction: `α_m = dt · Σ_k κ_{m+k} κ_k*`
//! * coloring:       `a_m = √dt · Σ_k ξ̄_{m+k} κ_k*` (anticipating, `ξ̄` bin-normalized)
//! * normalization:  bin noise has `E|ξ̄|² = 1`; continuum noise is `ξ = ξ̄/√dt`.

mod factorize;

use rand::Rng;
use sha2::{Digest, Sha256};

pub use factorize::{factorize, factorize_with, Factorization, FactorizeOptions};

use crate::error::{Error, Result};
use crate::hilbert::{ComplexMatrix, C64, ZERO};
use crate::rng::{complex_normal, stream_rng};
use crate::textio;

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(
            "kernel",
            format!("time step must be positive and finite, got {dt}"),
        ));
    }
    Ok(())
}

fn check_finite(samples: &[C64], what: &'static str) -> Result<()> {
    if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            module: "kernel",
            context: what,
        });
    }
    Ok(())
}

fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Stationary correlation `α_m = α(m·dt)`, `m ≥ 0`; negative lags follow
/// from `α_{−m} = α_m*`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationFunction {
    dt: f64,
    samples: Vec<C64>,
}

impl CorrelationFunction {
    pub fn new(dt: f64, samples: Vec<C64>) -> Result<Self> {
        check_dt(dt)?;
        if samples.is_empty() {
            return Err(Error::invalid(
                "kernel",
                "correlation function needs at least one sample",
            ));
        }
        check_finite(&samples, "correlation samples")?;
        Ok(Self { dt, samples })
    }

    /// `α_m = (γ/2)·e^{−λ m dt}`, the correlation of the exponential kernel.
    pub fn exponential(gamma: f64, lambda: f64, dt: f64, len: usize) -> Result<Self> {
        let samples = (0..len)
            .map(|m| C64::new(0.5 * gamma * (-lambda * m as f64 * dt).exp(), 0.0))
            .collect();
        Self::new(dt, samples)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `α` at any integer lag, zero beyond the sampled window.
    pub fn at(&self, lag: isize) -> C64 {
        let m = lag.unsigned_abs();
        let v = self.samples.get(m).copied().unwrap_or(ZERO);
        if lag < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// Hermitian Toeplitz covariance `C_ij = α_{i−j}`.
    pub fn toeplitz(&self, size: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(size, size, |i, j| self.at(i as isize - j as isize))
    }

    /// Smallest eigenvalue of the Toeplitz matrix over the sampled lags.
    pub fn min_eigenvalue(&self) -> f64 {
        self.toeplitz(self.samples.len()).hermitian_eigenvalues()[0]
    }

    pub fn to_text(&self) -> String {
        textio::render(
            "correlation",
            &[("dt", textio::fmt_f64(self.dt)), ("n", self.samples.len().to_string())],
            0,
            &self.samples,
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = textio::parse(text, "correlation")?;
        let dt: f64 = doc.get("dt")?;
        let n: usize = doc.get("n")?;
        Self::new(dt, doc.values(0, n)?)
    }
}

/// Causal coupling kernel on the memory window `[0, N·dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingKernel {
    dt: f64,
    samples: Vec<C64>,
}

impl CouplingKernel {
    pub fn new(dt: f64, samples: Vec<C64>) -> Result<Self> {
        check_dt(dt)?;
        if samples.is_empty() {
            return Err(Error::invalid("kernel", "coupling kernel needs N >= 1 bins"));
        }
        check_finite(&samples, "kernel samples")?;
        Ok(Self { dt, samples })
    }

    pub fn zeros(dt: f64, n: usize) -> Result<Self> {
        Self::new(dt, vec![ZERO; n])
    }

    /// Single-bin kernel `κ_0 = √γ/dt`: the flat-spectrum (memoryless) limit.
    pub fn markov(gamma: f64, dt: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::invalid("kernel", "decay rate must be nonnegative"));
        }
        Self::new(dt, vec![C64::new(gamma.sqrt() / dt, 0.0)])
    }

    /// `κ_k = √(γλ)·e^{−λ k dt}`, whose correlation tends to `(γ/2)e^{−λt}`.
    pub fn exponential(gamma: f64, lambda: f64, dt: f64, n: usize) -> Result<Self> {
        if !(gamma >= 0.0) || !(lambda > 0.0) {
            return Err(Error::invalid(
                "kernel",
                "exponential kernel needs gamma >= 0 and lambda > 0",
            ));
        }
        let amp = (gamma * lambda).sqrt();
        let samples = (0..n)
            .map(|k| C64::new(amp * (-lambda * k as f64 * dt).exp(), 0.0))
            .collect();
        Self::new(dt, samples)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn memory_time(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Per-step collision amplitudes `θ_k = κ_k·dt^{3/2}`.
    pub fn step_amplitudes(&self) -> Vec<C64> {
        let f = self.dt.powf(1.5);
        self.samples.iter().map(|z| z * f).collect()
    }

    /// Rotates the kernel so the first nonzero sample is real positive.
    pub fn with_canonical_phase(mut self) -> Self {
        if let Some(first) = self.samples.iter().find(|z| z.norm() > 0.0).copied() {
            let phase = first.conj() / first.norm();
            self.samples.iter_mut().for_each(|z| *z *= phase);
        }
        self
    }

    /// Short content hash of `dt` and the samples.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"coupling-kernel");
        h.update(self.dt.to_bits().to_le_bytes());
        for z in &self.samples {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn to_text(&self) -> String {
        textio::render(
            "coupling-kernel",
            &[("dt", textio::fmt_f64(self.dt)), ("n", self.samples.len().to_string())],
            0,
            &self.samples,
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = textio::parse(text, "coupling-kernel")?;
        let dt: f64 = doc.get("dt")?;
        let n: usize = doc.get("n")?;
        Self::new(dt, doc.values(0, n)?)
    }
}

/// `α_m = dt · Σ_k κ_{m+k} κ_k*` for `m = 0..N`.
pub fn reconstruct(kernel: &CouplingKernel) -> CorrelationFunction {
    let k = kernel.samples();
    let n = k.len();
    let samples = (0..n)
        .map(|m| {
            let s: C64 = (0..n - m).map(|j| k[m + j] * k[j].conj()).sum();
            s * kernel.dt()
        })
        .collect::<Vec<_>>();
    let mut samples = samples;
    samples[0] = C64::new(samples[0].re, 0.0);
    CorrelationFunction {
        dt: kernel.dt(),
        samples,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// `E|ξ̄|² = 1` per bin.
    Bin,
    /// `E|ξ|² = 1/dt`.
    Continuum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub bins: Vec<C64>,
    pub seed: u64,
    pub normalization: Normalization,
}

impl NoisePath {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn to_normalization(&self, target: Normalization) -> NoisePath {
        let factor = match (self.normalization, target) {
            (Normalization::Bin, Normalization::Continuum) => 1.0 / self.dt.sqrt(),
            (Normalization::Continuum, Normalization::Bin) => self.dt.sqrt(),
            _ => 1.0,
        };
        NoisePath {
            dt: self.dt,
            bins: self.bins.iter().map(|z| z * factor).collect(),
            seed: self.seed,
            normalization: target,
        }
    }
}

/// `n` i.i.d. standard complex normal bins (bin normalization), seeded.
pub fn sample_white_noise(n: usize, dt: f64, seed: u64) -> Result<NoisePath> {
    sample_white_noise_stream(n, dt, seed, 0)
}

/// Same as [`sample_white_noise`] on a derived stream (e.g. path index).
pub fn sample_white_noise_stream(n: usize, dt: f64, seed: u64, stream: u64) -> Result<NoisePath> {
    check_dt(dt)?;
    if n == 0 {
        return Err(Error::invalid("kernel", "noise path needs n >= 1 bins"));
    }
    let mut rng = stream_rng(seed, stream);
    Ok(NoisePath {
        dt,
        bins: (0..n).map(|_| complex_normal(&mut rng)).collect(),
        seed,
        normalization: Normalization::Bin,
    })
}

/// Colors a white path with `κ`; the output has `len − N + 1` samples in
/// continuum normalization.
pub fn color(path: &NoisePath, kernel: &CouplingKernel) -> Result<NoisePath> {
    let n = kernel.len();
    if path.len() < n {
        return Err(Error::Length {
            module: "kernel",
            context: "color",
            needed: n,
            got: path.len(),
        });
    }
    color_len(path, kernel, path.len() + 1 - n)
}

pub fn color_len(path: &NoisePath, kernel: &CouplingKernel, out_len: usize) -> Result<NoisePath> {
    if !same_dt(path.dt, kernel.dt()) {
        return Err(Error::invalid(
            "kernel",
            format!("path dt {} differs from kernel dt {}", path.dt, kernel.dt()),
        ));
    }
    let n = kernel.len();
    if path.len() < out_len + n - 1 {
        return Err(Error::Length {
            module: "kernel",
            context: "color",
            needed: out_len + n - 1,
            got: path.len(),
        });
    }
    let white = path.to_normalization(Normalization::Bin);
    let conj: Vec<C64> = kernel.samples().iter().map(|z| z.conj()).collect();
    let f = path.dt.sqrt();
    let bins = (0..out_len)
        .map(|m| {
            let s: C64 = conj.iter().zip(&white.bins[m..m + n]).map(|(k, x)| k * x).sum();
            s * f
        })
        .collect();
    Ok(NoisePath {
        dt: path.dt,
        bins,
        seed: path.seed,
        normalization: Normalization::Continuum,
    })
}

/// Empirical correlation with per-lag standard errors.
#[derive(Clone, Debug)]
pub struct CorrelationEstimate {
    pub dt: f64,
    pub values: Vec<C64>,
    /// Standard error of each lag's mean across paths (infinite for a single path).
    pub standard_errors: Vec<f64>,
}

impl CorrelationEstimate {
    pub fn as_correlation(&self) -> Result<CorrelationFunction> {
        CorrelationFunction::new(self.dt, self.values.clone())
    }
}

/// Lag-`m` averages of `a_{t+m} a_t*` (continuum normalization) for
/// `m = 0..=max_lag`. Each path contributes one time-averaged estimate;
/// errors come from the spread across paths.
pub fn estimate_correlation(paths: &[NoisePath], max_lag: usize) -> Result<CorrelationEstimate> {
    let first = paths
        .first()
        .ok_or_else(|| Error::invalid("kernel", "correlation estimate needs at least one path"))?;
    let len = first.len();
    if paths.iter().any(|p| p.len() != len || !same_dt(p.dt, first.dt)) {
        return Err(Error::invalid("kernel", "paths must share length and time step"));
    }
    if max_lag >= len {
        return Err(Error::Length {
            module: "kernel",
            context: "estimate_correlation",
            needed: max_lag + 1,
            got: len,
        });
    }
    let per_path: Vec<Vec<C64>> = paths
        .iter()
        .map(|p| {
            let a = p.to_normalization(Normalization::Continuum).bins;
            (0..=max_lag)
                .map(|m| {
                    let s: C64 = (0..len - m).map(|t| a[t + m] * a[t].conj()).sum();
                    s / (len - m) as f64
                })
                .collect()
        })
        .collect();
    let count = per_path.len() as f64;
    let mut values = vec![ZERO; max_lag + 1];
    for est in &per_path {
        for (v, e) in values.iter_mut().zip(est) {
            *v += e;
        }
    }
    values.iter_mut().for_each(|v| *v /= count);
    let standard_errors = (0..=max_lag)
        .map(|m| {
            if per_path.len() < 2 {
                return f64::INFINITY;
            }
            let var: f64 = per_path.iter().map(|e| (e[m] - values[m]).norm_sqr()).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        })
        .collect();
    Ok(CorrelationEstimate {
        dt: first.dt,
        values,
        standard_errors,
    })
}

/// Colors `count` independent white paths (stream `i` for path `i`).
pub fn colored_ensemble(kernel: &CouplingKernel, out_len: usize, count: usize, seed: u64) -> Result<Vec<NoisePath>> {
    (0..count)
        .map(|i| {
            let white = sample_white_noise_stream(out_len + kernel.len() - 1, kernel.dt(), seed, i as u64)?;
            color_len(&white, kernel, out_len)
        })
        .collect()
}

/// Draws a random bin-normalized path from a caller-supplied generator.
pub fn white_noise_from<R: Rng + ?Sized>(rng: &mut R, n: usize, dt: f64) -> NoisePath {
    NoisePath {
        dt,
        bins: (0..n).map(|_| complex_normal(rng)).collect(),
        seed: 0,
        normalization: Normalization::Bin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn reconstruct_small_kernels() {
        let a = reconstruct(&CouplingKernel::new(1.0, vec![c(1.0), c(0.0)]).unwrap());
        assert_eq!(a.samples(), &[c(1.0), c(0.0)]);
        let a = reconstruct(&CouplingKernel::new(1.0, vec![c(1.0), c(1.0)]).unwrap());
        assert_eq!(a.samples(), &[c(2.0), c(1.0)]);
    }

    #[test]
    fn reconstruct_exponential_approaches_closed_form() {
        // ∫₀^∞ γλ e^{−λ(t+2τ)} dτ = (γ/2) e^{−λt}
        let (gamma, lambda) = (1.0, 2.0);
        let mut prev_err = f64::INFINITY;
        for dt in [0.04, 0.02, 0.01] {
            let n = (8.0 / dt) as usize;
            let k = CouplingKernel::exponential(gamma, lambda, dt, n).unwrap();
            let a = reconstruct(&k);
            let err = (0..n / 4)
                .map(|m| (a.samples()[m].re - 0.5 * gamma * (-lambda * m as f64 * dt).exp()).abs())
                .fold(0.0, f64::max);
            assert!(err < 2.0 * dt, "dt {dt}: err {err}");
            assert!(err < 0.6 * prev_err, "no first-order convergence: {err} vs {prev_err}");
            prev_err = err;
        }
    }

    #[test]
    fn factorize_delta_correlation() {
        let alpha = CorrelationFunction::new(1.0, vec![c(1.0), c(0.0)]).unwrap();
        let f = factorize(&alpha, 2).unwrap();
        assert!((f.kernel.samples()[0] - c(1.0)).norm() < 1e-14);
        assert!(f.kernel.samples()[1].norm() < 1e-14);
        assert!(f.residual < 1e-14);
    }

    #[test]
    fn factorize_exponential_matches_discrete_geometric_factor() {
        // For α_m = (1/2) r^m with r = e^{−2dt}, the discrete rule admits the
        // causal factor κ_k = c r^k with c² = (1 − r²)/(2 dt) (geometric sum).
        let dt = 0.01;
        let n = 600;
        let alpha = CorrelationFunction::exponential(1.0, 2.0, dt, n).unwrap();
        let f = factorize(&alpha, n).unwrap();
        assert!(f.residual < 1e-8, "residual {}", f.residual);
        let r: f64 = (-2.0 * dt).exp();
        let cc = ((1.0 - r * r) / (2.0 * dt)).sqrt();
        for k in 0..n / 2 {
            let expect = cc * r.powi(k as i32);
            assert!((f.kernel.samples()[k].re - expect).abs() < 1e-4, "k {k}");
        }
    }

    #[test]
    fn factorize_rejects_indefinite() {
        let alpha = CorrelationFunction::new(1.0, vec![c(1.0), c(2.0)]).unwrap();
        match factorize(&alpha, 2) {
            Err(Error::NotFactorizable { min_eigenvalue }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("expected NotFactorizable, got {other:?}"),
        }
    }

    #[test]
    fn factorize_clips_singular_psd() {
        // the zero correlation is PSD but singular: clipped, zero kernel
        let alpha = CorrelationFunction::new(0.5, vec![c(0.0), c(0.0)]).unwrap();
        let f = factorize(&alpha, 2).unwrap();
        assert!(f.loading > 0.0);
        assert!(f.kernel.samples().iter().all(|z| z.norm() < 1e-5));
        assert!(f.residual < 1e-9);
    }

    #[test]
    fn zero_extension_can_be_indefinite() {
        // [[1,1],[1,1]] is PSD, but no two-bin kernel has α = (1, 1): the
        // zero-extended Toeplitz matrix has eigenvalues near 1 + 2cos(π) = −1.
        let alpha = CorrelationFunction::new(1.0, vec![c(1.0), c(1.0)]).unwrap();
        match factorize(&alpha, 2) {
            Err(Error::NotFactorizable { min_eigenvalue }) => assert!(min_eigenvalue < -0.1),
            other => panic!("expected NotFactorizable, got {other:?}"),
        }
    }

    fn random_min_phase_kernel(rng: &mut ChaCha8Rng, n: usize, dt: f64) -> CouplingKernel {
        // |κ_0| > Σ_{k>0} |κ_k| keeps all zeros of the kernel polynomial
        // off the closed unit disk, so the canonical factor is unique.
        let mut s: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let tail: f64 = s[1..].iter().map(|z| z.norm()).sum();
        s[0] = C64::new(2.0 * tail + 0.2, 0.0);
        CouplingKernel::new(dt, s).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn factorize_roundtrip(seed in any::<u64>(), n in 1usize..8, dt in 0.05f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = random_min_phase_kernel(&mut rng, n, dt);
            let alpha = reconstruct(&k);
            let f = factorize(&alpha, n).unwrap();
            let back = reconstruct(&f.kernel);
            let actual = back.samples().iter().zip(alpha.samples()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(f.residual <= 1e-8);
            prop_assert!((actual - f.residual).abs() < 1e-15);
            // identity on canonical-phase minimum-phase kernels
            for (a, b) in f.kernel.samples().iter().zip(k.samples()) {
                prop_assert!((a - b).norm() < 1e-7 * k.samples()[0].norm());
            }
        }

        #[test]
        fn reconstruct_is_positive_at_zero_lag(seed in any::<u64>(), n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let a = reconstruct(&CouplingKernel::new(0.3, s).unwrap());
            prop_assert!(a.samples()[0].im == 0.0 && a.samples()[0].re >= 0.0);
            prop_assert!(a.min_eigenvalue() >= -1e-10 * a.samples()[0].re.max(1.0));
            for m in 1..n as isize {
                prop_assert_eq!(a.at(-m), a.at(m).conj());
            }
        }

        #[test]
        fn kernel_text_roundtrip(seed in any::<u64>(), n in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<C64> = (0..n).map(|_| C64::new(rng.random::<f64>() * 1e3 - 5e2, rng.random::<f64>() * 1e-200)).collect();
            let k = CouplingKernel::new(rng.random::<f64>() + 1e-9, s).unwrap();
            prop_assert_eq!(CouplingKernel::from_text(&k.to_text()).unwrap(), k.clone());
            let a = reconstruct(&k);
            prop_assert_eq!(CorrelationFunction::from_text(&a.to_text()).unwrap(), a);
        }
    }

    #[test]
    fn white_noise_is_deterministic() {
        let a = sample_white_noise(64, 0.1, 5).unwrap();
        let b = sample_white_noise(64, 0.1, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.bins, sample_white_noise(64, 0.1, 6).unwrap().bins);
    }

    #[test]
    fn white_noise_moments() {
        let n = 100_000;
        let p = sample_white_noise(n, 0.1, 11).unwrap();
        let nf = n as f64;
        let mean: C64 = p.bins.iter().sum::<C64>() / nf;
        let second: C64 = p.bins.iter().map(|z| z * z).sum::<C64>() / nf;
        let power: f64 = p.bins.iter().map(|z| z.norm_sqr()).sum::<f64>() / nf;
        assert!(mean.norm() <= 5.0 / nf.sqrt());
        assert!(second.norm() <= 5.0 / nf.sqrt());
        assert!((power - 1.0).abs() <= 5.0 * (2.0 / nf).sqrt());
    }

    #[test]
    fn color_markov_reduction_and_linearity() {
        let dt = 0.05;
        let k = CouplingKernel::new(dt, vec![c(1.0 / dt)]).unwrap();
        assert!((reconstruct(&k).samples()[0] - c(1.0 / dt)).norm() < 1e-12);
        let p = sample_white_noise(32, dt, 3).unwrap();
        let a = color(&p, &k).unwrap();
        let cont = p.to_normalization(Normalization::Continuum);
        for (x, y) in a.bins.iter().zip(&cont.bins) {
            assert!((x - y).norm() < 1e-12);
        }
        let zero = NoisePath {
            bins: vec![ZERO; 32],
            ..p.clone()
        };
        let k3 = CouplingKernel::exponential(1.0, 2.0, dt, 3).unwrap();
        assert!(color(&zero, &k3).unwrap().bins.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn color_rejects_short_paths() {
        let p = sample_white_noise(3, 0.1, 1).unwrap();
        let k = CouplingKernel::exponential(1.0, 2.0, 0.1, 4).unwrap();
        assert!(matches!(color(&p, &k), Err(Error::Length { needed: 4, got: 3, .. })));
    }

    #[test]
    fn estimate_white_and_zero() {
        let dt = 0.2;
        let paths: Vec<NoisePath> = (0..200)
            .map(|i| sample_white_noise_stream(256, dt, 1, i).unwrap())
            .collect();
        let est = estimate_correlation(&paths, 3).unwrap();
        assert!((est.values[0] - c(1.0 / dt)).norm() <= 5.0 * est.standard_errors[0]);
        for m in 1..4 {
            assert!(est.values[m].norm() <= 5.0 * est.standard_errors[m]);
        }
        let zero = NoisePath {
            dt,
            bins: vec![ZERO; 10],
            seed: 0,
            normalization: Normalization::Continuum,
        };
        let est = estimate_correlation(&[zero], 4).unwrap();
        assert!(est.values.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn colored_paths_are_gaussian() {
        let dt = 0.1;
        let k = CouplingKernel::exponential(1.0, 2.0, dt, 5).unwrap();
        let paths = colored_ensemble(&k, 8, 20_000, 42).unwrap();
        let samples: Vec<C64> = paths.iter().map(|p| p.bins[3]).collect();
        let n = samples.len() as f64;
        let m2: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let m4: f64 = samples.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() / n;
        let var_m4 = samples.iter().map(|z| (z.norm_sqr().powi(2) - m4).powi(2)).sum::<f64>() / (n - 1.0);
        let var_m2 = samples.iter().map(|z| (z.norm_sqr() - m2).powi(2)).sum::<f64>() / (n - 1.0);
        // E|a|⁴ = 2(E|a|²)²; propagate both standard errors
        let se = (var_m4 / n).sqrt() + 4.0 * m2 * (var_m2 / n).sqrt();
        assert!((m4 - 2.0 * m2 * m2).abs() <= 5.0 * se, "m4 {m4} vs {}", 2.0 * m2 * m2);
        assert!((m2 - reconstruct(&k).samples()[0].re).abs() <= 5.0 * (var_m2 / n).sqrt());
    }

    #[test]
    fn canonical_phase() {
        let k = CouplingKernel::new(1.0, vec![ZERO, C64::new(0.0, 2.0), C64::new(1.0, 1.0)])
            .unwrap()
            .with_canonical_phase();
        assert!((k.samples()[1] - c(2.0)).norm() < 1e-15);
    }
}
