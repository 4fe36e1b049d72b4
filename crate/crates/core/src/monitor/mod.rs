//! Heterodyne monitoring of the bins leaving the memory.
//!
//! Every exiting bin is measured in the Bargmann basis. Conditioning on the
//! outcomes gives two kinds of system state:
//!
//! * the conditional mixed state after `n` steps, with the `N` bins still in
//!   memory traced out, and
//! * the retrodicted pure state after `p` steps, where the in-memory bins are
//!   instead projected on values recorded later, once they have left. It
//!   needs the record up to `p + N − 1`.
//!
//! Averaging retrodicted projectors over the Gaussian measure of the
//! in-memory outcomes reproduces the conditional mixed state.

mod girsanov;
mod quadrature;
mod sampling;

use std::fmt::Write as _;

use rayon::prelude::*;

pub use girsanov::{girsanov_colored, GirsanovCheck};
pub use quadrature::{gauss_laguerre, PlaneQuadrature};
pub use sampling::{outcome_density, sample_outcome};

use crate::error::{Error, Result};
use crate::hilbert::{
    bargmann_contract, bargmann_log_measure, contract_factor, purity, ComplexMatrix, CompositeSpace, StateVector, C64,
    ONE, ZERO,
};
use crate::kernel::{CouplingKernel, NoisePath, Normalization};
use crate::lattice::{
    conveyor_step, convolve_coupling_means, evolve_nonselective, CollisionPropagator, ExitingState, JointState,
    LatticeConfig, SystemSpec,
};
use crate::rng::{complex_normal, stream_rng, SimRng};
use crate::textio;

/// Bin-normalized read-outs `ξ̄_1..ξ̄_n` with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct HeterodyneRecord {
    pub dt: f64,
    pub memory_bins: usize,
    pub n_max: usize,
    pub seed: u64,
    pub stream: u64,
    pub kernel_fingerprint: String,
    pub system_fingerprint: String,
    bins: Vec<C64>,
}

impl HeterodyneRecord {
    pub fn new(monitor: &Monitor, seed: u64, stream: u64, bins: Vec<C64>) -> Self {
        Self {
            dt: monitor.cfg.dt(),
            memory_bins: monitor.cfg.memory_bins(),
            n_max: monitor.cfg.n_max(),
            seed,
            stream,
            kernel_fingerprint: monitor.kernel.fingerprint(),
            system_fingerprint: monitor.sys.fingerprint(),
            bins,
        }
    }

    /// Record from bare values, e.g. measured data or synthetic tests.
    /// Fingerprints are left empty.
    pub fn from_bins(cfg: &LatticeConfig, seed: u64, bins: Vec<C64>) -> Self {
        Self {
            dt: cfg.dt(),
            memory_bins: cfg.memory_bins(),
            n_max: cfg.n_max(),
            seed,
            stream: 0,
            kernel_fingerprint: String::new(),
            system_fingerprint: String::new(),
            bins,
        }
    }

    /// `ξ̄_m` is `bins()[m − 1]`.
    pub fn bins(&self) -> &[C64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// First `n` bins.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::InsufficientRecord {
                required: n,
                available: self.len(),
            });
        }
        let mut out = self.clone();
        out.bins.truncate(n);
        Ok(out)
    }

    /// Continuum read-out `b_out(t_m) = ξ̄_m / √dt`.
    pub fn continuum(&self) -> Vec<C64> {
        let f = 1.0 / self.dt.sqrt();
        self.bins.iter().map(|z| z * f).collect()
    }

    pub fn to_noise_path(&self) -> NoisePath {
        NoisePath {
            dt: self.dt,
            bins: self.bins.clone(),
            seed: self.seed,
            normalization: Normalization::Bin,
        }
    }

    pub fn to_text(&self) -> String {
        textio::render(
            "heterodyne-record",
            &[
                ("dt", textio::fmt_f64(self.dt)),
                ("memory_bins", self.memory_bins.to_string()),
                ("n_max", self.n_max.to_string()),
                ("seed", self.seed.to_string()),
                ("stream", self.stream.to_string()),
                ("kernel", self.kernel_fingerprint.clone()),
                ("system", self.system_fingerprint.clone()),
                ("n", self.bins.len().to_string()),
            ],
            1,
            &self.bins,
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = textio::parse(text, "heterodyne-record")?;
        let n: usize = doc.get("n")?;
        Ok(Self {
            dt: doc.get("dt")?,
            memory_bins: doc.get("memory_bins")?,
            n_max: doc.get("n_max")?,
            seed: doc.get("seed")?,
            stream: doc.get("stream")?,
            kernel_fingerprint: doc.get_str("kernel")?.to_string(),
            system_fingerprint: doc.get_str("system")?.to_string(),
            bins: doc.values(1, n)?,
        })
    }
}

/// System state after `step` steps given the record so far, with the
/// in-memory bins traced out.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMixedState {
    pub step: usize,
    /// Unit trace.
    pub rho: ComplexMatrix,
    /// Log of the record likelihood density up to `step`.
    pub log_weight: f64,
}

impl ConditionalMixedState {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn purity(&self) -> f64 {
        purity(&self.rho)
    }
}

/// Pure system state after `step` steps, conditioned on the record through
/// `horizon = step + N − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrodictedPureState {
    pub step: usize,
    pub horizon: usize,
    /// Normalized; its log-weight is the log likelihood density of the
    /// record through `horizon`.
    pub psi: StateVector,
}

/// One monitored run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub record: HeterodyneRecord,
    /// States after `0..=steps` steps.
    pub states: Vec<ConditionalMixedState>,
    pub final_state: JointState,
}

/// Which system state supplies `⟨s⟩` in the signal prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignalState {
    #[default]
    Retrodicted,
    ConditionalMixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalPrediction {
    pub mean: C64,
    /// States (by step) whose `⟨s⟩` entered the prediction.
    pub steps_used: Vec<usize>,
}

/// Projects `bin` of a joint state on outcome `ξ̄`. The bin is removed and
/// the weight multiplied by `e^{−|ξ̄|²}/π`; the result is not renormalized.
pub fn bargmann_project(joint: &JointState, bin: usize, xi: C64) -> Result<JointState> {
    if bin == 0 {
        return Err(Error::FactorIndex {
            index: 0,
            factors: joint.space().factors(),
        });
    }
    let (psi, space) = bargmann_contract(joint.vector().amplitudes(), joint.space(), bin, xi)?;
    let v = StateVector::with_log_weight(psi, joint.vector().log_weight() + bargmann_log_measure(xi))?;
    JointState::new(space, v, joint.step())
}

/// Draws the outcome for the exiting bin and returns it with the
/// normalized, collapsed successor state.
pub fn heterodyne_sample(exiting: &ExitingState, rng: &mut SimRng) -> Result<(C64, JointState)> {
    if exiting.vector().norm_sqr() == 0.0 {
        return Err(Error::InvalidState("zero-norm joint state".into()));
    }
    let xi = sample_outcome(&exiting.exit_density()?, rng)?;
    Ok((xi, finish_step(exiting, xi)?))
}

fn finish_step(exiting: &ExitingState, xi: C64) -> Result<JointState> {
    let mut next = exiting.project(xi)?;
    next.vector_mut().normalize_into_weight()?;
    Ok(next)
}

/// Projects bins `1..N` of `joint` on `future` (`N − 1` values) and the
/// last, still-vacuum bin on `|0⟩`. Returns the normalized system state
/// carrying the accumulated log-weight.
fn project_memory(joint: &JointState, future: &[C64]) -> Result<StateVector> {
    let bins = joint.bins();
    if future.len() + 1 != bins {
        return Err(Error::Length {
            module: "monitor",
            context: "in-memory projection values",
            needed: bins - 1,
            got: future.len(),
        });
    }
    let mut psi = joint.vector().amplitudes().to_vec();
    let mut space: CompositeSpace = joint.space().clone();
    let mut log_weight = joint.vector().log_weight();
    for &xi in future {
        let (p, s) = bargmann_contract(&psi, &space, 1, xi)?;
        psi = p;
        space = s;
        log_weight += bargmann_log_measure(xi);
    }
    let mut vac = vec![ZERO; space.factor_dims()[1]];
    vac[0] = ONE;
    let (psi, _) = contract_factor(&psi, &space, 1, &vac)?;
    let mut v = StateVector::with_log_weight(psi, log_weight)?;
    v.normalize_into_weight()?;
    Ok(v)
}

/// A system, kernel and lattice with the collision unitary precomputed.
#[derive(Clone, Debug)]
pub struct Monitor {
    sys: SystemSpec,
    kernel: CouplingKernel,
    cfg: LatticeConfig,
    prop: CollisionPropagator,
}

impl Monitor {
    pub fn new(sys: SystemSpec, kernel: CouplingKernel, cfg: LatticeConfig) -> Result<Self> {
        let prop = CollisionPropagator::new(&sys, &kernel, &cfg)?;
        Ok(Self { sys, kernel, cfg, prop })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.sys
    }

    pub fn kernel(&self) -> &CouplingKernel {
        &self.kernel
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.cfg
    }

    pub fn propagator(&self) -> &CollisionPropagator {
        &self.prop
    }

    fn check_initial(&self, initial: &StateVector) -> Result<()> {
        if initial.dim() != self.sys.dim() {
            return Err(Error::Shape {
                context: "initial system state",
                expected: format!("length {}", self.sys.dim()),
                found: format!("length {}", initial.dim()),
            });
        }
        if !initial.is_normalized(1e-10) {
            return Err(Error::InvalidState(format!(
                "initial state has norm {}, expected 1",
                initial.norm()
            )));
        }
        Ok(())
    }

    fn check_record(&self, record: &HeterodyneRecord, needed: usize) -> Result<()> {
        if (record.dt - self.cfg.dt()).abs() > 1e-12 * self.cfg.dt() {
            return Err(Error::invalid(
                "monitor",
                format!("record dt {} differs from lattice dt {}", record.dt, self.cfg.dt()),
            ));
        }
        if record.len() < needed {
            return Err(Error::InsufficientRecord {
                required: needed,
                available: record.len(),
            });
        }
        Ok(())
    }

    fn mixed(joint: &JointState) -> Result<ConditionalMixedState> {
        Ok(ConditionalMixedState {
            step: joint.step(),
            rho: joint.system_density()?,
            log_weight: joint.vector().log_weight(),
        })
    }

    /// Samples a record of `steps` outcomes on random stream `stream` of
    /// `seed`, returning the conditional mixed states along the way.
    pub fn run_trajectory(&self, initial: &StateVector, steps: usize, seed: u64, stream: u64) -> Result<Trajectory> {
        self.check_initial(initial)?;
        let mut rng = stream_rng(seed, stream);
        let mut joint = JointState::with_vacuum_memory(initial, &self.cfg)?;
        let mut states = Vec::with_capacity(steps + 1);
        let mut bins = Vec::with_capacity(steps);
        states.push(Self::mixed(&joint)?);
        for _ in 0..steps {
            let exiting = conveyor_step(&joint, &self.prop)?;
            let (xi, next) = heterodyne_sample(&exiting, &mut rng)?;
            bins.push(xi);
            joint = next;
            states.push(Self::mixed(&joint)?);
        }
        Ok(Trajectory {
            record: HeterodyneRecord::new(self, seed, stream, bins),
            states,
            final_state: joint,
        })
    }

    /// Replays the first `steps` record values, calling `visit` on the joint
    /// state after `0..=steps` steps.
    fn replay(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        steps: usize,
        mut visit: impl FnMut(&JointState) -> Result<()>,
    ) -> Result<JointState> {
        self.check_initial(initial)?;
        self.check_record(record, steps)?;
        let mut joint = JointState::with_vacuum_memory(initial, &self.cfg)?;
        visit(&joint)?;
        for &xi in &record.bins()[..steps] {
            let exiting = conveyor_step(&joint, &self.prop)?;
            joint = finish_step(&exiting, xi)?;
            visit(&joint)?;
        }
        Ok(joint)
    }

    /// Conditional mixed state after `n` steps of the record.
    pub fn conditional_mixed(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        n: usize,
    ) -> Result<ConditionalMixedState> {
        Self::mixed(&self.replay(record, initial, n, |_| Ok(()))?)
    }

    /// Conditional mixed states after `0..=n` steps.
    pub fn conditional_mixed_all(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        n: usize,
    ) -> Result<Vec<ConditionalMixedState>> {
        let mut out = Vec::with_capacity(n + 1);
        self.replay(record, initial, n, |j| {
            out.push(Self::mixed(j)?);
            Ok(())
        })?;
        Ok(out)
    }

    /// Record length needed to retrodict the state after `p` steps.
    pub fn retrodiction_horizon(&self, p: usize) -> usize {
        p + self.cfg.memory_bins() - 1
    }

    pub fn retrodict(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        p: usize,
    ) -> Result<RetrodictedPureState> {
        let horizon = self.retrodiction_horizon(p);
        self.check_record(record, horizon)?;
        let joint = self.replay(record, initial, p, |_| Ok(()))?;
        Ok(RetrodictedPureState {
            step: p,
            horizon,
            psi: project_memory(&joint, &record.bins()[p..horizon])?,
        })
    }

    /// Retrodicted states for every `p` the record allows, in one pass.
    pub fn retrodict_all(&self, record: &HeterodyneRecord, initial: &StateVector) -> Result<Vec<RetrodictedPureState>> {
        let n_mem = self.cfg.memory_bins();
        if record.len() + 1 < n_mem {
            return Err(Error::InsufficientRecord {
                required: n_mem - 1,
                available: record.len(),
            });
        }
        let last = record.len() + 1 - n_mem;
        let mut out = Vec::with_capacity(last + 1);
        self.replay(record, initial, last, |j| {
            let p = j.step();
            let horizon = self.retrodiction_horizon(p);
            out.push(RetrodictedPureState {
                step: p,
                horizon,
                psi: project_memory(j, &record.bins()[p..horizon])?,
            });
            Ok(())
        })?;
        Ok(out)
    }

    /// Retrodicted state after `p` steps with the in-memory bins projected
    /// on `future` instead of recorded values. The weight is relative to the
    /// conditional mixed state at `p` (whose own weight is subtracted).
    pub fn retrodict_with_future(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        p: usize,
        future: &[C64],
    ) -> Result<StateVector> {
        let joint = self.replay(record, initial, p, |_| Ok(()))?;
        let base = joint.vector().log_weight();
        let mut psi = project_memory(&joint, future)?;
        psi.add_log_weight(-base);
        Ok(psi)
    }

    /// Gaussian-measure average of retrodicted projectors over all values
    /// of the `N − 1` in-memory bins, by exact product quadrature.
    pub fn average_retrodicted_quadrature(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        p: usize,
    ) -> Result<ComplexMatrix> {
        let joint = self.replay(record, initial, p, |_| Ok(()))?;
        let base = joint.vector().log_weight();
        let quad = PlaneQuadrature::exact_for_cutoff(self.cfg.n_max());
        let free = self.cfg.memory_bins() - 1;
        let d = self.sys.dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        let mut idx = vec![0usize; free];
        let mut future = vec![ZERO; free];
        loop {
            let mut log_w = 0.0;
            for (f, &i) in future.iter_mut().zip(&idx) {
                *f = quad.nodes()[i];
                log_w += quad.log_lebesgue_weight(i);
            }
            let psi = project_memory(&joint, &future)?;
            let w = (log_w + psi.log_weight() - base).exp();
            let proj = psi.projector();
            for (a, b) in acc.data_mut().iter_mut().zip(proj.data()) {
                *a += b * w;
            }
            // odometer over the product grid
            let mut k = 0;
            while k < free {
                idx[k] += 1;
                if idx[k] < quad.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == free {
                break;
            }
        }
        Ok(acc)
    }

    /// Monte-Carlo version of [`Self::average_retrodicted_quadrature`]:
    /// future values drawn from the Gaussian measure, projectors weighted
    /// by their likelihood. Returns the estimate and the Frobenius norm of
    /// its entrywise standard error.
    pub fn average_retrodicted_monte_carlo(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        p: usize,
        samples: usize,
        seed: u64,
    ) -> Result<(ComplexMatrix, f64)> {
        if samples < 2 {
            return Err(Error::invalid(
                "monitor",
                "Monte-Carlo average needs at least 2 samples",
            ));
        }
        let joint = self.replay(record, initial, p, |_| Ok(()))?;
        let base = joint.vector().log_weight();
        let free = self.cfg.memory_bins() - 1;
        let d = self.sys.dim();
        let mut rng = stream_rng(seed, 0);
        let mut sum = vec![ZERO; d * d];
        let mut sum_sq = vec![0.0; d * d];
        let mut future = vec![ZERO; free];
        for _ in 0..samples {
            let mut log_measure = 0.0;
            for f in future.iter_mut() {
                *f = complex_normal(&mut rng);
                log_measure += bargmann_log_measure(*f);
            }
            let psi = project_memory(&joint, &future)?;
            let w = (psi.log_weight() - base - log_measure).exp();
            let proj = psi.projector();
            for (k, z) in proj.data().iter().enumerate() {
                let x = z * w;
                sum[k] += x;
                sum_sq[k] += x.norm_sqr();
            }
        }
        let n = samples as f64;
        let mean = ComplexMatrix::from_vec(d, d, sum.iter().map(|s| s / n).collect())?;
        let var: f64 = sum
            .iter()
            .zip(&sum_sq)
            .map(|(s, q)| ((q / n - (s / n).norm_sqr()) * n / (n - 1.0)).max(0.0))
            .sum();
        Ok((mean, (var / n).sqrt()))
    }

    /// `⟨s⟩` after `p` steps for every `p` available under `basis`.
    pub fn coupling_means(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        basis: SignalState,
    ) -> Result<Vec<C64>> {
        match basis {
            SignalState::Retrodicted => Ok(self
                .retrodict_all(record, initial)?
                .iter()
                .map(|r| self.sys.coupling().expectation(r.psi.amplitudes()))
                .collect()),
            SignalState::ConditionalMixed => Ok(self
                .conditional_mixed_all(record, initial, record.len())?
                .iter()
                .map(|c| self.sys.coupling_mean(&c.rho))
                .collect()),
        }
    }

    /// Record length needed to predict `ξ̄_m` under `basis`.
    pub fn prediction_horizon(&self, m: usize, basis: SignalState) -> usize {
        match basis {
            SignalState::Retrodicted => self.retrodiction_horizon(m.saturating_sub(1)),
            SignalState::ConditionalMixed => m.saturating_sub(1),
        }
    }

    /// `E[ξ̄_m] = Σ_k θ_k ⟨s⟩_{m−k−1}`.
    pub fn predicted_signal_mean(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        m: usize,
        basis: SignalState,
    ) -> Result<SignalPrediction> {
        if m == 0 {
            return Err(Error::invalid("monitor", "record bins are numbered from 1"));
        }
        let horizon = self.prediction_horizon(m, basis);
        self.check_record(record, horizon)?;
        let prefix = record.prefix(horizon)?;
        let means = self.coupling_means(&prefix, initial, basis)?;
        let theta = self.kernel.step_amplitudes();
        let steps_used = (0..theta.len()).filter(|&k| k < m).map(|k| m - k - 1).collect();
        Ok(SignalPrediction {
            mean: convolve_coupling_means(&theta, &means, m),
            steps_used,
        })
    }

    /// `ξ̄_m − E[ξ̄_m]` for every `m` the record supports under `basis`.
    pub fn innovations(
        &self,
        record: &HeterodyneRecord,
        initial: &StateVector,
        basis: SignalState,
    ) -> Result<Vec<C64>> {
        let means = self.coupling_means(record, initial, basis)?;
        let theta = self.kernel.step_amplitudes();
        // ⟨s⟩ is known for p < means.len(), so ξ̄_m is predictable for m ≤ means.len()
        let last = record.len().min(means.len());
        Ok((1..=last)
            .map(|m| record.bins()[m - 1] - convolve_coupling_means(&theta, &means, m))
            .collect())
    }

    /// Non-selective reduced states after `0..=steps` steps.
    pub fn evolve_nonselective(&self, initial: &StateVector, steps: usize) -> Result<Vec<ComplexMatrix>> {
        evolve_nonselective(&self.sys, &self.kernel, &self.cfg, steps, initial)
    }

    /// Runs `trajectories` records in parallel (stream `i` for trajectory
    /// `i`) and averages their conditional states in index order.
    pub fn run_ensemble(
        &self,
        initial: &StateVector,
        steps: usize,
        trajectories: usize,
        seed: u64,
    ) -> Result<EnsembleSummary> {
        self.run_ensemble_with(initial, steps, trajectories, seed, |_| Ok(()))
    }

    /// As [`Self::run_ensemble`], handing each trajectory to `sink` in index
    /// order.
    pub fn run_ensemble_with(
        &self,
        initial: &StateVector,
        steps: usize,
        trajectories: usize,
        seed: u64,
        mut sink: impl FnMut(&Trajectory) -> Result<()>,
    ) -> Result<EnsembleSummary> {
        if trajectories == 0 {
            return Err(Error::invalid("monitor", "ensemble needs at least one trajectory"));
        }
        self.check_initial(initial)?;
        const BLOCK: usize = 256;
        let mut acc = EnsembleAccumulator::new(self.sys.dim(), steps);
        for start in (0..trajectories).step_by(BLOCK) {
            let end = (start + BLOCK).min(trajectories);
            let block: Vec<Result<Trajectory>> = (start..end)
                .into_par_iter()
                .map(|i| self.run_trajectory(initial, steps, seed, i as u64))
                .collect();
            for t in block {
                let t = t?;
                acc.add(&t.states);
                sink(&t)?;
            }
        }
        Ok(acc.finish())
    }
}

struct EnsembleAccumulator {
    d: usize,
    count: usize,
    sum: Vec<Vec<C64>>,
    sum_sq_re: Vec<Vec<f64>>,
    sum_sq_im: Vec<Vec<f64>>,
}

impl EnsembleAccumulator {
    fn new(d: usize, steps: usize) -> Self {
        Self {
            d,
            count: 0,
            sum: vec![vec![ZERO; d * d]; steps + 1],
            sum_sq_re: vec![vec![0.0; d * d]; steps + 1],
            sum_sq_im: vec![vec![0.0; d * d]; steps + 1],
        }
    }

    fn add(&mut self, states: &[ConditionalMixedState]) {
        self.count += 1;
        for (n, st) in states.iter().enumerate() {
            for (k, z) in st.rho.data().iter().enumerate() {
                self.sum[n][k] += z;
                self.sum_sq_re[n][k] += z.re * z.re;
                self.sum_sq_im[n][k] += z.im * z.im;
            }
        }
    }

    fn finish(self) -> EnsembleSummary {
        let n = self.count as f64;
        let d = self.d;
        let mut mean = Vec::with_capacity(self.sum.len());
        let mut standard_error = Vec::with_capacity(self.sum.len());
        for ((s, qr), qi) in self.sum.iter().zip(&self.sum_sq_re).zip(&self.sum_sq_im) {
            let m: Vec<C64> = s.iter().map(|z| z / n).collect();
            let se: Vec<C64> = m
                .iter()
                .zip(qr.iter().zip(qi))
                .map(|(mu, (r, i))| {
                    if self.count < 2 {
                        return C64::new(f64::INFINITY, f64::INFINITY);
                    }
                    let vr = ((r / n - mu.re * mu.re) * n / (n - 1.0)).max(0.0);
                    let vi = ((i / n - mu.im * mu.im) * n / (n - 1.0)).max(0.0);
                    C64::new((vr / n).sqrt(), (vi / n).sqrt())
                })
                .collect();
            mean.push(ComplexMatrix::from_vec(d, d, m).expect("d*d entries"));
            standard_error.push(ComplexMatrix::from_vec(d, d, se).expect("d*d entries"));
        }
        EnsembleSummary {
            trajectories: self.count,
            mean,
            standard_error,
        }
    }
}

/// Ensemble means of the conditional states per step.
#[derive(Clone, Debug)]
pub struct EnsembleSummary {
    pub trajectories: usize,
    pub mean: Vec<ComplexMatrix>,
    /// Entrywise standard errors: real part for `Re ρ_ij`, imaginary part
    /// for `Im ρ_ij`.
    pub standard_error: Vec<ComplexMatrix>,
}

impl EnsembleSummary {
    /// Standard error of the trace distance between the step-`n` mean and a
    /// fixed state, propagated as `(√d/2)·‖SE‖_F`.
    pub fn trace_distance_error(&self, n: usize) -> f64 {
        let se = &self.standard_error[n];
        let f: f64 = se.data().iter().map(|z| z.re * z.re + z.im * z.im).sum();
        (se.rows() as f64).sqrt() / 2.0 * f.sqrt()
    }
}

/// Text dump of conditional states: one line per step,
/// `m, weight, re(ρ_00), im(ρ_00), re(ρ_01), ...` (row-major).
pub fn conditional_states_to_text(states: &[ConditionalMixedState]) -> String {
    let mut out = String::new();
    let d = states.first().map_or(0, |s| s.rho.rows());
    let _ = writeln!(out, "# {} conditional-states {}", textio::MAGIC, textio::VERSION);
    let _ = writeln!(out, "# dim = {d}");
    for st in states {
        let _ = write!(out, "{}, {}", st.step, textio::fmt_f64(st.weight()));
        for z in st.rho.data() {
            let _ = write!(out, ", {}, {}", textio::fmt_f64(z.re), textio::fmt_f64(z.im));
        }
        out.push('\n');
    }
    out
}

/// Runs one trajectory with a freshly built [`Monitor`].
pub fn run_trajectory(
    sys: &SystemSpec,
    kernel: &CouplingKernel,
    cfg: &LatticeConfig,
    steps: usize,
    seed: u64,
    initial: &StateVector,
) -> Result<Trajectory> {
    Monitor::new(sys.clone(), kernel.clone(), cfg.clone())?.run_trajectory(initial, steps, seed, 0)
}

pub fn retrodict(
    record: &HeterodyneRecord,
    sys: &SystemSpec,
    kernel: &CouplingKernel,
    cfg: &LatticeConfig,
    p: usize,
    initial: &StateVector,
) -> Result<RetrodictedPureState> {
    Monitor::new(sys.clone(), kernel.clone(), cfg.clone())?.retrodict(record, initial, p)
}

pub fn conditional_mixed(
    record: &HeterodyneRecord,
    sys: &SystemSpec,
    kernel: &CouplingKernel,
    cfg: &LatticeConfig,
    n: usize,
    initial: &StateVector,
) -> Result<ConditionalMixedState> {
    Monitor::new(sys.clone(), kernel.clone(), cfg.clone())?.conditional_mixed(record, initial, n)
}

pub fn predicted_signal_mean(
    record: &HeterodyneRecord,
    sys: &SystemSpec,
    kernel: &CouplingKernel,
    cfg: &LatticeConfig,
    m: usize,
    initial: &StateVector,
    basis: SignalState,
) -> Result<SignalPrediction> {
    Monitor::new(sys.clone(), kernel.clone(), cfg.clone())?.predicted_signal_mean(record, initial, m, basis)
}
