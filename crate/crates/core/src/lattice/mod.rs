//! The memory lattice: the system plus `N` field bins that are still inside
//! the interaction range, evolved as a Markovian collision model.
//!
//! Factor 0 of the joint space is the system; factor `k + 1` is the bin that
//! exits after `k` more steps and couples through `κ_k`. One conveyor step
//! applies the joint collision unitary, releases factor 1 to the detector and
//! appends a fresh vacuum bin at the far end.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::{
    bargmann_contract, bargmann_log_measure, expm, reduced_density, ComplexMatrix, CompositeSpace, StateVector, C64,
    DEFAULT_DIMENSION_CAP, DEFAULT_HERMITIAN_TOL, I, ZERO,
};
use crate::kernel::CouplingKernel;

/// The open system: Hamiltonian `H_S` (units of 1/time) and coupling
/// operator `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    label: String,
    hamiltonian: ComplexMatrix,
    coupling: ComplexMatrix,
}

impl SystemSpec {
    pub fn new(label: impl Into<String>, hamiltonian: ComplexMatrix, coupling: ComplexMatrix) -> Result<Self> {
        if !hamiltonian.is_square() || hamiltonian.rows() == 0 {
            return Err(Error::invalid(
                "lattice",
                "hamiltonian must be a nonempty square matrix",
            ));
        }
        if (coupling.rows(), coupling.cols()) != (hamiltonian.rows(), hamiltonian.cols()) {
            return Err(Error::Shape {
                context: "coupling operator",
                expected: format!("{0}x{0}", hamiltonian.rows()),
                found: format!("{}x{}", coupling.rows(), coupling.cols()),
            });
        }
        if !hamiltonian.is_finite() || !coupling.is_finite() {
            return Err(Error::NonFinite {
                module: "lattice",
                context: "system matrices",
            });
        }
        if !hamiltonian.is_hermitian(DEFAULT_HERMITIAN_TOL) {
            return Err(Error::invalid(
                "lattice",
                format!(
                    "hamiltonian is not Hermitian (defect {:e})",
                    hamiltonian.hermiticity_defect()
                ),
            ));
        }
        Ok(Self {
            label: label.into(),
            hamiltonian,
            coupling,
        })
    }

    /// Qubit with `s = σ₋` (index 0 is the excited state) and the given
    /// Hamiltonian.
    pub fn decaying_qubit(hamiltonian: ComplexMatrix) -> Result<Self> {
        Self::new("qubit", hamiltonian, crate::hilbert::qubit::lowering())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    /// `Tr(ρ s)`.
    pub fn coupling_mean(&self, rho: &ComplexMatrix) -> C64 {
        rho.trace_product(&self.coupling)
    }

    /// Short content hash of the matrices (the label is not included).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"system");
        h.update((self.dim() as u64).to_le_bytes());
        for z in self.hamiltonian.data().iter().chain(self.coupling.data()) {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeConfig {
    dt: f64,
    memory_bins: usize,
    n_max: usize,
    dimension_cap: usize,
}

impl LatticeConfig {
    pub fn new(dt: f64, memory_bins: usize, n_max: usize) -> Result<Self> {
        Self::with_dimension_cap(dt, memory_bins, n_max, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_dimension_cap(dt: f64, memory_bins: usize, n_max: usize, dimension_cap: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(
                "lattice",
                format!("dt must be positive and finite, got {dt}"),
            ));
        }
        if memory_bins == 0 {
            return Err(Error::invalid("lattice", "memory needs at least one bin"));
        }
        if n_max == 0 {
            return Err(Error::invalid("lattice", "Fock cutoff n_max must be >= 1"));
        }
        let cfg = Self {
            dt,
            memory_bins,
            n_max,
            dimension_cap,
        };
        cfg.memory_dim()?;
        Ok(cfg)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn memory_bins(&self) -> usize {
        self.memory_bins
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dimension_cap(&self) -> usize {
        self.dimension_cap
    }

    pub fn bin_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn memory_time(&self) -> f64 {
        self.memory_bins as f64 * self.dt
    }

    /// `(n_max+1)^N`, checked against the cap.
    pub fn memory_dim(&self) -> Result<usize> {
        let dim = (0..self.memory_bins).try_fold(1usize, |acc, _| acc.checked_mul(self.bin_dim()));
        match dim {
            Some(d) if d <= self.dimension_cap => Ok(d),
            _ => Err(Error::DimensionCap {
                requested: dim.unwrap_or(usize::MAX),
                cap: self.dimension_cap,
            }),
        }
    }

    /// System ⊗ memory space; fails if `d_S·(n_max+1)^N` exceeds the cap.
    pub fn joint_space(&self, system_dim: usize) -> Result<CompositeSpace> {
        let mut dims = vec![system_dim];
        dims.extend(std::iter::repeat_n(self.bin_dim(), self.memory_bins));
        CompositeSpace::with_cap(dims, self.dimension_cap)
    }

    pub fn check_kernel(&self, kernel: &CouplingKernel) -> Result<()> {
        if kernel.len() != self.memory_bins {
            return Err(Error::Length {
                module: "lattice",
                context: "coupling kernel",
                needed: self.memory_bins,
                got: kernel.len(),
            });
        }
        if (kernel.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::invalid(
                "lattice",
                format!("kernel dt {} differs from lattice dt {}", kernel.dt(), self.dt),
            ));
        }
        Ok(())
    }
}

/// Pure state of system ⊗ memory after `step` conveyor steps.
///
/// Conditioned branches carry their likelihood in the vector's log-weight.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    space: CompositeSpace,
    vector: StateVector,
    step: usize,
}

impl JointState {
    pub fn new(space: CompositeSpace, vector: StateVector, step: usize) -> Result<Self> {
        if vector.dim() != space.total_dim() {
            return Err(Error::Shape {
                context: "joint state",
                expected: format!("vector of length {}", space.total_dim()),
                found: format!("length {}", vector.dim()),
            });
        }
        Ok(Self { space, vector, step })
    }

    /// `ψ_S ⊗ |0⟩^{⊗N}`.
    pub fn with_vacuum_memory(system: &StateVector, cfg: &LatticeConfig) -> Result<Self> {
        let space = cfg.joint_space(system.dim())?;
        let stride = space.stride(0);
        let mut amps = vec![ZERO; space.total_dim()];
        for (s, &a) in system.amplitudes().iter().enumerate() {
            amps[s * stride] = a;
        }
        let vector = StateVector::with_log_weight(amps, system.log_weight())?;
        Self::new(space, vector, 0)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn vector(&self) -> &StateVector {
        &self.vector
    }

    pub fn vector_mut(&mut self) -> &mut StateVector {
        &mut self.vector
    }

    pub fn into_vector(self) -> StateVector {
        self.vector
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn bins(&self) -> usize {
        self.space.factors() - 1
    }

    /// Unit-trace reduced state of the system.
    pub fn system_density(&self) -> Result<ComplexMatrix> {
        normalized_reduced(self.vector.amplitudes(), &self.space, &[0])
    }

    /// Unit-trace reduced state of one memory bin (`bin` in `1..=N`).
    pub fn bin_density(&self, bin: usize) -> Result<ComplexMatrix> {
        if bin == 0 {
            return Err(Error::FactorIndex {
                index: bin,
                factors: self.space.factors(),
            });
        }
        normalized_reduced(self.vector.amplitudes(), &self.space, &[bin])
    }
}

fn normalized_reduced(psi: &[C64], space: &CompositeSpace, keep: &[usize]) -> Result<ComplexMatrix> {
    let rho = reduced_density(psi, space, keep)?;
    let tr = rho.trace().re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::InvalidState(format!("reduced state has trace {tr}")));
    }
    Ok(rho.scale_real(1.0 / tr))
}

/// One-step generator
/// `G = −i·dt·H_S⊗1 + Σ_k (θ_k s⊗b_k† − θ_k* s†⊗b_k)`, `θ_k = κ_k dt^{3/2}`,
/// where `b_k` acts on factor `k + 1`.
pub fn build_collision_generator(
    sys: &SystemSpec,
    kernel: &CouplingKernel,
    cfg: &LatticeConfig,
) -> Result<ComplexMatrix> {
    cfg.check_kernel(kernel)?;
    let space = cfg.joint_space(sys.dim())?;
    let dim = space.total_dim();
    let d_s = sys.dim();
    let mem = dim / d_s;
    let nb = cfg.bin_dim();
    let theta = kernel.step_amplitudes();
    let h = sys.hamiltonian();
    let s = sys.coupling();
    let mut g = ComplexMatrix::zeros(dim, dim);

    let dt_i = I * cfg.dt();
    for a in 0..d_s {
        for b in 0..d_s {
            let hab = h[(a, b)];
            if hab == ZERO {
                continue;
            }
            for m in 0..mem {
                g[(a * mem + m, b * mem + m)] -= dt_i * hab;
            }
        }
    }

    for (k, &th) in theta.iter().enumerate() {
        if th == ZERO {
            continue;
        }
        // bin k is factor k+1; within the memory block its stride is
        // nb^(N-1-k)
        let stride = space.stride(k + 1);
        for m in 0..mem {
            let n = (m / stride) % nb;
            if n + 1 >= nb {
                continue;
            }
            let up = m + stride;
            let amp = ((n + 1) as f64).sqrt();
            // θ s⊗b† raises; −θ* s†⊗b lowers (its adjoint term)
            for a in 0..d_s {
                for b in 0..d_s {
                    let sab = s[(a, b)];
                    if sab == ZERO {
                        continue;
                    }
                    g[(a * mem + up, b * mem + m)] += th * sab * amp;
                    g[(b * mem + m, a * mem + up)] -= th.conj() * sab.conj() * amp;
                }
            }
        }
    }
    Ok(g)
}

/// Cached collision unitary `U = exp(G)` for one lattice configuration.
#[derive(Clone, Debug)]
pub struct CollisionPropagator {
    space: CompositeSpace,
    generator: ComplexMatrix,
    unitary: ComplexMatrix,
    theta: Vec<C64>,
}

impl CollisionPropagator {
    pub fn new(sys: &SystemSpec, kernel: &CouplingKernel, cfg: &LatticeConfig) -> Result<Self> {
        let generator = build_collision_generator(sys, kernel, cfg)?;
        let unitary = expm(&generator)?;
        Ok(Self {
            space: cfg.joint_space(sys.dim())?,
            generator,
            unitary,
            theta: kernel.step_amplitudes(),
        })
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    /// `θ_k = κ_k dt^{3/2}`.
    pub fn step_amplitudes(&self) -> &[C64] {
        &self.theta
    }
}

/// The joint state right after a collision, before bin 1 leaves.
#[derive(Clone, Debug)]
pub struct ExitingState {
    space: CompositeSpace,
    vector: StateVector,
    step: usize,
}

/// Applies the collision unitary. The returned state still holds the
/// exiting bin as factor 1; its step counter is already incremented.
pub fn conveyor_step(state: &JointState, prop: &CollisionPropagator) -> Result<ExitingState> {
    if state.space != prop.space {
        return Err(Error::Shape {
            context: "conveyor step",
            expected: format!("{:?}", prop.space.factor_dims()),
            found: format!("{:?}", state.space.factor_dims()),
        });
    }
    let amps = prop.unitary.mat_vec(state.vector.amplitudes());
    Ok(ExitingState {
        space: state.space.clone(),
        vector: StateVector::with_log_weight(amps, state.vector.log_weight())?,
        step: state.step + 1,
    })
}

impl ExitingState {
    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn vector(&self) -> &StateVector {
        &self.vector
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Unit-trace reduced state of the exiting bin.
    pub fn exit_density(&self) -> Result<ComplexMatrix> {
        normalized_reduced(self.vector.amplitudes(), &self.space, &[1])
    }

    /// `⟨b⟩` of the exiting bin, normalized by the state norm.
    pub fn exit_mean(&self) -> C64 {
        let psi = self.vector.amplitudes();
        let stride = self.space.stride(1);
        let nb = self.space.factor_dims()[1];
        let mut acc = ZERO;
        for (i, &x) in psi.iter().enumerate() {
            let n = (i / stride) % nb;
            if n > 0 {
                acc += psi[i - stride].conj() * x * (n as f64).sqrt();
            }
        }
        acc / self.vector.norm_sqr()
    }

    /// Unit-trace system state with every bin, including the exiting one,
    /// traced out.
    pub fn system_density(&self) -> Result<ComplexMatrix> {
        normalized_reduced(self.vector.amplitudes(), &self.space, &[0])
    }

    /// Bargmann-projects the exiting bin on outcome `ξ̄`, multiplies the
    /// weight by `e^{−|ξ̄|²}/π` and attaches a fresh vacuum bin. The result
    /// is not renormalized.
    pub fn project(&self, xi: C64) -> Result<JointState> {
        let (psi, reduced) = bargmann_contract(self.vector.amplitudes(), &self.space, 1, xi)?;
        let nb = self.space.factor_dims()[1];
        let vector = StateVector::with_log_weight(
            append_vacuum(&psi, nb),
            self.vector.log_weight() + bargmann_log_measure(xi),
        )?;
        JointState::new(reduced.with_factor_appended(nb)?, vector, self.step)
    }
}

/// `ψ ⊗ |0⟩` for a new last factor of dimension `bin_dim`.
pub(crate) fn append_vacuum(psi: &[C64], bin_dim: usize) -> Vec<C64> {
    let mut out = vec![ZERO; psi.len() * bin_dim];
    for (i, &x) in psi.iter().enumerate() {
        out[i * bin_dim] = x;
    }
    out
}

/// Density-matrix evolution of system ⊗ memory with exiting bins traced out.
#[derive(Clone, Debug)]
pub struct NonselectiveEvolution {
    prop: CollisionPropagator,
    rho: ComplexMatrix,
    step: usize,
}

impl NonselectiveEvolution {
    pub fn new(sys: &SystemSpec, kernel: &CouplingKernel, cfg: &LatticeConfig, initial: &StateVector) -> Result<Self> {
        if initial.dim() != sys.dim() {
            return Err(Error::Shape {
                context: "initial system state",
                expected: format!("length {}", sys.dim()),
                found: format!("length {}", initial.dim()),
            });
        }
        if !initial.is_normalized(1e-10) {
            return Err(Error::InvalidState(format!(
                "initial state has norm {}, expected 1",
                initial.norm()
            )));
        }
        let prop = CollisionPropagator::new(sys, kernel, cfg)?;
        let joint = JointState::with_vacuum_memory(initial, cfg)?;
        Ok(Self {
            rho: joint.vector.projector(),
            prop,
            step: 0,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn joint_density(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.prop.space
    }

    pub fn system_density(&self) -> Result<ComplexMatrix> {
        crate::hilbert::partial_trace(&self.rho, &self.prop.space, &[0])
    }

    /// One conveyor step. Returns `⟨b⟩` of the bin that exits.
    pub fn advance(&mut self) -> C64 {
        let post = self.rho.conjugate_by(&self.prop.unitary);
        let space = &self.prop.space;
        let dims = space.factor_dims();
        let nb = dims[1];
        let stride = space.stride(1);
        let outer = dims[0];
        let dim = space.total_dim();

        let mut mean = ZERO;
        for i in 0..dim {
            let n = (i / stride) % nb;
            if n > 0 {
                mean += post[(i, i - stride)] * (n as f64).sqrt();
            }
        }

        // trace out factor 1, then append |0⟩⟨0| as the last factor
        let mut next = ComplexMatrix::zeros(dim, dim);
        for s1 in 0..outer {
            for r1 in 0..stride {
                let row = (s1 * stride + r1) * nb;
                for s2 in 0..outer {
                    for r2 in 0..stride {
                        let col = (s2 * stride + r2) * nb;
                        let mut acc = ZERO;
                        for b in 0..nb {
                            acc += post[((s1 * nb + b) * stride + r1, (s2 * nb + b) * stride + r2)];
                        }
                        next[(row, col)] = acc;
                    }
                }
            }
        }
        self.rho = next;
        self.step += 1;
        mean
    }
}

/// Reduced system states `ρ_S` after `0..=steps` steps of trace-out
/// evolution.
pub fn evolve_nonselective(
    sys: &SystemSpec,
    kernel: &CouplingKernel,
    cfg: &LatticeConfig,
    steps: usize,
    initial: &StateVector,
) -> Result<Vec<ComplexMatrix>> {
    let mut evo = NonselectiveEvolution::new(sys, kernel, cfg, initial)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(evo.system_density()?);
    for _ in 0..steps {
        evo.advance();
        out.push(evo.system_density()?);
    }
    Ok(out)
}

/// Exit-bin means from direct simulation next to the convolution
/// prediction `Σ_k θ_k ⟨s⟩`.
#[derive(Clone, Debug)]
pub struct OutputMeans {
    /// `⟨b⟩` of the bin exiting at step `m`, at index `m − 1`.
    pub direct: Vec<C64>,
    /// `Σ_k θ_k ⟨s⟩_{m−k−1}` where `⟨s⟩_p` is taken after `p` steps.
    pub predicted: Vec<C64>,
    /// `⟨s⟩_p` for `p = 0..=steps`.
    pub coupling_means: Vec<C64>,
    pub max_defect: f64,
}

/// Convolution prediction of the exit-bin mean at step `m ≥ 1` from the
/// coupling means `⟨s⟩_p` of the states entering each step.
pub fn convolve_coupling_means(theta: &[C64], coupling_means: &[C64], m: usize) -> C64 {
    theta
        .iter()
        .enumerate()
        .filter(|&(k, _)| k < m)
        .map(|(k, th)| th * coupling_means[m - k - 1])
        .sum()
}

pub fn output_mean_nonselective(
    sys: &SystemSpec,
    kernel: &CouplingKernel,
    cfg: &LatticeConfig,
    steps: usize,
    initial: &StateVector,
) -> Result<OutputMeans> {
    let mut evo = NonselectiveEvolution::new(sys, kernel, cfg, initial)?;
    let mut coupling_means = Vec::with_capacity(steps + 1);
    let mut direct = Vec::with_capacity(steps);
    coupling_means.push(sys.coupling_mean(&evo.system_density()?));
    for _ in 0..steps {
        direct.push(evo.advance());
        coupling_means.push(sys.coupling_mean(&evo.system_density()?));
    }
    let theta = kernel.step_amplitudes();
    let predicted: Vec<C64> = (1..=steps)
        .map(|m| convolve_coupling_means(&theta, &coupling_means, m))
        .collect();
    let max_defect = direct
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(OutputMeans {
        direct,
        predicted,
        coupling_means,
        max_defect,
    })
}

#[cfg(test)]
mod tests;
