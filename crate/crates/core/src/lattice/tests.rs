use super::*;
use crate::hilbert::{expm, qubit, tensor, trace_distance, ONE};
use crate::testutil::{generator_oracle, random_hermitian, random_matrix};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn excited() -> StateVector {
    StateVector::basis(2, 0)
}

#[test]
fn generator_matches_kronecker_oracle() {
    let sys = SystemSpec::new("rand", random_hermitian(3, 1), random_matrix(3, 2)).unwrap();
    let cfg = LatticeConfig::new(0.05, 3, 2).unwrap();
    let kernel = CouplingKernel::new(0.05, vec![c(1.3, 0.2), c(-0.4, 0.7), c(0.1, -0.3)]).unwrap();
    let g = build_collision_generator(&sys, &kernel, &cfg).unwrap();
    let oracle = generator_oracle(&sys, &kernel, &cfg);
    assert!(g.max_abs_diff(&oracle) < 1e-14);
    assert!(g.is_anti_hermitian(1e-12));
}

#[test]
fn decoupled_generator_is_system_hamiltonian() {
    let h = random_hermitian(2, 5);
    let sys = SystemSpec::decaying_qubit(h.clone()).unwrap();
    let cfg = LatticeConfig::new(0.1, 2, 1).unwrap();
    let g = build_collision_generator(&sys, &CouplingKernel::zeros(0.1, 2).unwrap(), &cfg).unwrap();
    let expected = tensor(&h, &ComplexMatrix::identity(4)).unwrap().scale(c(0.0, -0.1));
    assert!(g.max_abs_diff(&expected) < 1e-15);
}

#[test]
fn markov_amplitude_is_sqrt_gamma_dt() {
    let (gamma, dt) = (0.7, 0.01);
    let kernel = CouplingKernel::markov(gamma, dt).unwrap();
    let sys = SystemSpec::decaying_qubit(ComplexMatrix::zeros(2, 2)).unwrap();
    let cfg = LatticeConfig::new(dt, 1, 1).unwrap();
    let g = build_collision_generator(&sys, &kernel, &cfg).unwrap();
    // |e,0⟩ = index 0 → |g,1⟩ = index 3 with amplitude θ·⟨g|σ₋|e⟩
    assert!((g[(3, 0)].re - (gamma * dt).sqrt()).abs() < 1e-15);
    assert!((g[(0, 3)].re + (gamma * dt).sqrt()).abs() < 1e-15);
}

#[test]
fn dimension_cap_is_enforced() {
    assert!(matches!(
        LatticeConfig::with_dimension_cap(0.1, 5, 2, 200),
        Err(Error::DimensionCap {
            requested: 243,
            cap: 200
        })
    ));
    let cfg = LatticeConfig::with_dimension_cap(0.1, 4, 2, 100).unwrap();
    assert!(matches!(cfg.joint_space(2), Err(Error::DimensionCap { .. })));
}

#[test]
fn kernel_length_must_match() {
    let sys = SystemSpec::decaying_qubit(ComplexMatrix::zeros(2, 2)).unwrap();
    let cfg = LatticeConfig::new(0.1, 2, 1).unwrap();
    let err = build_collision_generator(&sys, &CouplingKernel::zeros(0.1, 3).unwrap(), &cfg);
    assert!(matches!(err, Err(Error::Length { needed: 2, got: 3, .. })));
}

#[test]
fn non_hermitian_hamiltonian_rejected() {
    let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
    assert!(SystemSpec::decaying_qubit(h).is_err());
}

#[test]
fn decoupled_step_leaves_vacuum_and_rotates_system() {
    let h = random_hermitian(2, 9);
    let sys = SystemSpec::decaying_qubit(h.clone()).unwrap();
    let cfg = LatticeConfig::new(0.2, 2, 2).unwrap();
    let prop = CollisionPropagator::new(&sys, &CouplingKernel::zeros(0.2, 2).unwrap(), &cfg).unwrap();
    let psi0 = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let joint = JointState::with_vacuum_memory(&psi0, &cfg).unwrap();
    let exiting = conveyor_step(&joint, &prop).unwrap();
    let vac = ComplexMatrix::diagonal(&[ONE, ZERO, ZERO]);
    assert!(exiting.exit_density().unwrap().max_abs_diff(&vac) < 1e-14);
    let u = expm(&h.scale(c(0.0, -0.2))).unwrap();
    let expected = StateVector::new(u.mat_vec(psi0.amplitudes())).unwrap().projector();
    assert!(exiting.system_density().unwrap().max_abs_diff(&expected) < 1e-12);
}

#[test]
fn collision_preserves_norm_and_fresh_bin_is_vacuum() {
    let sys = SystemSpec::new("rand", random_hermitian(2, 3), random_matrix(2, 4)).unwrap();
    let cfg = LatticeConfig::new(0.1, 3, 2).unwrap();
    let kernel = CouplingKernel::exponential(1.0, 2.0, 0.1, 3).unwrap();
    let prop = CollisionPropagator::new(&sys, &kernel, &cfg).unwrap();
    let mut joint = JointState::with_vacuum_memory(&excited(), &cfg).unwrap();
    for step in 0..4 {
        let before = joint.vector().norm_sqr();
        let exiting = conveyor_step(&joint, &prop).unwrap();
        assert!((exiting.vector().norm_sqr() - before).abs() < 1e-10 * before);
        assert_eq!(exiting.step(), step + 1);
        joint = exiting.project(c(0.3, -0.2)).unwrap();
        let last = joint.bin_density(cfg.memory_bins()).unwrap();
        assert!((last[(0, 0)].re - 1.0).abs() < 1e-14);
        joint.vector_mut().normalize_into_weight().unwrap();
    }
}

#[test]
fn markov_decay_matches_exponential() {
    let dt = 0.01;
    let sys = SystemSpec::decaying_qubit(ComplexMatrix::zeros(2, 2)).unwrap();
    let cfg = LatticeConfig::new(dt, 1, 1).unwrap();
    let states = evolve_nonselective(&sys, &CouplingKernel::markov(1.0, dt).unwrap(), &cfg, 300, &excited()).unwrap();
    for (n, rho) in states.iter().enumerate() {
        let exact = (-(n as f64) * dt).exp();
        assert!((rho[(0, 0)].re - exact).abs() <= 0.02 * exact, "step {n}");
    }
}

fn max_decay_deviation(dt: f64, t_end: f64) -> f64 {
    let steps = (t_end / dt).round() as usize;
    let sys = SystemSpec::decaying_qubit(ComplexMatrix::zeros(2, 2)).unwrap();
    let cfg = LatticeConfig::new(dt, 1, 1).unwrap();
    let states = evolve_nonselective(&sys, &CouplingKernel::markov(1.0, dt).unwrap(), &cfg, steps, &excited()).unwrap();
    states
        .iter()
        .enumerate()
        .map(|(n, rho)| (rho[(0, 0)].re - (-(n as f64) * dt).exp()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn markov_decay_converges_at_first_order() {
    let coarse = max_decay_deviation(0.02, 3.0);
    let fine = max_decay_deviation(0.01, 3.0);
    let order = (coarse / fine).log2();
    assert!(order > 0.9, "observed order {order}");
}

#[test]
fn nonselective_states_are_valid_densities() {
    let sys = SystemSpec::new("rand", random_hermitian(2, 11), random_matrix(2, 12)).unwrap();
    let cfg = LatticeConfig::new(0.1, 3, 2).unwrap();
    let kernel = CouplingKernel::exponential(1.0, 2.0, 0.1, 3).unwrap();
    let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let mut evo = NonselectiveEvolution::new(&sys, &kernel, &cfg, &psi).unwrap();
    for _ in 0..20 {
        evo.advance();
        let joint = evo.joint_density();
        assert!((joint.trace().re - 1.0).abs() < 1e-10);
        let rho = evo.system_density().unwrap();
        assert!(rho.is_hermitian(1e-12));
        assert!(rho.hermitian_eigenvalues()[0] > -1e-10);
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
    }
}

#[test]
fn decoupled_nonselective_is_unitary() {
    let h = random_hermitian(2, 21);
    let sys = SystemSpec::decaying_qubit(h.clone()).unwrap();
    let cfg = LatticeConfig::new(0.05, 2, 1).unwrap();
    let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let states = evolve_nonselective(&sys, &CouplingKernel::zeros(0.05, 2).unwrap(), &cfg, 30, &psi).unwrap();
    for (n, rho) in states.iter().enumerate() {
        let u = expm(&h.scale(c(0.0, -0.05 * n as f64))).unwrap();
        let expected = psi.projector().conjugate_by(&u);
        assert!(trace_distance(rho, &expected) < 1e-11, "step {n}");
    }
}

#[test]
fn vacuum_output_mean_vanishes_at_first_step() {
    // a diagonal Hamiltonian conserves the excitation number, so the
    // exiting bin carries no coherence
    let sys = SystemSpec::decaying_qubit(qubit::sigma_z()).unwrap();
    let cfg = LatticeConfig::new(0.1, 2, 2).unwrap();
    let kernel = CouplingKernel::exponential(1.0, 2.0, 0.1, 2).unwrap();
    let means = output_mean_nonselective(&sys, &kernel, &cfg, 1, &excited()).unwrap();
    assert_eq!(means.coupling_means[0], ZERO);
    assert!(means.direct[0].norm() < 1e-15);
}

#[test]
fn markov_output_mean_is_heterodyne_drift() {
    let (gamma, dt) = (1.0, 1e-3);
    let sys = SystemSpec::decaying_qubit(ComplexMatrix::zeros(2, 2)).unwrap();
    let cfg = LatticeConfig::new(dt, 1, 2).unwrap();
    let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let means = output_mean_nonselective(&sys, &CouplingKernel::markov(gamma, dt).unwrap(), &cfg, 1, &psi).unwrap();
    let s0 = means.coupling_means[0];
    assert!((s0 - c(0.0, -0.48)).norm() < 1e-15);
    let drift = s0 * (gamma * dt).sqrt();
    // exact to O(θ³) relative
    assert!((means.direct[0] - drift).norm() < 2.0 * gamma * dt * drift.norm());
}

#[test]
fn two_bin_output_mean_is_delayed() {
    let dt = 0.01;
    let sys = SystemSpec::decaying_qubit(qubit::sigma_x().scale_real(3.0)).unwrap();
    let cfg = LatticeConfig::new(dt, 2, 2).unwrap();
    let kernel = CouplingKernel::new(dt, vec![c(2.0, 0.0), c(5.0, 0.0)]).unwrap();
    let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let means = output_mean_nonselective(&sys, &kernel, &cfg, 40, &psi).unwrap();
    let theta = kernel.step_amplitudes();
    let s = &means.coupling_means;
    for m in 2..=40 {
        let predicted = theta[0] * s[m - 1] + theta[1] * s[m - 2];
        assert!((means.predicted[m - 1] - predicted).norm() < 1e-15);
    }
    let scale = means.direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(
        means.max_defect < 0.05 * scale,
        "defect {} vs scale {scale}",
        means.max_defect
    );
}

#[test]
fn bin_coupled_one_step_early_reports_previous_state() {
    let dt = 0.01;
    let sys = SystemSpec::decaying_qubit(ComplexMatrix::zeros(2, 2)).unwrap();
    let cfg = LatticeConfig::new(dt, 2, 2).unwrap();
    let kernel = CouplingKernel::new(dt, vec![ZERO, c(5.0, 0.0)]).unwrap();
    let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
    let means = output_mean_nonselective(&sys, &kernel, &cfg, 2, &psi).unwrap();
    let theta1 = kernel.step_amplitudes()[1];
    // the first exiting bin never interacted
    assert!(means.direct[0].norm() < 1e-15);
    let expected = theta1 * means.coupling_means[0];
    assert!((means.direct[1] - expected).norm() < 1e-3 * expected.norm());
}
