//! Invariant suites run by `memmon validate`.
//!
//! Each check measures a defect on the configured experiment and compares
//! it with a tolerance. Statistical checks compare against a multiple of the
//! measured standard error instead of a fixed number.

use serde::Serialize;

use crate::error::Result;
use crate::hilbert::{partial_trace, trace_distance, ComplexMatrix};
use crate::kernel::{colored_ensemble, estimate_correlation, factorize, reconstruct};
use crate::lattice::{conveyor_step, JointState};
use crate::monitor::{girsanov_colored, outcome_density, Monitor, PlaneQuadrature, SignalState};

use super::config::Experiment;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when the check was not run (too expensive for this config).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl Check {
    fn new(module: &'static str, name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            module,
            name,
            measured,
            tolerance,
            passed: measured <= tolerance,
            skipped: None,
        }
    }

    fn skip(module: &'static str, name: &'static str, reason: impl Into<String>) -> Self {
        Self {
            module,
            name,
            measured: f64::NAN,
            tolerance: f64::NAN,
            passed: true,
            skipped: Some(reason.into()),
        }
    }

    pub fn line(&self) -> String {
        match &self.skipped {
            Some(reason) => format!("SKIP {}::{} ({reason})", self.module, self.name),
            None => format!(
                "{} {}::{} measured {:.3e} tolerance {:.3e}",
                if self.passed { "PASS" } else { "FAIL" },
                self.module,
                self.name,
                self.measured,
                self.tolerance
            ),
        }
    }
}

/// Sizes of the statistical checks.
#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    pub steps: usize,
    pub trajectories: usize,
    pub noise_paths: usize,
    pub seed: u64,
    /// Largest number of quadrature points for the retrodiction average.
    pub max_quadrature_points: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            steps: 40,
            trajectories: 400,
            noise_paths: 2000,
            seed: 0,
            max_quadrature_points: 200_000,
        }
    }
}

pub fn run_all(exp: &Experiment, opts: &ValidateOptions) -> Result<Vec<Check>> {
    let monitor = Monitor::new(exp.system.clone(), exp.kernel.clone(), exp.lattice.clone())?;
    let mut checks = Vec::new();
    hilbert_suite(&monitor, &mut checks);
    kernel_suite(exp, opts, &mut checks)?;
    lattice_suite(exp, &monitor, opts, &mut checks)?;
    monitor_suite(exp, &monitor, opts, &mut checks)?;
    Ok(checks)
}

fn hilbert_suite(monitor: &Monitor, out: &mut Vec<Check>) {
    let prop = monitor.propagator();
    let g = prop.generator();
    let anti = g.adjoint().scale_real(-1.0);
    let scale = g.max_abs().max(1.0);
    out.push(Check::new(
        "hilbert",
        "generator_anti_hermitian",
        g.max_abs_diff(&anti),
        1e-12 * scale,
    ));
    let u = prop.unitary();
    let defect = u.adjoint().matmul(u).max_abs_diff(&ComplexMatrix::identity(u.rows()));
    out.push(Check::new("hilbert", "collision_unitary", defect, 1e-10));
}

fn kernel_suite(exp: &Experiment, opts: &ValidateOptions, out: &mut Vec<Check>) -> Result<()> {
    let kernel = &exp.kernel;
    let n = kernel.len();
    let alpha = reconstruct(kernel);
    let scale = alpha.samples()[0].re.max(f64::MIN_POSITIVE);

    if let Some(f) = &exp.factorization {
        out.push(Check::new("kernel", "factorization_residual", f.residual / scale, 1e-8));
    }
    match factorize(&alpha, n) {
        Ok(f) => out.push(Check::new(
            "kernel",
            "reconstruct_factorize_round_trip",
            f.residual / scale,
            1e-8,
        )),
        Err(e) => out.push(Check::skip("kernel", "reconstruct_factorize_round_trip", e.to_string())),
    }

    let len = 4 * n + 32;
    let paths = colored_ensemble(kernel, len, opts.noise_paths, opts.seed)?;
    let est = estimate_correlation(&paths, n - 1)?;
    let z = (0..n)
        .map(|m| (est.values[m] - alpha.samples()[m]).norm() / est.standard_errors[m].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    out.push(Check::new(
        "kernel",
        "colored_noise_correlation_in_standard_errors",
        z,
        5.0,
    ));
    Ok(())
}

fn lattice_suite(exp: &Experiment, monitor: &Monitor, opts: &ValidateOptions, out: &mut Vec<Check>) -> Result<()> {
    let states = monitor.evolve_nonselective(&exp.initial, opts.steps)?;
    let trace = states.iter().map(|r| (r.trace().re - 1.0).abs()).fold(0.0, f64::max);
    out.push(Check::new("lattice", "nonselective_trace", trace, 1e-10));
    let negativity = states
        .iter()
        .map(|r| -r.hermitian_eigenvalues().into_iter().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    out.push(Check::new("lattice", "nonselective_positivity", negativity, 1e-10));

    let joint = JointState::with_vacuum_memory(&exp.initial, &exp.lattice)?;
    let exiting = conveyor_step(&joint, monitor.propagator())?;
    let norm = (exiting.vector().norm_sqr() - 1.0).abs();
    out.push(Check::new("lattice", "conveyor_step_norm", norm, 1e-12));
    Ok(())
}

fn monitor_suite(exp: &Experiment, monitor: &Monitor, opts: &ValidateOptions, out: &mut Vec<Check>) -> Result<()> {
    let cfg = &exp.lattice;
    let quad = PlaneQuadrature::exact_for_cutoff(cfg.n_max());

    // first exiting bin of the configured experiment
    let joint = JointState::with_vacuum_memory(&exp.initial, cfg)?;
    let exiting = conveyor_step(&joint, monitor.propagator())?;
    let r = exiting.exit_density()?;
    let total: f64 = (0..quad.len())
        .map(|i| quad.log_lebesgue_weight(i).exp() * outcome_density(&r, quad.nodes()[i]))
        .sum();
    out.push(Check::new(
        "monitor",
        "outcome_density_normalization",
        (total - 1.0).abs(),
        1e-10,
    ));

    let rho = exiting.vector().projector();
    let keep: Vec<usize> = (0..exiting.space().factors()).filter(|&f| f != 1).collect();
    let expected = partial_trace(&rho, exiting.space(), &keep)?;
    let mut acc = ComplexMatrix::zeros(expected.rows(), expected.cols());
    for (i, &xi) in quad.nodes().iter().enumerate() {
        let p = exiting.project(xi)?;
        // drop the fresh vacuum bin appended by the projection
        let space = p.space();
        let reduced = partial_trace(
            &p.vector().projector(),
            space,
            &(0..space.factors() - 1).collect::<Vec<_>>(),
        )?;
        let w = (quad.log_lebesgue_weight(i) + p.vector().log_weight()).exp();
        acc = &acc + &reduced.scale_real(w);
    }
    out.push(Check::new(
        "monitor",
        "quadrature_completeness",
        acc.max_abs_diff(&expected),
        1e-10,
    ));

    let traj = monitor.run_trajectory(&exp.initial, opts.steps, opts.seed, 0)?;
    let replay = monitor.conditional_mixed_all(&traj.record, &exp.initial, opts.steps)?;
    let replay_defect = replay
        .iter()
        .zip(&traj.states)
        .map(|(a, b)| a.rho.max_abs_diff(&b.rho) + (a.log_weight - b.log_weight).abs())
        .fold(0.0, f64::max);
    out.push(Check::new("monitor", "conditional_replay", replay_defect, 0.0));

    let free = cfg.memory_bins() - 1;
    let points = (quad.len() as f64).powi(free as i32);
    if points <= opts.max_quadrature_points as f64 {
        let p = opts.steps.saturating_sub(free) / 2;
        let avg = monitor.average_retrodicted_quadrature(&traj.record, &exp.initial, p)?;
        out.push(Check::new(
            "monitor",
            "retrodiction_average_is_conditional_state",
            avg.max_abs_diff(&traj.states[p].rho),
            1e-8,
        ));
    } else {
        out.push(Check::skip(
            "monitor",
            "retrodiction_average_is_conditional_state",
            format!("{points:.0} quadrature points"),
        ));
    }

    let means = monitor.coupling_means(&traj.record, &exp.initial, SignalState::Retrodicted)?;
    if means.len() >= cfg.memory_bins() {
        let g = girsanov_colored(&traj.record, &exp.kernel, &means)?;
        let scale = g.colored_record.iter().map(|z| z.norm()).fold(1.0, f64::max);
        out.push(Check::new("monitor", "girsanov_identity", g.residual / scale, 1e-10));
    } else {
        out.push(Check::skip(
            "monitor",
            "girsanov_identity",
            "record shorter than the memory",
        ));
    }

    let summary = monitor.run_ensemble(&exp.initial, opts.steps, opts.trajectories, opts.seed)?;
    let exact = monitor.evolve_nonselective(&exp.initial, opts.steps)?;
    let z = exact
        .iter()
        .enumerate()
        .map(|(n, rho)| {
            let d = trace_distance(&summary.mean[n], rho);
            let se = summary.trace_distance_error(n);
            if d <= 1e-12 {
                0.0
            } else {
                d / se.max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max);
    out.push(Check::new(
        "monitor",
        "ensemble_matches_nonselective_in_standard_errors",
        z,
        5.0,
    ));
    Ok(())
}
