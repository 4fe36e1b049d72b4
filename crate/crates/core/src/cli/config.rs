//! Experiment configuration in TOML.
//!
//! ```toml
//! [system]
//! label = "decaying qubit"
//! hamiltonian = [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
//! coupling = [[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]
//! initial_state = [[1.0, 0.0], [0.0, 0.0]]
//!
//! [kernel]
//! markov = { gamma = 1.0 }
//!
//! [lattice]
//! dt = 0.01
//! memory_bins = 1
//! n_max = 1
//!
//! [run]
//! steps = 300
//! trajectories = 1000
//! seed = 7
//!
//! [outputs]
//! directory = "out"
//! formats = ["csv"]
//! ```
//!
//! Matrices are row lists of `[re, im]` pairs. The kernel section holds
//! exactly one of `markov = { gamma }`, `exponential = { gamma, lambda }`,
//! `samples = [[re, im], ...]` (the coupling kernel itself) or
//! `correlation = { samples = [[re, im], ...] }` (a correlation function
//! to be factorized). Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::{ComplexMatrix, StateVector, C64, DEFAULT_DIMENSION_CAP};
use crate::kernel::{factorize, CorrelationFunction, CouplingKernel, Factorization};
use crate::lattice::{LatticeConfig, SystemSpec};

pub type Pair = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub kernel: KernelSection,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "default_label")]
    pub label: String,
    pub hamiltonian: Vec<Vec<Pair>>,
    pub coupling: Vec<Vec<Pair>>,
    pub initial_state: Vec<Pair>,
}

fn default_label() -> String {
    "system".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov: Option<MarkovFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponential: Option<ExponentialFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationSamples>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovFamily {
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialFamily {
    pub gamma: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSamples {
    pub samples: Vec<Pair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub dt: f64,
    pub memory_bins: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_cap")]
    pub dimension_cap: usize,
}

fn default_n_max() -> usize {
    2
}

fn default_cap() -> usize {
    DEFAULT_DIMENSION_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> usize {
    100
}

fn default_trajectories() -> usize {
    1000
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            trajectories: default_trajectories(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn config_error(location: &str, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("{location}: {message}"))
}

fn complex(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

fn matrix(rows: &[Vec<Pair>], location: &str) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(config_error(location, "matrix is empty"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(config_error(
            location,
            format!("matrix must be square: row {i} has {} entries, expected {n}", r.len()),
        ));
    }
    let data: Vec<C64> = rows.iter().flatten().map(complex).collect();
    if data.iter().any(|z| !z.is_finite()) {
        return Err(config_error(location, "entries must be finite"));
    }
    ComplexMatrix::from_vec(n, n, data)
}

/// Exponential-family correlation `(γ/2)e^{−λ m dt}` on `m = 0..n`.
pub fn exponential_correlation(gamma: f64, lambda: f64, dt: f64, n: usize) -> Result<CorrelationFunction> {
    CorrelationFunction::exponential(gamma, lambda, dt, n)
}

impl ExperimentConfig {
    /// Parses and validates; every error names the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// sha256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    fn kernel_kind(&self) -> Result<&'static str> {
        let k = &self.kernel;
        let present: Vec<&'static str> = [
            ("markov", k.markov.is_some()),
            ("exponential", k.exponential.is_some()),
            ("samples", k.samples.is_some()),
            ("correlation", k.correlation.is_some()),
        ]
        .into_iter()
        .filter_map(|(name, on)| on.then_some(name))
        .collect();
        match present.as_slice() {
            [one] => Ok(one),
            [] => Err(config_error(
                "kernel",
                "expected one of `markov`, `exponential`, `samples`, `correlation`",
            )),
            many => Err(config_error(
                "kernel",
                format!("only one kernel form allowed, found {}", many.join(", ")),
            )),
        }
    }

    /// Cross-field checks that need no numerical work beyond a norm.
    pub fn validate(&self) -> Result<()> {
        let l = &self.lattice;
        if !(l.dt > 0.0) || !l.dt.is_finite() {
            return Err(config_error("lattice.dt", format!("must be positive, got {}", l.dt)));
        }
        if l.memory_bins == 0 {
            return Err(config_error("lattice.memory_bins", "must be >= 1"));
        }
        if l.n_max == 0 {
            return Err(config_error("lattice.n_max", "must be >= 1"));
        }
        let h = matrix(&self.system.hamiltonian, "system.hamiltonian")?;
        let s = matrix(&self.system.coupling, "system.coupling")?;
        if s.rows() != h.rows() {
            return Err(config_error(
                "system.coupling",
                format!("is {0}x{0} but the hamiltonian is {1}x{1}", s.rows(), h.rows()),
            ));
        }
        if self.system.initial_state.len() != h.rows() {
            return Err(config_error(
                "system.initial_state",
                format!("has {} entries, expected {}", self.system.initial_state.len(), h.rows()),
            ));
        }
        let norm: f64 = self
            .system
            .initial_state
            .iter()
            .map(|p| p[0] * p[0] + p[1] * p[1])
            .sum();
        if !((norm - 1.0).abs() <= 1e-10) {
            return Err(config_error(
                "system.initial_state",
                format!("squared norm is {norm}, expected 1"),
            ));
        }
        let lattice = LatticeConfig::with_dimension_cap(l.dt, l.memory_bins, l.n_max, l.dimension_cap)
            .map_err(|e| config_error("lattice", e))?;
        lattice
            .joint_space(h.rows())
            .map_err(|e| config_error("lattice", format!("{e} (d_S = {}, (n_max+1)^N)", h.rows())))?;

        match self.kernel_kind()? {
            "markov" => {
                let m = self.kernel.markov.as_ref().expect("kind checked");
                if !(m.gamma >= 0.0) {
                    return Err(config_error("kernel.markov.gamma", "must be >= 0"));
                }
                if l.memory_bins != 1 {
                    return Err(config_error(
                        "lattice.memory_bins",
                        format!("the markov kernel has one bin, got memory_bins = {}", l.memory_bins),
                    ));
                }
            }
            "exponential" => {
                let e = self.kernel.exponential.as_ref().expect("kind checked");
                if !(e.gamma >= 0.0) {
                    return Err(config_error("kernel.exponential.gamma", "must be >= 0"));
                }
                if !(e.lambda > 0.0) {
                    return Err(config_error("kernel.exponential.lambda", "must be > 0"));
                }
            }
            "samples" => {
                let s = self.kernel.samples.as_ref().expect("kind checked");
                if s.len() != l.memory_bins {
                    return Err(config_error(
                        "kernel.samples",
                        format!("has {} entries but lattice.memory_bins = {}", s.len(), l.memory_bins),
                    ));
                }
            }
            _ => {
                let c = self.kernel.correlation.as_ref().expect("kind checked");
                if c.samples.is_empty() {
                    return Err(config_error("kernel.correlation.samples", "must not be empty"));
                }
            }
        }
        if self.run.trajectories == 0 {
            return Err(config_error("run.trajectories", "must be >= 1"));
        }
        if self.outputs.formats.is_empty() {
            return Err(config_error("outputs.formats", "must list at least one format"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Experiment> {
        self.validate()?;
        let l = &self.lattice;
        let lattice = LatticeConfig::with_dimension_cap(l.dt, l.memory_bins, l.n_max, l.dimension_cap)?;
        let system = SystemSpec::new(
            self.system.label.clone(),
            matrix(&self.system.hamiltonian, "system.hamiltonian")?,
            matrix(&self.system.coupling, "system.coupling")?,
        )
        .map_err(|e| config_error("system", e))?;
        let initial = StateVector::new(self.system.initial_state.iter().map(complex).collect())?;
        let (kernel, factorization) = match self.kernel_kind()? {
            "markov" => (
                CouplingKernel::markov(self.kernel.markov.as_ref().expect("kind").gamma, l.dt)?,
                None,
            ),
            "exponential" => {
                let e = self.kernel.exponential.as_ref().expect("kind");
                (
                    CouplingKernel::exponential(e.gamma, e.lambda, l.dt, l.memory_bins)?,
                    None,
                )
            }
            "samples" => (
                CouplingKernel::new(
                    l.dt,
                    self.kernel
                        .samples
                        .as_ref()
                        .expect("kind")
                        .iter()
                        .map(complex)
                        .collect(),
                )
                .map_err(|e| config_error("kernel.samples", e))?,
                None,
            ),
            _ => {
                let samples = &self.kernel.correlation.as_ref().expect("kind").samples;
                let alpha = CorrelationFunction::new(l.dt, samples.iter().map(complex).collect())
                    .map_err(|e| config_error("kernel.correlation.samples", e))?;
                let f = factorize(&alpha, l.memory_bins)?;
                (f.kernel.clone(), Some(f))
            }
        };
        Ok(Experiment {
            config: self.clone(),
            system,
            kernel,
            lattice,
            initial,
            factorization,
        })
    }

    /// The correlation function the kernel section describes: the given
    /// samples, the closed form of a named family, or `reconstruct(κ)` for
    /// explicit kernel samples.
    pub fn target_correlation(&self) -> Result<CorrelationFunction> {
        let l = &self.lattice;
        match self.kernel_kind()? {
            "markov" => {
                let g = self.kernel.markov.as_ref().expect("kind").gamma;
                CorrelationFunction::new(l.dt, vec![C64::new(g / l.dt, 0.0)])
            }
            "exponential" => {
                let e = self.kernel.exponential.as_ref().expect("kind");
                exponential_correlation(e.gamma, e.lambda, l.dt, l.memory_bins)
            }
            "samples" => {
                let k = CouplingKernel::new(
                    l.dt,
                    self.kernel
                        .samples
                        .as_ref()
                        .expect("kind")
                        .iter()
                        .map(complex)
                        .collect(),
                )?;
                Ok(crate::kernel::reconstruct(&k))
            }
            _ => CorrelationFunction::new(
                l.dt,
                self.kernel
                    .correlation
                    .as_ref()
                    .expect("kind")
                    .samples
                    .iter()
                    .map(complex)
                    .collect(),
            ),
        }
    }
}

/// A validated configuration with its numerical objects built.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub system: SystemSpec,
    pub kernel: CouplingKernel,
    pub lattice: LatticeConfig,
    pub initial: StateVector,
    /// Present when the kernel came from a correlation function.
    pub factorization: Option<Factorization>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MARKOV_QUBIT: &str = r#"
[system]
label = "decaying qubit"
hamiltonian = [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]
coupling = [[[0, 0], [0, 0]], [[1, 0], [0, 0]]]
initial_state = [[1, 0], [0, 0]]

[kernel]
markov = { gamma = 1.0 }

[lattice]
dt = 0.01
memory_bins = 1
n_max = 1
"#;

    #[test]
    fn minimal_markov_config_round_trips() {
        let cfg = ExperimentConfig::parse(MARKOV_QUBIT).unwrap();
        assert_eq!(cfg.run, RunSection::default());
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
        let exp = cfg.build().unwrap();
        assert_eq!(exp.kernel.len(), 1);
        assert!((exp.kernel.step_amplitudes()[0].re - 0.1).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_is_named_with_location() {
        let text = MARKOV_QUBIT.replace("[kernel]", "[ketnel]");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("ketnel"), "{err}");
        assert!(err.contains("line"), "{err}");
        let text = MARKOV_QUBIT.replace("n_max = 1", "n_max = 1\nnmax = 2");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("nmax") && err.contains("line"), "{err}");
    }

    #[test]
    fn exponential_family_expands_to_closed_form() {
        let text = MARKOV_QUBIT
            .replace(
                "markov = { gamma = 1.0 }",
                "exponential = { gamma = 1.0, lambda = 2.0 }",
            )
            .replace("memory_bins = 1", "memory_bins = 5");
        let exp = ExperimentConfig::parse(&text).unwrap().build().unwrap();
        for (k, z) in exp.kernel.samples().iter().enumerate() {
            let exact = 2f64.sqrt() * (-2.0 * k as f64 * 0.01).exp();
            assert!((z.re - exact).abs() < 1e-12 && z.im == 0.0);
        }
    }

    #[test]
    fn cross_field_errors_are_located() {
        let cases = [
            (
                MARKOV_QUBIT.replace("memory_bins = 1", "memory_bins = 2"),
                "lattice.memory_bins",
            ),
            (
                MARKOV_QUBIT.replace("initial_state = [[1, 0], [0, 0]]", "initial_state = [[1, 0], [1, 0]]"),
                "system.initial_state",
            ),
            (
                MARKOV_QUBIT.replace("initial_state = [[1, 0], [0, 0]]", "initial_state = [[1, 0]]"),
                "system.initial_state",
            ),
            (MARKOV_QUBIT.replace("dt = 0.01", "dt = -0.01"), "lattice.dt"),
            (
                MARKOV_QUBIT.replace(
                    "markov = { gamma = 1.0 }",
                    "markov = { gamma = 1.0 }\nsamples = [[1, 0]]",
                ),
                "kernel",
            ),
            (
                MARKOV_QUBIT.replace("markov = { gamma = 1.0 }", "samples = [[1, 0], [2, 0]]"),
                "kernel.samples",
            ),
            (
                MARKOV_QUBIT.replace(
                    "[[0, 0], [0, 0]], [[0, 0], [0, 0]]]",
                    "[[0, 0], [1, 0]], [[0, 0], [0, 0]]]",
                ),
                "system",
            ),
        ];
        for (text, location) in cases {
            let err = ExperimentConfig::parse(&text).and_then(|c| c.build().map(|_| c));
            let msg = err.unwrap_err().to_string();
            assert!(msg.contains(location), "expected `{location}` in `{msg}`");
        }
    }

    #[test]
    fn dimension_cap_is_checked_before_building() {
        let text = MARKOV_QUBIT
            .replace(
                "markov = { gamma = 1.0 }",
                "exponential = { gamma = 1.0, lambda = 2.0 }",
            )
            .replace("memory_bins = 1", "memory_bins = 12");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("cap"), "{err}");
    }

    #[test]
    fn correlation_kernel_is_factorized() {
        let text = MARKOV_QUBIT
            .replace(
                "markov = { gamma = 1.0 }",
                "correlation = { samples = [[1.25, 0], [0.5, 0]] }",
            )
            .replace("memory_bins = 1", "memory_bins = 2")
            .replace("dt = 0.01", "dt = 1.0");
        let exp = ExperimentConfig::parse(&text).unwrap().build().unwrap();
        let f = exp.factorization.unwrap();
        assert!(f.residual < 1e-8, "{}", f.residual);
        let k = exp.kernel.samples();
        assert!((k[0].re - 1.0).abs() < 1e-6 && (k[1].re - 0.5).abs() < 1e-6, "{k:?}");
    }
}
