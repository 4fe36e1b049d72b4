//! C ABI for the memmon simulator.
//!
//! All functions return a [`MemmonStatus`]. On failure a description of the
//! last error on the calling thread can be fetched with
//! [`memmon_last_error_message`]. Complex numbers cross the boundary as
//! [`MemmonComplex`] pairs; matrices are row-major.
//!
//! Handles are created by `memmon_simulator_new*` and must be released with
//! [`memmon_simulator_free`]. A handle may be shared between threads for
//! read-only calls; [`memmon_simulator_set_initial_state`] needs exclusive
//! access.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use memmon::cli::ExperimentConfig;
use memmon::hilbert::{ComplexMatrix, StateVector, C64};
use memmon::kernel::{factorize, CorrelationFunction, CouplingKernel};
use memmon::lattice::{LatticeConfig, SystemSpec};
use memmon::monitor::{HeterodyneRecord, Monitor};
use memmon::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemmonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    NumericError = 4,
    InsufficientRecord = 5,
    NotFactorizable = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MemmonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for MemmonComplex {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<MemmonComplex> for C64 {
    fn from(z: MemmonComplex) -> Self {
        C64::new(z.re, z.im)
    }
}

/// Opaque simulator: system, kernel, lattice and initial system state.
pub struct MemmonSimulator {
    monitor: Monitor,
    initial: StateVector,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn status_of(err: &Error) -> MemmonStatus {
    match err {
        Error::Config(_) | Error::Parse { .. } => MemmonStatus::ConfigError,
        Error::InsufficientRecord { .. } => MemmonStatus::InsufficientRecord,
        Error::NotFactorizable { .. } => MemmonStatus::NotFactorizable,
        Error::Shape { .. }
        | Error::FactorIndex { .. }
        | Error::Length { .. }
        | Error::InvalidArgument { .. }
        | Error::InvalidState(_)
        | Error::DimensionCap { .. } => MemmonStatus::InvalidArgument,
        _ => MemmonStatus::NumericError,
    }
}

enum Failure {
    Status(MemmonStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(MemmonStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MemmonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MemmonStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, message))) => {
            set_error(message);
            s
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            MemmonStatus::Panic
        }
    }
}

/// Reads `len` values, rejecting a null pointer unless `len == 0`.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn matrix(p: *const MemmonComplex, dim: usize, what: &str) -> Result<ComplexMatrix, Failure> {
    let data = slice(p, dim * dim, what)?.iter().map(|&z| z.into()).collect();
    Ok(ComplexMatrix::from_vec(dim, dim, data)?)
}

unsafe fn simulator<'a>(sim: *const MemmonSimulator) -> Result<&'a MemmonSimulator, Failure> {
    sim.as_ref().ok_or_else(|| null("simulator"))
}

fn write_matrix(dst: &mut [MemmonComplex], m: &ComplexMatrix) {
    for (d, &z) in dst.iter_mut().zip(m.data()) {
        *d = z.into();
    }
}

/// Creates a simulator from explicit matrices.
///
/// `hamiltonian` and `coupling` are `dim × dim` row-major matrices,
/// `kernel` holds the `memory_bins` coupling-kernel samples `κ_k`, and
/// `initial_state` the `dim` amplitudes of a normalized system state.
///
/// # Safety
/// Every pointer must be valid for the stated number of elements and `out`
/// must be writable. On success `*out` owns a handle that must be released
/// with [`memmon_simulator_free`].
#[no_mangle]
pub unsafe extern "C" fn memmon_simulator_new(
    hamiltonian: *const MemmonComplex,
    coupling: *const MemmonComplex,
    dim: usize,
    kernel: *const MemmonComplex,
    memory_bins: usize,
    dt: f64,
    n_max: usize,
    initial_state: *const MemmonComplex,
    out: *mut *mut MemmonSimulator,
) -> MemmonStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if dim == 0 || memory_bins == 0 {
            return Err(Failure::Status(
                MemmonStatus::InvalidArgument,
                "dim and memory_bins must be positive".into(),
            ));
        }
        let system = SystemSpec::new(
            "ffi",
            matrix(hamiltonian, dim, "hamiltonian")?,
            matrix(coupling, dim, "coupling")?,
        )?;
        let kernel = CouplingKernel::new(
            dt,
            slice(kernel, memory_bins, "kernel")?
                .iter()
                .map(|&z| z.into())
                .collect(),
        )?;
        let lattice = LatticeConfig::new(dt, memory_bins, n_max)?;
        let initial = StateVector::new(
            slice(initial_state, dim, "initial_state")?
                .iter()
                .map(|&z| z.into())
                .collect(),
        )?;
        if !initial.is_normalized(1e-10) {
            return Err(Failure::Status(
                MemmonStatus::InvalidArgument,
                "initial state must be normalized".into(),
            ));
        }
        let monitor = Monitor::new(system, kernel, lattice)?;
        *out = Box::into_raw(Box::new(MemmonSimulator { monitor, initial }));
        Ok(())
    })
}

/// Creates a simulator from an experiment configuration in TOML, the
/// format read by the `memmon` command-line tool.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn memmon_simulator_new_from_config(
    config_toml: *const c_char,
    out: *mut *mut MemmonSimulator,
) -> MemmonStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if config_toml.is_null() {
            return Err(null("config_toml"));
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|e| Failure::Status(MemmonStatus::ConfigError, format!("config is not UTF-8: {e}")))?;
        let exp = ExperimentConfig::parse(text)?.build()?;
        let monitor = Monitor::new(exp.system, exp.kernel, exp.lattice)?;
        *out = Box::into_raw(Box::new(MemmonSimulator {
            monitor,
            initial: exp.initial,
        }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from `memmon_simulator_new*` that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn memmon_simulator_free(sim: *mut MemmonSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// System dimension, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn memmon_simulator_dim(sim: *const MemmonSimulator) -> usize {
    sim.as_ref().map_or(0, |s| s.monitor.system().dim())
}

/// Number of memory bins, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn memmon_simulator_memory_bins(sim: *const MemmonSimulator) -> usize {
    sim.as_ref().map_or(0, |s| s.monitor.config().memory_bins())
}

/// Replaces the initial system state (`dim` amplitudes, normalized).
///
/// # Safety
/// `sim` must be a live handle not used concurrently, and `amplitudes`
/// valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn memmon_simulator_set_initial_state(
    sim: *mut MemmonSimulator,
    amplitudes: *const MemmonComplex,
    len: usize,
) -> MemmonStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("simulator"))?;
        let dim = sim.monitor.system().dim();
        if len != dim {
            return Err(Failure::Status(
                MemmonStatus::InvalidArgument,
                format!("initial state needs {dim} amplitudes, got {len}"),
            ));
        }
        let state = StateVector::new(
            slice(amplitudes, len, "amplitudes")?
                .iter()
                .map(|&z| z.into())
                .collect(),
        )?;
        if !state.is_normalized(1e-10) {
            return Err(Failure::Status(
                MemmonStatus::InvalidArgument,
                "initial state must be normalized".into(),
            ));
        }
        sim.initial = state;
        Ok(())
    })
}

/// Samples one heterodyne trajectory of `steps` outcomes on random stream
/// `stream` of `seed`.
///
/// Writes `steps` outcomes to `record`. When non-null, `states` receives
/// the `steps + 1` conditional system states (each `dim × dim`, row-major)
/// and `log_weights` their `steps + 1` log weights.
///
/// # Safety
/// `sim` must be a live handle; output pointers must be valid for the
/// stated sizes or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn memmon_run_trajectory(
    sim: *const MemmonSimulator,
    steps: usize,
    seed: u64,
    stream: u64,
    record: *mut MemmonComplex,
    states: *mut MemmonComplex,
    log_weights: *mut f64,
) -> MemmonStatus {
    guard(|| {
        let sim = simulator(sim)?;
        let d = sim.monitor.system().dim();
        let record = slice_mut(record, steps, "record")?;
        let traj = sim.monitor.run_trajectory(&sim.initial, steps, seed, stream)?;
        for (dst, &z) in record.iter_mut().zip(traj.record.bins()) {
            *dst = z.into();
        }
        if !states.is_null() {
            let out = slice_mut(states, (steps + 1) * d * d, "states")?;
            for (chunk, st) in out.chunks_mut(d * d).zip(&traj.states) {
                write_matrix(chunk, &st.rho);
            }
        }
        if !log_weights.is_null() {
            let out = slice_mut(log_weights, steps + 1, "log_weights")?;
            for (dst, st) in out.iter_mut().zip(&traj.states) {
                *dst = st.log_weight;
            }
        }
        Ok(())
    })
}

/// Non-selective reduced states after `0..=steps` steps, written as
/// `steps + 1` consecutive `dim × dim` matrices.
///
/// # Safety
/// `sim` must be a live handle and `states` valid for
/// `(steps + 1)·dim²` elements.
#[no_mangle]
pub unsafe extern "C" fn memmon_evolve_nonselective(
    sim: *const MemmonSimulator,
    steps: usize,
    states: *mut MemmonComplex,
) -> MemmonStatus {
    guard(|| {
        let sim = simulator(sim)?;
        let d = sim.monitor.system().dim();
        let out = slice_mut(states, (steps + 1) * d * d, "states")?;
        let rhos = sim.monitor.evolve_nonselective(&sim.initial, steps)?;
        for (chunk, rho) in out.chunks_mut(d * d).zip(&rhos) {
            write_matrix(chunk, rho);
        }
        Ok(())
    })
}

/// Retrodicted pure system state after `p` steps of `record`, which must
/// hold at least `p + memory_bins − 1` outcomes. Writes `dim` normalized
/// amplitudes to `psi` and, when non-null, the log weight to `log_weight`.
///
/// # Safety
/// `sim` must be a live handle, `record` valid for `len` elements and
/// `psi` for `dim` elements.
#[no_mangle]
pub unsafe extern "C" fn memmon_retrodict(
    sim: *const MemmonSimulator,
    record: *const MemmonComplex,
    len: usize,
    p: usize,
    psi: *mut MemmonComplex,
    log_weight: *mut f64,
) -> MemmonStatus {
    guard(|| {
        let sim = simulator(sim)?;
        let bins = slice(record, len, "record")?.iter().map(|&z| z.into()).collect();
        let out = slice_mut(psi, sim.monitor.system().dim(), "psi")?;
        let rec = HeterodyneRecord::from_bins(sim.monitor.config(), 0, bins);
        let state = sim.monitor.retrodict(&rec, &sim.initial, p)?;
        let mut v = state.psi;
        v.normalize_into_weight()?;
        for (dst, &z) in out.iter_mut().zip(v.amplitudes()) {
            *dst = z.into();
        }
        if !log_weight.is_null() {
            *log_weight = v.log_weight();
        }
        Ok(())
    })
}

/// Factorizes a stationary correlation `α_0..α_{len−1}` sampled at `dt`
/// into an `n`-bin coupling kernel written to `kernel`. When non-null,
/// `residual` receives `max_m |reconstruct(κ)_m − α_m|`.
///
/// # Safety
/// `alpha` must be valid for `len` elements and `kernel` for `n`.
#[no_mangle]
pub unsafe extern "C" fn memmon_factorize(
    alpha: *const MemmonComplex,
    len: usize,
    dt: f64,
    n: usize,
    kernel: *mut MemmonComplex,
    residual: *mut f64,
) -> MemmonStatus {
    guard(|| {
        let samples = slice(alpha, len, "alpha")?.iter().map(|&z| z.into()).collect();
        let out = slice_mut(kernel, n, "kernel")?;
        let f = factorize(&CorrelationFunction::new(dt, samples)?, n)?;
        for (dst, &z) in out.iter_mut().zip(f.kernel.samples()) {
            *dst = z.into();
        }
        if !residual.is_null() {
            *residual = f.residual;
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buffer` (always
/// NUL-terminated when `capacity > 0`, truncated if needed) and returns
/// the buffer size needed for the whole message including the NUL. The
/// message is empty after a successful call.
///
/// # Safety
/// `buffer` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn memmon_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn memmon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
