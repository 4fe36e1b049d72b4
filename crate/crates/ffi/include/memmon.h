#ifndef MEMMON_H
#define MEMMON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum MemmonStatus {
  MEMMON_STATUS_OK = 0,
  MEMMON_STATUS_NULL_POINTER = 1,
  MEMMON_STATUS_INVALID_ARGUMENT = 2,
  MEMMON_STATUS_CONFIG_ERROR = 3,
  MEMMON_STATUS_NUMERIC_ERROR = 4,
  MEMMON_STATUS_INSUFFICIENT_RECORD = 5,
  MEMMON_STATUS_NOT_FACTORIZABLE = 6,
  MEMMON_STATUS_PANIC = 7,
} MemmonStatus;

// Opaque simulator: system, kernel, lattice and initial system state.
typedef struct MemmonSimulator MemmonSimulator;

typedef struct MemmonComplex {
  double re;
  double im;
} MemmonComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a simulator from explicit matrices.
//
// `hamiltonian` and `coupling` are `dim × dim` row-major matrices,
// `kernel` holds the `memory_bins` coupling-kernel samples `κ_k`, and
// `initial_state` the `dim` amplitudes of a normalized system state.
//
// # Safety
// Every pointer must be valid for the stated number of elements and `out`
// must be writable. On success `*out` owns a handle that must be released
// with [`memmon_simulator_free`].
enum MemmonStatus memmon_simulator_new(const struct MemmonComplex *hamiltonian,
                                       const struct MemmonComplex *coupling,
                                       size_t dim,
                                       const struct MemmonComplex *kernel,
                                       size_t memory_bins,
                                       double dt,
                                       size_t n_max,
                                       const struct MemmonComplex *initial_state,
                                       struct MemmonSimulator **out);

// Creates a simulator from an experiment configuration in TOML, the
// format read by the `memmon` command-line tool.
//
// # Safety
// `config_toml` must be a NUL-terminated string and `out` writable.
enum MemmonStatus memmon_simulator_new_from_config(const char *config_toml,
                                                   struct MemmonSimulator **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `sim` must be null or a handle from `memmon_simulator_new*` that has not
// been freed.
void memmon_simulator_free(struct MemmonSimulator *sim);

// System dimension, or 0 for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
size_t memmon_simulator_dim(const struct MemmonSimulator *sim);

// Number of memory bins, or 0 for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
size_t memmon_simulator_memory_bins(const struct MemmonSimulator *sim);

// Replaces the initial system state (`dim` amplitudes, normalized).
//
// # Safety
// `sim` must be a live handle not used concurrently, and `amplitudes`
// valid for `len` elements.
enum MemmonStatus memmon_simulator_set_initial_state(struct MemmonSimulator *sim,
                                                     const struct MemmonComplex *amplitudes,
                                                     size_t len);

// Samples one heterodyne trajectory of `steps` outcomes on random stream
// `stream` of `seed`.
//
// Writes `steps` outcomes to `record`. When non-null, `states` receives
// the `steps + 1` conditional system states (each `dim × dim`, row-major)
// and `log_weights` their `steps + 1` log weights.
//
// # Safety
// `sim` must be a live handle; output pointers must be valid for the
// stated sizes or null where allowed.
enum MemmonStatus memmon_run_trajectory(const struct MemmonSimulator *sim,
                                        size_t steps,
                                        uint64_t seed,
                                        uint64_t stream,
                                        struct MemmonComplex *record,
                                        struct MemmonComplex *states,
                                        double *log_weights);

// Non-selective reduced states after `0..=steps` steps, written as
// `steps + 1` consecutive `dim × dim` matrices.
//
// # Safety
// `sim` must be a live handle and `states` valid for
// `(steps + 1)·dim²` elements.
enum MemmonStatus memmon_evolve_nonselective(const struct MemmonSimulator *sim,
                                             size_t steps,
                                             struct MemmonComplex *states);

// Retrodicted pure system state after `p` steps of `record`, which must
// hold at least `p + memory_bins − 1` outcomes. Writes `dim` normalized
// amplitudes to `psi` and, when non-null, the log weight to `log_weight`.
//
// # Safety
// `sim` must be a live handle, `record` valid for `len` elements and
// `psi` for `dim` elements.
enum MemmonStatus memmon_retrodict(const struct MemmonSimulator *sim,
                                   const struct MemmonComplex *record,
                                   size_t len,
                                   size_t p,
                                   struct MemmonComplex *psi,
                                   double *log_weight);

// Factorizes a stationary correlation `α_0..α_{len−1}` sampled at `dt`
// into an `n`-bin coupling kernel written to `kernel`. When non-null,
// `residual` receives `max_m |reconstruct(κ)_m − α_m|`.
//
// # Safety
// `alpha` must be valid for `len` elements and `kernel` for `n`.
enum MemmonStatus memmon_factorize(const struct MemmonComplex *alpha,
                                   size_t len,
                                   double dt,
                                   size_t n,
                                   struct MemmonComplex *kernel,
                                   double *residual);

// Copies the calling thread's last error message into `buffer` (always
// NUL-terminated when `capacity > 0`, truncated if needed) and returns
// the buffer size needed for the whole message including the NUL. The
// message is empty after a successful call.
//
// # Safety
// `buffer` must be null or valid for `capacity` bytes.
size_t memmon_last_error_message(char *buffer, size_t capacity);

// Library version as a static NUL-terminated string.
const char *memmon_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEMMON_H */
