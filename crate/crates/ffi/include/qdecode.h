#ifndef QDECODE_H
#define QDECODE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// How a beam is specified in [`qd_beam_evaluate`].
typedef enum QdBeamMode {
  // Probability cutoff p0.
  QD_BEAM_MODE_CUTOFF = 0,
  // Splitting exponent f_split.
  QD_BEAM_MODE_SPLIT = 1,
  // Retained fraction g.
  QD_BEAM_MODE_FRACTION = 2,
  // Capped width; the parameter is log10 of the maximum hypothesis count.
  QD_BEAM_MODE_CAPPED = 3,
  // Constant retained mass C0 with optimized splitting exponent.
  QD_BEAM_MODE_CONSTANT = 4,
} QdBeamMode;

// Which amplitude-amplification engine a simulation uses.
typedef enum QdEngine {
  QD_ENGINE_DENSE = 0,
  QD_ENGINE_SUBSPACE = 1,
} QdEngine;

// Result code of every fallible call.
typedef enum QdStatus {
  QD_STATUS_OK = 0,
  // A required pointer argument was null.
  QD_STATUS_NULL_POINTER = 1,
  // An argument is outside the function's domain.
  QD_STATUS_DOMAIN = 2,
  // The request has no solution (e.g. an unreachable retained mass).
  QD_STATUS_INFEASIBLE = 3,
  // A resource budget (enumeration size, precision) was exceeded.
  QD_STATUS_BUDGET = 4,
  // Input data could not be parsed or validated.
  QD_STATUS_INPUT = 5,
  // Reading or writing a file failed.
  QD_STATUS_IO = 6,
  // A string argument was not valid UTF-8.
  QD_STATUS_INVALID_STRING = 7,
  // An internal panic was caught at the boundary.
  QD_STATUS_PANIC = 8,
} QdStatus;

// Opaque advice state over decoder hypotheses.
typedef struct QdAdvice QdAdvice;

// Opaque per-frame probability dump.
typedef struct QdFrameDump QdFrameDump;

// Opaque power-law distribution.
typedef struct QdPowerLaw QdPowerLaw;

typedef struct QdRt2 {
  double log10_rt;
  double rt_prime;
  double log10_total;
} QdRt2;

typedef struct QdFsplit {
  double f_split;
  double mass;
  uint64_t rounds;
  uint64_t rounds_inverse_sqrt;
} QdFsplit;

typedef struct QdBeamResult {
  double f_split;
  double log10_n_hyp;
  double log10_runtime;
} QdBeamResult;

typedef struct QdSearchOutcome {
  // Index of the returned hypothesis, or -1 if nothing was found.
  int64_t best_index;
  double best_score;
  uint64_t oracle_queries;
  uint64_t queries_to_best;
  uint32_t rounds;
  bool success;
  uint64_t amplification_rounds;
} QdSearchOutcome;

typedef struct QdFit {
  double a;
  double b;
  double stderr_a;
  double stderr_b;
  double r2;
  size_t rank_lo;
  size_t rank_hi;
} QdFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next `qd_*` call on the same thread.
const char *qd_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qd_version(void);

// Speedup exponent `f(R, k)` of the expected runtime `R^(n f)`.
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
enum QdStatus qd_speedup_exponent(uint64_t r, double k, double *out_f);

// `log10` of the expected most-likely-parse runtime `(H_R(k/2)^2 / H_R(k))^n`.
//
// # Safety
// `out_log10` must be null or writable.
enum QdStatus qd_rt1_log10(uint64_t r, double k, uint32_t n, double *out_log10);

// Natural log of the truncated integral `M(R, k1, k2, c, n)` with the
// threshold given as `ln c`. `k2 = 1` is handled by its limit.
//
// # Safety
// `out_ln` must be null or writable.
enum QdStatus qd_m_closed_ln(uint64_t r,
                             double k1,
                             double k2,
                             double ln_c,
                             uint32_t n,
                             double *out_ln);

// Refined runtime bound split into the amplification term and the
// low-probability remainder.
//
// # Safety
// `out_rt2` must be null or writable.
enum QdStatus qd_rt2(uint64_t r, double k, uint32_t n, struct QdRt2 *out_rt2);

// Smallest splitting exponent retaining at least `c0` of the probability mass.
//
// # Safety
// `out_fsplit` must be null or writable.
enum QdStatus qd_optimize_fsplit(uint64_t r,
                                 double k,
                                 uint32_t n,
                                 double c0,
                                 struct QdFsplit *out_fsplit);

// Retained hypotheses and runtime bound of one beam configuration.
//
// # Safety
// `out_result` must be null or writable.
enum QdStatus qd_beam_evaluate(uint64_t r,
                               double k,
                               uint32_t n,
                               enum QdBeamMode mode,
                               double param,
                               struct QdBeamResult *out_result);

// Create `PowerLaw_R(k)`.
//
// # Safety
// `out_handle` must be null or writable; release the handle with
// [`qd_power_law_free`].
enum QdStatus qd_power_law_new(uint64_t r, double k, struct QdPowerLaw **out_handle);

// # Safety
// `handle` must be null or a pointer from [`qd_power_law_new`] not yet freed.
void qd_power_law_free(struct QdPowerLaw *handle);

// Probability of a one-based rank.
//
// # Safety
// `handle` must be a live power-law handle; `out_p` must be null or writable.
enum QdStatus qd_power_law_pmf(const struct QdPowerLaw *handle, uint64_t rank, double *out_p);

// Draw `count` one-based ranks into `out_ranks`, reproducibly for `seed`.
//
// # Safety
// `handle` must be a live power-law handle; `out_ranks` must have room for
// `count` values.
enum QdStatus qd_power_law_sample(const struct QdPowerLaw *handle,
                                  uint64_t seed,
                                  size_t count,
                                  uint64_t *out_ranks);

// Advice state from explicit probabilities (summing to one) and scores.
//
// # Safety
// `probs` and `scores` must point to `len` values each; `out_handle` must be
// null or writable. Release with [`qd_advice_free`].
enum QdStatus qd_advice_from_parts(const double *probs,
                                   const double *scores,
                                   size_t len,
                                   struct QdAdvice **out_handle);

// Advice state over all `R^n` paths of a power-law decoder, scored by path
// probability (most-likely-parse search).
//
// # Safety
// `out_handle` must be null or writable. Release with [`qd_advice_free`].
enum QdStatus qd_advice_power_law_tree(size_t r, double k, size_t n, struct QdAdvice **out_handle);

// # Safety
// `handle` must be null or a pointer from a `qd_advice_*` constructor not
// yet freed.
void qd_advice_free(struct QdAdvice *handle);

// Number of hypotheses and the overlap `|⟨x|μ⟩|` of the best-scored one.
//
// # Safety
// `handle` must be a live advice handle; out-pointers null or writable.
enum QdStatus qd_advice_info(const struct QdAdvice *handle, size_t *out_len, double *out_overlap);

// Quantum maximum finding with the advice state. `rounds = 0` selects the
// default `⌈log2 N⌉ + 3`.
//
// # Safety
// `handle` must be a live advice handle; `out_outcome` null or writable.
enum QdStatus qd_search_decode(const struct QdAdvice *handle,
                               uint32_t rounds,
                               uint64_t seed,
                               enum QdEngine eng,
                               struct QdSearchOutcome *out_outcome);

// Beam decoding: prune to probabilities `≥ p0`, amplify, then search.
// `rounds = 0` selects the default for the retained set.
//
// # Safety
// `handle` must be a live advice handle; `out_outcome` null or writable.
enum QdStatus qd_beam_decode(const struct QdAdvice *handle,
                             double p0,
                             uint32_t rounds,
                             uint64_t seed,
                             enum QdEngine eng,
                             struct QdSearchOutcome *out_outcome);

// Read a frame dump (`.json` or CSV). Frames renormalized with a warning are
// counted in `out_warnings`.
//
// # Safety
// `path` must be a NUL-terminated string; out-pointers null or writable.
// Release with [`qd_frame_dump_free`].
enum QdStatus qd_frame_dump_ingest(const char *path,
                                   struct QdFrameDump **out_handle,
                                   size_t *out_warnings);

// # Safety
// `handle` must be null or a pointer from [`qd_frame_dump_ingest`] not yet freed.
void qd_frame_dump_free(struct QdFrameDump *handle);

// Number of frames and of symbols per frame.
//
// # Safety
// `handle` must be a live dump handle; out-pointers null or writable.
enum QdStatus qd_frame_dump_dims(const struct QdFrameDump *handle,
                                 size_t *out_frames,
                                 size_t *out_symbols);

// Mean probability by rank; `len` must equal the symbol count.
//
// # Safety
// `handle` must be a live dump handle; `out_profile` must have room for `len`.
enum QdStatus qd_rank_frequency(const struct QdFrameDump *handle, double *out_profile, size_t len);

// Log-log least-squares fit `a·r^(-b)` over the inclusive one-based ranks
// `[rank_lo, rank_hi]` of a rank profile.
//
// # Safety
// `profile` must point to `len` values; `out_fit` null or writable.
enum QdStatus qd_fit_powerlaw(const double *profile,
                              size_t len,
                              size_t rank_lo,
                              size_t rank_hi,
                              struct QdFit *out_fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDECODE_H */
