#ifndef HYBRIDNET_H
#define HYBRIDNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  HN_STATUS_OK = 0,
  HN_STATUS_NULL_POINTER = 1,
  HN_STATUS_INVALID_UTF8 = 2,
  HN_STATUS_PARSE = 3,
  HN_STATUS_INVALID_ARGUMENT = 4,
  HN_STATUS_INFERENCE = 5,
  HN_STATUS_PANIC = 6,
} HnStatus;

/**
 * A discretized network ready for queries.
 */
typedef struct HnDnet HnDnet;

/**
 * A parsed model file.
 */
typedef struct HnNetwork HnNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *hn_last_error_message(void);

/**
 * Parses model-file text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
HnStatus hn_network_parse(const char *text, HnNetwork **out);

/**
 * # Safety
 * `net` must come from [`hn_network_parse`] and not be used afterwards.
 */
void hn_network_free(HnNetwork *net);

/**
 * Number of variables; 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
uintptr_t hn_network_variable_count(const HnNetwork *net);

/**
 * Number of parent-child edges; 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
uintptr_t hn_network_edge_count(const HnNetwork *net);

/**
 * Maps a raw measurement of continuous variable `var` onto the rescaled axis.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
HnStatus hn_network_rescale(const HnNetwork *net, uintptr_t var, double raw, double *out);

/**
 * Loads a discretized network from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
HnStatus hn_dnet_from_json(const char *json, HnDnet **out);

/**
 * Discretizes a model at the means of its default priors.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
HnStatus hn_dnet_discretize_prior(const HnNetwork *net, HnDnet **out);

/**
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void hn_dnet_free(HnDnet *net);

/**
 * Posterior marginals as a JSON `QueryResult`. `vars` is a JSON array of
 * variable names; `evidence` is a JSON object or case and may be null.
 * `n_samples == 0` selects exact enumeration, otherwise likelihood weighting.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be a valid pointer.
 */
HnStatus hn_dnet_query(const HnDnet *net,
                       const char *evidence,
                       const char *vars,
                       uintptr_t n_samples,
                       uint64_t seed,
                       char **out);

/**
 * Disease ranking as a JSON `Diagnosis`.
 *
 * # Safety
 * String arguments must be NUL-terminated or null; `out` must be a valid pointer.
 */
HnStatus hn_dnet_diagnose(const HnDnet *net,
                          const char *evidence,
                          uintptr_t n_samples,
                          uint64_t seed,
                          char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void hn_string_free(char *s);

/**
 * Concordance index of `n` risks in [0, 1] against 0/1 labels.
 *
 * # Safety
 * `risks` and `labels` must point to `n` elements; `out` must be valid.
 */
HnStatus hn_concordance_index(const double *risks, const uint8_t *labels, uintptr_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRIDNET_H */
