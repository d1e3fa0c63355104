#ifndef SOFTSPACE_H
#define SOFTSPACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Edge provenance in a backbone.
 */
typedef enum ss_origin {
  SS_ORIGIN_FILTER = 0,
  SS_ORIGIN_MST = 1,
  SS_ORIGIN_BOTH = 2,
} ss_origin;

typedef enum ss_status {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_CONFIG = 3,
  SS_STATUS_DATA = 4,
  SS_STATUS_FIT = 5,
  SS_STATUS_INVARIANT = 6,
  SS_STATUS_IO = 7,
  SS_STATUS_OUT_OF_RANGE = 8,
  SS_STATUS_UTF8 = 9,
  SS_STATUS_PANIC = 10,
} ss_status;

/**
 * Backbone edges of a network.
 */
typedef struct ss_backbone ss_backbone;

/**
 * Block assignment from an SBM fit.
 */
typedef struct ss_communities ss_communities;

/**
 * Discipline by tool count table.
 */
typedef struct ss_count_matrix ss_count_matrix;

/**
 * Undirected weighted tool network.
 */
typedef struct ss_network ss_network;

/**
 * Revealed comparative advantage of a count table.
 */
typedef struct ss_rca ss_rca;

typedef struct ss_edge {
  size_t source;
  size_t target;
  double weight;
} ss_edge;

typedef struct ss_backbone_edge_t {
  size_t source;
  size_t target;
  double weight;
  double significance;
  enum ss_origin origin;
} ss_backbone_edge_t;

typedef struct ss_power_law_fit_t {
  double alpha;
  uint64_t x_min;
  size_t n_tail;
  double ks_distance;
  double log_likelihood;
} ss_power_law_fit_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void ss_count_matrix_free(struct ss_count_matrix *handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void ss_rca_free(struct ss_rca *handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void ss_network_free(struct ss_network *handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void ss_backbone_free(struct ss_backbone *handle);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void ss_communities_free(struct ss_communities *handle);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *ss_last_error_message(void);

/**
 * Builds a count table from a row-major `n_rows * n_cols` array. Name
 * arrays may be null, in which case rows are `d0, d1, ...` and columns
 * `t0, t1, ...`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; names must be
 * NUL-terminated.
 */
enum ss_status ss_count_matrix_new(const uint64_t *counts,
                                   size_t n_rows,
                                   size_t n_cols,
                                   const char *const *row_names,
                                   const char *const *col_names,
                                   struct ss_count_matrix **out_matrix);

/**
 * # Safety
 * `matrix` must be a live handle and `out_rca` writable.
 */
enum ss_status ss_rca_compute(const struct ss_count_matrix *matrix, struct ss_rca **out_rca);

/**
 * RCA of one cell; NaN when the cell is masked by an empty row or column.
 *
 * # Safety
 * `handle` must be a live handle and `value` writable.
 */
enum ss_status ss_rca_value(const struct ss_rca *handle, size_t row, size_t col, double *value);

/**
 * Tool proximity network of the RCA table: tools specialize in the
 * disciplines where RCA exceeds `threshold` (or reaches it when
 * `inclusive` is set).
 *
 * # Safety
 * `handle` must be a live handle and `out_network` writable.
 */
enum ss_status ss_proximity_network(const struct ss_rca *handle,
                                    double threshold,
                                    bool inclusive,
                                    struct ss_network **out_network);

/**
 * Network from an explicit edge list over nodes `0..n_nodes`.
 *
 * # Safety
 * `edges` must hold `n_edges` entries and `out_network` be writable.
 */
enum ss_status ss_network_new(size_t n_nodes,
                              const struct ss_edge *edges,
                              size_t n_edges,
                              struct ss_network **out_network);

/**
 * # Safety
 * `handle` must be a live handle; out-pointers may be null.
 */
enum ss_status ss_network_size(const struct ss_network *handle, size_t *n_nodes, size_t *n_edges);

/**
 * # Safety
 * `handle` must be a live handle and `edge` writable.
 */
enum ss_status ss_network_edge(const struct ss_network *handle, size_t index, struct ss_edge *edge);

/**
 * Disparity-filter backbone at level `alpha`, united with the maximum
 * spanning forest when `with_mst` is set.
 *
 * # Safety
 * `network` must be a live handle and `out_backbone` writable.
 */
enum ss_status ss_backbone_extract(const struct ss_network *network,
                                   double alpha,
                                   bool with_mst,
                                   struct ss_backbone **out_backbone);

/**
 * # Safety
 * `handle` must be a live handle and `len` writable.
 */
enum ss_status ss_backbone_len(const struct ss_backbone *handle, size_t *len);

/**
 * # Safety
 * `handle` must be a live handle and `edge` writable.
 */
enum ss_status ss_backbone_edge(const struct ss_backbone *handle,
                                size_t index,
                                struct ss_backbone_edge_t *edge);

/**
 * Degree-corrected SBM fit with default settings. Restarts use seeds
 * `seed, seed + 1, ...` and the lowest description length wins.
 *
 * # Safety
 * `network` must be a live handle and `out_communities` writable.
 */
enum ss_status ss_sbm_fit(const struct ss_network *network,
                          uint64_t seed,
                          size_t restarts,
                          struct ss_communities **out_communities);

/**
 * # Safety
 * `handle` must be a live handle; out-pointers may be null.
 */
enum ss_status ss_communities_summary(const struct ss_communities *handle,
                                      size_t *n_blocks,
                                      double *description_length);

/**
 * Copies block labels, one per network node, into `labels`. `len` must
 * equal the node count.
 *
 * # Safety
 * `labels` must be writable for `len` entries.
 */
enum ss_status ss_communities_labels(const struct ss_communities *handle,
                                     size_t *labels,
                                     size_t len);

/**
 * Herfindahl-Hirschman index of a count vector; NaN when it sums to zero.
 *
 * # Safety
 * `counts` must hold `len` entries and `value` be writable.
 */
enum ss_status ss_hhi(const uint64_t *counts, size_t len, double *value);

/**
 * Jaccard similarity of two id sets (duplicates ignored); NaN when both
 * are empty.
 *
 * # Safety
 * Arrays must hold the stated lengths and `value` be writable.
 */
enum ss_status ss_jaccard(const uint64_t *a,
                          size_t len_a,
                          const uint64_t *b,
                          size_t len_b,
                          double *value);

/**
 * Discrete power-law fit. `x_min == 0` scans cutoffs by KS distance.
 *
 * # Safety
 * `data` must hold `len` entries and `fit` be writable.
 */
enum ss_status ss_power_law_fit(const uint64_t *data,
                                size_t len,
                                uint64_t x_min,
                                struct ss_power_law_fit_t *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOFTSPACE_H */
