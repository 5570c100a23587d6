/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CELLGRAPH_H
#define CELLGRAPH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Neighbor direction for [`cg_graph_neighbors`].
typedef enum {
  CG_DIRECTION_IN = 0,
  CG_DIRECTION_OUT = 1,
  CG_DIRECTION_BOTH = 2,
} CgDirection;

// Feature level for [`cg_features_csv`].
typedef enum {
  CG_LEVEL_NODE = 0,
  CG_LEVEL_EDGE = 1,
  CG_LEVEL_GRAPH = 2,
} CgLevel;

// Result code of every fallible call.
typedef enum {
  CG_STATUS_OK = 0,
  CG_STATUS_NULL_POINTER = 1,
  CG_STATUS_INVALID_ARGUMENT = 2,
  CG_STATUS_INVALID_GRAPH = 3,
  CG_STATUS_SHAPE = 4,
  CG_STATUS_INDEX_OUT_OF_RANGE = 5,
  CG_STATUS_SCHEMA = 6,
  CG_STATUS_JSON = 7,
  CG_STATUS_CONFIG = 8,
  CG_STATUS_RUNTIME = 9,
  CG_STATUS_UTF8 = 10,
  CG_STATUS_BUFFER_TOO_SMALL = 11,
  CG_STATUS_PANIC = 12,
} CgStatus;

// Opaque graph handle.
typedef struct CgGraph CgGraph;

// Opaque trained-model handle.
typedef struct CgModel CgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a
// success. Owned by the library and valid until the next call.
const char *cg_last_error_message(void);

// Static name of a status code, e.g. `"buffer_too_small"`.
const char *cg_status_name(CgStatus status);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void cg_string_free(char *s);

// Builds a graph from an edge list and a row-major `num_nodes × feature_dim`
// feature array. Undirected edges store each pair once.
//
// # Safety
// `src` and `dst` must hold `num_edges` entries, `features` must hold
// `num_nodes * feature_dim` values, and `out` must be writable.
CgStatus cg_graph_new(size_t num_nodes,
                      const size_t *src,
                      const size_t *dst,
                      size_t num_edges,
                      bool directed,
                      const double *features,
                      size_t feature_dim,
                      CgGraph **out);

// Parses a graph document (the CLI's graph JSON format).
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
CgStatus cg_graph_from_json(const char *json, CgGraph **out);

// Serializes a graph; free the result with [`cg_string_free`].
//
// # Safety
// `graph` must be a live handle and `out` writable.
CgStatus cg_graph_to_json(const CgGraph *graph, char **out);

// # Safety
// `graph` must be null or a handle not yet freed.
void cg_graph_free(CgGraph *graph);

// Node count, edge count and feature width.
//
// # Safety
// `graph` must be a live handle; each output pointer may be null.
CgStatus cg_graph_shape(const CgGraph *graph,
                        size_t *num_nodes,
                        size_t *num_edges,
                        size_t *feature_dim);

// Sorted neighbors of `node`.
//
// # Safety
// `graph` must be a live handle, `buf` must hold `cap` entries (or be
// null with `cap == 0`) and `out_len` writable.
CgStatus cg_graph_neighbors(const CgGraph *graph,
                            size_t node,
                            CgDirection direction,
                            size_t *buf,
                            size_t cap,
                            size_t *out_len);

// Row-major `num_nodes × 3` table of degree, closeness centrality and
// clustering coefficient.
//
// # Safety
// As for [`cg_graph_neighbors`].
CgStatus cg_node_statistics(const CgGraph *graph, double *buf, size_t cap, size_t *out_len);

// Feature table as CSV with an `id` column and a header row. For the edge
// level, `config_json` may set `katz` (`beta`, `max_length`) and `pairs`;
// without pairs every stored edge is scored.
//
// # Safety
// `graph` must be a live handle, `config_json` null or a NUL-terminated
// string, and `out` writable.
CgStatus cg_features_csv(const CgGraph *graph, CgLevel level, const char *config_json, char **out);

// Loads a model saved by `cellgraph train` or `apselect`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
CgStatus cg_model_from_json(const char *json, CgModel **out);

// # Safety
// `model` must be null or a handle not yet freed.
void cg_model_free(CgModel *model);

// Row-major `num_nodes × out_cols` node embeddings from the encoder.
//
// # Safety
// Handles must be live, `buf` must hold `cap` values (or be null with
// `cap == 0`), and `out_len`/`out_cols` writable.
CgStatus cg_model_embed(const CgModel *model,
                        const CgGraph *graph,
                        double *buf,
                        size_t cap,
                        size_t *out_len,
                        size_t *out_cols);

// Head outputs (logits) for a node head at the given nodes, or for an edge
// head at the pairs `(src[i], dst[i])`. Pass `dst = null` for node heads.
//
// # Safety
// Handles must be live, `src` (and `dst` if non-null) must hold `count`
// entries, `buf` must hold `cap` values, and the outputs must be writable.
CgStatus cg_model_predict(const CgModel *model,
                          const CgGraph *graph,
                          const size_t *src,
                          const size_t *dst,
                          size_t count,
                          double *buf,
                          size_t cap,
                          size_t *out_len,
                          size_t *out_cols);

// Area under the ROC curve, ties counted as one half. Writes NaN when one
// class is absent.
//
// # Safety
// `scores` and `labels` must hold `count` entries and `out` be writable.
CgStatus cg_roc_auc(const double *scores, const bool *labels, size_t count, double *out);

// Simulates a cell-free deployment and returns one instance graph per
// non-degenerate UE as JSON lines. `config_json` uses the scenario keys of
// `cellgraph gen`; `seed` overrides its seed.
//
// # Safety
// `config_json` must be null or a NUL-terminated string and `out` writable.
CgStatus cg_generate_dataset(const char *config_json, uint64_t seed, char **out);

// Runs the full two-stage AP-selection experiment and returns its metrics
// CSV (`split,metric,value`). `config_json` uses the keys of
// `cellgraph apselect`; `seed` overrides its seed.
//
// # Safety
// `config_json` must be null or a NUL-terminated string and `out` writable.
CgStatus cg_apselect(const char *config_json, uint64_t seed, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CELLGRAPH_H */
