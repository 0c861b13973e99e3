#ifndef CLUSTOPT_H
#define CLUSTOPT_H

#include <stddef.h>
#include <stdint.h>

typedef enum ClustoptStatus {
  CLUSTOPT_STATUS_OK = 0,
  // A required pointer argument was null.
  CLUSTOPT_STATUS_NULL_POINTER = 1,
  // Invalid argument or violated precondition.
  CLUSTOPT_STATUS_INVALID_ARGUMENT = 2,
  // Malformed or inconsistent input file.
  CLUSTOPT_STATUS_DATA_ERROR = 3,
  CLUSTOPT_STATUS_IO_ERROR = 4,
  // The objective returned a non-finite value.
  CLUSTOPT_STATUS_NUMERIC_ERROR = 5,
  // Internal error; the library state is still usable.
  CLUSTOPT_STATUS_PANIC = 6,
} ClustoptStatus;

// A fitted scaler and centroid set.
typedef struct ClustoptModel ClustoptModel;

// Per-iteration cluster counts of one trajectory.
typedef struct ClustoptRepresentation ClustoptRepresentation;

// Trajectories, as read from a file or produced by a run.
typedef struct ClustoptTrajectories ClustoptTrajectories;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null. The string
// stays valid until the next failing call on the same thread.
const char *clustopt_last_error(void);

// Library version, a static nul-terminated string.
const char *clustopt_version(void);

// Run one algorithm on one benchmark instance. `iterations = 0` uses the
// default budget of `10 * dimension`. Writes a new one-element
// trajectory set to `*out`.
//
// # Safety
// String arguments must be nul-terminated; `out` must be writable.
enum ClustoptStatus clustopt_run_algorithm(const char *algorithm,
                                           const char *function,
                                           size_t dimension,
                                           uint64_t instance,
                                           size_t population,
                                           size_t iterations,
                                           uint64_t seed,
                                           struct ClustoptTrajectories **out);

// Read a trajectory CSV.
//
// # Safety
// `path` must be nul-terminated; `out` must be writable.
enum ClustoptStatus clustopt_trajectories_read_csv(const char *path,
                                                   struct ClustoptTrajectories **out);

// # Safety
// `set` must be a live handle; `path` must be nul-terminated.
enum ClustoptStatus clustopt_trajectories_write_csv(const struct ClustoptTrajectories *set,
                                                    const char *path);

// Append copies of every trajectory in `src` to `dst`.
//
// # Safety
// Both handles must be live.
enum ClustoptStatus clustopt_trajectories_append(struct ClustoptTrajectories *dst,
                                                 const struct ClustoptTrajectories *src);

// Number of trajectories in the set; 0 for null.
//
// # Safety
// `set` must be null or a live handle.
size_t clustopt_trajectories_len(const struct ClustoptTrajectories *set);

// Shape `(iterations, population, dimension)` of trajectory `index`.
//
// # Safety
// `set` must be live; the three out pointers must be writable.
enum ClustoptStatus clustopt_trajectory_shape(const struct ClustoptTrajectories *set,
                                              size_t index,
                                              size_t *iterations,
                                              size_t *population,
                                              size_t *dimension);

// Borrow the solutions of trajectory `index`, iteration-major then slot,
// `iterations * population * dimension` values. The pointer is valid until
// the set is modified or freed.
//
// # Safety
// `set` must be live; `data` and `len` must be writable.
enum ClustoptStatus clustopt_trajectory_data(const struct ClustoptTrajectories *set,
                                             size_t index,
                                             const double **data,
                                             size_t *len);

// # Safety
// `set` must be null or a handle not yet freed.
void clustopt_trajectories_free(struct ClustoptTrajectories *set);

// Fit a cluster model on every solution in `set` (one problem). `k = 0`
// selects the cluster count with the elbow method over `[k_min, k_max]`.
//
// # Safety
// `set` must be live; `out` must be writable.
enum ClustoptStatus clustopt_model_fit(const struct ClustoptTrajectories *set,
                                       size_t k,
                                       size_t k_min,
                                       size_t k_max,
                                       uint64_t seed,
                                       struct ClustoptModel **out);

// # Safety
// `path` must be nul-terminated; `out` must be writable.
enum ClustoptStatus clustopt_model_load(const char *path, struct ClustoptModel **out);

// # Safety
// `model` must be live; `path` must be nul-terminated.
enum ClustoptStatus clustopt_model_save(const struct ClustoptModel *model, const char *path);

// Number of clusters; 0 for null.
//
// # Safety
// `model` must be null or live.
size_t clustopt_model_num_clusters(const struct ClustoptModel *model);

// Dimension of the solution space; 0 for null.
//
// # Safety
// `model` must be null or live.
size_t clustopt_model_dimension(const struct ClustoptModel *model);

// Copy the centroids in original (unscaled) coordinates into `out`, which
// must hold `num_clusters * dimension` values.
//
// # Safety
// `model` must be live; `out` must point to `len` writable doubles.
enum ClustoptStatus clustopt_model_centroids(const struct ClustoptModel *model,
                                             double *out,
                                             size_t len);

// Nearest-centroid labels for `n_points` row-major points of dimension
// `dim`, written to `labels`.
//
// # Safety
// `points` must hold `n_points * dim` doubles and `labels` `n_points`
// writable values.
enum ClustoptStatus clustopt_model_assign(const struct ClustoptModel *model,
                                          const double *points,
                                          size_t n_points,
                                          size_t dim,
                                          size_t *labels);

// # Safety
// `model` must be null or a handle not yet freed.
void clustopt_model_free(struct ClustoptModel *model);

// Build the representation of trajectory `index` under `model`.
//
// # Safety
// `set` and `model` must be live; `out` must be writable.
enum ClustoptStatus clustopt_representation_build(const struct ClustoptTrajectories *set,
                                                  size_t index,
                                                  const struct ClustoptModel *model,
                                                  struct ClustoptRepresentation **out);

// # Safety
// `rep` must be live; both out pointers must be writable.
enum ClustoptStatus clustopt_representation_shape(const struct ClustoptRepresentation *rep,
                                                  size_t *iterations,
                                                  size_t *clusters);

// Copy the flattened `iterations * clusters` counts into `out`.
//
// # Safety
// `rep` must be live; `out` must point to `len` writable values.
enum ClustoptStatus clustopt_representation_counts(const struct ClustoptRepresentation *rep,
                                                   uint32_t *out,
                                                   size_t len);

// # Safety
// `rep` must be null or a handle not yet freed.
void clustopt_representation_free(struct ClustoptRepresentation *rep);

// Cosine similarity of two vectors of length `len`.
//
// # Safety
// `u` and `v` must each hold `len` doubles; `out` must be writable.
enum ClustoptStatus clustopt_cosine(const double *u, const double *v, size_t len, double *out);

// Cosine similarity of two representations built against the same model.
//
// # Safety
// Both handles must be live; `out` must be writable.
enum ClustoptStatus clustopt_representation_similarity(const struct ClustoptRepresentation *a,
                                                       const struct ClustoptRepresentation *b,
                                                       double *out);

// Stability of one algorithm on one problem: mean pairwise similarity of
// `n >= 2` representations from distinct seeds.
//
// # Safety
// `reps` must hold `n` live handles; `out` must be writable.
enum ClustoptStatus clustopt_stability(const struct ClustoptRepresentation *const *reps,
                                       size_t n,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLUSTOPT_H */
