#ifndef MOBILE_CHARGER_H
#define MOBILE_CHARGER_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of force values in one tactile frame (2 × 10 × 10).
 */
#define MC_FRAME_LEN 200

typedef enum McStatus {
  McStatus_Ok = 0,
  McStatus_NullPointer = 1,
  McStatus_InvalidArgument = 2,
  McStatus_Unreachable = 3,
  McStatus_NoIntersection = 4,
  McStatus_ShapeMismatch = 5,
  McStatus_Io = 6,
  McStatus_Format = 7,
  McStatus_Panic = 8,
} McStatus;

typedef enum McReason {
  McReason_Reached = 0,
  McReason_NotInView = 1,
  McReason_Unreachable = 2,
} McReason;

typedef enum McKind {
  McKind_Angular = 0,
  McKind_Vertical = 1,
  McKind_Horizontal = 2,
} McKind;

/**
 * Opaque Delta mechanism geometry.
 */
typedef struct McGeometry McGeometry;

/**
 * Opaque trained classifier.
 */
typedef struct McModel McModel;

typedef struct McSearchOutcome {
  bool success;
  enum McReason reason;
  uint32_t steps;
  /**
   * Simulated seconds.
   */
  double sim_time;
  /**
   * Whether `target` holds the final actuator-frame target.
   */
  bool has_target;
  double target[3];
} McSearchOutcome;

typedef struct McAnova {
  double f_statistic;
  size_t df_between;
  size_t df_within;
  double p_value;
} McAnova;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
size_t mc_last_error(char *buf, size_t len);

/**
 * Static description of a status code (an `McStatus` value).
 */
const char *mc_status_str(int32_t status);

/**
 * Default geometry. Release with [`mc_geometry_free`].
 */
struct McGeometry *mc_geometry_new_default(void);

/**
 * Custom link lengths (cm) with the default workspace box and joint limits.
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_geometry_new(double base_radius,
                              double platform_radius,
                              double proximal_length,
                              double distal_length,
                              struct McGeometry **out);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards. Null is a no-op.
 */
void mc_geometry_free(struct McGeometry *g);

/**
 * Joint angles (degrees) for an actuator-frame target (cm). `out` holds 3.
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_inverse_kinematics(const struct McGeometry *g,
                                    double x,
                                    double y,
                                    double z,
                                    double *out);

/**
 * Platform position (cm) for three joint angles (degrees). `out` holds 3.
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_forward_kinematics(const struct McGeometry *g,
                                    double theta1,
                                    double theta2,
                                    double theta3,
                                    double *out);

/**
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_in_workspace(const struct McGeometry *g, double x, double y, double z, bool *out);

/**
 * Camera frame to actuator frame for camera pitch `theta_deg` and offset `l` (cm).
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_camera_to_delta(double x,
                                 double y,
                                 double z,
                                 double theta_deg,
                                 double l,
                                 double *out);

/**
 * One docking search from yaw `omega_deg` at distance `l_cm`. The detector
 * uses defaults apart from `miss_prob` and `center_noise_sigma` (cm).
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_run_search(double omega_deg,
                            double l_cm,
                            double stand_height,
                            double miss_prob,
                            double center_noise_sigma,
                            uint64_t seed,
                            struct McSearchOutcome *out);

/**
 * Synthesizes one tactile frame for class `class_index` of `kind` (an
 * `McKind` value) into `out`, which must hold `len >= MC_FRAME_LEN` doubles
 * laid out as `[channel][row][col]`.
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_tactile_synthesize(uint32_t kind,
                                    size_t class_index,
                                    double noise_sigma,
                                    uint64_t seed,
                                    double *out,
                                    size_t len);

/**
 * Loads a model JSON file. Release with [`mc_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum McStatus mc_model_load(const char *path, struct McModel **out);

/**
 * # Safety
 * `m` must come from [`mc_model_load`] and not be used afterwards. Null is a no-op.
 */
void mc_model_free(struct McModel *m);

/**
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_model_num_classes(const struct McModel *m, size_t *out);

/**
 * Classifies one frame of `len` doubles. Writes the class index and its
 * physical value (degrees or mm).
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_model_classify(const struct McModel *m,
                                const double *frame,
                                size_t len,
                                size_t *out_class,
                                double *out_value);

/**
 * One-way ANOVA. `values` holds the groups back to back; `group_sizes`
 * gives each group's length.
 *
 * # Safety
 * Pointer arguments follow the crate-level contract.
 */
enum McStatus mc_anova(const double *values,
                       const size_t *group_sizes,
                       size_t n_groups,
                       struct McAnova *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOBILE_CHARGER_H */
