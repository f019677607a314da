/* C interface to the minbo library.
 *
 * Objects are opaque handles created by *_create functions and released by
 * the matching *_free. Every fallible call returns a minbo_status; on
 * failure minbo_last_error() holds a message for the calling thread.
 * Matrices are passed row-major. Handles are not synchronized: use one per
 * thread or guard them externally.
 */
#ifndef MINBO_H
#define MINBO_H

#include <stddef.h>
#include <stdint.h>

#if defined(MINBO_BUILDING_LIBRARY)
#define MINBO_API __attribute__((visibility("default")))
#else
#define MINBO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum minbo_status {
  MINBO_OK = 0,
  MINBO_INVALID_ARGUMENT,
  MINBO_OUT_OF_RANGE,
  MINBO_DIMENSION_MISMATCH,
  MINBO_NOT_POSITIVE_DEFINITE,
  MINBO_HULL_VIOLATION,
  MINBO_NOT_CONVERGED,
  MINBO_RANK_DEFICIENT,
  MINBO_INVALID_WEIGHTS,
  MINBO_LENGTH_MISMATCH,
  MINBO_DEGENERATE_IIB,
  MINBO_SEPARATION,
  MINBO_NON_POSITIVE_VARIANCE,
  MINBO_TOO_MANY_FAILURES,
  MINBO_PARSE_ERROR,
  MINBO_IO_ERROR,
  MINBO_UNBALANCED_LONGITUDINAL,
  MINBO_UNKNOWN_SUBJECT,
  MINBO_CONFIG_ERROR,
  MINBO_OUT_OF_MEMORY,
  MINBO_INTERNAL_ERROR
} minbo_status;

/* Stable identifier such as "HullViolation". */
MINBO_API const char* minbo_status_string(minbo_status status);
/* Message of the last failed call on this thread ("" if none). */
MINBO_API const char* minbo_last_error(void);
MINBO_API const char* minbo_version(void);

/* Diagnostics that do not fail a call (degenerate IIB fallback and the
 * like). NULL restores the default, which prints to stderr. */
typedef void (*minbo_warning_fn)(const char* message, void* user);
MINBO_API void minbo_set_warning_handler(minbo_warning_fn fn, void* user);

/* ---- data ---------------------------------------------------------- */

typedef struct minbo_main minbo_main;
typedef struct minbo_secondary minbo_secondary;

/* y: n outcomes in {0,1}; x: n x p design whose first column is the
 * intercept. */
MINBO_API minbo_status minbo_main_create(const double* y, const double* x, size_t n, size_t p,
                                         minbo_main** out);
MINBO_API void minbo_main_free(minbo_main* main);

/* Linear working model with the four default basis matrices. y: n x m,
 * x: (n*m) x r stacking the subject designs, observed: n flags (NULL means
 * all observed). unit_variance != 0 uses R~ = I instead of the preliminary
 * residual variances. */
MINBO_API minbo_status minbo_secondary_longitudinal(const double* y, const double* x,
                                                    const uint8_t* observed, size_t n, size_t m,
                                                    size_t r, int unit_variance,
                                                    minbo_secondary** out);
/* Logistic working model: y n outcomes, x n x r, redundant z n x q. */
MINBO_API minbo_status minbo_secondary_cross_sectional(const double* y, const double* x,
                                                       const double* z, const uint8_t* observed,
                                                       size_t n, size_t r, size_t q,
                                                       minbo_secondary** out);
MINBO_API void minbo_secondary_free(minbo_secondary* secondary);

/* Stand-alone EL fit of one secondary dataset from the GMM initializer.
 * theta receives r values, weights n values (either may be NULL). */
MINBO_API minbo_status minbo_secondary_fit_el(const minbo_secondary* secondary, double* theta,
                                              double* weights);

/* ---- analysis ------------------------------------------------------ */

typedef struct minbo_analysis minbo_analysis;
typedef struct minbo_result minbo_result;

/* The analysis keeps its own copies of the data. */
MINBO_API minbo_status minbo_analysis_create(const minbo_main* main, minbo_analysis** out);
MINBO_API minbo_status minbo_analysis_add_secondary(minbo_analysis* analysis,
                                                    const minbo_secondary* secondary,
                                                    const char* name);
/* omega: kprime x k, rows summing to one, k = number of secondary datasets
 * added so far. iib != 0 replaces each row by IIB weights over its support. */
MINBO_API minbo_status minbo_analysis_add_scheme(minbo_analysis* analysis, const char* label,
                                                 const double* omega, size_t kprime, size_t k,
                                                 int iib);
MINBO_API minbo_status minbo_analysis_run(const minbo_analysis* analysis, double confidence,
                                          minbo_result** out);
MINBO_API void minbo_analysis_free(minbo_analysis* analysis);

typedef enum minbo_field {
  MINBO_ESTIMATE = 0,
  MINBO_ASE,
  MINBO_ERE,
  MINBO_CI_LOWER,
  MINBO_CI_UPPER,
  MINBO_P_VALUE
} minbo_field;

/* Estimator 0 is the MLE; schemes follow in the order added. */
MINBO_API size_t minbo_result_estimators(const minbo_result* result);
MINBO_API size_t minbo_result_coefficients(const minbo_result* result);
MINBO_API const char* minbo_result_label(const minbo_result* result, size_t estimator);
/* Writes minbo_result_coefficients() values. */
MINBO_API minbo_status minbo_result_get(const minbo_result* result, size_t estimator,
                                        minbo_field field, double* out);
/* p x p covariance of sqrt(n)(beta_hat - beta). */
MINBO_API minbo_status minbo_result_covariance(const minbo_result* result, size_t estimator,
                                               double* out);
/* K IIB values at the MLE. */
MINBO_API minbo_status minbo_result_iib(const minbo_result* result, double* out);
MINBO_API void minbo_result_free(minbo_result* result);

/* ---- commands (the CLI is a thin shell around these) ------------------ */

/* out_path may be NULL or "" to use the config's [output] path, or stdout. */
MINBO_API minbo_status minbo_cmd_estimate(const char* config_path, const char* out_path);
/* threads < 0 takes the config value; 0 uses all cores. out_dir may be NULL. */
MINBO_API minbo_status minbo_cmd_simulate(const char* config_path, int threads,
                                          const char* out_dir);
MINBO_API minbo_status minbo_cmd_validate(const char* config_path);

#ifdef __cplusplus
}
#endif

#endif /* MINBO_H */
