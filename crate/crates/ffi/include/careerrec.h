#ifndef CAREERREC_H
#define CAREERREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define CR_ACCEPTANCE_YES 0

#define CR_ACCEPTANCE_NO 1

#define CR_ACCEPTANCE_DONT_KNOW 2

#define CR_GENDER_FEMALE 0

#define CR_GENDER_MALE 1

#define CR_GENDER_NONBINARY 2

#define CR_GENDER_UNDISCLOSED 3

#define CR_DOMINANCE_FEMALE 0

#define CR_DOMINANCE_MALE 1

#define CR_DOMINANCE_DONT_KNOW 2

typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  CR_STATUS_INVALID_ARGUMENT = 2,
  CR_STATUS_IO = 3,
  CR_STATUS_PARSE = 4,
  CR_STATUS_UNKNOWN_ID = 5,
  CR_STATUS_DEGENERATE = 6,
  CR_STATUS_DIMENSION_MISMATCH = 7,
  CR_STATUS_ARTIFACT = 8,
  CR_STATUS_PANIC = 9,
} CrStatus;

/**
 * Opaque handle to a trained system variant.
 */
typedef struct CrVariant CrVariant;

typedef struct CrRecommendation {
  char *concentration_id;
  char *display_name;
  double probability;
  /**
   * 1-based.
   */
  size_t rank;
} CrRecommendation;

typedef struct CrTTest {
  double t;
  double df;
  double p;
} CrTTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. Owned by the library; valid
 * until the next failing call on the same thread. Never null.
 */
const char *cr_last_error_message(void);

/**
 * Release a string returned by this library. Null is ignored.
 */
void cr_string_free(char *s);

/**
 * Load a variant artifact from a JSON file.
 */
enum CrStatus cr_variant_load(const char *path, struct CrVariant **out);

/**
 * Parse a variant artifact from an in-memory JSON string.
 */
enum CrStatus cr_variant_from_json(const char *json, struct CrVariant **out);

/**
 * Release a variant. Null is ignored.
 */
void cr_variant_free(struct CrVariant *v);

/**
 * Variant kind name (`gender_aware_female`, `gender_aware_male` or
 * `gender_debiased`). Free the result with `cr_string_free`.
 */
enum CrStatus cr_variant_kind(const struct CrVariant *v, char **out);

/**
 * Top-`n` concentrations for a new user who liked `items`. On success
 * `*out` holds `*out_len` recommendations; release them with
 * `cr_recommendations_free`.
 */
enum CrStatus cr_variant_recommend(const struct CrVariant *v,
                                   const char *const *items,
                                   size_t n_items,
                                   size_t n,
                                   struct CrRecommendation **out,
                                   size_t *out_len);

/**
 * Release recommendations returned by `cr_variant_recommend`.
 */
void cr_recommendations_free(struct CrRecommendation *recs, size_t len);

/**
 * Unit bias direction from row-major female (`n_female x dim`) and male
 * (`n_male x dim`) embeddings, written to `out` (`dim` values).
 */
enum CrStatus cr_bias_direction(const double *female,
                                size_t n_female,
                                const double *male,
                                size_t n_male,
                                size_t dim,
                                double *out);

/**
 * Remove from `p` its component along `v` (normalized internally).
 * `out` may alias `p`.
 */
enum CrStatus cr_debias(const double *p, const double *v, size_t dim, double *out);

/**
 * NDCG@k of a ranked list of concentration ids against one ground truth.
 */
enum CrStatus cr_ndcg_at_k(const char *const *ranking,
                           size_t n,
                           const char *truth,
                           size_t k,
                           double *out);

/**
 * U_PAR between row-major female (`n_female x n_classes`) and male score
 * matrices.
 */
enum CrStatus cr_u_par(const double *female,
                       size_t n_female,
                       const double *male,
                       size_t n_male,
                       size_t n_classes,
                       double *out);

/**
 * Acceptance score of a `CR_ACCEPTANCE_*` answer.
 */
enum CrStatus cr_acceptance_score(uint32_t answer, double *out);

/**
 * Perceived gender conformity of a `CR_GENDER_*` participant and a
 * `CR_DOMINANCE_*` perception.
 */
enum CrStatus cr_pgc(uint32_t gender, uint32_t perceived, double *out);

/**
 * Welch's t-test of `mean(a) - mean(b)`.
 */
enum CrStatus cr_welch_t_test(const double *a,
                              size_t n_a,
                              const double *b,
                              size_t n_b,
                              struct CrTTest *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAREERREC_H */
