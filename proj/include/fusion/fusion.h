#ifndef FUSION_FUSION_H
#define FUSION_FUSION_H

/* C interface to the fused-data efficiency calculus.
 *
 * All functions return a fusion_status; on failure fusion_last_error() holds
 * a message for the calling thread. Strings returned through out-parameters
 * are heap-allocated and must be released with fusion_string_free().
 */

#ifdef __cplusplus
extern "C" {
#endif

typedef struct fusion_model fusion_model;

typedef enum {
  FUSION_OK = 0,
  FUSION_ERR_VALIDATION = 2, /* alignment or model invariant broken */
  FUSION_ERR_NUMERIC = 3,    /* rank/positivity/solver failure */
  FUSION_ERR_USAGE = 64      /* malformed JSON or arguments */
} fusion_status;

unsigned fusion_abi_version(void);
const char* fusion_last_error(void);
void fusion_string_free(char* s);

/* Model files: {"ideal": pmf, "sources":[...], "lambda":[...],
 * "source_laws":[pmf...] | "derive_from_ideal": true, "framework": {...}} */
fusion_status fusion_model_parse(const char* json_text, fusion_model** out);
void fusion_model_free(fusion_model* m);

/* Alignment report as JSON; FUSION_ERR_VALIDATION when not aligned. */
fusion_status fusion_validate(const fusion_model* m, char** json_report);

/* which: "A" | "Astar" | "info" | "tangent"; CSV with cell-labelled headers. */
fusion_status fusion_operator_dump(const fusion_model* m, const char* which, char** csv);

/* psi_json: {"values":[...]} over the ideal cells (row-major). */
fusion_status fusion_decompose(const fusion_model* m, const char* psi_json,
                               char** json_report);

/* Influence function of the identified functional for a given ideal gradient.
 * want_eif adds the efficient influence function (projection + solve cross
 * check); family_count emits that many family members. The JSON report embeds
 * the CSV table under "table_csv". */
fusion_status fusion_influence(const fusion_model* m, const char* psi_json, int want_eif,
                               int family_count, unsigned long long family_seed,
                               char** json_report);

/* compute: "phi" | "if" | "eif" | "demo"; kind may be NULL/"" to use the
 * model's framework block. */
fusion_status fusion_framework(const fusion_model* m, const char* kind, const char* compute,
                               char** json_report);

/* One-step Monte Carlo; n_list like "500,2000,8000". */
fusion_status fusion_simulate(const fusion_model* m, const char* kind, const char* n_list,
                              int reps, unsigned long long seed, int threads, char** csv);

/* dgp: "appendix-c". Emits [p_s1, var_iiia, var_ii, var_iiib, are_ii, are_iiib]. */
fusion_status fusion_figure(const char* dgp, char** csv);

/* The appendix DGP as a model file; scenario: "transport-ii" | "transport-iiia"
 * | "transport-iiib". */
fusion_status fusion_appendix_c_model(const char* scenario, double p_s1, char** model_json);

#ifdef __cplusplus
}
#endif

#endif /* FUSION_FUSION_H */
