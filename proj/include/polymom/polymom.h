/*
 * polymom.h
 *
 * C interface to the mixture-model moment solver. Objects are opaque
 * handles; every fallible call returns a pm_status and leaves a message in
 * pm_last_error() (per thread). Strings returned through char** are owned by
 * the caller and released with pm_string_free.
 *
 * Structured inputs (model, truth, fit and experiment configs) are JSON
 * text with the same schema the command-line tool reads from files.
 */
#ifndef POLYMOM_POLYMOM_H
#define POLYMOM_POLYMOM_H

#include <stddef.h>
#include <stdint.h>

#if defined(POLYMOM_BUILDING_LIBRARY)
#define PM_API __attribute__((visibility("default")))
#else
#define PM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pm_status {
  PM_OK = 0,
  PM_ERR_INVALID_ARGUMENT = 1, /* bad flag, parameter or dimension */
  PM_ERR_INPUT = 2,            /* unreadable or malformed data file */
  PM_ERR_SCHEMA = 3,           /* JSON does not match the schema */
  PM_ERR_SOLVER = 4,           /* completion failed or did not converge */
  PM_ERR_EXTRACTION = 5,       /* no atoms could be extracted */
  PM_ERR_INTERNAL = 6
} pm_status;

typedef struct pm_dataset pm_dataset;
typedef struct pm_report pm_report;

PM_API const char* pm_version(void);
/* Message of the last failed call on this thread; "" after success. */
PM_API const char* pm_last_error(void);
PM_API const char* pm_status_name(pm_status status);
PM_API void pm_string_free(char* s);

/* Random mixture from the model's documented distribution, as truth JSON. */
PM_API pm_status pm_random_truth(const char* model_json, int k, uint64_t seed, char** truth_json);

/* Datasets: rows x cols doubles, row-major. */
PM_API pm_status pm_dataset_create(size_t rows, size_t cols, const double* row_major,
                                   pm_dataset** out);
PM_API pm_status pm_sample(const char* truth_json, size_t rows, uint64_t seed, pm_dataset** out);
PM_API pm_status pm_dataset_read_csv(const char* path, int header, pm_dataset** out);
/* With a model, a header row of its column names is written first. The
 * file is replaced atomically. */
PM_API pm_status pm_dataset_write_csv(const pm_dataset* ds, const char* path,
                                      const char* model_json);
PM_API size_t pm_dataset_rows(const pm_dataset* ds);
PM_API size_t pm_dataset_cols(const pm_dataset* ds);
PM_API const double* pm_dataset_data(const pm_dataset* ds);
PM_API void pm_dataset_free(pm_dataset* ds);

/* config_json may be NULL for defaults; k overrides the config when > 0. */
PM_API pm_status pm_fit(const char* model_json, const pm_dataset* data, const char* config_json,
                        int k, pm_report** out);
/* Fit on the exact population moments of a truth spec. K is the truth's
 * unless the config sets "k". */
PM_API pm_status pm_fit_exact(const char* truth_json, const char* config_json, pm_report** out);
PM_API pm_status pm_report_json(const pm_report* report, int include_timing, char** out);
/* Certified rank, or -1 without a certificate. */
PM_API int pm_report_certificate(const pm_report* report);
PM_API size_t pm_report_num_components(const pm_report* report);
PM_API size_t pm_report_num_params(const pm_report* report);
/* K x P parameters, row-major, into a caller buffer of that size. */
PM_API pm_status pm_report_components(const pm_report* report, double* out);
PM_API pm_status pm_report_weights(const pm_report* report, double* out);
PM_API void pm_report_free(pm_report* report);

/* Relative error between an estimate (fit report or truth JSON) and a truth. */
PM_API pm_status pm_eval(const char* estimate_json, const char* truth_json, double* rel_error);

/* Report JSON and the aligned text table; either output may be NULL. */
PM_API pm_status pm_run_experiment(const char* config_json, char** report_json, char** table);

/* Atomic text write (temporary file + rename). */
PM_API pm_status pm_write_file(const char* path, const char* contents);

#ifdef __cplusplus
}
#endif

#endif /* POLYMOM_POLYMOM_H */
