/* Copyright 2026 The adjointc Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of adjointc. Every handle is opaque; every fallible call returns
 * an adc_status and leaves a message for adc_last_error() on failure.
 * Strings returned through char** are owned by the caller and released with
 * adc_string_free. Structured inputs and outputs are JSON text.
 */
#ifndef ADJOINTC_ADJOINTC_H_
#define ADJOINTC_ADJOINTC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ADC_API __declspec(dllexport)
#else
#define ADC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct adc_module adc_module;

typedef enum adc_status {
  ADC_OK = 0,
  ADC_ERR_PARSE = 1,
  ADC_ERR_VALIDATION = 2,
  ADC_ERR_TYPE_CONFLICT = 3,
  ADC_ERR_UNSUPPORTED = 4,
  ADC_ERR_MISSING_DEFINITION = 5,
  ADC_ERR_SIGNATURE_MISMATCH = 6,
  ADC_ERR_INVALID_ARGUMENT = 7,
  ADC_ERR_RUNTIME = 8,
  ADC_ERR_IO = 9,
  ADC_ERR_INTERNAL = 10
} adc_status;

typedef enum adc_grad_mode { ADC_MODE_COMBINED = 0, ADC_MODE_SPLIT = 1 } adc_grad_mode;

typedef struct adc_grad_options {
  adc_grad_mode mode;
  int seed_param; /* nonzero: float-returning functions take an explicit d_ret */
  int cost_arith;
  int cost_load;
  int cost_budget;
} adc_grad_options;

ADC_API const char* adc_version(void);
ADC_API const char* adc_status_name(adc_status status);
/* Message of the last failure on the calling thread ("" if none). */
ADC_API const char* adc_last_error(void);
ADC_API void adc_string_free(char* s);

/* ---- modules ---- */
ADC_API adc_status adc_module_parse(const char* text, adc_module** out);
/* Parses and merges several files by symbol name. */
ADC_API adc_status adc_module_load_files(const char* const* paths, size_t count, adc_module** out);
ADC_API adc_status adc_module_clone(const adc_module* m, adc_module** out);
ADC_API void adc_module_free(adc_module* m);
ADC_API adc_status adc_module_print(const adc_module* m, char** out);
/* ADC_ERR_VALIDATION with one diagnostic per line in *diagnostics when invalid. */
ADC_API adc_status adc_module_validate(const adc_module* m, char** diagnostics);
ADC_API adc_status adc_module_has_function(const adc_module* m, const char* fn, int* out);

/* ---- analyses ---- */
ADC_API adc_status adc_types(const adc_module* m, char** out, int* iterations);
/* `activity` is a comma list of active, dup, dupnoneed, const (NULL: canonical). */
ADC_API adc_status adc_activity(const adc_module* m, const char* fn, const char* activity, char** out);

/* ---- transformations (in place) ---- */
/* `passes` like "simplify,licm,inline,dce"; NULL selects the default pipeline. */
ADC_API adc_status adc_optimize(adc_module* m, const char* passes, size_t inline_threshold);
ADC_API adc_status adc_expand_autodiff(adc_module* m, const adc_grad_options* opts, int* count);
ADC_API adc_status adc_register_custom_adjoint(adc_module* m, const char* fn, const char* augmented,
                                               const char* gradient);

ADC_API void adc_grad_options_default(adc_grad_options* opts);
/* Adds the gradient of `fn`; its name goes to *gradient and the tape plan, as
 * JSON, to *plan_json (either output may be NULL). */
ADC_API adc_status adc_autodiff(adc_module* m, const char* fn, const char* activity, const adc_grad_options* opts,
                                char** gradient, char** plan_json);
/* mode "enzyme" (optimize, differentiate, optimize) or "ref" (differentiate, optimize, optimize). */
ADC_API adc_status adc_pipeline(const adc_module* m, const char* fn, const char* activity, const char* mode,
                                const char* passes, const adc_grad_options* opts, adc_module** out, char** gradient);

/* ---- execution ----
 * Config JSON: {"entry": "f", "args": [...], "buffers": [{"elem": "f64", "values": [...]}],
 *               "read_stream": [...], "mode": "strict"|"counting", "step_limit": N}
 * An argument is a number (typed by the parameter), null, {"function": "g"},
 * {"buffer": index} or an inline buffer {"elem": "f64", "values": [...]}.
 */
/* The trace is written even when the run fails with ADC_ERR_RUNTIME. */
ADC_API adc_status adc_run(const adc_module* m, const char* config_json, char** trace_json);
ADC_API adc_status adc_gradcheck(const adc_module* m, const char* fn, const char* activity, const char* config_json,
                                 double tol, char** report_json, int* pass);
/* configs_json: [{"n": 64, <config fields>}, ...]; output {"rows": [{"n", "steps"}], "slope"}. */
ADC_API adc_status adc_profile(const adc_module* m, const char* fn, const char* configs_json, char** out_json);
/* modes: "enzyme,ref" or one of them; threads 0 uses every core. */
ADC_API adc_status adc_bench(const char* corpus_dir, const char* modes, uint64_t seed, unsigned threads,
                             char** report_json, char** table);
/* ADJOINTC_SEED when set, else `fallback`. */
ADC_API adc_status adc_seed_from_env(uint64_t fallback, uint64_t* out);

#ifdef __cplusplus
}
#endif

#endif /* ADJOINTC_ADJOINTC_H_ */
