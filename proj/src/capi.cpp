#include "polymom/polymom.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "polymom/error.hpp"
#include "polymom/serialization.hpp"

using namespace polymom;

struct pm_dataset {
  Eigen::MatrixXd m;
  std::vector<double> row_major;

  void sync() {
    row_major.resize(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        row_major.data(), m.rows(), m.cols()) = m;
  }
};

struct pm_report {
  FitReport r;
};

namespace {

thread_local std::string g_error;

pm_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Input: return PM_ERR_INPUT;
    case ErrorCode::Schema: return PM_ERR_SCHEMA;
    case ErrorCode::SolverFailed:
    case ErrorCode::Underdetermined:
    case ErrorCode::Inconsistent:
    case ErrorCode::SingularBlock: return PM_ERR_SOLVER;
    case ErrorCode::ExtractionFailed:
    case ErrorCode::RankDeficient: return PM_ERR_EXTRACTION;
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::MissingMoment:
    case ErrorCode::DegreeOverflow: return PM_ERR_INVALID_ARGUMENT;
  }
  return PM_ERR_INTERNAL;
}

template <class F>
pm_status guarded(F&& f) {
  try {
    g_error.clear();
    f();
    return PM_OK;
  } catch (const Error& e) {
    g_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
  } catch (const std::exception& e) {
    g_error = e.what();
  } catch (...) {
    g_error = "unknown error";
  }
  return PM_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Json parse_arg(const char* text, const char* what) {
  need(text, what);
  return parse_json(text);
}

ModelSpec model_arg(const char* text) {
  const ModelSpec spec = model_spec_from_json(parse_arg(text, "model_json"));
  try {
    (void)make_adapter(spec);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidArgument, e.what());
  }
  return spec;
}

FitConfig config_arg(const char* text) {
  if (!text) return {};
  return fit_config_from_json(parse_json(text));
}

}  // namespace

extern "C" {

const char* pm_version(void) { return "0.1.0"; }

const char* pm_last_error(void) { return g_error.c_str(); }

const char* pm_status_name(pm_status status) {
  switch (status) {
    case PM_OK: return "ok";
    case PM_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case PM_ERR_INPUT: return "input";
    case PM_ERR_SCHEMA: return "schema";
    case PM_ERR_SOLVER: return "solver";
    case PM_ERR_EXTRACTION: return "extraction";
    case PM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void pm_string_free(char* s) { std::free(s); }

pm_status pm_random_truth(const char* model_json, int k, uint64_t seed, char** truth_json) {
  return guarded([&] {
    need(truth_json, "truth_json");
    const auto adapter = make_adapter(model_arg(model_json));
    *truth_json = dup(to_json(adapter->random_mixture(k, seed)).dump(2) + "\n");
  });
}

pm_status pm_dataset_create(size_t rows, size_t cols, const double* row_major, pm_dataset** out) {
  return guarded([&] {
    need(out, "out");
    need(row_major, "row_major");
    if (rows == 0 || cols == 0) throw Error(ErrorCode::InvalidArgument, "dataset must be non-empty");
    auto ds = std::make_unique<pm_dataset>();
    ds->m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        row_major, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    ds->sync();
    *out = ds.release();
  });
}

pm_status pm_sample(const char* truth_json, size_t rows, uint64_t seed, pm_dataset** out) {
  return guarded([&] {
    need(out, "out");
    if (rows == 0) throw Error(ErrorCode::InvalidArgument, "sample count must be >= 1");
    const MixtureSpec mix = mixture_from_json(parse_arg(truth_json, "truth_json"));
    auto ds = std::make_unique<pm_dataset>();
    ds->m = make_adapter(mix.model)->sample(mix, rows, seed);
    ds->sync();
    *out = ds.release();
  });
}

pm_status pm_dataset_read_csv(const char* path, int header, pm_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto ds = std::make_unique<pm_dataset>();
    ds->m = read_csv(path, header != 0);
    ds->sync();
    *out = ds.release();
  });
}

pm_status pm_dataset_write_csv(const pm_dataset* ds, const char* path, const char* model_json) {
  return guarded([&] {
    need(ds, "dataset");
    need(path, "path");
    std::vector<std::string> names;
    if (model_json) names = make_adapter(model_arg(model_json))->data_column_names();
    write_file_atomic(path, format_csv(ds->m, names));
  });
}

size_t pm_dataset_rows(const pm_dataset* ds) { return ds ? static_cast<size_t>(ds->m.rows()) : 0; }
size_t pm_dataset_cols(const pm_dataset* ds) { return ds ? static_cast<size_t>(ds->m.cols()) : 0; }
const double* pm_dataset_data(const pm_dataset* ds) { return ds ? ds->row_major.data() : nullptr; }
void pm_dataset_free(pm_dataset* ds) { delete ds; }

pm_status pm_fit(const char* model_json, const pm_dataset* data, const char* config_json, int k,
                 pm_report** out) {
  return guarded([&] {
    need(data, "dataset");
    need(out, "out");
    const auto adapter = make_adapter(model_arg(model_json));
    FitConfig cfg = config_arg(config_json);
    if (k > 0) cfg.k = k;
    auto rep = std::make_unique<pm_report>();
    rep->r = fit(*adapter, data->m, cfg);
    *out = rep.release();
  });
}

pm_status pm_fit_exact(const char* truth_json, const char* config_json, pm_report** out) {
  return guarded([&] {
    need(out, "out");
    const MixtureSpec mix = mixture_from_json(parse_arg(truth_json, "truth_json"));
    const auto adapter = make_adapter(mix.model);
    FitConfig cfg = config_arg(config_json);
    if (!config_json || !parse_json(config_json).contains("k")) cfg.k = mix.k();
    auto rep = std::make_unique<pm_report>();
    rep->r = fit_moments(*adapter, adapter->exact_estimates(mix), cfg);
    *out = rep.release();
  });
}

pm_status pm_report_json(const pm_report* report, int include_timing, char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    *out = dup(to_json(report->r, include_timing != 0).dump(2) + "\n");
  });
}

int pm_report_certificate(const pm_report* report) {
  return report && report->r.certificate ? *report->r.certificate : -1;
}

size_t pm_report_num_components(const pm_report* report) {
  return report ? static_cast<size_t>(report->r.estimate.thetas.rows()) : 0;
}

size_t pm_report_num_params(const pm_report* report) {
  return report ? static_cast<size_t>(report->r.estimate.thetas.cols()) : 0;
}

pm_status pm_report_components(const pm_report* report, double* out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    const auto& t = report->r.estimate.thetas;
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out, t.rows(), t.cols()) = t;
  });
}

pm_status pm_report_weights(const pm_report* report, double* out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    const auto& w = report->r.estimate.weights;
    std::copy(w.data(), w.data() + w.size(), out);
  });
}

void pm_report_free(pm_report* report) { delete report; }

pm_status pm_eval(const char* estimate_json, const char* truth_json, double* rel_error) {
  return guarded([&] {
    need(rel_error, "rel_error");
    const Eigen::MatrixXd est = components_from_json(parse_arg(estimate_json, "estimate_json"));
    const MixtureSpec truth = mixture_from_json(parse_arg(truth_json, "truth_json"));
    if (est.rows() != truth.thetas.rows() || est.cols() != truth.thetas.cols()) {
      throw Error(ErrorCode::Schema, "estimate is " + std::to_string(est.rows()) + "x" +
                                         std::to_string(est.cols()) + " but the truth is " +
                                         std::to_string(truth.thetas.rows()) + "x" +
                                         std::to_string(truth.thetas.cols()));
    }
    *rel_error = relative_error(est, truth.thetas);
  });
}

pm_status pm_run_experiment(const char* config_json, char** report_json, char** table) {
  return guarded([&] {
    const ExperimentConfig cfg = experiment_config_from_json(parse_arg(config_json, "config_json"));
    const ExperimentReport rep = run_experiment(cfg);
    std::string js = to_json(rep).dump(2) + "\n";
    std::string txt = format_table(rep);
    char* a = report_json ? dup(js) : nullptr;
    char* b = nullptr;
    try {
      b = table ? dup(txt) : nullptr;
    } catch (...) {
      std::free(a);
      throw;
    }
    if (report_json) *report_json = a;
    if (table) *table = b;
  });
}

pm_status pm_write_file(const char* path, const char* contents) {
  return guarded([&] {
    need(path, "path");
    need(contents, "contents");
    write_file_atomic(path, contents);
  });
}

}  // extern "C"
