// polymom: generate mixtures, fit them by moment completion, score fits and
// run the repeated-trial experiments. Talks to the library only through the
// C interface.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "polymom/polymom.h"

namespace {

// Exit codes: 0 ok, 2 usage, 3 input/schema, 4 solver, 5 extraction.
int exit_code(pm_status s) {
  switch (s) {
    case PM_OK: return 0;
    case PM_ERR_INVALID_ARGUMENT: return 2;
    case PM_ERR_INPUT:
    case PM_ERR_SCHEMA: return 3;
    case PM_ERR_SOLVER: return 4;
    case PM_ERR_EXTRACTION: return 5;
    case PM_ERR_INTERNAL: return 1;
  }
  return 1;
}

struct Failure {
  pm_status status;
};

void check(pm_status s, const char* what) {
  if (s == PM_OK) return;
  std::cerr << "polymom: " << what << ": " << pm_last_error() << " [" << pm_status_name(s)
            << "]\n";
  throw Failure{s};
}

struct CString {
  char* p = nullptr;
  ~CString() { pm_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Dataset {
  pm_dataset* p = nullptr;
  ~Dataset() { pm_dataset_free(p); }
};

struct Report {
  pm_report* p = nullptr;
  ~Report() { pm_report_free(p); }
};

std::string read_text(const std::string& path, pm_status on_error = PM_ERR_INPUT) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "polymom: cannot open '" << path << "'\n";
    throw Failure{on_error};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  check(pm_write_file(path.c_str(), text.c_str()), ("writing " + path).c_str());
}

struct ModelFlags {
  std::string name;
  int d = 1;
  int m = 10;
  std::string views = "categorical";

  std::string json() const {
    nlohmann::json j{{"name", name}, {"dim", d}, {"trials", m}, {"views", views}};
    return j.dump();
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--model", f.name,
                  "gaussian-diag | gaussian-spherical | mlr | binomial | multiview")
      ->required()
      ->check(CLI::IsMember({"gaussian-diag", "gaussian-spherical", "mlr", "binomial", "multiview"}));
  cmd->add_option("--d", f.d, "dimension D (per view for multiview)")->capture_default_str();
  cmd->add_option("--m", f.m, "binomial number of trials")->capture_default_str();
  cmd->add_option("--views", f.views, "multiview view distribution")
      ->check(CLI::IsMember({"categorical", "gaussian"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-model estimation by moment completion and solution extraction"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(pm_version()));

  std::uint64_t seed = 0;
  std::string out;
  bool verbose = false;
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--out", out, "output file (data CSV, report JSON or experiment JSON)");
  app.add_flag("--verbose", verbose, "print warnings and diagnostics to stderr");

  // generate
  auto* gen = app.add_subcommand("generate", "draw a random mixture and sample data from it");
  ModelFlags gen_model;
  int gen_k = 0;
  std::size_t gen_samples = 0;
  std::string gen_truth;
  bool gen_header = false;
  add_model_flags(gen, gen_model);
  gen->add_option("--k", gen_k, "number of components K")->required()->check(CLI::PositiveNumber);
  gen->add_option("--samples", gen_samples, "number of rows T")->required()->check(CLI::PositiveNumber);
  gen->add_option("--truth", gen_truth, "ground-truth JSON path")->required();
  gen->add_flag("--header", gen_header, "write a header row");

  // fit
  auto* fitc = app.add_subcommand("fit", "fit a mixture to a CSV data file");
  ModelFlags fit_model;
  int fit_k = 0;
  int fit_degree = -1;
  std::string fit_data, fit_solver, fit_config;
  bool fit_header = false;
  add_model_flags(fitc, fit_model);
  fitc->add_option("--k", fit_k, "number of components K")->required()->check(CLI::PositiveNumber);
  fitc->add_option("--data", fit_data, "data CSV path")->required();
  fitc->add_flag("--header", fit_header, "the CSV has a header row");
  fitc->add_option("--degree", fit_degree, "moment matrix degree r (0 = automatic)")
      ->check(CLI::NonNegativeNumber);
  fitc->add_option("--solver", fit_solver,
                   "auto | linear | sdp | multiview-corner | multiplication-matrix")
      ->check(CLI::IsMember({"auto", "linear", "sdp", "multiview-corner", "multiplication-matrix"}));
  fitc->add_option("--config", fit_config, "fit config JSON (solver settings, constraints)");

  // eval
  auto* evalc = app.add_subcommand("eval", "relative parameter error of an estimate");
  std::string eval_estimate, eval_truth;
  evalc->add_option("--estimate", eval_estimate, "fit report or truth JSON")->required();
  evalc->add_option("--truth", eval_truth, "ground-truth JSON")->required();

  // experiment
  auto* expc = app.add_subcommand("experiment", "repeated random-model trials over sample sizes");
  std::string exp_config;
  expc->add_option("--config", exp_config, "experiment config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const bool seed_given = app.count("--seed") > 0;

  try {
    if (*gen) {
      if (out.empty()) {
        std::cerr << "polymom: generate needs --out\n";
        return 2;
      }
      const std::string model = gen_model.json();
      CString truth;
      check(pm_random_truth(model.c_str(), gen_k, seed, &truth.p), "drawing the mixture");
      Dataset ds;
      // the data stream is decoupled from the stream that drew the mixture
      check(pm_sample(truth.p, gen_samples, seed + 0x9e3779b97f4a7c15ULL, &ds.p), "sampling");
      check(pm_dataset_write_csv(ds.p, out.c_str(), gen_header ? model.c_str() : nullptr),
            "writing data");
      write_text(gen_truth, truth.str());
      std::cout << out << "\n" << gen_truth << "\n";
      return 0;
    }

    if (*fitc) {
      const std::string model = fit_model.json();
      nlohmann::json cfg = nlohmann::json::object();
      if (!fit_config.empty()) {
        try {
          cfg = nlohmann::json::parse(read_text(fit_config));
        } catch (const nlohmann::json::parse_error& e) {
          std::cerr << "polymom: " << fit_config << ": " << e.what() << "\n";
          return 3;
        }
        if (!cfg.is_object()) {
          std::cerr << "polymom: " << fit_config << ": fit config must be a JSON object\n";
          return 3;
        }
      }
      cfg["k"] = fit_k;
      if (fit_degree >= 0) cfg["degree"] = fit_degree;
      if (!fit_solver.empty()) cfg["solver"] = fit_solver;
      if (seed_given || !cfg.contains("seed")) cfg["seed"] = seed;
      const std::string cfg_text = cfg.dump();

      Dataset ds;
      check(pm_dataset_read_csv(fit_data.c_str(), fit_header ? 1 : 0, &ds.p), "reading data");
      Report rep;
      check(pm_fit(model.c_str(), ds.p, cfg_text.c_str(), fit_k, &rep.p), "fit");
      CString js;
      check(pm_report_json(rep.p, 0, &js.p), "serializing the report");
      if (verbose) {
        const auto j = nlohmann::json::parse(js.str());
        std::cerr << "path " << j["path"].get<std::string>() << ", certificate "
                  << j["certificate_rank"].dump() << ", max moment residual "
                  << j["max_moment_residual"].get<double>() << "\n";
        for (const auto& w : j["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
      }
      if (out.empty()) {
        std::cout << js.str();
      } else {
        write_text(out, js.str());
        std::cout << out << "\n";
      }
      return 0;
    }

    if (*evalc) {
      const std::string est = read_text(eval_estimate);
      const std::string truth = read_text(eval_truth);
      double err = 0.0;
      check(pm_eval(est.c_str(), truth.c_str(), &err), "eval");
      std::printf("%.17g\n", err);
      return 0;
    }

    if (*expc) {
      nlohmann::json cfg;
      try {
        cfg = nlohmann::json::parse(read_text(exp_config));
      } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "polymom: " << exp_config << ": " << e.what() << "\n";
        return 3;
      }
      if (seed_given && cfg.is_object()) cfg["seed"] = seed;
      std::string target = out;
      if (target.empty() && cfg.is_object() && cfg.contains("output") && cfg["output"].is_string()) {
        target = cfg["output"].get<std::string>();
      }
      const std::string text = cfg.dump();
      CString report, table;
      check(pm_run_experiment(text.c_str(), &report.p, &table.p), "experiment");
      std::cout << table.str();
      if (!target.empty()) write_text(target, report.str());
      if (verbose && !target.empty()) std::cerr << "wrote " << target << "\n";
      return 0;
    }
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return 0;
}
