#include "polymom/serialization.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <type_traits>
#include <unistd.h>

#include "polymom/error.hpp"

namespace polymom {

namespace {

[[noreturn]] void schema(const std::string& msg) { throw Error(ErrorCode::Schema, msg); }

void require_object(const Json& j, const std::string& what) {
  if (!j.is_object()) schema(what + " must be a JSON object");
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  require_object(j, what);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) schema("unknown key '" + key + "' in " + what);
  }
}

template <class T>
T get_as(const Json& j, const std::string& key, const std::string& what) {
  try {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!j.at(key).is_number_integer()) schema(what + "." + key + " must be an integer");
    }
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    schema(what + "." + key + " is missing or has the wrong type");
  }
}

template <class T>
void read_opt(const Json& j, const std::string& key, const std::string& what, T& out) {
  if (j.contains(key)) out = get_as<T>(j, key, what);
}

double finite_number(const Json& v, const std::string& what) {
  if (!v.is_number()) schema(what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) schema(what + " must be finite");
  return x;
}

Json vector_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_rows_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) schema(what + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = finite_number(j[i], what);
  return v;
}

Eigen::MatrixXd matrix_from_rows(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) schema(what + " must be a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) schema(what + " rows must be non-empty arrays");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) schema(what + " rows have unequal lengths");
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r], what).transpose();
  }
  return m;
}

template <class E>
E parse_enum(const std::string& name, std::initializer_list<E> options, const std::string& what) {
  for (E e : options) {
    if (name == to_string(e)) return e;
  }
  schema("unknown " + what + " '" + name + "'");
}

Json exponent_json(const Exponent& e) {
  Json out = Json::array();
  for (int p : e.powers()) out.push_back(p);
  return out;
}

Exponent exponent_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) schema(what + " exponent must be a non-empty array");
  std::vector<int> powers;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      schema(what + " exponent entries must be non-negative integers");
    }
    powers.push_back(v.get<int>());
  }
  return Exponent(std::move(powers));
}

Json riesz_json(const RieszMap& map) {
  Json out = Json::array();
  for (const auto& [alpha, coef] : map) out.push_back({{"exponent", exponent_json(alpha)}, {"coef", coef}});
  return out;
}

RieszMap riesz_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) schema(what + " must be a non-empty list of terms");
  RieszMap out;
  std::size_t vars = 0;
  for (const auto& term : j) {
    check_keys(term, {"exponent", "coef"}, what + " term");
    if (!term.contains("exponent") || !term.contains("coef")) {
      schema(what + " terms need 'exponent' and 'coef'");
    }
    const Exponent e = exponent_from_json(term["exponent"], what);
    if (vars == 0) vars = e.num_vars();
    if (e.num_vars() != vars) schema(what + " terms disagree on the number of variables");
    out[e] += finite_number(term["coef"], what + " coef");
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Models

Json to_json(const ModelSpec& s) {
  return Json{{"name", s.name},
              {"dim", s.dim},
              {"trials", s.trials},
              {"moment_degree", s.moment_degree},
              {"response_degree", s.response_degree},
              {"noise_variance", s.noise_variance},
              {"noise", to_string(s.noise)},
              {"x_dist", to_string(s.x_dist)},
              {"views", to_string(s.views)}};
}

ModelSpec model_spec_from_json(const Json& j) {
  const std::string w = "model";
  check_keys(j, {"name", "dim", "trials", "moment_degree", "response_degree", "noise_variance",
                 "noise", "x_dist", "views"},
             w);
  ModelSpec s;
  s.name = get_as<std::string>(j, "name", w);
  if (s.name != "gaussian-diag" && s.name != "gaussian-spherical" && s.name != "mlr" &&
      s.name != "binomial" && s.name != "multiview") {
    schema("unknown model '" + s.name + "'");
  }
  read_opt(j, "dim", w, s.dim);
  read_opt(j, "trials", w, s.trials);
  read_opt(j, "moment_degree", w, s.moment_degree);
  read_opt(j, "response_degree", w, s.response_degree);
  read_opt(j, "noise_variance", w, s.noise_variance);
  if (j.contains("noise")) {
    s.noise = parse_enum(get_as<std::string>(j, "noise", w),
                         {MlrNoise::Known, MlrNoise::Parameter, MlrNoise::PerComponentUnknown},
                         "noise model");
  }
  if (j.contains("x_dist")) {
    s.x_dist = parse_enum(get_as<std::string>(j, "x_dist", w),
                          {XDistribution::Normal, XDistribution::Uniform}, "x distribution");
  }
  if (j.contains("views")) {
    s.views = parse_enum(get_as<std::string>(j, "views", w),
                         {ViewDistribution::Categorical, ViewDistribution::Gaussian},
                         "view distribution");
  }
  return s;
}

Json to_json(const MixtureSpec& mix) {
  Json out{{"model", to_json(mix.model)},
           {"param_names", make_adapter(mix.model)->param_names()},
           {"weights", vector_json(mix.weights)},
           {"components", matrix_rows_json(mix.thetas)}};
  if (mix.component_noise.size() > 0) out["component_noise"] = vector_json(mix.component_noise);
  return out;
}

MixtureSpec mixture_from_json(const Json& j) {
  const std::string w = "truth";
  check_keys(j, {"model", "param_names", "weights", "components", "component_noise"}, w);
  if (!j.contains("model") || !j.contains("weights") || !j.contains("components")) {
    schema("truth needs 'model', 'weights' and 'components'");
  }
  MixtureSpec mix;
  mix.model = model_spec_from_json(j["model"]);
  mix.weights = vector_from_json(j["weights"], "truth.weights");
  mix.thetas = matrix_from_rows(j["components"], "truth.components");
  if (j.contains("component_noise")) {
    mix.component_noise = vector_from_json(j["component_noise"], "truth.component_noise");
  }
  try {
    const auto adapter = make_adapter(mix.model);
    if (static_cast<std::size_t>(mix.thetas.cols()) != adapter->num_params()) {
      schema("truth components have " + std::to_string(mix.thetas.cols()) + " parameters, model " +
             mix.model.name + " expects " + std::to_string(adapter->num_params()));
    }
    adapter->validate(mix);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Schema) throw;
    schema(std::string("invalid truth: ") + e.what());
  }
  return mix;
}

// ---------------------------------------------------------------------------
// Polynomials and fit configuration

Json to_json(const Polynomial& f) {
  Json out = Json::array();
  for (const auto& [alpha, coef] : f.terms()) out.push_back({{"exponent", exponent_json(alpha)}, {"coef", coef}});
  return out;
}

Polynomial polynomial_from_json(const Json& j) {
  const RieszMap terms = riesz_from_json(j, "polynomial");
  Polynomial f(terms.begin()->first.num_vars());
  for (const auto& [alpha, coef] : terms) f.add_term(alpha, coef);
  return f;
}

Json to_json(const FitConfig& cfg) {
  Json eq = Json::array(), ineq = Json::array(), direct = Json::array();
  for (const auto& g : cfg.equalities) eq.push_back(to_json(g));
  for (const auto& g : cfg.inequalities) ineq.push_back(to_json(g));
  for (const auto& c : cfg.moment_constraints) {
    direct.push_back({{"terms", riesz_json(c.coefficients)}, {"rhs", c.rhs}});
  }
  return Json{{"k", cfg.k},
              {"degree", cfg.degree},
              {"solver", to_string(cfg.solver)},
              {"seed", cfg.seed},
              {"normalize", cfg.normalize},
              {"max_shift_degree", cfg.max_shift_degree},
              {"equalities", eq},
              {"inequalities", ineq},
              {"moment_constraints", direct},
              {"rho", cfg.sdp.rho},
              {"tol_primal", cfg.sdp.tol_primal},
              {"tol_dual", cfg.sdp.tol_dual},
              {"max_iter", cfg.sdp.max_iter},
              {"over_relaxation", cfg.sdp.over_relaxation},
              {"adaptive_rho", cfg.sdp.adaptive_rho},
              {"infeasible_tol", cfg.sdp.infeasible_tol},
              {"rank_rel_tol", cfg.sdp.rank.rel_tol},
              {"rank_abs_floor", cfg.sdp.rank.abs_floor},
              {"psd_slack", cfg.sdp.rank.psd_slack}};
}

FitConfig fit_config_from_json(const Json& j, const FitConfig& base) {
  const std::string w = "fit config";
  check_keys(j, {"k", "degree", "solver", "seed", "normalize", "max_shift_degree", "equalities",
                 "inequalities", "moment_constraints", "rho", "tol_primal", "tol_dual", "max_iter",
                 "over_relaxation", "adaptive_rho", "infeasible_tol", "rank_rel_tol",
                 "rank_abs_floor", "psd_slack"},
             w);
  FitConfig cfg = base;
  read_opt(j, "k", w, cfg.k);
  read_opt(j, "degree", w, cfg.degree);
  read_opt(j, "seed", w, cfg.seed);
  read_opt(j, "normalize", w, cfg.normalize);
  read_opt(j, "max_shift_degree", w, cfg.max_shift_degree);
  if (j.contains("solver")) {
    try {
      cfg.solver = parse_solver_path(get_as<std::string>(j, "solver", w));
    } catch (const Error& e) {
      schema(e.what());
    }
  }
  auto polys = [&](const char* key, std::vector<Polynomial>& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_array()) schema(w + "." + key + " must be an array");
    out.clear();
    for (const auto& p : j[key]) out.push_back(polynomial_from_json(p));
  };
  polys("equalities", cfg.equalities);
  polys("inequalities", cfg.inequalities);
  if (j.contains("moment_constraints")) {
    if (!j["moment_constraints"].is_array()) schema(w + ".moment_constraints must be an array");
    cfg.moment_constraints.clear();
    for (const auto& c : j["moment_constraints"]) {
      check_keys(c, {"terms", "rhs"}, "moment constraint");
      if (!c.contains("terms") || !c.contains("rhs")) schema("moment constraints need 'terms' and 'rhs'");
      try {
        cfg.moment_constraints.emplace_back(riesz_from_json(c["terms"], "moment constraint"),
                                            finite_number(c["rhs"], "moment constraint rhs"));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Schema) throw;
        schema(e.what());
      }
    }
  }
  read_opt(j, "rho", w, cfg.sdp.rho);
  read_opt(j, "tol_primal", w, cfg.sdp.tol_primal);
  read_opt(j, "tol_dual", w, cfg.sdp.tol_dual);
  read_opt(j, "max_iter", w, cfg.sdp.max_iter);
  read_opt(j, "over_relaxation", w, cfg.sdp.over_relaxation);
  read_opt(j, "adaptive_rho", w, cfg.sdp.adaptive_rho);
  read_opt(j, "infeasible_tol", w, cfg.sdp.infeasible_tol);
  read_opt(j, "rank_rel_tol", w, cfg.sdp.rank.rel_tol);
  read_opt(j, "rank_abs_floor", w, cfg.sdp.rank.abs_floor);
  read_opt(j, "psd_slack", w, cfg.sdp.rank.psd_slack);
  try {
    cfg.validate();
  } catch (const Error& e) {
    schema(std::string("invalid fit config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Reports

Json to_json(const FitReport& r, bool include_timing) {
  const auto& d = r.estimate.diagnostics;
  Json moments = Json::array();
  if (r.moments) {
    for (const auto& [alpha, v] : r.moments->values()) {
      moments.push_back({{"exponent", exponent_json(alpha)}, {"value", v}});
    }
  }
  Json residuals = Json::array();
  for (const auto& c : r.residuals) {
    residuals.push_back({{"label", c.label}, {"observed", c.observed}, {"fitted", c.fitted}});
  }
  Json out{
      {"model", r.model},
      {"param_names", r.param_names},
      {"path", to_string(r.path)},
      {"status", to_string(r.status)},
      {"certificate_rank", r.certificate ? Json(*r.certificate) : Json(nullptr)},
      {"estimate",
       {{"weights", vector_json(r.estimate.weights)},
        {"components", matrix_rows_json(r.estimate.thetas)},
        {"weight_residual", r.estimate.weight_residual}}},
      {"diagnostics",
       {{"attempts", d.attempts},
        {"max_imag_ratio", d.max_imag_ratio},
        {"eigen_residual", d.eigen_residual},
        {"min_eigen_gap", d.min_eigen_gap},
        {"row_condition", d.row_condition}}},
      {"completion",
       {{"constraint_residual", r.constraint_residual},
        {"sdp_iterations", r.sdp_iterations},
        {"primal_residual", r.primal_residual},
        {"dual_residual", r.dual_residual},
        {"objective", r.objective},
        {"infeasible_suspected", r.infeasible_suspected}}},
      {"normalization", r.normalization
                            ? Json{{"shift", vector_json(r.normalization->shift)},
                                   {"scale", vector_json(r.normalization->scale)}}
                            : Json(nullptr)},
      {"moments", moments},
      {"residuals", residuals},
      {"max_moment_residual", r.max_moment_residual},
      {"warnings", r.warnings},
      {"samples", r.samples},
      {"config", to_json(r.config)}};
  if (include_timing) out["seconds"] = r.seconds;
  return out;
}

Eigen::MatrixXd components_from_json(const Json& j) {
  require_object(j, "estimate file");
  if (j.contains("estimate")) {
    const Json& e = j["estimate"];
    require_object(e, "estimate");
    if (!e.contains("components")) schema("estimate has no 'components'");
    return matrix_from_rows(e["components"], "estimate.components");
  }
  if (!j.contains("components")) schema("file has neither 'estimate' nor 'components'");
  return matrix_from_rows(j["components"], "components");
}

Json to_json(const ExperimentConfig& cfg) {
  Json out{{"model", to_json(cfg.model)}, {"k", cfg.k},           {"samples", cfg.samples},
           {"trials", cfg.trials},        {"methods", cfg.methods}, {"seed", cfg.seed},
           {"fit", to_json(cfg.fit)}};
  out["fit"].erase("k");
  if (!cfg.output.empty()) out["output"] = cfg.output;
  return out;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  const std::string w = "experiment config";
  check_keys(j, {"model", "k", "samples", "trials", "methods", "seed", "fit", "output"}, w);
  if (!j.contains("model")) schema("experiment config needs 'model'");
  ExperimentConfig cfg;
  cfg.model = model_spec_from_json(j["model"]);
  read_opt(j, "k", w, cfg.k);
  if (j.contains("samples")) {
    const Json& s = j["samples"];
    auto size_of = [&](const Json& v) {
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        schema("samples must be non-negative integers");
      }
      return v.get<std::size_t>();
    };
    cfg.samples.clear();
    if (s.is_array()) {
      for (const auto& v : s) cfg.samples.push_back(size_of(v));
    } else {
      cfg.samples.push_back(size_of(s));
    }
  }
  read_opt(j, "trials", w, cfg.trials);
  read_opt(j, "methods", w, cfg.methods);
  read_opt(j, "seed", w, cfg.seed);
  read_opt(j, "output", w, cfg.output);
  FitConfig base;
  base.k = cfg.k;
  if (j.contains("fit")) {
    if (j["fit"].contains("k")) schema("set K at the top level of the experiment config, not in 'fit'");
    cfg.fit = fit_config_from_json(j["fit"], base);
  } else {
    cfg.fit = base;
  }
  try {
    (void)make_adapter(cfg.model);
  } catch (const Error& e) {
    schema(std::string("invalid model: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Json to_json(const ExperimentReport& rep) {
  Json rows = Json::array();
  for (const auto& r : rep.rows) {
    Json errs = Json::array();
    for (const auto& e : r.errors) errs.push_back(e ? Json(*e) : Json(nullptr));
    rows.push_back({{"samples", r.samples},
                    {"method", r.method},
                    {"trials", r.trials},
                    {"failures", r.failures},
                    {"mean_error", r.mean_error ? Json(*r.mean_error) : Json(nullptr)},
                    {"median_error", r.median_error ? Json(*r.median_error) : Json(nullptr)},
                    {"errors", errs},
                    {"failure_reasons", r.failure_reasons}});
  }
  return Json{{"config", to_json(rep.config)}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Files

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    schema(std::string("malformed JSON: ") + e.what());
  }
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Input, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Input, "cannot read '" + path + "'");
  return ss.str();
}

}  // namespace

Json read_json_file(const std::string& path) { return parse_json(slurp(path)); }

Eigen::MatrixXd parse_csv(const std::string& text, bool header) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool skipped_header = !header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    std::vector<double> row;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      field = b == std::string::npos ? std::string() : field.substr(b, e - b + 1);
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() ||
          !std::isfinite(v)) {
        throw Error(ErrorCode::Input, "line " + std::to_string(lineno) + ": '" + field +
                                          "' is not a finite number");
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::Input, "line " + std::to_string(lineno) + " has " +
                                        std::to_string(row.size()) + " fields, expected " +
                                        std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::Input, "no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

Eigen::MatrixXd read_csv(const std::string& path, bool header) {
  try {
    return parse_csv(slurp(path), header);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string format_csv(const Eigen::MatrixXd& data, const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    if (header.size() != static_cast<std::size_t>(data.cols())) {
      throw Error(ErrorCode::DimensionMismatch, "CSV header does not match the column count");
    }
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    out += '\n';
  }
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      out += format_double(data(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.filename().empty()) throw Error(ErrorCode::Input, "'" + path + "' is not a file path");
  std::random_device rd;
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp" + std::to_string(::getpid()) + "-" +
                        std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Input, "cannot write '" + path + "'");
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::Input, "cannot write '" + path + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Input, "cannot move output into place at '" + path + "'");
  }
}

}  // namespace polymom
