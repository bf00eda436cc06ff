///
/// \file serialization.hpp
///
/// JSON and CSV formats shared by the C API and the command-line tool.
/// Objects use nlohmann::json, whose std::map backing gives sorted keys and
/// therefore byte-stable output. Readers reject unknown keys.
///
#ifndef POLYMOM_SERIALIZATION_HPP
#define POLYMOM_SERIALIZATION_HPP

#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "polymom/models.hpp"
#include "polymom/pipeline.hpp"

namespace polymom {

using Json = nlohmann::json;

Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j);

/// {"model", "param_names", "weights", "components"[, "component_noise"]}
Json to_json(const MixtureSpec& mix);
/// Validates the mixture against its adapter.
MixtureSpec mixture_from_json(const Json& j);

/// Polynomial as [{"exponent": [...], "coef": c}, ...]; an empty list is
/// rejected because the variable count would be unknown.
Json to_json(const Polynomial& f);
Polynomial polynomial_from_json(const Json& j);

Json to_json(const FitConfig& cfg);
/// Keys not present keep the values of `base`.
FitConfig fit_config_from_json(const Json& j, const FitConfig& base = {});

/// Timing is left out unless asked for, so reruns are byte-identical.
Json to_json(const FitReport& report, bool include_timing = false);

/// K x P component matrix from a truth file or a fit report.
Eigen::MatrixXd components_from_json(const Json& j);

Json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const Json& j);
Json to_json(const ExperimentReport& report);

/// Parses JSON text; syntax errors become ErrorCode::Schema.
Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);

/// Comma-separated numbers. Ragged rows, empty input or non-numeric fields
/// throw ErrorCode::Input.
Eigen::MatrixXd parse_csv(const std::string& text, bool header);
Eigen::MatrixXd read_csv(const std::string& path, bool header);
std::string format_csv(const Eigen::MatrixXd& data, const std::vector<std::string>& header = {});

/// Writes through a temporary file in the same directory and renames it
/// into place; on failure nothing is left at `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace polymom

#endif  // POLYMOM_SERIALIZATION_HPP
