///
/// \file pipeline.hpp
///
/// Data -> moment estimates -> completion -> certificate -> extraction ->
/// weights, plus the EM baseline, the relative-error metric and the
/// experiment harness.
///
#ifndef POLYMOM_PIPELINE_HPP
#define POLYMOM_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "polymom/completion.hpp"
#include "polymom/extraction.hpp"
#include "polymom/models.hpp"

namespace polymom {

enum class SolverPath { Auto, Linear, Sdp, MultiviewCorner, MultiplicationMatrix };

const char* to_string(SolverPath path) noexcept;
/// Throws InvalidArgument on an unknown name.
SolverPath parse_solver_path(std::string_view name);

struct FitConfig {
  int k = 2;
  /// Moment matrix degree r for the relaxation; 0 picks ceil(deg f / 2).
  int degree = 0;
  SolverPath solver = SolverPath::Auto;
  SdpConfig sdp;
  std::uint64_t seed = 0;

  /// Per-component constraints g(theta) = 0, added as the shifted family.
  std::vector<Polynomial> equalities;
  /// Per-component constraints g(theta) >= 0, added as localizing matrices.
  std::vector<Polynomial> inequalities;
  /// Direct linear constraints on y (e.g. cross-component constraints with
  /// known weights).
  std::vector<LinearMomentConstraint> moment_constraints;
  /// Shift bound for the equality family; -1 uses (moment degree - deg g).
  int max_shift_degree = -1;
  /// Normalize the data moments first when the adapter supports it. Skipped
  /// whenever constraints are present, since those are stated in the
  /// original parameter coordinates.
  bool normalize = true;

  void validate() const;
};

struct ConditionResidual {
  std::string label;
  double observed = 0.0;
  double fitted = 0.0;
};

struct FitReport {
  std::string model;
  std::vector<std::string> param_names;
  SolverPath path = SolverPath::Auto;
  ComponentEstimate estimate;
  /// Completed moments; in normalized coordinates when `normalization` is set.
  std::optional<MomentSequence> moments;
  std::optional<AffineNormalization> normalization;

  CompletionStatus status = CompletionStatus::ExactLinear;
  double constraint_residual = 0.0;
  std::optional<int> certificate;
  int sdp_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  bool infeasible_suspected = false;

  std::vector<ConditionResidual> residuals;
  double max_moment_residual = 0.0;
  std::vector<std::string> warnings;
  std::size_t samples = 0;
  double seconds = 0.0;
  FitConfig config;
};

/// Variance estimates in (-kVarianceClip, 0) are clipped to zero.
inline constexpr double kVarianceClip = 1e-8;

FitReport fit(const ModelAdapter& adapter, const Eigen::MatrixXd& data, const FitConfig& cfg);
FitReport fit_moments(const ModelAdapter& adapter, const MomentEstimates& est,
                      const FitConfig& cfg);

/// Sum_k pi_k f_n(theta_k) for every observation.
std::vector<double> resynthesize(const ModelAdapter& adapter, const MomentEstimates& est,
                                 const Eigen::Ref<const Eigen::MatrixXd>& thetas,
                                 const Eigen::Ref<const Eigen::VectorXd>& weights);

struct EmResult {
  Eigen::MatrixXd thetas;  // same layout as the Gaussian adapters
  Eigen::VectorXd weights;
  double log_likelihood = 0.0;
  std::vector<double> trace;  // per-iteration log-likelihood of the best run
  int iterations = 0;
};

struct EmConfig {
  int restarts = 5;
  int max_iter = 500;
  double tol = 1e-8;  // relative log-likelihood change
};

/// k-means++ initialized EM for diagonal or spherical Gaussian mixtures;
/// best of the restarts by log-likelihood.
EmResult em_gaussian_baseline(const Eigen::MatrixXd& data, int k, bool spherical,
                              std::uint64_t seed, const EmConfig& cfg = {});

/// min over matchings of max_k ||est_k - truth_k|| / ||truth_k||; K <= 6.
double relative_error(const Eigen::Ref<const Eigen::MatrixXd>& estimate,
                      const Eigen::Ref<const Eigen::MatrixXd>& truth);

struct ExperimentConfig {
  ModelSpec model;
  int k = 2;
  std::vector<std::size_t> samples{1000};
  int trials = 10;
  std::vector<std::string> methods{"poly"};
  std::uint64_t seed = 0;
  FitConfig fit;
  /// Optional results path for front ends; unused by run_experiment.
  std::string output;

  void validate() const;
};

struct ExperimentRow {
  std::size_t samples = 0;
  std::string method;
  int trials = 0;
  int failures = 0;
  std::optional<double> mean_error;
  std::optional<double> median_error;
  std::vector<std::optional<double>> errors;  // per trial, empty on failure
  std::vector<std::string> failure_reasons;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ExperimentRow> rows;
};

/// Trial t uses the mixture drawn from a seed derived from (seed, t); the
/// same mixture is reused across sample sizes and methods.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Aligned text table, one line per (samples, method).
std::string format_table(const ExperimentReport& report);

/// Deterministic seed derivation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace polymom

#endif  // POLYMOM_PIPELINE_HPP
