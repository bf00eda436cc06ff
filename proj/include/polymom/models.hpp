///
/// \file models.hpp
///
/// Model adapters. Each adapter lists observation functions phi_n, the
/// moment polynomials f_n(theta) = E[phi_n(x) | theta], a sampler, and the
/// parameter layout of one component.
///
#ifndef POLYMOM_MODELS_HPP
#define POLYMOM_MODELS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polymom/completion.hpp"
#include "polymom/polyring.hpp"

namespace polymom {

enum class MlrNoise {
  Known,                  // sigma^2 shared and known
  Parameter,              // per-component sigma_k^2 is the last parameter
  PerComponentUnknown,    // per-component sigma_k^2, not a parameter (not separable)
};
enum class XDistribution { Normal, Uniform };
enum class ViewDistribution { Categorical, Gaussian };

const char* to_string(MlrNoise v) noexcept;
const char* to_string(XDistribution v) noexcept;
const char* to_string(ViewDistribution v) noexcept;

/// Model family and its nuisance inputs.
struct ModelSpec {
  std::string name = "gaussian-diag";  // gaussian-diag | gaussian-spherical | mlr | binomial | multiview
  int dim = 1;                         // D
  int trials = 10;                     // binomial m
  int moment_degree = 0;               // gaussian |alpha| / mlr |alpha| bound; 0 = default
  int response_degree = 3;             // mlr bound on b
  double noise_variance = 1.0;         // mlr known sigma^2
  MlrNoise noise = MlrNoise::Known;
  XDistribution x_dist = XDistribution::Normal;
  ViewDistribution views = ViewDistribution::Categorical;

  bool operator==(const ModelSpec&) const = default;
};

/// K-component mixture: one parameter vector per row of `thetas`.
struct MixtureSpec {
  ModelSpec model;
  Eigen::VectorXd weights;
  Eigen::MatrixXd thetas;
  /// Only for MlrNoise::PerComponentUnknown.
  Eigen::VectorXd component_noise;

  int k() const noexcept { return static_cast<int>(weights.size()); }
};

/// Population or empirical observation means plus data-side coefficient
/// moments (regressions: E[x^alpha]).
struct MomentEstimates {
  std::vector<double> means;
  std::map<Exponent, double> side;
  std::size_t samples = 0;  // 0 for exact population moments
};

struct MomentCondition {
  Polynomial f;
  double rhs = 0.0;
  std::string label;
};

enum class CoefficientSource { KnownConstant, DataMoment, ComponentParameter };

/// x -> (x - shift) / scale, coordinatewise.
struct AffineNormalization {
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;
};

struct SeparabilityResult {
  bool pass = true;
  std::string witness;  // offending observation when !pass
};

class ModelAdapter {
 public:
  explicit ModelAdapter(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual ~ModelAdapter() = default;

  const ModelSpec& spec() const noexcept { return spec_; }
  const std::string& name() const noexcept { return spec_.name; }

  virtual std::size_t num_params() const = 0;
  virtual std::size_t data_cols() const = 0;
  /// CSV header names; x1..xN unless the adapter says otherwise.
  virtual std::vector<std::string> data_column_names() const;
  virtual std::vector<std::string> param_names() const = 0;
  /// Highest parameter degree among the moment polynomials.
  virtual int polynomial_degree() const = 0;

  virtual std::size_t num_observations() const = 0;
  virtual std::string observation_label(std::size_t n) const = 0;
  virtual double observe(std::size_t n, std::span<const double> row) const = 0;
  virtual Polynomial moment_polynomial(std::size_t n, const MomentEstimates& est) const = 0;
  virtual std::vector<CoefficientSource> coefficient_sources(std::size_t n) const;

  /// Empirical means of every phi_n (plus side moments where needed).
  virtual MomentEstimates estimate(const Eigen::MatrixXd& data) const;
  /// Population moments of a mixture.
  virtual MomentEstimates exact_estimates(const MixtureSpec& mix) const;

  virtual Eigen::MatrixXd sample(const MixtureSpec& mix, std::size_t rows,
                                 std::uint64_t seed) const = 0;
  virtual MixtureSpec random_mixture(int k, std::uint64_t seed) const = 0;
  /// Throws InvalidArgument on weights or parameters outside the domain.
  virtual void validate(const MixtureSpec& mix) const;

  virtual bool is_multiview() const { return false; }
  /// Indices of variance-like parameters (clipped at zero after extraction).
  virtual std::vector<std::size_t> variance_params() const { return {}; }

  /// Data normalization used before completion; none unless the adapter
  /// can map its observation means and parameters through it.
  virtual std::optional<AffineNormalization> normalization(const MomentEstimates&) const {
    return std::nullopt;
  }
  virtual MomentEstimates normalize(const MomentEstimates& est, const AffineNormalization&) const {
    return est;
  }
  /// Maps normalized-space parameters back, in place.
  virtual void denormalize(Eigen::MatrixXd&, const AffineNormalization&) const {}

  std::vector<MomentCondition> moment_conditions(const MomentEstimates& est) const;

 protected:
  virtual std::map<Exponent, double> exact_side(const MixtureSpec&) const { return {}; }
  void check_data(const Eigen::MatrixXd& data) const;

  ModelSpec spec_;
};

std::unique_ptr<ModelAdapter> make_adapter(const ModelSpec& spec);

SeparabilityResult separability_check(const ModelAdapter& adapter);

// ---------------------------------------------------------------------------
// Moment polynomial building blocks

/// Coefficients a_i of h_a(xi, c) = sum_i a_i xi^(a-2i) c^i.
std::vector<double> hermite_moment_coeffs(int a);

/// prod_d h_{alpha_d}(xi_d, c_d) over (xi_1..xi_D, c_1..c_D), or over
/// (xi_1..xi_D, c) when spherical.
Polynomial gaussian_moment_poly(std::span<const int> alpha, bool spherical);

/// E[x^alpha (w^T x + eps)^b] with the supplied x-moments. With
/// `noise_as_param` the noise variance is the variable after w.
Polynomial mlr_moment_poly(const Exponent& alpha, int b,
                           const std::map<Exponent, double>& xmoments,
                           double sigma2, bool noise_as_param = false);

/// binom(m, i) p^i (1-p)^(m-i), expanded.
Polynomial binomial_moment_poly(int i, int m);

/// Product of one coordinate per listed view; views index blocks of size D
/// in (xi^(0), xi^(1), xi^(2)). Pass -1 for an absent view.
Polynomial multiview_moment_poly(int d, int i, int j, int k);

/// Cross-view moment blocks from multiview observation means.
MultiviewMoments multiview_blocks(const ModelAdapter& adapter, const MomentEstimates& est);

/// E[x^alpha] for a standard normal or unit-variance uniform coordinate.
double unit_moment(XDistribution dist, int a);

}  // namespace polymom

#endif  // POLYMOM_MODELS_HPP
