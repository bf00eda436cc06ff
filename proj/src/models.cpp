#include "polymom/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polymom/error.hpp"

namespace polymom {

const char* to_string(MlrNoise v) noexcept {
  switch (v) {
    case MlrNoise::Known: return "known";
    case MlrNoise::Parameter: return "parameter";
    case MlrNoise::PerComponentUnknown: return "per-component-unknown";
  }
  return "unknown";
}

const char* to_string(XDistribution v) noexcept {
  return v == XDistribution::Normal ? "normal" : "uniform";
}

const char* to_string(ViewDistribution v) noexcept {
  return v == ViewDistribution::Categorical ? "categorical" : "gaussian";
}

// ---------------------------------------------------------------------------
// Building blocks

std::vector<double> hermite_moment_coeffs(int a) {
  if (a < 0) throw Error(ErrorCode::InvalidArgument, "negative Hermite index");
  // Probabilists' Hermite polynomials, He_{n+1} = x He_n - n He_{n-1};
  // coefficient vectors indexed by power of x.
  std::vector<double> prev{1.0}, cur{0.0, 1.0};
  if (a == 0) return {1.0};
  for (int n = 1; n < a; ++n) {
    std::vector<double> next(static_cast<std::size_t>(n) + 2, 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] += cur[i];
    for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= n * prev[i];
    prev = std::move(cur);
    cur = std::move(next);
  }
  std::vector<double> out;
  for (int i = 0; 2 * i <= a; ++i) out.push_back(std::abs(cur[static_cast<std::size_t>(a - 2 * i)]));
  return out;
}

Polynomial gaussian_moment_poly(std::span<const int> alpha, bool spherical) {
  const std::size_t d = alpha.size();
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "empty data exponent");
  const std::size_t p = spherical ? d + 1 : 2 * d;
  Polynomial out = Polynomial::constant(p, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (alpha[i] < 0) throw Error(ErrorCode::InvalidArgument, "negative data exponent");
    if (alpha[i] > 12) throw Error(ErrorCode::DegreeOverflow, "Gaussian moments above degree 12");
    const auto coeffs = hermite_moment_coeffs(alpha[i]);
    const std::size_t c_var = spherical ? d : d + i;
    Polynomial h(p);
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      std::vector<int> e(p, 0);
      e[i] = alpha[i] - 2 * static_cast<int>(j);
      e[c_var] = static_cast<int>(j);
      h.add_term(Exponent(std::move(e)), coeffs[j]);
    }
    out = out * h;
  }
  return out;
}

namespace {

double double_factorial(int n) {
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

double factorial(int n) {
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

double side_moment(const std::map<Exponent, double>& xm, const Exponent& e) {
  auto it = xm.find(e);
  if (it == xm.end()) {
    throw Error(ErrorCode::MissingMoment, "x-moment E[x^" + e.to_string() + "] not supplied");
  }
  return it->second;
}

}  // namespace

Polynomial mlr_moment_poly(const Exponent& alpha, int b,
                           const std::map<Exponent, double>& xmoments,
                           double sigma2, bool noise_as_param) {
  if (b < 0 || b > 3) throw Error(ErrorCode::InvalidArgument, "response degree must be in 0..3");
  const std::size_t d = alpha.num_vars();
  const std::size_t p = noise_as_param ? d + 1 : d;
  Polynomial out(p);
  auto lift = [&](const Exponent& w) {
    std::vector<int> e(w.powers().begin(), w.powers().end());
    if (noise_as_param) e.push_back(0);
    return Exponent(std::move(e));
  };
  // E[x^alpha (w^T x)^m] = sum_{|beta| = m} multinomial(m; beta) w^beta E[x^(alpha+beta)]
  auto linear_power = [&](int m) {
    Polynomial q(p);
    for (const auto& beta : monomials_of_degree(d, m)) {
      double multi = factorial(m);
      for (std::size_t i = 0; i < d; ++i) multi /= factorial(beta[i]);
      q.add_term(lift(beta), multi * side_moment(xmoments, alpha + beta));
    }
    return q;
  };
  for (int j = 0; j <= b; j += 2) {
    // E[eps^j] = (j-1)!! sigma^j
    Polynomial term = binomial(b, j) * linear_power(b - j);
    if (j > 0) {
      if (noise_as_param) {
        std::vector<int> e(p, 0);
        e[d] = j / 2;
        term = term * Polynomial::monomial(Exponent(std::move(e)), double_factorial(j - 1));
      } else {
        term *= double_factorial(j - 1) * std::pow(sigma2, j / 2);
      }
    }
    out += term;
  }
  return out;
}

Polynomial binomial_moment_poly(int i, int m) {
  if (m < 0 || i < 0 || i > m) throw Error(ErrorCode::InvalidArgument, "binomial index out of range");
  const Polynomial p = Polynomial::variable(1, 0);
  const Polynomial q = Polynomial::constant(1, 1.0) - p;
  return binomial(m, i) * (pow(p, i) * pow(q, m - i));
}

Polynomial multiview_moment_poly(int d, int i, int j, int k) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "multiview dimension < 1");
  std::vector<int> e(static_cast<std::size_t>(3 * d), 0);
  const int idx[3] = {i, j, k};
  for (int v = 0; v < 3; ++v) {
    if (idx[v] < 0) continue;
    if (idx[v] >= d) throw Error(ErrorCode::InvalidArgument, "multiview index out of range");
    ++e[static_cast<std::size_t>(v * d + idx[v])];
  }
  return Polynomial::monomial(Exponent(std::move(e)));
}

double unit_moment(XDistribution dist, int a) {
  if (a < 0) throw Error(ErrorCode::InvalidArgument, "negative moment order");
  if (a % 2) return 0.0;
  if (dist == XDistribution::Normal) return double_factorial(a - 1);
  return std::pow(3.0, a / 2) / (a + 1);
}

// ---------------------------------------------------------------------------
// Adapter base

std::vector<std::string> ModelAdapter::data_column_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < data_cols(); ++i) out.push_back("x" + std::to_string(i + 1));
  return out;
}

std::vector<CoefficientSource> ModelAdapter::coefficient_sources(std::size_t) const {
  return {CoefficientSource::KnownConstant};
}

void ModelAdapter::check_data(const Eigen::MatrixXd& data) const {
  if (data.rows() == 0) throw Error(ErrorCode::Input, "data set is empty");
  if (static_cast<std::size_t>(data.cols()) != data_cols()) {
    throw Error(ErrorCode::Input, name() + " expects " + std::to_string(data_cols()) +
                                      " columns, data has " + std::to_string(data.cols()));
  }
  if (!data.allFinite()) throw Error(ErrorCode::Input, "data contains non-finite values");
}

MomentEstimates ModelAdapter::estimate(const Eigen::MatrixXd& data) const {
  check_data(data);
  MomentEstimates est;
  const std::size_t n_obs = num_observations();
  est.means.assign(n_obs, 0.0);
  std::vector<double> row(static_cast<std::size_t>(data.cols()));
  for (Eigen::Index t = 0; t < data.rows(); ++t) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) row[static_cast<std::size_t>(c)] = data(t, c);
    for (std::size_t n = 0; n < n_obs; ++n) est.means[n] += observe(n, row);
  }
  for (double& m : est.means) m /= static_cast<double>(data.rows());
  est.samples = static_cast<std::size_t>(data.rows());
  return est;
}

MomentEstimates ModelAdapter::exact_estimates(const MixtureSpec& mix) const {
  validate(mix);
  MomentEstimates est;
  est.side = exact_side(mix);
  est.means.assign(num_observations(), 0.0);
  std::vector<double> point(num_params());
  for (std::size_t n = 0; n < num_observations(); ++n) {
    const Polynomial f = moment_polynomial(n, est);
    for (int k = 0; k < mix.k(); ++k) {
      for (std::size_t v = 0; v < point.size(); ++v) point[v] = mix.thetas(k, static_cast<Eigen::Index>(v));
      est.means[n] += mix.weights(k) * f.evaluate(point);
    }
  }
  return est;
}

void ModelAdapter::validate(const MixtureSpec& mix) const {
  if (mix.k() < 1) throw Error(ErrorCode::InvalidArgument, "mixture needs K >= 1");
  if (mix.thetas.rows() != mix.k() ||
      static_cast<std::size_t>(mix.thetas.cols()) != num_params()) {
    throw Error(ErrorCode::InvalidArgument,
                name() + " expects " + std::to_string(mix.k()) + " x " +
                    std::to_string(num_params()) + " parameters");
  }
  if ((mix.weights.array() <= 0.0).any() || std::abs(mix.weights.sum() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "weights must be positive and sum to 1");
  }
  if (!mix.thetas.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite parameters");
}

std::vector<MomentCondition> ModelAdapter::moment_conditions(const MomentEstimates& est) const {
  if (est.means.size() != num_observations()) {
    throw Error(ErrorCode::DimensionMismatch, "estimate count does not match observations");
  }
  std::vector<MomentCondition> out;
  for (std::size_t n = 0; n < num_observations(); ++n) {
    out.push_back({moment_polynomial(n, est), est.means[n], observation_label(n)});
  }
  return out;
}

SeparabilityResult separability_check(const ModelAdapter& adapter) {
  for (std::size_t n = 0; n < adapter.num_observations(); ++n) {
    for (auto src : adapter.coefficient_sources(n)) {
      if (src == CoefficientSource::ComponentParameter) {
        return {false, adapter.observation_label(n) +
                           ": coefficient depends on a per-component quantity that is "
                           "not a parameter"};
      }
    }
  }
  return {};
}

namespace {

Eigen::VectorXd random_weights(int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Eigen::VectorXd w(k);
  for (int i = 0; i < k; ++i) w(i) = u(rng);
  return w / w.sum();
}

std::vector<int> draw_components(const Eigen::VectorXd& weights, std::size_t rows,
                                 std::mt19937_64& rng) {
  std::discrete_distribution<int> pick(weights.data(), weights.data() + weights.size());
  std::vector<int> z(rows);
  for (auto& zi : z) zi = pick(rng);
  return z;
}

// ---------------------------------------------------------------------------

class GaussianAdapter final : public ModelAdapter {
 public:
  explicit GaussianAdapter(ModelSpec spec) : ModelAdapter(std::move(spec)) {
    spherical_ = spec_.name == "gaussian-spherical";
    if (spec_.dim < 1) throw Error(ErrorCode::InvalidArgument, "D must be >= 1");
    degree_ = spec_.moment_degree > 0 ? spec_.moment_degree : (spec_.dim == 1 ? 6 : 4);
    for (const auto& a : monomials_up_to(static_cast<std::size_t>(spec_.dim), degree_)) {
      if (a.degree() > 0) alphas_.push_back(a);
    }
  }

  std::size_t num_params() const override {
    return static_cast<std::size_t>(spec_.dim) + (spherical_ ? 1 : spec_.dim);
  }
  std::size_t data_cols() const override { return static_cast<std::size_t>(spec_.dim); }
  std::vector<std::string> param_names() const override {
    std::vector<std::string> out;
    for (int d = 0; d < spec_.dim; ++d) out.push_back("xi" + std::to_string(d + 1));
    if (spherical_) {
      out.push_back("c");
    } else {
      for (int d = 0; d < spec_.dim; ++d) out.push_back("c" + std::to_string(d + 1));
    }
    return out;
  }
  int polynomial_degree() const override { return degree_; }
  std::size_t num_observations() const override { return alphas_.size(); }
  std::string observation_label(std::size_t n) const override {
    return "x^" + alphas_[n].to_string();
  }
  double observe(std::size_t n, std::span<const double> row) const override {
    return alphas_[n].evaluate(row);
  }
  Polynomial moment_polynomial(std::size_t n, const MomentEstimates&) const override {
    return gaussian_moment_poly(alphas_[n].powers(), spherical_);
  }
  std::vector<std::size_t> variance_params() const override {
    std::vector<std::size_t> out;
    for (std::size_t i = static_cast<std::size_t>(spec_.dim); i < num_params(); ++i) out.push_back(i);
    return out;
  }

  void validate(const MixtureSpec& mix) const override {
    ModelAdapter::validate(mix);
    for (std::size_t v : variance_params()) {
      if ((mix.thetas.col(static_cast<Eigen::Index>(v)).array() <= 0.0).any()) {
        throw Error(ErrorCode::InvalidArgument, "Gaussian variances must be > 0");
      }
    }
  }

  // Centre and scale by the pooled moments. Spherical models share one
  // scale so the common variance stays common.
  std::optional<AffineNormalization> normalization(const MomentEstimates& est) const override {
    const int d = spec_.dim;
    if (degree_ < 2 || est.means.size() != alphas_.size()) return std::nullopt;
    AffineNormalization n{Eigen::VectorXd(d), Eigen::VectorXd(d)};
    const auto lookup = index_of();
    for (int i = 0; i < d; ++i) {
      const Exponent e = Exponent::unit(static_cast<std::size_t>(d), static_cast<std::size_t>(i));
      const double m1 = est.means[lookup.at(e)];
      const double m2 = est.means[lookup.at(e + e)];
      n.shift(i) = m1;
      n.scale(i) = m2 - m1 * m1;
      if (!(n.scale(i) > 0.0) || !std::isfinite(n.scale(i))) return std::nullopt;
    }
    if (spherical_) n.scale.setConstant(n.scale.mean());
    n.scale = n.scale.cwiseSqrt();
    return n;
  }

  // E[prod_d ((x_d - m_d)/s_d)^a_d] by binomial expansion over beta <= alpha.
  MomentEstimates normalize(const MomentEstimates& est,
                            const AffineNormalization& n) const override {
    const auto lookup = index_of();
    const std::size_t d = static_cast<std::size_t>(spec_.dim);
    MomentEstimates out = est;
    for (std::size_t idx = 0; idx < alphas_.size(); ++idx) {
      const auto a = alphas_[idx].powers();
      std::vector<int> b(d, 0);
      double total = 0.0;
      while (true) {
        double coef = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
          coef *= binomial(a[i], b[i]) * std::pow(-n.shift(static_cast<Eigen::Index>(i)), a[i] - b[i]);
        }
        const Exponent be(b);
        total += coef * (be.is_zero() ? 1.0 : est.means[lookup.at(be)]);
        std::size_t i = 0;
        while (i < d && b[i] == a[i]) b[i++] = 0;
        if (i == d) break;
        ++b[i];
      }
      for (std::size_t i = 0; i < d; ++i) total /= std::pow(n.scale(static_cast<Eigen::Index>(i)), a[i]);
      out.means[idx] = total;
    }
    return out;
  }

  void denormalize(Eigen::MatrixXd& thetas, const AffineNormalization& n) const override {
    const int d = spec_.dim;
    for (Eigen::Index k = 0; k < thetas.rows(); ++k) {
      for (int i = 0; i < d; ++i) thetas(k, i) = n.shift(i) + n.scale(i) * thetas(k, i);
      if (spherical_) {
        thetas(k, d) *= n.scale(0) * n.scale(0);
      } else {
        for (int i = 0; i < d; ++i) thetas(k, d + i) *= n.scale(i) * n.scale(i);
      }
    }
  }

  Eigen::MatrixXd sample(const MixtureSpec& mix, std::size_t rows,
                         std::uint64_t seed) const override {
    validate(mix);
    std::mt19937_64 rng(seed);
    const auto z = draw_components(mix.weights, rows, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = spec_.dim;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), d);
    for (std::size_t t = 0; t < rows; ++t) {
      for (int i = 0; i < d; ++i) {
        const double c = mix.thetas(z[t], spherical_ ? d : d + i);
        x(static_cast<Eigen::Index>(t), i) = mix.thetas(z[t], i) + std::sqrt(c) * normal(rng);
      }
    }
    return x;
  }

  // Means N(0, I); sigma = 2 * (smallest mean separation); diagonal
  // variances scaled per coordinate by U(0.5, 1.5).
  MixtureSpec random_mixture(int k, std::uint64_t seed) const override {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.5, 1.5);
    const int d = spec_.dim;
    MixtureSpec mix{spec_, random_weights(k, rng),
                    Eigen::MatrixXd(k, static_cast<Eigen::Index>(num_params())), {}};
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < d; ++i) mix.thetas(j, i) = normal(rng);
    }
    double sep = k > 1 ? std::numeric_limits<double>::infinity() : 1.0;
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) {
        sep = std::min(sep, (mix.thetas.row(a).head(d) - mix.thetas.row(b).head(d)).norm());
      }
    }
    const double var = 4.0 * sep * sep;
    for (int j = 0; j < k; ++j) {
      if (spherical_) {
        mix.thetas(j, d) = var;
      } else {
        for (int i = 0; i < d; ++i) mix.thetas(j, d + i) = var * scale(rng);
      }
    }
    return mix;
  }

 private:
  std::map<Exponent, std::size_t> index_of() const {
    std::map<Exponent, std::size_t> out;
    for (std::size_t i = 0; i < alphas_.size(); ++i) out.emplace(alphas_[i], i);
    return out;
  }

  bool spherical_ = false;
  int degree_ = 4;
  std::vector<Exponent> alphas_;
};

// ---------------------------------------------------------------------------

class MlrAdapter final : public ModelAdapter {
 public:
  explicit MlrAdapter(ModelSpec spec) : ModelAdapter(std::move(spec)) {
    if (spec_.dim < 1) throw Error(ErrorCode::InvalidArgument, "D must be >= 1");
    if (spec_.response_degree < 1 || spec_.response_degree > 3) {
      throw Error(ErrorCode::InvalidArgument, "mlr response degree must be in 1..3");
    }
    if (!(spec_.noise_variance >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "noise variance must be >= 0");
    }
    alpha_degree_ = spec_.moment_degree > 0 ? spec_.moment_degree : 3;
    for (const auto& a : monomials_up_to(static_cast<std::size_t>(spec_.dim), alpha_degree_)) {
      for (int b = 1; b <= spec_.response_degree; ++b) obs_.push_back({a, b});
    }
  }

  std::size_t num_params() const override {
    return static_cast<std::size_t>(spec_.dim) + (spec_.noise == MlrNoise::Parameter ? 1 : 0);
  }
  std::size_t data_cols() const override { return static_cast<std::size_t>(spec_.dim) + 1; }
  std::vector<std::string> data_column_names() const override {
    auto out = ModelAdapter::data_column_names();
    out.back() = "y";
    return out;
  }
  std::vector<std::string> param_names() const override {
    std::vector<std::string> out;
    for (int d = 0; d < spec_.dim; ++d) out.push_back("w" + std::to_string(d + 1));
    if (spec_.noise == MlrNoise::Parameter) out.push_back("sigma2");
    return out;
  }
  int polynomial_degree() const override { return spec_.response_degree; }
  std::size_t num_observations() const override { return obs_.size(); }
  std::string observation_label(std::size_t n) const override {
    return "x^" + obs_[n].first.to_string() + " y^" + std::to_string(obs_[n].second);
  }
  double observe(std::size_t n, std::span<const double> row) const override {
    const std::size_t d = static_cast<std::size_t>(spec_.dim);
    return obs_[n].first.evaluate(row.first(d)) * std::pow(row[d], obs_[n].second);
  }
  Polynomial moment_polynomial(std::size_t n, const MomentEstimates& est) const override {
    return mlr_moment_poly(obs_[n].first, obs_[n].second, est.side, spec_.noise_variance,
                           spec_.noise == MlrNoise::Parameter);
  }
  std::vector<CoefficientSource> coefficient_sources(std::size_t n) const override {
    std::vector<CoefficientSource> out{CoefficientSource::DataMoment};
    if (obs_[n].second >= 2) {
      out.push_back(spec_.noise == MlrNoise::PerComponentUnknown
                        ? CoefficientSource::ComponentParameter
                        : CoefficientSource::KnownConstant);
    }
    return out;
  }
  std::vector<std::size_t> variance_params() const override {
    if (spec_.noise == MlrNoise::Parameter) return {static_cast<std::size_t>(spec_.dim)};
    return {};
  }

  MomentEstimates estimate(const Eigen::MatrixXd& data) const override {
    MomentEstimates est = ModelAdapter::estimate(data);
    const std::size_t d = static_cast<std::size_t>(spec_.dim);
    for (const auto& a : monomials_up_to(d, alpha_degree_ + spec_.response_degree)) {
      double s = 0.0;
      for (Eigen::Index t = 0; t < data.rows(); ++t) {
        double v = 1.0;
        for (std::size_t i = 0; i < d; ++i) v *= std::pow(data(t, static_cast<Eigen::Index>(i)), a[i]);
        s += v;
      }
      est.side.emplace(a, s / static_cast<double>(data.rows()));
    }
    return est;
  }

  MomentEstimates exact_estimates(const MixtureSpec& mix) const override {
    if (spec_.noise != MlrNoise::PerComponentUnknown) return ModelAdapter::exact_estimates(mix);
    validate(mix);
    MomentEstimates est;
    est.side = exact_side(mix);
    est.means.assign(num_observations(), 0.0);
    std::vector<double> point(num_params());
    for (std::size_t n = 0; n < num_observations(); ++n) {
      for (int k = 0; k < mix.k(); ++k) {
        const Polynomial f = mlr_moment_poly(obs_[n].first, obs_[n].second, est.side,
                                             mix.component_noise(k));
        for (std::size_t v = 0; v < point.size(); ++v) point[v] = mix.thetas(k, static_cast<Eigen::Index>(v));
        est.means[n] += mix.weights(k) * f.evaluate(point);
      }
    }
    return est;
  }

  void validate(const MixtureSpec& mix) const override {
    ModelAdapter::validate(mix);
    if (spec_.noise == MlrNoise::Parameter &&
        (mix.thetas.col(spec_.dim).array() < 0.0).any()) {
      throw Error(ErrorCode::InvalidArgument, "noise variances must be >= 0");
    }
    if (spec_.noise == MlrNoise::PerComponentUnknown &&
        (mix.component_noise.size() != mix.k() || (mix.component_noise.array() < 0.0).any())) {
      throw Error(ErrorCode::InvalidArgument, "per-component noise variances required");
    }
  }

  Eigen::MatrixXd sample(const MixtureSpec& mix, std::size_t rows,
                         std::uint64_t seed) const override {
    validate(mix);
    std::mt19937_64 rng(seed);
    const auto z = draw_components(mix.weights, rows, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-std::sqrt(3.0), std::sqrt(3.0));
    const int d = spec_.dim;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), d + 1);
    for (std::size_t t = 0; t < rows; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      double y = 0.0;
      for (int i = 0; i < d; ++i) {
        const double x = spec_.x_dist == XDistribution::Normal ? normal(rng) : uniform(rng);
        out(ti, i) = x;
        y += mix.thetas(z[t], i) * x;
      }
      double s2 = spec_.noise_variance;
      if (spec_.noise == MlrNoise::Parameter) s2 = mix.thetas(z[t], d);
      if (spec_.noise == MlrNoise::PerComponentUnknown) s2 = mix.component_noise(z[t]);
      out(ti, d) = y + std::sqrt(s2) * normal(rng);
    }
    return out;
  }

  MixtureSpec random_mixture(int k, std::uint64_t seed) const override {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> noise(0.5, 1.5);
    MixtureSpec mix{spec_, random_weights(k, rng),
                    Eigen::MatrixXd(k, static_cast<Eigen::Index>(num_params())), {}};
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < spec_.dim; ++i) mix.thetas(j, i) = normal(rng);
      if (spec_.noise == MlrNoise::Parameter) mix.thetas(j, spec_.dim) = noise(rng);
    }
    if (spec_.noise == MlrNoise::PerComponentUnknown) {
      mix.component_noise.resize(k);
      for (int j = 0; j < k; ++j) mix.component_noise(j) = noise(rng);
    }
    return mix;
  }

 protected:
  std::map<Exponent, double> exact_side(const MixtureSpec&) const override {
    std::map<Exponent, double> out;
    for (const auto& a : monomials_up_to(static_cast<std::size_t>(spec_.dim),
                                         alpha_degree_ + spec_.response_degree)) {
      double v = 1.0;
      for (std::size_t i = 0; i < a.num_vars(); ++i) v *= unit_moment(spec_.x_dist, a[i]);
      out.emplace(a, v);
    }
    return out;
  }

 private:
  int alpha_degree_ = 3;
  std::vector<std::pair<Exponent, int>> obs_;
};

// ---------------------------------------------------------------------------

class BinomialAdapter final : public ModelAdapter {
 public:
  explicit BinomialAdapter(ModelSpec spec) : ModelAdapter(std::move(spec)) {
    if (spec_.trials < 1) throw Error(ErrorCode::InvalidArgument, "binomial m must be >= 1");
    spec_.dim = 1;
  }

  std::size_t num_params() const override { return 1; }
  std::size_t data_cols() const override { return 1; }
  std::vector<std::string> data_column_names() const override { return {"x"}; }
  std::vector<std::string> param_names() const override { return {"p"}; }
  int polynomial_degree() const override { return spec_.trials; }
  std::size_t num_observations() const override { return static_cast<std::size_t>(spec_.trials) + 1; }
  std::string observation_label(std::size_t n) const override {
    return "1[x=" + std::to_string(n) + "]";
  }
  double observe(std::size_t n, std::span<const double> row) const override {
    return std::lround(row[0]) == static_cast<long>(n) ? 1.0 : 0.0;
  }
  Polynomial moment_polynomial(std::size_t n, const MomentEstimates&) const override {
    return binomial_moment_poly(static_cast<int>(n), spec_.trials);
  }

  MomentEstimates estimate(const Eigen::MatrixXd& data) const override {
    check_data(data);
    for (Eigen::Index t = 0; t < data.rows(); ++t) {
      const double v = data(t, 0);
      if (v != std::round(v) || v < 0 || v > spec_.trials) {
        throw Error(ErrorCode::Input, "binomial data must be integers in [0, m]");
      }
    }
    return ModelAdapter::estimate(data);
  }

  void validate(const MixtureSpec& mix) const override {
    ModelAdapter::validate(mix);
    if ((mix.thetas.array() <= 0.0).any() || (mix.thetas.array() >= 1.0).any()) {
      throw Error(ErrorCode::InvalidArgument, "binomial probabilities must lie in (0, 1)");
    }
  }

  Eigen::MatrixXd sample(const MixtureSpec& mix, std::size_t rows,
                         std::uint64_t seed) const override {
    validate(mix);
    std::mt19937_64 rng(seed);
    const auto z = draw_components(mix.weights, rows, rng);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), 1);
    for (std::size_t t = 0; t < rows; ++t) {
      std::binomial_distribution<int> draw(spec_.trials, mix.thetas(z[t], 0));
      out(static_cast<Eigen::Index>(t), 0) = draw(rng);
    }
    return out;
  }

  // p ~ U(0.1, 0.9) with pairwise gaps >= 0.1.
  MixtureSpec random_mixture(int k, std::uint64_t seed) const override {
    if (k < 1 || k > 8) throw Error(ErrorCode::InvalidArgument, "binomial K must be in 1..8");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    MixtureSpec mix{spec_, random_weights(k, rng), Eigen::MatrixXd(k, 1), {}};
    for (int j = 0; j < k; ++j) {
      for (;;) {
        const double p = u(rng);
        bool ok = true;
        for (int i = 0; i < j; ++i) ok = ok && std::abs(p - mix.thetas(i, 0)) >= 0.1;
        if (ok) {
          mix.thetas(j, 0) = p;
          break;
        }
      }
    }
    return mix;
  }
};

// ---------------------------------------------------------------------------

class MultiviewAdapter final : public ModelAdapter {
 public:
  explicit MultiviewAdapter(ModelSpec spec) : ModelAdapter(std::move(spec)) {
    if (spec_.dim < 1) throw Error(ErrorCode::InvalidArgument, "D must be >= 1");
    const int d = spec_.dim;
    for (int v = 0; v < 3; ++v) {
      for (int i = 0; i < d; ++i) {
        int idx[3] = {-1, -1, -1};
        idx[v] = i;
        obs_.push_back({idx[0], idx[1], idx[2]});
      }
    }
    for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          std::array<int, 3> idx{-1, -1, -1};
          idx[static_cast<std::size_t>(a)] = i;
          idx[static_cast<std::size_t>(b)] = j;
          obs_.push_back(idx);
        }
      }
    }
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) obs_.push_back({i, j, k});
      }
    }
  }

  std::size_t num_params() const override { return 3 * static_cast<std::size_t>(spec_.dim); }
  std::size_t data_cols() const override { return 3 * static_cast<std::size_t>(spec_.dim); }
  std::vector<std::string> data_column_names() const override {
    std::vector<std::string> out;
    for (int v = 1; v <= 3; ++v) {
      for (int i = 1; i <= spec_.dim; ++i) out.push_back("v" + std::to_string(v) + "_" + std::to_string(i));
    }
    return out;
  }
  std::vector<std::string> param_names() const override {
    std::vector<std::string> out;
    for (int v = 0; v < 3; ++v) {
      for (int i = 0; i < spec_.dim; ++i) {
        out.push_back("xi" + std::to_string(v + 1) + "_" + std::to_string(i + 1));
      }
    }
    return out;
  }
  int polynomial_degree() const override { return 3; }
  bool is_multiview() const override { return true; }
  std::size_t num_observations() const override { return obs_.size(); }
  std::string observation_label(std::size_t n) const override {
    std::string s;
    for (int v = 0; v < 3; ++v) {
      if (obs_[n][static_cast<std::size_t>(v)] < 0) continue;
      if (!s.empty()) s += " ";
      s += "x" + std::to_string(v + 1) + "_" + std::to_string(obs_[n][static_cast<std::size_t>(v)] + 1);
    }
    return s;
  }
  double observe(std::size_t n, std::span<const double> row) const override {
    double v = 1.0;
    for (int view = 0; view < 3; ++view) {
      const int i = obs_[n][static_cast<std::size_t>(view)];
      if (i >= 0) v *= row[static_cast<std::size_t>(view * spec_.dim + i)];
    }
    return v;
  }
  Polynomial moment_polynomial(std::size_t n, const MomentEstimates&) const override {
    return multiview_moment_poly(spec_.dim, obs_[n][0], obs_[n][1], obs_[n][2]);
  }

  void validate(const MixtureSpec& mix) const override {
    ModelAdapter::validate(mix);
    if (spec_.views != ViewDistribution::Categorical) return;
    const int d = spec_.dim;
    for (int k = 0; k < mix.k(); ++k) {
      for (int v = 0; v < 3; ++v) {
        const auto block = mix.thetas.row(k).segment(v * d, d);
        if ((block.array() < 0.0).any() || std::abs(block.sum() - 1.0) > 1e-9) {
          throw Error(ErrorCode::InvalidArgument,
                      "categorical view parameters must be probability vectors");
        }
      }
    }
  }

  Eigen::MatrixXd sample(const MixtureSpec& mix, std::size_t rows,
                         std::uint64_t seed) const override {
    validate(mix);
    std::mt19937_64 rng(seed);
    const auto z = draw_components(mix.weights, rows, rng);
    const int d = spec_.dim;
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), 3 * d);
    for (std::size_t t = 0; t < rows; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      for (int v = 0; v < 3; ++v) {
        const auto probs = mix.thetas.row(z[t]).segment(v * d, d);
        if (spec_.views == ViewDistribution::Categorical) {
          // rows of a column-major matrix are strided; copy first
          std::vector<double> p(static_cast<std::size_t>(d));
          for (int i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] = probs(i);
          std::discrete_distribution<int> draw(p.begin(), p.end());
          out(ti, v * d + draw(rng)) = 1.0;
        } else {
          for (int i = 0; i < d; ++i) out(ti, v * d + i) = probs(i) + normal(rng);
        }
      }
    }
    return out;
  }

  // Categorical views: xi ~ Dirichlet(1); Gaussian views: xi ~ N(0, I).
  MixtureSpec random_mixture(int k, std::uint64_t seed) const override {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = spec_.dim;
    MixtureSpec mix{spec_, random_weights(k, rng), Eigen::MatrixXd(k, 3 * d), {}};
    for (int j = 0; j < k; ++j) {
      for (int v = 0; v < 3; ++v) {
        double sum = 0.0;
        for (int i = 0; i < d; ++i) {
          const double g = spec_.views == ViewDistribution::Categorical ? gamma(rng) : normal(rng);
          mix.thetas(j, v * d + i) = g;
          sum += g;
        }
        if (spec_.views == ViewDistribution::Categorical) {
          mix.thetas.row(j).segment(v * d, d) /= sum;
        }
      }
    }
    return mix;
  }

 private:
  std::vector<std::array<int, 3>> obs_;
};

}  // namespace

std::unique_ptr<ModelAdapter> make_adapter(const ModelSpec& spec) {
  if (spec.name == "gaussian-diag" || spec.name == "gaussian-spherical") {
    return std::make_unique<GaussianAdapter>(spec);
  }
  if (spec.name == "mlr") return std::make_unique<MlrAdapter>(spec);
  if (spec.name == "binomial") return std::make_unique<BinomialAdapter>(spec);
  if (spec.name == "multiview") return std::make_unique<MultiviewAdapter>(spec);
  throw Error(ErrorCode::InvalidArgument,
              "unknown model '" + spec.name +
                  "' (expected gaussian-diag, gaussian-spherical, mlr, binomial or multiview)");
}

MultiviewMoments multiview_blocks(const ModelAdapter& adapter, const MomentEstimates& est) {
  if (!adapter.is_multiview()) {
    throw Error(ErrorCode::InvalidArgument, "multiview blocks need the multiview adapter");
  }
  if (est.means.size() != adapter.num_observations()) {
    throw Error(ErrorCode::DimensionMismatch, "estimate count does not match observations");
  }
  const int d = adapter.spec().dim;
  MultiviewMoments mv;
  mv.dim = d;
  std::size_t n = 0;
  for (int v = 0; v < 3; ++v) {
    mv.means[static_cast<std::size_t>(v)].resize(d);
    for (int i = 0; i < d; ++i) mv.means[static_cast<std::size_t>(v)](i) = est.means[n++];
  }
  for (auto* block : {&mv.pair01, &mv.pair02, &mv.pair12}) {
    block->resize(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) (*block)(i, j) = est.means[n++];
    }
  }
  mv.triple.assign(est.means.begin() + static_cast<std::ptrdiff_t>(n), est.means.end());
  return mv;
}

}  // namespace polymom
