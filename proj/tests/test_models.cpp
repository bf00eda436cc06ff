#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "polymom/error.hpp"
#include "polymom/models.hpp"

using namespace polymom;

namespace {

ModelSpec spec_of(const std::string& name, int dim = 1) {
  ModelSpec s;
  s.name = name;
  s.dim = dim;
  return s;
}

std::vector<ModelSpec> all_specs() {
  std::vector<ModelSpec> out{spec_of("gaussian-diag", 1), spec_of("gaussian-diag", 2),
                             spec_of("gaussian-spherical", 2), spec_of("mlr", 2),
                             spec_of("binomial"), spec_of("multiview", 2)};
  ModelSpec noisy = spec_of("mlr", 1);
  noisy.noise = MlrNoise::Parameter;
  out.push_back(noisy);
  ModelSpec mvg = spec_of("multiview", 2);
  mvg.views = ViewDistribution::Gaussian;
  out.push_back(mvg);
  return out;
}

}  // namespace

TEST(Hermite, Coefficients) {
  EXPECT_EQ(hermite_moment_coeffs(0), std::vector<double>({1}));
  EXPECT_EQ(hermite_moment_coeffs(2), std::vector<double>({1, 1}));
  EXPECT_EQ(hermite_moment_coeffs(3), std::vector<double>({1, 3}));
  EXPECT_EQ(hermite_moment_coeffs(4), std::vector<double>({1, 6, 3}));
  EXPECT_EQ(hermite_moment_coeffs(6), std::vector<double>({1, 15, 45, 15}));
}

TEST(Hermite, MatchesGaussianMomentRecursion) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> cd(0.1, 3.0);
  for (int a = 0; a <= 8; ++a) {
    const auto coeffs = hermite_moment_coeffs(a);
    for (double x : coeffs) {
      EXPECT_GE(x, 0.0);
      EXPECT_EQ(x, std::round(x));
    }
    for (int t = 0; t < 5; ++t) {
      const double xi = n01(rng), c = cd(rng);
      const int deg[1] = {a};
      const double got = gaussian_moment_poly(deg, false).evaluate(std::vector<double>{xi, c});
      const double want = oracle::gaussian_raw_moment(a, xi, c);
      EXPECT_NEAR(got, want, 1e-10 * (1.0 + std::abs(want)));
    }
  }
}

TEST(GaussianPoly, Examples) {
  const int a2[1] = {2}, a4[1] = {4};
  Polynomial h2(2);
  h2.add_term({2, 0}, 1);
  h2.add_term({0, 1}, 1);
  EXPECT_EQ(gaussian_moment_poly(a2, false), h2);
  Polynomial h4(2);
  h4.add_term({4, 0}, 1);
  h4.add_term({2, 1}, 6);
  h4.add_term({0, 2}, 3);
  EXPECT_EQ(gaussian_moment_poly(a4, false), h4);

  // variables (xi1, xi2, c1, c2)
  const int a12[2] = {1, 2};
  Polynomial f(4);
  f.add_term({1, 2, 0, 0}, 1);
  f.add_term({1, 0, 0, 1}, 1);
  EXPECT_EQ(gaussian_moment_poly(a12, false), f);

  // spherical: (xi1, xi2, c)
  Polynomial g(3);
  g.add_term({1, 2, 0}, 1);
  g.add_term({1, 0, 1}, 1);
  EXPECT_EQ(gaussian_moment_poly(a12, true), g);
}

TEST(GaussianPoly, UnsupportedDegree) {
  const int a[1] = {13};
  EXPECT_THROW(gaussian_moment_poly(a, false), Error);
}

TEST(MlrPoly, Examples) {
  const std::map<Exponent, double> xm{{Exponent({0}), 1.0}, {Exponent({1}), 0.0},
                                      {Exponent({2}), 1.7}, {Exponent({3}), 0.4},
                                      {Exponent({4}), 3.1}};
  Polynomial f1(1);
  f1.add_term({1}, 1.7);
  EXPECT_EQ(mlr_moment_poly(Exponent({1}), 1, xm, 0.5), f1);

  Polynomial f2(1);
  f2.add_term({0}, 0.5);
  f2.add_term({2}, 1.7);
  EXPECT_EQ(mlr_moment_poly(Exponent({0}), 2, xm, 0.5), f2);

  const Polynomial f0 = mlr_moment_poly(Exponent({3}), 0, xm, 0.5);
  EXPECT_EQ(f0, Polynomial::constant(1, 0.4));
  EXPECT_EQ(f0.degree(), 0);
}

TEST(MlrPoly, MissingMoment) {
  const std::map<Exponent, double> xm{{Exponent({0}), 1.0}};
  try {
    (void)mlr_moment_poly(Exponent({1}), 1, xm, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingMoment);
  }
}

TEST(MlrPoly, NoiseAsParameter) {
  const std::map<Exponent, double> xm{{Exponent({0}), 1.0}, {Exponent({2}), 2.0}};
  Polynomial f(2);
  f.add_term({0, 1}, 1.0);
  f.add_term({2, 0}, 2.0);
  EXPECT_EQ(mlr_moment_poly(Exponent({0}), 2, xm, 0.0, true), f);
}

TEST(BinomialPoly, Examples) {
  Polynomial a(1);
  a.add_term({1}, 2);
  a.add_term({2}, -2);
  EXPECT_EQ(binomial_moment_poly(1, 2), a);
  Polynomial b(1);
  b.add_term({0}, 1);
  b.add_term({1}, -2);
  b.add_term({2}, 1);
  EXPECT_EQ(binomial_moment_poly(0, 2), b);
  EXPECT_EQ(binomial_moment_poly(3, 3), Polynomial::monomial(Exponent({3})));
}

TEST(BinomialPoly, SumsToOne) {
  for (int m = 1; m <= 12; ++m) {
    Polynomial s(1);
    for (int i = 0; i <= m; ++i) s += binomial_moment_poly(i, m);
    ASSERT_EQ(s.terms().size(), 1u) << "m=" << m;
    EXPECT_NEAR(s.coefficient(Exponent({0})), 1.0, 1e-9);
  }
}

TEST(MultiviewPoly, Examples) {
  // D = 2: variables xi1_1, xi1_2, xi2_1, xi2_2, xi3_1, xi3_2
  EXPECT_EQ(multiview_moment_poly(2, 0, 0, 0), Polynomial::monomial(Exponent({1, 0, 1, 0, 1, 0})));
  EXPECT_EQ(multiview_moment_poly(2, 1, 0, -1), Polynomial::monomial(Exponent({0, 1, 1, 0, 0, 0})));
  EXPECT_EQ(multiview_moment_poly(2, 1, -1, -1), Polynomial::monomial(Exponent({0, 1, 0, 0, 0, 0})));
  EXPECT_THROW(multiview_moment_poly(2, 2, 0, 0), Error);
}

TEST(Adapters, PolynomialsUseParameterVariables) {
  for (const auto& spec : all_specs()) {
    const auto a = make_adapter(spec);
    const MixtureSpec mix = a->random_mixture(2, 3);
    const MomentEstimates est = a->exact_estimates(mix);
    for (const auto& c : a->moment_conditions(est)) {
      EXPECT_EQ(c.f.num_vars(), a->num_params()) << spec.name << " " << c.label;
      EXPECT_LE(c.f.degree(), a->polynomial_degree()) << spec.name << " " << c.label;
    }
    EXPECT_EQ(a->param_names().size(), a->num_params());
    EXPECT_EQ(a->data_column_names().size(), a->data_cols());
  }
}

TEST(Adapters, RandomMixturesAreValid) {
  for (const auto& spec : all_specs()) {
    const auto a = make_adapter(spec);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const MixtureSpec mix = a->random_mixture(3, seed);
      EXPECT_NO_THROW(a->validate(mix)) << spec.name;
      EXPECT_TRUE((mix.weights.array() > 0).all());
      EXPECT_NEAR(mix.weights.sum(), 1.0, 1e-12);
    }
  }
}

TEST(Adapters, InvalidMixturesRejected) {
  const auto g = make_adapter(spec_of("gaussian-diag", 1));
  MixtureSpec mix = g->random_mixture(2, 0);
  mix.thetas(0, 1) = -1.0;
  EXPECT_THROW(g->validate(mix), Error);
  mix = g->random_mixture(2, 0);
  mix.weights << 0.7, 0.7;
  EXPECT_THROW(g->validate(mix), Error);

  const auto b = make_adapter(spec_of("binomial"));
  MixtureSpec bm = b->random_mixture(2, 0);
  bm.thetas(0, 0) = 1.2;
  EXPECT_THROW(b->validate(bm), Error);
  EXPECT_THROW(make_adapter(spec_of("poisson")), Error);
}

TEST(Adapters, SamplerDeterministicPerSeed) {
  for (const auto& spec : all_specs()) {
    const auto a = make_adapter(spec);
    const MixtureSpec mix = a->random_mixture(2, 1);
    EXPECT_EQ(a->sample(mix, 50, 9), a->sample(mix, 50, 9)) << spec.name;
    EXPECT_NE(a->sample(mix, 50, 9), a->sample(mix, 50, 10)) << spec.name;
  }
}

TEST(Sampler, SingleGaussianMoments) {
  const auto a = make_adapter(spec_of("gaussian-diag", 1));
  MixtureSpec mix{a->spec(), Eigen::VectorXd::Ones(1), Eigen::MatrixXd(1, 2), {}};
  mix.thetas << 0.0, 1.0;
  const Eigen::MatrixXd x = a->sample(mix, 100000, 5);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Sampler, BinomialMean) {
  ModelSpec s = spec_of("binomial");
  s.trials = 10;
  const auto a = make_adapter(s);
  MixtureSpec mix{a->spec(), Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, 0.5), {}};
  const Eigen::MatrixXd x = a->sample(mix, 100000, 2);
  EXPECT_NEAR(x.mean(), 5.0, 0.1);
  EXPECT_GE(x.minCoeff(), 0.0);
  EXPECT_LE(x.maxCoeff(), 10.0);
  EXPECT_TRUE((x.array() == x.array().round()).all());
}

TEST(Sampler, RegressionDesignIndependentOfComponent) {
  const auto a = make_adapter(spec_of("mlr", 1));
  MixtureSpec mix{a->spec(), Eigen::Vector2d(0.5, 0.5), Eigen::MatrixXd(2, 1), {}};
  mix.thetas << 5.0, -5.0;
  const Eigen::MatrixXd x = a->sample(mix, 100000, 3);
  // x is N(0, 1) regardless of the component
  EXPECT_NEAR(x.col(0).mean(), 0.0, 0.02);
  EXPECT_NEAR(x.col(0).array().square().mean(), 1.0, 0.03);
}

TEST(Estimates, EmpiricalMeans) {
  const auto a = make_adapter(spec_of("gaussian-diag", 1));
  Eigen::MatrixXd data(3, 1);
  data << 1, 2, 3;
  const MomentEstimates est = a->estimate(data);
  EXPECT_DOUBLE_EQ(est.means[0], 2.0);
  EXPECT_NEAR(est.means[1], 14.0 / 3.0, 1e-15);
  EXPECT_EQ(est.samples, 3u);

  const auto m = make_adapter(spec_of("mlr", 1));
  Eigen::MatrixXd xy(3, 2);
  xy << 1, 0, 2, 1, 3, 2;
  EXPECT_EQ(m->estimate(xy).side.at(Exponent({0})), 1.0);
}

TEST(Estimates, EmptyOrMismatchedData) {
  const auto a = make_adapter(spec_of("gaussian-diag", 2));
  try {
    (void)a->estimate(Eigen::MatrixXd(0, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Input);
  }
  EXPECT_THROW(a->estimate(Eigen::MatrixXd::Zero(4, 3)), Error);
}

TEST(Separability, Adapters) {
  EXPECT_TRUE(separability_check(*make_adapter(spec_of("gaussian-diag", 2))).pass);
  EXPECT_TRUE(separability_check(*make_adapter(spec_of("mlr", 2))).pass);
  ModelSpec bad = spec_of("mlr", 2);
  bad.noise = MlrNoise::PerComponentUnknown;
  const SeparabilityResult r = separability_check(*make_adapter(bad));
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.witness.find("y^2"), std::string::npos) << r.witness;
}

TEST(Normalization, MapsMomentsAndParametersConsistently) {
  for (const char* name : {"gaussian-diag", "gaussian-spherical"}) {
    const auto a = make_adapter(spec_of(name, 2));
    const MixtureSpec mix = a->random_mixture(2, 12);
    const MomentEstimates est = a->exact_estimates(mix);
    const auto n = a->normalization(est);
    ASSERT_TRUE(n);
    // oracle: transform the parameters by hand and recompute the moments
    MixtureSpec moved = mix;
    for (Eigen::Index k = 0; k < 2; ++k) {
      for (int i = 0; i < 2; ++i) {
        moved.thetas(k, i) = (mix.thetas(k, i) - n->shift(i)) / n->scale(i);
      }
      for (Eigen::Index j = 2; j < mix.thetas.cols(); ++j) {
        const double s = n->scale(j - 2 < 2 ? j - 2 : 0);
        moved.thetas(k, j) = mix.thetas(k, j) / (s * s);
      }
    }
    const MomentEstimates want = a->exact_estimates(moved);
    const MomentEstimates got = a->normalize(est, *n);
    for (std::size_t i = 0; i < want.means.size(); ++i) {
      EXPECT_NEAR(got.means[i], want.means[i], 1e-10 * (1.0 + std::abs(want.means[i]))) << name;
    }
    Eigen::MatrixXd back = moved.thetas;
    a->denormalize(back, *n);
    EXPECT_LE((back - mix.thetas).cwiseAbs().maxCoeff(), 1e-12);
    // normalized first and second moments are standard
    EXPECT_NEAR(got.means[0], 0.0, 1e-12);
  }
}

TEST(MonteCarlo, SingleComponentMomentsSmallScale) {
  // Same check the acceptance run makes at 1e6 draws, here at 2e5 for speed.
  for (const auto& spec : all_specs()) {
    const auto a = make_adapter(spec);
    MixtureSpec one = a->random_mixture(1, 4);
    const MomentEstimates exact = a->exact_estimates(one);
    const Eigen::MatrixXd x = a->sample(one, 200000, 8);
    const std::vector<double> theta(one.thetas.data(), one.thetas.data() + one.thetas.cols());
    for (std::size_t n = 0; n < a->num_observations(); ++n) {
      double s = 0.0, s2 = 0.0;
      for (Eigen::Index t = 0; t < x.rows(); ++t) {
        std::vector<double> r(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index j = 0; j < x.cols(); ++j) r[static_cast<std::size_t>(j)] = x(t, j);
        const double v = a->observe(n, r);
        s += v;
        s2 += v * v;
      }
      const double mean = s / x.rows();
      const double se = std::sqrt(std::max(s2 / x.rows() - mean * mean, 0.0) / x.rows());
      const double f = a->moment_polynomial(n, exact).evaluate(theta);
      EXPECT_LE(std::abs(f - mean), 4.5 * se + 1e-12) << spec.name << " " << a->observation_label(n);
    }
  }
}
