#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "polymom/completion.hpp"
#include "polymom/error.hpp"
#include "polymom/models.hpp"

using namespace polymom;

namespace {

std::vector<LinearMomentConstraint> pin_all(const MomentSequence& y) {
  std::vector<LinearMomentConstraint> out;
  for (const auto& [e, v] : y.values()) {
    if (!e.is_zero()) out.emplace_back(RieszMap{{e, 1.0}}, v);
  }
  return out;
}

// Cross-view moments computed directly from the atoms.
MultiviewMoments multiview_from_atoms(const Eigen::MatrixXd& thetas, const Eigen::VectorXd& w,
                                      int d) {
  MultiviewMoments m;
  m.dim = d;
  for (auto& mean : m.means) mean = Eigen::VectorXd::Zero(d);
  m.pair01 = m.pair02 = m.pair12 = Eigen::MatrixXd::Zero(d, d);
  m.triple.assign(static_cast<std::size_t>(d * d * d), 0.0);
  for (Eigen::Index k = 0; k < thetas.rows(); ++k) {
    const Eigen::VectorXd a = thetas.row(k).segment(0, d).transpose();
    const Eigen::VectorXd b = thetas.row(k).segment(d, d).transpose();
    const Eigen::VectorXd c = thetas.row(k).segment(2 * d, d).transpose();
    m.means[0] += w(k) * a;
    m.means[1] += w(k) * b;
    m.means[2] += w(k) * c;
    m.pair01 += w(k) * a * b.transpose();
    m.pair02 += w(k) * a * c.transpose();
    m.pair12 += w(k) * b * c.transpose();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int l = 0; l < d; ++l) m.triple[(i * d + j) * d + l] += w(k) * a(i) * b(j) * c(l);
  }
  return m;
}

}  // namespace

TEST(LinearCompletion, IdentityConstraints) {
  const std::vector<std::vector<double>> atoms{{1.0}, {-1.0}};
  const std::vector<double> w{0.5, 0.5};
  const MomentSequence y = MomentSequence::from_atoms(atoms, w, 4);
  const MomentConstraintSystem sys(1, 4, pin_all(y));
  const LinearCompletion lc = solve_linear_completion(sys);
  ASSERT_EQ(lc.outcome, LinearOutcome::Unique);
  ASSERT_TRUE(lc.result);
  EXPECT_EQ(lc.result->status, CompletionStatus::ExactLinear);
  const std::vector<double> expect{1, 0, 1, 0, 1};
  for (int a = 0; a <= 4; ++a) EXPECT_NEAR(lc.result->y.at({a}), expect[a], 1e-14);
}

TEST(LinearCompletion, Underdetermined) {
  // y_1 + y_2 = 1 over unknowns y_0, y_1, y_2
  std::vector<LinearMomentConstraint> c;
  c.emplace_back(RieszMap{{Exponent({1}), 1.0}, {Exponent({2}), 1.0}}, 1.0);
  const LinearCompletion lc = solve_linear_completion(MomentConstraintSystem(1, 2, c));
  EXPECT_EQ(lc.outcome, LinearOutcome::Underdetermined);
  EXPECT_FALSE(lc.result);
}

TEST(LinearCompletion, InconsistentIsDistinct) {
  std::vector<LinearMomentConstraint> c;
  c.emplace_back(RieszMap{{Exponent({1}), 1.0}}, 1.0);
  c.emplace_back(RieszMap{{Exponent({1}), 1.0}}, 2.0);
  c.emplace_back(RieszMap{{Exponent({2}), 1.0}}, 2.0);
  const LinearCompletion lc = solve_linear_completion(MomentConstraintSystem(1, 2, c));
  EXPECT_EQ(lc.outcome, LinearOutcome::Inconsistent);
  EXPECT_GT(lc.residual_norm, 0.1);
}

TEST(LinearCompletion, RegressionStackIsUnique) {
  ModelSpec spec;
  spec.name = "mlr";
  spec.dim = 2;
  const auto adapter = make_adapter(spec);
  const MixtureSpec mix = adapter->random_mixture(2, 4);
  std::vector<LinearMomentConstraint> cons;
  for (const auto& mc : adapter->moment_conditions(adapter->exact_estimates(mix))) {
    RieszMap coefs = riesz_coefficients(mc.f);
    double rhs = mc.rhs;
    const auto it = coefs.find(Exponent(2));
    if (it != coefs.end()) {
      rhs -= it->second;
      coefs.erase(it);
    }
    if (!coefs.empty()) cons.emplace_back(std::move(coefs), rhs);
  }
  const LinearCompletion lc =
      solve_linear_completion(MomentConstraintSystem(2, adapter->polynomial_degree(), cons));
  ASSERT_EQ(lc.outcome, LinearOutcome::Unique);
  std::vector<std::vector<double>> atoms;
  std::vector<double> w;
  for (int k = 0; k < mix.k(); ++k) {
    atoms.push_back({mix.thetas(k, 0), mix.thetas(k, 1)});
    w.push_back(mix.weights(k));
  }
  const MomentSequence truth = MomentSequence::from_atoms(atoms, w, adapter->polynomial_degree());
  for (const auto& [e, v] : truth.values()) EXPECT_NEAR(lc.result->y.at(e), v, 1e-8) << e.to_string();
}

TEST(LinearCompletion, ScalingInvarianceProperty) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int t = 0; t < 20; ++t) {
    const std::vector<std::vector<double>> atoms{{n01(rng), n01(rng)}, {n01(rng), n01(rng)}};
    const std::vector<double> w{0.4, 0.6};
    const MomentSequence y = MomentSequence::from_atoms(atoms, w, 2);
    // random dense constraints, one per unknown beyond y_0
    const auto basis = monomials_up_to(2, 2);
    std::vector<LinearMomentConstraint> cons;
    for (std::size_t i = 1; i < basis.size(); ++i) {
      RieszMap m;
      for (std::size_t j = 1; j < basis.size(); ++j) m[basis[j]] = n01(rng);
      cons.emplace_back(m, y.apply(m));
    }
    const auto base = solve_linear_completion(MomentConstraintSystem(2, 2, cons));
    ASSERT_EQ(base.outcome, LinearOutcome::Unique);
    const std::size_t pick = static_cast<std::size_t>(t) % cons.size();
    double s = scale(rng) * (t % 2 ? -1.0 : 1.0);
    for (auto& [e, c] : cons[pick].coefficients) c *= s;
    cons[pick].rhs *= s;
    const auto scaled = solve_linear_completion(MomentConstraintSystem(2, 2, cons));
    ASSERT_EQ(scaled.outcome, LinearOutcome::Unique);
    for (const auto& e : basis) EXPECT_NEAR(base.result->y.at(e), scaled.result->y.at(e), 1e-10);
  }
}

TEST(LinearCompletion, ConstraintOutsideUnknownsRejected) {
  std::vector<LinearMomentConstraint> c;
  c.emplace_back(RieszMap{{Exponent({3}), 1.0}}, 1.0);
  EXPECT_THROW(MomentConstraintSystem(1, 2, c), Error);
}

TEST(CornerCompletion, Examples) {
  Eigen::MatrixXd a(1, 1), b(1, 2), c(2, 1);
  a << 1;
  b << 3, -2;
  c << 5, 7;
  Eigen::MatrixXd expect(2, 2);
  expect << 15, -10, 21, -14;
  EXPECT_LE((complete_corner(a, b, c) - expect).norm(), 1e-14);

  Eigen::MatrixXd a2(1, 1), b2(1, 1), c2(1, 1);
  a2 << 2;
  b2 << 4;
  c2 << 6;
  EXPECT_NEAR(complete_corner(a2, b2, c2)(0, 0), 12.0, 1e-14);
}

TEST(CornerCompletion, SingularPivot) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 2, 4;
  try {
    (void)complete_corner(a, Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularBlock);
  }
}

TEST(CornerCompletion, ErasedBlockProperty) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> kd(1, 5), extra(1, 7);
  for (int t = 0; t < 100; ++t) {
    const int k = kd(rng), m = extra(rng), n = extra(rng);
    Eigen::MatrixXd v(k + m, k), w(k + n, k);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n01(rng);
    const Eigen::MatrixXd g = v * w.transpose();
    const Eigen::MatrixXd x = complete_corner(g.topLeftCorner(k, k), g.topRightCorner(k, n),
                                              g.bottomLeftCorner(m, k));
    const Eigen::MatrixXd truth = g.bottomRightCorner(m, n);
    EXPECT_LE((x - truth).norm(), 1e-8 * truth.norm()) << "trial " << t;

    // the same block through the rank-K route on a rectangular pivot
    const Eigen::MatrixXd xr = complete_corner_rank(g.topLeftCorner(k, k), g.topRightCorner(k, n),
                                                    g.bottomLeftCorner(m, k), k);
    EXPECT_LE((xr - truth).norm(), 1e-8 * truth.norm()) << "trial " << t;
  }
}

TEST(Multiview, SingleComponentIsOuterProducts) {
  const int d = 2;
  Eigen::MatrixXd th(1, 3 * d);
  th << 0.3, 0.7, 1.5, -0.5, 2.0, 1.0;
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  const MultiviewCompletion mc = complete_multiview(multiview_from_atoms(th, w, d), 1);
  const Eigen::VectorXd t = th.row(0).transpose();
  EXPECT_LE((mc.second - t * t.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Multiview, MatchesAtomicMomentsProperty) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 2, k = 2 + (trial % 2);
    Eigen::MatrixXd th(k, 3 * d);
    for (Eigen::Index i = 0; i < th.size(); ++i) th.data()[i] = n01(rng);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0);
    w(0) = 2.0;
    w /= w.sum();
    const MultiviewCompletion mc = complete_multiview(multiview_from_atoms(th, w, d), k);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(3 * d, 3 * d);
    std::vector<std::vector<double>> atoms;
    for (int i = 0; i < k; ++i) {
      second += w(i) * th.row(i).transpose() * th.row(i);
      atoms.emplace_back(th.row(i).data(), th.row(i).data() + 0);
      atoms.back().resize(static_cast<std::size_t>(3 * d));
      for (int j = 0; j < 3 * d; ++j) atoms.back()[j] = th(i, j);
    }
    EXPECT_LE((mc.second - second).cwiseAbs().maxCoeff(), 1e-8);
    const std::vector<double> wv(w.data(), w.data() + k);
    const MomentSequence truth = MomentSequence::from_atoms(atoms, wv, 3);
    for (const auto& [e, v] : mc.y.values()) EXPECT_NEAR(v, truth.at(e), 1e-8) << e.to_string();
    // every cell of the block layout is filled
    for (const auto& r : mc.rows)
      for (const auto& c : mc.cols) EXPECT_TRUE(mc.y.contains(r + c));
  }
}

TEST(Multiview, RankAboveDimensionRejected) {
  Eigen::MatrixXd th = Eigen::MatrixXd::Random(2, 6);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
  EXPECT_THROW(complete_multiview(multiview_from_atoms(th, w, 2), 3), Error);
}

TEST(Sdp, PinnedSystemMatchesLinearSolve) {
  const std::vector<std::vector<double>> atoms{{1.0}, {-1.0}};
  const std::vector<double> w{0.5, 0.5};
  const MomentConstraintSystem sys(1, 4, pin_all(MomentSequence::from_atoms(atoms, w, 4)));
  const CompletionResult sdp = solve_sdp_nuclear(sys, SdpConfig{});
  const LinearCompletion lin = solve_linear_completion(sys);
  for (int a = 0; a <= 4; ++a) EXPECT_NEAR(sdp.y.at({a}), lin.result->y.at({a}), 1e-6);
  EXPECT_EQ(sdp.certificate, 2);
}

TEST(Sdp, NormalizationOnlyHasTraceAtLeastOne) {
  const MomentConstraintSystem sys(2, 2, {});
  const CompletionResult r = solve_sdp_nuclear(sys, SdpConfig{});
  EXPECT_NEAR(r.y.at({0, 0}), 1.0, 1e-6);
  EXPECT_GE(r.objective, 1.0 - 1e-6);
  const Eigen::MatrixXd m = assemble(build_moment_index(2, 1), r.y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6 * es.eigenvalues().cwiseAbs().maxCoeff());
}

TEST(Sdp, OutputInvariantsOnPartialSystems) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 10; ++t) {
    const std::vector<std::vector<double>> atoms{{n01(rng), n01(rng)}, {n01(rng), n01(rng)}};
    const std::vector<double> w{0.5, 0.5};
    const MomentSequence y = MomentSequence::from_atoms(atoms, w, 4);
    std::vector<LinearMomentConstraint> cons;
    for (const auto& e : monomials_up_to(2, 3)) {
      if (!e.is_zero()) cons.emplace_back(RieszMap{{e, 1.0}}, y.at(e));
    }
    SdpConfig cfg;
    const MomentConstraintSystem sys(2, 4, cons);
    const CompletionResult r = solve_sdp_nuclear(sys, cfg);
    const Eigen::MatrixXd m = assemble(build_moment_index(2, 2), r.y);
    EXPECT_EQ(m, m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6 * es.eigenvalues().cwiseAbs().maxCoeff());
    if (r.status == CompletionStatus::SdpConverged) {
      Eigen::VectorXd yv(static_cast<Eigen::Index>(sys.unknowns().size()));
      for (std::size_t i = 0; i < sys.unknowns().size(); ++i) {
        yv(static_cast<Eigen::Index>(i)) = r.y.at(sys.unknowns()[i]);
      }
      EXPECT_LE(sys.residual_norm(yv), 1e-6);
    }
  }
}

TEST(Sdp, LocalizingConstraintIsEnforced) {
  // Only y_0 = 1 and y_1 = 0 are fixed; c - 1 >= 0 on the support of a
  // measure over (c) forces y_1 >= 1, which conflicts, so instead ask for
  // c >= 1 with y_1 free and check that the optimum respects it.
  Polynomial g(1);
  g.add_term({1}, 1.0);
  g.add_term({0}, -1.0);
  const std::vector<LocalizingIndex> loc{localizing_index(g, 0, 2)};
  const MomentConstraintSystem sys(1, 2, {});
  const CompletionResult r = solve_sdp_nuclear(sys, SdpConfig{}, loc);
  EXPECT_GE(r.y.at({1}), 1.0 - 1e-5);
}

TEST(Sdp, ConfigValidation) {
  SdpConfig cfg;
  cfg.rho = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SdpConfig{};
  cfg.tol_primal = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}
