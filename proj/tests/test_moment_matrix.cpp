#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "polymom/error.hpp"
#include "polymom/moment_matrix.hpp"

using namespace polymom;

namespace {

MomentSequence two_atoms_pm1(int degree) {
  const std::vector<std::vector<double>> atoms{{1.0}, {-1.0}};
  const std::vector<double> w{0.5, 0.5};
  return MomentSequence::from_atoms(atoms, w, degree);
}

struct RandomAtoms {
  std::vector<std::vector<double>> atoms;
  std::vector<double> weights;
};

RandomAtoms random_atoms(std::mt19937_64& rng, int k, int p) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.2, 1.0);
  RandomAtoms out;
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    std::vector<double> a(p);
    for (auto& x : a) x = n01(rng);
    out.atoms.push_back(a);
    out.weights.push_back(u(rng));
    total += out.weights.back();
  }
  for (auto& w : out.weights) w /= total;
  return out;
}

}  // namespace

TEST(Riesz, ExamplesFromDefinition) {
  Polynomial f(2);
  f.add_term({3, 0}, 2.0);
  f.add_term({2, 1}, -1.0);
  f.add_term({0, 0}, 3.0);
  const RieszMap m = riesz_coefficients(f);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.at(Exponent({3, 0})), 2.0);
  EXPECT_EQ(m.at(Exponent({2, 1})), -1.0);
  EXPECT_EQ(m.at(Exponent({0, 0})), 3.0);

  Polynomial g(2);
  g.add_term({3, 0}, 1.0);
  g.add_term({1, 1}, 3.0);
  const RieszMap mg = riesz_coefficients(g);
  ASSERT_EQ(mg.size(), 2u);
  EXPECT_EQ(mg.at(Exponent({3, 0})), 1.0);
  EXPECT_EQ(mg.at(Exponent({1, 1})), 3.0);

  const RieszMap one = riesz_coefficients(Polynomial::constant(3, 1.0));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.at(Exponent({0, 0, 0})), 1.0);
}

TEST(Riesz, LinearProperty) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> deg(0, 3);
  for (int t = 0; t < 50; ++t) {
    Polynomial f(2), g(2);
    for (int i = 0; i < 4; ++i) {
      f.add_term({deg(rng), deg(rng)}, n01(rng));
      g.add_term({deg(rng), deg(rng)}, n01(rng));
    }
    const double lambda = n01(rng);
    const RieszMap lhs = riesz_coefficients(f + lambda * g);
    RieszMap rhs = riesz_coefficients(f);
    for (const auto& [e, c] : riesz_coefficients(g)) rhs[e] += lambda * c;
    for (const auto& [e, c] : rhs) {
      const auto it = lhs.find(e);
      const double l = it == lhs.end() ? 0.0 : it->second;
      EXPECT_NEAR(l, c, 1e-12);
    }
    for (const auto& [e, c] : lhs) EXPECT_TRUE(rhs.count(e)) << e.to_string();
  }
}

TEST(MomentIndex, Cells) {
  const MomentIndex a = build_moment_index(1, 1);
  EXPECT_EQ(a.cell(0, 0), Exponent({0}));
  EXPECT_EQ(a.cell(0, 1), Exponent({1}));
  EXPECT_EQ(a.cell(1, 0), Exponent({1}));
  EXPECT_EQ(a.cell(1, 1), Exponent({2}));

  const MomentIndex b = build_moment_index(2, 1);
  EXPECT_EQ(b.cell(1, 2), Exponent({1, 1}));

  // variables (xi, c): rows 1, xi, c, xi^2, xi c, c^2
  const MomentIndex c = build_moment_index(2, 2);
  EXPECT_EQ(c.rows()[3], Exponent({2, 0}));
  EXPECT_EQ(c.cols()[2], Exponent({0, 1}));
  EXPECT_EQ(c.cell(3, 2), Exponent({2, 1}));
}

TEST(MomentIndex, GaussianGridContainsNamedCells) {
  // The hand-picked 1D Gaussian layout 1, xi, xi^2, c, xi^3, xi c sits
  // inside the full degree-3 grlex index over (xi, c).
  const MomentIndex idx = build_moment_index(2, 3);
  const std::vector<Exponent> named{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {3, 0}, {1, 1}};
  std::vector<std::size_t> pos;
  for (const auto& e : named) {
    const auto it = std::find(idx.rows().begin(), idx.rows().end(), e);
    ASSERT_NE(it, idx.rows().end());
    pos.push_back(static_cast<std::size_t>(it - idx.rows().begin()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    for (std::size_t j = 0; j < named.size(); ++j) {
      EXPECT_EQ(idx.cell(pos[i], pos[j]), named[i] + named[j]);
    }
  }
  // xi^3 against xi c is y_{4,1}
  EXPECT_EQ(idx.cell(pos[4], pos[5]), Exponent({4, 1}));
}

TEST(MomentIndex, SymmetricAndCoversAllExponents) {
  const MomentIndex idx = build_moment_index(3, 2);
  for (std::size_t i = 0; i < idx.num_rows(); ++i) {
    for (std::size_t j = 0; j < idx.num_cols(); ++j) EXPECT_EQ(idx.cell(i, j), idx.cell(j, i));
  }
  for (const auto& e : monomials_up_to(3, 4)) EXPECT_TRUE(idx.groups().count(e)) << e.to_string();
}

TEST(Assemble, TwoAtomExample) {
  const MomentSequence y = two_atoms_pm1(4);
  EXPECT_DOUBLE_EQ(y.at({1}), 0.0);
  EXPECT_DOUBLE_EQ(y.at({2}), 1.0);
  const Eigen::MatrixXd m = assemble(build_moment_index(1, 2), y);
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0, 1, 0, 1, 0, 1, 0, 1;
  EXPECT_EQ(m, expected);
}

TEST(Assemble, PointMassAtOrigin) {
  const std::vector<std::vector<double>> atoms{{0.0, 0.0}};
  const std::vector<double> w{1.0};
  const Eigen::MatrixXd m = assemble(build_moment_index(2, 2), MomentSequence::from_atoms(atoms, w, 4));
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 6);
  expected(0, 0) = 1.0;
  EXPECT_EQ(m, expected);
}

TEST(Assemble, MissingMomentNamesExponent) {
  const MomentSequence y = two_atoms_pm1(2);
  try {
    (void)assemble(build_moment_index(1, 2), y);
    FAIL() << "expected MissingMoment";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingMoment);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(Assemble, AtomicSequencesProperty) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    const int k = 1 + t % 4, p = 1 + t % 3, r = 1 + t % 3;
    const auto a = random_atoms(rng, k, p);
    const MomentSequence y = MomentSequence::from_atoms(a.atoms, a.weights, 2 * r);
    const Eigen::MatrixXd m = assemble(build_moment_index(p, r), y);
    const Eigen::MatrixXd ref = oracle::moment_matrix(a.atoms, a.weights, r);
    EXPECT_LE((m - ref).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + ref.cwiseAbs().maxCoeff()));
    EXPECT_EQ(m, m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());
    EXPECT_LE(numeric_rank(m), k);
  }
}

TEST(Localizing, CMinusOneExample) {
  // variables (c, xi); basis [1, c, xi]
  Polynomial g(2);
  g.add_term({1, 0}, 1.0);
  g.add_term({0, 0}, -1.0);
  const LocalizingIndex idx = localizing_index(g, 1, 3);
  ASSERT_EQ(idx.size(), 3u);
  const RieszMap& cell = idx.cell(0, 0);
  ASSERT_EQ(cell.size(), 2u);
  EXPECT_EQ(cell.at(Exponent({1, 0})), 1.0);
  EXPECT_EQ(cell.at(Exponent({0, 0})), -1.0);
  // row c, col xi: L(c xi (c - 1)) = y_{2,1} - y_{1,1}
  const RieszMap& off = idx.cell(1, 2);
  EXPECT_EQ(off.at(Exponent({2, 1})), 1.0);
  EXPECT_EQ(off.at(Exponent({1, 1})), -1.0);
}

TEST(Localizing, ConstantOneMatchesMomentIndex) {
  const LocalizingIndex idx = localizing_index(Polynomial::constant(2, 1.0), 2, 4);
  const MomentIndex mi = build_moment_index(2, 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const RieszMap& cell = idx.cell(i, j);
      ASSERT_EQ(cell.size(), 1u);
      EXPECT_EQ(cell.begin()->first, mi.cell(i, j));
      EXPECT_EQ(cell.begin()->second, 1.0);
    }
  }
}

TEST(Localizing, SingleCell) {
  const LocalizingIndex idx = localizing_index(Polynomial::variable(2, 0), 0, 1);
  ASSERT_EQ(idx.size(), 1u);
  EXPECT_EQ(idx.cell(0, 0).size(), 1u);
  EXPECT_EQ(idx.cell(0, 0).at(Exponent({1, 0})), 1.0);
}

TEST(Localizing, DegreeOverflow) {
  Polynomial g(1);
  g.add_term({2}, 1.0);
  try {
    (void)localizing_index(g, 2, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegreeOverflow);
  }
}

TEST(Localizing, PositivityProperty) {
  // g = c - 1 is nonnegative at atoms with c >= 1
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> cdist(1.0, 3.0), w(0.2, 1.0);
  Polynomial g(2);
  g.add_term({1, 0}, 1.0);
  g.add_term({0, 0}, -1.0);
  for (int t = 0; t < 30; ++t) {
    const int k = 1 + t % 4;
    std::vector<std::vector<double>> atoms;
    std::vector<double> weights;
    for (int i = 0; i < k; ++i) {
      atoms.push_back({cdist(rng), n01(rng)});
      weights.push_back(w(rng));
    }
    double total = 0.0;
    for (double x : weights) total += x;
    for (double& x : weights) x /= total;
    const MomentSequence y = MomentSequence::from_atoms(atoms, weights, 5);
    const Eigen::MatrixXd l = assemble(localizing_index(g, 2, 5), y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(EqualityFamily, ParabolaAtZeroShift) {
  Polynomial g(2);
  g.add_term({1, 0}, 1.0);
  g.add_term({0, 2}, -1.0);
  const auto fam = equality_constraint_family(g, 0);
  ASSERT_EQ(fam.size(), 1u);
  EXPECT_EQ(fam[0].rhs, 0.0);
  ASSERT_EQ(fam[0].coefficients.size(), 2u);
  EXPECT_EQ(fam[0].coefficients.at(Exponent({1, 0})), 1.0);
  EXPECT_EQ(fam[0].coefficients.at(Exponent({0, 2})), -1.0);
}

TEST(EqualityFamily, ParabolaShiftTwo) {
  Polynomial g(2);
  g.add_term({1, 0}, 1.0);
  g.add_term({0, 2}, -1.0);
  const auto fam = equality_constraint_family(g, 2);
  const auto shifts = monomials_up_to(2, 2);
  ASSERT_EQ(fam.size(), shifts.size());
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const Exponent& b = shifts[i];
    EXPECT_EQ(fam[i].coefficients.at(b + Exponent({1, 0})), 1.0);
    EXPECT_EQ(fam[i].coefficients.at(b + Exponent({0, 2})), -1.0);
  }
  // every member vanishes on measures supported on the parabola
  const std::vector<std::vector<double>> atoms{{4.0, 2.0}, {1.0, -1.0}, {0.25, 0.5}};
  const std::vector<double> w{0.2, 0.5, 0.3};
  const MomentSequence y = MomentSequence::from_atoms(atoms, w, 4);
  for (const auto& c : fam) EXPECT_NEAR(y.apply(c.coefficients), 0.0, 1e-12);
}

TEST(EqualityFamily, ZeroPolynomialRejected) {
  EXPECT_THROW(equality_constraint_family(Polynomial(2), 1), Error);
}

TEST(NumericRank, Examples) {
  EXPECT_EQ(numeric_rank(Eigen::MatrixXd::Identity(3, 3)), 3);
  Eigen::MatrixXd m(3, 3);
  m << 1, 0, 1, 0, 1, 0, 1, 0, 1;
  EXPECT_EQ(numeric_rank(m), 2);
  EXPECT_EQ(numeric_rank(Eigen::MatrixXd::Zero(3, 3)), 0);
}

TEST(FlatExtension, Examples) {
  EXPECT_EQ(flat_extension_rank(two_atoms_pm1(4), 2), 2);

  const std::vector<std::vector<double>> pt{{0.7, -1.2}};
  const std::vector<double> one{1.0};
  for (int r = 1; r <= 3; ++r) {
    EXPECT_EQ(flat_extension_rank(MomentSequence::from_atoms(pt, one, 2 * r), r), 1);
  }

  // y_2 < y_1^2 makes M_1 indefinite
  std::map<Exponent, double> vals{{Exponent({0}), 1.0}, {Exponent({1}), 1.0}, {Exponent({2}), 0.2}};
  EXPECT_FALSE(flat_extension_rank(MomentSequence(1, vals), 1).has_value());
}

TEST(FlatExtension, RandomAtomsProperty) {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const int k = 1 + t % 4, p = 1 + t % 3;
    int r = 1;
    while (static_cast<int>(monomials_up_to(p, r - 1).size()) < k) ++r;
    const auto a = random_atoms(rng, k, p);
    // precondition: v_{r-1}(theta_k) independent
    Eigen::MatrixXd v(static_cast<Eigen::Index>(monomials_up_to(p, r - 1).size()), k);
    const auto basis = oracle::grlex(p, r - 1);
    for (int i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < basis.size(); ++j) {
        v(static_cast<Eigen::Index>(j), i) = oracle::mono(a.atoms[i], basis[j]);
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    if (svd.singularValues().minCoeff() < 1e-3 * svd.singularValues().maxCoeff()) continue;
    ++checked;
    EXPECT_EQ(flat_extension_rank(MomentSequence::from_atoms(a.atoms, a.weights, 2 * r), r), k);
  }
  EXPECT_GE(checked, 40);
}
