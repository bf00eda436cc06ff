#include "polymom/moment_matrix.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "polymom/error.hpp"

namespace polymom {

RieszMap riesz_coefficients(const Polynomial& f) {
  return RieszMap(f.terms().begin(), f.terms().end());
}

// ---------------------------------------------------------------------------

MomentSequence::MomentSequence(std::size_t num_vars,
                               std::map<Exponent, double> values)
    : num_vars_(num_vars), values_(std::move(values)) {
  for (const auto& [alpha, v] : values_) {
    if (alpha.num_vars() != num_vars_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "moment " + alpha.to_string() + " has wrong variable count");
    }
    max_degree_ = std::max(max_degree_, alpha.degree());
  }
  auto it = values_.find(Exponent(num_vars_));
  if (it == values_.end()) {
    throw Error(ErrorCode::MissingMoment, "moment sequence lacks y_0");
  }
  if (std::abs(it->second - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidArgument,
                "moment sequence must have y_0 = 1, got " +
                    std::to_string(it->second));
  }
}

MomentSequence MomentSequence::from_atoms(
    std::span<const std::vector<double>> atoms, std::span<const double> weights,
    int max_degree) {
  if (atoms.empty() || atoms.size() != weights.size()) {
    throw Error(ErrorCode::DimensionMismatch, "atoms and weights disagree");
  }
  const std::size_t p = atoms.front().size();
  std::map<Exponent, double> values;
  for (const auto& alpha : monomials_up_to(p, max_degree)) {
    double v = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      v += weights[k] * alpha.evaluate(atoms[k]);
    }
    values.emplace(alpha, v);
  }
  return MomentSequence(p, std::move(values));
}

double MomentSequence::at(const Exponent& alpha) const {
  auto it = values_.find(alpha);
  if (it == values_.end()) {
    throw Error(ErrorCode::MissingMoment,
                "moment y" + alpha.to_string() + " is not available");
  }
  return it->second;
}

double MomentSequence::apply(const RieszMap& functional) const {
  double sum = 0.0;
  for (const auto& [alpha, c] : functional) sum += c * at(alpha);
  return sum;
}

// ---------------------------------------------------------------------------

MomentIndex::MomentIndex(std::vector<Exponent> rows, std::vector<Exponent> cols)
    : rows_(std::move(rows)), cols_(std::move(cols)) {
  cells_.reserve(rows_.size() * cols_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      cells_.push_back(rows_[i] + cols_[j]);
      groups_[cells_.back()].emplace_back(i, j);
    }
  }
}

MomentIndex build_moment_index(std::size_t num_vars, int degree) {
  if (degree < 0) {
    throw Error(ErrorCode::InvalidArgument, "moment matrix degree must be >= 0");
  }
  const auto basis = monomials_up_to(num_vars, degree).monomials();
  return MomentIndex(basis, basis);
}

Eigen::MatrixXd assemble(const MomentIndex& index, const MomentSequence& y) {
  Eigen::MatrixXd a(index.num_rows(), index.num_cols());
  for (const auto& [alpha, cells] : index.groups()) {
    const double v = y.at(alpha);
    for (auto [i, j] : cells) a(i, j) = v;
  }
  return a;
}

// ---------------------------------------------------------------------------

LocalizingIndex::LocalizingIndex(const Polynomial& g, MonomialBasis basis)
    : g_(g), basis_(std::move(basis)) {
  if (g_.num_vars() != basis_.num_vars()) {
    throw Error(ErrorCode::DimensionMismatch,
                "localizing polynomial and basis disagree on P");
  }
  if (g_.is_zero()) {
    throw Error(ErrorCode::InvalidArgument, "localizing polynomial is zero");
  }
  moment_degree_ = g_.degree() + 2 * basis_.max_degree();
  const std::size_t s = basis_.size();
  cells_.resize(s * s);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i; j < s; ++j) {
      auto shifted = Polynomial::monomial(basis_[i] + basis_[j]) * g_;
      cells_[i * s + j] = riesz_coefficients(shifted);
      cells_[j * s + i] = cells_[i * s + j];
    }
  }
}

LocalizingIndex localizing_index(const Polynomial& g, int basis_degree,
                                 int max_moment_degree) {
  if (g.degree() + 2 * basis_degree > max_moment_degree) {
    throw Error(ErrorCode::DegreeOverflow,
                "localizing matrix needs moments of degree " +
                    std::to_string(g.degree() + 2 * basis_degree) +
                    " but only " + std::to_string(max_moment_degree) +
                    " are available");
  }
  return LocalizingIndex(g, monomials_up_to(g.num_vars(), basis_degree));
}

Eigen::MatrixXd assemble(const LocalizingIndex& index, const MomentSequence& y) {
  const std::size_t s = index.size();
  Eigen::MatrixXd a(s, s);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i; j < s; ++j) {
      a(i, j) = a(j, i) = y.apply(index.cell(i, j));
    }
  }
  return a;
}

// ---------------------------------------------------------------------------

LinearMomentConstraint::LinearMomentConstraint(RieszMap c, double r)
    : coefficients(std::move(c)), rhs(r) {
  std::erase_if(coefficients, [](const auto& kv) { return kv.second == 0.0; });
  if (coefficients.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "moment constraint has no nonzero coefficient");
  }
}

std::vector<LinearMomentConstraint> equality_constraint_family(
    const Polynomial& g, int max_shift_degree) {
  if (g.is_zero()) {
    throw Error(ErrorCode::InvalidArgument,
                "equality constraint polynomial is zero");
  }
  std::vector<LinearMomentConstraint> out;
  for (const auto& beta : monomials_up_to(g.num_vars(), max_shift_degree)) {
    out.emplace_back(riesz_coefficients(Polynomial::monomial(beta) * g), 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

int numeric_rank(const Eigen::Ref<const Eigen::MatrixXd>& a,
                 const RankPolicy& policy) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  if (smax == 0.0) return 0;
  const double tau = std::max(policy.rel_tol * smax, policy.abs_floor);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tau) ++rank;
  }
  return rank;
}

std::optional<int> flat_extension_rank(const MomentSequence& y, int degree,
                                       const RankPolicy& policy) {
  if (degree < 1) {
    throw Error(ErrorCode::InvalidArgument, "flat extension needs r >= 1");
  }
  const Eigen::MatrixXd mr = assemble(build_moment_index(y.num_vars(), degree), y);
  const Eigen::MatrixXd mr1 =
      assemble(build_moment_index(y.num_vars(), degree - 1), y);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mr, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double smax = ev.cwiseAbs().maxCoeff();
  if (ev.minCoeff() < -policy.psd_slack * smax) return std::nullopt;

  const int k = numeric_rank(mr, policy);
  if (k != numeric_rank(mr1, policy)) return std::nullopt;
  return k;
}

}  // namespace polymom
