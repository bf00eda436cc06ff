///
/// \file moment_matrix.hpp
///
/// Parameter moment sequences y = (y_alpha), the Riesz functional L_y,
/// truncated moment matrices M_r(y), localizing matrices and flat-extension
/// rank certification.
///
#ifndef POLYMOM_MOMENT_MATRIX_HPP
#define POLYMOM_MOMENT_MATRIX_HPP

#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "polymom/polyring.hpp"

namespace polymom {

/// Linear functional on y: sum_alpha coef_alpha * y_alpha.
using RieszMap = std::map<Exponent, double>;

/// L_y as a coefficient map. The constant term multiplies y_0.
RieszMap riesz_coefficients(const Polynomial& f);

///
/// Moment sequence y_alpha = L_y(theta^alpha). The zero exponent is always
/// present and equals one (probability normalization).
///
class MomentSequence {
 public:
  MomentSequence(std::size_t num_vars, std::map<Exponent, double> values);

  /// y_alpha = sum_k w_k (theta_k)^alpha for every |alpha| <= max_degree.
  static MomentSequence from_atoms(std::span<const std::vector<double>> atoms,
                                   std::span<const double> weights,
                                   int max_degree);

  std::size_t num_vars() const noexcept { return num_vars_; }
  int max_degree() const noexcept { return max_degree_; }
  const std::map<Exponent, double>& values() const noexcept { return values_; }

  bool contains(const Exponent& alpha) const { return values_.count(alpha) != 0; }
  /// Throws MissingMoment naming the absent exponent.
  double at(const Exponent& alpha) const;
  /// Applies L_y to a coefficient map.
  double apply(const RieszMap& functional) const;
  double apply(const Polynomial& f) const { return apply(riesz_coefficients(f)); }

 private:
  std::size_t num_vars_;
  int max_degree_ = 0;
  std::map<Exponent, double> values_;
};

///
/// Symbolic layout of a (possibly rectangular) moment matrix: cell (i, j)
/// holds the exponent rows[i] + cols[j].
///
class MomentIndex {
 public:
  MomentIndex(std::vector<Exponent> rows, std::vector<Exponent> cols);

  std::size_t num_rows() const noexcept { return rows_.size(); }
  std::size_t num_cols() const noexcept { return cols_.size(); }
  const std::vector<Exponent>& rows() const noexcept { return rows_; }
  const std::vector<Exponent>& cols() const noexcept { return cols_; }
  const Exponent& cell(std::size_t i, std::size_t j) const {
    return cells_[i * cols_.size() + j];
  }
  bool is_square_symmetric() const noexcept { return rows_ == cols_; }

  /// Cells sharing an exponent, as (row, col) pairs.
  const std::map<Exponent, std::vector<std::pair<std::size_t, std::size_t>>>&
  groups() const noexcept {
    return groups_;
  }

 private:
  std::vector<Exponent> rows_;
  std::vector<Exponent> cols_;
  std::vector<Exponent> cells_;
  std::map<Exponent, std::vector<std::pair<std::size_t, std::size_t>>> groups_;
};

/// Square index of M_r(y) over the full grlex basis v_r.
MomentIndex build_moment_index(std::size_t num_vars, int degree);

/// A[i, j] = y(cell(i, j)); throws MissingMoment if a cell is not covered.
Eigen::MatrixXd assemble(const MomentIndex& index, const MomentSequence& y);

/// Localizing matrix layout: cell (i, j) is L_y(theta^(alpha_i + alpha_j) g).
class LocalizingIndex {
 public:
  LocalizingIndex(const Polynomial& g, MonomialBasis basis);

  const Polynomial& polynomial() const noexcept { return g_; }
  const MonomialBasis& basis() const noexcept { return basis_; }
  std::size_t size() const noexcept { return basis_.size(); }
  const RieszMap& cell(std::size_t i, std::size_t j) const {
    return cells_[i * basis_.size() + j];
  }
  /// Highest moment degree referenced by any cell.
  int moment_degree() const noexcept { return moment_degree_; }

 private:
  Polynomial g_;
  MonomialBasis basis_;
  std::vector<RieszMap> cells_;
  int moment_degree_;
};

/// Localizing index over v_basis_degree; throws DegreeOverflow when
/// deg(g) + 2 * basis_degree exceeds max_moment_degree.
LocalizingIndex localizing_index(const Polynomial& g, int basis_degree,
                                 int max_moment_degree);

Eigen::MatrixXd assemble(const LocalizingIndex& index, const MomentSequence& y);

/// sum_alpha coefficients_alpha * y_alpha = rhs.
struct LinearMomentConstraint {
  RieszMap coefficients;
  double rhs = 0.0;

  /// Throws InvalidArgument when every coefficient is zero.
  LinearMomentConstraint(RieszMap coefficients, double rhs);
};

/// L_y(theta^beta g) = 0 for every |beta| <= max_shift_degree.
std::vector<LinearMomentConstraint> equality_constraint_family(
    const Polynomial& g, int max_shift_degree);

struct RankPolicy {
  double rel_tol = 1e-6;   // singular values > rel_tol * sigma_max count
  double abs_floor = 0.0;  // and must also exceed this
  double psd_slack = 1e-8; // min eigenvalue >= -psd_slack * sigma_max
};

int numeric_rank(const Eigen::Ref<const Eigen::MatrixXd>& a,
                 const RankPolicy& policy = {});

/// K when M_r(y) is PSD (to slack) and rank M_(r-1) = rank M_r = K.
std::optional<int> flat_extension_rank(const MomentSequence& y, int degree,
                                       const RankPolicy& policy = {});

}  // namespace polymom

#endif  // POLYMOM_MOMENT_MATRIX_HPP
