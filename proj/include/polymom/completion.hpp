///
/// \file completion.hpp
///
/// Moment completion: recover a moment sequence y from linear moment
/// constraints, either by linear algebra when the constraints pin y down, by
/// low-rank corner completion for multiview blocks, or by the trace-minimizing
/// semidefinite relaxation
///
///     minimize   tr(C M_r(y))
///     subject to sum_alpha a_{n,alpha} y_alpha = b_n,  y_0 = 1,
///                M_r(y) >= 0,  L_g(y) >= 0 for declared localizing g.
///
#ifndef POLYMOM_COMPLETION_HPP
#define POLYMOM_COMPLETION_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polymom/moment_matrix.hpp"

namespace polymom {

///
/// Linear equality system over the unknowns y_alpha, |alpha| <= max_degree.
/// The normalization y_0 = 1 is always the first constraint.
///
class MomentConstraintSystem {
 public:
  MomentConstraintSystem(std::size_t num_vars, int max_degree,
                         std::vector<LinearMomentConstraint> constraints);

  std::size_t num_vars() const noexcept { return unknowns_.num_vars(); }
  int max_degree() const noexcept { return unknowns_.max_degree(); }
  const MonomialBasis& unknowns() const noexcept { return unknowns_; }
  const std::vector<LinearMomentConstraint>& constraints() const noexcept {
    return constraints_;
  }

  /// Stacked coefficient matrix (constraints x unknowns) and right-hand side.
  Eigen::MatrixXd matrix() const;
  Eigen::VectorXd rhs() const;

  /// Every unknown as a moment sequence.
  MomentSequence to_sequence(const Eigen::VectorXd& y) const;
  /// ||A y - b||_2 over all constraints, normalization included.
  double residual_norm(const Eigen::VectorXd& y) const;

 private:
  MonomialBasis unknowns_;
  std::vector<LinearMomentConstraint> constraints_;
};

struct SdpConfig {
  /// Scaling matrix C of the objective; empty means identity (nuclear norm).
  Eigen::MatrixXd scaling;
  double rho = 1.0;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  int max_iter = 20000;
  double over_relaxation = 1.6;
  /// Rebalance rho every 50 iterations when the scaled residuals drift
  /// more than 10x apart.
  bool adaptive_rho = true;
  /// At the iteration limit, a primal residual above this fraction of the
  /// iterate norm is reported as suspected infeasibility.
  double infeasible_tol = 1e-4;
  RankPolicy rank;

  void validate() const;
};

enum class CompletionStatus { ExactLinear, SdpConverged, SdpMaxIter };

const char* to_string(CompletionStatus status) noexcept;

struct CompletionResult {
  MomentSequence y;
  CompletionStatus status;
  double residual_norm = 0.0;
  std::optional<int> certificate;

  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  bool infeasible_suspected = false;
};

enum class LinearOutcome { Unique, Underdetermined, Inconsistent };

struct LinearCompletion {
  LinearOutcome outcome;
  int rank = 0;
  int num_unknowns = 0;
  /// Least-squares residual ||A y - b||.
  double residual_norm = 0.0;
  /// Set for Unique, and for Inconsistent with full column rank (the
  /// least-squares solution); never for Underdetermined.
  std::optional<CompletionResult> result;
};

///
/// Solves the stacked system when it has full column rank. Singular values
/// below rank_rel_tol * sigma_max count as zero; a least-squares residual
/// above consistency_tol * max(1, ||b||) marks the system inconsistent.
///
LinearCompletion solve_linear_completion(const MomentConstraintSystem& sys,
                                         double rank_rel_tol = 1e-10,
                                         double consistency_tol = 1e-8);

/// X = C A^{-1} B for square, nonsingular A. Throws SingularBlock otherwise.
Eigen::MatrixXd complete_corner(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                const Eigen::Ref<const Eigen::MatrixXd>& b,
                                const Eigen::Ref<const Eigen::MatrixXd>& c);

///
/// Rank-K corner completion for a rectangular pivot block: A is replaced by
/// its leading K singular triplets U S V^T, which reduces the problem to
/// complete_corner(S, U^T B, C V).
///
Eigen::MatrixXd complete_corner_rank(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                     const Eigen::Ref<const Eigen::MatrixXd>& b,
                                     const Eigen::Ref<const Eigen::MatrixXd>& c,
                                     int rank);

///
/// Observed cross-view moments of a three-view mixture. Views are 0, 1, 2;
/// pair(a, b) = E[x_a x_b^T].
///
struct MultiviewMoments {
  int dim = 0;
  std::array<Eigen::VectorXd, 3> means;
  Eigen::MatrixXd pair01, pair02, pair12;
  /// E[x0_i x1_j x2_k] stored at (i * dim + j) * dim + k.
  std::vector<double> triple;

  Eigen::MatrixXd pair(int a, int b) const;
  double triple_at(int i, int j, int k) const {
    return triple[(static_cast<std::size_t>(i) * dim + j) * dim + k];
  }
  void validate() const;
};

///
/// Parameter moments of a multiview mixture with parameters
/// theta = [xi^(0); xi^(1); xi^(2)] (P = 3D), filled in by corner completion.
///
/// Fill order: same-view second moments Z(2,2), Z(0,0), Z(1,1) pivoting on
/// the cross pairs (0,1), (1,2), (0,2) respectively; then third moments with
/// a repeated view, row pairs (0,1), (0,2), (1,2) against columns of each
/// repeated view, pivoting on the pair between the other member of the row
/// pair and the missing view.
///
struct MultiviewCompletion {
  MomentSequence y;             // degrees 0..3 as needed by `rows` x `cols`
  Eigen::MatrixXd second;       // E[theta theta^T], 3D x 3D
  std::vector<Exponent> rows;   // [xi0; xi1; xi2; xi0 (x) xi1; xi0 (x) xi2; xi1 (x) xi2]
  std::vector<Exponent> cols;   // [xi0; xi1; xi2]
};

MultiviewCompletion complete_multiview(const MultiviewMoments& observed,
                                       int rank);

///
/// Operator-splitting solver for the trace-minimizing relaxation. The
/// affine projection uses a least-squares factorization of the constraint
/// matrix computed once; the cone projection is a symmetric
/// eigendecomposition. sys.max_degree() must be even (= 2r).
///
CompletionResult solve_sdp_nuclear(const MomentConstraintSystem& sys,
                                   const SdpConfig& cfg,
                                   std::span<const LocalizingIndex> extra_psd = {});

}  // namespace polymom

#endif  // POLYMOM_COMPLETION_HPP
