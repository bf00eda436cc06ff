///
/// \file extraction.hpp
///
/// Recovering atoms from the column space of a completed moment matrix:
/// shift-structure eigenproblems with random projections, multiplication
/// matrices for the monomial problem, and mixing-weight recovery.
///
#ifndef POLYMOM_EXTRACTION_HPP
#define POLYMOM_EXTRACTION_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "polymom/moment_matrix.hpp"

namespace polymom {

/// Top-K left singular vectors of a (possibly rectangular) moment matrix
/// whose rows are labeled by `rows`.
struct ColumnBasis {
  Eigen::MatrixXd u;
  std::vector<Exponent> rows;
  int k = 0;
};

/// Throws RankDeficient when numeric_rank(m) < k.
ColumnBasis column_space_basis(const Eigen::Ref<const Eigen::MatrixXd>& m,
                               std::vector<Exponent> rows, int k,
                               const RankPolicy& policy = {});

///
/// Row selection for the shift eigenproblem. `rows` is the primary set
/// beta_1..beta_K; the random combination runs over `eigen_vars`, the
/// variables whose shifts exist for every primary row. Each variable p reads
/// its coordinate from its own rows per_var_rows[p] and their shifts
/// per_var_shift_rows[p]; for eigen variables these are the primary rows.
/// All indices refer to ColumnBasis::rows.
///
struct RowBasisSelection {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> eigen_vars;
  std::vector<std::vector<std::size_t>> per_var_rows;
  std::vector<std::vector<std::size_t>> per_var_shift_rows;
  double condition = 0.0;
  bool pivoted = false;
};

/// Largest condition number accepted for a K x K row block.
inline constexpr double kMaxRowCondition = 1e8;

///
/// Tries the first K rows whose shifts by every variable are present; falls
/// back to column-pivoted selection, then to per-variable row sets when no
/// single set is admissible for all variables. Throws ExtractionFailed when
/// no well-conditioned selection exists.
///
RowBasisSelection select_row_basis(const ColumnBasis& basis);

struct ExtractionDiagnostics {
  int attempts = 0;
  double max_imag_ratio = 0.0;     // max |Im lambda| / spectral radius
  double eigen_residual = 0.0;     // ||A Q - Q D||_F / ||A||_F
  double min_eigen_gap = 0.0;      // relative to the spectral radius
  double row_condition = 0.0;
};

struct ExtractedAtoms {
  Eigen::MatrixXd thetas;  // K x P, one atom per row
  ExtractionDiagnostics diagnostics;
};

inline constexpr double kImagTolerance = 1e-6;
inline constexpr int kMaxExtractionRetries = 8;
/// Random projections drawn per ratio; the best-conditioned one is used.
inline constexpr int kRatioDraws = 10;

///
/// Solves U[beta]^{-1} (sum_p eta_p U[beta + gamma_p]) Q = Q D for one
/// Gaussian combination eta and reads every coordinate from the ratio
/// rho^T U[beta_p + gamma_p] q_k / rho^T U[beta_p] q_k.
///
ExtractedAtoms extract_parameters(const ColumnBasis& basis,
                                  const RowBasisSelection& sel,
                                  std::uint64_t seed);

///
/// Cross-check route: eigenvectors R of the same random combination, then
/// diag(R^{-1} A_p R) per variable. Requires every variable to be an eigen
/// variable of the selection.
///
Eigen::MatrixXd extract_by_inversion(const ColumnBasis& basis,
                                     const RowBasisSelection& sel,
                                     std::uint64_t seed);

/// C_j = Phi_j Theta^{-1}; throws SingularBlock when Theta is
/// ill-conditioned beyond kMaxRowCondition.
Eigen::MatrixXd multiplication_matrix(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                                      const Eigen::Ref<const Eigen::MatrixXd>& phi);

///
/// Atoms from multiplication matrices: diagonalizes a random combination of
/// the C_j and reads each coordinate from diag(R^{-1} C_j R).
///
ExtractedAtoms atoms_from_multiplication(std::span<const Eigen::MatrixXd> mult,
                                         std::uint64_t seed);

struct WeightFit {
  Eigen::VectorXd weights;
  double residual = 0.0;
};

/// Least squares for sum_k pi_k theta_k^alpha = value over the observed
/// pairs. Throws RankDeficient when the design has rank < K.
WeightFit recover_weights(const Eigen::Ref<const Eigen::MatrixXd>& thetas,
                          std::span<const std::pair<Exponent, double>> observed);

/// Extracted atoms with weights and the certificate they came with.
struct ComponentEstimate {
  Eigen::MatrixXd thetas;  // K x P
  Eigen::VectorXd weights;
  std::optional<int> certificate;
  ExtractionDiagnostics diagnostics;
  double weight_residual = 0.0;
};

}  // namespace polymom

#endif  // POLYMOM_EXTRACTION_HPP
