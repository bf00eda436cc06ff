#include "polymom/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "polymom/error.hpp"

namespace polymom {

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& u, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), u.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = u.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return s(0) / s(s.size() - 1);
}

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

// K rows from `candidates`: the leading ones if well conditioned, otherwise
// a column-pivoted QR choice.
std::optional<std::pair<std::vector<std::size_t>, double>> choose_rows(
    const Eigen::MatrixXd& u, const std::vector<std::size_t>& candidates, int k,
    bool* pivoted) {
  if (static_cast<int>(candidates.size()) < k) return std::nullopt;
  std::vector<std::size_t> lead(candidates.begin(), candidates.begin() + k);
  const double c_lead = condition_number(take_rows(u, lead));
  if (c_lead <= kMaxRowCondition) return std::make_pair(lead, c_lead);

  const Eigen::MatrixXd cand_t = take_rows(u, candidates).transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cand_t);
  const auto& perm = qr.colsPermutation().indices();
  std::vector<std::size_t> picked;
  for (int i = 0; i < k; ++i) picked.push_back(candidates[static_cast<std::size_t>(perm(i))]);
  std::sort(picked.begin(), picked.end());
  const double c_piv = condition_number(take_rows(u, picked));
  if (c_piv > kMaxRowCondition) return std::nullopt;
  if (pivoted) *pivoted = true;
  return std::make_pair(picked, c_piv);
}

}  // namespace

ColumnBasis column_space_basis(const Eigen::Ref<const Eigen::MatrixXd>& m,
                               std::vector<Exponent> rows, int k,
                               const RankPolicy& policy) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  if (static_cast<Eigen::Index>(rows.size()) != m.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "row labels do not match the matrix");
  }
  const int rank = numeric_rank(m, policy);
  if (rank < k) {
    throw Error(ErrorCode::RankDeficient,
                "moment matrix has numeric rank " + std::to_string(rank) +
                    " < K = " + std::to_string(k));
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  return ColumnBasis{svd.matrixU().leftCols(k), std::move(rows), k};
}

RowBasisSelection select_row_basis(const ColumnBasis& basis) {
  const auto& rows = basis.rows;
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "empty row basis");
  const std::size_t p = rows.front().num_vars();
  std::map<Exponent, std::size_t> where;
  for (std::size_t i = 0; i < rows.size(); ++i) where.emplace(rows[i], i);

  // shift[i][v] = index of rows[i] + gamma_v, or npos.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::vector<std::size_t>> shift(rows.size(), std::vector<std::size_t>(p, npos));
  std::vector<std::vector<std::size_t>> admissible(p);
  std::vector<std::size_t> full;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool all = true;
    for (std::size_t v = 0; v < p; ++v) {
      auto it = where.find(rows[i] + Exponent::unit(p, v));
      if (it != where.end()) {
        shift[i][v] = it->second;
        admissible[v].push_back(i);
      } else {
        all = false;
      }
    }
    if (all) full.push_back(i);
  }

  RowBasisSelection sel;
  auto primary = choose_rows(basis.u, full, basis.k, &sel.pivoted);
  if (!primary) {
    for (std::size_t v = 0; v < p && !primary; ++v) {
      primary = choose_rows(basis.u, admissible[v], basis.k, &sel.pivoted);
    }
  }
  if (!primary) {
    throw Error(ErrorCode::ExtractionFailed,
                "no well-conditioned set of " + std::to_string(basis.k) +
                    " rows with shifted rows in the basis");
  }
  sel.rows = primary->first;
  sel.condition = primary->second;

  sel.per_var_rows.resize(p);
  sel.per_var_shift_rows.resize(p);
  for (std::size_t v = 0; v < p; ++v) {
    const bool eigen = std::all_of(sel.rows.begin(), sel.rows.end(),
                                   [&](std::size_t i) { return shift[i][v] != npos; });
    if (eigen) {
      sel.eigen_vars.push_back(v);
      sel.per_var_rows[v] = sel.rows;
    } else {
      auto own = choose_rows(basis.u, admissible[v], basis.k, nullptr);
      if (!own) {
        throw Error(ErrorCode::ExtractionFailed,
                    "no admissible rows for variable x" + std::to_string(v + 1));
      }
      sel.per_var_rows[v] = own->first;
      sel.condition = std::max(sel.condition, own->second);
    }
    for (std::size_t i : sel.per_var_rows[v]) sel.per_var_shift_rows[v].push_back(shift[i][v]);
  }
  if (sel.eigen_vars.empty()) {
    throw Error(ErrorCode::ExtractionFailed, "primary rows admit no shift variable");
  }
  return sel;
}

namespace {

struct EigenSplit {
  Eigen::MatrixXd q;      // real eigenvectors, columns
  Eigen::VectorXd lambda; // real eigenvalues
  Eigen::MatrixXd a;      // the combined operator
};

// One random combination; nullopt when eigenvalues are complex beyond
// tolerance or coalesce.
std::optional<EigenSplit> combined_eigensystem(const ColumnBasis& basis,
                                               const RowBasisSelection& sel,
                                               std::mt19937_64& rng,
                                               ExtractionDiagnostics& diag) {
  const Eigen::Index k = basis.k;
  const Eigen::MatrixXd ub = take_rows(basis.u, sel.rows);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(ub);
  const Eigen::VectorXd eta =
      gaussian_vector(rng, static_cast<Eigen::Index>(sel.eigen_vars.size()));
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t e = 0; e < sel.eigen_vars.size(); ++e) {
    const std::size_t v = sel.eigen_vars[e];
    s += eta(static_cast<Eigen::Index>(e)) * take_rows(basis.u, sel.per_var_shift_rows[v]);
  }
  const Eigen::MatrixXd a = lu.solve(s);

  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXcd lam = es.eigenvalues();
  const double radius = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  const double imag = lam.imag().cwiseAbs().maxCoeff() / radius;
  diag.max_imag_ratio = imag;
  if (imag > kImagTolerance) return std::nullopt;

  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) gap = std::min(gap, std::abs(lam(i) - lam(j)));
  }
  diag.min_eigen_gap = k > 1 ? gap / radius : 1.0;
  if (k > 1 && diag.min_eigen_gap < 1e-10) return std::nullopt;

  EigenSplit out{es.eigenvectors().real(), lam.real(), a};
  for (Eigen::Index j = 0; j < k; ++j) {
    const double nrm = out.q.col(j).norm();
    if (nrm == 0.0) return std::nullopt;
    out.q.col(j) /= nrm;
  }
  const double anorm = std::max(a.norm(), 1e-300);
  diag.eigen_residual =
      (a * out.q - out.q * out.lambda.asDiagonal()).norm() / anorm;
  return out;
}

}  // namespace

ExtractedAtoms extract_parameters(const ColumnBasis& basis,
                                  const RowBasisSelection& sel,
                                  std::uint64_t seed) {
  const Eigen::Index k = basis.k;
  const std::size_t p = basis.rows.front().num_vars();
  if (sel.rows.size() != static_cast<std::size_t>(k) || sel.per_var_rows.size() != p) {
    throw Error(ErrorCode::DimensionMismatch, "row selection does not match the basis");
  }
  std::mt19937_64 rng(seed);
  ExtractedAtoms out;
  out.diagnostics.row_condition = sel.condition;

  for (int attempt = 1; attempt <= kMaxExtractionRetries; ++attempt) {
    out.diagnostics.attempts = attempt;
    auto split = combined_eigensystem(basis, sel, rng, out.diagnostics);
    if (!split) continue;

    out.thetas.resize(k, static_cast<Eigen::Index>(p));
    bool ok = true;
    for (std::size_t v = 0; v < p && ok; ++v) {
      const Eigen::MatrixXd base = take_rows(basis.u, sel.per_var_rows[v]) * split->q;
      const Eigen::MatrixXd shifted = take_rows(basis.u, sel.per_var_shift_rows[v]) * split->q;
      for (Eigen::Index j = 0; j < k && ok; ++j) {
        // Several random projections; keep the one whose denominator is
        // largest relative to the norms, since noise enters through it.
        double best = 0.0, value = 0.0;
        const double bn = std::max(base.col(j).norm(), 1e-300);
        for (int draw = 0; draw < kRatioDraws; ++draw) {
          const Eigen::VectorXd rho = gaussian_vector(rng, k);
          const double den = rho.dot(base.col(j));
          const double score = std::abs(den) / (bn * rho.norm());
          if (score > best) {
            best = score;
            value = rho.dot(shifted.col(j)) / den;
          }
        }
        ok = best > 1e-10;
        out.thetas(j, static_cast<Eigen::Index>(v)) = value;
      }
    }
    if (ok) return out;
  }
  throw Error(ErrorCode::ExtractionFailed,
              "shift eigenproblem failed after " + std::to_string(kMaxExtractionRetries) +
                  " random combinations (max |Im|/radius = " +
                  std::to_string(out.diagnostics.max_imag_ratio) +
                  ", min gap = " + std::to_string(out.diagnostics.min_eigen_gap) + ")");
}

Eigen::MatrixXd extract_by_inversion(const ColumnBasis& basis,
                                     const RowBasisSelection& sel,
                                     std::uint64_t seed) {
  const std::size_t p = basis.rows.front().num_vars();
  if (sel.eigen_vars.size() != p) {
    throw Error(ErrorCode::InvalidArgument,
                "inversion route needs shifts for every variable on the primary rows");
  }
  std::mt19937_64 rng(seed);
  ExtractionDiagnostics diag;
  for (int attempt = 0; attempt < kMaxExtractionRetries; ++attempt) {
    auto split = combined_eigensystem(basis, sel, rng, diag);
    if (!split) continue;
    Eigen::PartialPivLU<Eigen::MatrixXd> ub(take_rows(basis.u, sel.rows));
    Eigen::PartialPivLU<Eigen::MatrixXd> r(split->q);
    Eigen::MatrixXd thetas(basis.k, static_cast<Eigen::Index>(p));
    for (std::size_t v = 0; v < p; ++v) {
      const Eigen::MatrixXd a_p = ub.solve(take_rows(basis.u, sel.per_var_shift_rows[v]));
      thetas.col(static_cast<Eigen::Index>(v)) = r.solve(a_p * split->q).diagonal();
    }
    return thetas;
  }
  throw Error(ErrorCode::ExtractionFailed, "inversion route: no usable random combination");
}

Eigen::MatrixXd multiplication_matrix(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                                      const Eigen::Ref<const Eigen::MatrixXd>& phi) {
  if (theta.rows() != theta.cols() || phi.rows() != theta.rows() ||
      phi.cols() != theta.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "multiplication matrix needs square Theta and Phi of equal size");
  }
  const double cond = condition_number(theta);
  if (!(cond <= kMaxRowCondition)) {
    throw Error(ErrorCode::SingularBlock,
                "Theta is singular or ill-conditioned (condition " + std::to_string(cond) + ")");
  }
  // C Theta = Phi  <=>  Theta^T C^T = Phi^T
  return theta.transpose().partialPivLu().solve(phi.transpose()).transpose();
}

ExtractedAtoms atoms_from_multiplication(std::span<const Eigen::MatrixXd> mult,
                                         std::uint64_t seed) {
  if (mult.empty()) throw Error(ErrorCode::InvalidArgument, "no multiplication matrices");
  const Eigen::Index k = mult.front().rows();
  std::mt19937_64 rng(seed);
  ExtractedAtoms out;
  for (int attempt = 1; attempt <= kMaxExtractionRetries; ++attempt) {
    out.diagnostics.attempts = attempt;
    const Eigen::VectorXd eta = gaussian_vector(rng, static_cast<Eigen::Index>(mult.size()));
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t j = 0; j < mult.size(); ++j) c += eta(static_cast<Eigen::Index>(j)) * mult[j];
    Eigen::EigenSolver<Eigen::MatrixXd> es(c);
    if (es.info() != Eigen::Success) continue;
    const Eigen::VectorXcd lam = es.eigenvalues();
    const double radius = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
    out.diagnostics.max_imag_ratio = lam.imag().cwiseAbs().maxCoeff() / radius;
    if (out.diagnostics.max_imag_ratio > kImagTolerance) continue;
    const Eigen::MatrixXd r = es.eigenvectors().real();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(r);
    if (condition_number(r) > kMaxRowCondition) continue;
    out.thetas.resize(k, static_cast<Eigen::Index>(mult.size()));
    for (std::size_t j = 0; j < mult.size(); ++j) {
      out.thetas.col(static_cast<Eigen::Index>(j)) = lu.solve(mult[j] * r).diagonal();
    }
    out.diagnostics.eigen_residual =
        (c * r - r * lam.real().asDiagonal()).norm() / std::max(c.norm(), 1e-300);
    return out;
  }
  throw Error(ErrorCode::ExtractionFailed,
              "multiplication matrices could not be diagonalized over the reals");
}

WeightFit recover_weights(const Eigen::Ref<const Eigen::MatrixXd>& thetas,
                          std::span<const std::pair<Exponent, double>> observed) {
  const Eigen::Index k = thetas.rows();
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "no atoms");
  if (static_cast<Eigen::Index>(observed.size()) < k) {
    throw Error(ErrorCode::RankDeficient, "fewer observed moments than components");
  }
  Eigen::MatrixXd design(static_cast<Eigen::Index>(observed.size()), k);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(observed.size()));
  std::vector<double> point(static_cast<std::size_t>(thetas.cols()));
  for (std::size_t i = 0; i < observed.size(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index v = 0; v < thetas.cols(); ++v) point[static_cast<std::size_t>(v)] = thetas(j, v);
      design(static_cast<Eigen::Index>(i), j) = observed[i].first.evaluate(point);
    }
    rhs(static_cast<Eigen::Index>(i)) = observed[i].second;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  if (svd.rank() < k) {
    throw Error(ErrorCode::RankDeficient,
                "weight design has rank " + std::to_string(svd.rank()) +
                    " < K (near-coincident components?)");
  }
  WeightFit out;
  out.weights = svd.solve(rhs);
  out.residual = (design * out.weights - rhs).norm();
  return out;
}

}  // namespace polymom
