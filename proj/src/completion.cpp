#include "polymom/completion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "polymom/error.hpp"

namespace polymom {

const char* to_string(CompletionStatus status) noexcept {
  switch (status) {
    case CompletionStatus::ExactLinear: return "exact-linear";
    case CompletionStatus::SdpConverged: return "sdp-converged";
    case CompletionStatus::SdpMaxIter: return "sdp-max-iter";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// MomentConstraintSystem

MomentConstraintSystem::MomentConstraintSystem(
    std::size_t num_vars, int max_degree,
    std::vector<LinearMomentConstraint> constraints)
    : unknowns_(num_vars, max_degree) {
  constraints_.reserve(constraints.size() + 1);
  constraints_.emplace_back(RieszMap{{Exponent(num_vars), 1.0}}, 1.0);
  for (auto& c : constraints) {
    for (const auto& [alpha, coef] : c.coefficients) {
      if (!unknowns_.contains(alpha)) {
        throw Error(ErrorCode::DegreeOverflow,
                    "constraint references y" + alpha.to_string() +
                        " outside the unknown set (degree <= " +
                        std::to_string(max_degree) + ")");
      }
    }
    constraints_.push_back(std::move(c));
  }
}

Eigen::MatrixXd MomentConstraintSystem::matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(constraints_.size()),
      static_cast<Eigen::Index>(unknowns_.size()));
  for (std::size_t n = 0; n < constraints_.size(); ++n) {
    for (const auto& [alpha, coef] : constraints_[n].coefficients) {
      a(static_cast<Eigen::Index>(n),
        static_cast<Eigen::Index>(unknowns_.index_of(alpha))) += coef;
    }
  }
  return a;
}

Eigen::VectorXd MomentConstraintSystem::rhs() const {
  Eigen::VectorXd b(constraints_.size());
  for (std::size_t n = 0; n < constraints_.size(); ++n) {
    b(static_cast<Eigen::Index>(n)) = constraints_[n].rhs;
  }
  return b;
}

MomentSequence MomentConstraintSystem::to_sequence(const Eigen::VectorXd& y) const {
  std::map<Exponent, double> values;
  for (std::size_t i = 0; i < unknowns_.size(); ++i) {
    values.emplace(unknowns_[i], y(static_cast<Eigen::Index>(i)));
  }
  return MomentSequence(num_vars(), std::move(values));
}

double MomentConstraintSystem::residual_norm(const Eigen::VectorXd& y) const {
  return (matrix() * y - rhs()).norm();
}

void SdpConfig::validate() const {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be > 0");
  if (!(tol_primal > 0.0) || !(tol_dual > 0.0) || !(infeasible_tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "SDP tolerances must be > 0");
  }
  if (max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be >= 1");
  if (!(over_relaxation > 0.0 && over_relaxation < 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "over-relaxation must lie in (0, 2)");
  }
  if (!(rank.rel_tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "rank_rel_tol must be > 0");
  }
}

// ---------------------------------------------------------------------------
// Linear path

LinearCompletion solve_linear_completion(const MomentConstraintSystem& sys,
                                         double rank_rel_tol,
                                         double consistency_tol) {
  const Eigen::MatrixXd a = sys.matrix();
  const Eigen::VectorXd b = sys.rhs();

  // Column-equilibrate so that high-degree unknowns with large coefficients
  // do not dominate the rank decision.
  Eigen::VectorXd col_scale = a.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < col_scale.size(); ++j) {
    if (col_scale(j) == 0.0) col_scale(j) = 1.0;
  }
  const Eigen::MatrixXd as = a * col_scale.cwiseInverse().asDiagonal();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(as, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rank_rel_tol);

  LinearCompletion out;
  out.rank = static_cast<int>(svd.rank());
  out.num_unknowns = static_cast<int>(a.cols());
  const Eigen::VectorXd y = svd.solve(b).cwiseQuotient(col_scale);
  out.residual_norm = (a * y - b).norm();

  if (out.rank < a.cols()) {
    out.outcome = LinearOutcome::Underdetermined;
    return out;
  }
  out.outcome = out.residual_norm > consistency_tol * std::max(1.0, b.norm())
                    ? LinearOutcome::Inconsistent
                    : LinearOutcome::Unique;
  // y_0 is pinned by the first row; force it exactly for the sequence type.
  Eigen::VectorXd yy = y;
  yy(0) = 1.0;
  out.result = CompletionResult{sys.to_sequence(yy), CompletionStatus::ExactLinear,
                                out.residual_norm, std::nullopt};
  return out;
}

// ---------------------------------------------------------------------------
// Corner completion

Eigen::MatrixXd complete_corner(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                const Eigen::Ref<const Eigen::MatrixXd>& b,
                                const Eigen::Ref<const Eigen::MatrixXd>& c) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || c.cols() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "corner completion needs A (KxK), B (Kxn), C (mxK)");
  }
  if (a.rows() == 0) {
    throw Error(ErrorCode::SingularBlock, "empty pivot block");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0 || s(s.size() - 1) <= 1e-12 * s(0)) {
    throw Error(ErrorCode::SingularBlock,
                "pivot block is rank deficient (sigma_min/sigma_max = " +
                    std::to_string(s(0) == 0.0 ? 0.0 : s(s.size() - 1) / s(0)) +
                    ")");
  }
  return c * a.partialPivLu().solve(b);
}

Eigen::MatrixXd complete_corner_rank(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                     const Eigen::Ref<const Eigen::MatrixXd>& b,
                                     const Eigen::Ref<const Eigen::MatrixXd>& c,
                                     int rank) {
  if (b.rows() != a.rows() || c.cols() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "corner blocks are not conformable");
  }
  if (rank < 1 || rank > std::min(a.rows(), a.cols())) {
    throw Error(ErrorCode::InvalidArgument, "corner rank out of range");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd u = svd.matrixU().leftCols(rank);
  const Eigen::MatrixXd v = svd.matrixV().leftCols(rank);
  const Eigen::MatrixXd s = svd.singularValues().head(rank).asDiagonal();
  return complete_corner(s, u.transpose() * b, c * v);
}

// ---------------------------------------------------------------------------
// Multiview

Eigen::MatrixXd MultiviewMoments::pair(int a, int b) const {
  if (a == b || a < 0 || b < 0 || a > 2 || b > 2) {
    throw Error(ErrorCode::InvalidArgument, "pair() needs two distinct views");
  }
  if (a == 0 && b == 1) return pair01;
  if (a == 0 && b == 2) return pair02;
  if (a == 1 && b == 2) return pair12;
  return pair(b, a).transpose();
}

void MultiviewMoments::validate() const {
  const Eigen::Index d = dim;
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "multiview dimension < 1");
  for (const auto& m : means) {
    if (m.size() != d) throw Error(ErrorCode::DimensionMismatch, "view mean size");
  }
  for (const auto* p : {&pair01, &pair02, &pair12}) {
    if (p->rows() != d || p->cols() != d) {
      throw Error(ErrorCode::DimensionMismatch, "cross-view pair block size");
    }
  }
  if (triple.size() != static_cast<std::size_t>(dim) * dim * dim) {
    throw Error(ErrorCode::DimensionMismatch, "triple moment size");
  }
}

MultiviewCompletion complete_multiview(const MultiviewMoments& obs, int rank) {
  obs.validate();
  const int d = obs.dim;
  const int p = 3 * d;
  if (rank < 1 || rank > d) {
    throw Error(ErrorCode::InvalidArgument,
                "multiview corner completion needs 1 <= K <= D");
  }
  auto var = [d](int view, int i) { return view * d + i; };
  auto mono = [p](std::initializer_list<int> vars) {
    std::vector<int> e(static_cast<std::size_t>(p), 0);
    for (int v : vars) ++e[static_cast<std::size_t>(v)];
    return Exponent(std::move(e));
  };

  Eigen::MatrixXd second(p, p);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a != b) second.block(a * d, b * d, d, d) = obs.pair(a, b);
    }
  }
  struct SameView { int view, left, missing; };
  for (const auto& z : {SameView{2, 0, 1}, SameView{0, 1, 2}, SameView{1, 0, 2}}) {
    Eigen::MatrixXd x = complete_corner_rank(obs.pair(z.left, z.missing),
                                             obs.pair(z.left, z.view),
                                             obs.pair(z.view, z.missing), rank);
    second.block(z.view * d, z.view * d, d, d) = 0.5 * (x + x.transpose());
  }

  // Observed E[xi_a xi_b xi_m] for the three distinct views, as a D^2 x D
  // matrix with rows (i, j) over views (a, b) and columns over view m.
  auto observed_triple = [&](int a, int b, int m) {
    Eigen::MatrixXd t(d * d, d);
    int idx[3];
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) {
          idx[a] = i;
          idx[b] = j;
          idx[m] = k;
          t(i * d + j, k) = obs.triple_at(idx[0], idx[1], idx[2]);
        }
      }
    }
    return t;
  };

  std::vector<Exponent> rows, cols;
  for (int v = 0; v < p; ++v) {
    rows.push_back(mono({v}));
    cols.push_back(mono({v}));
  }

  std::map<Exponent, std::pair<double, int>> acc;
  auto put = [&acc](const Exponent& e, double v) {
    auto& slot = acc[e];
    slot.first += v;
    slot.second += 1;
  };
  put(Exponent(static_cast<std::size_t>(p)), 1.0);
  for (int view = 0; view < 3; ++view) {
    for (int i = 0; i < d; ++i) put(mono({var(view, i)}), obs.means[view](i));
  }
  for (int u = 0; u < p; ++u) {
    for (int v = u; v < p; ++v) put(mono({u, v}), second(u, v));
  }

  const std::array<std::pair<int, int>, 3> row_pairs{{{0, 1}, {0, 2}, {1, 2}}};
  for (auto [a, b] : row_pairs) {
    const int m = 3 - a - b;
    const Eigen::MatrixXd c_block = observed_triple(a, b, m);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) rows.push_back(mono({var(a, i), var(b, j)}));
    }
    for (int col_view = 0; col_view < 3; ++col_view) {
      Eigen::MatrixXd block;
      if (col_view == m) {
        block = c_block;
      } else {
        const int other = col_view == a ? b : a;
        block = complete_corner_rank(obs.pair(other, m), obs.pair(other, col_view),
                                     c_block, rank);
      }
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          for (int k = 0; k < d; ++k) {
            put(mono({var(a, i), var(b, j), var(col_view, k)}), block(i * d + j, k));
          }
        }
      }
    }
  }

  std::map<Exponent, double> values;
  for (const auto& [e, slot] : acc) values.emplace(e, slot.first / slot.second);
  return MultiviewCompletion{MomentSequence(static_cast<std::size_t>(p), std::move(values)),
                             std::move(second), std::move(rows), std::move(cols)};
}

// ---------------------------------------------------------------------------
// Semidefinite relaxation

namespace {

struct PsdBlock {
  Eigen::Index size;
  Eigen::MatrixXd map;  // vec(block) = map * y, column-major vec
};

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

CompletionResult solve_sdp_nuclear(const MomentConstraintSystem& sys,
                                   const SdpConfig& cfg,
                                   std::span<const LocalizingIndex> extra_psd) {
  cfg.validate();
  if (sys.max_degree() % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "SDP relaxation needs an even moment degree 2r");
  }
  const int r = sys.max_degree() / 2;
  const MonomialBasis& unknowns = sys.unknowns();
  const Eigen::Index n = static_cast<Eigen::Index>(unknowns.size());

  // Linear maps y -> vec(block).
  std::vector<PsdBlock> blocks;
  const MomentIndex mindex = build_moment_index(sys.num_vars(), r);
  {
    const Eigen::Index s = static_cast<Eigen::Index>(mindex.num_rows());
    PsdBlock blk{s, Eigen::MatrixXd::Zero(s * s, n)};
    for (const auto& [alpha, cells] : mindex.groups()) {
      const auto col = static_cast<Eigen::Index>(unknowns.index_of(alpha));
      for (auto [i, j] : cells) {
        blk.map(static_cast<Eigen::Index>(j) * s + static_cast<Eigen::Index>(i), col) = 1.0;
      }
    }
    blocks.push_back(std::move(blk));
  }
  for (const auto& loc : extra_psd) {
    if (loc.moment_degree() > sys.max_degree()) {
      throw Error(ErrorCode::DegreeOverflow,
                  "localizing matrix exceeds the relaxation degree");
    }
    const Eigen::Index s = static_cast<Eigen::Index>(loc.size());
    PsdBlock blk{s, Eigen::MatrixXd::Zero(s * s, n)};
    for (Eigen::Index i = 0; i < s; ++i) {
      for (Eigen::Index j = 0; j < s; ++j) {
        for (const auto& [alpha, coef] :
             loc.cell(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
          blk.map(j * s + i, static_cast<Eigen::Index>(unknowns.index_of(alpha))) += coef;
        }
      }
    }
    blocks.push_back(std::move(blk));
  }

  // Objective c^T y = tr(C M_r(y)).
  const Eigen::Index s0 = blocks[0].size;
  Eigen::MatrixXd scaling = cfg.scaling.size() ? cfg.scaling : Eigen::MatrixXd::Identity(s0, s0);
  if (scaling.rows() != s0 || scaling.cols() != s0) {
    throw Error(ErrorCode::DimensionMismatch,
                "scaling matrix must be " + std::to_string(s0) + "x" + std::to_string(s0));
  }
  const Eigen::Map<const Eigen::VectorXd> cvec(scaling.data(), s0 * s0);
  const Eigen::VectorXd c = blocks[0].map.transpose() * cvec;

  // Affine set {y : A y = b} = y_p + range(N).
  const Eigen::MatrixXd a = sys.matrix();
  const Eigen::VectorXd b = sys.rhs();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV | Eigen::ComputeThinU);
  svd.setThreshold(1e-12);
  const Eigen::Index rank = svd.rank();
  const Eigen::VectorXd y_p = svd.solve(b);
  const Eigen::MatrixXd null = svd.matrixV().rightCols(n - rank);

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (const auto& blk : blocks) h.noalias() += blk.map.transpose() * blk.map;
  const Eigen::MatrixXd reduced = null.transpose() * h * null;
  Eigen::LLT<Eigen::MatrixXd> llt(reduced);
  if (null.cols() > 0 && llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SolverFailed, "reduced normal matrix is not positive definite");
  }
  const Eigen::VectorXd h_yp = h * y_p;
  const Eigen::VectorXd null_c = null.transpose() * c;

  double rho = cfg.rho;
  const double relax = cfg.over_relaxation;
  std::vector<Eigen::VectorXd> x(blocks.size()), z(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Eigen::Index s = blocks[k].size;
    Eigen::VectorXd g = blocks[k].map * y_p;
    Eigen::MatrixXd xm = project_psd(Eigen::Map<Eigen::MatrixXd>(g.data(), s, s));
    x[k] = Eigen::Map<Eigen::VectorXd>(xm.data(), s * s);
    z[k] = Eigen::VectorXd::Zero(s * s);
  }

  Eigen::VectorXd y = y_p;
  CompletionResult out{sys.to_sequence(y_p), CompletionStatus::SdpMaxIter, 0.0, std::nullopt};
  double r_prim = 0.0, r_dual = 0.0, eps_prim = 0.0, eps_dual = 0.0;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    if (null.cols() > 0) {
      Eigen::VectorXd rhs = -c / rho - h_yp;
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        rhs.noalias() += blocks[k].map.transpose() * (x[k] - z[k]);
      }
      y = y_p + null * llt.solve(null.transpose() * rhs);
    }

    double prim2 = 0.0, gnorm2 = 0.0, xnorm2 = 0.0;
    Eigen::VectorXd dual_y = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd zt_y = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const Eigen::Index s = blocks[k].size;
      const Eigen::VectorXd g = blocks[k].map * y;
      const Eigen::VectorXd gr = relax * g + (1.0 - relax) * x[k];
      Eigen::VectorXd v = gr + z[k];
      Eigen::MatrixXd xm = project_psd(Eigen::Map<Eigen::MatrixXd>(v.data(), s, s));
      Eigen::VectorXd xn = Eigen::Map<Eigen::VectorXd>(xm.data(), s * s);
      z[k] += gr - xn;
      prim2 += (g - xn).squaredNorm();
      gnorm2 += g.squaredNorm();
      xnorm2 += xn.squaredNorm();
      dual_y.noalias() += blocks[k].map.transpose() * (xn - x[k]);
      zt_y.noalias() += blocks[k].map.transpose() * z[k];
      x[k] = std::move(xn);
    }
    r_prim = std::sqrt(prim2);
    r_dual = rho * (null.transpose() * dual_y).norm();
    eps_prim = cfg.tol_primal * std::max({1.0, std::sqrt(gnorm2), std::sqrt(xnorm2)});
    eps_dual = cfg.tol_dual *
               std::max({1.0, null_c.norm(), rho * (null.transpose() * zt_y).norm()});
    if (r_prim <= eps_prim && r_dual <= eps_dual) {
      ++it;
      out.status = CompletionStatus::SdpConverged;
      break;
    }
    if (cfg.adaptive_rho && (it + 1) % 50 == 0) {
      const double sp = r_prim / eps_prim, sd = r_dual / eps_dual;
      double f = 1.0;
      if (sp > 10.0 * sd) f = 2.0;
      else if (sd > 10.0 * sp) f = 0.5;
      if (f != 1.0) {
        rho *= f;
        for (auto& zk : z) zk /= f;
      }
    }
  }

  y(0) = 1.0;
  out.y = sys.to_sequence(y);
  out.iterations = it;
  out.primal_residual = r_prim;
  out.dual_residual = r_dual;
  out.objective = c.dot(y);
  out.residual_norm = (a * y - b).norm();
  out.infeasible_suspected =
      out.status == CompletionStatus::SdpMaxIter &&
      r_prim > cfg.infeasible_tol * eps_prim / cfg.tol_primal;
  out.certificate = flat_extension_rank(out.y, r, cfg.rank);
  return out;
}

}  // namespace polymom
