#include "polymom/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "polymom/error.hpp"

namespace polymom {

const char* to_string(SolverPath path) noexcept {
  switch (path) {
    case SolverPath::Auto: return "auto";
    case SolverPath::Linear: return "linear";
    case SolverPath::Sdp: return "sdp";
    case SolverPath::MultiviewCorner: return "multiview-corner";
    case SolverPath::MultiplicationMatrix: return "multiplication-matrix";
  }
  return "unknown";
}

SolverPath parse_solver_path(std::string_view name) {
  for (auto p : {SolverPath::Auto, SolverPath::Linear, SolverPath::Sdp,
                 SolverPath::MultiviewCorner, SolverPath::MultiplicationMatrix}) {
    if (name == to_string(p)) return p;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown solver '" + std::string(name) +
                  "' (expected auto, linear, sdp, multiview-corner or multiplication-matrix)");
}

void FitConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  if (degree < 0) throw Error(ErrorCode::InvalidArgument, "degree must be >= 0");
  sdp.validate();
  for (const auto& g : equalities) {
    if (g.is_zero()) throw Error(ErrorCode::InvalidArgument, "equality constraint is zero");
  }
  for (const auto& g : inequalities) {
    if (g.is_zero()) throw Error(ErrorCode::InvalidArgument, "inequality constraint is zero");
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<Exponent> basis_rows(std::size_t p, int degree) {
  return monomials_up_to(p, degree).monomials();
}

// Flat-type certificate for a rectangular (rows x cols) layout: the square
// cols x cols block is PSD and has the same rank as the full rectangle. For
// a square layout this is the usual M_{r-1} / M_r comparison.
std::optional<int> layout_certificate(const MomentSequence& y, const std::vector<Exponent>& rows,
                                      const std::vector<Exponent>& cols,
                                      const RankPolicy& policy) {
  if (rows == cols) {
    const int r = rows.back().degree();
    if (r < 1) return std::nullopt;
    return flat_extension_rank(y, r, policy);
  }
  const Eigen::MatrixXd sq = assemble(MomentIndex(cols, cols), y);
  const Eigen::MatrixXd rect = assemble(MomentIndex(rows, cols), y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sq + sq.transpose()),
                                                     Eigen::EigenvaluesOnly);
  const double smax = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (eig.eigenvalues().minCoeff() < -policy.psd_slack * smax) return std::nullopt;
  const int k = numeric_rank(rect, policy);
  if (k != numeric_rank(sq, policy)) return std::nullopt;
  return k;
}

ExtractedAtoms extract_multiplication(const MomentSequence& y, const std::vector<Exponent>& rows,
                                      const std::vector<Exponent>& cols, int k,
                                      std::uint64_t seed) {
  const std::size_t p = cols.front().num_vars();
  std::vector<Exponent> b;
  for (const auto& c : cols) {
    bool ok = true;
    for (std::size_t v = 0; v < p && ok; ++v) {
      ok = std::find(rows.begin(), rows.end(), c + Exponent::unit(p, v)) != rows.end();
    }
    if (ok) b.push_back(c);
    if (static_cast<int>(b.size()) == k) break;
  }
  if (static_cast<int>(b.size()) < k) {
    throw Error(ErrorCode::ExtractionFailed,
                "not enough monomials with shifted rows for a multiplication basis");
  }
  const Eigen::MatrixXd theta = assemble(MomentIndex(b, b), y);
  std::vector<Eigen::MatrixXd> mult;
  for (std::size_t v = 0; v < p; ++v) {
    std::vector<Exponent> shifted;
    for (const auto& e : b) shifted.push_back(e + Exponent::unit(p, v));
    mult.push_back(multiplication_matrix(theta, assemble(MomentIndex(shifted, b), y)));
  }
  return atoms_from_multiplication(mult, seed);
}

// K = 1: solve the lowest-degree square subsystem of moment conditions by
// Newton from `theta`. Conditions are taken in order of polynomial degree and
// kept when they raise the Jacobian rank at a generic point, so Gaussians get
// the sample mean and variance.
std::optional<Eigen::VectorXd> single_component_moments(const std::vector<MomentCondition>& conds,
                                                        std::size_t p, Eigen::VectorXd theta) {
  auto gradient = [p](const Polynomial& f, const Eigen::VectorXd& at) {
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(p));
    for (const auto& [alpha, coef] : f.terms()) {
      for (std::size_t i = 0; i < p; ++i) {
        if (alpha[i] == 0) continue;
        double v = coef * alpha[i];
        for (std::size_t j = 0; j < p; ++j) v *= std::pow(at(static_cast<Eigen::Index>(j)), alpha[j] - (i == j ? 1 : 0));
        g(static_cast<Eigen::Index>(i)) += v;
      }
    }
    return g;
  };
  std::vector<std::size_t> order(conds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return conds[a].f.degree() < conds[b].f.degree();
  });
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Eigen::VectorXd generic(static_cast<Eigen::Index>(p));
  for (auto& v : generic) v = u(rng);
  std::vector<std::size_t> picked;
  Eigen::MatrixXd jac(0, static_cast<Eigen::Index>(p));
  for (std::size_t n : order) {
    if (conds[n].f.is_zero()) continue;
    Eigen::MatrixXd trial(jac.rows() + 1, jac.cols());
    trial << jac, gradient(conds[n].f, generic);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-9);
    if (qr.rank() > jac.rows()) {
      jac = std::move(trial);
      picked.push_back(n);
      if (picked.size() == p) break;
    }
  }
  if (picked.size() < p) return std::nullopt;

  auto residual = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(p));
    const std::vector<double> pt(at.data(), at.data() + at.size());
    for (std::size_t i = 0; i < p; ++i) {
      r(static_cast<Eigen::Index>(i)) = conds[picked[i]].f.evaluate(pt) - conds[picked[i]].rhs;
    }
    return r;
  };
  double scale = 1.0;
  for (std::size_t n : picked) scale = std::max(scale, std::abs(conds[n].rhs));
  Eigen::VectorXd r = residual(theta);
  for (int it = 0; it < 100; ++it) {
    if (r.norm() <= 1e-13 * scale) return theta;
    Eigen::MatrixXd j(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i) j.row(static_cast<Eigen::Index>(i)) = gradient(conds[picked[i]].f, theta);
    const Eigen::VectorXd step = j.colPivHouseholderQr().solve(-r);
    double t = 1.0;
    Eigen::VectorXd next = theta + step, rn = residual(next);
    while (rn.norm() >= r.norm() && t > 1e-6) {
      t *= 0.5;
      next = theta + t * step;
      rn = residual(next);
    }
    if (rn.norm() >= r.norm()) break;
    theta = std::move(next);
    r = std::move(rn);
  }
  if (r.norm() <= 1e-9 * scale) return theta;
  return std::nullopt;
}

}  // namespace

std::vector<double> resynthesize(const ModelAdapter& adapter, const MomentEstimates& est,
                                 const Eigen::Ref<const Eigen::MatrixXd>& thetas,
                                 const Eigen::Ref<const Eigen::VectorXd>& weights) {
  std::vector<double> out(adapter.num_observations(), 0.0);
  std::vector<double> point(static_cast<std::size_t>(thetas.cols()));
  for (std::size_t n = 0; n < out.size(); ++n) {
    const Polynomial f = adapter.moment_polynomial(n, est);
    for (Eigen::Index k = 0; k < thetas.rows(); ++k) {
      for (Eigen::Index v = 0; v < thetas.cols(); ++v) point[static_cast<std::size_t>(v)] = thetas(k, v);
      out[n] += weights(k) * f.evaluate(point);
    }
  }
  return out;
}

FitReport fit_moments(const ModelAdapter& adapter, const MomentEstimates& est,
                      const FitConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const auto sep = separability_check(adapter);
  if (!sep.pass) {
    throw Error(ErrorCode::InvalidArgument, "model is not separable: " + sep.witness);
  }
  const std::size_t p = adapter.num_params();
  for (const auto& g : cfg.equalities) {
    if (g.num_vars() != p) throw Error(ErrorCode::DimensionMismatch, "equality constraint has wrong P");
  }
  for (const auto& g : cfg.inequalities) {
    if (g.num_vars() != p) throw Error(ErrorCode::DimensionMismatch, "inequality constraint has wrong P");
  }

  FitReport rep;
  rep.model = adapter.name();
  rep.param_names = adapter.param_names();
  rep.config = cfg;
  rep.samples = est.samples;
  const auto conds = adapter.moment_conditions(est);

  const bool constrained =
      !cfg.equalities.empty() || !cfg.inequalities.empty() || !cfg.moment_constraints.empty();
  if (cfg.normalize && !constrained) rep.normalization = adapter.normalization(est);
  const MomentEstimates work =
      rep.normalization ? adapter.normalize(est, *rep.normalization) : est;
  const auto work_conds = rep.normalization ? adapter.moment_conditions(work) : conds;

  std::vector<Exponent> rows, cols;
  std::optional<MomentSequence> y;
  SolverPath path = cfg.solver;

  if (adapter.is_multiview()) {
    if (path != SolverPath::Auto && path != SolverPath::MultiviewCorner) {
      throw Error(ErrorCode::InvalidArgument,
                  "multiview models are completed by corner completion only");
    }
    if (!cfg.equalities.empty() || !cfg.inequalities.empty() || !cfg.moment_constraints.empty()) {
      throw Error(ErrorCode::InvalidArgument, "constraints are not supported for multiview completion");
    }
    auto comp = complete_multiview(multiview_blocks(adapter, work), cfg.k);
    y = std::move(comp.y);
    rows = std::move(comp.rows);
    cols = std::move(comp.cols);
    path = SolverPath::MultiviewCorner;
    rep.status = CompletionStatus::ExactLinear;
  } else {
    if (path == SolverPath::MultiviewCorner) {
      throw Error(ErrorCode::InvalidArgument, "multiview-corner needs the multiview model");
    }
    std::vector<LinearMomentConstraint> base;
    int df = 1;
    for (const auto& c : work_conds) {
      if (c.f.is_zero()) {
        if (std::abs(c.rhs) > 1e-6) rep.warnings.push_back("observation " + c.label + " has a zero moment polynomial but nonzero mean");
        continue;
      }
      df = std::max(df, c.f.degree());
      base.emplace_back(riesz_coefficients(c.f), c.rhs);
    }
    for (const auto& c : cfg.moment_constraints) {
      for (const auto& [alpha, coef] : c.coefficients) df = std::max(df, alpha.degree());
    }
    auto with_families = [&](int degree) {
      auto all = base;
      for (const auto& g : cfg.equalities) {
        const int shift = cfg.max_shift_degree >= 0 ? cfg.max_shift_degree : degree - g.degree();
        if (shift < 0 || shift + g.degree() > degree) {
          throw Error(ErrorCode::DegreeOverflow, "equality constraint exceeds the moment degree");
        }
        auto fam = equality_constraint_family(g, shift);
        all.insert(all.end(), fam.begin(), fam.end());
      }
      all.insert(all.end(), cfg.moment_constraints.begin(), cfg.moment_constraints.end());
      return all;
    };

    bool done = false;
    if (path != SolverPath::Sdp && cfg.inequalities.empty()) {
      const MomentConstraintSystem sys(p, df, with_families(df));
      auto lin = solve_linear_completion(sys);
      if (lin.outcome != LinearOutcome::Underdetermined) {
        if (lin.outcome == LinearOutcome::Inconsistent) {
          rep.warnings.push_back("linear system is inconsistent (residual " +
                                 std::to_string(lin.residual_norm) +
                                 "); using the least-squares solution");
        }
        y = lin.result->y;
        rep.status = CompletionStatus::ExactLinear;
        rep.constraint_residual = lin.residual_norm;
        rows = basis_rows(p, (df + 1) / 2);
        cols = basis_rows(p, df / 2);
        if (path == SolverPath::Auto) path = SolverPath::Linear;
        done = true;
      } else if (path == SolverPath::Linear) {
        throw Error(ErrorCode::Underdetermined,
                    "moment constraints do not determine y (rank " + std::to_string(lin.rank) +
                        " of " + std::to_string(lin.num_unknowns) + " unknowns)");
      }
    } else if (path == SolverPath::Linear) {
      throw Error(ErrorCode::InvalidArgument, "inequality constraints need the sdp path");
    }

    if (!done) {
      const int r = cfg.degree > 0 ? cfg.degree : (df + 1) / 2;
      if (2 * r < df) {
        throw Error(ErrorCode::DegreeOverflow,
                    "degree r = " + std::to_string(r) + " cannot hold moment polynomials of degree " +
                        std::to_string(df));
      }
      const MomentConstraintSystem sys(p, 2 * r, with_families(2 * r));
      std::vector<LocalizingIndex> locs;
      for (const auto& g : cfg.inequalities) {
        const int bd = (2 * r - g.degree()) / 2;
        if (bd < 0) throw Error(ErrorCode::DegreeOverflow, "inequality constraint exceeds 2r");
        locs.push_back(localizing_index(g, bd, 2 * r));
      }
      auto res = solve_sdp_nuclear(sys, cfg.sdp, locs);
      rep.status = res.status;
      rep.constraint_residual = res.residual_norm;
      rep.sdp_iterations = res.iterations;
      rep.primal_residual = res.primal_residual;
      rep.dual_residual = res.dual_residual;
      rep.objective = res.objective;
      rep.infeasible_suspected = res.infeasible_suspected;
      if (res.infeasible_suspected) {
        throw Error(ErrorCode::SolverFailed,
                    "relaxation did not converge and the primal residual stalled at " +
                        std::to_string(res.primal_residual) + " (infeasible constraints?)");
      }
      if (res.status == CompletionStatus::SdpMaxIter) {
        rep.warnings.push_back("relaxation stopped at the iteration limit");
      }
      y = std::move(res.y);
      rows = basis_rows(p, r);
      cols = rows;
      if (path == SolverPath::Auto) path = SolverPath::Sdp;
    }
  }
  rep.path = path;

  rep.certificate = layout_certificate(*y, rows, cols, cfg.sdp.rank);
  if (rep.certificate && *rep.certificate != cfg.k) {
    rep.warnings.push_back("certified rank " + std::to_string(*rep.certificate) +
                           " differs from K = " + std::to_string(cfg.k));
  }

  ExtractedAtoms atoms;
  if (path == SolverPath::MultiplicationMatrix) {
    atoms = extract_multiplication(*y, rows, cols, cfg.k, cfg.seed);
  } else {
    const Eigen::MatrixXd m = assemble(MomentIndex(rows, cols), *y);
    const ColumnBasis basis = column_space_basis(m, rows, cfg.k, cfg.sdp.rank);
    atoms = extract_parameters(basis, select_row_basis(basis), cfg.seed);
  }

  for (std::size_t v : adapter.variance_params()) {
    for (Eigen::Index k = 0; k < atoms.thetas.rows(); ++k) {
      double& c = atoms.thetas(k, static_cast<Eigen::Index>(v));
      if (c < -kVarianceClip) {
        throw Error(ErrorCode::ExtractionFailed,
                    "extracted " + rep.param_names[v] + " = " + std::to_string(c) +
                        " is negative beyond the clipping tolerance");
      }
      if (c < 0.0) {
        rep.warnings.push_back("clipped " + rep.param_names[v] + " = " + std::to_string(c) + " to 0");
        c = 0.0;
      }
    }
  }

  const int weight_degree = std::max(1, cols.back().degree());
  std::vector<std::pair<Exponent, double>> observed;
  for (const auto& [alpha, v] : y->values()) {
    if (alpha.degree() <= weight_degree) observed.emplace_back(alpha, v);
  }
  auto wfit = recover_weights(atoms.thetas, observed);
  if (rep.normalization) adapter.denormalize(atoms.thetas, *rep.normalization);
  if ((wfit.weights.array() <= 0.0).any()) {
    rep.warnings.push_back("recovered weights include non-positive values");
  }
  const double wsum = wfit.weights.sum();
  if (std::abs(wsum) > 1e-12) wfit.weights /= wsum;

  rep.estimate.thetas = std::move(atoms.thetas);
  rep.estimate.weights = std::move(wfit.weights);
  rep.estimate.certificate = rep.certificate;
  rep.estimate.diagnostics = atoms.diagnostics;
  rep.estimate.weight_residual = wfit.residual;

  if (cfg.k == 1 && !constrained) {
    auto mom = single_component_moments(conds, p, rep.estimate.thetas.row(0).transpose());
    if (mom) {
      rep.estimate.thetas.row(0) = mom->transpose();
      rep.estimate.weights.setOnes();
    } else {
      rep.warnings.push_back("single-component moment equations did not converge; keeping the relaxation estimate");
    }
  }

  const auto fitted = resynthesize(adapter, est, rep.estimate.thetas, rep.estimate.weights);
  for (std::size_t n = 0; n < conds.size(); ++n) {
    rep.residuals.push_back({conds[n].label, conds[n].rhs, fitted[n]});
    rep.max_moment_residual = std::max(rep.max_moment_residual, std::abs(fitted[n] - conds[n].rhs));
  }
  rep.moments = std::move(y);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

FitReport fit(const ModelAdapter& adapter, const Eigen::MatrixXd& data, const FitConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  FitReport rep = fit_moments(adapter, adapter.estimate(data), cfg);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// EM baseline

namespace {

struct EmState {
  Eigen::MatrixXd mean;  // K x D
  Eigen::MatrixXd var;   // K x D
  Eigen::VectorXd weight;
};

// log-likelihood under `s`, filling responsibilities.
double e_step(const Eigen::MatrixXd& x, const EmState& s, Eigen::MatrixXd& resp) {
  const Eigen::Index t_n = x.rows(), d = x.cols(), k = s.mean.rows();
  constexpr double log2pi = 1.8378770664093453;
  Eigen::VectorXd base(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    base(j) = std::log(s.weight(j)) - 0.5 * (d * log2pi + s.var.row(j).array().log().sum());
  }
  double ll = 0.0;
  resp.resize(t_n, k);
  for (Eigen::Index t = 0; t < t_n; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) {
      double q = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double z = x(t, i) - s.mean(j, i);
        q += z * z / s.var(j, i);
      }
      resp(t, j) = base(j) - 0.5 * q;
      mx = std::max(mx, resp(t, j));
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      resp(t, j) = std::exp(resp(t, j) - mx);
      sum += resp(t, j);
    }
    resp.row(t) /= sum;
    ll += mx + std::log(sum);
  }
  return ll;
}

void m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, bool spherical,
            double floor, EmState& s) {
  const Eigen::Index d = x.cols(), k = resp.cols();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double nk = std::max(resp.col(j).sum(), 1e-12);
    s.weight(j) = nk / static_cast<double>(x.rows());
    s.mean.row(j) = (resp.col(j).transpose() * x) / nk;
    Eigen::RowVectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      v(i) = (resp.col(j).array() * (x.col(i).array() - s.mean(j, i)).square()).sum() / nk;
    }
    if (spherical) v.setConstant(v.mean());
    s.var.row(j) = v.cwiseMax(floor);
  }
}

Eigen::MatrixXd kmeans_pp(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index t_n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, t_n - 1);
  centers.row(0) = x.row(first(rng));
  Eigen::VectorXd dist = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    std::discrete_distribution<Eigen::Index> pick(dist.data(), dist.data() + dist.size());
    const Eigen::Index idx = dist.sum() > 0 ? pick(rng) : first(rng);
    centers.row(j) = x.row(idx);
    dist = dist.cwiseMin((x.rowwise() - centers.row(j)).rowwise().squaredNorm());
  }
  // Lloyd refinement
  std::vector<Eigen::Index> label(static_cast<std::size_t>(t_n));
  for (int it = 0; it < 20; ++it) {
    for (Eigen::Index t = 0; t < t_n; ++t) {
      Eigen::Index best = 0;
      (centers.rowwise() - x.row(t)).rowwise().squaredNorm().minCoeff(&best);
      label[static_cast<std::size_t>(t)] = best;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index t = 0; t < t_n; ++t) {
      sums.row(label[static_cast<std::size_t>(t)]) += x.row(t);
      counts(label[static_cast<std::size_t>(t)]) += 1.0;
    }
    for (int j = 0; j < k; ++j) {
      if (counts(j) > 0) {
        centers.row(j) = sums.row(j) / counts(j);
      } else {
        // empty cluster: reseed at the point farthest from its center
        Eigen::Index far = 0;
        Eigen::VectorXd dd(t_n);
        for (Eigen::Index t = 0; t < t_n; ++t) {
          dd(t) = (x.row(t) - centers.row(label[static_cast<std::size_t>(t)])).squaredNorm();
        }
        dd.maxCoeff(&far);
        centers.row(j) = x.row(far);
      }
    }
  }
  return centers;
}

}  // namespace

EmResult em_gaussian_baseline(const Eigen::MatrixXd& data, int k, bool spherical,
                              std::uint64_t seed, const EmConfig& cfg) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  if (data.rows() < k) throw Error(ErrorCode::Input, "fewer samples than components");
  if (cfg.restarts < 1 || cfg.max_iter < 1) {
    throw Error(ErrorCode::InvalidArgument, "EM needs restarts >= 1 and max_iter >= 1");
  }
  const Eigen::Index d = data.cols();
  const Eigen::RowVectorXd mu = data.colwise().mean();
  const double total_var = (data.rowwise() - mu).array().square().mean();
  const double floor = std::max(1e-6 * total_var, 1e-12);

  EmResult best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd resp;
  for (int run = 0; run < cfg.restarts; ++run) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(run)));
    EmState s{kmeans_pp(data, k, rng), Eigen::MatrixXd(k, d), Eigen::VectorXd(k)};
    // hard assignment to start the variances and weights
    resp = Eigen::MatrixXd::Zero(data.rows(), k);
    for (Eigen::Index t = 0; t < data.rows(); ++t) {
      Eigen::Index j = 0;
      (s.mean.rowwise() - data.row(t)).rowwise().squaredNorm().minCoeff(&j);
      resp(t, j) = 1.0;
    }
    m_step(data, resp, spherical, floor, s);
    s.weight = s.weight.cwiseMax(1e-12);
    s.weight /= s.weight.sum();

    std::vector<double> trace;
    double prev = -std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
      const double ll = e_step(data, s, resp);
      trace.push_back(ll);
      if (std::isfinite(prev) && std::abs(ll - prev) <= cfg.tol * std::abs(ll)) break;
      prev = ll;
      m_step(data, resp, spherical, floor, s);
    }
    const double ll = trace.back();
    if (ll > best.log_likelihood) {
      best.log_likelihood = ll;
      best.trace = std::move(trace);
      best.iterations = it;
      best.weights = s.weight;
      best.thetas.resize(k, spherical ? d + 1 : 2 * d);
      best.thetas.leftCols(d) = s.mean;
      if (spherical) {
        best.thetas.col(d) = s.var.col(0);
      } else {
        best.thetas.rightCols(d) = s.var;
      }
    }
  }
  return best;
}

double relative_error(const Eigen::Ref<const Eigen::MatrixXd>& estimate,
                      const Eigen::Ref<const Eigen::MatrixXd>& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "estimate is " + std::to_string(estimate.rows()) + "x" +
                    std::to_string(estimate.cols()) + ", truth is " +
                    std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  }
  const int k = static_cast<int>(truth.rows());
  if (k > 6) throw Error(ErrorCode::InvalidArgument, "relative error supports K <= 6");
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      const double den = truth.row(j).norm();
      const double num = (estimate.row(perm[static_cast<std::size_t>(j)]) - truth.row(j)).norm();
      worst = std::max(worst, den > 0 ? num / den : num);
    }
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Experiments

void ExperimentConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::Schema, "k must be >= 1");
  if (trials < 1) throw Error(ErrorCode::Schema, "trials must be >= 1");
  if (samples.empty()) throw Error(ErrorCode::Schema, "samples must list at least one size");
  for (auto t : samples) {
    if (t < 1) throw Error(ErrorCode::Schema, "sample sizes must be >= 1");
  }
  if (methods.empty()) throw Error(ErrorCode::Schema, "methods must not be empty");
  const bool gaussian = model.name == "gaussian-diag" || model.name == "gaussian-spherical";
  for (const auto& m : methods) {
    if (m != "poly" && m != "em") throw Error(ErrorCode::Schema, "unknown method '" + m + "'");
    if (m == "em" && !gaussian) throw Error(ErrorCode::Schema, "the em baseline needs a Gaussian model");
  }
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto adapter = make_adapter(cfg.model);
  ExperimentReport rep;
  rep.config = cfg;
  for (auto t_n : cfg.samples) {
    for (const auto& m : cfg.methods) rep.rows.push_back({t_n, m, cfg.trials, 0, {}, {}, {}, {}});
  }
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t truth_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
    const MixtureSpec mix = adapter->random_mixture(cfg.k, truth_seed);
    std::size_t row = 0;
    for (auto t_n : cfg.samples) {
      const std::uint64_t data_seed = derive_seed(truth_seed, t_n);
      const Eigen::MatrixXd data = adapter->sample(mix, t_n, data_seed);
      for (const auto& method : cfg.methods) {
        auto& out = rep.rows[row++];
        try {
          Eigen::MatrixXd est;
          if (method == "poly") {
            FitConfig fc = cfg.fit;
            fc.k = cfg.k;
            fc.seed = derive_seed(data_seed, 1);
            est = fit(*adapter, data, fc).estimate.thetas;
          } else {
            est = em_gaussian_baseline(data, cfg.k, cfg.model.name == "gaussian-spherical",
                                       derive_seed(data_seed, 2))
                      .thetas;
          }
          out.errors.push_back(relative_error(est, mix.thetas));
        } catch (const Error& e) {
          out.errors.push_back(std::nullopt);
          ++out.failures;
          out.failure_reasons.push_back("trial " + std::to_string(trial) + ": " + e.what());
        }
      }
    }
  }
  for (auto& r : rep.rows) {
    std::vector<double> ok;
    for (const auto& e : r.errors) {
      if (e) ok.push_back(*e);
    }
    if (ok.empty()) continue;
    r.mean_error = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
    std::sort(ok.begin(), ok.end());
    const std::size_t h = ok.size() / 2;
    r.median_error = ok.size() % 2 ? ok[h] : 0.5 * (ok[h - 1] + ok[h]);
  }
  return rep;
}

std::string format_table(const ExperimentReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "model" << std::setw(4) << "K" << std::setw(4) << "D"
     << std::setw(10) << "T" << std::setw(8) << "method" << std::setw(12) << "mean_err"
     << std::setw(12) << "median_err" << "failures\n";
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << *v;
    return s.str();
  };
  for (const auto& r : report.rows) {
    os << std::left << std::setw(20) << report.config.model.name << std::setw(4)
       << report.config.k << std::setw(4) << report.config.model.dim << std::setw(10)
       << r.samples << std::setw(8) << r.method << std::setw(12) << num(r.mean_error)
       << std::setw(12) << num(r.median_error) << r.failures << "/" << r.trials << "\n";
  }
  return os.str();
}

}  // namespace polymom
