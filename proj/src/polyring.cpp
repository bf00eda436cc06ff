#include "polymom/polyring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "polymom/error.hpp"

namespace polymom {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::MissingMoment: return "missing moment";
    case ErrorCode::DegreeOverflow: return "degree overflow";
    case ErrorCode::SingularBlock: return "singular block";
    case ErrorCode::RankDeficient: return "rank deficient";
    case ErrorCode::Underdetermined: return "underdetermined";
    case ErrorCode::Inconsistent: return "inconsistent";
    case ErrorCode::SolverFailed: return "solver failed";
    case ErrorCode::ExtractionFailed: return "extraction failed";
    case ErrorCode::Input: return "input error";
    case ErrorCode::Schema: return "schema error";
  }
  return "unknown error";
}

// ---------------------------------------------------------------------------
// Exponent

Exponent::Exponent(std::vector<int> powers) : powers_(std::move(powers)) {
  for (int p : powers_) {
    if (p < 0) {
      throw Error(ErrorCode::InvalidArgument, "negative exponent");
    }
    degree_ += p;
  }
}

Exponent Exponent::unit(std::size_t num_vars, std::size_t var) {
  if (var >= num_vars) {
    throw Error(ErrorCode::DimensionMismatch, "unit exponent index out of range");
  }
  std::vector<int> p(num_vars, 0);
  p[var] = 1;
  return Exponent(std::move(p));
}

Exponent Exponent::operator+(const Exponent& other) const {
  if (other.num_vars() != num_vars()) {
    throw Error(ErrorCode::DimensionMismatch,
                "adding exponents with different variable counts");
  }
  Exponent out(*this);
  for (std::size_t i = 0; i < powers_.size(); ++i) {
    out.powers_[i] += other.powers_[i];
  }
  out.degree_ += other.degree_;
  return out;
}

double Exponent::evaluate(std::span<const double> point) const {
  if (point.size() != powers_.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "point has " + std::to_string(point.size()) +
                    " coordinates, monomial has " +
                    std::to_string(powers_.size()) + " variables");
  }
  double v = 1.0;
  for (std::size_t i = 0; i < powers_.size(); ++i) {
    for (int k = 0; k < powers_[i]; ++k) v *= point[i];
  }
  return v;
}

std::strong_ordering operator<=>(const Exponent& a, const Exponent& b) {
  if (auto c = a.degree_ <=> b.degree_; c != 0) return c;
  // Same degree: lexicographically larger vector sorts first.
  return b.powers_ <=> a.powers_;
}

std::string Exponent::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < powers_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(powers_[i]);
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// Polynomial

Polynomial Polynomial::constant(std::size_t num_vars, double value) {
  Polynomial p(num_vars);
  p.add_term(Exponent(num_vars), value);
  return p;
}

Polynomial Polynomial::variable(std::size_t num_vars, std::size_t var) {
  return monomial(Exponent::unit(num_vars, var), 1.0);
}

Polynomial Polynomial::monomial(const Exponent& exponent, double coef) {
  Polynomial p(exponent.num_vars());
  p.add_term(exponent, coef);
  return p;
}

int Polynomial::degree() const noexcept {
  return terms_.empty() ? -1 : terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Exponent& exponent) const {
  auto it = terms_.find(exponent);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::check_vars(std::size_t other) const {
  if (other != num_vars_) {
    throw Error(ErrorCode::DimensionMismatch,
                "polynomials over " + std::to_string(num_vars_) + " and " +
                    std::to_string(other) + " variables");
  }
}

void Polynomial::add_term(const Exponent& exponent, double coef) {
  check_vars(exponent.num_vars());
  if (coef == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(exponent, coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  check_vars(other.num_vars_);
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  check_vars(other.num_vars_);
  for (const auto& [e, c] : other.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double scale) {
  if (scale == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= scale;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_vars(b.num_vars_);
  Polynomial out(a.num_vars_);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) out.add_term(ea + eb, ca * cb);
  }
  return out;
}

double Polynomial::evaluate(std::span<const double> point) const {
  if (point.size() != num_vars_) {
    throw Error(ErrorCode::DimensionMismatch,
                "point has " + std::to_string(point.size()) +
                    " coordinates, polynomial has " +
                    std::to_string(num_vars_) + " variables");
  }
  double sum = 0.0;
  for (const auto& [e, c] : terms_) sum += c * e.evaluate(point);
  return sum;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(12);
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) os << (c < 0 ? " - " : " + ");
    os << (first ? c : std::abs(c));
    first = false;
    for (std::size_t i = 0; i < e.num_vars(); ++i) {
      if (e[i] > 0) os << "*x" << (i + 1) << '^' << e[i];
    }
  }
  return os.str();
}

Polynomial pow(const Polynomial& base, int exponent) {
  if (exponent < 0) {
    throw Error(ErrorCode::InvalidArgument, "negative polynomial power");
  }
  Polynomial out = Polynomial::constant(base.num_vars(), 1.0);
  for (int i = 0; i < exponent; ++i) out = out * base;
  return out;
}

// ---------------------------------------------------------------------------
// MonomialBasis

namespace {

void enumerate_degree(std::size_t var, int remaining, std::vector<int>& cur,
                      std::vector<Exponent>& out) {
  if (var + 1 == cur.size()) {
    cur[var] = remaining;
    out.emplace_back(cur);
    return;
  }
  // Largest power of the leading variable first: descending lex.
  for (int p = remaining; p >= 0; --p) {
    cur[var] = p;
    enumerate_degree(var + 1, remaining - p, cur, out);
  }
  cur[var] = 0;
}

}  // namespace

std::vector<Exponent> monomials_of_degree(std::size_t num_vars, int degree) {
  if (num_vars == 0) {
    throw Error(ErrorCode::InvalidArgument, "monomials need at least one variable");
  }
  if (degree < 0) return {};
  std::vector<Exponent> out;
  std::vector<int> cur(num_vars, 0);
  enumerate_degree(0, degree, cur, out);
  return out;
}

MonomialBasis::MonomialBasis(std::size_t num_vars, int max_degree)
    : num_vars_(num_vars), max_degree_(max_degree) {
  if (num_vars == 0 || max_degree < 0) {
    throw Error(ErrorCode::InvalidArgument,
                "monomial basis needs P >= 1 and r >= 0");
  }
  for (int d = 0; d <= max_degree; ++d) {
    auto level = monomials_of_degree(num_vars, d);
    monomials_.insert(monomials_.end(), level.begin(), level.end());
  }
}

std::size_t MonomialBasis::index_of(const Exponent& alpha) const {
  if (alpha.num_vars() != num_vars_) return monomials_.size();
  auto it = std::lower_bound(monomials_.begin(), monomials_.end(), alpha);
  if (it == monomials_.end() || !(*it == alpha)) return monomials_.size();
  return static_cast<std::size_t>(it - monomials_.begin());
}

MonomialBasis monomials_up_to(std::size_t num_vars, int max_degree) {
  return MonomialBasis(num_vars, max_degree);
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace polymom
