///
/// \file polyring.hpp
///
/// Monomials and sparse real polynomials over the component parameter
/// variables theta_1..theta_P.  Every container keyed by exponents uses the
/// graded lexicographic order defined by `Exponent::operator<=>`.
///
#ifndef POLYMOM_POLYRING_HPP
#define POLYMOM_POLYRING_HPP

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace polymom {

///
/// Exponent vector alpha in N^P; stands for the monomial theta^alpha.
///
/// Ordering is graded lexicographic: lower total degree first, and within a
/// degree the lexicographically *larger* vector first, so that for P = 2 the
/// basis reads 1, t1, t2, t1^2, t1 t2, t2^2, ...
///
class Exponent {
 public:
  Exponent() = default;
  explicit Exponent(std::size_t num_vars) : powers_(num_vars, 0) {}
  explicit Exponent(std::vector<int> powers);
  Exponent(std::initializer_list<int> powers)
      : Exponent(std::vector<int>(powers)) {}

  /// gamma_p: one in position `var`, zero elsewhere.
  static Exponent unit(std::size_t num_vars, std::size_t var);

  std::size_t num_vars() const noexcept { return powers_.size(); }
  int degree() const noexcept { return degree_; }
  bool is_zero() const noexcept { return degree_ == 0; }
  int operator[](std::size_t i) const { return powers_[i]; }
  std::span<const int> powers() const noexcept { return powers_; }

  Exponent operator+(const Exponent& other) const;

  /// theta^alpha at `point`.
  double evaluate(std::span<const double> point) const;

  friend bool operator==(const Exponent& a, const Exponent& b) {
    return a.powers_ == b.powers_;
  }
  friend std::strong_ordering operator<=>(const Exponent& a,
                                          const Exponent& b);

  std::string to_string() const;

 private:
  std::vector<int> powers_;
  int degree_ = 0;
};

/// Sparse polynomial sum_alpha a_alpha theta^alpha with real coefficients.
class Polynomial {
 public:
  using TermMap = std::map<Exponent, double>;

  explicit Polynomial(std::size_t num_vars = 0) : num_vars_(num_vars) {}

  static Polynomial constant(std::size_t num_vars, double value);
  static Polynomial variable(std::size_t num_vars, std::size_t var);
  static Polynomial monomial(const Exponent& exponent, double coef = 1.0);

  std::size_t num_vars() const noexcept { return num_vars_; }
  const TermMap& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  /// Total degree; -1 for the zero polynomial.
  int degree() const noexcept;
  double coefficient(const Exponent& exponent) const;

  /// Adds `coef * theta^exponent`, dropping the term if it cancels.
  void add_term(const Exponent& exponent, double coef);

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double scale);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) {
    return a += b;
  }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) {
    return a -= b;
  }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  double evaluate(std::span<const double> point) const;

  /// Diagnostic rendering `coef*x1^a1*x2^a2 + ...` in grlex order.
  std::string to_string() const;

  friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

 private:
  void check_vars(std::size_t other) const;

  std::size_t num_vars_;
  TermMap terms_;
};

Polynomial pow(const Polynomial& base, int exponent);

///
/// v_r(theta): every monomial of degree <= r in P variables, grlex-ordered.
/// The first element is the constant monomial and the length is C(P+r, r).
///
class MonomialBasis {
 public:
  MonomialBasis(std::size_t num_vars, int max_degree);

  std::size_t num_vars() const noexcept { return num_vars_; }
  int max_degree() const noexcept { return max_degree_; }
  std::size_t size() const noexcept { return monomials_.size(); }
  const Exponent& operator[](std::size_t i) const { return monomials_[i]; }
  const std::vector<Exponent>& monomials() const noexcept { return monomials_; }
  auto begin() const noexcept { return monomials_.begin(); }
  auto end() const noexcept { return monomials_.end(); }

  /// Position of `alpha`, or size() when absent.
  std::size_t index_of(const Exponent& alpha) const;
  bool contains(const Exponent& alpha) const { return index_of(alpha) < size(); }

 private:
  std::size_t num_vars_;
  int max_degree_;
  std::vector<Exponent> monomials_;
};

MonomialBasis monomials_up_to(std::size_t num_vars, int max_degree);

/// Exponents of exactly degree `degree`, in grlex order.
std::vector<Exponent> monomials_of_degree(std::size_t num_vars, int degree);

/// C(n, k) as a double; exact for the small arguments used here.
double binomial(int n, int k);

}  // namespace polymom

#endif  // POLYMOM_POLYRING_HPP
