#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace narx {

// Maximum lags and polynomial degree of a NARX candidate model.
struct ModelSpec {
  int n_u = 0;
  int n_y = 0;
  int n_l = 1;

  int max_lag() const { return n_u > n_y ? n_u : n_y; }
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Outputs order before inputs inside a term and in the candidate ordering.
enum class Signal : int { kOutput = 0, kInput = 1 };

struct Factor {
  Signal signal = Signal::kOutput;
  int lag = 1;
  int exponent = 1;

  friend auto operator<=>(const Factor&, const Factor&) = default;
};

// One monomial in lagged outputs and inputs. No factors means the constant.
class TermSpec {
 public:
  TermSpec() = default;
  // Merges repeated (signal, lag) pairs and sorts into canonical order.
  explicit TermSpec(std::vector<Factor> factors);

  static TermSpec constant() { return TermSpec{}; }

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_constant() const { return factors_.empty(); }
  int degree() const;
  int max_lag(Signal s) const;
  // Non-constant with output factors only.
  bool is_output_only() const;

  // Canonical text form, e.g. "y(k-1)*u(k-2)^2"; the constant prints as "1".
  std::string str() const;

  // Product of lagged samples at 0-based sample index k (requires k >= lags).
  double evaluate(std::span<const double> u, std::span<const double> y,
                  std::size_t k) const;

  friend bool operator==(const TermSpec&, const TermSpec&) = default;
  friend auto operator<=>(const TermSpec&, const TermSpec&) = default;

 private:
  std::vector<Factor> factors_;
};

// Parses "1", "const", "y(k-1)", "u(k-2)^2*y(k-1)" and the like.
TermSpec parse_term(std::string_view text);

struct CandidateSet {
  ModelSpec spec;
  std::vector<TermSpec> terms;

  std::size_t size() const { return terms.size(); }
  // Index of a term in the set, or size() if absent.
  std::size_t find(const TermSpec& term) const;
  // Like find() but throws a schema error when the term is absent.
  std::size_t index_of(const TermSpec& term) const;
};

// Closed-form term count via n_i = n_{i-1} (n_y + n_u + i - 1) / i.
std::size_t count_terms(const ModelSpec& spec);

// All monomials of degree 0..n_l, ordered by degree then lexicographically
// over (signal, lag) with repetition. Term 0 is the constant.
CandidateSet enumerate_terms(const ModelSpec& spec);

// Column-per-term design matrix over the rows with full lag history.
// Row r holds sample index first_sample + r (0-based).
struct RegressorMatrix {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::size_t first_sample = 0;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }

  // Rows whose sample index is below `split` / at or above it.
  RegressorMatrix head(std::size_t split) const;
  RegressorMatrix tail(std::size_t split) const;
};

RegressorMatrix build_regressors(const CandidateSet& candidates,
                                 std::span<const double> u,
                                 std::span<const double> y);

}  // namespace narx
