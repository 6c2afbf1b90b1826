#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace narx {

using TermIndex = std::size_t;
// Sorted, duplicate-free candidate indices.
using Subset = std::vector<TermIndex>;

// A column is degenerate once its orthogonalized squared norm drops below
// this fraction of its original squared norm.
inline constexpr double kRankTolerance = 1e-12;
// "Better" means larger by more than this (criterion units, J in [0, 1]).
inline constexpr double kImprovementEps = 1e-12;
// Candidates within this fraction of the best score's magnitude are ties;
// the lowest index wins.
inline constexpr double kTieTolerance = 1e-12;
// Largest number of subsets the exhaustive significance search may visit.
inline constexpr std::size_t kExhaustiveBudget = 100000;

Subset make_subset(std::span<const TermIndex> indices);
Subset subset_union(const Subset& a, TermIndex x);
Subset subset_minus(const Subset& a, TermIndex x);
bool subset_contains(const Subset& a, TermIndex x);

// Result of Gram-Schmidt over columns in a fixed order.
struct OrthoDecomposition {
  Eigen::MatrixXd w;               // orthogonalized columns, unnormalized
  std::vector<double> g;           // w_i' y / w_i' w_i
  std::vector<double> err;         // error reduction ratio per column
  std::vector<std::size_t> order;  // source column per position
  std::vector<bool> degenerate;

  double total_err() const;
};

// Modified Gram-Schmidt with one reorthogonalization pass. Degenerate columns
// get err = 0 and are not projected out of later columns.
OrthoDecomposition orthogonalize(const Eigen::MatrixXd& columns, const Eigen::VectorXd& y,
                                 double tol_rank = kRankTolerance);
// Same, over the listed columns of `x` in the listed order.
OrthoDecomposition orthogonalize(const Eigen::MatrixXd& x, std::span<const TermIndex> order,
                                 const Eigen::VectorXd& y, double tol_rank = kRankTolerance);

struct TermSubset {
  Subset indices;
  double criterion = 0.0;

  std::size_t size() const { return indices.size(); }
  friend bool operator==(const TermSubset& a, const TermSubset& b) {
    return a.indices == b.indices;
  }
};

struct FittedModel {
  TermSubset subset;
  Eigen::VectorXd theta;  // one per subset index, same order
  double rss = 0.0;
  bool rank_deficient = false;
};

// Least squares on the subset's columns; least-norm when rank deficient.
FittedModel estimate_coefficients(const TermSubset& subset, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y);

struct Criterion {
  double value = 0.0;
  std::size_t degenerate_columns = 0;
  bool degenerate = false;  // every column degenerate; value is 0
};

enum class SubsetMode { kSequential, kExhaustive };

// Sum-of-ERR criterion over a fixed regressor matrix and target, with the
// significance primitives built on it. J values are memoized per index set;
// the sum is order invariant, so sets are evaluated in ascending order.
// Not thread safe: give each worker its own engine via fork().
class CriterionEngine {
 public:
  CriterionEngine(Eigen::MatrixXd x, Eigen::VectorXd y, double tol_rank = kRankTolerance);

  // Shares the matrix, starts with an empty cache.
  CriterionEngine fork() const;

  std::size_t num_terms() const;
  Eigen::Index rows() const;
  const Eigen::MatrixXd& matrix() const;
  const Eigen::VectorXd& target() const;

  Criterion evaluate(std::span<const TermIndex> subset);
  double J(std::span<const TermIndex> subset) { return evaluate(subset).value; }

  // Definition of x^MS: argmax over unselected x of J(subset + x).
  TermIndex most_significant_term(std::span<const TermIndex> subset);
  // Definition of x^LS: argmax over x in subset of J(subset - x).
  TermIndex least_significant_term(std::span<const TermIndex> subset);
  // o terms outside `subset` jointly maximizing J(subset + X_o).
  Subset most_significant_subset(std::size_t o, std::span<const TermIndex> subset,
                                 SubsetMode mode = SubsetMode::kSequential);
  // o terms inside `subset` whose removal maximizes J(subset - X_o).
  Subset least_significant_subset(std::size_t o, std::span<const TermIndex> subset,
                                  SubsetMode mode = SubsetMode::kSequential);

  // Restricted forms: best x in `pool` to add to `base`, best x in
  // `removable` to drop from `base`.
  TermIndex best_addition(const Subset& base, std::span<const TermIndex> pool);
  TermIndex best_removal(const Subset& base, std::span<const TermIndex> removable);

  std::size_t evaluations() const { return evaluations_; }
  std::size_t cache_hits() const { return cache_hits_; }
  void clear_cache() { cache_.clear(); }

 private:
  struct Problem;
  struct Basis;
  struct KeyHash {
    std::size_t operator()(const std::vector<std::uint32_t>& k) const noexcept;
  };

  explicit CriterionEngine(std::shared_ptr<const Problem> problem);

  Basis factor(const Subset& subset) const;
  Criterion compute(const Subset& subset) const;
  Subset exhaustive_subset(std::size_t o, const Subset& base, bool adding);

  std::shared_ptr<const Problem> p_;
  std::unordered_map<std::vector<std::uint32_t>, Criterion, KeyHash> cache_;
  std::size_t evaluations_ = 0;
  std::size_t cache_hits_ = 0;
};

}  // namespace narx
