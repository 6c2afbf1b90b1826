#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>

#include "narx/error.hpp"
#include "narx/ortho.hpp"
#include "oracles.hpp"

using namespace narx;

namespace {

Subset all_indices(std::size_t n) {
  Subset s(n);
  std::iota(s.begin(), s.end(), 0);
  return s;
}

Subset complement(const Subset& s, std::size_t n) {
  Subset out;
  for (std::size_t i = 0; i < n; ++i)
    if (!subset_contains(s, i)) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("err of trivial columns") {
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(50, -1.0, 2.0);
  Eigen::MatrixXd same = y;
  CHECK(orthogonalize(same, y).err[0] == doctest::Approx(1.0));

  Eigen::MatrixXd ortho(4, 1);
  ortho << 1, -1, 1, -1;
  Eigen::VectorXd y4(4);
  y4 << 1, 1, 1, 1;
  CHECK(orthogonalize(ortho, y4).err[0] == doctest::Approx(0.0));

  try {
    (void)orthogonalize(ortho, Eigen::VectorXd::Zero(4));
    FAIL("expected degenerate output");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateOutput);
  }
}

TEST_CASE("energy identity against least squares") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index rows = 20 + static_cast<Eigen::Index>(rng() % 200);
    const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng() % std::min<Eigen::Index>(rows - 1, 30));
    const oracle::Problem p = oracle::random_problem(rng, rows, cols, 0.5);
    const OrthoDecomposition d = orthogonalize(p.x, p.y);
    const double yty = p.y.squaredNorm();
    const double rss = oracle::rss(p.x, p.y);
    CHECK(std::abs((1.0 - d.total_err()) - rss / yty) <= 1e-10 * std::max(1.0, rss / yty));
    for (double e : d.err) {
      CHECK(e >= 0.0);
      CHECK(e <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("orthogonality of the decomposition") {
  std::mt19937_64 rng(5);
  const oracle::Problem p = oracle::random_problem(rng, 300, 150);
  const OrthoDecomposition d = orthogonalize(p.x, p.y);
  for (Eigen::Index i = 0; i < d.w.cols(); ++i)
    for (Eigen::Index j = i + 1; j < d.w.cols(); ++j)
      REQUIRE(std::abs(d.w.col(i).dot(d.w.col(j))) <= 1e-8 * d.w.col(i).norm() * d.w.col(j).norm());
}

TEST_CASE("criterion is order invariant and monotone") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const oracle::Problem p = oracle::random_problem(rng, 80, 12);
    CriterionEngine eng(p.x, p.y);
    Subset order = all_indices(12);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(1 + rng() % 8);
    Subset reversed(order.rbegin(), order.rend());
    const double a = orthogonalize(p.x, order, p.y).total_err();
    const double b = orthogonalize(p.x, reversed, p.y).total_err();
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
    const Subset s = make_subset(order);
    CHECK(eng.J(s) == doctest::Approx(oracle::explained(p.x, s, p.y)).epsilon(1e-9));
    for (std::size_t x : complement(s, 12)) CHECK(eng.J(subset_union(s, x)) >= eng.J(s) - 1e-12);
  }
}

TEST_CASE("degenerate columns") {
  std::mt19937_64 rng(3);
  oracle::Problem p = oracle::random_problem(rng, 60, 4);
  p.x.col(3) = p.x.col(0) + p.x.col(1);
  CriterionEngine eng(p.x, p.y);
  const Criterion c = eng.evaluate(Subset{0, 1, 3});
  CHECK(c.degenerate_columns == 1);
  CHECK_FALSE(c.degenerate);
  CHECK(c.value == doctest::Approx(oracle::explained(p.x, {0, 1}, p.y)));

  const TermIndex ls = eng.least_significant_term(Subset{0, 1, 3});
  CHECK(eng.J(subset_minus(Subset{0, 1, 3}, ls)) == doctest::Approx(c.value).epsilon(1e-12));

  const TermSubset dup{{0, 3}, 0.0};
  Eigen::MatrixXd twin(60, 2);
  twin << p.x.col(0), p.x.col(0);
  CHECK(estimate_coefficients({{0, 1}, 0.0}, twin, p.y).rank_deficient);
  CHECK_FALSE(estimate_coefficients(dup, p.x, p.y).rank_deficient);
}

TEST_CASE("coefficient estimation") {
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(10, 1);
  const Eigen::VectorXd y = 2.0 * Eigen::VectorXd::Ones(10);
  const FittedModel f = estimate_coefficients({{0}, 0.0}, ones, y);
  CHECK(f.theta(0) == doctest::Approx(2.0));
  CHECK(f.rss == doctest::Approx(0.0));

  std::mt19937_64 rng(8);
  const oracle::Problem p = oracle::random_problem(rng, 100, 6, 0.0);
  const Eigen::VectorXd theta = p.x.householderQr().solve(p.y);
  const FittedModel g = estimate_coefficients({all_indices(6), 0.0}, p.x, p.y);
  CHECK((g.theta - theta).norm() <= 1e-10 * theta.norm());
  CriterionEngine eng(p.x, p.y);
  CHECK(eng.J(all_indices(6)) >= 1.0 - 1e-10);
}

TEST_CASE("definitions 1 and 2 match enumeration") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 10;
    const oracle::Problem p = oracle::random_problem(rng, 40 + static_cast<Eigen::Index>(rng() % 60),
                                                     static_cast<Eigen::Index>(n));
    CriterionEngine eng(p.x, p.y);
    Subset pool = all_indices(n);
    std::shuffle(pool.begin(), pool.end(), rng);
    const Subset s = make_subset(std::span(pool).first(1 + rng() % (n - 2)));

    TermIndex best_add = n;
    double best = -1.0;
    for (std::size_t x : complement(s, n)) {
      Subset t = subset_union(s, x);
      const double j = oracle::explained(p.x, t, p.y);
      if (j > best) best = j, best_add = x;
    }
    CHECK(eng.most_significant_term(s) == best_add);

    if (s.size() >= 2) {
      TermIndex best_rm = n;
      best = -1.0;
      for (std::size_t x : s) {
        const double j = oracle::explained(p.x, subset_minus(s, x), p.y);
        if (j > best) best = j, best_rm = x;
      }
      CHECK(eng.least_significant_term(s) == best_rm);
    }
  }
}

TEST_CASE("ties go to the lowest index") {
  std::mt19937_64 rng(4);
  oracle::Problem p = oracle::random_problem(rng, 50, 5);
  p.x.col(4) = p.x.col(1);
  p.y = p.x.col(1) + 0.01 * p.x.col(2);
  CriterionEngine eng(p.x, p.y);
  CHECK(eng.most_significant_term(Subset{}) == 1);
  CHECK(eng.least_significant_term(Subset{1, 4}) == 1);
}

TEST_CASE("subset significance primitives") {
  std::mt19937_64 rng(12);
  const oracle::Problem p = oracle::random_problem(rng, 80, 10);
  CriterionEngine eng(p.x, p.y);
  const Subset base{2, 5};
  for (SubsetMode mode : {SubsetMode::kSequential, SubsetMode::kExhaustive}) {
    CHECK(eng.most_significant_subset(1, base, mode) == Subset{eng.most_significant_term(base)});
    CHECK(eng.least_significant_subset(1, Subset{1, 2, 5}, mode) ==
          Subset{eng.least_significant_term(Subset{1, 2, 5})});
    CHECK(eng.most_significant_subset(8, base, mode) == complement(base, 10));
  }

  // Noise-free: true terms plus two spurious ones, drop two.
  oracle::Problem q = oracle::random_problem(rng, 80, 8, 0.0);
  q.y = q.x.col(0) - 2.0 * q.x.col(3) + 0.5 * q.x.col(6);
  CriterionEngine clean(q.x, q.y);
  for (SubsetMode mode : {SubsetMode::kSequential, SubsetMode::kExhaustive})
    CHECK(clean.least_significant_subset(2, Subset{0, 1, 3, 5, 6}, mode) == Subset{1, 5});

  CHECK_THROWS_AS(eng.most_significant_subset(9, base), Error);
  CHECK_THROWS_AS(eng.least_significant_subset(2, Subset{1, 2}), Error);
}

TEST_CASE("exhaustive mode respects its budget") {
  std::mt19937_64 rng(1);
  const oracle::Problem p = oracle::random_problem(rng, 120, 60);
  CriterionEngine eng(p.x, p.y);
  try {
    (void)eng.most_significant_subset(5, Subset{}, SubsetMode::kExhaustive);
    FAIL("expected a budget error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBudget);
  }
}

TEST_CASE("sequential subset search never beats enumeration") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 6 + rng() % 6;
    const oracle::Problem p = oracle::random_problem(rng, 60, static_cast<Eigen::Index>(n), 0.3);
    CriterionEngine eng(p.x, p.y);
    const Subset base{0};
    const std::size_t o = 2;
    const Subset seq = eng.most_significant_subset(o, base, SubsetMode::kSequential);
    const Subset exh = eng.most_significant_subset(o, base, SubsetMode::kExhaustive);
    Subset with_seq = base, with_exh = base;
    for (auto x : seq) with_seq = subset_union(with_seq, x);
    for (auto x : exh) with_exh = subset_union(with_exh, x);
    CHECK(eng.J(with_seq) <= eng.J(with_exh) + 1e-12);
  }
}

TEST_CASE("forked engines agree and cache hits are counted") {
  std::mt19937_64 rng(6);
  const oracle::Problem p = oracle::random_problem(rng, 70, 9);
  CriterionEngine eng(p.x, p.y);
  CriterionEngine other = eng.fork();
  const Subset s{1, 4, 7};
  CHECK(eng.J(s) == other.J(s));
  (void)eng.J(s);
  CHECK(eng.cache_hits() >= 1);
  CHECK(other.cache_hits() == 0);
}
