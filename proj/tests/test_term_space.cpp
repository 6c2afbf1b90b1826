#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "narx/error.hpp"
#include "narx/term_space.hpp"

using namespace narx;

namespace {

// Multisets of size d drawn from m symbols: C(m + d - 1, d).
std::size_t multisets(std::size_t m, std::size_t d) {
  std::size_t num = 1, den = 1;
  for (std::size_t i = 1; i <= d; ++i) {
    num *= m + i - 1;
    den *= i;
  }
  return num / den;
}

}  // namespace

TEST_CASE("term counts for the benchmark specifications") {
  CHECK(count_terms({4, 4, 3}) == 165);
  CHECK(count_terms({5, 5, 3}) == 286);
  CHECK(count_terms({4, 4, 1}) == 9);
  CHECK(enumerate_terms({4, 4, 3}).size() == 165);
  CHECK(enumerate_terms({5, 5, 3}).size() == 286);
}

TEST_CASE("count agrees with enumeration and the multiset formula") {
  for (int nu = 0; nu <= 5; ++nu)
    for (int ny = 0; ny <= 5; ++ny)
      for (int nl = 1; nl <= 4; ++nl) {
        if (nu + ny < 1) continue;
        const ModelSpec s{nu, ny, nl};
        std::size_t expect = 0;
        for (int d = 0; d <= nl; ++d) expect += multisets(static_cast<std::size_t>(nu + ny), static_cast<std::size_t>(d));
        CAPTURE(nu);
        CAPTURE(ny);
        CAPTURE(nl);
        REQUIRE(count_terms(s) == expect);
        REQUIRE(enumerate_terms(s).size() == expect);
      }
}

TEST_CASE("enumeration is canonical and duplicate free") {
  const CandidateSet c = enumerate_terms({4, 4, 3});
  CHECK(c.terms[0].is_constant());
  std::set<TermSpec> seen(c.terms.begin(), c.terms.end());
  CHECK(seen.size() == c.size());
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c.terms[i - 1].degree() <= c.terms[i].degree());
  for (const TermSpec& t : c.terms) {
    CHECK(t.degree() <= 3);
    CHECK(t.max_lag(Signal::kInput) <= 4);
    CHECK(t.max_lag(Signal::kOutput) <= 4);
  }

  const CandidateSet tiny = enumerate_terms({1, 1, 1});
  REQUIRE(tiny.size() == 3);
  CHECK(tiny.terms[0].str() == "1");
  CHECK(tiny.terms[1].str() == "y(k-1)");
  CHECK(tiny.terms[2].str() == "u(k-1)");
}

TEST_CASE("term parsing and canonical form") {
  const TermSpec a = parse_term("u(k-2)^2*y(k-1)");
  const TermSpec b = parse_term("y(k-1)*u(k-2)*u(k-2)");
  CHECK(a == b);
  CHECK(a.str() == "y(k-1)*u(k-2)^2");
  CHECK(a.degree() == 3);
  CHECK(parse_term("1").is_constant());
  CHECK(parse_term("const").is_constant());
  CHECK(parse_term("y(k-3)^2").is_output_only());
  CHECK_FALSE(parse_term("y(k-1)*u(k-1)").is_output_only());

  const TermSpec permuted({{Signal::kInput, 2, 1}, {Signal::kOutput, 1, 1}, {Signal::kInput, 2, 1}});
  CHECK(permuted == a);

  CHECK_THROWS_AS(parse_term("z(k-1)"), Error);
  CHECK_THROWS_AS(parse_term("y(k-0)"), Error);
  CHECK_THROWS_AS(parse_term("y(k-1)^"), Error);
}

TEST_CASE("index lookup") {
  const CandidateSet c = enumerate_terms({2, 2, 2});
  const TermSpec t = parse_term("u(k-1)*y(k-2)");
  CHECK(c.terms[c.index_of(t)] == t);
  CHECK(c.find(parse_term("u(k-3)")) == c.size());
  try {
    (void)c.index_of(parse_term("u(k-3)"));
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSchema);
  }
}

TEST_CASE("invalid specifications are rejected") {
  for (const ModelSpec& s : {ModelSpec{0, 0, 1}, ModelSpec{-1, 2, 1}, ModelSpec{2, 2, 0}}) {
    try {
      (void)enumerate_terms(s);
      FAIL("expected a specification error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kSpecification);
    }
  }
}

TEST_CASE("regressor rows and lag products") {
  const std::vector<double> u{1, 2, 3, 4}, y{1, 1, 2, 3};
  const CandidateSet c = enumerate_terms({2, 2, 2});
  const RegressorMatrix r = build_regressors(c, u, y);
  CHECK(r.first_sample == 2);
  CHECK(r.rows() == 2);
  CHECK(r.cols() == static_cast<Eigen::Index>(c.size()));
  CHECK(r.x.col(0).isOnes());
  // Sample k = 3 (1-based) is row 0.
  CHECK(r.x(0, static_cast<Eigen::Index>(c.index_of(parse_term("y(k-1)*u(k-2)")))) == 1.0);
  CHECK(r.x(1, static_cast<Eigen::Index>(c.index_of(parse_term("y(k-1)*u(k-2)")))) == 2.0 * 2.0);
  CHECK(r.x(1, static_cast<Eigen::Index>(c.index_of(parse_term("u(k-1)^2")))) == 9.0);
  CHECK(r.y(0) == 2.0);
  CHECK(r.y(1) == 3.0);
}

TEST_CASE("regressor row count and split") {
  std::vector<double> u(1000), y(1000);
  for (std::size_t k = 0; k < u.size(); ++k) {
    u[k] = std::sin(0.1 * static_cast<double>(k));
    y[k] = std::cos(0.07 * static_cast<double>(k));
  }
  const CandidateSet c = enumerate_terms({4, 4, 3});
  const RegressorMatrix r = build_regressors(c, u, y);
  CHECK(r.rows() == 996);
  const RegressorMatrix est = r.head(700), val = r.tail(700);
  CHECK(est.rows() == 696);
  CHECK(val.rows() == 300);
  CHECK(val.first_sample == 700);
  CHECK(val.y(0) == y[700]);

  const RegressorMatrix again = build_regressors(c, u, y);
  CHECK((again.x.array() == r.x.array()).all());
}

TEST_CASE("short data is rejected") {
  const CandidateSet c = enumerate_terms({4, 4, 2});
  const std::vector<double> u(4, 1.0), y(4, 1.0);
  try {
    (void)build_regressors(c, u, y);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
}
