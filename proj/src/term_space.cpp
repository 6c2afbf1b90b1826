#include "narx/term_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "narx/error.hpp"

namespace narx {

void ModelSpec::validate() const {
  if (n_u < 0 || n_y < 0 || n_l < 1 || n_u + n_y < 1) {
    throw Error(ErrorKind::kSpecification,
                "invalid model spec [" + std::to_string(n_u) + "," +
                    std::to_string(n_y) + "," + std::to_string(n_l) + "]");
  }
}

TermSpec::TermSpec(std::vector<Factor> factors) {
  std::sort(factors.begin(), factors.end());
  for (const Factor& f : factors) {
    if (f.lag < 1 || f.exponent < 1) {
      throw Error(ErrorKind::kSpecification, "term factor needs lag >= 1 and exponent >= 1");
    }
    if (!factors_.empty() && factors_.back().signal == f.signal &&
        factors_.back().lag == f.lag) {
      factors_.back().exponent += f.exponent;
    } else {
      factors_.push_back(f);
    }
  }
}

int TermSpec::degree() const {
  int d = 0;
  for (const Factor& f : factors_) d += f.exponent;
  return d;
}

int TermSpec::max_lag(Signal s) const {
  int m = 0;
  for (const Factor& f : factors_) {
    if (f.signal == s) m = std::max(m, f.lag);
  }
  return m;
}

bool TermSpec::is_output_only() const {
  if (factors_.empty()) return false;
  return std::all_of(factors_.begin(), factors_.end(),
                     [](const Factor& f) { return f.signal == Signal::kOutput; });
}

std::string TermSpec::str() const {
  if (factors_.empty()) return "1";
  std::string out;
  for (const Factor& f : factors_) {
    if (!out.empty()) out += '*';
    out += f.signal == Signal::kOutput ? "y(k-" : "u(k-";
    out += std::to_string(f.lag);
    out += ')';
    if (f.exponent > 1) {
      out += '^';
      out += std::to_string(f.exponent);
    }
  }
  return out;
}

double TermSpec::evaluate(std::span<const double> u, std::span<const double> y,
                          std::size_t k) const {
  double v = 1.0;
  for (const Factor& f : factors_) {
    const double s = f.signal == Signal::kOutput ? y[k - f.lag] : u[k - f.lag];
    for (int e = 0; e < f.exponent; ++e) v *= s;
  }
  return v;
}

namespace {

[[noreturn]] void bad_term(std::string_view text) {
  throw Error(ErrorKind::kSchema, "cannot parse term '" + std::string(text) + "'");
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_term(whole);
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

TermSpec parse_term(std::string_view text) {
  const std::string_view t = trim(text);
  if (t == "1" || t == "const" || t == "c") return TermSpec::constant();
  std::vector<Factor> factors;
  std::size_t pos = 0;
  while (pos <= t.size()) {
    std::size_t star = t.find('*', pos);
    if (star == std::string_view::npos) star = t.size();
    std::string_view f = trim(t.substr(pos, star - pos));
    // <sig>(k-<lag>)[^<exp>]
    if (f.size() < 6 || (f[0] != 'y' && f[0] != 'u') || f.substr(1, 3) != "(k-") {
      bad_term(text);
    }
    const std::size_t close = f.find(')');
    if (close == std::string_view::npos) bad_term(text);
    Factor factor;
    factor.signal = f[0] == 'y' ? Signal::kOutput : Signal::kInput;
    factor.lag = parse_int(f.substr(4, close - 4), text);
    std::string_view rest = f.substr(close + 1);
    if (!rest.empty()) {
      if (rest[0] != '^') bad_term(text);
      factor.exponent = parse_int(rest.substr(1), text);
    }
    if (factor.lag < 1 || factor.exponent < 1) bad_term(text);
    factors.push_back(factor);
    pos = star + 1;
  }
  return TermSpec(std::move(factors));
}

std::size_t CandidateSet::find(const TermSpec& term) const {
  const auto it = std::find(terms.begin(), terms.end(), term);
  return static_cast<std::size_t>(it - terms.begin());
}

std::size_t CandidateSet::index_of(const TermSpec& term) const {
  const std::size_t i = find(term);
  if (i == terms.size()) {
    throw Error(ErrorKind::kSchema, "term " + term.str() + " is not a candidate");
  }
  return i;
}

std::size_t count_terms(const ModelSpec& spec) {
  spec.validate();
  const std::size_t vars = static_cast<std::size_t>(spec.n_y + spec.n_u);
  std::size_t n_i = 1;
  std::size_t n = 1;
  for (std::size_t i = 1; i <= static_cast<std::size_t>(spec.n_l); ++i) {
    n_i = n_i * (vars + i - 1) / i;  // exact: n_i is C(vars + i - 1, i)
    n += n_i;
  }
  return n;
}

CandidateSet enumerate_terms(const ModelSpec& spec) {
  spec.validate();
  CandidateSet set;
  set.spec = spec;
  set.terms.reserve(count_terms(spec));
  set.terms.push_back(TermSpec::constant());

  // Variable v < n_y is y(k-v-1); otherwise u(k-(v-n_y)-1).
  const int vars = spec.n_y + spec.n_u;
  auto to_factor = [&](int v) {
    return v < spec.n_y ? Factor{Signal::kOutput, v + 1, 1}
                        : Factor{Signal::kInput, v - spec.n_y + 1, 1};
  };
  for (int degree = 1; degree <= spec.n_l; ++degree) {
    std::vector<int> combo(static_cast<std::size_t>(degree), 0);
    while (true) {
      std::vector<Factor> factors;
      factors.reserve(combo.size());
      for (int v : combo) factors.push_back(to_factor(v));
      set.terms.emplace_back(std::move(factors));
      // Next non-decreasing sequence in lexicographic order.
      int pos = degree - 1;
      while (pos >= 0 && combo[static_cast<std::size_t>(pos)] == vars - 1) --pos;
      if (pos < 0) break;
      const int next = combo[static_cast<std::size_t>(pos)] + 1;
      for (int j = pos; j < degree; ++j) combo[static_cast<std::size_t>(j)] = next;
    }
  }
  return set;
}

RegressorMatrix RegressorMatrix::head(std::size_t split) const {
  RegressorMatrix out;
  out.first_sample = first_sample;
  const Eigen::Index n =
      split <= first_sample ? 0
                            : std::min<Eigen::Index>(rows(), static_cast<Eigen::Index>(split - first_sample));
  out.x = x.topRows(n);
  out.y = y.head(n);
  return out;
}

RegressorMatrix RegressorMatrix::tail(std::size_t split) const {
  RegressorMatrix out;
  const Eigen::Index skip =
      split <= first_sample ? 0
                            : std::min<Eigen::Index>(rows(), static_cast<Eigen::Index>(split - first_sample));
  out.first_sample = first_sample + static_cast<std::size_t>(skip);
  out.x = x.bottomRows(rows() - skip);
  out.y = y.tail(rows() - skip);
  return out;
}

RegressorMatrix build_regressors(const CandidateSet& candidates,
                                 std::span<const double> u,
                                 std::span<const double> y) {
  if (u.size() != y.size()) {
    throw Error(ErrorKind::kInsufficientData, "input and output lengths differ");
  }
  const std::size_t lag = static_cast<std::size_t>(candidates.spec.max_lag());
  if (y.size() <= lag) {
    throw Error(ErrorKind::kInsufficientData,
                "data length " + std::to_string(y.size()) +
                    " does not exceed the maximum lag " + std::to_string(lag));
  }
  RegressorMatrix m;
  m.first_sample = lag;
  const Eigen::Index rows = static_cast<Eigen::Index>(y.size() - lag);
  m.x.resize(rows, static_cast<Eigen::Index>(candidates.size()));
  m.y.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) m.y(r) = y[lag + static_cast<std::size_t>(r)];
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const TermSpec& term = candidates.terms[c];
    for (Eigen::Index r = 0; r < rows; ++r) {
      m.x(r, static_cast<Eigen::Index>(c)) =
          term.evaluate(u, y, lag + static_cast<std::size_t>(r));
    }
  }
  return m;
}

}  // namespace narx
