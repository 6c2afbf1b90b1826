#include "narx/ortho.hpp"

#include <algorithm>
#include <limits>

#include "narx/error.hpp"

namespace narx {

Subset make_subset(std::span<const TermIndex> indices) {
  Subset s(indices.begin(), indices.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

Subset subset_union(const Subset& a, TermIndex x) {
  Subset s = a;
  s.insert(std::lower_bound(s.begin(), s.end(), x), x);
  return s;
}

Subset subset_minus(const Subset& a, TermIndex x) {
  Subset s = a;
  auto it = std::lower_bound(s.begin(), s.end(), x);
  if (it != s.end() && *it == x) s.erase(it);
  return s;
}

bool subset_contains(const Subset& a, TermIndex x) {
  return std::binary_search(a.begin(), a.end(), x);
}

namespace {

// Removes from v its components along q.col(0..r-1), twice, accumulating the
// projection coefficients into coef.
void project_out(const Eigen::MatrixXd& q, Eigen::Index r, Eigen::Ref<Eigen::VectorXd> v,
                 Eigen::Ref<Eigen::VectorXd> coef) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index m = 0; m < r; ++m) {
      const double c = q.col(m).dot(v);
      v.noalias() -= c * q.col(m);
      coef(m) += c;
    }
  }
}

Subset complement(std::size_t n, const Subset& s) {
  Subset out;
  out.reserve(n - s.size());
  std::size_t j = 0;
  for (TermIndex i = 0; i < n; ++i) {
    if (j < s.size() && s[j] == i) {
      ++j;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

// Lowest-index argmax; scores within kTieTolerance of the best, relative to
// its magnitude, are ties.
TermIndex pick_best(std::span<const TermIndex> items, std::span<const double> scores) {
  double best = -std::numeric_limits<double>::infinity();
  for (double s : scores) best = std::max(best, s);
  TermIndex chosen = std::numeric_limits<TermIndex>::max();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (scores[i] >= best - kTieTolerance * std::abs(best) && items[i] < chosen) chosen = items[i];
  }
  return chosen;
}

double binomial(std::size_t m, std::size_t k) {
  if (k > m) return 0.0;
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(m - k + i) / static_cast<double>(i);
  return c;
}

bool next_combination(std::vector<std::size_t>& idx, std::size_t m) {
  const std::size_t k = idx.size();
  std::size_t pos = k;
  while (pos > 0 && idx[pos - 1] == m - k + pos - 1) --pos;
  if (pos == 0) return false;
  ++idx[pos - 1];
  for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

}  // namespace

double OrthoDecomposition::total_err() const {
  double s = 0.0;
  for (double e : err) s += e;
  return s;
}

OrthoDecomposition orthogonalize(const Eigen::MatrixXd& columns, const Eigen::VectorXd& y,
                                 double tol_rank) {
  std::vector<TermIndex> order(static_cast<std::size_t>(columns.cols()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return orthogonalize(columns, order, y, tol_rank);
}

OrthoDecomposition orthogonalize(const Eigen::MatrixXd& x, std::span<const TermIndex> order,
                                 const Eigen::VectorXd& y, double tol_rank) {
  if (order.empty()) throw Error(ErrorKind::kSpecification, "orthogonalize needs at least one column");
  if (x.rows() != y.size()) throw Error(ErrorKind::kSpecification, "column and target lengths differ");
  const double yty = y.squaredNorm();
  if (!(yty > 0.0)) throw Error(ErrorKind::kDegenerateOutput, "target has zero energy");

  const Eigen::Index n = x.rows();
  const Eigen::Index k = static_cast<Eigen::Index>(order.size());
  OrthoDecomposition d;
  d.w.resize(n, k);
  d.order.assign(order.begin(), order.end());
  d.g.assign(order.size(), 0.0);
  d.err.assign(order.size(), 0.0);
  d.degenerate.assign(order.size(), false);

  Eigen::MatrixXd q(n, k);  // normalized copies of the kept columns
  Eigen::Index kept = 0;
  Eigen::VectorXd residual = y;
  Eigen::VectorXd coef(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd v = x.col(static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]));
    const double original = v.squaredNorm();
    coef.setZero();
    project_out(q, kept, v, coef.head(kept));
    d.w.col(i) = v;
    const double wtw = v.squaredNorm();
    if (original == 0.0 || wtw <= tol_rank * original) {
      d.degenerate[static_cast<std::size_t>(i)] = true;
      continue;
    }
    const double g = v.dot(residual) / wtw;
    residual.noalias() -= g * v;
    d.g[static_cast<std::size_t>(i)] = g;
    d.err[static_cast<std::size_t>(i)] = g * g * wtw / yty;
    q.col(kept++) = v / std::sqrt(wtw);
  }
  return d;
}

FittedModel estimate_coefficients(const TermSubset& subset, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y) {
  FittedModel fit;
  fit.subset = subset;
  const Eigen::Index s = static_cast<Eigen::Index>(subset.indices.size());
  if (s == 0) {
    fit.theta.resize(0);
    fit.rss = y.squaredNorm();
    return fit;
  }
  Eigen::MatrixXd xs(x.rows(), s);
  for (Eigen::Index j = 0; j < s; ++j) {
    xs.col(j) = x.col(static_cast<Eigen::Index>(subset.indices[static_cast<std::size_t>(j)]));
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xs);
  fit.theta = cod.solve(y);
  fit.rank_deficient = cod.rank() < s;
  fit.rss = (y - xs * fit.theta).squaredNorm();
  return fit;
}

struct CriterionEngine::Problem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd col_sq;
  double yty = 0.0;
  double tol_rank = kRankTolerance;
};

// Orthonormal basis of a subset's non-degenerate columns, ascending order.
struct CriterionEngine::Basis {
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;  // x_kept = q r
  Eigen::VectorXd z;  // q' y
  Eigen::VectorXd residual;
  std::vector<TermIndex> kept;
  std::size_t degenerate = 0;
  double explained = 0.0;
};

std::size_t CriterionEngine::KeyHash::operator()(
    const std::vector<std::uint32_t>& k) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint32_t v : k) {
    h ^= v;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

CriterionEngine::CriterionEngine(Eigen::MatrixXd x, Eigen::VectorXd y, double tol_rank) {
  if (x.rows() != y.size()) throw Error(ErrorKind::kSpecification, "matrix and target row counts differ");
  auto p = std::make_shared<Problem>();
  p->yty = y.squaredNorm();
  if (!(p->yty > 0.0)) throw Error(ErrorKind::kDegenerateOutput, "target has zero energy");
  p->col_sq = x.colwise().squaredNorm().transpose();
  p->x = std::move(x);
  p->y = std::move(y);
  p->tol_rank = tol_rank;
  p_ = std::move(p);
}

CriterionEngine::CriterionEngine(std::shared_ptr<const Problem> problem) : p_(std::move(problem)) {}

CriterionEngine CriterionEngine::fork() const { return CriterionEngine(p_); }

std::size_t CriterionEngine::num_terms() const { return static_cast<std::size_t>(p_->x.cols()); }
Eigen::Index CriterionEngine::rows() const { return p_->x.rows(); }
const Eigen::MatrixXd& CriterionEngine::matrix() const { return p_->x; }
const Eigen::VectorXd& CriterionEngine::target() const { return p_->y; }

CriterionEngine::Basis CriterionEngine::factor(const Subset& subset) const {
  const Eigen::Index n = p_->x.rows();
  const Eigen::Index s = static_cast<Eigen::Index>(subset.size());
  Basis b;
  b.q.resize(n, s);
  b.r = Eigen::MatrixXd::Zero(s, s);
  b.z.resize(s);
  b.residual = p_->y;
  Eigen::Index kept = 0;
  for (TermIndex j : subset) {
    if (j >= num_terms()) throw Error(ErrorKind::kSpecification, "term index out of range");
    const double original = p_->col_sq(static_cast<Eigen::Index>(j));
    if (original == 0.0) {
      ++b.degenerate;
      continue;
    }
    Eigen::VectorXd v = p_->x.col(static_cast<Eigen::Index>(j));
    project_out(b.q, kept, v, b.r.col(kept).head(kept));
    const double nv2 = v.squaredNorm();
    if (nv2 <= p_->tol_rank * original) {
      b.r.col(kept).head(kept).setZero();
      ++b.degenerate;
      continue;
    }
    const double nv = std::sqrt(nv2);
    b.q.col(kept) = v / nv;
    b.r(kept, kept) = nv;
    const double c = b.q.col(kept).dot(b.residual);
    b.residual.noalias() -= c * b.q.col(kept);
    b.z(kept) = c;
    b.explained += c * c;
    b.kept.push_back(j);
    ++kept;
  }
  b.q.conservativeResize(n, kept);
  b.r.conservativeResize(kept, kept);
  b.z.conservativeResize(kept);
  return b;
}

Criterion CriterionEngine::compute(const Subset& subset) const {
  const Basis b = factor(subset);
  Criterion c;
  c.value = b.explained / p_->yty;
  c.degenerate_columns = b.degenerate;
  c.degenerate = !subset.empty() && b.kept.empty();
  return c;
}

Criterion CriterionEngine::evaluate(std::span<const TermIndex> subset) {
  const Subset s = make_subset(subset);
  std::vector<std::uint32_t> key(s.begin(), s.end());
  if (auto it = cache_.find(key); it != cache_.end()) {
    ++cache_hits_;
    return it->second;
  }
  ++evaluations_;
  const Criterion c = compute(s);
  if (cache_.size() > 2'000'000) cache_.clear();
  cache_.emplace(std::move(key), c);
  return c;
}

TermIndex CriterionEngine::best_addition(const Subset& base, std::span<const TermIndex> pool) {
  if (pool.empty()) throw Error(ErrorKind::kSpecification, "no candidate terms remain");
  const Basis b = factor(base);
  const Eigen::Index r = static_cast<Eigen::Index>(b.kept.size());
  const Eigen::MatrixXd& x = p_->x;
  const bool full = pool.size() * 2 > num_terms();

  Eigen::MatrixXd proj;  // q' x per candidate
  Eigen::VectorXd xres;  // x' residual per candidate
  if (full) {
    proj.noalias() = b.q.transpose() * x;
    xres.noalias() = x.transpose() * b.residual;
  }
  const Eigen::VectorXd qres = b.q.transpose() * b.residual;

  std::vector<double> scores(pool.size(), 0.0);
  Eigen::VectorXd c(r), w;
  for (std::size_t t = 0; t < pool.size(); ++t) {
    const Eigen::Index i = static_cast<Eigen::Index>(pool[t]);
    const double sq = p_->col_sq(i);
    if (sq == 0.0) continue;
    double xr;
    if (full) {
      c = proj.col(i);
      xr = xres(i);
    } else {
      c.noalias() = b.q.transpose() * x.col(i);
      xr = x.col(i).dot(b.residual);
    }
    double nw2 = sq - c.squaredNorm();
    double num;
    if (nw2 < 1e-6 * sq) {
      // Heavy cancellation: orthogonalize explicitly.
      w = x.col(i);
      w.noalias() -= b.q * c;
      w.noalias() -= b.q * (b.q.transpose() * w);
      nw2 = w.squaredNorm();
      num = w.dot(b.residual);
    } else {
      num = xr - c.dot(qres);
    }
    if (nw2 <= p_->tol_rank * sq) continue;
    scores[t] = num * num / nw2 / p_->yty;
  }
  return pick_best(pool, scores);
}

TermIndex CriterionEngine::best_removal(const Subset& base, std::span<const TermIndex> removable) {
  if (removable.empty()) throw Error(ErrorKind::kSpecification, "no removable terms");
  const Basis b = factor(base);
  std::vector<double> scores(removable.size());
  if (b.degenerate == 0) {
    // Dropping column j raises the residual energy by theta_j^2 / [(X'X)^-1]_jj.
    const Eigen::Index s = static_cast<Eigen::Index>(base.size());
    const Eigen::MatrixXd rinv =
        b.r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(s, s));
    const Eigen::VectorXd theta = rinv * b.z;
    for (std::size_t t = 0; t < removable.size(); ++t) {
      const auto pos = std::lower_bound(base.begin(), base.end(), removable[t]) - base.begin();
      const double drop = theta(pos) * theta(pos) / rinv.row(pos).squaredNorm();
      scores[t] = -drop / p_->yty;
    }
  } else {
    for (std::size_t t = 0; t < removable.size(); ++t) {
      scores[t] = J(subset_minus(base, removable[t]));
    }
  }
  return pick_best(removable, scores);
}

TermIndex CriterionEngine::most_significant_term(std::span<const TermIndex> subset) {
  const Subset base = make_subset(subset);
  const Subset pool = complement(num_terms(), base);
  return best_addition(base, pool);
}

TermIndex CriterionEngine::least_significant_term(std::span<const TermIndex> subset) {
  const Subset base = make_subset(subset);
  if (base.size() < 2) {
    throw Error(ErrorKind::kSpecification, "least significant term needs at least two terms");
  }
  return best_removal(base, base);
}

namespace {

// Floating selection of `target` items. forward(A) proposes the next item to
// take, backward(A) the weakest taken item, score(A) is the criterion.
// Conditional exclusions run while more than two items are held and stop on
// the first non-improving candidate; a restore to the stored best of the
// next size replaces a non-improving inclusion.
template <class Score, class Forward, class Backward>
Subset floating_select(std::size_t target, Score score, Forward forward, Backward backward) {
  std::vector<Subset> best(target + 1);
  std::vector<double> best_j(target + 1, -std::numeric_limits<double>::infinity());
  Subset held;
  constexpr std::size_t kStepCap = 100000;
  std::size_t steps = 0;
  while (held.size() < target) {
    if (++steps > kStepCap) throw Error(ErrorKind::kBudget, "floating subset search exceeded its step cap");
    const TermIndex added = forward(held);
    Subset cand = subset_union(held, added);
    const double jc = score(cand);
    const std::size_t k = cand.size();
    if (jc > best_j[k] + kImprovementEps) {
      best[k] = cand;
      best_j[k] = jc;
      held = std::move(cand);
    } else {
      held = best[k];
    }
    bool first = true;
    while (held.size() > 2) {
      const TermIndex weakest = backward(held);
      if (first && weakest == added) break;
      Subset reduced = subset_minus(held, weakest);
      const double jr = score(reduced);
      if (jr <= best_j[reduced.size()] + kImprovementEps) break;
      best[reduced.size()] = reduced;
      best_j[reduced.size()] = jr;
      held = std::move(reduced);
      first = false;
    }
  }
  return best[target];
}

Subset set_union(const Subset& a, const Subset& b) {
  Subset out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Subset set_difference(const Subset& a, const Subset& b) {
  Subset out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

Subset CriterionEngine::most_significant_subset(std::size_t o, std::span<const TermIndex> subset,
                                                SubsetMode mode) {
  const Subset base = make_subset(subset);
  if (o < 1 || o > num_terms() - base.size()) {
    throw Error(ErrorKind::kSpecification, "most significant subset size out of range");
  }
  if (mode == SubsetMode::kExhaustive) return exhaustive_subset(o, base, true);
  return floating_select(
      o, [&](const Subset& added) { return J(set_union(base, added)); },
      [&](const Subset& added) {
        const Subset cur = set_union(base, added);
        return best_addition(cur, complement(num_terms(), cur));
      },
      [&](const Subset& added) { return best_removal(set_union(base, added), added); });
}

Subset CriterionEngine::least_significant_subset(std::size_t o, std::span<const TermIndex> subset,
                                                 SubsetMode mode) {
  const Subset base = make_subset(subset);
  if (o < 1 || o + 1 > base.size()) {
    throw Error(ErrorKind::kSpecification, "least significant subset size out of range");
  }
  if (mode == SubsetMode::kExhaustive) return exhaustive_subset(o, base, false);
  return floating_select(
      o, [&](const Subset& removed) { return J(set_difference(base, removed)); },
      [&](const Subset& removed) {
        const Subset cur = set_difference(base, removed);
        return best_removal(cur, cur);
      },
      [&](const Subset& removed) {
        return best_addition(set_difference(base, removed), removed);
      });
}

Subset CriterionEngine::exhaustive_subset(std::size_t o, const Subset& base, bool adding) {
  const Subset pool = adding ? complement(num_terms(), base) : base;
  const std::size_t m = pool.size();
  if (binomial(m, o) > static_cast<double>(kExhaustiveBudget)) {
    throw Error(ErrorKind::kBudget, "exhaustive subset search over C(" + std::to_string(m) + "," +
                                        std::to_string(o) + ") exceeds the budget");
  }
  auto assemble = [&](const std::vector<std::size_t>& idx) {
    Subset chosen;
    for (std::size_t i : idx) chosen.push_back(pool[i]);
    return chosen;
  };
  std::vector<double> scores;
  std::vector<std::size_t> idx(o);
  for (std::size_t i = 0; i < o; ++i) idx[i] = i;
  do {
    const Subset chosen = assemble(idx);
    const Subset s = adding ? set_union(base, chosen) : set_difference(base, chosen);
    scores.push_back(compute(s).value);
  } while (next_combination(idx, m));

  const double best = *std::max_element(scores.begin(), scores.end());
  const auto first = static_cast<std::size_t>(
      std::find_if(scores.begin(), scores.end(), [&](double v) { return v >= best - kTieTolerance * std::abs(best); }) -
      scores.begin());
  for (std::size_t i = 0; i < o; ++i) idx[i] = i;
  for (std::size_t step = 0; step < first; ++step) next_combination(idx, m);
  return assemble(idx);
}

}  // namespace narx
