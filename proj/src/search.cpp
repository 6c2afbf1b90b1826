#include "narx/search.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>

#include "narx/error.hpp"

namespace narx {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kOfr: return "ofr";
    case Algorithm::kOsf: return "osf";
    case Algorithm::kOif: return "oif";
    case Algorithm::kO2s: return "o2s";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& text) {
  std::string name = text;
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  if (name == "ofr" || name == "ofr-err") return Algorithm::kOfr;
  if (name == "osf") return Algorithm::kOsf;
  if (name == "oif") return Algorithm::kOif;
  if (name == "o2s") return Algorithm::kO2s;
  throw Error(ErrorKind::kConfig, "unknown algorithm '" + text + "'");
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kInit: return "init";
    case Phase::kForward: return "forward";
    case Phase::kBacktrack: return "backtrack";
    case Phase::kSwap: return "swap";
    case Phase::kDownSwing: return "down_swing";
    case Phase::kUpSwing: return "up_swing";
  }
  return "unknown";
}

std::size_t default_max_depth(std::size_t xi, std::size_t n, double fraction) {
  const std::size_t room = xi < n ? std::min(xi, n - xi) : 0;
  const auto depth = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(room) - 1e-12));
  return std::max<std::size_t>(depth, 1);
}

namespace {

void check_xi(const CriterionEngine& engine, const SearchConfig& config, std::size_t min_xi) {
  if (config.xi < min_xi || config.xi >= engine.num_terms()) {
    throw Error(ErrorKind::kConfig, "target cardinality " + std::to_string(config.xi) +
                                        " outside [" + std::to_string(min_xi) + ", " +
                                        std::to_string(engine.num_terms()) + ")");
  }
}

// Snapshot of the search state used to detect an exact repeat.
struct StateKey {
  Subset subset;
  std::vector<double> best_j;
  friend auto operator<=>(const StateKey&, const StateKey&) = default;
};

SearchResult floating_search(CriterionEngine& engine, const SearchConfig& config, bool swapping) {
  check_xi(engine, config, 2);
  const std::size_t xi = config.xi;
  SearchResult res;
  res.algorithm = swapping ? Algorithm::kOif : Algorithm::kOsf;

  // Best subset and J per cardinality; J starts at zero for every size.
  std::vector<Subset> best(xi + 1);
  std::vector<double> best_j(xi + 1, 0.0);
  std::vector<bool> stored(xi + 1, false);
  std::set<StateKey> seen;

  Subset x;
  auto over_budget = [&] {
    if (res.trace.steps.size() >= config.step_budget) {
      res.budget_exceeded = true;
      return true;
    }
    return false;
  };
  auto record = [&](Phase phase, bool accepted) {
    TraceStep s;
    s.phase = phase;
    s.xi_step = x.size();
    s.subset = x;
    s.J = engine.J(x);
    s.accepted = accepted;
    s.best_J = best_j[x.size()];
    res.trace.add(std::move(s));
  };

  while (x.size() < xi && !over_budget()) {
    const TermIndex added = engine.most_significant_term(x);
    Subset grown = subset_union(x, added);
    const double j_grown = engine.J(grown);
    const std::size_t k = grown.size();
    const bool better = !stored[k] || j_grown > best_j[k] + kImprovementEps;
    if (better) {
      const double j_prev = x.empty() ? 0.0 : engine.J(x);
      if (j_grown - j_prev <= kImprovementEps) ++res.zero_gain_additions;
      best[k] = grown;
      best_j[k] = j_grown;
      stored[k] = true;
      x = std::move(grown);
    } else {
      x = best[k];
    }
    record(Phase::kForward, better);

    if (!seen.insert(StateKey{x, best_j}).second) {
      res.cycle_detected = true;
      continue;
    }

    bool first_exclusion = true;
    while (!over_budget()) {
      while (x.size() > 2 && !over_budget()) {
        const TermIndex weakest = engine.least_significant_term(x);
        if (first_exclusion && weakest == added) break;
        Subset reduced = subset_minus(x, weakest);
        const double j_reduced = engine.J(reduced);
        if (j_reduced <= best_j[reduced.size()] + kImprovementEps) break;
        best[reduced.size()] = reduced;
        best_j[reduced.size()] = j_reduced;
        stored[reduced.size()] = true;
        x = std::move(reduced);
        first_exclusion = false;
        record(Phase::kBacktrack, true);
      }
      if (!swapping) break;

      // Swap each selected term for the most significant term of the rest.
      Subset best_swap;
      double best_swap_j = -1.0;
      for (TermIndex t : x) {
        const Subset rest = subset_minus(x, t);
        Subset cand = subset_union(rest, engine.most_significant_term(rest));
        const double jc = engine.J(cand);
        if (jc > best_swap_j + kTieTolerance * std::abs(best_swap_j)) {
          best_swap_j = jc;
          best_swap = std::move(cand);
        }
      }
      const std::size_t k_now = x.size();
      if (best_swap_j > best_j[k_now] + kImprovementEps) {
        x = std::move(best_swap);
        best[k_now] = x;
        best_j[k_now] = best_swap_j;
        record(Phase::kSwap, true);
        if (k_now > 2) continue;
      }
      break;
    }
  }

  if (stored[xi]) {
    res.subset = TermSubset{best[xi], best_j[xi]};
  } else {
    res.subset = TermSubset{x, engine.J(x)};
  }
  return res;
}

}  // namespace

SearchResult ofr_err(CriterionEngine& engine, const SearchConfig& config) {
  check_xi(engine, config, 1);
  SearchResult res;
  res.algorithm = Algorithm::kOfr;
  Subset x;
  double j_prev = 0.0;
  while (x.size() < config.xi) {
    x = subset_union(x, engine.most_significant_term(x));
    const double j = engine.J(x);
    if (j - j_prev <= kImprovementEps) ++res.zero_gain_additions;
    j_prev = j;
    TraceStep s;
    s.phase = Phase::kForward;
    s.xi_step = x.size();
    s.subset = x;
    s.J = j;
    s.accepted = true;
    res.trace.add(std::move(s));
  }
  res.subset = TermSubset{x, j_prev};
  return res;
}

SearchResult osf_search(CriterionEngine& engine, const SearchConfig& config) {
  return floating_search(engine, config, false);
}

SearchResult oif_search(CriterionEngine& engine, const SearchConfig& config) {
  return floating_search(engine, config, true);
}

SearchResult o2s_search(CriterionEngine& engine, const SearchConfig& config) {
  check_xi(engine, config, 2);
  const std::size_t xi = config.xi;
  const std::size_t n = engine.num_terms();
  SearchResult res;
  res.algorithm = Algorithm::kO2s;
  res.max_depth = config.max_depth.value_or(default_max_depth(xi, n, config.max_depth_fraction));
  if (res.max_depth < 1) throw Error(ErrorKind::kConfig, "maximum search depth must be at least 1");

  Subset x;
  for (std::size_t i = 0; i < xi; ++i) x = subset_union(x, engine.most_significant_term(x));
  double jx = engine.J(x);

  std::size_t depth = 1;
  bool f1 = false, f2 = false;
  auto record = [&](Phase phase, const Subset& s, double j, bool accepted, bool mid, std::size_t o) {
    TraceStep t;
    t.phase = phase;
    t.xi_step = s.size();
    t.subset = s;
    t.J = j;
    t.accepted = accepted;
    t.intermediate = mid;
    t.f1 = f1;
    t.f2 = f2;
    if (phase != Phase::kInit) t.depth = o;
    res.trace.add(std::move(t));
  };
  record(Phase::kInit, x, jx, true, false, 0);

  auto over_budget = [&] {
    if (res.trace.steps.size() >= config.step_budget) {
      res.budget_exceeded = true;
      return true;
    }
    return false;
  };

  while (depth <= res.max_depth && !over_budget()) {
    // Down swing: drop o weakest, then add o strongest.
    const std::size_t o_down = depth;
    if (o_down < xi) {
      const Subset weak = engine.least_significant_subset(o_down, x, config.subset_mode);
      Subset reduced;
      std::set_difference(x.begin(), x.end(), weak.begin(), weak.end(), std::back_inserter(reduced));
      record(Phase::kDownSwing, reduced, engine.J(reduced), false, true, o_down);
      const Subset strong = engine.most_significant_subset(o_down, reduced, config.subset_mode);
      Subset cand;
      std::set_union(reduced.begin(), reduced.end(), strong.begin(), strong.end(),
                     std::back_inserter(cand));
      const double jc = engine.J(cand);
      const bool improved = jc > jx + kImprovementEps;
      if (improved) {
        x = cand;
        jx = jc;
        f1 = false;
        depth = 1;
      } else {
        f1 = true;
      }
      record(Phase::kDownSwing, cand, jc, improved, false, o_down);
    } else {
      f1 = true;
    }
    if (f1 && f2 && ++depth > res.max_depth) break;
    if (over_budget()) break;

    // Up swing: add o strongest, then drop o weakest.
    const std::size_t o_up = depth;
    if (o_up <= n - xi) {
      const Subset strong = engine.most_significant_subset(o_up, x, config.subset_mode);
      Subset enlarged;
      std::set_union(x.begin(), x.end(), strong.begin(), strong.end(), std::back_inserter(enlarged));
      record(Phase::kUpSwing, enlarged, engine.J(enlarged), false, true, o_up);
      const Subset weak = engine.least_significant_subset(o_up, enlarged, config.subset_mode);
      Subset cand;
      std::set_difference(enlarged.begin(), enlarged.end(), weak.begin(), weak.end(),
                          std::back_inserter(cand));
      const double jc = engine.J(cand);
      const bool improved = jc > jx + kImprovementEps;
      if (improved) {
        x = cand;
        jx = jc;
        f2 = false;
        depth = 1;
      } else {
        f2 = true;
      }
      record(Phase::kUpSwing, cand, jc, improved, false, o_up);
    } else {
      f2 = true;
    }
    if (f1 && f2) ++depth;
  }

  res.subset = TermSubset{x, jx};
  return res;
}

SearchResult run_search(Algorithm algorithm, CriterionEngine& engine, const SearchConfig& config) {
  switch (algorithm) {
    case Algorithm::kOfr: return ofr_err(engine, config);
    case Algorithm::kOsf: return osf_search(engine, config);
    case Algorithm::kOif: return oif_search(engine, config);
    case Algorithm::kO2s: return o2s_search(engine, config);
  }
  throw Error(ErrorKind::kConfig, "unknown algorithm");
}

}  // namespace narx
