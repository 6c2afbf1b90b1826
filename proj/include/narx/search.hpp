#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "narx/ortho.hpp"
#include "narx/term_space.hpp"

namespace narx {

enum class Algorithm { kOfr, kOsf, kOif, kO2s };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

enum class Phase { kInit, kForward, kBacktrack, kSwap, kDownSwing, kUpSwing };

std::string to_string(Phase p);

struct TraceStep {
  std::size_t step = 0;
  Phase phase = Phase::kForward;
  std::size_t xi_step = 0;  // cardinality of `subset`
  Subset subset;
  double J = 0.0;
  // Forward: the new subset beat the stored best (false: restored it).
  // Backtrack/swap/swings: the candidate improved and was kept.
  bool accepted = false;
  // Swing midpoint (xi - o or xi + o terms); never an accepted subset.
  bool intermediate = false;
  std::optional<int> f1, f2;
  std::optional<std::size_t> depth;
  // Stored best J for xi_step after this step (floating searches).
  std::optional<double> best_J;
};

struct SearchTrace {
  std::vector<TraceStep> steps;

  TraceStep& add(TraceStep s) {
    s.step = steps.size() + 1;
    steps.push_back(std::move(s));
    return steps.back();
  }
};

struct SearchConfig {
  std::size_t xi = 2;
  double max_depth_fraction = 0.25;
  std::optional<std::size_t> max_depth;  // overrides the fraction
  SubsetMode subset_mode = SubsetMode::kSequential;
  std::size_t step_budget = 10000;
};

struct SearchResult {
  Algorithm algorithm = Algorithm::kOfr;
  TermSubset subset;
  SearchTrace trace;
  bool budget_exceeded = false;   // result is partial
  bool cycle_detected = false;    // repeated state forced a forward step
  std::size_t zero_gain_additions = 0;
  std::size_t max_depth = 0;      // O2S only
};

// ceil(fraction * min(xi, n - xi)), at least 1.
std::size_t default_max_depth(std::size_t xi, std::size_t n, double fraction = 0.25);

// Greedy forward selection, no removals.
SearchResult ofr_err(CriterionEngine& engine, const SearchConfig& config);
// Floating forward selection with conditional backtracking.
SearchResult osf_search(CriterionEngine& engine, const SearchConfig& config);
// OSF plus the term swapping phase.
SearchResult oif_search(CriterionEngine& engine, const SearchConfig& config);
// Oscillating search: down and up swings of adaptive depth around xi terms.
SearchResult o2s_search(CriterionEngine& engine, const SearchConfig& config);

SearchResult run_search(Algorithm algorithm, CriterionEngine& engine, const SearchConfig& config);

// One JSON object per step: step, phase, xi_step, subset, J, flags, depth.
void write_trace_jsonl(std::ostream& os, const SearchTrace& trace, const CandidateSet& candidates,
                       std::optional<std::size_t> xi_target = std::nullopt);
// step,phase,xi_step,J,accepted,f1,f2,depth,subset
void write_trace_csv(std::ostream& os, const SearchTrace& trace, const CandidateSet& candidates);

std::vector<std::string> subset_terms(const Subset& subset, const CandidateSet& candidates);

}  // namespace narx
