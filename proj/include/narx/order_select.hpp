#pragma once

#include <cstddef>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "narx/data_kit.hpp"
#include "narx/error.hpp"
#include "narx/ortho.hpp"
#include "narx/search.hpp"
#include "narx/term_space.hpp"

namespace narx {

enum class CriterionKind { kAic, kBic, kFpe, kLilc };
enum class PredictionMode { kOneStep, kFreeRun };

std::string to_string(CriterionKind k);
CriterionKind parse_criterion(const std::string& name);
std::string to_string(PredictionMode m);
PredictionMode parse_prediction_mode(const std::string& name);

// Free-run prediction left the finite range at `sample`.
class PredictionDiverged : public Error {
 public:
  PredictionDiverged(std::size_t sample, double partial_e);

  std::size_t sample() const noexcept { return sample_; }
  // Mean squared error over the validation samples before divergence.
  double partial_e() const noexcept { return partial_e_; }

 private:
  std::size_t sample_;
  double partial_e_;
};

struct CriterionSpec {
  CriterionKind kind = CriterionKind::kBic;
  double rho = 2.0;  // AIC penalty weight
  PredictionMode prediction = PredictionMode::kOneStep;

  void validate() const;
};

struct CriterionValue {
  double value = 0.0;
  bool log_of_zero = false;  // E == 0; value is -inf
};

// All four criteria share N_v ln E; they differ in the penalty on xi.
CriterionValue info_criterion(double e, std::size_t xi, std::size_t n_v, const CriterionSpec& spec);

// Mean squared validation error of `model` over samples at or after the
// split that have full lag history. Free-run feeds predictions back from the
// split onwards, with measured outputs as the initial history.
double prediction_error(const FittedModel& model, const CandidateSet& candidates,
                        const Dataset& data, PredictionMode mode = PredictionMode::kOneStep);
// Number of validation samples prediction_error averages over.
std::size_t validation_count(const CandidateSet& candidates, const Dataset& data);

struct SweepEntry {
  std::size_t xi = 0;
  bool ok = false;
  std::string error;  // set when !ok
  TermSubset subset;
  FittedModel fit;
  double J = 0.0;
  double E = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  double fpe = std::numeric_limits<double>::quiet_NaN();
  double lilc = std::numeric_limits<double>::quiet_NaN();
  bool budget_exceeded = false;
  bool cycle_detected = false;
  std::size_t zero_gain_additions = 0;
  std::size_t max_depth = 0;
  SearchTrace trace;

  double criterion(CriterionKind k) const;
};

struct SweepOptions {
  SearchConfig search;     // xi is overwritten per entry
  unsigned workers = 0;    // 0: hardware concurrency
};

struct SweepReport {
  struct Context;

  Algorithm algorithm = Algorithm::kOsf;
  CriterionSpec criterion;
  std::size_t xi_min = 0, xi_max = 0;
  std::size_t n_v = 0;
  std::vector<SweepEntry> entries;  // entries[i].xi == xi_min + i
  std::optional<std::size_t> chosen_xi;
  bool boundary = false;            // arg-min sits at xi_max
  std::size_t searches_run = 0;     // searches executed for this report, cumulative
  std::shared_ptr<const Context> context;

  const SweepEntry& at(std::size_t xi) const;
  const CandidateSet& candidates() const;
  const SweepEntry* chosen() const;
};

// Runs the search once per xi in [xi_min, xi_max] on the estimation rows,
// fits coefficients, scores the validation rows and picks the arg-min of the
// chosen criterion (ties: smallest xi). Per-xi failures are recorded.
SweepReport sweep(Algorithm algorithm, const CandidateSet& candidates, const Dataset& data,
                  std::size_t xi_min, std::size_t xi_max, const CriterionSpec& crit = {},
                  const SweepOptions& options = {});

// Adds xi in (xi_max, new_xi_max] and reselects; existing entries are kept.
SweepReport extend_interval(const SweepReport& report, std::size_t new_xi_max);

// Recomputes chosen_xi and the boundary flag for another criterion.
void select_order(SweepReport& report, const CriterionSpec& crit);

// xi,J,E,AIC,BIC,FPE,LILC,boundary_flag
void write_sweep_csv(std::ostream& os, const SweepReport& report);
// Full subsets (term strings and indices) and coefficients.
void write_sweep_json(std::ostream& os, const SweepReport& report);
// Reads write_sweep_json output; the result carries candidates but no data,
// so it cannot be extended.
SweepReport read_sweep_json(std::istream& is);

}  // namespace narx
