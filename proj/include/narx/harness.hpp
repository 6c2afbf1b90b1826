#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "narx/data_kit.hpp"
#include "narx/error.hpp"
#include "narx/order_select.hpp"
#include "narx/search.hpp"
#include "narx/term_space.hpp"

namespace narx {

enum class OutcomeLabel { kExactFitting, kOverFitting, kUnderFitting1, kUnderFitting2 };

std::string to_string(OutcomeLabel label);

struct Outcome {
  OutcomeLabel label = OutcomeLabel::kExactFitting;
  std::vector<TermSpec> spurious;  // found but not true
  std::vector<TermSpec> missing;   // true but not found
};

Outcome classify_outcome(const std::vector<TermSpec>& found, const std::vector<TermSpec>& truth);
Outcome classify_outcome(const TermSubset& found, const TermSubset& truth,
                         const CandidateSet& candidates);

// tau[i][c] == 1 iff terms[i] is in the subset selected at xis[c].
struct FrequencyTable {
  std::vector<TermSpec> terms;
  std::vector<std::size_t> xis;
  std::vector<std::vector<int>> tau;

  int at(std::size_t term_row, std::size_t xi) const;
  // Row is all ones from `from_xi` to the end of the sweep.
  bool always_from(std::size_t term_row, std::size_t from_xi) const;
};

// Failed sweep entries give all-zero columns.
FrequencyTable term_frequency(const SweepReport& report, const std::vector<TermSpec>& terms);
void write_frequency_csv(std::ostream& os, const FrequencyTable& table);

struct ExperimentConfig {
  std::optional<std::string> system;                 // builtin name
  std::optional<std::filesystem::path> dataset;      // CSV written by save_dataset
  std::optional<ModelSpec> spec;                     // defaults to the system's
  std::optional<std::vector<std::string>> truth;     // term strings, for external data
  Algorithm algorithm = Algorithm::kOif;
  std::size_t xi_min = 2;
  std::size_t xi_max = 20;
  std::optional<std::size_t> xi;                     // fixed cardinality, overrides the interval
  CriterionSpec criterion;
  std::vector<std::uint64_t> seeds{1};
  std::optional<std::size_t> length;
  std::optional<std::size_t> split;
  double max_depth_fraction = 0.25;
  std::optional<std::size_t> max_depth;
  SubsetMode subset_mode = SubsetMode::kSequential;
  std::size_t step_budget = 10000;
  unsigned workers = 0;
  std::filesystem::path output = "runs/latest";

  // Interval after applying `xi`.
  std::size_t lo() const { return xi.value_or(xi_min); }
  std::size_t hi() const { return xi.value_or(xi_max); }
  void validate() const;
};

// Overlays keys from a JSON document onto `config`. Unknown keys are schema errors.
void apply_config_json(ExperimentConfig& config, const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

struct RunSummary {
  std::uint64_t seed = 0;
  std::filesystem::path directory;
  bool ok = false;
  std::optional<ErrorKind> error;
  std::string message;
  bool budget_exceeded = false;
  std::optional<std::size_t> chosen_xi;
  std::optional<Outcome> outcome;
  std::vector<TermSpec> selected;
};

struct ExperimentResult {
  std::vector<RunSummary> runs;

  // 0 when every run succeeded; otherwise the status of the first failure,
  // with budget overruns reported only when nothing else failed.
  int exit_status() const;
};

// Validates the config, then for each seed generates or loads the data, runs
// the sweep and writes the run bundle. Several seeds get one subdirectory each.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Human-readable summary of a run directory's sweep and outcome records.
void write_run_report(std::ostream& os, const std::filesystem::path& run_dir);

}  // namespace narx
