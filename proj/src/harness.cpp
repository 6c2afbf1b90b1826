#include "narx/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "json.hpp"
#include "narx/dataset_io.hpp"

namespace narx {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {
constexpr const char* kToolVersion = "0.1.0";
}

std::string to_string(OutcomeLabel label) {
  switch (label) {
    case OutcomeLabel::kExactFitting: return "ExactFitting";
    case OutcomeLabel::kOverFitting: return "OverFitting";
    case OutcomeLabel::kUnderFitting1: return "UnderFitting1";
    case OutcomeLabel::kUnderFitting2: return "UnderFitting2";
  }
  return "unknown";
}

Outcome classify_outcome(const std::vector<TermSpec>& found, const std::vector<TermSpec>& truth) {
  if (truth.empty()) throw Error(ErrorKind::kConfig, "ground truth has no terms");
  const std::set<TermSpec> f(found.begin(), found.end());
  const std::set<TermSpec> t(truth.begin(), truth.end());
  Outcome out;
  std::set_difference(f.begin(), f.end(), t.begin(), t.end(), std::back_inserter(out.spurious));
  std::set_difference(t.begin(), t.end(), f.begin(), f.end(), std::back_inserter(out.missing));
  const bool extra = !out.spurious.empty(), lack = !out.missing.empty();
  out.label = !extra && !lack ? OutcomeLabel::kExactFitting
              : !lack        ? OutcomeLabel::kOverFitting
              : !extra       ? OutcomeLabel::kUnderFitting1
                             : OutcomeLabel::kUnderFitting2;
  return out;
}

Outcome classify_outcome(const TermSubset& found, const TermSubset& truth,
                         const CandidateSet& candidates) {
  auto specs = [&](const TermSubset& s) {
    std::vector<TermSpec> v;
    for (TermIndex i : s.indices) v.push_back(candidates.terms.at(i));
    return v;
  };
  return classify_outcome(specs(found), specs(truth));
}

int FrequencyTable::at(std::size_t term_row, std::size_t xi) const {
  const auto it = std::find(xis.begin(), xis.end(), xi);
  if (it == xis.end()) throw Error(ErrorKind::kDomain, "cardinality not in table");
  return tau.at(term_row)[static_cast<std::size_t>(it - xis.begin())];
}

bool FrequencyTable::always_from(std::size_t term_row, std::size_t from_xi) const {
  for (std::size_t c = 0; c < xis.size(); ++c) {
    if (xis[c] >= from_xi && !tau.at(term_row)[c]) return false;
  }
  return true;
}

FrequencyTable term_frequency(const SweepReport& report, const std::vector<TermSpec>& terms) {
  const CandidateSet& cands = report.candidates();
  FrequencyTable t;
  t.terms = terms;
  std::vector<TermIndex> idx;
  for (const TermSpec& term : terms) idx.push_back(cands.index_of(term));
  for (const SweepEntry& e : report.entries) t.xis.push_back(e.xi);
  t.tau.assign(terms.size(), std::vector<int>(t.xis.size(), 0));
  for (std::size_t c = 0; c < report.entries.size(); ++c) {
    const SweepEntry& e = report.entries[c];
    if (!e.ok) continue;
    for (std::size_t r = 0; r < idx.size(); ++r) t.tau[r][c] = subset_contains(e.subset.indices, idx[r]) ? 1 : 0;
  }
  return t;
}

void write_frequency_csv(std::ostream& os, const FrequencyTable& table) {
  os << "term";
  for (std::size_t xi : table.xis) os << ",xi" << xi;
  os << '\n';
  for (std::size_t r = 0; r < table.terms.size(); ++r) {
    os << '"' << table.terms[r].str() << '"';
    for (int v : table.tau[r]) os << ',' << v;
    os << '\n';
  }
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfig, m); };
  if (system.has_value() == dataset.has_value()) fail("exactly one of system or dataset is required");
  if (xi) {
    if (*xi < 1) fail("xi must be positive");
  } else if (xi_min > xi_max) {
    fail("xi_min " + std::to_string(xi_min) + " exceeds xi_max " + std::to_string(xi_max));
  }
  const std::size_t floor = algorithm == Algorithm::kOfr ? 1 : 2;
  if (lo() < floor) fail("cardinality must be at least " + std::to_string(floor) + " for " + to_string(algorithm));
  if (seeds.empty()) fail("at least one seed is required");
  if (!(max_depth_fraction > 0.0 && max_depth_fraction <= 1.0)) fail("max_depth_fraction must lie in (0, 1]");
  if (max_depth && *max_depth < 1) fail("max_depth must be at least 1");
  if (step_budget == 0) fail("step_budget must be positive");
  if (length && split && *split >= *length) fail("split must be below length");
  if (output.empty()) fail("output directory is empty");
  criterion.validate();
  if (spec) spec->validate();
  if (system) builtin_system(*system);
  if (truth) {
    if (truth->empty()) fail("truth lists no terms");
    for (const auto& t : *truth) parse_term(t);
  }
}

namespace {

SubsetMode parse_subset_mode(const std::string& s) {
  if (s == "sequential") return SubsetMode::kSequential;
  if (s == "exhaustive") return SubsetMode::kExhaustive;
  throw Error(ErrorKind::kConfig, "unknown subset mode '" + s + "'");
}

std::string to_string(SubsetMode m) { return m == SubsetMode::kSequential ? "sequential" : "exhaustive"; }

json spec_json(const ModelSpec& s) { return {{"n_u", s.n_u}, {"n_y", s.n_y}, {"n_l", s.n_l}}; }

ModelSpec spec_from_json(const json& j) {
  ModelSpec s{j.at("n_u").get<int>(), j.at("n_y").get<int>(), j.at("n_l").get<int>()};
  s.validate();
  return s;
}

}  // namespace

void apply_config_json(ExperimentConfig& c, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (v.is_null()) {
        // Null clears an optional setting, as written by config_to_json.
        if (key == "system") c.system.reset();
        else if (key == "dataset") c.dataset.reset();
        else if (key == "model_spec") c.spec.reset();
        else if (key == "truth") c.truth.reset();
        else if (key == "xi") c.xi.reset();
        else if (key == "length") c.length.reset();
        else if (key == "split") c.split.reset();
        else if (key == "max_depth") c.max_depth.reset();
        else throw Error(ErrorKind::kConfig, "config key '" + key + "' cannot be null");
        continue;
      }
      if (key == "system") c.system = v.get<std::string>();
      else if (key == "dataset") c.dataset = fs::path(v.get<std::string>());
      else if (key == "model_spec") c.spec = spec_from_json(v);
      else if (key == "truth") c.truth = v.get<std::vector<std::string>>();
      else if (key == "algorithm") c.algorithm = parse_algorithm(v.get<std::string>());
      else if (key == "xi_min") c.xi_min = v.get<std::size_t>();
      else if (key == "xi_max") c.xi_max = v.get<std::size_t>();
      else if (key == "xi") c.xi = v.get<std::size_t>();
      else if (key == "criterion") c.criterion.kind = parse_criterion(v.get<std::string>());
      else if (key == "rho") c.criterion.rho = v.get<double>();
      else if (key == "prediction") c.criterion.prediction = parse_prediction_mode(v.get<std::string>());
      else if (key == "seeds") c.seeds = v.is_array() ? v.get<std::vector<std::uint64_t>>()
                                                       : std::vector<std::uint64_t>{v.get<std::uint64_t>()};
      else if (key == "seed") c.seeds = {v.get<std::uint64_t>()};
      else if (key == "length") c.length = v.get<std::size_t>();
      else if (key == "split") c.split = v.get<std::size_t>();
      else if (key == "max_depth_fraction") c.max_depth_fraction = v.get<double>();
      else if (key == "max_depth") c.max_depth = v.get<std::size_t>();
      else if (key == "subset_mode") c.subset_mode = parse_subset_mode(v.get<std::string>());
      else if (key == "step_budget") c.step_budget = v.get<std::size_t>();
      else if (key == "workers") c.workers = v.get<unsigned>();
      else if (key == "output") c.output = fs::path(v.get<std::string>());
      else throw Error(ErrorKind::kSchema, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("config value has the wrong type: ") + e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c;
  apply_config_json(c, ss.str());
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["system"] = c.system ? json(*c.system) : json(nullptr);
  j["dataset"] = c.dataset ? json(c.dataset->string()) : json(nullptr);
  j["model_spec"] = c.spec ? spec_json(*c.spec) : json(nullptr);
  j["truth"] = c.truth ? json(*c.truth) : json(nullptr);
  j["algorithm"] = to_string(c.algorithm);
  j["xi_min"] = c.lo();
  j["xi_max"] = c.hi();
  j["criterion"] = to_string(c.criterion.kind);
  j["rho"] = c.criterion.rho;
  j["prediction"] = to_string(c.criterion.prediction);
  j["seeds"] = c.seeds;
  j["length"] = c.length ? json(*c.length) : json(nullptr);
  j["split"] = c.split ? json(*c.split) : json(nullptr);
  j["max_depth_fraction"] = c.max_depth_fraction;
  j["max_depth"] = c.max_depth ? json(*c.max_depth) : json(nullptr);
  j["subset_mode"] = to_string(c.subset_mode);
  j["step_budget"] = c.step_budget;
  j["workers"] = c.workers;
  j["output"] = c.output.string();
  return j.dump(2);
}

int ExperimentResult::exit_status() const {
  bool budget = false;
  for (const RunSummary& r : runs) {
    if (!r.ok) return r.error ? exit_code(*r.error) : 3;
    budget = budget || r.budget_exceeded;
  }
  return budget ? exit_code(ErrorKind::kBudget) : 0;
}

namespace {

struct Problem {
  Dataset data;
  CandidateSet candidates;
  std::optional<BenchmarkSystem> system;
  std::optional<std::vector<TermSpec>> truth;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, path.string() + ": " + e.what());
  }
}

Problem prepare(const ExperimentConfig& c, std::uint64_t seed) {
  Problem p;
  std::optional<ModelSpec> spec = c.spec;
  if (c.system) {
    p.system = builtin_system(*c.system);
    p.data = generate_dataset(*p.system, seed, c.length, c.split);
    if (!spec) spec = p.system->spec;
    if (p.system->model) p.truth = p.system->model->terms;
  } else {
    p.data = load_dataset(*c.dataset, c.split);
    fs::path side = *c.dataset;
    side.replace_extension(".json");
    if (fs::exists(side)) {
      const json j = read_json(side);
      try {
        if (!spec && j.contains("model_spec")) spec = spec_from_json(j.at("model_spec"));
        if (j.contains("true_terms")) {
          std::vector<TermSpec> t;
          for (const auto& s : j.at("true_terms")) t.push_back(parse_term(s.get<std::string>()));
          p.truth = t;
        }
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kSchema, side.string() + ": " + e.what());
      }
    }
    if (!spec) throw Error(ErrorKind::kConfig, "no model spec given and none recorded with the dataset");
  }
  if (c.truth) {
    std::vector<TermSpec> t;
    for (const auto& s : *c.truth) t.push_back(parse_term(s));
    p.truth = t;
  }
  p.candidates = enumerate_terms(*spec);
  if (p.truth) {
    for (const TermSpec& t : *p.truth) {
      if (p.candidates.find(t) == p.candidates.size()) {
        throw Error(ErrorKind::kSchema, "true term " + t.str() + " is not a candidate");
      }
    }
  }
  return p;
}

json terms_json(const std::vector<TermSpec>& terms) {
  json a = json::array();
  for (const auto& t : terms) a.push_back(t.str());
  return a;
}

json metadata_json(const ExperimentConfig& c, std::uint64_t seed, const Problem* p) {
  json j;
  j["tool"] = "narxid";
  j["version"] = kToolVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
#if defined(__VERSION__)
  j["compiler"] = __VERSION__;
#endif
  j["seed"] = seed;
  j["config"] = json::parse(config_to_json(c));
  if (p) {
    j["samples"] = p->data.size();
    j["split_index"] = p->data.split_index;
    j["candidates"] = p->candidates.size();
    j["model_spec"] = spec_json(p->candidates.spec);
  }
  j["defaults"] = {
      {"rank_tolerance", kRankTolerance},
      {"improvement_epsilon", kImprovementEps},
      {"tie_tolerance", kTieTolerance},
      {"tie_rule", "lowest candidate index"},
      {"exhaustive_budget", kExhaustiveBudget},
      {"criterion_partition", "estimation rows"},
      {"error_partition", "validation rows"},
      {"order_rule", "arg-min, smallest xi on ties"},
      {"backtrack_floor", "k > 2"},
      {"o2s_depth_default", "ceil(fraction * min(xi, n - xi))"},
      {"o2s_flag_reset", "flags cleared only on improvement"},
      {"rng", "mt19937_64 seeded by seed_seq(seed_lo, seed_hi, stream, tag)"},
  };
  return j;
}

void write_error(const fs::path& dir, const Error& e, const std::string& stage) {
  json j;
  j["kind"] = to_string(e.kind());
  j["stage"] = stage;
  j["message"] = e.what();
  j["exit_code"] = exit_code(e.kind());
  write_file(dir / "error.json", j.dump(2) + "\n");
}

RunSummary run_seed(const ExperimentConfig& c, std::uint64_t seed, const fs::path& dir, unsigned workers) {
  RunSummary r;
  r.seed = seed;
  r.directory = dir;
  fs::create_directories(dir);
  std::string stage = "data";
  std::optional<Problem> p;
  try {
    p = prepare(c, seed);
    save_dataset(dir / "dataset.csv", p->data, p->system ? &*p->system : nullptr);

    stage = "sweep";
    SweepOptions opt;
    opt.search.max_depth_fraction = c.max_depth_fraction;
    opt.search.max_depth = c.max_depth;
    opt.search.subset_mode = c.subset_mode;
    opt.search.step_budget = c.step_budget;
    opt.workers = workers;
    const SweepReport rep = sweep(c.algorithm, p->candidates, p->data, c.lo(), c.hi(), c.criterion, opt);

    stage = "export";
    {
      std::ofstream tr(dir / "trace.jsonl");
      for (const SweepEntry& e : rep.entries) write_trace_jsonl(tr, e.trace, p->candidates, e.xi);
      std::ofstream csv(dir / "sweep.csv");
      write_sweep_csv(csv, rep);
      std::ofstream js(dir / "sweep.json");
      write_sweep_json(js, rep);
      if (!tr || !csv || !js) throw Error(ErrorKind::kIo, "cannot write run bundle in " + dir.string());
    }
    for (const SweepEntry& e : rep.entries) r.budget_exceeded = r.budget_exceeded || e.budget_exceeded;

    json out;
    out["seed"] = seed;
    out["algorithm"] = to_string(c.algorithm);
    out["criterion"] = to_string(rep.criterion.kind);
    out["boundary_flag"] = rep.boundary;
    out["budget_exceeded"] = r.budget_exceeded;
    std::vector<std::size_t> failed;
    for (const SweepEntry& e : rep.entries) {
      if (!e.ok) failed.push_back(e.xi);
    }
    out["failed_xi"] = failed;
    const SweepEntry* best = rep.chosen();
    if (!best) throw Error(ErrorKind::kInstability, "no cardinality produced a usable model");
    r.chosen_xi = best->xi;
    for (TermIndex i : best->subset.indices) r.selected.push_back(p->candidates.terms[i]);
    out["chosen_xi"] = best->xi;
    out["terms"] = terms_json(r.selected);
    std::vector<double> theta(best->fit.theta.data(), best->fit.theta.data() + best->fit.theta.size());
    out["coefficients"] = theta;
    out["J"] = best->J;
    out["E"] = best->E;
    if (p->truth) {
      r.outcome = classify_outcome(r.selected, *p->truth);
      out["label"] = to_string(r.outcome->label);
      out["spurious"] = terms_json(r.outcome->spurious);
      out["missing"] = terms_json(r.outcome->missing);
      out["truth"] = terms_json(*p->truth);
    } else {
      out["label"] = nullptr;
    }
    write_file(dir / "outcome.json", out.dump(2) + "\n");
    r.ok = true;
  } catch (const Error& e) {
    r.error = e.kind();
    r.message = e.what();
    write_error(dir, e, stage);
  } catch (const std::exception& e) {
    const Error wrapped(ErrorKind::kIo, e.what());
    r.error = wrapped.kind();
    r.message = e.what();
    write_error(dir, wrapped, stage);
  }
  write_file(dir / "metadata.json", metadata_json(c, seed, p ? &*p : nullptr).dump(2) + "\n");
  return r;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult res;
  res.runs.resize(c.seeds.size());
  const unsigned hw = c.workers ? c.workers : std::max(1u, std::thread::hardware_concurrency());
  auto dir_for = [&](std::size_t i) {
    return c.seeds.size() == 1 ? c.output : c.output / ("seed-" + std::to_string(c.seeds[i]));
  };
  if (c.seeds.size() == 1 || hw == 1) {
    for (std::size_t i = 0; i < c.seeds.size(); ++i) res.runs[i] = run_seed(c, c.seeds[i], dir_for(i), hw);
  } else {
    // Seeds in parallel, each sweep single-threaded.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(hw, static_cast<unsigned>(c.seeds.size()));
    for (unsigned w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < c.seeds.size();) {
          res.runs[i] = run_seed(c, c.seeds[i], dir_for(i), 1);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  if (c.seeds.size() > 1) {
    json s = json::array();
    for (const RunSummary& r : res.runs) {
      json e;
      e["seed"] = r.seed;
      e["directory"] = r.directory.filename().string();
      e["ok"] = r.ok;
      e["chosen_xi"] = r.chosen_xi ? json(*r.chosen_xi) : json(nullptr);
      e["label"] = r.outcome ? json(to_string(r.outcome->label)) : json(nullptr);
      if (!r.ok) e["error"] = r.message;
      s.push_back(std::move(e));
    }
    write_file(c.output / "summary.json", s.dump(2) + "\n");
  }
  return res;
}

void write_run_report(std::ostream& os, const fs::path& dir) {
  if (fs::exists(dir / "error.json")) {
    const json e = read_json(dir / "error.json");
    os << "run failed during " << e.value("stage", "?") << ": " << e.value("message", "?") << '\n';
    return;
  }
  std::ifstream sj(dir / "sweep.json");
  if (!sj) throw Error(ErrorKind::kIo, "no sweep.json in " + dir.string());
  const SweepReport rep = read_sweep_json(sj);
  const json out = read_json(dir / "outcome.json");
  os << "algorithm " << to_string(rep.algorithm) << ", interval [" << rep.xi_min << ", " << rep.xi_max
     << "], " << rep.candidates().size() << " candidates, N_v " << rep.n_v << "\n\n";
  os << std::setw(4) << "xi" << std::setw(12) << "J" << std::setw(14) << "E" << std::setw(12) << "BIC"
     << '\n';
  for (const SweepEntry& e : rep.entries) {
    os << std::setw(4) << e.xi;
    if (!e.ok) {
      os << "  failed: " << e.error << '\n';
      continue;
    }
    os << std::setw(12) << std::fixed << std::setprecision(6) << e.J << std::setw(14) << std::scientific
       << std::setprecision(4) << e.E << std::setw(12) << std::fixed << std::setprecision(2) << e.bic
       << (rep.chosen_xi && *rep.chosen_xi == e.xi ? "  <" : "") << '\n';
  }
  os.unsetf(std::ios::floatfield);
  os << "\nchosen xi " << out.value("chosen_xi", 0) << (rep.boundary ? " (at interval boundary)" : "")
     << '\n';
  if (out.contains("terms")) {
    const auto terms = out.at("terms");
    const auto theta = out.at("coefficients");
    for (std::size_t i = 0; i < terms.size(); ++i) {
      os << "  " << std::setw(14) << std::setprecision(6) << theta[i].get<double>() << "  "
         << terms[i].get<std::string>() << '\n';
    }
  }
  if (!out.at("label").is_null()) os << "outcome " << out.at("label").get<std::string>() << '\n';
}

}  // namespace narx
