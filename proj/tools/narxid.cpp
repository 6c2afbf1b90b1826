// narxid: simulate benchmark systems and identify NARX structures.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "narx/dataset_io.hpp"
#include "narx/harness.hpp"

using namespace narx;

namespace {

std::vector<std::string> split_terms(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string t;
  while (std::getline(ss, t, ';')) {
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<TermSpec> parse_terms(const std::vector<std::string>& names) {
  std::vector<TermSpec> v;
  for (const auto& n : names) v.push_back(parse_term(n));
  return v;
}

// Options shared by identify and sweep; only flags actually given override
// the config file.
struct RunFlags {
  std::string config, system, data, algo, criterion, prediction, subset_mode, truth, out, spec;
  std::vector<std::uint64_t> seeds;
  std::size_t xi = 0, xi_min = 0, xi_max = 0, length = 0, split = 0, max_depth = 0, step_budget = 0;
  double rho = 0, fraction = 0;
  unsigned workers = 0;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app, bool fixed_xi) {
    opts["config"] = app->add_option("--config", config, "JSON experiment config");
    opts["system"] = app->add_option("--system", system, "builtin system (S1..S8, duffing)");
    opts["data"] = app->add_option("--data", data, "dataset CSV instead of a builtin system");
    opts["spec"] = app->add_option("--spec", spec, "model lags and degree as n_u,n_y,n_l");
    opts["algo"] = app->add_option("--algo", algo, "ofr, osf, oif or o2s");
    opts["seed"] = app->add_option("--seed,--seeds", seeds, "generator seed(s)");
    if (fixed_xi) opts["xi"] = app->add_option("--xi", xi, "fixed cardinality");
    opts["xi_min"] = app->add_option("--xi-min", xi_min, "lower end of the cardinality interval");
    opts["xi_max"] = app->add_option("--xi-max", xi_max, "upper end of the cardinality interval");
    opts["criterion"] = app->add_option("--criterion", criterion, "AIC, BIC, FPE or LILC");
    opts["rho"] = app->add_option("--rho", rho, "AIC penalty weight");
    opts["prediction"] = app->add_option("--prediction", prediction, "one_step or free_run");
    opts["length"] = app->add_option("--length", length, "samples to generate");
    opts["split"] = app->add_option("--split", split, "first validation sample");
    opts["max_depth"] = app->add_option("--max-depth", max_depth, "O2S depth cap");
    opts["fraction"] = app->add_option("--max-depth-fraction", fraction, "O2S depth cap as a fraction");
    opts["subset_mode"] = app->add_option("--subset-mode", subset_mode, "sequential or exhaustive");
    opts["step_budget"] = app->add_option("--step-budget", step_budget, "search step cap");
    opts["workers"] = app->add_option("--workers", workers, "worker threads (0: all cores)");
    opts["truth"] = app->add_option("--truth", truth, "true terms separated by ';'");
    opts["out"] = app->add_option("--out", out, "output directory");
  }

  bool given(const std::string& k) const {
    auto it = opts.find(k);
    return it != opts.end() && it->second->count() > 0;
  }

  ExperimentConfig build() const {
    ExperimentConfig c;
    if (given("config")) c = load_config(config);
    if (given("system")) {
      c.system = system;
      c.dataset.reset();
    }
    if (given("data")) {
      c.dataset = data;
      c.system.reset();
    }
    if (given("spec")) {
      ModelSpec s;
      char comma1 = 0, comma2 = 0;
      std::istringstream is(spec);
      if (!(is >> s.n_u >> comma1 >> s.n_y >> comma2 >> s.n_l) || comma1 != ',' || comma2 != ',') {
        throw Error(ErrorKind::kConfig, "--spec expects n_u,n_y,n_l");
      }
      c.spec = s;
    }
    nlohmann::json overlay = nlohmann::json::object();
    if (given("algo")) overlay["algorithm"] = algo;
    if (given("xi")) overlay["xi"] = xi;
    if (given("xi_min")) overlay["xi_min"] = xi_min;
    if (given("xi_max")) overlay["xi_max"] = xi_max;
    if (given("criterion")) overlay["criterion"] = criterion;
    if (given("prediction")) overlay["prediction"] = prediction;
    if (given("subset_mode")) overlay["subset_mode"] = subset_mode;
    apply_config_json(c, overlay.dump());
    if (given("rho")) c.criterion.rho = rho;
    if (given("seed")) c.seeds = seeds;
    if (given("length")) c.length = length;
    if (given("split")) c.split = split;
    if (given("max_depth")) c.max_depth = max_depth;
    if (given("fraction")) c.max_depth_fraction = fraction;
    if (given("step_budget")) c.step_budget = step_budget;
    if (given("workers")) c.workers = workers;
    if (given("truth")) c.truth = split_terms(truth);
    if (given("out")) c.output = out;
    return c;
  }
};

int run(const ExperimentConfig& c) {
  const ExperimentResult res = run_experiment(c);
  for (const RunSummary& r : res.runs) {
    std::cout << "seed " << r.seed << ": ";
    if (!r.ok) {
      std::cout << "failed (" << to_string(*r.error) << "): " << r.message << '\n';
      continue;
    }
    std::cout << "xi=" << *r.chosen_xi;
    if (r.outcome) std::cout << " " << to_string(r.outcome->label);
    if (r.budget_exceeded) std::cout << " [step budget exceeded]";
    std::cout << "\n  ";
    for (std::size_t i = 0; i < r.selected.size(); ++i) std::cout << (i ? " + " : "") << r.selected[i].str();
    std::cout << "\n  -> " << r.directory.string() << '\n';
  }
  return res.exit_status();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NARX structure selection with orthogonal floating and oscillating searches"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "generate a benchmark dataset");
  std::string sim_system, sim_out = "dataset.csv";
  std::uint64_t sim_seed = 1;
  std::size_t sim_length = 0, sim_split = 0;
  sim->add_option("--system", sim_system, "builtin system")->required();
  sim->add_option("--seed", sim_seed, "generator seed");
  auto* sim_len_opt = sim->add_option("--length", sim_length, "samples");
  auto* sim_split_opt = sim->add_option("--split", sim_split, "first validation sample");
  sim->add_option("--out", sim_out, "CSV path; a .json sidecar is written next to it");

  RunFlags id_flags, sw_flags;
  auto* identify = app.add_subcommand("identify", "run one experiment (fixed xi or an interval)");
  id_flags.attach(identify, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "sweep a cardinality interval and select the order");
  sw_flags.attach(sweep_cmd, false);

  auto* classify = app.add_subcommand("classify", "compare a term set with the ground truth");
  std::string cl_found, cl_truth, cl_run, cl_system;
  classify->add_option("--found", cl_found, "identified terms separated by ';'");
  classify->add_option("--run", cl_run, "run directory (reads outcome.json)");
  classify->add_option("--truth", cl_truth, "true terms separated by ';'");
  classify->add_option("--system", cl_system, "take the truth from a builtin system");

  auto* freq = app.add_subcommand("freq", "term selection frequency over a sweep");
  std::string fq_sweep, fq_terms, fq_system;
  freq->add_option("--sweep", fq_sweep, "sweep.json from a run")->required();
  freq->add_option("--terms", fq_terms, "terms separated by ';'");
  freq->add_option("--system", fq_system, "use a builtin system's true terms");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  std::string rp_run;
  report->add_option("--run", rp_run, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      const BenchmarkSystem sys = builtin_system(sim_system);
      std::optional<std::size_t> len, split;
      if (sim_len_opt->count()) len = sim_length;
      if (sim_split_opt->count()) split = sim_split;
      const Dataset d = generate_dataset(sys, sim_seed, len, split);
      save_dataset(sim_out, d, &sys);
      std::cout << "wrote " << d.size() << " samples of " << sys.name << " to " << sim_out << '\n';
      return 0;
    }
    if (identify->parsed()) return run(id_flags.build());
    if (sweep_cmd->parsed()) return run(sw_flags.build());
    if (classify->parsed()) {
      std::vector<TermSpec> found, truth;
      if (!cl_run.empty()) {
        std::ifstream in(std::filesystem::path(cl_run) / "outcome.json");
        if (!in) throw Error(ErrorKind::kIo, "no outcome.json in " + cl_run);
        const auto j = nlohmann::json::parse(in);
        for (const auto& t : j.at("terms")) found.push_back(parse_term(t.get<std::string>()));
        if (j.contains("truth")) {
          for (const auto& t : j.at("truth")) truth.push_back(parse_term(t.get<std::string>()));
        }
      }
      if (!cl_found.empty()) found = parse_terms(split_terms(cl_found));
      if (!cl_truth.empty()) truth = parse_terms(split_terms(cl_truth));
      if (!cl_system.empty()) {
        const auto sys = builtin_system(cl_system);
        if (!sys.model) throw Error(ErrorKind::kConfig, cl_system + " has no polynomial ground truth");
        truth = sys.model->terms;
      }
      const Outcome o = classify_outcome(found, truth);
      std::cout << to_string(o.label) << '\n';
      for (const auto& t : o.spurious) std::cout << "  spurious " << t.str() << '\n';
      for (const auto& t : o.missing) std::cout << "  missing  " << t.str() << '\n';
      return 0;
    }
    if (freq->parsed()) {
      std::ifstream in(fq_sweep);
      if (!in) throw Error(ErrorKind::kIo, "cannot read " + fq_sweep);
      const SweepReport rep = read_sweep_json(in);
      std::vector<TermSpec> terms;
      if (!fq_terms.empty()) terms = parse_terms(split_terms(fq_terms));
      if (!fq_system.empty()) {
        const auto sys = builtin_system(fq_system);
        if (sys.model) terms = sys.model->terms;
      }
      if (terms.empty()) throw Error(ErrorKind::kConfig, "give --terms or --system");
      write_frequency_csv(std::cout, term_frequency(rep, terms));
      return 0;
    }
    if (report->parsed()) {
      write_run_report(std::cout, rp_run);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "narxid: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "narxid: schema: " << e.what() << '\n';
    return exit_code(ErrorKind::kSchema);
  }
  return 0;
}
