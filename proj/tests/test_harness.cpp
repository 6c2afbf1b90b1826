#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "narx/dataset_io.hpp"
#include "narx/harness.hpp"

using namespace narx;
namespace fs = std::filesystem;

namespace {

std::vector<TermSpec> terms(std::initializer_list<const char*> names) {
  std::vector<TermSpec> v;
  for (const char* n : names) v.push_back(parse_term(n));
  return v;
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("narx-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NARXID_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("outcome labels") {
  const auto truth = terms({"y(k-1)", "u(k-1)", "u(k-1)^2"});
  CHECK(classify_outcome(truth, truth).label == OutcomeLabel::kExactFitting);

  const Outcome over = classify_outcome(terms({"u(k-1)^2", "y(k-1)", "u(k-1)", "u(k-3)"}), truth);
  CHECK(over.label == OutcomeLabel::kOverFitting);
  REQUIRE(over.spurious.size() == 1);
  CHECK(over.spurious[0].str() == "u(k-3)");
  CHECK(over.missing.empty());

  const Outcome under1 = classify_outcome(terms({"y(k-1)", "u(k-1)"}), truth);
  CHECK(under1.label == OutcomeLabel::kUnderFitting1);
  CHECK(under1.missing.size() == 1);

  const Outcome under2 = classify_outcome(terms({"y(k-1)", "u(k-1)", "y(k-2)"}), truth);
  CHECK(under2.label == OutcomeLabel::kUnderFitting2);
  CHECK(under2.spurious.size() == 1);
  CHECK(under2.missing.size() == 1);

  CHECK(to_string(OutcomeLabel::kUnderFitting2) == "UnderFitting2");
  CHECK_THROWS_AS(classify_outcome(truth, {}), Error);
}

TEST_CASE("term frequency over a sweep") {
  const BenchmarkSystem s3 = builtin_system("S3");
  const CandidateSet c = enumerate_terms(s3.spec);
  const Dataset d = generate_dataset(s3, 5);
  const SweepReport r = sweep(Algorithm::kOif, c, d, 2, 8);
  std::vector<TermSpec> rows = s3.model->terms;
  rows.push_back(parse_term("y(k-4)^3"));
  const FrequencyTable t = term_frequency(r, rows);
  REQUIRE(t.xis.size() == 7);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t xi = 2; xi <= 8; ++xi)
      CHECK(t.at(i, xi) == (subset_contains(r.at(xi).subset.indices, c.index_of(rows[i])) ? 1 : 0));
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.always_from(i, 4));
  for (std::size_t xi = 2; xi <= 8; ++xi) CHECK(t.at(4, xi) == 0);

  std::ostringstream csv;
  write_frequency_csv(csv, t);
  CHECK(csv.str().rfind("term,xi2,xi3", 0) == 0);
  CHECK_THROWS_AS(term_frequency(r, terms({"u(k-9)"})), Error);
}

TEST_CASE("dataset files round trip") {
  TempDir tmp;
  const BenchmarkSystem s8 = builtin_system("S8");
  const Dataset d = generate_dataset(s8, 12);
  save_dataset(tmp.path / "s8.csv", d, &s8);
  const Dataset back = load_dataset(tmp.path / "s8.csv");
  CHECK(back.u == d.u);
  CHECK(back.y == d.y);
  CHECK(back.split_index == d.split_index);
  CHECK(back.seed == 12);
  CHECK(back.system == "S8");
  CHECK(slurp(tmp.path / "s8.csv").rfind("k,u,y\n1,", 0) == 0);
  const auto side = read_json(tmp.path / "s8.json");
  CHECK(side.at("true_terms").size() == 4);
  CHECK(side.at("model_spec").at("n_l") == 3);

  CHECK(load_dataset(tmp.path / "s8.csv", 600).split_index == 600);

  std::istringstream bad_header("t,u,y\n1,0,0\n");
  CHECK_THROWS_AS(read_dataset_csv(bad_header), Error);
  std::istringstream bad_k("k,u,y\n1,0,0\n3,0,0\n");
  CHECK_THROWS_AS(read_dataset_csv(bad_k), Error);
  std::istringstream bad_value("k,u,y\n1,x,0\n");
  CHECK_THROWS_AS(read_dataset_csv(bad_value), Error);
}

TEST_CASE("config parsing") {
  ExperimentConfig c;
  apply_config_json(c, R"({"system": "S3", "algorithm": "o2s", "xi_min": 3, "xi_max": 9,
                           "criterion": "aic", "rho": 4, "seeds": [1, 2], "max_depth": 2})");
  CHECK(*c.system == "S3");
  CHECK(c.algorithm == Algorithm::kO2s);
  CHECK(c.lo() == 3);
  CHECK(c.hi() == 9);
  CHECK(c.criterion.kind == CriterionKind::kAic);
  CHECK(c.criterion.rho == 4.0);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(*c.max_depth == 2);
  CHECK_NOTHROW(c.validate());

  ExperimentConfig again;
  apply_config_json(again, config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));

  try {
    apply_config_json(c, R"({"sytem": "S3"})");
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSchema);
  }
  CHECK_THROWS_AS(apply_config_json(c, R"({"xi_min": "two"})"), Error);
  CHECK_THROWS_AS(apply_config_json(c, "[1, 2]"), Error);

  ExperimentConfig bad;
  bad.system = "S1";
  bad.xi_min = 9;
  bad.xi_max = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.xi_min = 2;
  bad.system.reset();
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("experiment bundle and replay") {
  TempDir tmp;
  ExperimentConfig c;
  c.system = "S3";
  c.seeds = {7};
  c.xi_max = 8;
  c.workers = 2;
  c.output = tmp.path / "s3";
  const ExperimentResult res = run_experiment(c);
  REQUIRE(res.runs.size() == 1);
  CHECK(res.exit_status() == 0);
  const RunSummary& run = res.runs[0];
  REQUIRE(run.ok);
  REQUIRE(run.outcome);
  CHECK(run.outcome->label == OutcomeLabel::kExactFitting);
  CHECK(run.selected.size() == 4);
  for (const char* f : {"dataset.csv", "dataset.json", "trace.jsonl", "sweep.csv", "sweep.json",
                        "outcome.json", "metadata.json"})
    CHECK(fs::exists(c.output / f));
  CHECK(read_json(c.output / "outcome.json").at("label") == "ExactFitting");
  CHECK(read_json(c.output / "metadata.json").at("defaults").contains("tie_rule"));

  std::ostringstream report;
  write_run_report(report, c.output);
  CHECK(report.str().find("ExactFitting") != std::string::npos);

  ExperimentConfig replay;
  replay.dataset = c.output / "dataset.csv";
  replay.xi_max = 8;
  replay.output = tmp.path / "replay";
  const ExperimentResult again = run_experiment(replay);
  REQUIRE(again.runs[0].ok);
  CHECK(slurp(replay.output / "sweep.csv") == slurp(c.output / "sweep.csv"));
  CHECK(again.runs[0].outcome->label == OutcomeLabel::kExactFitting);
}

TEST_CASE("several seeds and failures") {
  TempDir tmp;
  ExperimentConfig c;
  c.system = "S6";
  c.algorithm = Algorithm::kOsf;
  c.xi_max = 6;
  c.seeds = {1, 8};
  c.output = tmp.path / "s6";
  const ExperimentResult res = run_experiment(c);
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].ok);
  CHECK_FALSE(res.runs[1].ok);
  CHECK(res.runs[1].error == ErrorKind::kInstability);
  CHECK(res.exit_status() == 3);
  CHECK(fs::exists(c.output / "seed-1" / "outcome.json"));
  CHECK(fs::exists(c.output / "seed-8" / "error.json"));
  CHECK(fs::exists(c.output / "seed-8" / "metadata.json"));
  CHECK(read_json(c.output / "summary.json").size() == 2);

  ExperimentConfig bad = c;
  bad.xi_min = 9;
  bad.output = tmp.path / "never";
  CHECK_THROWS_AS(run_experiment(bad), Error);
  CHECK_FALSE(fs::exists(bad.output));
}

TEST_CASE("command line") {
  TempDir tmp;
  const std::string out = (tmp.path / "cli").string();
  CHECK(run_cli("simulate --system S2 --seed 3 --out " + (tmp.path / "s2.csv").string()) == 0);
  CHECK(fs::exists(tmp.path / "s2.json"));
  CHECK(run_cli("identify --data " + (tmp.path / "s2.csv").string() + " --algo osf --xi-max 6 --out " + out) == 0);
  CHECK(fs::exists(tmp.path / "cli" / "outcome.json"));
  CHECK(run_cli("classify --run " + out) == 0);
  CHECK(run_cli("freq --sweep " + out + "/sweep.json --system S2") == 0);
  CHECK(run_cli("report --run " + out) == 0);

  CHECK(run_cli("identify --system S2 --xi-min 9 --xi-max 4 --out " + out + "-bad") == 2);
  CHECK_FALSE(fs::exists(tmp.path / "cli-bad"));
  CHECK(run_cli("identify --system S2 --bogus-flag") == 2);
  CHECK(run_cli("identify --system S2 --xi 6 --step-budget 2 --out " + out + "-budget") == 4);

  std::ofstream(tmp.path / "cfg.json") << R"({"system": "S2", "algorithm": "ofr", "xi": 4})";
  CHECK(run_cli("identify --config " + (tmp.path / "cfg.json").string() + " --out " + out + "-cfg") == 0);
  CHECK(read_json(tmp.path / "cli-cfg" / "outcome.json").at("algorithm") == "ofr");
}
