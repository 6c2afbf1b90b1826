#include "narx/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "narx/error.hpp"

namespace narx {

namespace fs = std::filesystem;

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  if (data.u.size() != data.y.size()) throw Error(ErrorKind::kSchema, "dataset lengths differ");
  os << "k,u,y\n";
  char buf[80];
  for (std::size_t k = 0; k < data.y.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", k + 1, data.u[k], data.y[k]);
    os << buf;
  }
}

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::kSchema, "dataset CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "k,u,y") throw Error(ErrorKind::kSchema, "dataset CSV header must be 'k,u,y'");
  Dataset d;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::istringstream ls(line);
    std::string fk, fu, fy;
    if (!std::getline(ls, fk, ',') || !std::getline(ls, fu, ',') || !std::getline(ls, fy)) {
      throw Error(ErrorKind::kSchema, "dataset CSV row " + std::to_string(row) + " needs 3 fields");
    }
    try {
      std::size_t used = 0;
      if (std::stoull(fk, &used) != row || used != fk.size()) {
        throw Error(ErrorKind::kSchema, "dataset CSV row " + std::to_string(row) + " has k=" + fk);
      }
      d.u.push_back(std::stod(fu));
      d.y.push_back(std::stod(fy));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kSchema, "dataset CSV row " + std::to_string(row) + " is not numeric");
    }
  }
  if (d.y.empty()) throw Error(ErrorKind::kSchema, "dataset CSV has no rows");
  return d;
}

void write_dataset_sidecar(std::ostream& os, const Dataset& data, const BenchmarkSystem* system) {
  nlohmann::ordered_json j;
  j["system"] = data.system;
  j["seed"] = data.seed;
  j["samples"] = data.size();
  j["split_index"] = data.split_index;
  if (system) {
    j["model_spec"] = {{"n_u", system->spec.n_u}, {"n_y", system->spec.n_y}, {"n_l", system->spec.n_l}};
    j["excitation"] = system->excitation.describe();
    if (system->noise) j["noise"] = system->noise->describe();
    if (system->model) {
      std::vector<std::string> terms;
      for (const auto& t : system->model->terms) terms.push_back(t.str());
      j["true_terms"] = terms;
      j["true_coefficients"] = system->model->coefficients;
      j["noise_entry"] =
          system->model->noise_entry == TrueModel::NoiseEntry::kOutput ? "output" : "equation";
    }
    if (system->duffing) {
      const auto& p = *system->duffing;
      j["generator"] = {{"integrator", "rk4"},     {"input_hold", "zoh"},
                        {"substeps", p.substeps},   {"omega_n", p.omega_n},
                        {"zeta", p.zeta},           {"epsilon", p.epsilon},
                        {"fs", p.fs}};
    } else {
      j["generator"] = {{"simulator", "narx_recursion"}, {"initial_conditions", "zero"}};
    }
    j["rng"] = {{"engine", "mt19937_64"}, {"input_stream", kInputStream}, {"noise_stream", kNoiseStream}};
  }
  os << j.dump(2) << '\n';
}

void save_dataset(const fs::path& csv_path, const Dataset& data, const BenchmarkSystem* system) {
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorKind::kIo, "cannot write " + csv_path.string());
  write_dataset_csv(csv, data);
  fs::path side = csv_path;
  side.replace_extension(".json");
  std::ofstream js(side);
  if (!js) throw Error(ErrorKind::kIo, "cannot write " + side.string());
  write_dataset_sidecar(js, data, system);
}

Dataset load_dataset(const fs::path& csv_path, std::optional<std::size_t> split) {
  std::ifstream csv(csv_path);
  if (!csv) throw Error(ErrorKind::kIo, "cannot read " + csv_path.string());
  Dataset d = read_dataset_csv(csv);
  fs::path side = csv_path;
  side.replace_extension(".json");
  std::optional<std::size_t> side_split;
  if (fs::exists(side)) {
    std::ifstream js(side);
    try {
      const auto j = nlohmann::json::parse(js);
      d.system = j.value("system", std::string());
      d.seed = j.value("seed", std::uint64_t{0});
      if (j.contains("split_index")) side_split = j.at("split_index").get<std::size_t>();
      if (j.contains("samples") && j.at("samples").get<std::size_t>() != d.size()) {
        throw Error(ErrorKind::kSchema, "sidecar sample count does not match " + csv_path.string());
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kSchema, side.string() + ": " + e.what());
    }
  }
  d.split_index = split.value_or(side_split.value_or(d.size() * 7 / 10));
  d.validate();
  return d;
}

}  // namespace narx
