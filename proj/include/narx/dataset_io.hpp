#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>

#include "narx/data_kit.hpp"

namespace narx {

// CSV with header `k,u,y`, 1-based k, 17 significant digits.
void write_dataset_csv(std::ostream& os, const Dataset& data);
// Reads the same layout. The split is left at 0; callers set it.
Dataset read_dataset_csv(std::istream& is);

// Sidecar metadata: system, seed, split, model spec and generator settings.
void write_dataset_sidecar(std::ostream& os, const Dataset& data,
                           const BenchmarkSystem* system = nullptr);

// Writes `<path>` and `<path with .json extension>`.
void save_dataset(const std::filesystem::path& csv_path, const Dataset& data,
                  const BenchmarkSystem* system = nullptr);

// Loads a CSV and, when present, its sidecar. The split comes from `split`,
// else the sidecar, else 70% of the samples.
Dataset load_dataset(const std::filesystem::path& csv_path,
                     std::optional<std::size_t> split = std::nullopt);

}  // namespace narx
