#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "narx/term_space.hpp"

namespace narx {

// Paired input/output record with an estimation/validation split.
struct Dataset {
  std::vector<double> u;
  std::vector<double> y;
  std::size_t split_index = 0;  // first validation sample (0-based)
  std::uint64_t seed = 0;
  std::string system;           // builtin name, or empty for external data

  std::size_t size() const { return y.size(); }
  std::size_t validation_size() const { return y.size() - split_index; }
  void validate() const;
};

struct SignalSpec {
  enum class Kind { kUniform, kGaussian, kFiltered };

  Kind kind = Kind::kUniform;
  double a = 0.0, b = 1.0;             // uniform support
  double mean = 0.0, variance = 1.0;   // gaussian moments
  std::shared_ptr<const SignalSpec> inner;
  std::vector<double> numerator;       // b_0 + b_1 z^-1 + ...
  std::vector<double> denominator;     // a_0 + a_1 z^-1 + ..., a_0 != 0

  static SignalSpec uniform(double a, double b);
  static SignalSpec gaussian(double mean, double variance);
  static SignalSpec filtered(SignalSpec inner, std::vector<double> numerator,
                             std::vector<double> denominator);

  std::string describe() const;
};

// Seeded generator for one named stream of a dataset. Streams derived from
// the same seed are independent; the sample transforms are written out here
// rather than taken from <random> so sequences match across standard libraries.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t stream);

  double uniform01();  // [0, 1), 53-bit resolution
  double gaussian();   // standard normal, Box-Muller

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

inline constexpr std::uint32_t kInputStream = 1;
inline constexpr std::uint32_t kNoiseStream = 2;

std::vector<double> generate_signal(const SignalSpec& spec, std::size_t n,
                                    RandomStream& rng);
std::vector<double> generate_signal(const SignalSpec& spec, std::size_t n,
                                    std::uint64_t seed,
                                    std::uint32_t stream = kInputStream);

// Direct-form IIR with zero initial state.
std::vector<double> iir_filter(std::span<const double> numerator,
                               std::span<const double> denominator,
                               std::span<const double> x);

struct TrueModel {
  // kEquation: y(k) = sum theta_i x_i(k) + e(k), lags taken from y.
  // kOutput:   w(k) = sum theta_i x_i(k), lags taken from w; y(k) = w(k) + e(k).
  enum class NoiseEntry { kEquation, kOutput };

  std::string name;
  std::vector<TermSpec> terms;
  std::vector<double> coefficients;
  std::optional<SignalSpec> noise;
  NoiseEntry noise_entry = NoiseEntry::kEquation;

  std::size_t cardinality() const { return terms.size(); }
};

inline constexpr double kOverflowGuard = 1e12;

// Recursive evaluation from zero initial conditions.
std::vector<double> simulate_narx(const TrueModel& model, std::span<const double> u,
                                  std::span<const double> noise);

struct DuffingParams {
  double omega_n = 45.0 * 3.14159265358979323846;
  double zeta = 0.01;
  double epsilon = 3.0;
  double fs = 500.0;
  int substeps = 50;
};

// RK4 integration of y'' + 2 zeta w y' + w^2 y + w^2 eps y^3 - u = 0 with the
// input held constant between samples; returns y at t = k / fs.
std::vector<double> simulate_duffing(const DuffingParams& params,
                                     std::span<const double> u);

struct BenchmarkSystem {
  std::string name;
  ModelSpec spec;
  std::optional<TrueModel> model;        // absent for continuous systems
  std::optional<DuffingParams> duffing;
  SignalSpec excitation;
  std::optional<SignalSpec> noise;
  std::size_t length = 1000;
  std::size_t split = 700;
};

// "S1".."S8" or "duffing".
BenchmarkSystem builtin_system(const std::string& name);
std::vector<std::string> builtin_names();

// Excitation from the input stream, noise from the noise stream.
Dataset generate_dataset(const BenchmarkSystem& system, std::uint64_t seed,
                         std::optional<std::size_t> length = std::nullopt,
                         std::optional<std::size_t> split = std::nullopt);

}  // namespace narx
