#include "narx/data_kit.hpp"

#include <cmath>
#include <complex>
#include <iostream>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "narx/error.hpp"

namespace narx {

void Dataset::validate() const {
  if (u.size() != y.size()) {
    throw Error(ErrorKind::kSchema, "dataset input and output lengths differ");
  }
  if (split_index == 0 || split_index >= y.size()) {
    throw Error(ErrorKind::kSchema, "dataset split index " + std::to_string(split_index) +
                                        " outside (0, " + std::to_string(y.size()) + ")");
  }
}

SignalSpec SignalSpec::uniform(double a, double b) {
  SignalSpec s;
  s.kind = Kind::kUniform;
  s.a = a;
  s.b = b;
  return s;
}

SignalSpec SignalSpec::gaussian(double mean, double variance) {
  SignalSpec s;
  s.kind = Kind::kGaussian;
  s.mean = mean;
  s.variance = variance;
  return s;
}

SignalSpec SignalSpec::filtered(SignalSpec inner, std::vector<double> numerator,
                                std::vector<double> denominator) {
  if (denominator.empty() || denominator.front() == 0.0) {
    throw Error(ErrorKind::kSpecification, "filter denominator needs a nonzero leading coefficient");
  }
  SignalSpec s;
  s.kind = Kind::kFiltered;
  s.inner = std::make_shared<const SignalSpec>(std::move(inner));
  s.numerator = std::move(numerator);
  s.denominator = std::move(denominator);
  return s;
}

std::string SignalSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::kUniform:
      os << "WUN(" << a << "," << b << ")";
      break;
    case Kind::kGaussian:
      os << "WGN(" << mean << "," << variance << ")";
      break;
    case Kind::kFiltered: {
      auto poly = [&](const std::vector<double>& c) {
        os << "[";
        for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
        os << "]";
      };
      os << "IIR(";
      poly(numerator);
      os << "/";
      poly(denominator);
      os << "," << inner->describe() << ")";
      break;
    }
  }
  return os.str();
}

RandomStream::RandomStream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream, 0x6e617278u};
  engine_.seed(seq);
}

double RandomStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::gaussian() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  return r * std::cos(t);
}

namespace {

bool filter_is_stable(std::span<const double> den) {
  std::size_t order = den.size();
  while (order > 1 && den[order - 1] == 0.0) --order;
  if (order <= 1) return true;
  const Eigen::Index p = static_cast<Eigen::Index>(order - 1);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    companion(0, j) = -den[static_cast<std::size_t>(j) + 1] / den[0];
  }
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  const Eigen::VectorXcd poles = companion.eigenvalues();
  for (Eigen::Index i = 0; i < poles.size(); ++i) {
    if (std::abs(poles(i)) >= 1.0) return false;
  }
  return true;
}

}  // namespace

std::vector<double> iir_filter(std::span<const double> numerator,
                               std::span<const double> denominator,
                               std::span<const double> x) {
  if (denominator.empty() || denominator[0] == 0.0) {
    throw Error(ErrorKind::kSpecification, "filter denominator needs a nonzero leading coefficient");
  }
  if (!filter_is_stable(denominator)) {
    std::clog << "narx: warning: filter has poles on or outside the unit circle\n";
  }
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < numerator.size() && i <= k; ++i) acc += numerator[i] * x[k - i];
    for (std::size_t i = 1; i < denominator.size() && i <= k; ++i) acc -= denominator[i] * out[k - i];
    out[k] = acc / denominator[0];
  }
  return out;
}

std::vector<double> generate_signal(const SignalSpec& spec, std::size_t n,
                                    RandomStream& rng) {
  if (n == 0) throw Error(ErrorKind::kSpecification, "signal length must be positive");
  std::vector<double> out(n);
  switch (spec.kind) {
    case SignalSpec::Kind::kUniform:
      for (double& v : out) v = spec.a + (spec.b - spec.a) * rng.uniform01();
      break;
    case SignalSpec::Kind::kGaussian: {
      const double sd = std::sqrt(spec.variance);
      for (double& v : out) v = spec.mean + sd * rng.gaussian();
      break;
    }
    case SignalSpec::Kind::kFiltered: {
      const std::vector<double> raw = generate_signal(*spec.inner, n, rng);
      out = iir_filter(spec.numerator, spec.denominator, raw);
      break;
    }
  }
  return out;
}

std::vector<double> generate_signal(const SignalSpec& spec, std::size_t n,
                                    std::uint64_t seed, std::uint32_t stream) {
  RandomStream rng(seed, stream);
  return generate_signal(spec, n, rng);
}

std::vector<double> simulate_narx(const TrueModel& model, std::span<const double> u,
                                  std::span<const double> noise) {
  if (u.size() != noise.size()) {
    throw Error(ErrorKind::kSpecification, "input and noise lengths differ");
  }
  if (model.terms.size() != model.coefficients.size()) {
    throw Error(ErrorKind::kSpecification, "model terms and coefficients differ in count");
  }
  const std::size_t n = u.size();
  // Lagged samples before k = 0 are zero: evaluate against zero-padded copies.
  int pad = 0;
  for (const TermSpec& t : model.terms) {
    pad = std::max({pad, t.max_lag(Signal::kInput), t.max_lag(Signal::kOutput)});
  }
  const std::size_t p = static_cast<std::size_t>(pad);
  std::vector<double> up(n + p, 0.0), state(n + p, 0.0);
  std::copy(u.begin(), u.end(), up.begin() + static_cast<std::ptrdiff_t>(p));

  std::vector<double> y(n);
  const bool equation = model.noise_entry == TrueModel::NoiseEntry::kEquation;
  for (std::size_t k = 0; k < n; ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < model.terms.size(); ++i) {
      v += model.coefficients[i] * model.terms[i].evaluate(up, state, k + p);
    }
    if (equation) v += noise[k];
    state[k + p] = v;
    y[k] = equation ? v : v + noise[k];
    if (!std::isfinite(y[k]) || std::abs(y[k]) > kOverflowGuard) {
      throw Error(ErrorKind::kInstability,
                  model.name + " diverged at sample " + std::to_string(k));
    }
  }
  return y;
}

std::vector<double> simulate_duffing(const DuffingParams& params,
                                     std::span<const double> u) {
  if (params.fs <= 0.0) throw Error(ErrorKind::kSpecification, "sample rate must be positive");
  if (params.substeps < 1) throw Error(ErrorKind::kSpecification, "substeps must be positive");
  const double w2 = params.omega_n * params.omega_n;
  const double c = 2.0 * params.zeta * params.omega_n;
  const double h = 1.0 / (params.fs * params.substeps);

  struct State {
    double pos, vel;
  };
  auto deriv = [&](const State& s, double input) {
    return State{s.vel, input - c * s.vel - w2 * s.pos - w2 * params.epsilon * s.pos * s.pos * s.pos};
  };

  std::vector<double> y(u.size(), 0.0);
  State s{0.0, 0.0};
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    const double in = u[k];
    for (int j = 0; j < params.substeps; ++j) {
      const State k1 = deriv(s, in);
      const State k2 = deriv({s.pos + 0.5 * h * k1.pos, s.vel + 0.5 * h * k1.vel}, in);
      const State k3 = deriv({s.pos + 0.5 * h * k2.pos, s.vel + 0.5 * h * k2.vel}, in);
      const State k4 = deriv({s.pos + h * k3.pos, s.vel + h * k3.vel}, in);
      s.pos += h / 6.0 * (k1.pos + 2.0 * k2.pos + 2.0 * k3.pos + k4.pos);
      s.vel += h / 6.0 * (k1.vel + 2.0 * k2.vel + 2.0 * k3.vel + k4.vel);
    }
    if (!std::isfinite(s.pos) || !std::isfinite(s.vel)) {
      throw Error(ErrorKind::kInstability, "duffing state became non-finite at sample " +
                                               std::to_string(k + 1));
    }
    y[k + 1] = s.pos;
  }
  return y;
}

namespace {

TrueModel make_model(std::string name,
                     std::initializer_list<std::pair<const char*, double>> terms,
                     std::optional<SignalSpec> noise,
                     TrueModel::NoiseEntry entry = TrueModel::NoiseEntry::kEquation) {
  TrueModel m;
  m.name = std::move(name);
  for (const auto& [text, coef] : terms) {
    m.terms.push_back(parse_term(text));
    m.coefficients.push_back(coef);
  }
  m.noise = std::move(noise);
  m.noise_entry = entry;
  return m;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "duffing"};
}

namespace {

// Zero-mean, unit-variance uniform white noise.
SignalSpec unit_uniform() {
  const double half_width = std::sqrt(3.0);
  return SignalSpec::uniform(-half_width, half_width);
}

}  // namespace

BenchmarkSystem builtin_system(const std::string& name) {
  BenchmarkSystem sys;
  sys.name = name;
  sys.spec = ModelSpec{4, 4, 3};
  if (name == "S1") {
    sys.excitation = unit_uniform();
    sys.noise = SignalSpec::gaussian(0.0, 0.05);
    sys.model = make_model(name,
                           {{"1", 0.5}, {"y(k-1)", 0.5}, {"u(k-2)", 0.8},
                            {"u(k-1)^2", 1.0}, {"y(k-2)^2", -0.05}},
                           sys.noise);
  } else if (name == "S2") {
    sys.excitation = unit_uniform();
    sys.noise = SignalSpec::gaussian(0.0, 0.002);
    sys.model = make_model(name,
                           {{"y(k-1)", 0.5}, {"u(k-1)", 0.3}, {"u(k-1)*y(k-1)", 0.3},
                            {"u(k-1)^2", 0.5}},
                           sys.noise);
  } else if (name == "S3") {
    sys.excitation = SignalSpec::gaussian(0.0, 1.0);
    sys.noise = SignalSpec::gaussian(0.0, 0.33 * 0.33);
    sys.model = make_model(name,
                           {{"y(k-1)", 0.8}, {"u(k-1)", 0.4}, {"u(k-1)^2", 0.4},
                            {"u(k-1)^3", 0.4}},
                           sys.noise);
  } else if (name == "S4") {
    sys.excitation = unit_uniform();
    sys.noise = SignalSpec::gaussian(0.0, 0.002);
    sys.model = make_model(name,
                           {{"y(k-1)", 0.1586}, {"u(k-1)", 0.6777}, {"y(k-2)^2", 0.3037},
                            {"y(k-2)*u(k-1)^2", -0.2566}, {"u(k-3)^3", -0.0339}},
                           sys.noise);
  } else if (name == "S5") {
    sys.excitation = SignalSpec::uniform(-1.0, 1.0);
    sys.noise = SignalSpec::gaussian(0.0, 0.004);
    sys.model = make_model(name,
                           {{"y(k-1)*u(k-1)", 0.7}, {"y(k-2)", -0.5}, {"u(k-2)^2", 0.6},
                            {"y(k-2)*u(k-2)^2", -0.7}},
                           sys.noise);
  } else if (name == "S6") {
    sys.excitation = SignalSpec::uniform(-1.0, 1.0);
    sys.noise = SignalSpec::gaussian(0.0, 0.004);
    sys.model = make_model(name,
                           {{"y(k-1)^3", 0.2}, {"y(k-1)*u(k-1)", 0.7}, {"u(k-2)^2", 0.6},
                            {"y(k-2)*u(k-2)^2", -0.7}, {"y(k-2)", -0.5}},
                           sys.noise);
  } else if (name == "S7") {
    sys.spec = ModelSpec{5, 5, 3};
    sys.excitation = unit_uniform();
    sys.noise = SignalSpec::gaussian(0.0, 0.01 * 0.01);
    sys.model = make_model(name,
                           {{"u(k-1)", 0.8833},          {"u(k-2)", 0.0393},
                            {"u(k-3)", 0.8546},          {"u(k-1)^2", 0.8528},
                            {"u(k-1)*u(k-2)", 0.7582},   {"u(k-1)*u(k-3)", 0.1750},
                            {"u(k-2)^2", 0.0864},        {"u(k-2)*u(k-3)", 0.4916},
                            {"u(k-3)^2", 0.0711},        {"y(k-1)", -0.0375},
                            {"y(k-2)", -0.0598},         {"y(k-3)", -0.0370},
                            {"y(k-4)", -0.0468},         {"y(k-1)^2", -0.0476},
                            {"y(k-1)*y(k-2)", -0.0781},  {"y(k-1)*y(k-3)", -0.0189},
                            {"y(k-1)*y(k-4)", -0.0626},  {"y(k-2)^2", -0.0221},
                            {"y(k-2)*y(k-3)", -0.0617},  {"y(k-2)*y(k-4)", -0.0378},
                            {"y(k-3)^2", -0.0041},       {"y(k-3)*y(k-4)", -0.0543},
                            {"y(k-4)^2", -0.0603}},
                           sys.noise);
  } else if (name == "S8") {
    sys.excitation = SignalSpec::filtered(SignalSpec::gaussian(0.0, 1.0), {0.3},
                                          {1.0, -1.6, 0.64});
    sys.noise = SignalSpec::filtered(SignalSpec::gaussian(0.0, 0.02), {1.0}, {1.0, -0.8});
    sys.model = make_model(name,
                           {{"u(k-1)", 1.0}, {"u(k-2)", 0.5}, {"u(k-1)*u(k-2)", 0.25},
                            {"u(k-1)^3", -0.3}},
                           sys.noise, TrueModel::NoiseEntry::kOutput);
  } else if (name == "duffing") {
    sys.spec = ModelSpec{5, 5, 3};
    sys.excitation = unit_uniform();
    sys.duffing = DuffingParams{};
  } else {
    throw Error(ErrorKind::kSpecification, "unknown system '" + name + "'");
  }
  return sys;
}

Dataset generate_dataset(const BenchmarkSystem& system, std::uint64_t seed,
                         std::optional<std::size_t> length,
                         std::optional<std::size_t> split) {
  Dataset d;
  d.system = system.name;
  d.seed = seed;
  const std::size_t n = length.value_or(system.length);
  d.split_index = split.value_or(length ? n * 7 / 10 : system.split);
  d.u = generate_signal(system.excitation, n, seed, kInputStream);
  if (system.model) {
    std::vector<double> e(n, 0.0);
    if (system.noise) e = generate_signal(*system.noise, n, seed, kNoiseStream);
    d.y = simulate_narx(*system.model, d.u, e);
  } else {
    d.y = simulate_duffing(*system.duffing, d.u);
  }
  d.validate();
  return d;
}

}  // namespace narx
