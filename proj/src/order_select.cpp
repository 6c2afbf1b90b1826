#include "narx/order_select.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "json.hpp"

namespace narx {

using json = nlohmann::ordered_json;

std::string to_string(CriterionKind k) {
  switch (k) {
    case CriterionKind::kAic: return "AIC";
    case CriterionKind::kBic: return "BIC";
    case CriterionKind::kFpe: return "FPE";
    case CriterionKind::kLilc: return "LILC";
  }
  return "unknown";
}

CriterionKind parse_criterion(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::toupper(c); });
  if (n == "AIC") return CriterionKind::kAic;
  if (n == "BIC") return CriterionKind::kBic;
  if (n == "FPE") return CriterionKind::kFpe;
  if (n == "LILC") return CriterionKind::kLilc;
  throw Error(ErrorKind::kConfig, "unknown criterion '" + name + "'");
}

std::string to_string(PredictionMode m) {
  return m == PredictionMode::kOneStep ? "one_step" : "free_run";
}

PredictionMode parse_prediction_mode(const std::string& name) {
  if (name == "one_step" || name == "one-step") return PredictionMode::kOneStep;
  if (name == "free_run" || name == "free-run") return PredictionMode::kFreeRun;
  throw Error(ErrorKind::kConfig, "unknown prediction mode '" + name + "'");
}

PredictionDiverged::PredictionDiverged(std::size_t sample, double partial_e)
    : Error(ErrorKind::kInstability,
            "free-run prediction diverged at sample " + std::to_string(sample)),
      sample_(sample),
      partial_e_(partial_e) {}

void CriterionSpec::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw Error(ErrorKind::kConfig, "AIC penalty weight must be positive");
  }
}

CriterionValue info_criterion(double e, std::size_t xi, std::size_t n_v, const CriterionSpec& spec) {
  if (n_v == 0) throw Error(ErrorKind::kDomain, "information criterion needs validation samples");
  if (!(e >= 0.0)) throw Error(ErrorKind::kDomain, "prediction error must be non-negative");
  const double nv = static_cast<double>(n_v);
  const double k = static_cast<double>(xi);
  double penalty = 0.0;
  switch (spec.kind) {
    case CriterionKind::kAic:
      penalty = spec.rho * k;
      break;
    case CriterionKind::kBic:
      penalty = std::log(nv) * k;
      break;
    case CriterionKind::kFpe:
      if (xi >= n_v) throw Error(ErrorKind::kDomain, "FPE needs xi < N_v");
      penalty = nv * std::log((nv + k) / (nv - k));
      break;
    case CriterionKind::kLilc:
      if (n_v < 3) throw Error(ErrorKind::kDomain, "LILC needs N_v >= 3");
      penalty = 2.0 * k * std::log(std::log(nv));
      break;
  }
  if (e == 0.0) return {-std::numeric_limits<double>::infinity(), true};
  return {nv * std::log(e) + penalty, false};
}

namespace {

double mse(const Eigen::VectorXd& r) {
  return r.size() == 0 ? 0.0 : r.squaredNorm() / static_cast<double>(r.size());
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const Subset& s) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(s.size()));
  for (std::size_t j = 0; j < s.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(s[j]));
  }
  return out;
}

double one_step_error(const FittedModel& model, const RegressorMatrix& val) {
  if (val.rows() == 0) throw Error(ErrorKind::kInsufficientData, "validation partition is empty");
  Eigen::VectorXd r = val.y;
  if (!model.subset.indices.empty()) r -= select_columns(val.x, model.subset.indices) * model.theta;
  return mse(r);
}

double free_run_error(const FittedModel& model, const CandidateSet& candidates, const Dataset& data) {
  const auto lag = static_cast<std::size_t>(candidates.spec.max_lag());
  const std::size_t start = std::max(lag, data.split_index);
  if (start >= data.size()) throw Error(ErrorKind::kInsufficientData, "validation partition is empty");
  std::vector<double> yhat = data.y;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = start; k < data.size(); ++k) {
    double v = 0.0;
    for (std::size_t j = 0; j < model.subset.indices.size(); ++j) {
      v += model.theta(static_cast<Eigen::Index>(j)) *
           candidates.terms[model.subset.indices[j]].evaluate(data.u, yhat, k);
    }
    if (!std::isfinite(v) || std::abs(v) > kOverflowGuard) {
      throw PredictionDiverged(k, count ? sum / static_cast<double>(count) : 0.0);
    }
    yhat[k] = v;
    const double d = data.y[k] - v;
    sum += d * d;
    ++count;
  }
  return sum / static_cast<double>(count);
}

}  // namespace

std::size_t validation_count(const CandidateSet& candidates, const Dataset& data) {
  const std::size_t start =
      std::max(static_cast<std::size_t>(candidates.spec.max_lag()), data.split_index);
  return start < data.size() ? data.size() - start : 0;
}

double prediction_error(const FittedModel& model, const CandidateSet& candidates, const Dataset& data,
                        PredictionMode mode) {
  data.validate();
  if (mode == PredictionMode::kFreeRun) return free_run_error(model, candidates, data);
  const RegressorMatrix all = build_regressors(candidates, data.u, data.y);
  return one_step_error(model, all.tail(data.split_index));
}

double SweepEntry::criterion(CriterionKind k) const {
  switch (k) {
    case CriterionKind::kAic: return aic;
    case CriterionKind::kBic: return bic;
    case CriterionKind::kFpe: return fpe;
    case CriterionKind::kLilc: return lilc;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct SweepReport::Context {
  CandidateSet candidates;
  std::optional<Dataset> data;
  RegressorMatrix estimation;
  RegressorMatrix validation;
  std::shared_ptr<const CriterionEngine> engine;
  SweepOptions options;
};

const SweepEntry& SweepReport::at(std::size_t xi) const {
  if (xi < xi_min || xi > xi_max) {
    throw Error(ErrorKind::kDomain, "cardinality " + std::to_string(xi) + " outside the sweep");
  }
  return entries[xi - xi_min];
}

const CandidateSet& SweepReport::candidates() const {
  if (!context) throw Error(ErrorKind::kConfig, "sweep report has no candidate set");
  return context->candidates;
}

const SweepEntry* SweepReport::chosen() const {
  return chosen_xi ? &at(*chosen_xi) : nullptr;
}

namespace {

double criterion_or_nan(double e, std::size_t xi, std::size_t n_v, CriterionKind kind, double rho) {
  try {
    CriterionSpec spec;
    spec.kind = kind;
    spec.rho = rho;
    return info_criterion(e, xi, n_v, spec).value;
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

SweepEntry run_one(CriterionEngine& engine, const SweepReport::Context& ctx, Algorithm algorithm,
                   const CriterionSpec& crit, std::size_t xi, std::size_t n_v) {
  SweepEntry entry;
  entry.xi = xi;
  try {
    SearchConfig cfg = ctx.options.search;
    cfg.xi = xi;
    SearchResult res = run_search(algorithm, engine, cfg);
    entry.subset = res.subset;
    entry.J = res.subset.criterion;
    entry.budget_exceeded = res.budget_exceeded;
    entry.cycle_detected = res.cycle_detected;
    entry.zero_gain_additions = res.zero_gain_additions;
    entry.max_depth = res.max_depth;
    entry.trace = std::move(res.trace);
    entry.fit = estimate_coefficients(entry.subset, ctx.estimation.x, ctx.estimation.y);
    entry.E = crit.prediction == PredictionMode::kOneStep
                  ? one_step_error(entry.fit, ctx.validation)
                  : free_run_error(entry.fit, ctx.candidates, *ctx.data);
    entry.aic = criterion_or_nan(entry.E, xi, n_v, CriterionKind::kAic, crit.rho);
    entry.bic = criterion_or_nan(entry.E, xi, n_v, CriterionKind::kBic, crit.rho);
    entry.fpe = criterion_or_nan(entry.E, xi, n_v, CriterionKind::kFpe, crit.rho);
    entry.lilc = criterion_or_nan(entry.E, xi, n_v, CriterionKind::kLilc, crit.rho);
    entry.ok = true;
  } catch (const PredictionDiverged& e) {
    entry.E = e.partial_e();
    entry.error = std::string(to_string(e.kind())) + ": " + e.what();
  } catch (const Error& e) {
    entry.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return entry;
}

// Runs every xi in `todo` and returns the entries in the same order.
std::vector<SweepEntry> run_batch(const SweepReport::Context& ctx, Algorithm algorithm,
                                  const CriterionSpec& crit, const std::vector<std::size_t>& todo,
                                  std::size_t n_v) {
  std::vector<SweepEntry> out(todo.size());
  unsigned workers = ctx.options.workers ? ctx.options.workers : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(std::max<std::size_t>(todo.size(), 1)));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    // Large cardinalities first so the longest searches start early.
    CriterionEngine engine = ctx.engine->fork();
    for (std::size_t i; (i = next.fetch_add(1)) < todo.size();) {
      const std::size_t slot = todo.size() - 1 - i;
      out[slot] = run_one(engine, ctx, algorithm, crit, todo[slot], n_v);
    }
  };
  if (workers == 1) {
    // Ascending order lets later cardinalities reuse cached subsets.
    CriterionEngine engine = ctx.engine->fork();
    for (std::size_t i = 0; i < todo.size(); ++i) out[i] = run_one(engine, ctx, algorithm, crit, todo[i], n_v);
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace

void select_order(SweepReport& report, const CriterionSpec& crit) {
  crit.validate();
  report.criterion = crit;
  report.chosen_xi.reset();
  double best = std::numeric_limits<double>::infinity();
  bool have = false;
  for (const SweepEntry& e : report.entries) {
    if (!e.ok) continue;
    const double v = e.criterion(crit.kind);
    if (std::isnan(v)) continue;
    if (!have || v < best) {
      best = v;
      report.chosen_xi = e.xi;
      have = true;
    }
  }
  // E == 0 gives -inf; the first such xi wins, matching the smallest-xi tie rule.
  report.boundary = report.chosen_xi && *report.chosen_xi == report.xi_max;
}

SweepReport sweep(Algorithm algorithm, const CandidateSet& candidates, const Dataset& data,
                  std::size_t xi_min, std::size_t xi_max, const CriterionSpec& crit,
                  const SweepOptions& options) {
  crit.validate();
  data.validate();
  const std::size_t floor = algorithm == Algorithm::kOfr ? 1 : 2;
  if (xi_min < floor || xi_min > xi_max || xi_max >= candidates.size()) {
    throw Error(ErrorKind::kConfig, "cardinality interval [" + std::to_string(xi_min) + ", " +
                                        std::to_string(xi_max) + "] invalid for " +
                                        std::to_string(candidates.size()) + " candidates");
  }
  auto ctx = std::make_shared<SweepReport::Context>();
  ctx->candidates = candidates;
  ctx->data = data;
  const RegressorMatrix all = build_regressors(candidates, data.u, data.y);
  ctx->estimation = all.head(data.split_index);
  ctx->validation = all.tail(data.split_index);
  if (ctx->estimation.rows() == 0) {
    throw Error(ErrorKind::kInsufficientData, "estimation partition has no rows with full history");
  }
  if (ctx->validation.rows() == 0) {
    throw Error(ErrorKind::kInsufficientData, "validation partition has no rows with full history");
  }
  ctx->engine = std::make_shared<CriterionEngine>(ctx->estimation.x, ctx->estimation.y);
  ctx->options = options;

  SweepReport report;
  report.algorithm = algorithm;
  report.xi_min = xi_min;
  report.xi_max = xi_max;
  report.n_v = static_cast<std::size_t>(ctx->validation.rows());
  report.context = ctx;

  std::vector<std::size_t> todo;
  for (std::size_t xi = xi_min; xi <= xi_max; ++xi) todo.push_back(xi);
  report.entries = run_batch(*ctx, algorithm, crit, todo, report.n_v);
  report.searches_run = todo.size();
  select_order(report, crit);
  return report;
}

SweepReport extend_interval(const SweepReport& report, std::size_t new_xi_max) {
  if (!report.context || !report.context->engine) {
    throw Error(ErrorKind::kConfig, "sweep report carries no data to extend");
  }
  const auto& ctx = *report.context;
  if (new_xi_max <= report.xi_max) {
    throw Error(ErrorKind::kConfig, "new upper bound must exceed the current one");
  }
  if (new_xi_max >= ctx.candidates.size()) {
    throw Error(ErrorKind::kConfig, "upper bound must be below the candidate count");
  }
  SweepReport out = report;
  std::vector<std::size_t> todo;
  for (std::size_t xi = report.xi_max + 1; xi <= new_xi_max; ++xi) todo.push_back(xi);
  auto added = run_batch(ctx, report.algorithm, report.criterion, todo, report.n_v);
  for (auto& e : added) out.entries.push_back(std::move(e));
  out.xi_max = new_xi_max;
  out.searches_run += todo.size();
  select_order(out, report.criterion);
  return out;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_json(const json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void write_sweep_csv(std::ostream& os, const SweepReport& report) {
  os << "xi,J,E,AIC,BIC,FPE,LILC,boundary_flag\n";
  for (const SweepEntry& e : report.entries) {
    const bool flag = report.boundary && report.chosen_xi && e.xi == *report.chosen_xi;
    os << e.xi << ',' << num(e.ok ? e.J : std::nan("")) << ',' << num(e.E) << ',' << num(e.aic)
       << ',' << num(e.bic) << ',' << num(e.fpe) << ',' << num(e.lilc) << ',' << (flag ? 1 : 0)
       << '\n';
  }
}

void write_sweep_json(std::ostream& os, const SweepReport& report) {
  const CandidateSet& cands = report.candidates();
  json j;
  j["algorithm"] = to_string(report.algorithm);
  j["criterion"] = to_string(report.criterion.kind);
  j["rho"] = report.criterion.rho;
  j["prediction"] = to_string(report.criterion.prediction);
  j["model_spec"] = {{"n_u", cands.spec.n_u}, {"n_y", cands.spec.n_y}, {"n_l", cands.spec.n_l}};
  j["xi_min"] = report.xi_min;
  j["xi_max"] = report.xi_max;
  j["n_v"] = report.n_v;
  j["chosen_xi"] = report.chosen_xi ? json(*report.chosen_xi) : json(nullptr);
  j["boundary_flag"] = report.boundary;
  json entries = json::array();
  for (const SweepEntry& e : report.entries) {
    json r;
    r["xi"] = e.xi;
    r["ok"] = e.ok;
    if (!e.ok) r["error"] = e.error;
    r["indices"] = e.subset.indices;
    r["terms"] = subset_terms(e.subset.indices, cands);
    std::vector<double> theta(e.fit.theta.data(), e.fit.theta.data() + e.fit.theta.size());
    r["coefficients"] = theta;
    r["J"] = finite_or_null(e.J);
    r["E"] = finite_or_null(e.E);
    r["AIC"] = finite_or_null(e.aic);
    r["BIC"] = finite_or_null(e.bic);
    r["FPE"] = finite_or_null(e.fpe);
    r["LILC"] = finite_or_null(e.lilc);
    r["rank_deficient"] = e.fit.rank_deficient;
    r["budget_exceeded"] = e.budget_exceeded;
    r["cycle_detected"] = e.cycle_detected;
    r["zero_gain_additions"] = e.zero_gain_additions;
    if (report.algorithm == Algorithm::kO2s) r["max_depth"] = e.max_depth;
    entries.push_back(std::move(r));
  }
  j["entries"] = std::move(entries);
  os << j.dump(2) << '\n';
}

SweepReport read_sweep_json(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("sweep JSON: ") + e.what());
  }
  try {
    auto ctx = std::make_shared<SweepReport::Context>();
    ModelSpec spec{j.at("model_spec").at("n_u").get<int>(), j.at("model_spec").at("n_y").get<int>(),
                   j.at("model_spec").at("n_l").get<int>()};
    ctx->candidates = enumerate_terms(spec);
    SweepReport r;
    r.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    r.criterion.kind = parse_criterion(j.at("criterion").get<std::string>());
    r.criterion.rho = j.value("rho", 2.0);
    r.criterion.prediction = parse_prediction_mode(j.value("prediction", std::string("one_step")));
    r.xi_min = j.at("xi_min").get<std::size_t>();
    r.xi_max = j.at("xi_max").get<std::size_t>();
    r.n_v = j.at("n_v").get<std::size_t>();
    for (const json& e : j.at("entries")) {
      SweepEntry s;
      s.xi = e.at("xi").get<std::size_t>();
      s.ok = e.at("ok").get<bool>();
      s.error = e.value("error", std::string());
      s.subset.indices = e.at("indices").get<Subset>();
      for (TermIndex i : s.subset.indices) {
        if (i >= ctx->candidates.size()) throw Error(ErrorKind::kSchema, "term index out of range");
      }
      // Term strings must agree with the enumerated candidates.
      const auto names = e.at("terms").get<std::vector<std::string>>();
      if (names != subset_terms(s.subset.indices, ctx->candidates)) {
        throw Error(ErrorKind::kSchema, "term list does not match indices at xi " + std::to_string(s.xi));
      }
      s.J = from_json(e.at("J"));
      s.subset.criterion = s.J;
      const auto theta = e.at("coefficients").get<std::vector<double>>();
      s.fit.subset = s.subset;
      s.fit.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
      s.fit.rank_deficient = e.value("rank_deficient", false);
      s.E = from_json(e.at("E"));
      s.aic = from_json(e.at("AIC"));
      s.bic = from_json(e.at("BIC"));
      s.fpe = from_json(e.at("FPE"));
      s.lilc = from_json(e.at("LILC"));
      s.budget_exceeded = e.value("budget_exceeded", false);
      s.cycle_detected = e.value("cycle_detected", false);
      s.zero_gain_additions = e.value("zero_gain_additions", std::size_t{0});
      s.max_depth = e.value("max_depth", std::size_t{0});
      r.entries.push_back(std::move(s));
    }
    if (r.entries.size() != r.xi_max - r.xi_min + 1) {
      throw Error(ErrorKind::kSchema, "sweep JSON does not cover its interval");
    }
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      if (r.entries[i].xi != r.xi_min + i) throw Error(ErrorKind::kSchema, "sweep JSON entries out of order");
    }
    r.context = ctx;
    select_order(r, r.criterion);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("sweep JSON: ") + e.what());
  }
}

}  // namespace narx
