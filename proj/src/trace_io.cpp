#include <cstdio>

#include "json.hpp"
#include "narx/search.hpp"

namespace narx {

std::vector<std::string> subset_terms(const Subset& subset, const CandidateSet& candidates) {
  std::vector<std::string> out;
  out.reserve(subset.size());
  for (TermIndex i : subset) out.push_back(candidates.terms.at(i).str());
  return out;
}

void write_trace_jsonl(std::ostream& os, const SearchTrace& trace, const CandidateSet& candidates,
                       std::optional<std::size_t> xi_target) {
  for (const TraceStep& s : trace.steps) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["phase"] = to_string(s.phase);
    j["xi_step"] = s.xi_step;
    j["subset"] = subset_terms(s.subset, candidates);
    j["J"] = s.J;
    nlohmann::ordered_json flags;
    flags["accepted"] = s.accepted;
    flags["intermediate"] = s.intermediate;
    if (s.f1) flags["f1"] = *s.f1;
    if (s.f2) flags["f2"] = *s.f2;
    j["flags"] = flags;
    j["depth"] = s.depth ? nlohmann::ordered_json(*s.depth) : nlohmann::ordered_json(nullptr);
    if (s.best_J) j["best_J"] = *s.best_J;
    if (xi_target) j["xi"] = *xi_target;
    os << j.dump() << '\n';
  }
}

void write_trace_csv(std::ostream& os, const SearchTrace& trace, const CandidateSet& candidates) {
  os << "step,phase,xi_step,J,accepted,f1,f2,depth,subset\n";
  char buf[32];
  for (const TraceStep& s : trace.steps) {
    std::snprintf(buf, sizeof buf, "%.17g", s.J);
    os << s.step << ',' << to_string(s.phase) << ',' << s.xi_step << ',' << buf << ','
       << (s.accepted ? 1 : 0) << ',';
    if (s.f1) os << *s.f1;
    os << ',';
    if (s.f2) os << *s.f2;
    os << ',';
    if (s.depth) os << *s.depth;
    os << ",\"";
    const auto names = subset_terms(s.subset, candidates);
    for (std::size_t i = 0; i < names.size(); ++i) os << (i ? " + " : "") << names[i];
    os << "\"\n";
  }
}

}  // namespace narx
