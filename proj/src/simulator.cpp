#include "sbp/simulator.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "parallel.hpp"
#include "sbp/slbiu.hpp"

namespace sbp {

namespace {

using nlohmann::json;

void check_hints(const SimConfig& config) {
  const HintSet& hs = *config.hints;
  const SlbiuConfig& c = hs.config;
  if (c.lh != config.history.lh)
    throw config_error("hint set lh=" + std::to_string(c.lh) + " disagrees with history lh=" +
                       std::to_string(config.history.lh));
  if (c.gh > config.history.gh)
    throw config_error("hint set gh=" + std::to_string(c.gh) + " exceeds history gh=" +
                       std::to_string(config.history.gh));
  if (config.q && c.q != *config.q)
    throw config_error("hint set q=" + std::to_string(c.q) + " disagrees with expected q=" +
                       std::to_string(*config.q));
}

std::string hex(std::uint64_t pc) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%" PRIx64, pc);
  return buf;
}

json to_json(const SimReport& r) {
  json branches = json::array();
  for (const auto& [pc, b] : r.per_branch)
    branches.push_back({{"pc", hex(pc)},
                        {"occurrences", b.occurrences},
                        {"mispredictions", b.mispredictions},
                        {"slbiu_hits", b.slbiu_hits},
                        {"allocations", b.allocations},
                        {"unique_entries_avg", b.unique_entries_avg}});
  return {{"phase_id", r.phase_id},
          {"baseline", r.baseline},
          {"total_instructions", r.total_instructions},
          {"mispredictions", r.mispredictions},
          {"mpki", r.mpki},
          {"offloaded_count", r.offloaded_count},
          {"per_branch", std::move(branches)}};
}

json to_json(const HintSet& hs) {
  json entries = json::array();
  for (const auto& h : hs.hints) entries.push_back({{"pc", hex(h.pc)}, {"intercept", h.intercept}, {"nnz", h.entries.size()}});
  const auto& c = hs.config;
  return {{"lh", c.lh}, {"gh", c.gh}, {"n", c.n},   {"nnz", c.nnz}, {"q", c.q},
          {"p", c.p},   {"storage_bits", storage_bits(c)}, {"entries", std::move(entries)}};
}

}  // namespace

SimReport run(const Trace& trace, const SimConfig& config) {
  auto baseline = make_baseline(config.baseline);
  return run(trace, config, *baseline);
}

SimReport run(const Trace& trace, const SimConfig& config, BaselinePredictor& baseline) {
  Slbiu slbiu;
  const bool coupled = config.hints.has_value();
  std::size_t ghr_len = std::max<std::size_t>({config.history.gh, baseline.history_length(), 1});
  if (coupled) {
    check_hints(config);
    try {
      slbiu.load(*config.hints);
    } catch (const hint_error& e) {
      throw config_error(std::string("hint set rejected: ") + e.what());
    }
    ghr_len = std::max<std::size_t>(ghr_len, config.hints->config.gh);
  }
  HistoryRegister ghr(ghr_len);

  std::unordered_map<std::uint64_t, BranchReport> branches;
  SimReport report;
  report.phase_id = trace.phase_id;
  report.baseline = baseline.name();
  for (const auto& rec : trace.records) {
    BranchReport& br = branches[rec.pc];
    ++br.occurrences;
    Prediction pred;
    if (coupled) pred = slbiu.predict(rec.pc, ghr);
    const bool hit = pred.hit;
    if (!hit) pred = baseline.predict(rec.pc, ghr);
    if (pred.taken != rec.taken) {
      ++br.mispredictions;
      ++report.mispredictions;
    }
    if (hit) ++br.slbiu_hits;
    baseline.update(rec.pc, rec.taken, ghr, hit);
    if (coupled) slbiu.update(rec.pc, rec.taken);
    ghr.push(rec.taken);
  }

  for (auto& [pc, br] : branches) {
    const auto s = baseline.stats(pc);
    br.allocations = s.allocations;
    br.unique_entries_avg = s.unique_entries_avg;
    report.per_branch.emplace(pc, br);
  }
  report.total_instructions = trace.total_instructions;
  report.mpki = trace.total_instructions ? 1000.0 * double(report.mispredictions) / double(trace.total_instructions)
                                         : 0.0;
  report.offloaded_count = slbiu.size();
  return report;
}

std::map<std::uint64_t, std::uint64_t> count_primary_correct(const Trace& trace, const BaselineConfig& baseline,
                                                             const HistoryConfig& history) {
  auto bp = make_baseline(baseline);
  HistoryRegister ghr(std::max<std::size_t>({history.gh, bp->history_length(), 1}));
  const std::uint64_t warmup = history.length();
  std::map<std::uint64_t, std::uint64_t> correct;
  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    const auto& rec = trace.records[r];
    const bool taken = bp->predict(rec.pc, ghr).taken;
    if (r >= warmup && taken == rec.taken) ++correct[rec.pc];
    bp->update(rec.pc, rec.taken, ghr, false);
    ghr.push(rec.taken);
  }
  return correct;
}

PhaseResult run_phase(const Trace& trace, const PipelineConfig& config) {
  config.history.validate();
  config.solver.validate();
  PhaseResult out;
  out.phase_id = trace.phase_id;
  out.baseline = run(trace, SimConfig{config.baseline, config.history, std::nullopt, std::nullopt});

  std::vector<std::uint64_t> pcs;
  for (const auto& [pc, prof] : profile_branches(trace, config.history))
    if (screen(prof.samples, prof.taken_rate(), config.screen)) pcs.push_back(pc);

  const auto datasets = collect_datasets(trace, config.history, pcs);
  const auto primary = count_primary_correct(trace, config.baseline, config.history);

  out.candidates.resize(pcs.size());
  parallel_for(pcs.size(), config.jobs, [&](std::size_t i) {
    const TrainingDataset& data = datasets.at(pcs[i]);
    SparseModel model = dedup(data, lambda_search(data, config.solver), config.solver);
    model = quantize_for_width(model, config.q);
    model.accuracy = eval_accuracy(model, data);
    auto& c = out.candidates[i];
    c.offline_correct = count_correct(model, data);
    auto it = primary.find(pcs[i]);
    c.primary_correct = it == primary.end() ? 0 : it->second;
    c.model = std::move(model);
  });

  const SelectionLimits limits{config.budget_bits, config.p, config.q, config.history.lh, config.history.gh};
  out.selection = select(out.candidates, config.policy, limits, trace.phase_id);
  if (config.hint_dir) {
    std::filesystem::create_directories(*config.hint_dir);
    write_hintset(out.selection.hint_set, *config.hint_dir / (trace.phase_id + ".sbph"));
  }
  out.coupled = run(trace, SimConfig{config.baseline, config.history, out.selection.hint_set, config.q});
  return out;
}

std::vector<PhaseResult> run_pipeline(std::span<const Trace> traces, const PipelineConfig& config) {
  if (traces.empty()) throw config_error("pipeline needs at least one trace");
  std::vector<PhaseResult> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(run_phase(t, config));
  return out;
}

Scurve report_scurve(std::span<const ScurveInput> inputs) {
  Scurve s;
  for (const auto& in : inputs) {
    ScurveRow r{in.name, in.baseline_mpki, in.coupled_mpki, in.baseline_mpki - in.coupled_mpki, 0.0};
    if (in.baseline_mpki != 0.0) r.rel_improvement = r.abs_improvement / in.baseline_mpki;
    s.rows.push_back(std::move(r));
  }
  std::sort(s.rows.begin(), s.rows.end(), [](const ScurveRow& a, const ScurveRow& b) {
    return a.baseline_mpki != b.baseline_mpki ? a.baseline_mpki < b.baseline_mpki : a.name < b.name;
  });
  const double inf = std::numeric_limits<double>::infinity();
  for (auto [lo, hi] : {std::pair{0.01, 1.0}, std::pair{1.0, 5.0}, std::pair{5.0, inf}}) {
    ScurveBucket b{lo, hi, 0, 0.0, 0.0};
    for (const auto& r : s.rows)
      if (r.baseline_mpki >= lo && r.baseline_mpki < hi) {
        ++b.count;
        b.mean_abs_improvement += r.abs_improvement;
        b.mean_rel_improvement += r.rel_improvement;
      }
    if (b.count) {
      b.mean_abs_improvement /= double(b.count);
      b.mean_rel_improvement /= double(b.count);
    }
    s.buckets.push_back(b);
  }
  return s;
}

std::string report_json(const SimReport& report) { return to_json(report).dump(2) + "\n"; }

std::string phase_report_json(const SimReport& baseline, const SimReport* coupled, const HintSet* hints) {
  json j = {{"phase_id", baseline.phase_id},
            {"baseline", to_json(baseline)},
            {"coupled", coupled ? to_json(*coupled) : json(nullptr)},
            {"hints", hints ? to_json(*hints) : json(nullptr)}};
  return j.dump(2) + "\n";
}

std::string report_text(const SimReport& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "phase %s  baseline %s  instructions %" PRIu64 "  mispredictions %" PRIu64
                "  mpki %.4f  offloaded %" PRIu64 "\n",
                r.phase_id.c_str(), r.baseline.c_str(), r.total_instructions, r.mispredictions, r.mpki,
                r.offloaded_count);
  out << buf;
  out << "pc                  occurrences  mispredictions  slbiu_hits  allocations  unique_entries_avg\n";
  for (const auto& [pc, b] : r.per_branch) {
    std::snprintf(buf, sizeof buf, "%-18s  %11" PRIu64 "  %14" PRIu64 "  %10" PRIu64 "  %11" PRIu64 "  %18.2f\n",
                  hex(pc).c_str(), b.occurrences, b.mispredictions, b.slbiu_hits, b.allocations,
                  b.unique_entries_avg);
    out << buf;
  }
  return out.str();
}

std::string scurve_text(const Scurve& s) {
  std::ostringstream out;
  char buf[200];
  out << "name                            baseline    coupled   abs_impr   rel_impr\n";
  for (const auto& r : s.rows) {
    std::snprintf(buf, sizeof buf, "%-30s %9.4f  %9.4f  %9.4f  %8.2f%%\n", r.name.c_str(), r.baseline_mpki,
                  r.coupled_mpki, r.abs_improvement, 100.0 * r.rel_improvement);
    out << buf;
  }
  out << "bucket            count  mean_abs_impr  mean_rel_impr\n";
  for (const auto& b : s.buckets) {
    std::string range = "[" + std::to_string(b.low).substr(0, 4) + ", " +
                        (std::isinf(b.high) ? std::string("inf") : std::to_string(b.high).substr(0, 4)) + ")";
    std::snprintf(buf, sizeof buf, "%-16s  %5zu  %13.4f  %12.2f%%\n", range.c_str(), b.count,
                  b.mean_abs_improvement, 100.0 * b.mean_rel_improvement);
    out << buf;
  }
  return out.str();
}

std::string scurve_csv(const Scurve& s) {
  std::ostringstream out;
  char buf[200];
  out << "rank,name,baseline_mpki,coupled_mpki,abs_improvement,rel_improvement\n";
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const auto& r = s.rows[i];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g\n", i, r.name.c_str(), r.baseline_mpki,
                  r.coupled_mpki, r.abs_improvement, r.rel_improvement);
    out << buf;
  }
  return out.str();
}

ScurveInput read_scurve_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path.string());
  json j;
  try {
    j = json::parse(in);
    ScurveInput s;
    if (j.contains("mpki")) {
      s.name = j.at("phase_id").get<std::string>();
      s.baseline_mpki = s.coupled_mpki = j.at("mpki").get<double>();
      return s;
    }
    s.name = j.at("phase_id").get<std::string>();
    s.baseline_mpki = j.at("baseline").at("mpki").get<double>();
    const auto& c = j.at("coupled");
    s.coupled_mpki = c.is_null() ? s.baseline_mpki : c.at("mpki").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed report " + path.string() + ": " + e.what());
  }
}

}  // namespace sbp
