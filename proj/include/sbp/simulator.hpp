#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbp/baseline.hpp"
#include "sbp/hints.hpp"
#include "sbp/history.hpp"
#include "sbp/trace.hpp"

namespace sbp {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  BaselineConfig baseline;
  HistoryConfig history;
  // Absent = baseline-only run. Loaded into the SLBIU before the first record.
  std::optional<HintSet> hints;
  // When set, the hint set's weight width must equal it.
  std::optional<std::uint32_t> q;
};

struct BranchReport {
  std::uint64_t occurrences = 0;
  std::uint64_t mispredictions = 0;
  std::uint64_t slbiu_hits = 0;
  std::uint64_t allocations = 0;
  double unique_entries_avg = 0.0;
  bool operator==(const BranchReport&) const = default;
};

struct SimReport {
  std::string phase_id;
  std::string baseline;
  std::uint64_t total_instructions = 0;
  std::uint64_t mispredictions = 0;
  double mpki = 0.0;
  std::map<std::uint64_t, BranchReport> per_branch;
  std::uint64_t offloaded_count = 0;
  bool operator==(const SimReport&) const = default;
};

// Replays the whole trace (no warmup exclusion). On an SLBIU hit the
// prediction comes from the SLBIU and the baseline update is suppressed; the
// shared GHR is updated for every record either way. Throws config_error when
// the hint set disagrees with the history config (lh, gh) or the expected q.
SimReport run(const Trace& trace, const SimConfig& config);
// Same, driving a caller-owned baseline (stats are read from it at the end).
SimReport run(const Trace& trace, const SimConfig& config, BaselinePredictor& baseline);

// Correct baseline-only predictions per pc over the occurrences that
// collect_dataset would sample (record index >= gh + lh).
std::map<std::uint64_t, std::uint64_t> count_primary_correct(const Trace& trace, const BaselineConfig& baseline,
                                                             const HistoryConfig& history);

struct PipelineConfig {
  std::uint64_t budget_bits = 2 * 1024 * 8;
  ScorePolicy policy = ScorePolicy::relative;
  std::uint32_t q = 8;  // 8 = Q3.4, 16 = Q3.12, 32 = full precision
  std::uint32_t p = 64;
  HistoryConfig history;
  BaselineConfig baseline;
  SolverConfig solver;
  BranchScreen screen;
  std::optional<std::filesystem::path> hint_dir;  // writes <phase_id>.sbph when set
  unsigned jobs = 1;
};

struct PhaseResult {
  std::string phase_id;
  SimReport baseline;
  SimReport coupled;
  Selection selection;
  std::vector<ScoredCandidate> candidates;  // quantized, in pc order
};

// Profile -> screen -> lambda_search -> dedup -> quantize -> score -> select
// -> coupled simulation, once per trace. Each trace is its own phase.
PhaseResult run_phase(const Trace& trace, const PipelineConfig& config);
std::vector<PhaseResult> run_pipeline(std::span<const Trace> traces, const PipelineConfig& config);

struct ScurveInput {
  std::string name;
  double baseline_mpki = 0.0;
  double coupled_mpki = 0.0;
};

struct ScurveRow {
  std::string name;
  double baseline_mpki = 0.0;
  double coupled_mpki = 0.0;
  double abs_improvement = 0.0;  // baseline - coupled
  double rel_improvement = 0.0;  // abs / baseline, 0 when baseline is 0
};

struct ScurveBucket {
  double low = 0.0;
  double high = 0.0;  // infinity for the last bucket
  std::size_t count = 0;
  double mean_abs_improvement = 0.0;
  double mean_rel_improvement = 0.0;
};

struct Scurve {
  std::vector<ScurveRow> rows;  // ascending baseline MPKI, ties by name
  std::vector<ScurveBucket> buckets;  // [0.01,1), [1,5), [5,inf)
};

Scurve report_scurve(std::span<const ScurveInput> inputs);

// Reports. JSON keys are sorted and per_branch is an array ordered by pc, so
// equal reports serialize to identical bytes.
std::string report_json(const SimReport& report);
std::string phase_report_json(const SimReport& baseline, const SimReport* coupled, const HintSet* hints);
std::string report_text(const SimReport& report);
std::string scurve_text(const Scurve& s);
std::string scurve_csv(const Scurve& s);
// Reads a phase report (or a bare SimReport) back into an S-curve input;
// coupled MPKI falls back to the baseline when absent.
ScurveInput read_scurve_input(const std::filesystem::path& path);

}  // namespace sbp
