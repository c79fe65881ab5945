#include "sbp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace sbp {

namespace {

constexpr std::uint64_t kCorrelatedBase = 0x400000;

bool coin(std::mt19937_64& rng) { return (rng() >> 63) != 0; }

bool is_fraction(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void SyntheticScenario::validate() const {
  if (!is_fraction(branch_frequency)) throw scenario_error("branch_frequency must lie in [0,1]");
  if (!is_fraction(offload_ratio)) throw scenario_error("offload_ratio must lie in [0,1]");
  if (length < 1) throw scenario_error("length must be >= 1");
  if (kind == ScenarioKind::correlated && correlation_distance < 1)
    throw scenario_error("correlation_distance must be >= 1");
  if (kind == ScenarioKind::loop && loop_period < 2) throw scenario_error("loop_period must be >= 2");
  if (kind == ScenarioKind::utilization && static_branches < 1)
    throw scenario_error("static_branches must be >= 1");
}

CorrelatedLayout correlated_layout(std::uint32_t noise_branches) {
  CorrelatedLayout layout;
  layout.pc_a = kCorrelatedBase;
  for (std::uint32_t i = 0; i < noise_branches; ++i)
    layout.noise_pcs.push_back(kCorrelatedBase + 0x40 * (i + 1));
  layout.pc_b = kCorrelatedBase + 0x40 * (noise_branches + 1);
  layout.block_size = noise_branches + 2;
  return layout;
}

Trace gen_correlated(const SyntheticScenario& s) {
  if (s.kind != ScenarioKind::correlated) throw scenario_error("gen_correlated needs kind=correlated");
  s.validate();
  const auto layout = correlated_layout(s.noise_branches);
  const std::uint64_t blocks = s.length / layout.block_size;
  if (blocks == 0)
    throw scenario_error("length " + std::to_string(s.length) + " cannot hold one block of " +
                         std::to_string(layout.block_size) + " branches");

  std::mt19937_64 rng(s.seed);
  Trace t;
  t.phase_id = "correlated";
  t.records.reserve(blocks * layout.block_size);
  std::vector<bool> a_outcomes;
  a_outcomes.reserve(blocks);
  for (std::uint64_t b = 0; b < blocks; ++b) {
    const bool a = coin(rng);
    a_outcomes.push_back(a);
    t.push(layout.pc_a, a, kSyntheticInstGap);
    for (auto pc : layout.noise_pcs) t.push(pc, coin(rng), kSyntheticInstGap);
    const bool target = b < s.correlation_distance ? coin(rng) : a_outcomes[b - s.correlation_distance];
    t.push(layout.pc_b, target, kSyntheticInstGap);
  }
  return t;
}

Trace gen_loop(const SyntheticScenario& s) {
  if (s.kind != ScenarioKind::loop) throw scenario_error("gen_loop needs kind=loop");
  s.validate();
  Trace t;
  t.phase_id = "loop";
  t.records.reserve(s.length);
  for (std::uint64_t i = 0; i < s.length; ++i) {
    const std::uint64_t pos = (i + s.loop_offset) % s.loop_period;
    t.push(kLoopPc, pos + 1 != s.loop_period, kSyntheticInstGap);
  }
  return t;
}

UtilizationTrace gen_utilization(const SyntheticScenario& s) {
  if (s.kind != ScenarioKind::utilization) throw scenario_error("gen_utilization needs kind=utilization");
  s.validate();
  UtilizationTrace out;
  out.trace.phase_id = "utilization";
  for (std::uint32_t i = 0; i < s.static_branches; ++i) out.static_pcs.push_back(0x500000 + 0x10 * i);

  std::mt19937_64 rng(s.seed);
  const auto branches = static_cast<std::uint64_t>(std::llround(s.branch_frequency * static_cast<double>(s.length)));
  // Branch k retires at instruction floor((k+1) * length / branches) - 1, so
  // the gaps telescope to exactly length - branches.
  std::uint64_t prev_end = 0;
  for (std::uint64_t k = 0; k < branches; ++k) {
    const std::uint64_t end = (k + 1) * s.length / branches;
    const auto gap = static_cast<std::uint32_t>(end - prev_end - 1);
    prev_end = end;
    const auto pc = out.static_pcs[rng() % out.static_pcs.size()];
    out.trace.push(pc, coin(rng), gap);
  }

  const auto n_off = static_cast<std::size_t>(std::llround(s.offload_ratio * s.static_branches));
  std::vector<std::uint64_t> shuffled = out.static_pcs;
  // Fisher-Yates on raw engine output so the result does not depend on the
  // standard library's distribution implementations.
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng() % i]);
  out.offloaded.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_off));
  std::sort(out.offloaded.begin(), out.offloaded.end());
  return out;
}

}  // namespace sbp
