#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sbp/trace.hpp"

namespace sbp {

enum class ScenarioKind { correlated, loop, utilization };

struct SyntheticScenario {
  ScenarioKind kind = ScenarioKind::correlated;
  std::uint32_t correlation_distance = 1;  // k, correlated only
  std::uint32_t noise_branches = 0;        // M, correlated only
  std::uint32_t loop_period = 2;           // s, loop only
  std::uint32_t loop_offset = 0;           // o, loop only: pattern starts at iteration position o
  double branch_frequency = 1.0;           // utilization only
  double offload_ratio = 0.0;              // utilization only
  std::uint32_t static_branches = 64;      // utilization only
  // Record count for correlated/loop; instruction count for utilization.
  std::uint64_t length = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

class scenario_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-branch instructions placed between records of the correlated and loop
// generators (one branch every five instructions).
inline constexpr std::uint32_t kSyntheticInstGap = 4;

// Static branch layout of gen_correlated: A, then M noise branches, then B.
struct CorrelatedLayout {
  std::uint64_t pc_a;
  std::uint64_t pc_b;
  std::vector<std::uint64_t> noise_pcs;
  std::uint32_t block_size;  // M + 2

  // GHR position (0 = most recent) holding the A outcome that B copies, as
  // seen when B is predicted.
  std::uint32_t a_history_index(std::uint32_t k) const { return block_size * k + block_size - 2; }
};

CorrelatedLayout correlated_layout(std::uint32_t noise_branches);

inline constexpr std::uint64_t kLoopPc = 0x401000;

// Blocks of [A, noise..., B]. A and noise are fair coins; B copies A from k
// blocks earlier (fair coin during the first k blocks). Emits whole blocks only.
Trace gen_correlated(const SyntheticScenario& s);

// One static branch with outcome pattern (T x (s-1), N) repeated.
Trace gen_loop(const SyntheticScenario& s);

struct UtilizationTrace {
  Trace trace;
  std::vector<std::uint64_t> static_pcs;
  std::vector<std::uint64_t> offloaded;  // sorted subset of static_pcs
};

// Branches scheduled uniformly over `length` instructions; each record picks a
// static branch uniformly and a fair-coin outcome.
UtilizationTrace gen_utilization(const SyntheticScenario& s);

}  // namespace sbp
