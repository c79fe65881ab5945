#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "sbp/hints.hpp"
#include "sbp/history_register.hpp"

namespace sbp {

struct Prediction {
  bool taken = false;
  bool hit = false;
  std::uint32_t latency_cycles = 0;
};

// Lookup, history select + sign flip, adder tree.
inline constexpr std::uint32_t kSlbiuLatency = 3;

// Functional model of the sparse linear branch inference unit: a fully
// associative pc-indexed CAM of hints, each paired with its own local history.
class Slbiu {
 public:
  Slbiu() = default;
  explicit Slbiu(const HintSet& hints) { load(hints); }

  // Replaces the whole CAM and zeroes every LHR. Throws hint_error when the
  // set exceeds N or does not encode under its config.
  void load(const HintSet& hints);

  const SlbiuConfig& config() const { return config_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::uint64_t pc) const { return index_.contains(pc); }
  const HistoryRegister* lhr(std::uint64_t pc) const;

  // Miss: hit = false and `taken` carries no meaning. Hit: sign of
  // intercept + sum of sign-flipped weights over the selected history bits
  // (GHR bits 0..gh-1, then the entry's LHR). ghr must hold at least gh bits.
  Prediction predict(std::uint64_t pc, const HistoryRegister& ghr) const;

  // Shifts the outcome into the entry's LHR; weights never change. No-op on miss.
  void update(std::uint64_t pc, bool taken);

  bool operator==(const Slbiu&) const = default;

 private:
  struct Entry {
    SparsityHint hint;
    HistoryRegister lhr;
    std::int64_t intercept_code = 0;
    std::vector<std::int64_t> weight_codes;  // fixed-point formats only

    bool operator==(const Entry&) const = default;
  };

  SlbiuConfig config_;
  std::optional<QuantSpec> fixed_;
  std::int64_t sum_limit_ = 0;
  std::vector<Entry> entries_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

}  // namespace sbp
