#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "sbp/history_register.hpp"
#include "sbp/trace.hpp"

namespace sbp {

struct HistoryConfig {
  std::uint32_t gh = 512;
  std::uint32_t lh = 512;

  std::uint32_t length() const { return gh + lh; }
  void validate() const;
  bool operator==(const HistoryConfig&) const = default;
};

// Entries are +1 (taken) or -1 (not-taken). GHR segment first, then LHR.
using FeatureVector = std::vector<std::int8_t>;

// Global history plus an unbounded per-pc local history table.
class HistoryState {
 public:
  explicit HistoryState(HistoryConfig config);

  const HistoryConfig& config() const { return config_; }
  const HistoryRegister& ghr() const { return ghr_; }
  // Zero register for pcs never seen.
  const HistoryRegister& lhr(std::uint64_t pc) const;

  void update(std::uint64_t pc, bool taken);
  FeatureVector features(std::uint64_t pc) const;

 private:
  HistoryConfig config_;
  HistoryRegister ghr_;
  HistoryRegister empty_lhr_;
  std::unordered_map<std::uint64_t, HistoryRegister> lhr_map_;
};

// Training samples for one static branch, stored column-major as packed bits
// (bit set = +1) so the solvers can stream one feature at a time.
class TrainingDataset {
 public:
  TrainingDataset() = default;
  TrainingDataset(std::uint64_t target_pc, std::size_t dims);

  std::uint64_t target_pc() const { return target_pc_; }
  std::size_t dims() const { return dims_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t taken_count() const { return taken_; }
  double taken_rate() const { return labels_.empty() ? 0.0 : double(taken_) / double(labels_.size()); }

  bool label(std::size_t i) const { return labels_[i] != 0; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  int feature(std::size_t i, std::size_t j) const {
    return ((columns_[j][i >> 6] >> (i & 63)) & 1u) ? 1 : -1;
  }
  std::span<const std::uint64_t> column(std::size_t j) const { return columns_[j]; }
  FeatureVector row(std::size_t i) const;
  bool columns_equal(std::size_t a, std::size_t b) const { return columns_[a] == columns_[b]; }

  void append(std::span<const std::int8_t> x, bool y);
  // Fast path: sample straight from the history registers.
  void append(const HistoryRegister& ghr, const HistoryRegister& lhr, bool y);

 private:
  void grow();

  std::uint64_t target_pc_ = 0;
  std::size_t dims_ = 0;
  std::size_t taken_ = 0;
  std::vector<std::uint8_t> labels_;
  std::vector<std::vector<std::uint64_t>> columns_;
};

// Replays the trace and records (features before update, outcome) for every
// occurrence of target_pc once gh + lh records have retired.
TrainingDataset collect_dataset(const Trace& trace, const HistoryConfig& config, std::uint64_t target_pc);

// Same as collect_dataset for several targets in one replay.
std::map<std::uint64_t, TrainingDataset> collect_datasets(const Trace& trace, const HistoryConfig& config,
                                                          std::span<const std::uint64_t> target_pcs);

// Per-pc sample count and taken count over the post-warmup records, without
// materializing features.
struct BranchProfile {
  std::uint64_t samples = 0;
  std::uint64_t taken = 0;
  double taken_rate() const { return samples ? double(taken) / double(samples) : 0.0; }
};
std::map<std::uint64_t, BranchProfile> profile_branches(const Trace& trace, const HistoryConfig& config);

}  // namespace sbp
