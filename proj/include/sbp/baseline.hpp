#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sbp/history_register.hpp"
#include "sbp/slbiu.hpp"

namespace sbp {

struct BaselineBranchStats {
  std::uint64_t allocations = 0;
  // Mean over periodic snapshots of live entries allocated by the branch.
  double unique_entries_avg = 0.0;
};

// Primary predictor interface. predict() never mutates state; update() with
// suppress = true leaves every table untouched (the halt-update signal sent
// on an SLBIU hit). Both receive the shared GHR as it was before the branch.
class BaselinePredictor {
 public:
  virtual ~BaselinePredictor() = default;

  virtual std::string name() const = 0;
  virtual std::uint32_t history_length() const = 0;  // GHR bits consumed
  virtual Prediction predict(std::uint64_t pc, const HistoryRegister& ghr) const = 0;
  virtual void update(std::uint64_t pc, bool taken, const HistoryRegister& ghr, bool suppress) = 0;
  virtual BaselineBranchStats stats(std::uint64_t pc) const = 0;
  // Hash of the prediction state (tables, counters, clocks), excluding statistics.
  virtual std::uint64_t state_digest() const = 0;
};

struct GshareConfig {
  std::uint32_t log_entries = 12;
  std::uint32_t history_length = 12;  // folded into log_entries bits
};

// 2-bit counters indexed by pc XOR folded GHR, initialized weakly not-taken.
class Gshare final : public BaselinePredictor {
 public:
  explicit Gshare(GshareConfig config = {});

  std::string name() const override { return "gshare"; }
  std::uint32_t history_length() const override { return config_.history_length; }
  Prediction predict(std::uint64_t pc, const HistoryRegister& ghr) const override;
  void update(std::uint64_t pc, bool taken, const HistoryRegister& ghr, bool suppress) override;
  BaselineBranchStats stats(std::uint64_t) const override { return {}; }
  std::uint64_t state_digest() const override;

  std::uint8_t counter(std::size_t i) const { return counters_[i]; }
  std::size_t index(std::uint64_t pc, const HistoryRegister& ghr) const;

 private:
  GshareConfig config_;
  std::vector<std::uint8_t> counters_;
};

struct TageLiteConfig {
  std::uint32_t tables = 5;
  std::uint32_t log_entries = 9;  // per tagged table
  std::uint32_t log_bimodal = 12;
  std::uint32_t tag_bits = 9;
  std::uint32_t min_history = 4;    // table t uses min_history * 2^t ...
  std::uint32_t max_history = 128;  // ... capped here
  std::uint64_t u_reset_period = 1 << 18;
  std::uint64_t snapshot_interval = 100'000;

  std::vector<std::uint32_t> history_lengths() const;
  void validate() const;
};

// Simplified TAGE: a bimodal base plus tagged tables on geometric history
// lengths, 3-bit counters, 2-bit usefulness, allocation on misprediction into
// a longer table. No statistical corrector and no loop predictor.
class TageLite final : public BaselinePredictor {
 public:
  explicit TageLite(TageLiteConfig config = {});

  std::string name() const override { return "tage-lite"; }
  std::uint32_t history_length() const override { return lengths_.back(); }
  Prediction predict(std::uint64_t pc, const HistoryRegister& ghr) const override;
  void update(std::uint64_t pc, bool taken, const HistoryRegister& ghr, bool suppress) override;
  BaselineBranchStats stats(std::uint64_t pc) const override;
  std::uint64_t state_digest() const override;

  std::size_t live_entries(std::uint64_t pc) const;

 private:
  struct Entry {
    std::uint16_t tag = 0;
    std::int8_t ctr = 0;  // -4..3, taken when >= 0
    std::uint8_t u = 0;   // 0..3
    bool valid = false;
    std::uint64_t owner = 0;
  };
  struct Lookup {
    std::vector<std::uint32_t> index;
    std::vector<std::uint16_t> tag;
    int provider = -1;
    int alt = -1;  // -1 = bimodal
    bool provider_pred = false;
    bool alt_pred = false;
    bool final_pred = false;
  };

  Lookup lookup(std::uint64_t pc, const HistoryRegister& ghr) const;
  std::size_t bimodal_index(std::uint64_t pc) const;
  void snapshot();

  TageLiteConfig config_;
  std::vector<std::uint32_t> lengths_;
  std::vector<std::vector<Entry>> tables_;
  std::vector<std::uint8_t> bimodal_;
  std::uint64_t updates_ = 0;  // non-suppressed updates, drives usefulness aging
  std::uint64_t ticks_ = 0;    // every update call, drives snapshots
  std::uint64_t snapshots_ = 0;
  std::map<std::uint64_t, std::uint64_t> allocations_;
  std::map<std::uint64_t, std::uint64_t> snapshot_sum_;
};

enum class BaselineKind { gshare, tage_lite };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::tage_lite;
  GshareConfig gshare;
  TageLiteConfig tage;
};

std::unique_ptr<BaselinePredictor> make_baseline(const BaselineConfig& config);
BaselineKind parse_baseline_kind(const std::string& name);
std::string to_string(BaselineKind kind);

}  // namespace sbp
