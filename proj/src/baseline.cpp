#include "sbp/baseline.hpp"

#include <algorithm>
#include <stdexcept>

namespace sbp {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
}

std::uint8_t bump(std::uint8_t c, bool taken) {
  return taken ? static_cast<std::uint8_t>(std::min(c + 1, 3)) : static_cast<std::uint8_t>(std::max(c - 1, 0));
}

std::int8_t bump3(std::int8_t c, bool taken) {
  return taken ? static_cast<std::int8_t>(std::min(c + 1, 3)) : static_cast<std::int8_t>(std::max(c - 1, -4));
}

}  // namespace

Gshare::Gshare(GshareConfig config) : config_(config), counters_(std::size_t{1} << config.log_entries, 1) {
  if (config.log_entries == 0 || config.log_entries > 28) throw std::invalid_argument("gshare log_entries out of range");
}

std::size_t Gshare::index(std::uint64_t pc, const HistoryRegister& ghr) const {
  const std::uint64_t h = ghr.fold(config_.history_length, config_.log_entries);
  return static_cast<std::size_t>(((pc >> 2) ^ h) & (counters_.size() - 1));
}

Prediction Gshare::predict(std::uint64_t pc, const HistoryRegister& ghr) const {
  return {counters_[index(pc, ghr)] >= 2, false, 1};
}

void Gshare::update(std::uint64_t pc, bool taken, const HistoryRegister& ghr, bool suppress) {
  if (suppress) return;
  auto& c = counters_[index(pc, ghr)];
  c = bump(c, taken);
}

std::uint64_t Gshare::state_digest() const {
  std::uint64_t h = kFnvOffset;
  for (auto c : counters_) mix(h, c);
  return h;
}

std::vector<std::uint32_t> TageLiteConfig::history_lengths() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t t = 0; t < tables; ++t)
    out.push_back(static_cast<std::uint32_t>(std::min<std::uint64_t>(std::uint64_t{min_history} << t, max_history)));
  return out;
}

void TageLiteConfig::validate() const {
  if (tables == 0) throw std::invalid_argument("tage-lite needs at least one tagged table");
  if (log_entries == 0 || log_entries > 24 || log_bimodal == 0 || log_bimodal > 24)
    throw std::invalid_argument("tage-lite table size out of range");
  if (tag_bits < 2 || tag_bits > 16) throw std::invalid_argument("tage-lite tag_bits must lie in [2,16]");
  if (min_history == 0) throw std::invalid_argument("tage-lite min_history must be positive");
  const auto l = history_lengths();
  for (std::size_t t = 1; t < l.size(); ++t)
    if (l[t] <= l[t - 1]) throw std::invalid_argument("tage-lite history lengths must strictly increase");
  if (snapshot_interval == 0 || u_reset_period == 0) throw std::invalid_argument("tage-lite periods must be positive");
}

TageLite::TageLite(TageLiteConfig config)
    : config_(config), bimodal_(std::size_t{1} << config.log_bimodal, 1) {
  config_.validate();
  lengths_ = config_.history_lengths();
  tables_.assign(config_.tables, std::vector<Entry>(std::size_t{1} << config_.log_entries));
}

std::size_t TageLite::bimodal_index(std::uint64_t pc) const { return (pc >> 2) & (bimodal_.size() - 1); }

TageLite::Lookup TageLite::lookup(std::uint64_t pc, const HistoryRegister& ghr) const {
  Lookup l;
  const std::uint32_t n = config_.tables;
  l.index.resize(n);
  l.tag.resize(n);
  const std::uint64_t imask = (std::uint64_t{1} << config_.log_entries) - 1;
  const std::uint64_t tmask = (std::uint64_t{1} << config_.tag_bits) - 1;
  for (std::uint32_t t = 0; t < n; ++t) {
    const std::uint32_t len = lengths_[t];
    const std::uint64_t fi = ghr.fold(len, config_.log_entries);
    const std::uint64_t ft = ghr.fold(len, config_.tag_bits) ^ (ghr.fold(len, config_.tag_bits - 1) << 1);
    l.index[t] = static_cast<std::uint32_t>(((pc >> 2) ^ (pc >> (2 + config_.log_entries + t)) ^ fi) & imask);
    l.tag[t] = static_cast<std::uint16_t>(((pc >> 2) ^ ft) & tmask);
  }
  for (int t = static_cast<int>(n) - 1; t >= 0; --t) {
    const Entry& e = tables_[t][l.index[t]];
    if (!e.valid || e.tag != l.tag[t]) continue;
    if (l.provider < 0)
      l.provider = t;
    else {
      l.alt = t;
      break;
    }
  }
  l.alt_pred = l.alt >= 0 ? tables_[l.alt][l.index[l.alt]].ctr >= 0 : bimodal_[bimodal_index(pc)] >= 2;
  if (l.provider >= 0) {
    const Entry& p = tables_[l.provider][l.index[l.provider]];
    l.provider_pred = p.ctr >= 0;
    const bool weak_new = (p.ctr == 0 || p.ctr == -1) && p.u == 0;
    l.final_pred = weak_new ? l.alt_pred : l.provider_pred;
  } else {
    l.provider_pred = l.alt_pred;
    l.final_pred = l.alt_pred;
  }
  return l;
}

Prediction TageLite::predict(std::uint64_t pc, const HistoryRegister& ghr) const {
  return {lookup(pc, ghr).final_pred, false, 2};
}

void TageLite::update(std::uint64_t pc, bool taken, const HistoryRegister& ghr, bool suppress) {
  if (++ticks_ % config_.snapshot_interval == 0) snapshot();
  if (suppress) return;

  const Lookup l = lookup(pc, ghr);
  if (l.provider >= 0) {
    Entry& p = tables_[l.provider][l.index[l.provider]];
    if (l.provider_pred != l.alt_pred) {
      if (l.provider_pred == taken)
        p.u = static_cast<std::uint8_t>(std::min(p.u + 1, 3));
      else
        p.u = static_cast<std::uint8_t>(std::max(p.u - 1, 0));
    }
    if (p.u == 0) {
      if (l.alt >= 0) {
        Entry& a = tables_[l.alt][l.index[l.alt]];
        a.ctr = bump3(a.ctr, taken);
      } else {
        auto& b = bimodal_[bimodal_index(pc)];
        b = bump(b, taken);
      }
    }
    p.ctr = bump3(p.ctr, taken);
  } else {
    auto& b = bimodal_[bimodal_index(pc)];
    b = bump(b, taken);
  }

  const int longest = static_cast<int>(config_.tables) - 1;
  if (l.final_pred != taken && l.provider < longest) {
    bool allocated = false;
    for (int t = l.provider + 1; t <= longest; ++t) {
      Entry& e = tables_[t][l.index[t]];
      if (e.valid && e.u != 0) continue;
      e = {l.tag[t], static_cast<std::int8_t>(taken ? 0 : -1), 0, true, pc};
      ++allocations_[pc];
      allocated = true;
      break;
    }
    if (!allocated)
      for (int t = l.provider + 1; t <= longest; ++t) {
        Entry& e = tables_[t][l.index[t]];
        e.u = static_cast<std::uint8_t>(std::max(e.u - 1, 0));
      }
  }

  if (++updates_ % config_.u_reset_period == 0)
    for (auto& table : tables_)
      for (auto& e : table) e.u >>= 1;
}

void TageLite::snapshot() {
  ++snapshots_;
  for (const auto& table : tables_)
    for (const auto& e : table)
      if (e.valid) ++snapshot_sum_[e.owner];
}

std::size_t TageLite::live_entries(std::uint64_t pc) const {
  std::size_t n = 0;
  for (const auto& table : tables_)
    for (const auto& e : table) n += (e.valid && e.owner == pc) ? 1 : 0;
  return n;
}

BaselineBranchStats TageLite::stats(std::uint64_t pc) const {
  BaselineBranchStats s;
  if (auto it = allocations_.find(pc); it != allocations_.end()) s.allocations = it->second;
  if (snapshots_ == 0) {
    s.unique_entries_avg = static_cast<double>(live_entries(pc));
  } else if (auto it = snapshot_sum_.find(pc); it != snapshot_sum_.end()) {
    s.unique_entries_avg = static_cast<double>(it->second) / static_cast<double>(snapshots_);
  }
  return s;
}

std::uint64_t TageLite::state_digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& table : tables_)
    for (const auto& e : table) {
      mix(h, e.tag);
      mix(h, static_cast<std::uint8_t>(e.ctr));
      mix(h, e.u);
      mix(h, e.valid);
      mix(h, e.owner);
    }
  for (auto c : bimodal_) mix(h, c);
  mix(h, updates_);
  return h;
}

std::unique_ptr<BaselinePredictor> make_baseline(const BaselineConfig& config) {
  if (config.kind == BaselineKind::gshare) return std::make_unique<Gshare>(config.gshare);
  return std::make_unique<TageLite>(config.tage);
}

BaselineKind parse_baseline_kind(const std::string& name) {
  if (name == "gshare") return BaselineKind::gshare;
  if (name == "tage-lite" || name == "tage_lite") return BaselineKind::tage_lite;
  throw std::invalid_argument("unknown baseline '" + name + "' (expected gshare or tage-lite)");
}

std::string to_string(BaselineKind kind) { return kind == BaselineKind::gshare ? "gshare" : "tage-lite"; }

}  // namespace sbp
