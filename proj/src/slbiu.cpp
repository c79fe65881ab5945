#include "sbp/slbiu.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace sbp {

void Slbiu::load(const HintSet& hints) {
  hints.validate();
  config_ = hints.config;
  fixed_ = quant_spec_for_width(config_.q);
  entries_.clear();
  index_.clear();
  // intercept plus nnz weights of q bits each fit in q + ceil(log2(nnz + 1)) bits.
  const unsigned sum_width = config_.q + static_cast<unsigned>(std::bit_width(config_.nnz));
  sum_limit_ = sum_width >= 63 ? INT64_MAX : (std::int64_t{1} << (sum_width - 1));
  for (const auto& h : hints.hints) {
    Entry e{h, HistoryRegister(config_.lh), 0, {}};
    if (fixed_) {
      const int f = static_cast<int>(fixed_->fraction_bits);
      e.intercept_code = static_cast<std::int64_t>(std::ldexp(h.intercept, f));
      for (const auto& c : h.entries) e.weight_codes.push_back(static_cast<std::int64_t>(std::ldexp(c.weight, f)));
    }
    index_.emplace(h.pc, static_cast<std::uint32_t>(entries_.size()));
    entries_.push_back(std::move(e));
  }
}

const HistoryRegister* Slbiu::lhr(std::uint64_t pc) const {
  auto it = index_.find(pc);
  return it == index_.end() ? nullptr : &entries_[it->second].lhr;
}

Prediction Slbiu::predict(std::uint64_t pc, const HistoryRegister& ghr) const {
  auto it = index_.find(pc);
  if (it == index_.end()) return {};
  if (ghr.size() < config_.gh) throw std::invalid_argument("GHR shorter than SLBIU gh");
  const Entry& e = entries_[it->second];
  auto history_bit = [&](std::uint32_t j) { return j < config_.gh ? ghr[j] : e.lhr[j - config_.gh]; };

  bool taken;
  if (fixed_) {
    std::int64_t sum = e.intercept_code;
    for (std::size_t k = 0; k < e.hint.entries.size(); ++k)
      sum += history_bit(e.hint.entries[k].index) ? e.weight_codes[k] : -e.weight_codes[k];
    assert(sum < sum_limit_ && sum >= -sum_limit_);
    taken = sum >= 0;
  } else {
    double sum = e.hint.intercept;
    for (const auto& c : e.hint.entries) sum += history_bit(c.index) ? c.weight : -c.weight;
    taken = !(sum < 0.0);
  }
  return {taken, true, kSlbiuLatency};
}

void Slbiu::update(std::uint64_t pc, bool taken) {
  auto it = index_.find(pc);
  if (it != index_.end()) entries_[it->second].lhr.push(taken);
}

}  // namespace sbp
