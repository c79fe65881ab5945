#include "sbp/history.hpp"

#include <stdexcept>

namespace sbp {

void HistoryConfig::validate() const {
  if (gh + lh < 1) throw std::invalid_argument("history length gh + lh must be >= 1");
}

HistoryState::HistoryState(HistoryConfig config)
    : config_(config), ghr_(config.gh), empty_lhr_(config.lh) {
  config_.validate();
}

const HistoryRegister& HistoryState::lhr(std::uint64_t pc) const {
  auto it = lhr_map_.find(pc);
  return it == lhr_map_.end() ? empty_lhr_ : it->second;
}

void HistoryState::update(std::uint64_t pc, bool taken) {
  ghr_.push(taken);
  auto [it, inserted] = lhr_map_.try_emplace(pc, config_.lh);
  it->second.push(taken);
}

FeatureVector HistoryState::features(std::uint64_t pc) const {
  FeatureVector x(config_.length());
  const auto& local = lhr(pc);
  for (std::uint32_t i = 0; i < config_.gh; ++i) x[i] = ghr_[i] ? 1 : -1;
  for (std::uint32_t i = 0; i < config_.lh; ++i) x[config_.gh + i] = local[i] ? 1 : -1;
  return x;
}

TrainingDataset::TrainingDataset(std::uint64_t target_pc, std::size_t dims)
    : target_pc_(target_pc), dims_(dims), columns_(dims) {}

FeatureVector TrainingDataset::row(std::size_t i) const {
  FeatureVector x(dims_);
  for (std::size_t j = 0; j < dims_; ++j) x[j] = static_cast<std::int8_t>(feature(i, j));
  return x;
}

void TrainingDataset::grow() {
  if ((labels_.size() & 63) == 0)
    for (auto& c : columns_) c.push_back(0);
}

void TrainingDataset::append(std::span<const std::int8_t> x, bool y) {
  if (x.size() != dims_) throw std::invalid_argument("feature vector length mismatch");
  grow();
  const std::size_t i = labels_.size();
  for (std::size_t j = 0; j < dims_; ++j)
    if (x[j] > 0) columns_[j][i >> 6] |= std::uint64_t{1} << (i & 63);
  labels_.push_back(y ? 1 : 0);
  taken_ += y ? 1 : 0;
}

void TrainingDataset::append(const HistoryRegister& ghr, const HistoryRegister& lhr, bool y) {
  if (ghr.size() + lhr.size() != dims_) throw std::invalid_argument("history length mismatch");
  grow();
  const std::size_t i = labels_.size();
  const std::uint64_t bit = std::uint64_t{1} << (i & 63);
  const std::size_t word = i >> 6;
  auto scatter = [&](const HistoryRegister& reg, std::size_t base) {
    auto words = reg.words();
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::uint64_t v = words[w];
      while (v) {
        const int b = __builtin_ctzll(v);
        columns_[base + w * 64 + static_cast<std::size_t>(b)][word] |= bit;
        v &= v - 1;
      }
    }
  };
  scatter(ghr, 0);
  scatter(lhr, ghr.size());
  labels_.push_back(y ? 1 : 0);
  taken_ += y ? 1 : 0;
}

std::map<std::uint64_t, TrainingDataset> collect_datasets(const Trace& trace, const HistoryConfig& config,
                                                          std::span<const std::uint64_t> target_pcs) {
  std::map<std::uint64_t, TrainingDataset> out;
  for (auto pc : target_pcs) out.try_emplace(pc, pc, config.length());
  HistoryState state(config);
  const std::uint64_t warmup = config.length();
  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    const auto& rec = trace.records[r];
    if (r >= warmup) {
      auto it = out.find(rec.pc);
      if (it != out.end()) it->second.append(state.ghr(), state.lhr(rec.pc), rec.taken);
    }
    state.update(rec.pc, rec.taken);
  }
  return out;
}

TrainingDataset collect_dataset(const Trace& trace, const HistoryConfig& config, std::uint64_t target_pc) {
  const std::uint64_t pcs[] = {target_pc};
  return std::move(collect_datasets(trace, config, pcs).begin()->second);
}

std::map<std::uint64_t, BranchProfile> profile_branches(const Trace& trace, const HistoryConfig& config) {
  std::map<std::uint64_t, BranchProfile> out;
  for (std::size_t r = config.length(); r < trace.records.size(); ++r) {
    auto& p = out[trace.records[r].pc];
    ++p.samples;
    p.taken += trace.records[r].taken ? 1 : 0;
  }
  return out;
}

}  // namespace sbp
