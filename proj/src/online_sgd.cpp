#include "sbp/online_sgd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace sbp {

void OnlineConfig::validate() const {
  if (!(lambda_min > 0 && lambda_min <= lambda_max)) throw std::invalid_argument("need 0 < lambda_min <= lambda_max");
  if (lambda_init < lambda_min || lambda_init > lambda_max)
    throw std::invalid_argument("lambda_init outside [lambda_min, lambda_max]");
  if (!(eta > 0)) throw std::invalid_argument("eta must be positive");
  if (adaptation_interval == 0) throw std::invalid_argument("adaptation_interval must be positive");
}

OnlineModel::OnlineModel(std::uint64_t pc, std::size_t dims, const OnlineConfig& config)
    : pc_(pc), weights_(dims, 0.0), q_(dims, 0.0), lambda_(config.lambda_init), eta_(config.eta) {}

double OnlineModel::margin(std::span<const std::int8_t> x) const {
  double s = bias_;
  for (std::size_t j = 0; j < weights_.size(); ++j) s += weights_[j] * x[j];
  return s;
}

void OnlineModel::update(std::span<const std::int8_t> x, bool y) {
  const double p = 1.0 / (1.0 + std::exp(-margin(x)));
  const double g = (y ? 1.0 : 0.0) - p;
  u_ += eta_ * lambda_;
  bias_ += eta_ * g;
  for (std::size_t j = 0; j < weights_.size(); ++j) {
    double& w = weights_[j];
    const bool was_zero = w == 0.0;
    w += eta_ * g * x[j];
    const double z = w;
    if (w > 0.0)
      w = std::max(0.0, w - (u_ + q_[j]));
    else if (w < 0.0)
      w = std::min(0.0, w + (u_ - q_[j]));
    q_[j] += w - z;
    if (was_zero != (w == 0.0)) was_zero ? ++nnz_ : --nnz_;
  }
  ++updates_;
}

void OnlineModel::adapt_lambda(const OnlineConfig& config) {
  if (nnz_ > config.nnz_cap)
    lambda_ = std::min(lambda_ * 2.0, config.lambda_max);
  else if (2 * nnz_ <= config.nnz_cap)
    lambda_ = std::max(lambda_ / 2.0, config.lambda_min);
}

std::map<std::uint64_t, OnlineBranchResult> run_online(const Trace& trace, const HistoryConfig& history,
                                                       std::span<const std::uint64_t> targets,
                                                       const OnlineConfig& config) {
  history.validate();
  config.validate();
  const std::set<std::uint64_t> wanted(targets.begin(), targets.end());
  struct Slot {
    std::unique_ptr<OnlineModel> model;
    OnlineBranchResult result;
    std::uint64_t samples = 0;
    double nnz_sum = 0.0;
  };
  std::unordered_map<std::uint64_t, Slot> slots;
  HistoryState state(history);
  const std::uint64_t warmup = history.length();

  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    const auto& rec = trace.records[r];
    if (r >= warmup && (wanted.empty() || wanted.contains(rec.pc))) {
      Slot& s = slots[rec.pc];
      if (!s.model) s.model = std::make_unique<OnlineModel>(rec.pc, history.length(), config);
      const FeatureVector x = state.features(rec.pc);
      ++s.result.occurrences;
      if (s.model->predict(x) != rec.taken) ++s.result.mispredictions;
      s.model->update(x, rec.taken);
      if (s.model->update_count() % config.adaptation_interval == 0) {
        const std::size_t nnz = s.model->nnz();
        ++s.samples;
        s.nnz_sum += double(nnz);
        s.result.nnz_max = std::max(s.result.nnz_max, nnz);
        s.model->adapt_lambda(config);
      }
    }
    state.update(rec.pc, rec.taken);
  }

  std::map<std::uint64_t, OnlineBranchResult> out;
  for (auto& [pc, s] : slots) {
    s.result.final_nnz = s.model->nnz();
    s.result.final_lambda = s.model->lambda();
    s.result.nnz_avg = s.samples ? s.nnz_sum / double(s.samples) : double(s.result.final_nnz);
    if (!s.samples) s.result.nnz_max = s.result.final_nnz;
    out.emplace(pc, s.result);
  }
  return out;
}

}  // namespace sbp
