#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sbp/history.hpp"
#include "sbp/sparse_model.hpp"

namespace sbp {

struct OnlineConfig {
  double lambda_init = 0.01;
  double lambda_min = 1e-5;
  double lambda_max = 0.1;
  std::uint32_t nnz_cap = 50;
  double eta = 0.05;
  std::uint64_t adaptation_interval = 1000;  // updates between lambda checks
  void validate() const;
};

// Logistic model trained by SGD with the cumulative L1 penalty of Tsuruoka
// et al. (2009): u is the total penalty each weight could have received, q[j]
// what it actually received, and weights are clipped at zero.
class OnlineModel {
 public:
  OnlineModel(std::uint64_t pc, std::size_t dims, const OnlineConfig& config);

  std::uint64_t pc() const { return pc_; }
  std::size_t dims() const { return weights_.size(); }
  double bias() const { return bias_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& applied_penalty() const { return q_; }
  double u() const { return u_; }
  double lambda() const { return lambda_; }
  double eta() const { return eta_; }
  std::uint64_t update_count() const { return updates_; }
  std::size_t nnz() const { return nnz_; }

  void set_lambda(double lambda) { lambda_ = lambda; }

  double margin(std::span<const std::int8_t> x) const;
  bool predict(std::span<const std::int8_t> x) const { return predicts_taken(margin(x)); }
  void update(std::span<const std::int8_t> x, bool y);
  // Doubles lambda when nnz > cap, halves it when nnz <= cap / 2, clamped to
  // [lambda_min, lambda_max].
  void adapt_lambda(const OnlineConfig& config);

 private:
  std::uint64_t pc_;
  std::vector<double> weights_;
  std::vector<double> q_;
  double bias_ = 0.0;
  double u_ = 0.0;
  double lambda_;
  double eta_;
  std::uint64_t updates_ = 0;
  std::size_t nnz_ = 0;
};

struct OnlineBranchResult {
  std::uint64_t occurrences = 0;  // post-warmup, i.e. predicted by the model
  std::uint64_t mispredictions = 0;
  double nnz_avg = 0.0;  // mean of nnz sampled at each adaptation check
  std::size_t nnz_max = 0;
  std::size_t final_nnz = 0;
  double final_lambda = 0.0;
};

// Replays the trace with one online model per target, created at the target's
// first post-warmup occurrence (record index >= gh + lh). Each occurrence is
// predicted, then trained on. Empty targets = every pc in the trace.
std::map<std::uint64_t, OnlineBranchResult> run_online(const Trace& trace, const HistoryConfig& history,
                                                       std::span<const std::uint64_t> targets,
                                                       const OnlineConfig& config);

}  // namespace sbp
