#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sbp/history.hpp"

namespace sbp {

// Sign rule shared by the trainer, the SLBIU datapath and the online learner:
// a negative sum predicts not-taken, anything else (including 0) taken.
constexpr bool predicts_taken(double margin) { return !(margin < 0.0); }

struct Coefficient {
  std::uint32_t index = 0;
  double weight = 0.0;

  bool operator==(const Coefficient&) const = default;
};

// Per-branch linear model  f(x) = sigma(bias + sum_j w_j x_j).
struct SparseModel {
  std::uint64_t pc = 0;
  double bias = 0.0;
  std::vector<Coefficient> weights;  // non-zero only, strictly increasing index
  double lambda = 0.0;
  double accuracy = 0.0;
  std::size_t m = 0;
  bool converged = true;
  // Set by lambda_search: accuracy reached SolverConfig::accuracy_stop.
  bool sufficient = true;

  std::size_t nnz() const { return weights.size(); }
  double weight(std::uint32_t index) const;
  // bias + sum w_j x_j, accumulated in increasing index order.
  double margin(std::span<const std::int8_t> x) const;

  bool operator==(const SparseModel&) const = default;
};

struct SolverConfig {
  double lambda_min = 1e-4;
  double lambda_max = 1.0;
  double accuracy_stop = 0.99;
  std::uint32_t max_iterations = 1000;  // sweeps
  double tolerance = 1e-6;              // max |parameter change| in a full sweep
  double elasticnet_alpha = 1.0;        // L1 share of the penalty; 1 = Lasso
  double dedup_alpha = 0.5;             // alpha of the ElasticNet refit used by dedup
  std::uint32_t max_probes = 20;

  void validate() const;
};

struct BranchScreen {
  std::uint64_t min_occurrences = 10'000;
  double bias_low = 0.02;
  double bias_high = 0.98;
};

struct FitDiagnostics {
  std::vector<double> objective_per_sweep;
};

// Minimizes (1/m) sum logloss + lambda (alpha |w|_1 + (1 - alpha)/2 |w|_2^2)
// by cyclic coordinate descent (Newton direction with soft-thresholding and
// backtracking line search). The bias is unpenalized. Weights with
// |w| < 10 * tolerance are truncated to zero after convergence.
SparseModel fit(const TrainingDataset& data, double lambda, double alpha, const SolverConfig& config,
                FitDiagnostics* diagnostics = nullptr);

// Log-scale bisection of lambda in [lambda_min, lambda_max]: probes that reach
// accuracy_stop push lambda up, others push it down. Returns the sparsest
// sufficient probe (ties: higher accuracy, then smaller lambda), or the most
// accurate probe with sufficient = false.
SparseModel lambda_search(const TrainingDataset& data, const SolverConfig& config);

// Per-sample sign-rule predictions and derived counts.
std::vector<std::uint8_t> predict_all(const SparseModel& model, const TrainingDataset& data);
std::size_t count_correct(const SparseModel& model, const TrainingDataset& data);
double eval_accuracy(const SparseModel& model, const TrainingDataset& data);

bool screen(std::uint64_t occurrences, double taken_rate, const BranchScreen& s);
bool screen(const TrainingDataset& data, const BranchScreen& s);

// Regularized objective for a dense weight vector (used by tests and oracles).
double objective(const TrainingDataset& data, double bias, std::span<const double> weights, double lambda,
                 double alpha);

// Text dump: header "pc bias lambda accuracy m", then one "index value" line
// per non-zero weight. Several models may be concatenated.
void write_model_dump(std::ostream& out, const SparseModel& model);
std::vector<SparseModel> read_model_dump(std::istream& in);

}  // namespace sbp
