#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbp/sparse_model.hpp"

namespace sbp {

// Signed fixed-point Q[I].[F]: one sign bit, I integer bits, F fraction bits.
struct QuantSpec {
  std::uint32_t integer_bits = 3;
  std::uint32_t fraction_bits = 4;

  static constexpr QuantSpec q3_4() { return {3, 4}; }
  static constexpr QuantSpec q3_12() { return {3, 12}; }

  std::uint32_t width() const { return 1 + integer_bits + fraction_bits; }
  bool operator==(const QuantSpec&) const = default;
  double step() const;       // 2^-F
  double min_value() const;  // -2^I
  double max_value() const;  // 2^I - 2^-F
  std::int64_t min_code() const;
  std::int64_t max_code() const;
};

// Hint weight encoding selected by the CAM word width q: 8 -> Q3.4,
// 16 -> Q3.12, 32 -> IEEE-754 binary32 (full precision).
std::optional<QuantSpec> quant_spec_for_width(std::uint32_t q);

class hint_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rounds the bias and every weight to the nearest multiple of 2^-F (ties away
// from zero) and saturates to the representable range. Weights that round to
// zero are dropped. accuracy is left untouched.
SparseModel quantize(const SparseModel& model, const QuantSpec& spec);
double quantize_value(double v, const QuantSpec& spec);

// Rounds parameters to binary32, the full-precision hint encoding.
SparseModel round_to_float32(const SparseModel& model);

// Quantizes to whatever encoding q selects.
SparseModel quantize_for_width(const SparseModel& model, std::uint32_t q);

struct DedupResult {
  SparseModel elasticnet;  // ElasticNet refit before merging
  SparseModel merged;      // identical-column groups collapsed
  bool accepted = false;   // merged passed the accuracy and sparsity checks
};

// Refits with ElasticNet (config.dedup_alpha) at the Lasso model's lambda,
// groups non-zero indices whose dataset columns are identical and keeps the
// smallest index of each group with the group's summed weight. The merged
// model is rejected if its accuracy falls more than 0.001 below the Lasso
// model's or if it has more non-zeros than the Lasso model.
DedupResult dedup_detail(const TrainingDataset& data, const SparseModel& lasso, const SolverConfig& config);
SparseModel dedup(const TrainingDataset& data, const SparseModel& lasso, const SolverConfig& config);

// CAM dimensions (all widths in bits).
struct SlbiuConfig {
  std::uint32_t lh = 512;
  std::uint32_t gh = 512;
  std::uint32_t n = 0;    // max hints
  std::uint32_t nnz = 0;  // max non-zero weights per hint
  std::uint32_t q = 8;    // weight width
  std::uint32_t p = 64;   // pc width

  std::uint32_t index_bits() const;  // ceil(log2(lh + gh))
  std::uint64_t hint_bits() const;   // one CAM entry
  bool operator==(const SlbiuConfig&) const = default;
};

// N * (p + q + nnz*q + nnz*ceil(log2(lh+gh)) + lh)
std::uint64_t storage_bits(const SlbiuConfig& config);

struct SparsityHint {
  std::uint64_t pc = 0;
  double intercept = 0.0;
  std::vector<Coefficient> entries;  // real entries only; padding is implicit

  bool operator==(const SparsityHint&) const = default;
};

SparsityHint make_hint(const SparseModel& model);
SparseModel hint_model(const SparsityHint& hint);

struct HintSet {
  std::string phase_id;
  SlbiuConfig config;
  std::vector<SparsityHint> hints;

  // Throws hint_error when a hint breaks the CAM geometry or encoding.
  void validate() const;
  bool operator==(const HintSet&) const = default;
};

enum class ScorePolicy { independent, relative };

struct ScoredCandidate {
  SparseModel model;
  std::uint64_t offline_correct = 0;  // sparse model, same occurrences
  std::uint64_t primary_correct = 0;  // baseline predictor, same occurrences
};

// nullopt = dropped (independent policy, accuracy below accuracy_floor).
std::optional<std::int64_t> score(const ScoredCandidate& c, ScorePolicy policy, double accuracy_floor = 0.99);

struct SelectionLimits {
  std::uint64_t budget_bits = 0;
  std::uint32_t p = 64;
  std::uint32_t q = 8;
  std::uint32_t lh = 512;
  std::uint32_t gh = 512;
};

struct Selection {
  HintSet hint_set;  // config.n / config.nnz hold the chosen pair
  std::int64_t score_sum = 0;
};

// Grid search over (N, nnz): nnz ranges over the non-zero counts present among
// surviving candidates, N is the largest count the budget admits. Candidates
// with score <= 0 or more than nnz weights are discarded, the rest ranked by
// score (ties: fewer weights, then lower pc) and the top N kept. The pair with
// the highest score sum wins (ties: larger N, then smaller nnz). Candidate
// models are encoded as given, so quantize them beforehand.
Selection select(std::span<const ScoredCandidate> candidates, ScorePolicy policy, const SelectionLimits& limits,
                 std::string phase_id = {});

// Hint file (little-endian):
//   "SBPH" | u16 version | u16 phase length | phase bytes |
//   u16 lh, gh, N, nnz, q, p | u16 used hints | payload
// The payload is N fixed-size slots of hint_bits() (used slots first, unused
// slots zero), bit-packed LSB-first and padded to a whole byte. Each slot is
// pc:p | intercept:q | nnz x (index:ceil(log2(lh+gh)) | weight:q) | lh zero bits.
inline constexpr std::uint16_t kHintVersion = 1;

std::vector<std::uint8_t> encode_hintset(const HintSet& hs);
HintSet decode_hintset(std::span<const std::uint8_t> bytes);
void write_hintset(const HintSet& hs, const std::filesystem::path& path);
HintSet read_hintset(const std::filesystem::path& path);

// Payload size in bits of an encoded hint file (header excluded).
std::uint64_t payload_bits(const HintSet& hs);

// Hints with uniformly drawn weights and indices for the given pcs, filling
// every slot with exactly config.nnz entries.
HintSet random_hintset(const SlbiuConfig& config, std::span<const std::uint64_t> pcs, std::uint64_t seed);

}  // namespace sbp
