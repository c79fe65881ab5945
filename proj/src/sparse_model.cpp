#include "sbp/sparse_model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace sbp {

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Sum of v[i] over the set bits of a packed column.
double set_bit_sum(std::span<const std::uint64_t> column, const double* v) {
  double s = 0.0;
  for (std::size_t w = 0; w < column.size(); ++w) {
    std::uint64_t bits = column[w];
    const double* base = v + w * 64;
    while (bits) {
      s += base[__builtin_ctzll(bits)];
      bits &= bits - 1;
    }
  }
  return s;
}

template <typename F>
void for_each_sign(std::span<const std::uint64_t> column, std::size_t m, F&& f) {
  for (std::size_t i = 0; i < m; ++i) f(i, ((column[i >> 6] >> (i & 63)) & 1u) ? 1.0 : -1.0);
}

class CoordinateSolver {
 public:
  static constexpr double kArmijo = 0.01;
  static constexpr int kMaxBacktracks = 40;

  CoordinateSolver(const TrainingDataset& data, double lambda, double alpha, std::vector<double> l2_scale)
      : data_(data),
        m_(data.size()),
        l1_(lambda * alpha),
        l2_(lambda * (1.0 - alpha)),
        y_(m_),
        eta_(m_),
        p_(m_),
        r_(m_),
        w_(data.dims(), 0.0),
        l2_scale_(std::move(l2_scale)) {
    for (std::size_t i = 0; i < m_; ++i) y_[i] = data.label(i) ? 1.0 : 0.0;
    const double rate = data.taken_rate();
    bias_ = std::log(rate / (1.0 - rate));
    std::fill(eta_.begin(), eta_.end(), bias_);
    refresh();
  }

  double bias() const { return bias_; }
  const std::vector<double>& weights() const { return w_; }

  double objective() const {
    double pen1 = 0.0, pen2 = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j) {
      pen1 += std::abs(w_[j]);
      pen2 += l2_scale_[j] * w_[j] * w_[j];
    }
    return loss_ / double(m_) + l1_ * pen1 + 0.5 * l2_ * pen2;
  }

  // One pass over the bias and the listed coordinates; returns the largest
  // absolute parameter change.
  double sweep(const std::vector<std::uint32_t>& coords) {
    double max_delta = update_bias();
    for (auto j : coords) max_delta = std::max(max_delta, update_weight(j));
    return max_delta;
  }

  // Recomputes probabilities and loss from the margins, dropping the drift of
  // the incremental updates.
  void refresh() {
    loss_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      p_[i] = sigmoid(eta_[i]);
      loss_ += softplus(eta_[i]) - y_[i] * eta_[i];
    }
    sync_residuals();
  }

 private:
  void sync_residuals() {
    sum_r_ = 0.0;
    sum_h_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      r_[i] = p_[i] - y_[i];
      sum_r_ += r_[i];
      sum_h_ += p_[i] * (1.0 - p_[i]);
    }
  }

  double hessian() const { return std::max(sum_h_ / double(m_), 1e-12); }

  // Loss change for moving margin i by sign_i * step, summed over samples:
  // softplus(a + s) - softplus(a) - y s = log1p(p (e^s - 1)) - y s.
  template <typename Sign>
  double loss_change(double step, Sign&& sign) const {
    const double up = std::expm1(step), down = std::expm1(-step);
    double change = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double x = sign(i);
      change += std::log1p(p_[i] * (x > 0 ? up : down)) - y_[i] * step * x;
    }
    return change;
  }

  template <typename Sign>
  void apply(double step, double change, Sign&& sign) {
    const double up = std::exp(step), down = std::exp(-step);
    for (std::size_t i = 0; i < m_; ++i) {
      const double x = sign(i);
      const double e = x > 0 ? up : down;
      eta_[i] += step * x;
      p_[i] = p_[i] * e / (1.0 - p_[i] + p_[i] * e);
    }
    loss_ += change;
    sync_residuals();
  }

  double update_bias() {
    const double g = sum_r_ / double(m_);
    const double d = -g / hessian();
    if (std::abs(d) < 1e-15) return 0.0;
    const double decrease = g * d;
    auto one = [](std::size_t) { return 1.0; };
    double t = 1.0;
    for (int k = 0; k < kMaxBacktracks; ++k, t *= 0.5) {
      const double change = loss_change(t * d, one);
      if (change / double(m_) <= kArmijo * t * decrease) {
        bias_ += t * d;
        apply(t * d, change, one);
        return std::abs(t * d);
      }
    }
    return 0.0;
  }

  double update_weight(std::uint32_t j) {
    const auto column = data_.column(j);
    const double w = w_[j];
    const double l2 = l2_ * l2_scale_[j];
    const double g = (2.0 * set_bit_sum(column, r_.data()) - sum_r_) / double(m_) + l2 * w;
    const double h = hessian() + l2;

    double d;
    if (g + l1_ <= h * w)
      d = -(g + l1_) / h;
    else if (g - l1_ >= h * w)
      d = -(g - l1_) / h;
    else
      d = -w;
    if (std::abs(d) < 1e-15) return 0.0;

    auto sign = [&](std::size_t i) { return ((column[i >> 6] >> (i & 63)) & 1u) ? 1.0 : -1.0; };
    const double decrease = g * d + l1_ * (std::abs(w + d) - std::abs(w));
    double t = 1.0;
    for (int k = 0; k < kMaxBacktracks; ++k, t *= 0.5) {
      const double step = t * d;
      const double change = loss_change(step, sign);
      const double wn = w + step;
      const double total = change / double(m_) + l1_ * (std::abs(wn) - std::abs(w)) + 0.5 * l2 * (wn * wn - w * w);
      if (total <= kArmijo * t * decrease) {
        w_[j] = wn;
        apply(step, change, sign);
        return std::abs(step);
      }
    }
    return 0.0;
  }

  const TrainingDataset& data_;
  std::size_t m_;
  double l1_, l2_;
  std::vector<double> y_, eta_, p_, r_;
  std::vector<double> w_;
  std::vector<double> l2_scale_;
  double bias_ = 0.0;
  double loss_ = 0.0, sum_r_ = 0.0, sum_h_ = 0.0;
};

// Groups of identical columns, each in increasing index order; groups are
// ordered by their smallest index.
std::vector<std::vector<std::uint32_t>> identical_column_groups(const TrainingDataset& data) {
  std::vector<std::vector<std::uint32_t>> groups;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;
  for (std::uint32_t j = 0; j < data.dims(); ++j) {
    std::uint64_t h = 1469598103934665603ull;
    for (auto word : data.column(j)) h = (h ^ word) * 1099511628211ull;
    auto& bucket = by_hash[h];
    auto it = std::find_if(bucket.begin(), bucket.end(),
                           [&](std::size_t gi) { return data.columns_equal(groups[gi].front(), j); });
    if (it == bucket.end()) {
      bucket.push_back(groups.size());
      groups.push_back({j});
    } else {
      groups[*it].push_back(j);
    }
  }
  return groups;
}

std::vector<double> margins(const SparseModel& model, const TrainingDataset& data) {
  std::vector<double> eta(data.size(), model.bias);
  for (const auto& c : model.weights) {
    if (c.index >= data.dims()) throw std::out_of_range("model index beyond dataset dims");
    for_each_sign(data.column(c.index), data.size(), [&](std::size_t i, double x) { eta[i] += c.weight * x; });
  }
  return eta;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda_min > 0 && lambda_min <= lambda_max)) throw std::invalid_argument("need 0 < lambda_min <= lambda_max");
  if (!(accuracy_stop > 0 && accuracy_stop <= 1)) throw std::invalid_argument("accuracy_stop must lie in (0,1]");
  if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be > 0");
  if (!(elasticnet_alpha >= 0 && elasticnet_alpha <= 1)) throw std::invalid_argument("elasticnet_alpha must lie in [0,1]");
  if (!(dedup_alpha >= 0 && dedup_alpha < 1)) throw std::invalid_argument("dedup_alpha must lie in [0,1)");
  if (max_probes < 2) throw std::invalid_argument("max_probes must be >= 2");
}

double SparseModel::weight(std::uint32_t index) const {
  auto it = std::lower_bound(weights.begin(), weights.end(), index,
                             [](const Coefficient& c, std::uint32_t j) { return c.index < j; });
  return it != weights.end() && it->index == index ? it->weight : 0.0;
}

double SparseModel::margin(std::span<const std::int8_t> x) const {
  double s = bias;
  for (const auto& c : weights) s += c.weight * x[c.index];
  return s;
}

SparseModel fit(const TrainingDataset& data, double lambda, double alpha, const SolverConfig& config,
                FitDiagnostics* diagnostics) {
  config.validate();
  if (data.size() == 0) throw std::invalid_argument("fit needs at least one sample");
  if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");

  SparseModel model;
  model.pc = data.target_pc();
  model.lambda = lambda;
  model.m = data.size();

  // Constant labels: the loss infimum sits at an infinite bias, and every
  // weight gradient vanishes along the way. Report a Laplace-smoothed bias.
  if (data.taken_count() == 0 || data.taken_count() == data.size()) {
    const double t = double(data.taken_count());
    model.bias = std::log((t + 0.5) / (double(data.size()) - t + 0.5));
    model.accuracy = eval_accuracy(model, data);
    return model;
  }

  // Identical columns are solved as one coordinate. A group of k copies
  // sharing total weight v costs alpha |v| + (1 - alpha) v^2 / (2k) at the
  // optimum (equal split), so the representative carries an L2 scale of 1/k.
  // With pure L1 the whole weight goes to the smallest index.
  const auto groups = identical_column_groups(data);
  std::vector<double> l2_scale(data.dims(), 1.0);
  std::vector<std::uint32_t> all;
  for (const auto& g : groups) {
    all.push_back(g.front());
    l2_scale[g.front()] = 1.0 / double(g.size());
  }
  CoordinateSolver solver(data, lambda, alpha, std::move(l2_scale));

  std::uint32_t sweeps = 0;
  double last = solver.objective();
  auto record = [&] {
    ++sweeps;
    const double now = solver.objective();
    assert(now <= last + 1e-12 * std::max(1.0, std::abs(last)));
    last = now;
    if (diagnostics) diagnostics->objective_per_sweep.push_back(now);
  };

  bool converged = false;
  while (sweeps < config.max_iterations) {
    solver.refresh();
    const double full = solver.sweep(all);
    record();
    if (full < config.tolerance) {
      converged = true;
      break;
    }
    // Inner passes restricted to the active set until it settles.
    while (sweeps < config.max_iterations) {
      std::vector<std::uint32_t> active;
      for (std::uint32_t j = 0; j < all.size(); ++j)
        if (solver.weights()[j] != 0.0) active.push_back(j);
      const double delta = solver.sweep(active);
      record();
      if (delta < config.tolerance) break;
    }
  }

  model.converged = converged;
  model.bias = solver.bias();
  const double cut = 10.0 * config.tolerance;
  for (const auto& g : groups) {
    const double v = solver.weights()[g.front()];
    const bool split = alpha < 1.0 && lambda > 0.0;
    const double w = split ? v / double(g.size()) : v;
    if (std::abs(w) < cut) continue;
    for (auto j : g) {
      model.weights.push_back({j, w});
      if (!split) break;
    }
  }
  std::sort(model.weights.begin(), model.weights.end(),
            [](const Coefficient& a, const Coefficient& b) { return a.index < b.index; });
  model.accuracy = eval_accuracy(model, data);
  return model;
}

SparseModel lambda_search(const TrainingDataset& data, const SolverConfig& config) {
  config.validate();
  std::vector<SparseModel> probes;
  auto probe = [&](double log_lambda) {
    probes.push_back(fit(data, std::exp(log_lambda), config.elasticnet_alpha, config));
    return probes.back().accuracy >= config.accuracy_stop;
  };

  double lo = std::log(config.lambda_min);
  double hi = std::log(config.lambda_max);
  if (!probe(hi) && config.lambda_min < config.lambda_max && probe(lo)) {
    // fit(lo) passes and fit(hi) fails: bisect the boundary.
    while (probes.size() < config.max_probes && hi - lo > 1e-3) {
      const double mid = 0.5 * (lo + hi);
      (probe(mid) ? lo : hi) = mid;
    }
  }

  const SparseModel* best = nullptr;
  for (const auto& p : probes) {
    if (p.accuracy < config.accuracy_stop) continue;
    if (!best || p.nnz() < best->nnz() ||
        (p.nnz() == best->nnz() &&
         (p.accuracy > best->accuracy || (p.accuracy == best->accuracy && p.lambda < best->lambda))))
      best = &p;
  }
  if (best) {
    SparseModel out = *best;
    out.sufficient = true;
    return out;
  }
  for (const auto& p : probes)
    if (!best || p.accuracy > best->accuracy) best = &p;
  SparseModel out = *best;
  out.sufficient = false;
  return out;
}

std::vector<std::uint8_t> predict_all(const SparseModel& model, const TrainingDataset& data) {
  const auto eta = margins(model, data);
  std::vector<std::uint8_t> out(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) out[i] = predicts_taken(eta[i]) ? 1 : 0;
  return out;
}

std::size_t count_correct(const SparseModel& model, const TrainingDataset& data) {
  const auto pred = predict_all(model, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += (pred[i] != 0) == data.label(i) ? 1 : 0;
  return correct;
}

double eval_accuracy(const SparseModel& model, const TrainingDataset& data) {
  if (data.size() == 0) return 0.0;
  return double(count_correct(model, data)) / double(data.size());
}

bool screen(std::uint64_t occurrences, double taken_rate, const BranchScreen& s) {
  return occurrences >= s.min_occurrences && taken_rate >= s.bias_low && taken_rate <= s.bias_high;
}

bool screen(const TrainingDataset& data, const BranchScreen& s) {
  return screen(data.size(), data.taken_rate(), s);
}

double objective(const TrainingDataset& data, double bias, std::span<const double> weights, double lambda,
                 double alpha) {
  if (weights.size() != data.dims()) throw std::invalid_argument("weight vector length mismatch");
  std::vector<double> eta(data.size(), bias);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    for_each_sign(data.column(j), data.size(), [&](std::size_t i, double x) { eta[i] += weights[j] * x; });
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) loss += softplus(eta[i]) - (data.label(i) ? eta[i] : 0.0);
  double pen1 = 0.0, pen2 = 0.0;
  for (double w : weights) {
    pen1 += std::abs(w);
    pen2 += w * w;
  }
  return loss / double(data.size()) + lambda * (alpha * pen1 + 0.5 * (1.0 - alpha) * pen2);
}

void write_model_dump(std::ostream& out, const SparseModel& model) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "0x%llx %.17g %.17g %.17g %zu\n", static_cast<unsigned long long>(model.pc),
                model.bias, model.lambda, model.accuracy, model.m);
  out << buf;
  for (const auto& c : model.weights) {
    std::snprintf(buf, sizeof buf, "%u %.17g\n", c.index, c.weight);
    out << buf;
  }
}

std::vector<SparseModel> read_model_dump(std::istream& in) {
  std::vector<SparseModel> models;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    try {
      if (tok.size() == 5) {
        SparseModel m;
        m.pc = std::stoull(tok[0], nullptr, 0);
        m.bias = std::stod(tok[1]);
        m.lambda = std::stod(tok[2]);
        m.accuracy = std::stod(tok[3]);
        m.m = std::stoull(tok[4]);
        models.push_back(std::move(m));
      } else if (tok.size() == 2 && !models.empty()) {
        const auto index = static_cast<std::uint32_t>(std::stoul(tok[0]));
        auto& w = models.back().weights;
        if (!w.empty() && w.back().index >= index) throw std::invalid_argument("indices not increasing");
        w.push_back({index, std::stod(tok[1])});
      } else {
        throw std::invalid_argument("unexpected field count");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("model dump line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return models;
}

}  // namespace sbp
