#include "sbp/hints.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "byte_io.hpp"

namespace sbp {

namespace {

std::uint64_t mask(unsigned width) { return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1; }

std::int64_t sign_extend(std::uint64_t v, unsigned width) {
  if (width < 64 && ((v >> (width - 1)) & 1u)) v |= ~mask(width);
  return static_cast<std::int64_t>(v);
}

// Raw q-bit field for an already-encodable value.
std::uint64_t encode_value(double v, std::uint32_t q) {
  if (auto spec = quant_spec_for_width(q)) {
    const double scaled = std::ldexp(v, static_cast<int>(spec->fraction_bits));
    const auto code = static_cast<std::int64_t>(scaled);
    if (static_cast<double>(code) != scaled || code < spec->min_code() || code > spec->max_code())
      throw hint_error("value " + std::to_string(v) + " is not representable in Q" +
                       std::to_string(spec->integer_bits) + "." + std::to_string(spec->fraction_bits));
    return static_cast<std::uint64_t>(code) & mask(q);
  }
  const auto f = static_cast<float>(v);
  if (static_cast<double>(f) != v) throw hint_error("value " + std::to_string(v) + " is not a binary32 value");
  return std::bit_cast<std::uint32_t>(f);
}

double decode_value(std::uint64_t raw, std::uint32_t q) {
  if (auto spec = quant_spec_for_width(q))
    return std::ldexp(static_cast<double>(sign_extend(raw, q)), -static_cast<int>(spec->fraction_bits));
  return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw)));
}

}  // namespace

double QuantSpec::step() const { return std::ldexp(1.0, -static_cast<int>(fraction_bits)); }
double QuantSpec::min_value() const { return -std::ldexp(1.0, static_cast<int>(integer_bits)); }
double QuantSpec::max_value() const { return std::ldexp(1.0, static_cast<int>(integer_bits)) - step(); }
std::int64_t QuantSpec::min_code() const { return -(std::int64_t{1} << (integer_bits + fraction_bits)); }
std::int64_t QuantSpec::max_code() const { return (std::int64_t{1} << (integer_bits + fraction_bits)) - 1; }

std::optional<QuantSpec> quant_spec_for_width(std::uint32_t q) {
  switch (q) {
    case 8: return QuantSpec::q3_4();
    case 16: return QuantSpec::q3_12();
    case 32: return std::nullopt;
    default: throw hint_error("unsupported weight width q=" + std::to_string(q) + " (expected 8, 16 or 32)");
  }
}

double quantize_value(double v, const QuantSpec& spec) {
  const double scaled = std::round(std::ldexp(v, static_cast<int>(spec.fraction_bits)));
  const double code = std::clamp(scaled, double(spec.min_code()), double(spec.max_code()));
  return std::ldexp(code, -static_cast<int>(spec.fraction_bits)) + 0.0;  // no negative zero
}

SparseModel quantize(const SparseModel& model, const QuantSpec& spec) {
  SparseModel out = model;
  out.bias = quantize_value(model.bias, spec);
  out.weights.clear();
  for (const auto& c : model.weights) {
    const double w = quantize_value(c.weight, spec);
    if (w != 0.0) out.weights.push_back({c.index, w});
  }
  return out;
}

SparseModel round_to_float32(const SparseModel& model) {
  SparseModel out = model;
  out.bias = static_cast<float>(model.bias) + 0.0f;
  out.weights.clear();
  for (const auto& c : model.weights) {
    const double w = static_cast<float>(c.weight);
    if (w != 0.0) out.weights.push_back({c.index, w});
  }
  return out;
}

SparseModel quantize_for_width(const SparseModel& model, std::uint32_t q) {
  if (auto spec = quant_spec_for_width(q)) return quantize(model, *spec);
  return round_to_float32(model);
}

DedupResult dedup_detail(const TrainingDataset& data, const SparseModel& lasso, const SolverConfig& config) {
  DedupResult r;
  r.elasticnet = fit(data, lasso.lambda, config.dedup_alpha, config);

  // Weights arrive in increasing index order, so each group's front is its
  // smallest index.
  std::vector<std::vector<Coefficient>> groups;
  for (const auto& c : r.elasticnet.weights) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return data.columns_equal(g.front().index, c.index); });
    if (it == groups.end())
      groups.push_back({c});
    else
      it->push_back(c);
  }
  r.merged = r.elasticnet;
  r.merged.weights.clear();
  for (const auto& g : groups) {
    double sum = 0.0;
    for (const auto& c : g) sum += c.weight;
    if (sum != 0.0) r.merged.weights.push_back({g.front().index, sum});
  }
  std::sort(r.merged.weights.begin(), r.merged.weights.end(),
            [](const Coefficient& a, const Coefficient& b) { return a.index < b.index; });
  r.merged.accuracy = eval_accuracy(r.merged, data);
  r.merged.sufficient = r.merged.accuracy >= config.accuracy_stop;
  r.accepted = r.merged.accuracy >= lasso.accuracy - 0.001 && r.merged.nnz() <= lasso.nnz();
  return r;
}

SparseModel dedup(const TrainingDataset& data, const SparseModel& lasso, const SolverConfig& config) {
  auto r = dedup_detail(data, lasso, config);
  return r.accepted ? r.merged : lasso;
}

std::uint32_t SlbiuConfig::index_bits() const {
  const std::uint32_t l = lh + gh;
  return l <= 1 ? 0 : static_cast<std::uint32_t>(std::bit_width(l - 1));
}

std::uint64_t SlbiuConfig::hint_bits() const {
  return std::uint64_t{p} + q + std::uint64_t{nnz} * q + std::uint64_t{nnz} * index_bits() + lh;
}

std::uint64_t storage_bits(const SlbiuConfig& config) { return std::uint64_t{config.n} * config.hint_bits(); }

SparsityHint make_hint(const SparseModel& model) { return {model.pc, model.bias, model.weights}; }

SparseModel hint_model(const SparsityHint& hint) {
  SparseModel m;
  m.pc = hint.pc;
  m.bias = hint.intercept;
  m.weights = hint.entries;
  return m;
}

void HintSet::validate() const {
  if (hints.size() > config.n)
    throw hint_error(std::to_string(hints.size()) + " hints exceed capacity N=" + std::to_string(config.n));
  if (config.p == 0 || config.p > 64) throw hint_error("pc width p must lie in [1,64]");
  if (config.lh + config.gh == 0) throw hint_error("history length must be positive");
  quant_spec_for_width(config.q);
  std::set<std::uint64_t> pcs;
  const std::uint32_t l = config.lh + config.gh;
  for (const auto& h : hints) {
    if (!pcs.insert(h.pc).second) throw hint_error("duplicate hint pc");
    if (config.p < 64 && (h.pc >> config.p) != 0) throw hint_error("pc does not fit in p bits");
    if (h.entries.size() > config.nnz) throw hint_error("hint has more than nnz entries");
    encode_value(h.intercept, config.q);
    for (std::size_t i = 0; i < h.entries.size(); ++i) {
      const auto& e = h.entries[i];
      if (e.index >= l) throw hint_error("hint index beyond history length");
      if (i > 0 && e.index <= h.entries[i - 1].index) throw hint_error("hint indices must increase");
      if (e.weight == 0.0) throw hint_error("real hint entries must be non-zero");
      encode_value(e.weight, config.q);
    }
  }
}

std::optional<std::int64_t> score(const ScoredCandidate& c, ScorePolicy policy, double accuracy_floor) {
  if (policy == ScorePolicy::independent) {
    if (c.model.accuracy < accuracy_floor) return std::nullopt;
    return static_cast<std::int64_t>(c.offline_correct);
  }
  return static_cast<std::int64_t>(c.offline_correct) - static_cast<std::int64_t>(c.primary_correct);
}

Selection select(std::span<const ScoredCandidate> candidates, ScorePolicy policy, const SelectionLimits& limits,
                 std::string phase_id) {
  if (limits.budget_bits == 0) throw std::invalid_argument("selection budget must be positive");
  struct Entry {
    const ScoredCandidate* c;
    std::int64_t score;
    std::uint32_t nnz;
  };
  std::vector<Entry> survivors;
  for (const auto& c : candidates) {
    const auto s = score(c, policy);
    if (s && *s > 0) survivors.push_back({&c, *s, static_cast<std::uint32_t>(c.model.nnz())});
  }
  std::sort(survivors.begin(), survivors.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.nnz != b.nnz) return a.nnz < b.nnz;
    return a.c->model.pc < b.c->model.pc;
  });
  std::set<std::uint32_t> caps;
  for (const auto& e : survivors) caps.insert(std::max<std::uint32_t>(1, e.nnz));

  Selection best;
  best.hint_set.phase_id = phase_id;
  best.hint_set.config = {limits.lh, limits.gh, 0, 0, limits.q, limits.p};
  bool found = false;
  for (auto cap : caps) {
    SlbiuConfig cfg{limits.lh, limits.gh, 0, cap, limits.q, limits.p};
    const std::uint64_t n = limits.budget_bits / cfg.hint_bits();
    if (n == 0) continue;
    std::int64_t sum = 0;
    std::uint64_t taken = 0;
    for (const auto& e : survivors) {
      if (taken == n) break;
      if (e.nnz > cap) continue;
      sum += e.score;
      ++taken;
    }
    if (!found || sum > best.score_sum || (sum == best.score_sum && n > best.hint_set.config.n)) {
      found = true;
      best.score_sum = sum;
      best.hint_set.config.n = static_cast<std::uint32_t>(n);
      best.hint_set.config.nnz = cap;
    }
  }
  if (!found) return best;
  std::uint64_t taken = 0;
  for (const auto& e : survivors) {
    if (taken == best.hint_set.config.n) break;
    if (e.nnz > best.hint_set.config.nnz) continue;
    best.hint_set.hints.push_back(make_hint(e.c->model));
    ++taken;
  }
  return best;
}

std::uint64_t payload_bits(const HintSet& hs) { return storage_bits(hs.config); }

std::vector<std::uint8_t> encode_hintset(const HintSet& hs) {
  hs.validate();
  const auto& c = hs.config;
  for (auto v : {c.lh, c.gh, c.n, c.nnz, c.q, c.p})
    if (v > 0xffff) throw hint_error("config field exceeds u16");
  if (hs.phase_id.size() > 0xffff) throw hint_error("phase id too long");

  ByteWriter out;
  out.bytes("SBPH", 4);
  out.u16(kHintVersion);
  out.u16(static_cast<std::uint16_t>(hs.phase_id.size()));
  out.bytes(hs.phase_id.data(), hs.phase_id.size());
  for (auto v : {c.lh, c.gh, c.n, c.nnz, c.q, c.p}) out.u16(static_cast<std::uint16_t>(v));
  out.u16(static_cast<std::uint16_t>(hs.hints.size()));

  BitWriter bits;
  const unsigned ib = c.index_bits();
  for (std::uint32_t slot = 0; slot < c.n; ++slot) {
    const SparsityHint* h = slot < hs.hints.size() ? &hs.hints[slot] : nullptr;
    bits.put(h ? h->pc : 0, c.p);
    bits.put(h ? encode_value(h->intercept, c.q) : 0, c.q);
    for (std::uint32_t e = 0; e < c.nnz; ++e) {
      const bool real = h && e < h->entries.size();
      bits.put(real ? h->entries[e].index : 0, ib);
      bits.put(real ? encode_value(h->entries[e].weight, c.q) : 0, c.q);
    }
    bits.put(0, c.lh);
  }
  if (bits.bit_count() != storage_bits(c)) throw hint_error("internal: payload size mismatch");
  out.append(bits.take());
  return out.take();
}

HintSet decode_hintset(std::span<const std::uint8_t> bytes) {
  try {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "SBPH", 4) != 0) throw hint_error("bad hint file magic");
    ByteReader in(bytes);
    in.skip(4);
    if (in.u16() != kHintVersion) throw hint_error("unsupported hint file version");
    HintSet hs;
    const auto len = in.u16();
    auto phase = in.take(len);
    hs.phase_id.assign(phase.begin(), phase.end());
    auto& c = hs.config;
    c.lh = in.u16();
    c.gh = in.u16();
    c.n = in.u16();
    c.nnz = in.u16();
    c.q = in.u16();
    c.p = in.u16();
    const auto used = in.u16();
    if (used > c.n) throw hint_error("used hint count exceeds N");
    quant_spec_for_width(c.q);
    if (c.p == 0 || c.p > 64) throw hint_error("pc width p must lie in [1,64]");
    const std::uint64_t expect = (storage_bits(c) + 7) / 8;
    if (in.remaining() != expect)
      throw hint_error("payload is " + std::to_string(in.remaining()) + " bytes, config requires " +
                       std::to_string(expect));
    BitReader bits(in.take(in.remaining()));
    const unsigned ib = c.index_bits();
    for (std::uint32_t slot = 0; slot < c.n; ++slot) {
      SparsityHint h;
      h.pc = bits.get(c.p);
      h.intercept = decode_value(bits.get(c.q), c.q);
      for (std::uint32_t e = 0; e < c.nnz; ++e) {
        const auto index = static_cast<std::uint32_t>(bits.get(ib));
        const double w = decode_value(bits.get(c.q), c.q);
        if (w != 0.0) h.entries.push_back({index, w});
      }
      bits.get(c.lh);
      if (slot < used) hs.hints.push_back(std::move(h));
    }
    hs.validate();
    return hs;
  } catch (const std::out_of_range& e) {
    throw hint_error(std::string("truncated hint file: ") + e.what());
  }
}

void write_hintset(const HintSet& hs, const std::filesystem::path& path) { write_file(path, encode_hintset(hs)); }

HintSet read_hintset(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error& e) {
    throw hint_error(e.what());
  }
  return decode_hintset(bytes);
}

HintSet random_hintset(const SlbiuConfig& config, std::span<const std::uint64_t> pcs, std::uint64_t seed) {
  HintSet hs;
  hs.phase_id = "random";
  hs.config = config;
  std::mt19937_64 rng(seed);
  const std::uint32_t l = config.lh + config.gh;
  auto draw_value = [&]() -> double {
    if (auto spec = quant_spec_for_width(config.q)) {
      const auto span = static_cast<std::uint64_t>(spec->max_code() - spec->min_code() + 1);
      return std::ldexp(double(spec->min_code() + static_cast<std::int64_t>(rng() % span)),
                        -static_cast<int>(spec->fraction_bits));
    }
    return static_cast<float>(std::ldexp(double(rng() >> 11), -53) * 16.0 - 8.0);
  };
  for (auto pc : pcs) {
    if (hs.hints.size() == config.n) break;
    SparsityHint h;
    h.pc = config.p < 64 ? pc & mask(config.p) : pc;
    h.intercept = draw_value();
    std::set<std::uint32_t> idx;
    const std::uint32_t want = std::min(config.nnz, l);
    while (idx.size() < want) idx.insert(static_cast<std::uint32_t>(rng() % l));
    for (auto j : idx) {
      double w = 0.0;
      while (w == 0.0) w = draw_value();
      h.entries.push_back({j, w});
    }
    hs.hints.push_back(std::move(h));
  }
  return hs;
}

}  // namespace sbp
