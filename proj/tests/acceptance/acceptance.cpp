// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sbp/baseline.hpp"
#include "sbp/cli.hpp"
#include "sbp/hints.hpp"
#include "sbp/history.hpp"
#include "sbp/online_sgd.hpp"
#include "sbp/simulator.hpp"
#include "sbp/slbiu.hpp"
#include "sbp/sparse_model.hpp"
#include "sbp/synthetic.hpp"
#include "sbp/trace.hpp"

using namespace sbp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Trace correlated(std::uint32_t m, std::uint32_t k, std::uint64_t len, std::uint64_t seed, std::string name = {}) {
  SyntheticScenario s;
  s.noise_branches = m;
  s.correlation_distance = k;
  s.length = len;
  s.seed = seed;
  Trace t = gen_correlated(s);
  t.phase_id = name;
  return t;
}

// Fixed synthetic corpus used by the end-to-end criteria.
std::vector<Trace> corpus() {
  std::vector<Trace> c;
  c.push_back(correlated(2, 1, 120000, 11, "corr_m2_k1"));
  c.push_back(correlated(4, 2, 120000, 12, "corr_m4_k2"));
  c.push_back(correlated(8, 1, 120000, 13, "corr_m8_k1"));
  SyntheticScenario loop;
  loop.kind = ScenarioKind::loop;
  loop.loop_period = 7;
  loop.length = 60000;
  c.push_back(gen_loop(loop));
  c.back().phase_id = "loop_s7";
  SyntheticScenario util;
  util.kind = ScenarioKind::utilization;
  util.branch_frequency = 0.5;
  util.offload_ratio = 0.25;
  util.length = 200000;
  util.seed = 14;
  c.push_back(gen_utilization(util).trace);
  c.back().phase_id = "util_f50";
  return c;
}

const HistoryConfig kCorpusHistory{32, 32};

PipelineConfig corpus_pipeline(std::uint32_t q) {
  PipelineConfig p;
  p.q = q;
  p.history = kCorpusHistory;
  p.screen.min_occurrences = 5000;
  return p;
}

// 1. Sparse recovery on the long correlated trace.
Outcome sparse_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Trace t = correlated(8, 1, 1000000, 42);
  const auto layout = correlated_layout(8);
  const auto data = collect_dataset(t, HistoryConfig{512, 512}, layout.pc_b);
  const SparseModel m = lambda_search(data, SolverConfig{});
  const double secs = seconds_since(t0);
  std::uint32_t dominant = 0;
  double best = -1;
  for (const auto& c : m.weights)
    if (std::abs(c.weight) > best) best = std::abs(c.weight), dominant = c.index;
  const std::uint32_t want = layout.a_history_index(1);
  const bool pass = m.accuracy >= 0.999 && m.nnz() <= 3 && dominant == want && secs < 60;
  return {pass, fmt("m=%zu accuracy=%.6f nnz=%zu dominant index=%u (A at %u) weight=%.4f lambda=%.3g time=%.1fs",
                    data.size(), m.accuracy, m.nnz(), dominant, want, best, m.lambda, secs)};
}

// 2. Noise blowup with a capacity-limited TAGE-lite.
Outcome noise_blowup() {
  BaselineConfig base;
  base.kind = BaselineKind::tage_lite;
  base.tage.tables = 4;
  base.tage.log_entries = 8;
  base.tage.min_history = 4;
  std::vector<double> unique;
  bool coupled_ok = true;
  std::string detail;
  for (std::uint32_t m : {2u, 4u, 8u}) {
    const Trace t = correlated(m, 1, 1000000, 7);
    const auto layout = correlated_layout(m);
    SimConfig cfg;
    cfg.baseline = base;
    cfg.history = kCorpusHistory;
    const auto b = run(t, cfg);
    HintSet hs;
    hs.config = {kCorpusHistory.lh, kCorpusHistory.gh, 1, 1, 8, 64};
    hs.hints.push_back({layout.pc_b, 0.0, {{layout.a_history_index(1), 1.0}}});
    cfg.hints = hs;
    const auto c = run(t, cfg);
    const auto& bb = b.per_branch.at(layout.pc_b);
    const auto& cb = c.per_branch.at(layout.pc_b);
    unique.push_back(bb.unique_entries_avg);
    const double ratio = double(bb.mispredictions) / double(std::max<std::uint64_t>(cb.mispredictions, 1));
    coupled_ok = coupled_ok && double(cb.mispredictions) <= 0.01 * double(bb.mispredictions) && ratio >= 10;
    detail += fmt("M=%u: unique=%.2f alloc=%llu miss base=%llu coupled=%llu; ", m, bb.unique_entries_avg,
                  (unsigned long long)bb.allocations, (unsigned long long)bb.mispredictions,
                  (unsigned long long)cb.mispredictions);
  }
  const bool monotone = unique[0] < unique[1] && unique[1] < unique[2];
  detail += fmt("monotone=%s coupled<=1%%=%s", monotone ? "yes" : "no", coupled_ok ? "yes" : "no");
  return {monotone && coupled_ok, detail};
}

// 3. Encoded payload length equals the storage formula.
Outcome storage_exactness() {
  bool pass = true;
  std::string detail;
  for (const auto& [cfg, want] : {std::pair{SlbiuConfig{512, 512, 13, 36, 8, 64}, 16016ull},
                                  std::pair{SlbiuConfig{512, 512, 2, 34, 32, 64}, 4072ull}}) {
    std::vector<std::uint64_t> pcs;
    for (std::uint32_t i = 0; i < cfg.n; ++i) pcs.push_back(0x400000 + 0x40 * i);
    const HintSet hs = random_hintset(cfg, pcs, 5);
    const auto bytes = encode_hintset(hs);
    const std::size_t header = 4 + 2 + 2 + hs.phase_id.size() + 12 + 2;
    const std::uint64_t payload = (bytes.size() - header) * 8;
    const bool ok = storage_bits(cfg) == want && payload_bits(hs) == want && payload == want &&
                    decode_hintset(bytes) == hs;
    pass = pass && ok;
    detail += fmt("(N=%u,nnz=%u,q=%u) formula=%llu encoded=%llu want=%llu; ", cfg.n, cfg.nnz, cfg.q,
                  (unsigned long long)storage_bits(cfg), (unsigned long long)payload, want);
  }
  return {pass, detail};
}

// 4. Quantization error bound and end-to-end Q3.4 vs full precision.
Outcome quantization(const std::vector<Trace>& traces) {
  std::mt19937_64 rng(4);
  std::size_t violations = 0;
  for (const auto spec : {QuantSpec::q3_4(), QuantSpec::q3_12()}) {
    std::uniform_real_distribution<double> w(spec.min_value(), spec.max_value());
    for (int i = 0; i < 1000000; ++i) {
      const double v = w(rng);
      if (std::abs(quantize_value(v, spec) - v) > spec.step() / 2) ++violations;
    }
  }
  bool e2e = true;
  std::string detail = fmt("violations=%zu; ", violations);
  double sum_q = 0, sum_f = 0;
  for (const auto& t : traces) {
    const auto q = run_phase(t, corpus_pipeline(8));
    const auto f = run_phase(t, corpus_pipeline(32));
    e2e = e2e && q.coupled.mpki <= f.coupled.mpki + 0.05;
    sum_q += q.coupled.mpki;
    sum_f += f.coupled.mpki;
    // Mispredictions on branches whose full-precision model reaches accuracy_stop.
    std::uint64_t suff_q = 0, suff_f = 0;
    for (const auto& c : f.candidates)
      if (c.model.sufficient) {
        suff_q += q.coupled.per_branch.at(c.model.pc).mispredictions;
        suff_f += f.coupled.per_branch.at(c.model.pc).mispredictions;
      }
    detail += fmt("%s q3.4=%.4f fp32=%.4f base=%.4f (accurate-model branches miss q3.4=%llu fp32=%llu); ",
                  t.phase_id.c_str(), q.coupled.mpki, f.coupled.mpki, q.baseline.mpki, (unsigned long long)suff_q,
                  (unsigned long long)suff_f);
  }
  detail += fmt("mean q3.4=%.4f fp32=%.4f", sum_q / traces.size(), sum_f / traces.size());
  return {violations == 0 && e2e, detail};
}

// 5. Deduplication on the loop branch.
Outcome deduplication() {
  SyntheticScenario s;
  s.kind = ScenarioKind::loop;
  s.loop_period = 5;
  s.length = 20000;
  const Trace t = gen_loop(s);
  const auto data = collect_dataset(t, kCorpusHistory, kLoopPc);
  const SolverConfig cfg;
  const SparseModel lasso = lambda_search(data, cfg);
  const DedupResult d = dedup_detail(data, lasso, cfg);
  const SparseModel& out = dedup(data, lasso, cfg);
  std::size_t shared = 0;
  for (std::size_t a = 0; a < out.weights.size(); ++a)
    for (std::size_t b = a + 1; b < out.weights.size(); ++b)
      shared += data.columns_equal(out.weights[a].index, out.weights[b].index) ? 1 : 0;
  const auto p_en = predict_all(d.elasticnet, data);
  const auto p_merged = predict_all(d.merged, data);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < p_en.size(); ++i) mismatches += p_en[i] != p_merged[i] ? 1 : 0;
  const bool pass = d.accepted && shared == 0 && mismatches == 0;
  return {pass, fmt("lasso nnz=%zu elasticnet nnz=%zu merged nnz=%zu accepted=%s same-group pairs=%zu "
                    "prediction mismatches=%zu/%zu",
                    lasso.nnz(), d.elasticnet.nnz(), d.merged.nnz(), d.accepted ? "yes" : "no", shared, mismatches,
                    p_en.size())};
}

// 6. Selection soundness against the exhaustive grid.
Outcome selection_soundness() {
  std::size_t bad_hint = 0, over_budget = 0, grid_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    SelectionLimits lim;
    const std::uint32_t qs[] = {8, 16, 32};
    lim.q = qs[rng() % 3];
    lim.lh = lim.gh = 64u << (rng() % 4);
    lim.budget_bits = 512 + rng() % 32768;
    std::vector<ScoredCandidate> pool(1 + rng() % 40);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      auto& c = pool[i];
      c.model.pc = 0x400000 + 0x40 * i;
      const std::size_t nnz = rng() % 48;
      for (std::size_t j = 0; j < nnz; ++j) c.model.weights.push_back({static_cast<std::uint32_t>(j), 0.5});
      c.offline_correct = 9000 + rng() % 1000;
      c.primary_correct = 9000 + rng() % 1000;
    }
    const auto s = select(pool, ScorePolicy::relative, lim);
    std::vector<std::int64_t> scores;
    std::vector<std::size_t> nnz;
    std::map<std::uint64_t, const ScoredCandidate*> by_pc;
    for (const auto& c : pool) {
      scores.push_back(*score(c, ScorePolicy::relative));
      nnz.push_back(c.model.nnz());
      by_pc[c.model.pc] = &c;
    }
    for (const auto& h : s.hint_set.hints) {
      const auto* c = by_pc.at(h.pc);
      if (c->offline_correct <= c->primary_correct) ++bad_hint;
    }
    if (storage_bits(s.hint_set.config) > lim.budget_bits) ++over_budget;
    const auto g = oracle::exhaustive_select(scores, nnz, lim);
    if (g.n != s.hint_set.config.n || g.nnz != s.hint_set.config.nnz || g.sum != s.score_sum) ++grid_mismatch;
  }
  return {bad_hint == 0 && over_budget == 0 && grid_mismatch == 0,
          fmt("1000 pools: non-positive hints=%zu over budget=%zu grid mismatches=%zu", bad_hint, over_budget,
              grid_mismatch)};
}

// 7. Empty hint set leaves every corpus report unchanged.
Outcome coupling_identity(const std::vector<Trace>& traces) {
  std::size_t diffs = 0, runs = 0;
  for (const auto kind : {BaselineKind::gshare, BaselineKind::tage_lite}) {
    for (const auto& t : traces) {
      SimConfig cfg;
      cfg.baseline.kind = kind;
      cfg.history = kCorpusHistory;
      const auto base = run(t, cfg);
      HintSet empty;
      empty.config = {kCorpusHistory.lh, kCorpusHistory.gh, 0, 0, 8, 64};
      cfg.hints = empty;
      const auto coupled = run(t, cfg);
      diffs += (base == coupled && report_json(base) == report_json(coupled)) ? 0 : 1;
      ++runs;
    }
  }
  return {diffs == 0, fmt("%zu/%zu reports differ (gshare and tage-lite)", diffs, runs)};
}

// 8. SLBIU and the offline evaluator use the same sign rule.
Outcome sign_rule() {
  std::mt19937_64 rng(8);
  std::size_t mismatches = 0, ties = 0;
  const std::uint32_t qs[] = {8, 16, 32};
  for (int i = 0; i < 100000; ++i) {
    const std::uint32_t gh = 1 + rng() % 24, lh = 1 + rng() % 24;
    const SlbiuConfig cfg{lh, gh, 1, 1 + std::uint32_t(rng() % 8), qs[i % 3], 64};
    const std::uint64_t pc = 0x400000;
    const HintSet hs = random_hintset(cfg, std::span(&pc, 1), rng());
    Slbiu s(hs);
    HistoryState state({gh, lh});
    HistoryRegister ghr(gh);
    const int steps = static_cast<int>(rng() % 48);
    for (int k = 0; k < steps; ++k) {
      const std::uint64_t at = rng() % 3 == 0 ? pc : 0x500000;
      const bool taken = rng() & 1;
      state.update(at, taken);
      s.update(at, taken);
      ghr.push(taken);
    }
    TrainingDataset d(pc, gh + lh);
    d.append(state.features(pc), true);
    const SparseModel model = hint_model(hs.hints[0]);
    const bool offline = eval_accuracy(model, d) == 1.0;
    mismatches += s.predict(pc, ghr).taken != offline ? 1 : 0;
    double z = model.bias;
    for (const auto& c : model.weights) z += c.weight * d.feature(0, c.index);
    ties += z == 0.0 ? 1 : 0;
  }
  return {mismatches == 0, fmt("100000 cases, mismatches=%zu (zero-sum ties exercised: %zu)", mismatches, ties)};
}

// 9. Online SGD-L1 against the offline model on branch B.
Outcome online_sgd() {
  const Trace t = correlated(8, 1, 1000000, 42);
  const auto layout = correlated_layout(8);
  const HistoryConfig h{64, 64};
  const auto data = collect_dataset(t, h, layout.pc_b);
  const SparseModel offline = lambda_search(data, SolverConfig{});
  const std::uint64_t offline_miss = data.size() - count_correct(offline, data);
  const std::uint64_t targets[] = {layout.pc_b};
  const OnlineConfig oc;
  const auto online = run_online(t, h, targets, oc).at(layout.pc_b);
  const bool ratio_ok = double(online.mispredictions) <= 4.0 * double(offline_miss);
  const bool nnz_ok = online.nnz_avg <= oc.nnz_cap && online.nnz_max <= oc.nnz_cap;
  return {ratio_ok && nnz_ok,
          fmt("B: online miss=%llu offline miss=%llu (limit 4x) over %llu occurrences; nnz_avg=%.2f nnz_max=%zu "
              "final lambda=%.3g",
              (unsigned long long)online.mispredictions, (unsigned long long)offline_miss,
              (unsigned long long)online.occurrences, online.nnz_avg, online.nnz_max, online.final_lambda)};
}

// 10. Coordinate descent against the projected-gradient reference.
Outcome solver_correctness() {
  std::mt19937_64 rng(10);
  const SolverConfig cfg;
  double worst_gap = -1e300, worst_kkt = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t d = 2 + rng() % 11, m = 50 + rng() % 151;
    std::normal_distribution<double> normal(0.0, 1.5);
    std::vector<double> truth(d);
    for (auto& v : truth) v = rng() % 2 ? normal(rng) : 0.0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    oracle::Matrix x;
    std::vector<int> y;
    TrainingDataset data(0x1, d);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::int8_t> row(d);
      std::vector<double> xr(d);
      double z = 0;
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = (rng() & 1) ? 1 : -1;
        xr[j] = row[j];
        z += truth[j] * xr[j];
      }
      const int label = unit(rng) < 1 / (1 + std::exp(-z)) ? 1 : 0;
      data.append(row, label != 0);
      x.push_back(xr);
      y.push_back(label);
    }
    const double lambda = std::exp(std::log(1e-3) + unit(rng) * (std::log(0.2) - std::log(1e-3)));
    const SparseModel cd = fit(data, lambda, 1.0, cfg);
    std::vector<double> w(d, 0.0);
    for (const auto& c : cd.weights) w[c.index] = c.weight;
    const auto ref = oracle::projected_gradient(x, y, lambda, 1.0);
    worst_gap = std::max(worst_gap, oracle::objective(x, y, cd.bias, w, lambda, 1.0) - ref.objective);
    double gb;
    std::vector<double> gw;
    oracle::loss_gradient(x, y, cd.bias, w, gb, gw);
    double kkt = std::abs(gb);
    for (std::size_t j = 0; j < d; ++j)
      kkt = std::max(kkt, w[j] == 0.0 ? std::max(0.0, std::abs(gw[j]) - lambda)
                                      : std::abs(gw[j] + lambda * (w[j] > 0 ? 1.0 : -1.0)));
    worst_kkt = std::max(worst_kkt, kkt);
  }
  return {worst_gap <= 1e-6 && worst_kkt <= 10 * cfg.tolerance,
          fmt("20 instances: worst objective gap=%.3g (limit 1e-6) worst KKT violation=%.3g (limit %.0e)",
              worst_gap, worst_kkt, 10 * cfg.tolerance)};
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// 11. Every CLI command is byte-reproducible.
Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "sbp_acceptance_cli";
  fs::remove_all(root);
  using Cmd = std::pair<std::string, std::function<std::vector<std::string>(const fs::path&)>>;
  const std::vector<std::string> hist{"--gh", "16", "--lh", "16"};
  auto h = [&](std::vector<std::string> a) {
    a.insert(a.end(), hist.begin(), hist.end());
    return a;
  };
  const std::vector<Cmd> cmds{
      {"gen", [](const fs::path& d) {
         return std::vector<std::string>{"--seed", "3", "gen", "--kind", "correlated", "--m", "2", "--len", "40000",
                                         "-o", (d / "traces" / "c.sbpt").string()};
       }},
      {"gen-loop", [](const fs::path& d) {
         return std::vector<std::string>{"gen", "--kind", "loop", "--s", "5", "--len", "20000", "-o",
                                         (d / "traces" / "l.sbpt").string()};
       }},
      {"gen-util", [](const fs::path& d) {
         return std::vector<std::string>{"--seed", "5", "gen", "--kind", "utilization", "--len", "20000",
                                         "--offload-ratio", "0.25", "-o", (d / "u.sbpt").string()};
       }},
      {"train", [&](const fs::path& d) {
         return h({"train", "--trace", (d / "traces" / "c.sbpt").string(), "-o", (d / "models.txt").string()});
       }},
      {"select", [&](const fs::path& d) {
         return h({"select", "--trace", (d / "traces" / "c.sbpt").string(), "--models", (d / "models.txt").string(),
                   "-o", (d / "h.sbph").string()});
       }},
      {"simulate", [&](const fs::path& d) {
         return h({"simulate", "--trace", (d / "traces" / "c.sbpt").string(), "--hints", (d / "h.sbph").string(),
                   "-o", (d / "sim.json").string()});
       }},
      {"pipeline", [&](const fs::path& d) {
         return h({"pipeline", "--traces", (d / "traces").string(), "--budget-kb", "2", "--policy", "relative", "--q",
                   "3.4", "--out", (d / "pipe").string()});
       }},
      {"online", [&](const fs::path& d) {
         return h({"online", "--trace", (d / "traces" / "c.sbpt").string(), "--targets", "all", "-o",
                   (d / "online.json").string()});
       }},
      {"report", [](const fs::path& d) {
         return std::vector<std::string>{"report", "--scurve", (d / "pipe" / "c.json").string(),
                                         (d / "pipe" / "l.json").string(), "--csv", (d / "s.csv").string(), "-o",
                                         (d / "s.txt").string()};
       }},
  };
  std::map<std::string, std::vector<std::uint64_t>> digests;
  std::size_t failures = 0;
  for (int rep = 0; rep < 3; ++rep) {
    const fs::path d = root / std::to_string(rep);
    fs::create_directories(d / "traces");
    for (const auto& [name, make] : cmds) {
      std::set<fs::path> before;
      for (const auto& e : fs::recursive_directory_iterator(d))
        if (e.is_regular_file()) before.insert(e.path());
      std::ostringstream out, err;
      const int code = cli::dispatch(make(d), out, err);
      if (code != 0) ++failures;
      std::string blob = out.str();
      std::vector<fs::path> produced;
      for (const auto& e : fs::recursive_directory_iterator(d))
        if (e.is_regular_file() && !before.contains(e.path())) produced.push_back(e.path());
      std::sort(produced.begin(), produced.end());
      for (const auto& p : produced) blob += fs::relative(p, d).string() + "\n" + slurp(p);
      digests[name].push_back(fnv(blob));
    }
  }
  std::size_t differing = 0;
  for (const auto& [name, hs] : digests)
    if (!(hs[0] == hs[1] && hs[1] == hs[2])) ++differing;
  return {failures == 0 && differing == 0,
          fmt("%zu commands x 3 runs: nonzero exits=%zu, commands with differing hashes=%zu", cmds.size(), failures,
              differing)};
}

}  // namespace

int main() {
  const std::vector<Trace> traces = corpus();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"sparse recovery", sparse_recovery},
      {"noise blowup", noise_blowup},
      {"storage exactness", storage_exactness},
      {"quantization", [&] { return quantization(traces); }},
      {"deduplication", deduplication},
      {"selection soundness", selection_soundness},
      {"coupling identity", [&] { return coupling_identity(traces); }},
      {"sign-rule equivalence", sign_rule},
      {"online sgd-l1", online_sgd},
      {"solver correctness", solver_correctness},
      {"cli determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %-22s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
