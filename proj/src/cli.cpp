#include "sbp/cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "parallel.hpp"
#include "sbp/hints.hpp"
#include "sbp/online_sgd.hpp"
#include "sbp/simulator.hpp"
#include "sbp/synthetic.hpp"

namespace sbp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Raised for flag values that parse but make no sense together.
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kFormats =
    "\nFiles:\n"
    "  trace (.sbpt)  \"SBPT\" u16 version=1, u16 reserved, u64 total_instructions, then per branch\n"
    "                 pc u64, flags u8 (bit0 taken), gap u8 (255 = escape, u32 gap follows). Little-endian.\n"
    "  hints (.sbph)  \"SBPH\" u16 version, u16 phase length + bytes, u16 lh gh N nnz q p, u16 used,\n"
    "                 then N bit-packed slots of pc:p intercept:q nnz x (index, weight:q) lh zero bits.\n"
    "  models (.txt)  per model a line \"pc bias lambda accuracy m\" then \"index weight\" lines.\n"
    "  reports        JSON (sorted keys, per_branch ordered by pc) plus a text table.\n";

struct Globals {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool verbose = false;
};

struct HistoryFlags {
  std::uint32_t gh = 512;
  std::uint32_t lh = 512;
  void add(CLI::App* app) {
    app->add_option("--gh", gh, "global history bits")->capture_default_str();
    app->add_option("--lh", lh, "local history bits")->capture_default_str();
  }
  HistoryConfig config() const {
    HistoryConfig h{gh, lh};
    try {
      h.validate();
    } catch (const std::exception& e) {
      throw usage_error(e.what());
    }
    return h;
  }
};

struct BaselineFlags {
  std::string kind = "tage-lite";
  std::uint32_t gshare_log = GshareConfig{}.log_entries;
  std::uint32_t gshare_hist = GshareConfig{}.history_length;
  TageLiteConfig tage;
  void add(CLI::App* app) {
    app->add_option("--baseline", kind, "gshare | tage-lite")->capture_default_str();
    app->add_option("--gshare-log-entries", gshare_log, "log2 gshare counters")->capture_default_str();
    app->add_option("--gshare-history", gshare_hist, "gshare history bits")->capture_default_str();
    app->add_option("--tage-tables", tage.tables, "TAGE-lite tagged tables")->capture_default_str();
    app->add_option("--tage-log-entries", tage.log_entries, "log2 entries per tagged table")->capture_default_str();
    app->add_option("--tage-log-bimodal", tage.log_bimodal, "log2 bimodal entries")->capture_default_str();
    app->add_option("--tage-min-history", tage.min_history, "shortest tagged history")->capture_default_str();
    app->add_option("--tage-max-history", tage.max_history, "history cap")->capture_default_str();
  }
  BaselineConfig config() const {
    BaselineConfig c;
    try {
      c.kind = parse_baseline_kind(kind);
      c.gshare = {gshare_log, gshare_hist};
      c.tage = tage;
      make_baseline(c);  // validates
    } catch (const std::invalid_argument& e) {
      throw usage_error(e.what());
    }
    return c;
  }
};

std::uint32_t parse_q(const std::string& s) {
  if (s == "3.4" || s == "8") return 8;
  if (s == "3.12" || s == "16") return 16;
  if (s == "fp32" || s == "32") return 32;
  throw usage_error("--q must be 3.4, 3.12 or fp32 (got '" + s + "')");
}

ScorePolicy parse_policy(const std::string& s) {
  if (s == "relative") return ScorePolicy::relative;
  if (s == "independent") return ScorePolicy::independent;
  throw usage_error("--policy must be relative or independent (got '" + s + "')");
}

std::uint64_t budget_bits(double kb) {
  if (!(kb > 0)) throw usage_error("--budget-kb must be positive");
  return static_cast<std::uint64_t>(kb * 1024.0 * 8.0);
}

std::uint64_t parse_pc(const std::string& s) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw usage_error("bad pc '" + s + "'");
  return v;
}

std::string hex(std::uint64_t pc) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%" PRIx64, pc);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

fs::path sibling(const fs::path& path, const std::string& ext) {
  fs::path p = path;
  return p += ext;
}

std::vector<std::uint64_t> screened_pcs(const Trace& trace, const HistoryConfig& h, const BranchScreen& s) {
  std::vector<std::uint64_t> pcs;
  for (const auto& [pc, prof] : profile_branches(trace, h))
    if (screen(prof.samples, prof.taken_rate(), s)) pcs.push_back(pc);
  return pcs;
}

void add_screen(CLI::App* app, BranchScreen& s) {
  app->add_option("--min-occurrences", s.min_occurrences, "screen: minimum post-warmup samples")->capture_default_str();
  app->add_option("--bias-low", s.bias_low, "screen: minimum taken rate")->capture_default_str();
  app->add_option("--bias-high", s.bias_high, "screen: maximum taken rate")->capture_default_str();
}

void add_solver(CLI::App* app, SolverConfig& c) {
  app->add_option("--lambda-min", c.lambda_min)->capture_default_str();
  app->add_option("--lambda-max", c.lambda_max)->capture_default_str();
  app->add_option("--accuracy-stop", c.accuracy_stop, "lambda search accuracy target")->capture_default_str();
  app->add_option("--max-iterations", c.max_iterations, "coordinate descent sweeps")->capture_default_str();
  app->add_option("--tolerance", c.tolerance)->capture_default_str();
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse linear branch prediction toolkit", "sbp"};
  app.footer(kFormats);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "progress on stderr");

  std::function<void()> action;

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic trace");
  gen->footer(kFormats);
  std::string kind;
  SyntheticScenario sc;
  fs::path gen_out;
  gen->add_option("--kind", kind, "correlated | loop | utilization")->required();
  gen->add_option("--m", sc.noise_branches, "noise branches (correlated)")->capture_default_str();
  gen->add_option("--k", sc.correlation_distance, "correlation distance in blocks (correlated)")->capture_default_str();
  gen->add_option("--s", sc.loop_period, "loop period (loop)")->capture_default_str();
  gen->add_option("--offset", sc.loop_offset, "loop offset (loop)")->capture_default_str();
  gen->add_option("--branch-frequency", sc.branch_frequency, "branch share of instructions (utilization)")
      ->capture_default_str();
  gen->add_option("--offload-ratio", sc.offload_ratio, "offloaded static branch share (utilization)")
      ->capture_default_str();
  gen->add_option("--static-branches", sc.static_branches, "static branches (utilization)")->capture_default_str();
  gen->add_option("--len", sc.length, "records (instructions for utilization)")->required();
  gen->add_option("-o,--out", gen_out, "output trace; utilization also writes <out>.offload")->required();
  gen->callback([&] {
    action = [&] {
      sc.seed = g.seed;
      if (kind == "correlated") {
        sc.kind = ScenarioKind::correlated;
        write_trace(gen_correlated(sc), gen_out);
      } else if (kind == "loop") {
        sc.kind = ScenarioKind::loop;
        write_trace(gen_loop(sc), gen_out);
      } else if (kind == "utilization") {
        sc.kind = ScenarioKind::utilization;
        auto u = gen_utilization(sc);
        write_trace(u.trace, gen_out);
        std::string list;
        for (auto pc : u.offloaded) list += hex(pc) + "\n";
        write_text(sibling(gen_out, ".offload"), list);
      } else {
        throw usage_error("--kind must be correlated, loop or utilization");
      }
    };
  });

  // train
  auto* train = app.add_subcommand("train", "fit Lasso models (lambda search + dedup) for screened branches");
  train->footer(kFormats);
  fs::path train_trace, train_out;
  HistoryFlags train_hist;
  SolverConfig train_solver;
  BranchScreen train_screen;
  std::vector<std::string> train_pcs;
  bool no_dedup = false;
  train->add_option("--trace", train_trace)->required()->check(CLI::ExistingFile);
  train_hist.add(train);
  add_solver(train, train_solver);
  add_screen(train, train_screen);
  train->add_option("--pcs", train_pcs, "explicit branch pcs instead of screening")->delimiter(',');
  train->add_flag("--no-dedup", no_dedup, "skip ElasticNet deduplication");
  train->add_option("-o,--out", train_out, "model dump")->required();
  train->callback([&] {
    action = [&] {
      const Trace t = read_trace(train_trace);
      const HistoryConfig h = train_hist.config();
      std::vector<std::uint64_t> pcs;
      for (const auto& s : train_pcs) pcs.push_back(parse_pc(s));
      if (train_pcs.empty()) pcs = screened_pcs(t, h, train_screen);
      const auto data = collect_datasets(t, h, pcs);
      std::vector<SparseModel> models(pcs.size());
      parallel_for(pcs.size(), g.jobs, [&](std::size_t i) {
        const auto& d = data.at(pcs[i]);
        if (d.size() == 0) throw std::runtime_error("branch " + hex(pcs[i]) + " has no post-warmup samples");
        SparseModel m = lambda_search(d, train_solver);
        models[i] = no_dedup ? m : dedup(d, m, train_solver);
      });
      std::ostringstream dump;
      for (const auto& m : models) write_model_dump(dump, m);
      write_text(train_out, dump.str());
      if (g.verbose) err << "trained " << models.size() << " models\n";
    };
  });

  // select
  auto* sel = app.add_subcommand("select", "quantize, score and select hints under a storage budget");
  sel->footer(kFormats);
  fs::path sel_trace, sel_models, sel_out;
  HistoryFlags sel_hist;
  BaselineFlags sel_base;
  std::string sel_policy = "relative", sel_q = "3.4";
  double sel_budget = 2.0;
  std::uint32_t sel_p = 64;
  sel->add_option("--trace", sel_trace, "profiling trace")->required()->check(CLI::ExistingFile);
  sel->add_option("--models", sel_models, "model dump from train")->required()->check(CLI::ExistingFile);
  sel_hist.add(sel);
  sel_base.add(sel);
  sel->add_option("--policy", sel_policy, "relative | independent")->capture_default_str();
  sel->add_option("--budget-kb", sel_budget, "SLBIU storage budget in KiB")->capture_default_str();
  sel->add_option("--q", sel_q, "weight format: 3.4 | 3.12 | fp32")->capture_default_str();
  sel->add_option("--p", sel_p, "pc bits per hint")->capture_default_str();
  sel->add_option("-o,--out", sel_out, "hint file")->required();
  sel->callback([&] {
    action = [&] {
      const std::uint32_t q = parse_q(sel_q);
      const ScorePolicy policy = parse_policy(sel_policy);
      const std::uint64_t budget = budget_bits(sel_budget);
      const HistoryConfig h = sel_hist.config();
      const BaselineConfig b = sel_base.config();
      const Trace t = read_trace(sel_trace);
      std::ifstream mf(sel_models);
      const auto models = read_model_dump(mf);
      std::vector<std::uint64_t> pcs;
      for (const auto& m : models) {
        for (const auto& c : m.weights)
          if (c.index >= h.length()) throw usage_error("model " + hex(m.pc) + " indexes past gh + lh");
        pcs.push_back(m.pc);
      }
      const auto data = collect_datasets(t, h, pcs);
      const auto primary = count_primary_correct(t, b, h);
      std::vector<ScoredCandidate> cands;
      for (const auto& m : models) {
        ScoredCandidate c;
        c.model = quantize_for_width(m, q);
        const auto& d = data.at(m.pc);
        c.model.accuracy = eval_accuracy(c.model, d);
        c.offline_correct = count_correct(c.model, d);
        auto it = primary.find(m.pc);
        c.primary_correct = it == primary.end() ? 0 : it->second;
        cands.push_back(std::move(c));
      }
      const auto s = select(cands, policy, SelectionLimits{budget, sel_p, q, h.lh, h.gh}, t.phase_id);
      write_hintset(s.hint_set, sel_out);
      if (g.verbose)
        err << "selected " << s.hint_set.hints.size() << " hints, N=" << s.hint_set.config.n
            << " nnz=" << s.hint_set.config.nnz << " score=" << s.score_sum << "\n";
    };
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "baseline-only and coupled simulation of one trace");
  sim->footer(kFormats);
  fs::path sim_trace, sim_hints, sim_out;
  HistoryFlags sim_hist;
  BaselineFlags sim_base;
  sim->add_option("--trace", sim_trace)->required()->check(CLI::ExistingFile);
  sim->add_option("--hints", sim_hints, "hint file; omit for baseline only")->check(CLI::ExistingFile);
  sim_hist.add(sim);
  sim_base.add(sim);
  sim->add_option("-o,--out", sim_out, "JSON report; the text report goes to <out>.txt")->required();
  sim->callback([&] {
    action = [&] {
      const Trace t = read_trace(sim_trace);
      SimConfig c{sim_base.config(), sim_hist.config(), std::nullopt, std::nullopt};
      const SimReport base = run(t, c);
      std::optional<SimReport> coupled;
      if (!sim_hints.empty()) {
        c.hints = read_hintset(sim_hints);
        coupled = run(t, c);
      }
      write_text(sim_out, phase_report_json(base, coupled ? &*coupled : nullptr, c.hints ? &*c.hints : nullptr));
      std::string text = "[baseline]\n" + report_text(base);
      if (coupled) text += "[coupled]\n" + report_text(*coupled);
      write_text(sibling(sim_out, ".txt"), text);
    };
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "profile, train, compress, select and simulate every trace");
  pipe->footer(kFormats);
  fs::path pipe_traces, pipe_out = "sbp_out";
  HistoryFlags pipe_hist;
  BaselineFlags pipe_base;
  SolverConfig pipe_solver;
  BranchScreen pipe_screen;
  std::string pipe_policy = "relative", pipe_q = "3.4";
  double pipe_budget = 2.0;
  std::uint32_t pipe_p = 64;
  pipe->add_option("--traces", pipe_traces, "directory of .sbpt files (one phase each)")
      ->required()
      ->check(CLI::ExistingDirectory);
  pipe->add_option("--budget-kb", pipe_budget, "SLBIU storage budget in KiB")->capture_default_str();
  pipe->add_option("--policy", pipe_policy, "relative | independent")->capture_default_str();
  pipe->add_option("--q", pipe_q, "weight format: 3.4 | 3.12 | fp32")->capture_default_str();
  pipe->add_option("--p", pipe_p, "pc bits per hint")->capture_default_str();
  pipe_hist.add(pipe);
  pipe_base.add(pipe);
  add_solver(pipe, pipe_solver);
  add_screen(pipe, pipe_screen);
  pipe->add_option("--out", pipe_out, "output directory")->capture_default_str();
  pipe->callback([&] {
    action = [&] {
      PipelineConfig pc;
      pc.q = parse_q(pipe_q);
      pc.policy = parse_policy(pipe_policy);
      pc.budget_bits = budget_bits(pipe_budget);
      pc.p = pipe_p;
      pc.history = pipe_hist.config();
      pc.baseline = pipe_base.config();
      pc.solver = pipe_solver;
      pc.screen = pipe_screen;
      pc.hint_dir = pipe_out;
      pc.jobs = g.jobs;
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(pipe_traces))
        if (e.is_regular_file() && e.path().extension() == ".sbpt") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      if (files.empty()) throw usage_error("no .sbpt files in " + pipe_traces.string());
      std::vector<ScurveInput> rows;
      for (const auto& f : files) {
        if (g.verbose) err << "phase " << f.stem().string() << "\n";
        const PhaseResult r = run_phase(read_trace(f), pc);
        const fs::path base = pipe_out / r.phase_id;
        write_text(sibling(base, ".json"), phase_report_json(r.baseline, &r.coupled, &r.selection.hint_set));
        write_text(sibling(base, ".txt"),
                   "[baseline]\n" + report_text(r.baseline) + "[coupled]\n" + report_text(r.coupled));
        rows.push_back({r.phase_id, r.baseline.mpki, r.coupled.mpki});
      }
      const Scurve s = report_scurve(rows);
      write_text(pipe_out / "scurve.txt", scurve_text(s));
      write_text(pipe_out / "scurve.csv", scurve_csv(s));
    };
  });

  // online
  auto* onl = app.add_subcommand("online", "online SGD-L1 replay with adaptive lambda");
  onl->footer(kFormats);
  fs::path onl_trace, onl_out;
  HistoryFlags onl_hist;
  OnlineConfig oc;
  BranchScreen onl_screen;
  std::string targets = "screened";
  onl->add_option("--trace", onl_trace)->required()->check(CLI::ExistingFile);
  onl_hist.add(onl);
  onl->add_option("--targets", targets, "all | screened | comma-separated pcs")->capture_default_str();
  onl->add_option("--eta", oc.eta, "step size")->capture_default_str();
  onl->add_option("--lambda-init", oc.lambda_init)->capture_default_str();
  onl->add_option("--interval", oc.adaptation_interval, "updates between lambda checks")->capture_default_str();
  onl->add_option("--nnz-cap", oc.nnz_cap)->capture_default_str();
  add_screen(onl, onl_screen);
  onl->add_option("-o,--out", onl_out, "JSON results")->required();
  onl->callback([&] {
    action = [&] {
      const Trace t = read_trace(onl_trace);
      const HistoryConfig h = onl_hist.config();
      try {
        oc.validate();
      } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
      }
      std::vector<std::uint64_t> pcs;
      if (targets == "screened") {
        pcs = screened_pcs(t, h, onl_screen);
      } else if (targets != "all") {
        std::stringstream ss(targets);
        for (std::string tok; std::getline(ss, tok, ',');) pcs.push_back(parse_pc(tok));
      }
      std::map<std::uint64_t, OnlineBranchResult> res;
      if (targets == "all" || !pcs.empty()) res = run_online(t, h, pcs, oc);
      json branches = json::array();
      std::uint64_t total = 0;
      for (const auto& [pc, r] : res) {
        total += r.mispredictions;
        branches.push_back({{"pc", hex(pc)},
                            {"occurrences", r.occurrences},
                            {"mispredictions", r.mispredictions},
                            {"nnz_avg", r.nnz_avg},
                            {"nnz_max", r.nnz_max},
                            {"final_nnz", r.final_nnz},
                            {"final_lambda", r.final_lambda}});
      }
      const json j = {{"phase_id", t.phase_id}, {"mispredictions", total}, {"per_branch", std::move(branches)}};
      write_text(onl_out, j.dump(2) + "\n");
    };
  });

  // report
  auto* rep = app.add_subcommand("report", "S-curve table over phase reports");
  rep->footer(kFormats);
  std::vector<fs::path> rep_files;
  fs::path rep_csv, rep_out;
  rep->add_option("--scurve", rep_files, "phase report JSON files")->required()->check(CLI::ExistingFile);
  rep->add_option("--csv", rep_csv, "also write plot-ready CSV");
  rep->add_option("-o,--out", rep_out, "text table (default: standard output)");
  rep->callback([&] {
    action = [&] {
      std::vector<ScurveInput> rows;
      for (const auto& f : rep_files) rows.push_back(read_scurve_input(f));
      const Scurve s = report_scurve(rows);
      if (rep_out.empty())
        out << scurve_text(s);
      else
        write_text(rep_out, scurve_text(s));
      if (!rep_csv.empty()) write_text(rep_csv, scurve_csv(s));
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "sbp: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  try {
    action();
    return kExitOk;
  } catch (const usage_error& e) {
    err << "sbp: " << e.what() << "\n";
  } catch (const config_error& e) {
    err << "sbp: configuration error: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    err << "sbp: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "sbp: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace sbp::cli
