#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sbp/cli.hpp"
#include "sbp/hints.hpp"
#include "sbp/online_sgd.hpp"
#include "sbp/simulator.hpp"
#include "sbp/synthetic.hpp"
#include "sbp/trace.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace sbp;

namespace {

BaselineConfig baseline_config(const std::string& kind) {
  BaselineConfig b;
  b.kind = parse_baseline_kind(kind);
  return b;
}

std::uint32_t q_width(const std::string& q) {
  if (q == "3.4" || q == "8") return 8;
  if (q == "3.12" || q == "16") return 16;
  if (q == "fp32" || q == "32") return 32;
  throw std::invalid_argument("q must be 3.4, 3.12 or fp32");
}

ScorePolicy policy(const std::string& p) {
  if (p == "relative") return ScorePolicy::relative;
  if (p == "independent") return ScorePolicy::independent;
  throw std::invalid_argument("policy must be relative or independent");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse linear branch prediction: traces, Lasso training, hints, SLBIU simulation";

  py::register_exception<trace_error>(m, "TraceError", PyExc_ValueError);
  py::register_exception<hint_error>(m, "HintError", PyExc_ValueError);
  py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);

  py::class_<Trace>(m, "Trace")
      .def(py::init<>())
      .def_readwrite("phase_id", &Trace::phase_id)
      .def_readonly("total_instructions", &Trace::total_instructions)
      .def("push", &Trace::push, "pc"_a, "taken"_a, "inst_gap"_a = 0)
      .def("__len__", [](const Trace& t) { return t.records.size(); })
      .def_property_readonly("pcs",
                             [](const Trace& t) {
                               std::vector<std::uint64_t> v;
                               for (const auto& r : t.records) v.push_back(r.pc);
                               return v;
                             })
      .def_property_readonly("outcomes",
                             [](const Trace& t) {
                               std::vector<bool> v;
                               for (const auto& r : t.records) v.push_back(r.taken);
                               return v;
                             })
      .def(py::self == py::self);

  m.def("read_trace", &read_trace, "path"_a);
  m.def("write_trace", &write_trace, "trace"_a, "path"_a);

  m.def(
      "gen_correlated",
      [](std::uint32_t m_, std::uint32_t k, std::uint64_t length, std::uint64_t seed) {
        SyntheticScenario s;
        s.noise_branches = m_;
        s.correlation_distance = k;
        s.length = length;
        s.seed = seed;
        return gen_correlated(s);
      },
      "m"_a, "k"_a = 1, "length"_a = 100000, "seed"_a = 0);
  m.def(
      "gen_loop",
      [](std::uint32_t period, std::uint64_t length, std::uint32_t offset) {
        SyntheticScenario s;
        s.kind = ScenarioKind::loop;
        s.loop_period = period;
        s.loop_offset = offset;
        s.length = length;
        return gen_loop(s);
      },
      "s"_a, "length"_a, "offset"_a = 0);
  m.def(
      "correlated_layout",
      [](std::uint32_t m_, std::uint32_t k) {
        const auto l = correlated_layout(m_);
        return py::dict("pc_a"_a = l.pc_a, "pc_b"_a = l.pc_b, "noise_pcs"_a = l.noise_pcs,
                        "a_history_index"_a = l.a_history_index(k));
      },
      "m"_a, "k"_a = 1);

  py::class_<SparseModel>(m, "SparseModel")
      .def_readonly("pc", &SparseModel::pc)
      .def_readonly("bias", &SparseModel::bias)
      .def_readonly("lambda_", &SparseModel::lambda)
      .def_readonly("accuracy", &SparseModel::accuracy)
      .def_readonly("sufficient", &SparseModel::sufficient)
      .def_property_readonly("nnz", &SparseModel::nnz)
      .def_property_readonly("weights", [](const SparseModel& s) {
        std::vector<std::pair<std::uint32_t, double>> v;
        for (const auto& c : s.weights) v.emplace_back(c.index, c.weight);
        return v;
      });

  m.def(
      "train",
      [](const Trace& t, std::uint64_t pc, std::uint32_t gh, std::uint32_t lh, bool deduplicate) {
        const SolverConfig cfg;
        const auto data = collect_dataset(t, {gh, lh}, pc);
        if (data.size() == 0) throw std::invalid_argument("branch has no post-warmup samples");
        const SparseModel lasso = lambda_search(data, cfg);
        return deduplicate ? dedup(data, lasso, cfg) : lasso;
      },
      "trace"_a, "pc"_a, "gh"_a = 512, "lh"_a = 512, "dedup"_a = true,
      "Lambda search (and optional ElasticNet deduplication) for one branch.");
  m.def(
      "fit",
      [](const std::vector<std::vector<int>>& x, const std::vector<bool>& y, double lambda, double alpha) {
        if (x.size() != y.size()) throw std::invalid_argument("x and y differ in length");
        TrainingDataset d(0, x.empty() ? 0 : x[0].size());
        std::vector<std::int8_t> row;
        for (std::size_t i = 0; i < x.size(); ++i) {
          row.assign(x[i].begin(), x[i].end());
          d.append(row, y[i]);
        }
        return fit(d, lambda, alpha, SolverConfig{});
      },
      "x"_a, "y"_a, "lambda_"_a, "alpha"_a = 1.0, "Fit on a +-1 matrix at a fixed lambda.");
  m.def(
      "quantize_value", [](double v, const std::string& q) { return quantize_value(v, *quant_spec_for_width(q_width(q))); },
      "value"_a, "q"_a = "3.4");
  m.def(
      "storage_bits",
      [](std::uint32_t n, std::uint32_t nnz, std::uint32_t q, std::uint32_t lh, std::uint32_t gh, std::uint32_t p) {
        return storage_bits({lh, gh, n, nnz, q, p});
      },
      "n"_a, "nnz"_a, "q"_a = 8, "lh"_a = 512, "gh"_a = 512, "p"_a = 64);

  m.def(
      "simulate",
      [](const Trace& t, const std::string& baseline, std::uint32_t gh, std::uint32_t lh,
         const std::optional<std::filesystem::path>& hints) {
        SimConfig c{baseline_config(baseline), {gh, lh}, std::nullopt, std::nullopt};
        const SimReport base = run(t, c);
        if (!hints) return phase_report_json(base, nullptr, nullptr);
        c.hints = read_hintset(*hints);
        const SimReport coupled = run(t, c);
        return phase_report_json(base, &coupled, &*c.hints);
      },
      "trace"_a, "baseline"_a = "tage-lite", "gh"_a = 512, "lh"_a = 512, "hints"_a = py::none(),
      "Baseline-only and (with a hint file) coupled run; returns the phase report as JSON text.");
  m.def(
      "run_phase",
      [](const Trace& t, double budget_kb, const std::string& pol, const std::string& q, std::uint32_t gh,
         std::uint32_t lh, const std::string& baseline, std::uint64_t min_occurrences,
         const std::optional<std::filesystem::path>& hint_dir) {
        PipelineConfig c;
        c.budget_bits = static_cast<std::uint64_t>(budget_kb * 1024 * 8);
        c.policy = policy(pol);
        c.q = q_width(q);
        c.history = {gh, lh};
        c.baseline = baseline_config(baseline);
        c.screen.min_occurrences = min_occurrences;
        c.hint_dir = hint_dir;
        const PhaseResult r = run_phase(t, c);
        return phase_report_json(r.baseline, &r.coupled, &r.selection.hint_set);
      },
      "trace"_a, "budget_kb"_a = 2.0, "policy"_a = "relative", "q"_a = "3.4", "gh"_a = 512, "lh"_a = 512,
      "baseline"_a = "tage-lite", "min_occurrences"_a = 10000, "hint_dir"_a = py::none(),
      "Profile, train, compress, select and simulate one phase; returns the phase report as JSON text.");
  m.def(
      "run_online",
      [](const Trace& t, std::vector<std::uint64_t> targets, std::uint32_t gh, std::uint32_t lh) {
        py::dict out;
        for (const auto& [pc, r] : run_online(t, {gh, lh}, targets, OnlineConfig{}))
          out[py::int_(pc)] = py::dict("occurrences"_a = r.occurrences, "mispredictions"_a = r.mispredictions,
                                       "nnz_avg"_a = r.nnz_avg, "final_lambda"_a = r.final_lambda);
        return out;
      },
      "trace"_a, "targets"_a = std::vector<std::uint64_t>{}, "gh"_a = 512, "lh"_a = 512);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::dispatch(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      "args"_a, "Runs one sbp command in-process; returns (exit code, stdout, stderr).");
}
