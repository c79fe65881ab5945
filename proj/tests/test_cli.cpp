#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sbp/cli.hpp"
#include "sbp/hints.hpp"
#include "sbp/trace.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result sbp_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = sbp::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("sbp_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST_CASE("gen writes a valid trace") {
  const auto d = fresh_dir("gen");
  const auto r = sbp_run({"gen", "--kind", "loop", "--s", "5", "--len", "1000", "--seed", "1", "-o",
                          (d / "loop.sbpt").string()});
  CHECK(r.code == 0);
  const auto t = sbp::read_trace(d / "loop.sbpt");
  CHECK(t.records.size() == 1000);
  CHECK(t.phase_id == "loop");

  CHECK(sbp_run({"--seed", "3", "gen", "--kind", "utilization", "--len", "5000", "--offload-ratio", "0.25", "-o",
                 (d / "u.sbpt").string()})
            .code == 0);
  CHECK(fs::exists(d / "u.sbpt.offload"));
}

TEST_CASE("usage errors exit 2") {
  const auto d = fresh_dir("usage");
  auto r = sbp_run({"gen", "--kind", "loop", "-o", (d / "x.sbpt").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("--len") != std::string::npos);
  CHECK(sbp_run({}).code == 2);
  CHECK(sbp_run({"frobnicate"}).code == 2);
  CHECK(sbp_run({"gen", "--kind", "loop", "--len", "10", "--bogus", "-o", "x"}).code == 2);
  CHECK(sbp_run({"gen", "--kind", "spiral", "--len", "10", "-o", (d / "x.sbpt").string()}).code == 2);
  CHECK(sbp_run({"simulate", "--trace", (d / "missing.sbpt").string(), "-o", "r.json"}).code == 2);
}

TEST_CASE("runtime errors exit 1") {
  const auto d = fresh_dir("runtime");
  std::ofstream(d / "bad.sbpt") << "not a trace";
  const auto r = sbp_run({"simulate", "--trace", (d / "bad.sbpt").string(), "-o", (d / "r.json").string()});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("hint and history mismatch is a config error") {
  const auto d = fresh_dir("mismatch");
  REQUIRE(sbp_run({"gen", "--kind", "correlated", "--m", "2", "--len", "2000", "-o", (d / "c.sbpt").string()}).code ==
          0);
  sbp::HintSet hs;
  hs.config = {8, 8, 1, 1, 8, 64};
  hs.hints.push_back({0x400000, 0.0, {{1, 1.0}}});
  sbp::write_hintset(hs, d / "h.sbph");
  const auto r = sbp_run({"simulate", "--trace", (d / "c.sbpt").string(), "--hints", (d / "h.sbph").string(), "--gh",
                          "16", "--lh", "16", "-o", (d / "r.json").string()});
  CHECK(r.code == 2);
  CHECK(sbp_run({"simulate", "--trace", (d / "c.sbpt").string(), "--hints", (d / "h.sbph").string(), "--gh", "8",
                 "--lh", "8", "-o", (d / "r.json").string()})
            .code == 0);
  CHECK(fs::exists(d / "r.json.txt"));
}

TEST_CASE("every command documents its flags and the file formats") {
  const std::vector<std::pair<std::string, std::vector<std::string>>> cmds{
      {"gen", {"--kind", "--len", "--m", "--k", "--s", "--offload-ratio"}},
      {"train", {"--trace", "--gh", "--lh", "--lambda-min", "--pcs", "--no-dedup"}},
      {"select", {"--models", "--policy", "--budget-kb", "--q", "--p", "--baseline"}},
      {"simulate", {"--trace", "--hints", "--baseline", "--tage-tables"}},
      {"pipeline", {"--traces", "--budget-kb", "--policy", "--q", "--out", "--min-occurrences"}},
      {"online", {"--targets", "--eta", "--lambda-init", "--interval", "--nnz-cap"}},
      {"report", {"--scurve", "--csv"}}};
  for (const auto& [cmd, flags] : cmds) {
    CAPTURE(cmd);
    const auto r = sbp_run({cmd, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("SBPT") != std::string::npos);
    CHECK(r.out.find("SBPH") != std::string::npos);
    for (const auto& f : flags) {
      CAPTURE(f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
  const auto top = sbp_run({"--help"});
  CHECK(top.code == 0);
  CHECK(top.out.find("--seed") != std::string::npos);
  CHECK(top.out.find("--jobs") != std::string::npos);
}

TEST_CASE("train, select, simulate, online and report end to end") {
  const auto d = fresh_dir("e2e");
  const auto trace = (d / "corr.sbpt").string();
  REQUIRE(sbp_run({"gen", "--kind", "correlated", "--m", "2", "--len", "60000", "--seed", "4", "-o", trace}).code == 0);
  const std::vector<std::string> hist{"--gh", "16", "--lh", "16"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), hist.begin(), hist.end());
    return sbp_run(a);
  };
  REQUIRE(with({"train", "--trace", trace, "-o", (d / "models.txt").string()}).code == 0);
  REQUIRE(with({"select", "--trace", trace, "--models", (d / "models.txt").string(), "--baseline", "gshare",
                "--gshare-log-entries", "6", "--gshare-history", "6", "-o", (d / "h.sbph").string()})
              .code == 0);
  const auto hs = sbp::read_hintset(d / "h.sbph");
  CHECK_FALSE(hs.hints.empty());
  REQUIRE(with({"simulate", "--trace", trace, "--hints", (d / "h.sbph").string(), "--baseline", "gshare",
                "--gshare-log-entries", "6", "--gshare-history", "6", "-o", (d / "r.json").string()})
              .code == 0);
  const auto j = nlohmann::json::parse(slurp(d / "r.json"));
  CHECK(j.at("coupled").at("mpki").get<double>() < j.at("baseline").at("mpki").get<double>());

  REQUIRE(with({"online", "--trace", trace, "--targets", "all", "-o", (d / "o.json").string()}).code == 0);
  const auto o = nlohmann::json::parse(slurp(d / "o.json"));
  CHECK(o.at("per_branch").size() == 4);

  const auto rep = sbp_run({"report", "--scurve", (d / "r.json").string(), "--csv", (d / "s.csv").string()});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("corr") != std::string::npos);
  CHECK(fs::exists(d / "s.csv"));
}

TEST_CASE("pipeline over a directory is reproducible") {
  const auto d = fresh_dir("pipe");
  fs::create_directories(d / "traces");
  REQUIRE(sbp_run({"gen", "--kind", "correlated", "--m", "2", "--k", "1", "--len", "40000", "--seed", "1", "-o",
                   (d / "traces" / "p1.sbpt").string()})
              .code == 0);
  REQUIRE(sbp_run({"gen", "--kind", "correlated", "--m", "2", "--k", "2", "--len", "40000", "--seed", "2", "-o",
                   (d / "traces" / "p2.sbpt").string()})
              .code == 0);
  std::string first;
  for (int run = 0; run < 2; ++run) {
    const auto out = d / ("out" + std::to_string(run));
    const auto r = sbp_run({"pipeline", "--traces", (d / "traces").string(), "--budget-kb", "2", "--policy",
                            "relative", "--q", "3.4", "--gh", "16", "--lh", "16", "--jobs", "2", "--out",
                            out.string()});
    REQUIRE(r.code == 0);
    std::string all;
    for (const char* f : {"p1.sbph", "p2.sbph", "p1.json", "p2.json", "p1.txt", "p2.txt", "scurve.txt", "scurve.csv"}) {
      CAPTURE(f);
      REQUIRE(fs::exists(out / f));
      all += slurp(out / f);
    }
    if (run == 0)
      first = all;
    else
      CHECK(all == first);
  }
  CHECK(sbp_run({"pipeline", "--traces", (d / "out0").string(), "--out", (d / "x").string()}).code == 2);
}
