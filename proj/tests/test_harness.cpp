#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "heatlab/error.hpp"
#include "heatlab/harness.hpp"
#include "heatlab/parallel.hpp"

using namespace heatlab;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "schema": "heatlab.scenario/1",
  "name": "small",
  "model": {"kind": "exact_sphere", "n": 2, "M": 64, "T0": 1.0},
  "flow": {"t0": -2.0, "t1": 0.0, "snapshots": 3},
  "kernel": {"direction": "conjugate", "solver": "oracle", "source_time": 0.0,
             "tau": {"from": 0.2, "to": 2.0, "count": 8, "spacing": "log"}},
  "checks": [
    {"type": "backward_mass"},
    {"type": "on_diag_upper"},
    {"type": "lambda0", "t": 0.5, "expect": 2.0, "tol": 1e-4}
  ],
  "seed": 9
})";

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "heatlab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int rc = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("heatlab_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("scenario parsing fills defaults and grids") {
  const auto sc = parse_scenario(kSmall);
  CHECK(sc.name == "small");
  CHECK(sc.model.M == 64);
  REQUIRE(sc.kernel.has_value());
  CHECK(sc.kernel->tau.size() == 8);
  CHECK(sc.kernel->tau.front() == doctest::Approx(0.2));
  CHECK(sc.kernel->tau.back() == doctest::Approx(2.0));
  CHECK(sc.checks.size() == 3);
  CHECK(sc.seed == 9);
}

TEST_CASE("schema errors carry positions") {
  const std::string text = "{\n  \"schema\": \"heatlab.scenario/1\",\n  \"name\": \"x\",\n"
                           "  \"model\": {\"kind\": \"exact_sphere\", \"M\": \"big\"}\n}\n";
  try {
    parse_scenario(text);
    FAIL("no error");
  } catch (const ScenarioError& e) {
    CHECK(e.line() == 4);
    CHECK(e.column() > 30);
  }
  CHECK_THROWS_AS(parse_scenario("{\"schema\": \"other/2\", \"name\": \"x\"}"), ScenarioError);
  CHECK_THROWS_AS(parse_scenario("{\"schema\": \"heatlab.scenario/1\""), ScenarioError);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  const auto good = write_file(dir / "small.json", kSmall);
  const auto bad = write_file(dir / "bad.json", "{\"schema\": \"heatlab.scenario/1\", \"name\": 3}");
  std::string out, err;
  CHECK(cli({"run", bad, "--out", (dir / "o1").string()}, &out, &err) == 2);
  CHECK(err.find("name") != std::string::npos);
  CHECK(cli({"run", (dir / "missing.json").string()}) == 2);
  CHECK(cli({"frobnicate"}) == 2);
  CHECK(cli({"report", "--format", "xml", (dir / "o1").string()}) == 2);

  CHECK(cli({"run", good, "--out", (dir / "o2").string()}, &out) == 0);
  CHECK(out.find("PASS backward_mass") != std::string::npos);
  CHECK(fs::exists(dir / "o2" / "reports" / "lambda0.json"));
  CHECK(fs::exists(dir / "o2" / "kernel.csv"));

  CHECK(cli({"report", (dir / "o2").string()}, &out) == 0);
  CHECK(out.rfind("name,pass,control,margin,fitted_constants\n", 0) == 0);
  CHECK(cli({"report", (dir / "o2").string(), "--format", "json"}, &out) == 0);
  CHECK(out.front() == '[');
  CHECK(cli({"report", (dir / "empty").string()}) == 1);
  fs::remove_all(dir);
}

TEST_CASE("failing checks give exit code 1") {
  const auto dir = scratch("fail");
  std::string text = kSmall;
  text.replace(text.find("\"expect\": 2.0"), 13, "\"expect\": 3.0");
  const auto path = write_file(dir / "s.json", text);
  std::string out;
  CHECK(cli({"check", path, "--out", (dir / "o").string()}, &out) == 1);
  CHECK(out.find("FAIL lambda0") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("stages stop where asked") {
  const auto dir = scratch("stage");
  const auto path = write_file(dir / "s.json", kSmall);
  CHECK(cli({"flow", path, "--out", (dir / "o").string()}) == 0);
  CHECK(fs::exists(dir / "o" / "trajectory" / "trajectory.json"));
  CHECK_FALSE(fs::exists(dir / "o" / "kernel.csv"));
  fs::remove_all(dir);
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
  const auto dir = scratch("det");
  const auto sc = parse_scenario(kSmall);
  std::ostringstream log;
  setenv("HEATLAB_THREADS", "1", 1);
  CHECK(thread_limit() == 1);
  run_scenario(sc, Stage::run, (dir / "a").string(), log);
  setenv("HEATLAB_THREADS", "3", 1);
  run_scenario(sc, Stage::run, (dir / "b").string(), log);
  unsetenv("HEATLAB_THREADS");
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    CHECK(slurp(e.path()) == slurp(dir / "b" / rel));
  }
  fs::remove_all(dir);
}

TEST_CASE("parallel_for rethrows the first failing index") {
  std::vector<int> hit(50, 0);
  parallel_for(50, [&](std::size_t i) { hit[i] = 1; });
  for (int h : hit) CHECK(h == 1);
  try {
    parallel_for(20, [](std::size_t i) {
      if (i == 7 || i == 13) throw Error(ErrorKind::invalid_parameter, std::to_string(i));
    });
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

}  // TEST_SUITE
