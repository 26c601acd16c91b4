#pragma once

// Scenario files (JSON, schema "heatlab.scenario/1") and the stages behind
// the heatlab command line.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "heatlab/error.hpp"
#include "heatlab/report.hpp"
#include "heatlab/soliton.hpp"

namespace heatlab {

inline constexpr const char* kScenarioSchema = "heatlab.scenario/1";

// Parse or schema failure with a 1-based source position (0 when unknown).
class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& what, std::size_t line, std::size_t column)
      : Error(ErrorKind::parse_error, what + (line ? " at line " + std::to_string(line) + ", column " +
                                                         std::to_string(column)
                                                   : std::string())),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct ModelSpec {
  std::string kind = "exact_sphere";  // exact_sphere | warped_sphere | flat_torus
  int n = 2;
  int M = 256;
  double r0 = 1.0;
  double T0 = 1.0;
  std::vector<double> sides;
  // warped_sphere: b = r0 sin(pi x) (1 + amplitude sin^2(pi x) cos(2 pi mode x)).
  double amplitude = 0.0;
  int mode = 1;
};

struct FlowSpec {
  double t0 = 0.0;
  double t1 = 0.0;
  double dt = 0.0;
  int snapshots = 2;
  std::vector<double> snapshot_times;
};

struct KernelSpec {
  std::string direction = "conjugate";
  std::string solver = "fd";  // fd | oracle
  std::vector<double> source;
  std::optional<double> source_time;
  std::vector<double> tau;
  double eps = 0.0;
  double dt_max = 0.05;
  double rel_dt = 0.01;
};

struct CheckSpec {
  std::string type;
  std::string name;
  std::map<std::string, double> num;
  std::map<std::string, std::vector<double>> vec;

  double get(const std::string& key, double fallback) const;
  std::optional<double> maybe(const std::string& key) const;
};

struct LimitSpec {
  std::vector<double> tau_list;
  double s_ref = 1.0;
  double t_ref = 0.0;
};

struct Scenario {
  std::string name;
  ModelSpec model;
  FlowSpec flow;
  std::optional<KernelSpec> kernel;
  std::vector<CheckSpec> checks;
  std::optional<LimitSpec> limit;
  std::uint64_t seed = 1;
  std::string output;
};

// Throws ScenarioError on malformed JSON or schema violations.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

enum class Stage { flow, kernel, check, limit, run };

struct RunResult {
  // 0: every non-control check passed; 1: a check failed or a stage errored.
  int exit_code = 0;
  std::string out_dir;
  std::vector<CheckReport> reports;
  std::vector<std::string> report_paths;
  std::optional<LimitReport> limit;
  std::vector<std::string> errors;
};

// Runs the stages up to `stage` (limit runs only the limit experiment) and
// writes artifacts below out_dir. Progress lines go to `log`.
RunResult run_scenario(const Scenario& sc, Stage stage, const std::string& out_dir, std::ostream& log);

// Consolidated table of out_dir/reports/*.json, failures first. format is
// "csv" or "json". Returns 1 when no reports are found.
int write_report_table(const std::string& out_dir, const std::string& format, std::ostream& out);

// Full command line; returns the process exit code.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace heatlab
