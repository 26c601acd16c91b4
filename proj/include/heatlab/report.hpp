#pragma once

// Outcome of one bound, inequality or limit verification.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace heatlab {

struct CheckReport {
  std::string name;
  std::size_t samples = 0;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  // Insertion order is kept so encodings are stable.
  std::vector<std::pair<std::string, double>> fitted_constants;
  bool pass = false;
  double margin = 0.0;
  std::string notes;
  // Control runs are informational and never fail a scenario.
  bool control = false;

  // Optional per-sample table for plotting.
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void set_constant(const std::string& key, double value);
  double constant(const std::string& key) const;
  bool has_constant(const std::string& key) const;
  void add_note(const std::string& note);
};

std::string report_to_json(const CheckReport& r);
CheckReport report_from_json(const std::string& text);
void write_report_json(const std::string& path, const CheckReport& r);
CheckReport read_report_json(const std::string& path);
// Per-sample rows, header from `columns`.
void write_report_rows_csv(std::ostream& os, const CheckReport& r);

}  // namespace heatlab
