#include "heatlab/report.hpp"

#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "heatlab/error.hpp"
#include "numerics.hpp"

namespace heatlab {

using ojson = nlohmann::ordered_json;

void CheckReport::set_constant(const std::string& key, double value) {
  for (auto& kv : fitted_constants)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  fitted_constants.emplace_back(key, value);
}

double CheckReport::constant(const std::string& key) const {
  for (const auto& kv : fitted_constants)
    if (kv.first == key) return kv.second;
  throw Error(ErrorKind::invalid_parameter, "report '" + name + "' has no constant '" + key + "'");
}

bool CheckReport::has_constant(const std::string& key) const {
  for (const auto& kv : fitted_constants)
    if (kv.first == key) return true;
  return false;
}

void CheckReport::add_note(const std::string& note) {
  if (note.empty()) return;
  if (!notes.empty()) notes += "; ";
  notes += note;
}

std::string report_to_json(const CheckReport& r) {
  ojson j;
  j["name"] = r.name;
  j["samples"] = r.samples;
  j["ratio_min"] = r.ratio_min;
  j["ratio_max"] = r.ratio_max;
  ojson fc = ojson::object();
  for (const auto& [k, v] : r.fitted_constants) fc[k] = v;
  j["fitted_constants"] = fc;
  j["pass"] = r.pass;
  j["margin"] = r.margin;
  j["notes"] = r.notes;
  j["control"] = r.control;
  return j.dump(2) + "\n";
}

namespace {

double number_or_nan(const ojson& v) {
  return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

CheckReport report_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  CheckReport r;
  try {
    r.name = j.at("name").get<std::string>();
    r.samples = j.at("samples").get<std::size_t>();
    r.ratio_min = number_or_nan(j.at("ratio_min"));
    r.ratio_max = number_or_nan(j.at("ratio_max"));
    for (const auto& [k, v] : j.at("fitted_constants").items()) r.fitted_constants.emplace_back(k, number_or_nan(v));
    r.pass = j.at("pass").get<bool>();
    r.margin = number_or_nan(j.at("margin"));
    r.notes = j.at("notes").get<std::string>();
    r.control = j.value("control", false);
  } catch (const ojson::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  return r;
}

void write_report_json(const std::string& path, const CheckReport& r) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io_error, "cannot write " + path);
  os << report_to_json(r);
}

CheckReport read_report_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io_error, "cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return report_from_json(ss.str());
}

void write_report_rows_csv(std::ostream& os, const CheckReport& r) {
  for (std::size_t c = 0; c < r.columns.size(); ++c) os << (c ? "," : "") << r.columns[c];
  os << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << detail::format_double(row[c]);
    os << '\n';
  }
}

}  // namespace heatlab
