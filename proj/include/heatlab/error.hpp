#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace heatlab {

enum class ErrorKind {
  invalid_parameter,
  invalid_state,
  out_of_domain,
  degenerate_metric,
  step_rejected,
  singularity_detected,
  no_admissible_scale,
  invalid_interval,
  series_not_convergent,
  interpolation_error,
  solver_instability,
  insufficient_data,
  invalid_window,
  degenerate_sample,
  positivity_violation,
  invalid_density,
  convergence_failure,
  unsupported_dimension,
  parse_error,
  io_error,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the library surfaces as an Error carrying its kind, so
// callers (and the CLI exit-code mapping) can dispatch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace heatlab
