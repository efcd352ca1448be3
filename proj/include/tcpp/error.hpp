#pragma once

#include <cstddef>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tcpp {

enum class Errc {
  malformed_program,
  numerical_breakdown,
  invalid_tree,
  foreign_node,
  invalid_stopping_time,
  empty_list,
  mass_mismatch,
  invalid_model,
  enumeration_overflow,
  precondition_violation,
  inconsistent_verdicts,
  no_martingale_measure,
  empty_good_deal_set,
  unbounded_node_lp,
  parse_error,
  invariant_violation,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::malformed_program: return "malformed-program";
    case Errc::numerical_breakdown: return "numerical-breakdown";
    case Errc::invalid_tree: return "invalid-tree";
    case Errc::foreign_node: return "foreign-node";
    case Errc::invalid_stopping_time: return "invalid-stopping-time";
    case Errc::empty_list: return "empty-list";
    case Errc::mass_mismatch: return "mass-mismatch";
    case Errc::invalid_model: return "invalid-model";
    case Errc::enumeration_overflow: return "enumeration-overflow";
    case Errc::precondition_violation: return "precondition-violation";
    case Errc::inconsistent_verdicts: return "inconsistent-verdicts";
    case Errc::no_martingale_measure: return "no-martingale-measure";
    case Errc::empty_good_deal_set: return "empty-good-deal-set";
    case Errc::unbounded_node_lp: return "unbounded-node-lp";
    case Errc::parse_error: return "parse-error";
    case Errc::invariant_violation: return "invariant-violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Tolerances and caps shared by every solver and check in the library.
struct NumericSettings {
  double feasibility_tol = 1e-9;   ///< constraint satisfaction
  double pivot_tol = 1e-12;        ///< smallest admissible simplex pivot
  double optimality_tol = 1e-11;   ///< reduced-cost threshold
  double check_tol = 1e-9;         ///< identity checks (time consistency, sandwich, ...)
  double zero_penalty_tol = 1e-12; ///< a penalty at or below this counts as zero
  double positivity_floor = 1e-12; ///< max-min mass below this means "not equivalent"
  std::size_t max_enumeration = 1'000'000;
  std::size_t max_lp_iterations = 200'000;
  std::size_t max_cutting_plane_rounds = 5'000;
  double cut_violation_tol = 1e-8;

  /// Defaults, with `TCPP_MAX_ENUM` overriding the enumeration cap when set.
  static NumericSettings from_env() {
    NumericSettings s;
    if (const char* env = std::getenv("TCPP_MAX_ENUM"); env != nullptr && *env != '\0') {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end != nullptr && *end == '\0' && v > 0) s.max_enumeration = static_cast<std::size_t>(v);
    }
    return s;
  }
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// One failed identity or inequality found by a check operation.
struct Violation {
  std::string check;     ///< which property failed
  std::string location;  ///< node / stopping time / member description
  double defect = 0.0;   ///< magnitude of the failure
  std::string detail;    ///< witness data, human readable
};

struct CheckReport {
  std::vector<Violation> violations;
  std::size_t cases = 0;  ///< number of individual comparisons performed

  [[nodiscard]] bool passed() const { return violations.empty(); }

  void add(std::string check, std::string location, double defect, std::string detail = {}) {
    violations.push_back({std::move(check), std::move(location), defect, std::move(detail)});
  }

  void merge(const CheckReport& other) {
    violations.insert(violations.end(), other.violations.begin(), other.violations.end());
    cases += other.cases;
  }
};

}  // namespace tcpp
