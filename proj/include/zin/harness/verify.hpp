#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace zin::harness {

struct VerifyCheck {
  std::string block;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;

  bool all_pass() const;
  std::vector<std::string> failures() const;
  /// One "name: PASS|FAIL (detail)" line per check, grouped by block.
  std::string render() const;
  nlohmann::json to_json() const;
};

/// Impossibility, counterpart, identifiability, conditions, necessity and the
/// linear case, each with its witness.
VerifyReport run_verify();

}  // namespace zin::harness
