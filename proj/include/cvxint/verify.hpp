#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

namespace cvxint {

struct VerifyRow {
  std::string module, name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

struct VerifyReport {
  std::string level;
  std::uint64_t seed = 1;
  std::vector<VerifyRow> rows;
  bool passed() const;
  std::string table() const;
  nlohmann::json to_json() const;
};

// Property suites of every module. "quick" keeps sample counts small;
// "full" runs the acceptance-sized checks (10^6 envelope samples, 10^3
// oracle points per side, h = 1/128 refinements).
VerifyReport verify_suite(const std::string& level, std::uint64_t seed = 1);

}  // namespace cvxint
