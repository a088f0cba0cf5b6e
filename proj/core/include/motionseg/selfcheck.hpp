#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace motionseg {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Gradient checks for every differentiable op (tolerance 1e-6), a
// finite-difference sweep over every parameter of a tiny end-to-end model
// (tolerance 1e-4), and the structural invariants of the attention blocks.
// With inject_fault one op runs a deliberately corrupted backward pass; the
// harness must flag it, which makes the whole suite fail on purpose.
std::vector<CheckResult> run_self_checks(bool inject_fault);

// One line per result plus a summary; returns the number of failures.
int report_self_checks(const std::vector<CheckResult>& results, std::ostream& os);

}  // namespace motionseg
