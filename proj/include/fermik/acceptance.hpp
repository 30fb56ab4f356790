#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fermik/util.hpp"

namespace fermik {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  json details;
};

/// Run acceptance criterion `id` (1..9); seed feeds the randomized checks.
CriterionResult run_criterion(int id, std::uint64_t seed);

/// Run a set of criteria (all when empty); prints one pass/fail line per
/// criterion to stdout when verbose.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids, std::uint64_t seed,
                                            bool verbose);

}  // namespace fermik
