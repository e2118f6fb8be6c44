#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seqbench/mechanisms.hpp"

namespace seqbench {

struct PropertyResult {
  std::string name;
  std::optional<MechanismKind> scope;  // empty = cross-cutting
  bool pass = false;
  std::string detail;  // measured values
};

// Runs the library's invariant suite. With a filter, only properties scoped
// to that mechanism run.
std::vector<PropertyResult> run_properties(std::optional<MechanismKind> filter = std::nullopt);

// Parallel vs recurrent max relative l-inf disagreement on a seeded input.
// Exposed separately so fault-injection tests can pass mismatched params.
double dual_form_max_rel_err(const MechanismParams& parallel_params,
                             const MechanismParams& recurrent_params, std::size_t seq_len,
                             std::uint64_t input_seed);

}  // namespace seqbench
