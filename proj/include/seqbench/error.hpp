#pragma once

#include <stdexcept>
#include <string>

namespace seqbench {

// Violated precondition or malformed argument on a public interface.
struct ContractViolation : std::invalid_argument {
  explicit ContractViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

// Requested an execution mode a mechanism does not support.
struct UnsupportedMode : std::logic_error {
  explicit UnsupportedMode(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace seqbench
