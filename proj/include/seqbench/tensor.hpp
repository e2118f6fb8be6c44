#pragma once

#include <cstddef>
#include <vector>

#include "seqbench/error.hpp"

namespace seqbench {

// Row-major L x D matrix of 64-bit floats; the universal currency between
// modules. Also used for parameter matrices.
struct SequenceTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  SequenceTensor() = default;
  SequenceTensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool all_finite() const;
  // Throws ContractViolation if any entry is NaN/Inf.
  void require_finite(const char* what) const;
};

using Matrix = SequenceTensor;

}  // namespace seqbench
