#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "seqbench/rng.hpp"
#include "seqbench/tensor.hpp"

namespace seqbench {

constexpr std::size_t kNumClasses = 8;

struct PoolingParams {
  std::vector<double> query;  // D
};

struct ClassifierParams {
  std::vector<double> ln_gain, ln_bias;  // D
  Matrix w1;                             // D x D
  std::vector<double> b1;                // D
  Matrix w2;                             // 8 x D
  std::array<double, kNumClasses> b2{};
};

PoolingParams make_pooling_params(Rng& rng, std::size_t model_dim);
ClassifierParams make_classifier_params(Rng& rng, std::size_t model_dim);

// Softmax-weighted average of the rows of h against the query, scores scaled
// by 1/sqrt(D).
std::vector<double> attention_pool(const SequenceTensor& h, const PoolingParams& params);

// LayerNorm -> Linear -> GELU -> Linear (dropout is identity at inference).
std::array<double, kNumClasses> classifier_forward(const std::vector<double>& c,
                                                   const ClassifierParams& params);

// 1-based argmax, ties to the lowest index.
int predict(const std::array<double, kNumClasses>& logits);

}  // namespace seqbench
