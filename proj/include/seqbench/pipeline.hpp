#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "seqbench/mechanisms.hpp"
#include "seqbench/pooling.hpp"
#include "seqbench/rng.hpp"
#include "seqbench/tensor.hpp"

namespace seqbench {

struct PipelineConfig {
  std::size_t speech_len = 200;
  std::size_t text_len = 30;  // may be 0 for speech-only runs
  std::size_t model_dim = 256;
  MechanismKind mechanism = MechanismKind::SA;
  MechanismConfig mechanism_config{};
  std::uint64_t seed = 42;
  ExecutionMode mode = ExecutionMode::Parallel;

  void validate() const;
};

struct ModelParams {
  MechanismParams mechanism;
  PoolingParams pooling;
  ClassifierParams classifier;
};

ModelParams make_model_params(const PipelineConfig& config);

// Gaussian stand-in features for the frozen encoders.
SequenceTensor synth_features(Rng& rng, std::size_t len, std::size_t model_dim,
                              double mean = 0.0, double std_dev = 1.0);

// Rows of s followed by rows of e, order preserved. e may be empty.
SequenceTensor concat_modalities(const SequenceTensor& s, const SequenceTensor& e);

// Full chain: concat -> seq2seq -> attention pooling -> classifier.
std::pair<std::array<double, kNumClasses>, int> model_forward(const SequenceTensor& s,
                                                              const SequenceTensor& e,
                                                              const ModelParams& params,
                                                              ExecutionMode mode);

// Crop a seeded-random contiguous window when too long, repeat rows
// cyclically when too short. Never fabricates values.
SequenceTensor length_adjust(const SequenceTensor& seq, std::size_t target_len, Rng& rng);

// Plain-text key=value configuration shared by the CLI.
// Recognized keys: mechanism, mode, dim, heads, slots, seed, speech_len,
// text_len, lengths, repeats, warmup, out. '#' starts a comment.
using KeyValueConfig = std::map<std::string, std::string>;
KeyValueConfig parse_key_value_file(const std::string& path);
KeyValueConfig parse_key_value_text(const std::string& text);
PipelineConfig pipeline_config_from(const KeyValueConfig& kv);

}  // namespace seqbench
