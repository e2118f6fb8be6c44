#include "seqbench/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "seqbench/core_math.hpp"

namespace seqbench {

void PipelineConfig::validate() const {
  if (speech_len < 1) throw ContractViolation("PipelineConfig: speech_len must be >= 1");
  if (model_dim != mechanism_config.model_dim)
    throw ContractViolation("PipelineConfig: model_dim disagrees with mechanism config");
  mechanism_config.validate();
}

ModelParams make_model_params(const PipelineConfig& config) {
  config.validate();
  Rng root(config.seed);
  MechanismConfig mc = config.mechanism_config;
  mc.seed = root.child(1).seed();
  Rng pool_rng = root.child(2);
  Rng cls_rng = root.child(3);
  return ModelParams{make_params(config.mechanism, mc),
                     make_pooling_params(pool_rng, config.model_dim),
                     make_classifier_params(cls_rng, config.model_dim)};
}

SequenceTensor synth_features(Rng& rng, std::size_t len, std::size_t model_dim, double mean,
                              double std_dev) {
  if (len < 1) throw ContractViolation("synth_features: len must be >= 1");
  SequenceTensor t(len, model_dim);
  for (double& v : t.data) v = mean + std_dev * rng.gaussian();
  return t;
}

SequenceTensor concat_modalities(const SequenceTensor& s, const SequenceTensor& e) {
  if (s.rows < 1) throw ContractViolation("concat_modalities: speech sequence is empty");
  if (e.rows > 0 && e.cols != s.cols)
    throw ContractViolation("concat_modalities: width mismatch");
  SequenceTensor u(s.rows + e.rows, s.cols);
  std::copy(s.data.begin(), s.data.end(), u.data.begin());
  std::copy(e.data.begin(), e.data.end(), u.data.begin() + s.data.size());
  return u;
}

std::pair<std::array<double, kNumClasses>, int> model_forward(const SequenceTensor& s,
                                                              const SequenceTensor& e,
                                                              const ModelParams& params,
                                                              ExecutionMode mode) {
  SequenceTensor u = concat_modalities(s, e);
  SequenceTensor h = forward(params.mechanism, u, mode);
  std::vector<double> c = attention_pool(h, params.pooling);
  std::array<double, kNumClasses> logits = classifier_forward(c, params.classifier);
  return {logits, predict(logits)};
}

SequenceTensor length_adjust(const SequenceTensor& seq, std::size_t target_len, Rng& rng) {
  if (target_len < 1) throw ContractViolation("length_adjust: target_len must be >= 1");
  if (seq.rows < 1) throw ContractViolation("length_adjust: input sequence is empty");
  if (seq.rows == target_len) return seq;
  SequenceTensor out(target_len, seq.cols);
  if (seq.rows > target_len) {
    const std::size_t max_start = seq.rows - target_len;
    const std::size_t start = static_cast<std::size_t>(rng.next_u64() % (max_start + 1));
    std::copy(seq.row(start), seq.row(start) + target_len * seq.cols, out.data.begin());
  } else {
    for (std::size_t i = 0; i < target_len; ++i) {
      const double* src = seq.row(i % seq.rows);
      std::copy(src, src + seq.cols, out.row(i));
    }
  }
  return out;
}

KeyValueConfig parse_key_value_text(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    s.erase(0, s.find_first_not_of(ws));
    const auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractViolation("config line " + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValueConfig parse_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_value_text(buf.str());
}

PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
  PipelineConfig c;
  auto get_u = [&](const char* key, std::size_t& out) {
    auto it = kv.find(key);
    if (it != kv.end()) out = static_cast<std::size_t>(std::stoull(it->second));
  };
  get_u("dim", c.model_dim);
  get_u("heads", c.mechanism_config.num_heads);
  get_u("slots", c.mechanism_config.slots);
  get_u("speech_len", c.speech_len);
  get_u("text_len", c.text_len);
  if (auto it = kv.find("seed"); it != kv.end()) c.seed = std::stoull(it->second);
  if (auto it = kv.find("mechanism"); it != kv.end()) {
    auto k = mechanism_from_string(it->second);
    if (!k) throw ContractViolation("config: unknown mechanism '" + it->second + "'");
    c.mechanism = *k;
  }
  c.mode = default_mode(c.mechanism);
  if (auto it = kv.find("mode"); it != kv.end()) {
    auto m = mode_from_string(it->second);
    if (!m) throw ContractViolation("config: unknown mode '" + it->second + "'");
    c.mode = *m;
  }
  c.mechanism_config.model_dim = c.model_dim;
  c.mechanism_config.seed = c.seed;
  return c;
}

}  // namespace seqbench
