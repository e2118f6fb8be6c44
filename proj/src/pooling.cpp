#include "seqbench/pooling.hpp"

#include <cmath>

#include "seqbench/core_math.hpp"
#include "seqbench/kernels.hpp"

namespace seqbench {

PoolingParams make_pooling_params(Rng& rng, std::size_t model_dim) {
  Matrix q = gaussian_init(rng, 1, model_dim, 1.0 / std::sqrt(static_cast<double>(model_dim)));
  return PoolingParams{std::move(q.data)};
}

ClassifierParams make_classifier_params(Rng& rng, std::size_t model_dim) {
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(model_dim));
  ClassifierParams p;
  p.ln_gain.assign(model_dim, 1.0);
  p.ln_bias.assign(model_dim, 0.0);
  p.w1 = gaussian_init(rng, model_dim, model_dim, std_dev);
  p.b1.assign(model_dim, 0.0);
  p.w2 = gaussian_init(rng, kNumClasses, model_dim, std_dev);
  return p;
}

std::vector<double> attention_pool(const SequenceTensor& h, const PoolingParams& params) {
  if (h.rows < 1) throw ContractViolation("attention_pool: L must be >= 1");
  if (params.query.size() != h.cols)
    throw ContractViolation("attention_pool: query width mismatch");
  const std::size_t L = h.rows, D = h.cols;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  std::vector<double> scores(L);
  for (std::size_t i = 0; i < L; ++i)
    scores[i] = kernels::dot(h.row(i), params.query.data(), D) * inv_sqrt_d;
  std::vector<double> weights = stable_softmax(scores);
  std::vector<double> c(D, 0.0);
  for (std::size_t i = 0; i < L; ++i) kernels::axpy(c.data(), weights[i], h.row(i), D);
  return c;
}

std::array<double, kNumClasses> classifier_forward(const std::vector<double>& c,
                                                   const ClassifierParams& params) {
  const std::size_t D = c.size();
  std::vector<double> x = layer_norm(c, params.ln_gain, params.ln_bias);
  std::vector<double> h(D);
  detail::matvec(h.data(), params.w1.data.data(), x.data(), D, D);
  for (std::size_t i = 0; i < D; ++i) h[i] += params.b1[i];
  gelu_inplace(h.data(), D);
  std::array<double, kNumClasses> logits{};
  for (std::size_t i = 0; i < kNumClasses; ++i)
    logits[i] = kernels::dot(params.w2.row(i), h.data(), D) + params.b2[i];
  return logits;
}

int predict(const std::array<double, kNumClasses>& logits) {
  for (double v : logits)
    if (!std::isfinite(v)) throw ContractViolation("predict: non-finite logit");
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumClasses; ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best) + 1;
}

}  // namespace seqbench
