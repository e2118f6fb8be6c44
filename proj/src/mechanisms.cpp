#include "seqbench/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqbench/core_math.hpp"
#include "seqbench/kernels.hpp"

namespace seqbench {

namespace {

constexpr double kDenEps = 1e-8;      // LightNet denominator guard
constexpr double kKeyNormEps = 1e-12; // KDA: below this, keys stay unnormalized

thread_local std::size_t g_lightnet_flags = 0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// c[i*L + j] = dot(a_i, b_j) for j <= i only; the strict upper triangle is
// never read downstream.
void gemm_nt_lower(double* c, const double* a, const double* b, std::size_t L, std::size_t n) {
  constexpr std::size_t kTile = 16;
  for (std::size_t i0 = 0; i0 < L; i0 += kTile) {
    const std::size_t i1 = std::min(i0 + kTile, L);
    for (std::size_t j = 0; j < i1; ++j) {
      const double* bj = b + j * n;
      for (std::size_t i = std::max(j, i0); i < i1; ++i) {
        c[i * L + j] = kernels::dot(a + i * n, bj, n);
      }
    }
  }
}

// out rows [i0..) accumulate sum_{j<=i} w[i*L+j] * v_j into a d-wide slice
// with row stride `stride`.
void causal_weighted_sum(double* out, std::size_t stride, const double* w, const double* v,
                         std::size_t L, std::size_t d) {
  constexpr std::size_t kTile = 16;
  for (std::size_t i0 = 0; i0 < L; i0 += kTile) {
    const std::size_t i1 = std::min(i0 + kTile, L);
    for (std::size_t j = 0; j < i1; ++j) {
      const double* vj = v + j * d;
      for (std::size_t i = std::max(j, i0); i < i1; ++i) {
        kernels::axpy(out + i * stride, w[i * L + j], vj, d);
      }
    }
  }
}

double guarded_denominator(double den) {
  if (std::abs(den) < kDenEps) {
    ++g_lightnet_flags;
    return den < 0.0 ? -kDenEps : kDenEps;
  }
  return den;
}

void project(scratch& out, const SequenceTensor& u, const Matrix& w, std::size_t L,
             std::size_t d, std::size_t D) {
  out.assign(L * d, 0.0);
  detail::gemm_nt(out.data(), u.data.data(), w.data.data(), L, d, D);
}

// Parallel form of SA and FoX: materialized causal score matrix, row softmax.
void attention_parallel_head(const MechanismParams& p, std::size_t h, const SequenceTensor& u,
                             SequenceTensor& out) {
  const std::size_t L = u.rows, D = p.config.model_dim, d = p.config.head_dim();
  const HeadParams& hp = p.heads[h];
  scratch q, k, v;
  project(q, u, hp.w_q, L, d, D);
  project(k, u, hp.w_k, L, d, D);
  project(v, u, hp.w_v, L, d, D);

  scratch scores(L * L);
  gemm_nt_lower(scores.data(), q.data(), k.data(), L, d);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < L; ++i) {
    kernels::scale(scores.data() + i * L, inv_sqrt_d, i + 1);
  }

  if (p.kind == MechanismKind::FoX) {
    // Cumulative log forget gates; a gate of exactly 0 makes everything at or
    // before it unreachable, tracked by a zero count instead of -inf sums.
    scratch cum(L), zero_count(L);
    double c = 0.0;
    double zc = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const double f = logistic(kernels::dot(hp.forget_w.data(), u.row(l), D) + hp.forget_b);
      if (f > 0.0) {
        c += std::log(f);
      } else {
        zc += 1.0;
      }
      cum[l] = c;
      zero_count[l] = zc;
    }
    for (std::size_t i = 0; i < L; ++i) {
      double* r = scores.data() + i * L;
      for (std::size_t j = 0; j <= i; ++j) {
        r[j] += (zero_count[i] == zero_count[j])
                    ? cum[i] - cum[j]
                    : -std::numeric_limits<double>::infinity();
      }
    }
  }

  for (std::size_t i = 0; i < L; ++i) {
    softmax_masked_inplace(scores.data() + i * L, i + 1);
  }
  causal_weighted_sum(out.data.data() + h * d, D, scores.data(), v.data(), L, d);
}

void retnet_parallel_head(const MechanismParams& p, std::size_t h, const SequenceTensor& u,
                          SequenceTensor& out) {
  const std::size_t L = u.rows, D = p.config.model_dim, d = p.config.head_dim();
  const HeadParams& hp = p.heads[h];
  scratch q, k, v;
  project(q, u, hp.w_q, L, d, D);
  project(k, u, hp.w_k, L, d, D);
  project(v, u, hp.w_v, L, d, D);

  scratch scores(L * L);
  gemm_nt_lower(scores.data(), q.data(), k.data(), L, d);
  scratch gpow(L);
  gpow[0] = 1.0;
  for (std::size_t i = 1; i < L; ++i) gpow[i] = gpow[i - 1] * hp.gamma;
  for (std::size_t i = 0; i < L; ++i) {
    double* r = scores.data() + i * L;
    for (std::size_t j = 0; j <= i; ++j) r[j] *= gpow[i - j];
  }
  causal_weighted_sum(out.data.data() + h * d, D, scores.data(), v.data(), L, d);
}

void lightnet_parallel_head(const MechanismParams& p, std::size_t h, const SequenceTensor& u,
                            SequenceTensor& out) {
  const std::size_t L = u.rows, D = p.config.model_dim, d = p.config.head_dim();
  const HeadParams& hp = p.heads[h];
  scratch q, k, v;
  project(q, u, hp.w_q, L, d, D);
  project(k, u, hp.w_k, L, d, D);
  project(v, u, hp.w_v, L, d, D);

  // phi(k) = exp(k - M); the shift cancels in the normalized readout.
  const double m = kernels::max(k.data(), L * d);
  for (double& x : k) x = std::exp(x - m);

  scratch scores(L * L);
  gemm_nt_lower(scores.data(), q.data(), k.data(), L, d);
  for (std::size_t i = 0; i < L; ++i) {
    double* r = scores.data() + i * L;
    const double den = guarded_denominator(kernels::sum(r, i + 1));
    kernels::scale(r, 1.0 / den, i + 1);
  }
  causal_weighted_sum(out.data.data() + h * d, D, scores.data(), v.data(), L, d);
}

void apply_output_projection(const MechanismParams& p, SequenceTensor& out) {
  const std::size_t D = p.config.model_dim;
  scratch tmp(D);
  for (std::size_t i = 0; i < out.rows; ++i) {
    detail::matvec(tmp.data(), p.w_o.data.data(), out.row(i), D, D);
    std::copy(tmp.begin(), tmp.end(), out.row(i));
  }
}

}  // namespace

const char* to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::SA: return "sa";
    case MechanismKind::RetNet: return "retnet";
    case MechanismKind::LightNet: return "lightnet";
    case MechanismKind::GSA: return "gsa";
    case MechanismKind::FoX: return "fox";
    case MechanismKind::KDA: return "kda";
  }
  return "?";
}

const char* to_string(ExecutionMode m) {
  return m == ExecutionMode::Parallel ? "parallel" : "recurrent";
}

std::optional<MechanismKind> mechanism_from_string(const std::string& name) {
  for (MechanismKind k : kAllMechanisms)
    if (name == to_string(k)) return k;
  return std::nullopt;
}

std::optional<ExecutionMode> mode_from_string(const std::string& name) {
  if (name == "parallel") return ExecutionMode::Parallel;
  if (name == "recurrent") return ExecutionMode::Recurrent;
  return std::nullopt;
}

bool supports(MechanismKind k, ExecutionMode m) {
  switch (k) {
    case MechanismKind::SA:
    case MechanismKind::FoX: return m == ExecutionMode::Parallel;
    case MechanismKind::GSA:
    case MechanismKind::KDA: return m == ExecutionMode::Recurrent;
    case MechanismKind::RetNet:
    case MechanismKind::LightNet: return true;
  }
  return false;
}

ExecutionMode default_mode(MechanismKind k) {
  return (k == MechanismKind::SA || k == MechanismKind::FoX) ? ExecutionMode::Parallel
                                                             : ExecutionMode::Recurrent;
}

bool is_bounded(MechanismKind k) {
  return k != MechanismKind::SA && k != MechanismKind::FoX;
}

void MechanismConfig::validate() const {
  if (model_dim == 0 || num_heads == 0)
    throw ContractViolation("MechanismConfig: model_dim and num_heads must be positive");
  if (model_dim % num_heads != 0)
    throw ContractViolation("MechanismConfig: model_dim must be divisible by num_heads");
  if (slots == 0) throw ContractViolation("MechanismConfig: slots must be >= 1");
}

MechanismParams make_params(MechanismKind kind, const MechanismConfig& config) {
  config.validate();
  const std::size_t D = config.model_dim, H = config.num_heads, d = config.head_dim();
  const std::size_t m = config.slots;
  const double std_proj = 1.0 / std::sqrt(static_cast<double>(D));

  Rng root(config.seed);
  std::uint64_t tag = 0;
  auto next = [&]() { return root.child(tag++); };

  MechanismParams p;
  p.kind = kind;
  p.config = config;
  p.heads.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    Rng r = next();
    HeadParams& hp = p.heads[h];
    hp.w_q = gaussian_init(r, d, D, std_proj);
    hp.w_k = gaussian_init(r, d, D, std_proj);
    hp.w_v = gaussian_init(r, d, D, std_proj);
    switch (kind) {
      case MechanismKind::RetNet:
        hp.gamma = 1.0 - std::exp2(-5.0 - static_cast<double>(h));
        break;
      case MechanismKind::FoX: {
        Matrix fw = gaussian_init(r, 1, D, std_proj);
        hp.forget_w = std::move(fw.data);
        hp.forget_b = 1.0;
        break;
      }
      case MechanismKind::GSA:
        hp.slot_gate_b.assign(m, 0.0);
        break;
      case MechanismKind::KDA: {
        hp.decay_b.assign(d, 2.0);
        Matrix bw = gaussian_init(r, 1, D, std_proj);
        hp.beta_w = std::move(bw.data);
        hp.beta_b = 0.0;
        break;
      }
      default: break;
    }
  }
  {
    Rng r = next();
    p.w_o = gaussian_init(r, D, H * d, std_proj);
  }
  if (kind == MechanismKind::GSA) {
    Rng r = next();
    p.slot_gate_w = gaussian_init(r, m, D, std_proj);
  }
  if (kind == MechanismKind::KDA) {
    Rng r = next();
    p.decay_w = gaussian_init(r, d, D, std_proj);
  }
  return p;
}

std::size_t RecurrentState::scalar_count() const {
  return s.size() + z.size() + running_max.size() + slot_k.size() + slot_v.size();
}

RecurrentState make_state(const MechanismParams& params) {
  if (!is_bounded(params.kind))
    throw UnsupportedMode(std::string(to_string(params.kind)) +
                          " has no fixed-size recurrent state");
  const std::size_t H = params.config.num_heads, d = params.config.head_dim();
  const std::size_t m = params.config.slots;
  RecurrentState st;
  st.kind = params.kind;
  st.t = 0;
  switch (params.kind) {
    case MechanismKind::RetNet:
    case MechanismKind::KDA:
      st.s.assign(H * d * d, 0.0);
      break;
    case MechanismKind::LightNet:
      st.s.assign(H * d * d, 0.0);
      st.z.assign(H * d, 0.0);
      st.running_max.assign(H, -std::numeric_limits<double>::infinity());
      break;
    case MechanismKind::GSA:
      st.slot_k.assign(H * m * d, 0.0);
      st.slot_v.assign(H * m * d, 0.0);
      break;
    default: break;
  }
  return st;
}

void mechanism_step(const MechanismParams& params, RecurrentState& state, const double* u,
                    double* out) {
  if (!is_bounded(params.kind))
    throw UnsupportedMode(std::string(to_string(params.kind)) + " does not support stepping");
  if (state.kind != params.kind)
    throw ContractViolation("mechanism_step: state/params kind mismatch");

  const std::size_t D = params.config.model_dim, H = params.config.num_heads;
  const std::size_t d = params.config.head_dim(), m = params.config.slots;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  // One arena per step: q, k, v, gate/score lane, delta lane, head concat.
  const std::size_t lane = std::max(m, d);
  scratch buf(3 * d + lane + d + D, 0.0);
  double* q = buf.data();
  double* k = q + d;
  double* v = k + d;
  double* gate = v + d;
  double* delta = gate + lane;
  double* concat = delta + d;

  for (std::size_t h = 0; h < H; ++h) {
    const HeadParams& hp = params.heads[h];
    detail::matvec(q, hp.w_q.data.data(), u, d, D);
    detail::matvec(k, hp.w_k.data.data(), u, d, D);
    detail::matvec(v, hp.w_v.data.data(), u, d, D);
    double* oh = concat + h * d;
    std::fill(oh, oh + d, 0.0);

    switch (params.kind) {
      case MechanismKind::RetNet: {
        double* S = state.s.data() + h * d * d;
        for (std::size_t a = 0; a < d; ++a) {
          kernels::axpby(S + a * d, hp.gamma, k[a], v, d);
        }
        for (std::size_t a = 0; a < d; ++a) kernels::axpy(oh, q[a], S + a * d, d);
        break;
      }
      case MechanismKind::LightNet: {
        double* S = state.s.data() + h * d * d;
        double* z = state.z.data() + h * d;
        double& rm = state.running_max[h];
        const double km = kernels::max(k, d);
        if (km > rm) {
          if (std::isfinite(rm)) {
            const double rescale = std::exp(rm - km);
            kernels::scale(S, rescale, d * d);
            kernels::scale(z, rescale, d);
          }
          rm = km;
        }
        for (std::size_t a = 0; a < d; ++a) {
          const double phi = std::exp(k[a] - rm);
          z[a] += phi;
          kernels::axpy(S + a * d, phi, v, d);
        }
        for (std::size_t a = 0; a < d; ++a) kernels::axpy(oh, q[a], S + a * d, d);
        const double den = guarded_denominator(kernels::dot(q, z, d));
        kernels::scale(oh, 1.0 / den, d);
        break;
      }
      case MechanismKind::GSA: {
        double* Kb = state.slot_k.data() + h * m * d;
        double* Vb = state.slot_v.data() + h * m * d;
        detail::matvec(gate, params.slot_gate_w.data.data(), u, m, D);
        for (std::size_t i = 0; i < m; ++i) {
          const double a = logistic(gate[i] + hp.slot_gate_b[i]);
          kernels::axpby(Kb + i * d, a, 1.0 - a, k, d);
          kernels::axpby(Vb + i * d, a, 1.0 - a, v, d);
          gate[i] = kernels::dot(q, Kb + i * d, d) * inv_sqrt_d;  // gate lane becomes scores
        }
        softmax_masked_inplace(gate, m);
        for (std::size_t i = 0; i < m; ++i) kernels::axpy(oh, gate[i], Vb + i * d, d);
        break;
      }
      case MechanismKind::KDA: {
        double* S = state.s.data() + h * d * d;
        detail::matvec(gate, params.decay_w.data.data(), u, d, D);
        const double beta = logistic(kernels::dot(hp.beta_w.data(), u, D) + hp.beta_b);
        const double nrm = std::sqrt(kernels::dot(k, k, d));
        if (nrm >= kKeyNormEps) kernels::scale(k, 1.0 / nrm, d);
        for (std::size_t a = 0; a < d; ++a) {
          kernels::scale(S + a * d, logistic(gate[a] + hp.decay_b[a]), d);
        }
        std::fill(delta, delta + d, 0.0);
        for (std::size_t a = 0; a < d; ++a) kernels::axpy(delta, k[a], S + a * d, d);
        for (std::size_t j = 0; j < d; ++j) delta[j] = v[j] - delta[j];
        for (std::size_t a = 0; a < d; ++a) kernels::axpy(S + a * d, beta * k[a], delta, d);
        for (std::size_t a = 0; a < d; ++a) kernels::axpy(oh, q[a], S + a * d, d);
        break;
      }
      default: break;
    }
  }
  detail::matvec(out, params.w_o.data.data(), concat, D, D);
  ++state.t;
}

SequenceTensor forward(const MechanismParams& params, const SequenceTensor& u,
                       ExecutionMode mode) {
  const std::size_t D = params.config.model_dim;
  if (u.rows < 1) throw ContractViolation("forward: L must be >= 1");
  if (u.cols != D) throw ContractViolation("forward: input width does not match model_dim");
  if (!supports(params.kind, mode))
    throw UnsupportedMode(std::string(to_string(params.kind)) + " does not support " +
                          to_string(mode) + " mode");
  if (params.kind == MechanismKind::RetNet) {
    for (const HeadParams& hp : params.heads)
      if (!(hp.gamma > 0.0 && hp.gamma < 1.0))
        throw ContractViolation("retnet: gamma must lie in (0,1)");
  }
  u.require_finite("forward input");

  SequenceTensor out(u.rows, D);
  if (mode == ExecutionMode::Recurrent) {
    RecurrentState st = make_state(params);
    for (std::size_t t = 0; t < u.rows; ++t) mechanism_step(params, st, u.row(t), out.row(t));
  } else {
    for (std::size_t h = 0; h < params.config.num_heads; ++h) {
      switch (params.kind) {
        case MechanismKind::SA:
        case MechanismKind::FoX: attention_parallel_head(params, h, u, out); break;
        case MechanismKind::RetNet: retnet_parallel_head(params, h, u, out); break;
        case MechanismKind::LightNet: lightnet_parallel_head(params, h, u, out); break;
        default: break;
      }
    }
    apply_output_projection(params, out);
  }
  out.require_finite("forward output");
  return out;
}

std::size_t param_count(MechanismKind kind, const MechanismConfig& config, bool include_head) {
  config.validate();
  const std::size_t D = config.model_dim, H = config.num_heads, d = config.head_dim();
  const std::size_t m = config.slots;
  std::size_t n = H * 3 * d * D + D * (H * d);
  switch (kind) {
    case MechanismKind::SA: break;
    case MechanismKind::RetNet: n += H; break;
    case MechanismKind::LightNet: break;
    case MechanismKind::FoX: n += H * (D + 1); break;
    case MechanismKind::GSA: n += m * D + H * m; break;
    case MechanismKind::KDA: n += d * D + H * (d + D + 1); break;
  }
  if (include_head) {
    n += D;                      // pooling query
    n += 2 * D;                  // layer norm gain/bias
    n += D * D + D;              // first linear
    n += 8 * D + 8;              // class logits
  }
  return n;
}

std::size_t lightnet_denominator_flags() { return g_lightnet_flags; }
void reset_lightnet_denominator_flags() { g_lightnet_flags = 0; }

}  // namespace seqbench
