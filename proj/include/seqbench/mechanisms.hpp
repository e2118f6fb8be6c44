#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqbench/memory.hpp"
#include "seqbench/rng.hpp"
#include "seqbench/tensor.hpp"

namespace seqbench {

enum class MechanismKind { SA, RetNet, LightNet, GSA, FoX, KDA };

enum class ExecutionMode { Parallel, Recurrent };

constexpr MechanismKind kAllMechanisms[] = {MechanismKind::SA,  MechanismKind::RetNet,
                                            MechanismKind::LightNet, MechanismKind::GSA,
                                            MechanismKind::FoX, MechanismKind::KDA};

const char* to_string(MechanismKind k);
const char* to_string(ExecutionMode m);
std::optional<MechanismKind> mechanism_from_string(const std::string& name);
std::optional<ExecutionMode> mode_from_string(const std::string& name);

bool supports(MechanismKind k, ExecutionMode m);
// Parallel for SA/FoX, Recurrent for the bounded four.
ExecutionMode default_mode(MechanismKind k);
bool is_bounded(MechanismKind k);

struct MechanismConfig {
  std::size_t model_dim = 256;
  std::size_t num_heads = 4;
  std::size_t slots = 64;  // GSA only
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return model_dim / num_heads; }
  void validate() const;
};

struct HeadParams {
  Matrix w_q, w_k, w_v;  // d x D
  // RetNet
  double gamma = 0.0;
  // FoX forget gate: f = logistic(w_f . u + b_f)
  std::vector<double> forget_w;
  double forget_b = 0.0;
  // GSA per-head gate bias (m)
  std::vector<double> slot_gate_b;
  // KDA per-head decay bias (d), write-strength w_beta (D) and b_beta
  std::vector<double> decay_b;
  std::vector<double> beta_w;
  double beta_b = 0.0;
};

// Immutable after construction; safe to share read-only across forwards.
// The m x D slot-gate projection (GSA) and d x D decay projection (KDA) are
// shared across heads; per-head biases stay per head.
struct MechanismParams {
  MechanismKind kind = MechanismKind::SA;
  MechanismConfig config;
  std::vector<HeadParams> heads;
  Matrix w_o;          // D x (H*d) = D x D
  Matrix slot_gate_w;  // GSA: m x D
  Matrix decay_w;      // KDA: d x D
};

MechanismParams make_params(MechanismKind kind, const MechanismConfig& config);

// Bounded per-step memory; size is a function of the config only, never of L.
struct RecurrentState {
  MechanismKind kind = MechanismKind::SA;
  std::size_t t = 0;
  scratch s;                 // RetNet/LightNet/KDA: H*d*d
  scratch z;                 // LightNet: H*d normalizers
  scratch running_max;       // LightNet: one per head
  scratch slot_k, slot_v;    // GSA: H*m*d each

  std::size_t scalar_count() const;
};

RecurrentState make_state(const MechanismParams& params);

// One streaming step: consumes u (length D), writes out (length D, after the
// output projection). Folding from a fresh state reproduces
// forward(Recurrent) exactly (same arithmetic path).
void mechanism_step(const MechanismParams& params, RecurrentState& state, const double* u,
                    double* out);

SequenceTensor forward(const MechanismParams& params, const SequenceTensor& u,
                       ExecutionMode mode);

// Exact scalar count of mechanism parameters; optionally adds the pooling
// query and classifier head.
std::size_t param_count(MechanismKind kind, const MechanismConfig& config,
                        bool include_head = false);

// LightNet near-zero-denominator events since the last reset.
std::size_t lightnet_denominator_flags();
void reset_lightnet_denominator_flags();

}  // namespace seqbench
