#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "seqbench/core_math.hpp"
#include "seqbench/error.hpp"
#include "seqbench/mechanisms.hpp"

using namespace seqbench;

namespace {

SequenceTensor random_input(std::uint64_t seed, std::size_t L, std::size_t D) {
  Rng rng(seed);
  SequenceTensor u(L, D);
  for (double& x : u.data) x = rng.gaussian();
  return u;
}

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

// Head projections for one token: y = W u.
std::vector<double> apply(const Matrix& w, const double* u) {
  std::vector<double> y(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i)
    for (std::size_t j = 0; j < w.cols; ++j) y[i] += w.at(i, j) * u[j];
  return y;
}

// Count every scalar actually stored in the parameter struct for its kind.
std::size_t count_scalars(const MechanismParams& p) {
  std::size_t n = p.w_o.data.size();
  for (const HeadParams& hp : p.heads) {
    n += hp.w_q.data.size() + hp.w_k.data.size() + hp.w_v.data.size();
    switch (p.kind) {
      case MechanismKind::RetNet: n += 1; break;
      case MechanismKind::FoX: n += hp.forget_w.size() + 1; break;
      case MechanismKind::GSA: n += hp.slot_gate_b.size(); break;
      case MechanismKind::KDA:
        n += hp.decay_b.size() + hp.beta_w.size() + 1;
        break;
      default: break;
    }
  }
  n += p.slot_gate_w.data.size() + p.decay_w.data.size();
  return n;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Naive quadratic oracle for one sa head: softmax(QK^T / sqrt(d)) V, causal.
std::vector<double> sa_head_oracle(const HeadParams& hp, const SequenceTensor& u) {
  const std::size_t L = u.rows, d = hp.w_q.rows;
  std::vector<double> out(L * d, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    auto qi = apply(hp.w_q, u.row(i));
    std::vector<double> s(i + 1);
    for (std::size_t j = 0; j <= i; ++j) {
      auto kj = apply(hp.w_k, u.row(j));
      double dotv = 0.0;
      for (std::size_t a = 0; a < d; ++a) dotv += qi[a] * kj[a];
      s[j] = dotv / std::sqrt(static_cast<double>(d));
    }
    auto w = stable_softmax(s);
    for (std::size_t j = 0; j <= i; ++j) {
      auto vj = apply(hp.w_v, u.row(j));
      for (std::size_t a = 0; a < d; ++a) out[i * d + a] += w[j] * vj[a];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("sa: first token attends only to itself") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 3};
  MechanismParams p = make_params(MechanismKind::SA, cfg);
  SequenceTensor u = random_input(17, 1, 8);
  SequenceTensor out = forward(p, u, ExecutionMode::Parallel);
  // o_1 = W_o concat_h(v_1^h), no mixing possible
  std::vector<double> concat;
  for (const HeadParams& hp : p.heads) {
    auto v = apply(hp.w_v, u.row(0));
    concat.insert(concat.end(), v.begin(), v.end());
  }
  auto expect = apply(p.w_o, concat.data());
  for (std::size_t j = 0; j < 8; ++j)
    CHECK(out.at(0, j) == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("sa: identical tokens give identical outputs") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 5};
  MechanismParams p = make_params(MechanismKind::SA, cfg);
  SequenceTensor u(2, 8);
  Rng rng(9);
  for (std::size_t j = 0; j < 8; ++j) u.at(0, j) = u.at(1, j) = rng.gaussian();
  SequenceTensor out = forward(p, u, ExecutionMode::Parallel);
  // row 2 averages two equal values: same as row 1
  for (std::size_t j = 0; j < 8; ++j)
    CHECK(out.at(1, j) == doctest::Approx(out.at(0, j)).epsilon(1e-12));
}

TEST_CASE("sa: matches naive per-head oracle at L=3") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 21};
  MechanismParams p = make_params(MechanismKind::SA, cfg);
  SequenceTensor u = random_input(31, 3, 8);
  SequenceTensor out = forward(p, u, ExecutionMode::Parallel);
  const std::size_t d = cfg.head_dim();
  std::vector<double> concat(3 * 8, 0.0);
  for (std::size_t h = 0; h < 2; ++h) {
    auto oh = sa_head_oracle(p.heads[h], u);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t a = 0; a < d; ++a) concat[i * 8 + h * d + a] = oh[i * d + a];
  }
  for (std::size_t i = 0; i < 3; ++i) {
    auto expect = apply(p.w_o, concat.data() + i * 8);
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(out.at(i, j) == doctest::Approx(expect[j]).epsilon(1e-10));
  }
}

TEST_CASE("retnet: hand-computed two-step decay") {
  MechanismConfig cfg{.model_dim = 2, .num_heads = 1, .seed = 0};
  MechanismParams p = make_params(MechanismKind::RetNet, cfg);
  p.heads[0].w_q = identity(2);
  p.heads[0].w_k = Matrix(2, 2);
  p.heads[0].w_k.at(0, 1) = 1.0;  // k = (u[1], 0)
  p.heads[0].w_v = Matrix(2, 2);
  p.heads[0].w_v.at(0, 0) = 1.0; p.heads[0].w_v.at(0, 1) = 1.0;
  p.heads[0].w_v.at(1, 0) = 2.0; p.heads[0].w_v.at(1, 1) = 3.0;
  p.heads[0].gamma = 0.5;
  p.w_o = identity(2);

  SequenceTensor u(2, 2);
  u.at(0, 0) = 1.0; u.at(0, 1) = 1.0;  // k_1=(1,0), v_1=(2,5)
  u.at(1, 0) = 1.0; u.at(1, 1) = 0.0;  // q_2=(1,0), k_2=(0,0)

  for (ExecutionMode mode : {ExecutionMode::Parallel, ExecutionMode::Recurrent}) {
    SequenceTensor out = forward(p, u, mode);
    CHECK(out.at(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(out.at(0, 1) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(out.at(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(out.at(1, 1) == doctest::Approx(2.5).epsilon(1e-14));
  }
}

TEST_CASE("retnet: gamma near zero is memoryless") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 1, .seed = 77};
  MechanismParams p = make_params(MechanismKind::RetNet, cfg);
  p.heads[0].gamma = 1e-12;
  SequenceTensor u = random_input(41, 6, 8);
  SequenceTensor out = forward(p, u, ExecutionMode::Recurrent);
  // each row must equal a fresh single-token forward (history wiped out)
  for (std::size_t t = 0; t < 6; ++t) {
    SequenceTensor one(1, 8);
    std::copy(u.row(t), u.row(t) + 8, one.row(0));
    SequenceTensor solo = forward(p, one, ExecutionMode::Recurrent);
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(out.at(t, j) == doctest::Approx(solo.at(0, j)).epsilon(1e-9));
  }
}

TEST_CASE("lightnet: single token reproduces its value") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 13};
  MechanismParams p = make_params(MechanismKind::LightNet, cfg);
  SequenceTensor u = random_input(23, 1, 8);
  for (ExecutionMode mode : {ExecutionMode::Parallel, ExecutionMode::Recurrent}) {
    SequenceTensor out = forward(p, u, mode);
    std::vector<double> concat;
    for (const HeadParams& hp : p.heads) {
      auto v = apply(hp.w_v, u.row(0));
      concat.insert(concat.end(), v.begin(), v.end());
    }
    auto expect = apply(p.w_o, concat.data());
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(out.at(0, j) == doctest::Approx(expect[j]).epsilon(1e-12));
  }
}

TEST_CASE("lightnet: equal keys average the values uniformly") {
  MechanismConfig cfg{.model_dim = 4, .num_heads = 1, .seed = 0};
  MechanismParams p = make_params(MechanismKind::LightNet, cfg);
  p.heads[0].w_k = Matrix(4, 4);  // k = 0 for every token -> phi uniform
  p.heads[0].w_q = identity(4);
  p.heads[0].w_v = identity(4);
  p.w_o = identity(4);
  SequenceTensor u = random_input(29, 5, 4);
  SequenceTensor out = forward(p, u, ExecutionMode::Parallel);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0.0;
      for (std::size_t l = 0; l <= i; ++l) mean += u.at(l, j);
      mean /= static_cast<double>(i + 1);
      CHECK(out.at(i, j) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("lightnet: matches normalized linear-attention oracle at L=3") {
  MechanismConfig cfg{.model_dim = 6, .num_heads = 1, .seed = 51};
  MechanismParams p = make_params(MechanismKind::LightNet, cfg);
  SequenceTensor u = random_input(61, 3, 6);
  SequenceTensor out = forward(p, u, ExecutionMode::Parallel);
  const HeadParams& hp = p.heads[0];
  const std::size_t d = 6;
  for (std::size_t i = 0; i < 3; ++i) {
    auto qi = apply(hp.w_q, u.row(i));
    std::vector<double> w(i + 1, 0.0);
    double den = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      auto kj = apply(hp.w_k, u.row(j));
      for (std::size_t a = 0; a < d; ++a) w[j] += qi[a] * std::exp(kj[a]);
      den += w[j];
    }
    std::vector<double> head(d, 0.0);
    for (std::size_t j = 0; j <= i; ++j) {
      auto vj = apply(hp.w_v, u.row(j));
      for (std::size_t a = 0; a < d; ++a) head[a] += (w[j] / den) * vj[a];
    }
    auto expect = apply(p.w_o, head.data());
    for (std::size_t jj = 0; jj < d; ++jj)
      CHECK(out.at(i, jj) == doctest::Approx(expect[jj]).epsilon(1e-9));
  }
}

TEST_CASE("lightnet: near-zero denominators are flagged, never divide by zero") {
  MechanismConfig cfg{.model_dim = 4, .num_heads = 1, .seed = 0};
  MechanismParams p = make_params(MechanismKind::LightNet, cfg);
  p.heads[0].w_q = Matrix(4, 4);  // q = 0 -> denominator q.z = 0
  p.heads[0].w_k = identity(4);
  p.heads[0].w_v = identity(4);
  p.w_o = identity(4);
  SequenceTensor u = random_input(71, 3, 4);
  reset_lightnet_denominator_flags();
  SequenceTensor out = forward(p, u, ExecutionMode::Recurrent);
  CHECK(out.all_finite());
  CHECK(lightnet_denominator_flags() == 3);
  reset_lightnet_denominator_flags();
  CHECK(lightnet_denominator_flags() == 0);
}

TEST_CASE("gsa: saturated retain-gate freezes empty slots at zero") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .slots = 4, .seed = 7};
  MechanismParams p = make_params(MechanismKind::GSA, cfg);
  for (HeadParams& hp : p.heads) hp.slot_gate_b.assign(4, 1e9);  // alpha = 1 exactly
  SequenceTensor u = random_input(83, 5, 8);
  SequenceTensor out = forward(p, u, ExecutionMode::Recurrent);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("gsa: single slot matches hand recurrence") {
  MechanismConfig cfg{.model_dim = 4, .num_heads = 1, .slots = 1, .seed = 19};
  MechanismParams p = make_params(MechanismKind::GSA, cfg);
  SequenceTensor u = random_input(97, 4, 4);
  SequenceTensor out = forward(p, u, ExecutionMode::Recurrent);
  // m=1: softmax over one score is always 1, so o_t = V-slot after update
  const HeadParams& hp = p.heads[0];
  std::vector<double> kb(4, 0.0), vb(4, 0.0);
  for (std::size_t t = 0; t < 4; ++t) {
    double gate = hp.slot_gate_b[0];
    for (std::size_t j = 0; j < 4; ++j) gate += p.slot_gate_w.at(0, j) * u.at(t, j);
    const double a = logistic(gate);
    auto k = apply(hp.w_k, u.row(t));
    auto v = apply(hp.w_v, u.row(t));
    for (std::size_t j = 0; j < 4; ++j) {
      kb[j] = a * kb[j] + (1.0 - a) * k[j];
      vb[j] = a * vb[j] + (1.0 - a) * v[j];
    }
    auto expect = apply(p.w_o, vb.data());
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(out.at(t, j) == doctest::Approx(expect[j]).epsilon(1e-11));
  }
}

TEST_CASE("fox: crafted forget gates weight history as 0.25/0.5/1") {
  MechanismConfig cfg{.model_dim = 1, .num_heads = 1, .seed = 0};
  MechanismParams p = make_params(MechanismKind::FoX, cfg);
  p.heads[0].w_q = Matrix(1, 1);  // scores all zero; weights come from decay only
  p.heads[0].w_k = identity(1);
  p.heads[0].w_v = identity(1);
  p.heads[0].forget_w = {1.0};
  p.heads[0].forget_b = 0.0;
  p.w_o = identity(1);
  SequenceTensor u(3, 1);
  u.at(0, 0) = 40.0;  // logistic(40) == 1.0 in double precision
  u.at(1, 0) = 0.0;   // f = 0.5
  u.at(2, 0) = 0.0;   // f = 0.5
  SequenceTensor out = forward(p, u, ExecutionMode::Parallel);
  // row 3 weights: (0.25, 0.5, 1)/1.75 over v = (40, 0, 0)
  CHECK(out.at(2, 0) == doctest::Approx(40.0 * 0.25 / 1.75).epsilon(1e-12));
  // row 2 weights: (0.5, 1)/1.5
  CHECK(out.at(1, 0) == doctest::Approx(40.0 * 0.5 / 1.5).epsilon(1e-12));
  CHECK(out.at(0, 0) == doctest::Approx(40.0).epsilon(1e-12));
}

TEST_CASE("fox: a zero forget gate erases all earlier history") {
  MechanismConfig cfg{.model_dim = 1, .num_heads = 1, .seed = 0};
  MechanismParams p = make_params(MechanismKind::FoX, cfg);
  p.heads[0].w_q = Matrix(1, 1);
  p.heads[0].w_k = identity(1);
  p.heads[0].w_v = identity(1);
  p.heads[0].forget_w = {1.0};
  p.heads[0].forget_b = 0.0;
  p.w_o = identity(1);
  SequenceTensor u(3, 1);
  u.at(0, 0) = 3.0;
  u.at(1, 0) = -1e6;  // logistic(-1e6) == 0.0: hard reset
  u.at(2, 0) = 7.0;
  SequenceTensor out = forward(p, u, ExecutionMode::Parallel);
  CHECK(out.all_finite());
  // rows 2 and 3 can only see from the reset point on
  const double f3 = logistic(7.0);
  CHECK(out.at(1, 0) == doctest::Approx(-1e6).epsilon(1e-12));
  CHECK(out.at(2, 0) == doctest::Approx((f3 * -1e6 + 7.0) / (f3 + 1.0)).epsilon(1e-12));
}

TEST_CASE("kda: unit key, full write strength stores and retrieves exactly") {
  MechanismConfig cfg{.model_dim = 2, .num_heads = 1, .seed = 0};
  MechanismParams p = make_params(MechanismKind::KDA, cfg);
  p.heads[0].w_q = identity(2);
  p.heads[0].w_k = identity(2);
  p.heads[0].w_v = Matrix(2, 2);
  p.heads[0].w_v.at(0, 0) = 3.0;
  p.heads[0].w_v.at(1, 0) = 5.0;
  p.heads[0].beta_w = {0.0, 0.0};
  p.heads[0].beta_b = 1e9;  // beta = 1 exactly
  p.heads[0].decay_b = {1e9, 1e9};  // decay = 1 exactly: pure delta rule
  p.decay_w = Matrix(2, 2);
  p.w_o = identity(2);
  SequenceTensor u(1, 2);
  u.at(0, 0) = 1.0;  // k = q = (1,0) already unit norm, v = (3,5)
  SequenceTensor out = forward(p, u, ExecutionMode::Recurrent);
  CHECK(out.at(0, 0) == 3.0);
  CHECK(out.at(0, 1) == 5.0);
}

TEST_CASE("kda: matches an ungated delta-rule oracle") {
  MechanismConfig cfg{.model_dim = 6, .num_heads = 1, .seed = 43};
  MechanismParams p = make_params(MechanismKind::KDA, cfg);
  p.heads[0].decay_b.assign(6, 1e9);  // decay exactly 1; beta stays data-dependent
  p.decay_w = Matrix(6, 6);
  SequenceTensor u = random_input(53, 5, 6);
  SequenceTensor out = forward(p, u, ExecutionMode::Recurrent);

  const HeadParams& hp = p.heads[0];
  const std::size_t d = 6;
  std::vector<double> S(d * d, 0.0);
  for (std::size_t t = 0; t < 5; ++t) {
    auto q = apply(hp.w_q, u.row(t));
    auto k = apply(hp.w_k, u.row(t));
    auto v = apply(hp.w_v, u.row(t));
    double beta_arg = hp.beta_b;
    for (std::size_t j = 0; j < 6; ++j) beta_arg += hp.beta_w[j] * u.at(t, j);
    const double beta = logistic(beta_arg);
    double nrm = 0.0;
    for (double x : k) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : k) x /= nrm;
    std::vector<double> pred(d, 0.0);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) pred[b] += k[a] * S[a * d + b];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) S[a * d + b] += beta * k[a] * (v[b] - pred[b]);
    std::vector<double> head(d, 0.0);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) head[b] += q[a] * S[a * d + b];
    auto expect = apply(p.w_o, head.data());
    for (std::size_t j = 0; j < d; ++j)
      CHECK(out.at(t, j) == doctest::Approx(expect[j]).epsilon(1e-9));
  }
}

TEST_CASE("kda: tiny keys skip normalization instead of exploding") {
  MechanismConfig cfg{.model_dim = 4, .num_heads = 1, .seed = 0};
  MechanismParams p = make_params(MechanismKind::KDA, cfg);
  p.heads[0].w_k = Matrix(4, 4);  // k = 0 exactly: norm below threshold
  SequenceTensor u = random_input(111, 3, 4);
  SequenceTensor out = forward(p, u, ExecutionMode::Recurrent);
  CHECK(out.all_finite());
  // zero keys write nothing, so the state stays empty and outputs are zero
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("mechanism_step: one step equals a length-1 recurrent forward") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .slots = 3, .seed = 2};
  for (MechanismKind kind : {MechanismKind::RetNet, MechanismKind::LightNet, MechanismKind::GSA,
                             MechanismKind::KDA}) {
    MechanismParams p = make_params(kind, cfg);
    SequenceTensor u = random_input(19, 1, 8);
    SequenceTensor ref = forward(p, u, ExecutionMode::Recurrent);
    RecurrentState st = make_state(p);
    std::vector<double> out(8, 0.0);
    mechanism_step(p, st, u.row(0), out.data());
    CHECK(st.t == 1);
    for (std::size_t j = 0; j < 8; ++j) CHECK(out[j] == ref.at(0, j));
  }
}

TEST_CASE("mode support matrix and error types") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 1};
  SequenceTensor u = random_input(7, 2, 8);
  CHECK_THROWS_AS(forward(make_params(MechanismKind::SA, cfg), u, ExecutionMode::Recurrent),
                  UnsupportedMode);
  CHECK_THROWS_AS(forward(make_params(MechanismKind::FoX, cfg), u, ExecutionMode::Recurrent),
                  UnsupportedMode);
  CHECK_THROWS_AS(forward(make_params(MechanismKind::GSA, cfg), u, ExecutionMode::Parallel),
                  UnsupportedMode);
  CHECK_THROWS_AS(forward(make_params(MechanismKind::KDA, cfg), u, ExecutionMode::Parallel),
                  UnsupportedMode);
  CHECK_THROWS_AS(make_state(make_params(MechanismKind::SA, cfg)), UnsupportedMode);

  CHECK(default_mode(MechanismKind::SA) == ExecutionMode::Parallel);
  CHECK(default_mode(MechanismKind::FoX) == ExecutionMode::Parallel);
  CHECK(default_mode(MechanismKind::RetNet) == ExecutionMode::Recurrent);
  CHECK(default_mode(MechanismKind::KDA) == ExecutionMode::Recurrent);
  for (MechanismKind k : kAllMechanisms) CHECK(supports(k, default_mode(k)));
}

TEST_CASE("forward input contract violations") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 1};
  MechanismParams p = make_params(MechanismKind::SA, cfg);
  SequenceTensor empty(0, 8);
  CHECK_THROWS_AS(forward(p, empty, ExecutionMode::Parallel), ContractViolation);
  SequenceTensor wrong(2, 7);
  CHECK_THROWS_AS(forward(p, wrong, ExecutionMode::Parallel), ContractViolation);
  SequenceTensor nan_in = random_input(3, 2, 8);
  nan_in.at(1, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward(p, nan_in, ExecutionMode::Parallel), ContractViolation);

  MechanismParams r = make_params(MechanismKind::RetNet, cfg);
  r.heads[0].gamma = 1.0;
  SequenceTensor ok = random_input(3, 2, 8);
  CHECK_THROWS_AS(forward(r, ok, ExecutionMode::Recurrent), ContractViolation);

  MechanismConfig bad{.model_dim = 10, .num_heads = 4};
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("multihead output is linear in the per-head blocks of w_o") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 33};
  SequenceTensor u = random_input(67, 4, 8);
  for (auto [kind, mode] :
       {std::pair{MechanismKind::SA, ExecutionMode::Parallel},
        std::pair{MechanismKind::KDA, ExecutionMode::Recurrent}}) {
    MechanismParams p = make_params(kind, cfg);
    SequenceTensor full = forward(p, u, mode);
    const std::size_t d = cfg.head_dim();
    SequenceTensor acc(4, 8);
    for (std::size_t h = 0; h < 2; ++h) {
      MechanismParams ph = p;
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t g = 0; g < 2; ++g)
          if (g != h)
            for (std::size_t a = 0; a < d; ++a) ph.w_o.at(i, g * d + a) = 0.0;
      SequenceTensor part = forward(ph, u, mode);
      for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += part.data[i];
    }
    for (std::size_t i = 0; i < acc.data.size(); ++i)
      CHECK(acc.data[i] == doctest::Approx(full.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("swapping heads together with w_o blocks leaves sa unchanged") {
  MechanismConfig cfg{.model_dim = 8, .num_heads = 2, .seed = 47};
  MechanismParams p = make_params(MechanismKind::SA, cfg);
  MechanismParams swapped = p;
  std::swap(swapped.heads[0], swapped.heads[1]);
  const std::size_t d = cfg.head_dim();
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t a = 0; a < d; ++a)
      std::swap(swapped.w_o.at(i, a), swapped.w_o.at(i, d + a));
  SequenceTensor u = random_input(73, 5, 8);
  SequenceTensor a = forward(p, u, ExecutionMode::Parallel);
  SequenceTensor b = forward(swapped, u, ExecutionMode::Parallel);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-12));
}

TEST_CASE("param_count matches scalars actually allocated") {
  MechanismConfig small{.model_dim = 8, .num_heads = 2, .slots = 3, .seed = 0};
  CHECK(param_count(MechanismKind::SA, small) == 256);
  CHECK(param_count(MechanismKind::RetNet, small) == 258);

  MechanismConfig big{.model_dim = 256, .num_heads = 4, .slots = 64, .seed = 0};
  for (MechanismKind kind : kAllMechanisms) {
    MechanismParams p = make_params(kind, small);
    CHECK(param_count(kind, small) == count_scalars(p));
    MechanismParams pb = make_params(kind, big);
    CHECK(param_count(kind, big) == count_scalars(pb));
  }
  // head adds query + layer norm + two linears
  CHECK(param_count(MechanismKind::SA, small, true) ==
        256 + 8 + 16 + (64 + 8) + (64 + 8));
}

TEST_CASE("recurrent state size never depends on sequence length") {
  MechanismConfig cfg{.model_dim = 16, .num_heads = 2, .slots = 5, .seed = 1};
  for (MechanismKind kind : {MechanismKind::RetNet, MechanismKind::LightNet, MechanismKind::GSA,
                             MechanismKind::KDA}) {
    MechanismParams p = make_params(kind, cfg);
    RecurrentState st = make_state(p);
    const std::size_t before = st.scalar_count();
    SequenceTensor u = random_input(5, 64, 16);
    std::vector<double> out(16);
    for (std::size_t t = 0; t < 64; ++t) mechanism_step(p, st, u.row(t), out.data());
    CHECK(st.scalar_count() == before);
    CHECK(st.t == 64);
  }
}

TEST_CASE("make_params is deterministic in the seed") {
  MechanismConfig cfg{.model_dim = 16, .num_heads = 4, .seed = 314};
  MechanismParams a = make_params(MechanismKind::KDA, cfg);
  MechanismParams b = make_params(MechanismKind::KDA, cfg);
  for (std::size_t h = 0; h < 4; ++h)
    for (std::size_t i = 0; i < a.heads[h].w_q.data.size(); ++i)
      CHECK(a.heads[h].w_q.data[i] == b.heads[h].w_q.data[i]);
  for (std::size_t i = 0; i < a.w_o.data.size(); ++i) CHECK(a.w_o.data[i] == b.w_o.data[i]);
  // retnet decay schedule: gamma_h = 1 - 2^-(5+h)
  MechanismParams r = make_params(MechanismKind::RetNet, cfg);
  CHECK(r.heads[0].gamma == doctest::Approx(1.0 - 1.0 / 32.0).epsilon(1e-15));
  CHECK(r.heads[3].gamma == doctest::Approx(1.0 - 1.0 / 256.0).epsilon(1e-15));
}
