#pragma once

// Differentiable building blocks on top of the tape: dense layers, MLPs,
// residual blocks, a GRU cell, additive graph attention, and the plain
// (non-tape) loss helpers shared with the evaluation code.

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dagmp/params.hpp"
#include "dagmp/tensor.hpp"

namespace dagmp {

inline constexpr double kLeakyReluSlope = 0.2;

enum class Activation { kNone, kRelu, kTanh, kLeakyRelu };

struct MlpSpec {
  struct Layer {
    int in = 0;
    int out = 0;
    Activation act = Activation::kRelu;
  };
  std::vector<Layer> layers;

  // Hidden layers ReLU, final layer linear unless stated otherwise.
  static MlpSpec dense(std::span<const int> dims, Activation final_act = Activation::kNone) {
    if (dims.size() < 2) throw std::invalid_argument("MlpSpec: need at least in/out dims");
    MlpSpec spec;
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
      Activation act = (i + 2 == dims.size()) ? final_act : Activation::kRelu;
      spec.layers.push_back({dims[i], dims[i + 1], act});
    }
    return spec;
  }
  static MlpSpec dense(std::initializer_list<int> dims, Activation final_act = Activation::kNone) {
    return dense(std::span<const int>(dims.begin(), dims.size()), final_act);
  }
};

struct MlpParams {
  MlpSpec spec;
  std::vector<int> weights;  // store ids, one per layer
  std::vector<int> biases;
};

inline MlpParams make_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec) {
  MlpParams p;
  p.spec = spec;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    p.weights.push_back(store.add(prefix + ".w" + std::to_string(i), l.out, l.in, l.in));
    p.biases.push_back(store.add(prefix + ".b" + std::to_string(i), l.out, 1, l.in));
  }
  return p;
}

inline Var apply_activation(Tape& tape, Var x, Activation act) {
  switch (act) {
    case Activation::kNone: return x;
    case Activation::kRelu: return tape.relu(x);
    case Activation::kTanh: return tape.tanh_(x);
    case Activation::kLeakyRelu: return tape.leaky_relu(x, kLeakyReluSlope);
  }
  throw std::invalid_argument("unknown activation");
}

inline Var mlp_forward(Tape& tape, ParamBinding& bind, const MlpParams& mlp, Var x) {
  for (size_t i = 0; i < mlp.spec.layers.size(); ++i) {
    if (tape.val(x).rows != mlp.spec.layers[i].in || tape.val(x).cols != 1)
      throw std::invalid_argument("mlp_forward: input shape mismatch at layer " + std::to_string(i));
    x = tape.add(tape.matmul(bind[mlp.weights[i]], x), bind[mlp.biases[i]]);
    x = apply_activation(tape, x, mlp.spec.layers[i].act);
  }
  return x;
}

struct GruParams {
  int input = 0, hidden = 0;
  int wz, uz, bz;
  int wr, ur, br;
  int wh, uh, bh;
};

inline GruParams make_gru(ParamStore& store, const std::string& prefix, int input, int hidden) {
  GruParams p;
  p.input = input;
  p.hidden = hidden;
  int fan = input + hidden;
  p.wz = store.add(prefix + ".wz", hidden, input, fan);
  p.uz = store.add(prefix + ".uz", hidden, hidden, fan);
  p.bz = store.add(prefix + ".bz", hidden, 1, fan);
  p.wr = store.add(prefix + ".wr", hidden, input, fan);
  p.ur = store.add(prefix + ".ur", hidden, hidden, fan);
  p.br = store.add(prefix + ".br", hidden, 1, fan);
  p.wh = store.add(prefix + ".wh", hidden, input, fan);
  p.uh = store.add(prefix + ".uh", hidden, hidden, fan);
  p.bh = store.add(prefix + ".bh", hidden, 1, fan);
  return p;
}

// z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
// hc = tanh(Wh x + Uh (r.h) + bh), h' = (1-z).h + z.hc
inline Var gru_cell(Tape& tape, ParamBinding& bind, const GruParams& p, Var input, Var hidden) {
  if (tape.val(input).rows != p.input || tape.val(hidden).rows != p.hidden ||
      tape.val(input).cols != 1 || tape.val(hidden).cols != 1)
    throw std::invalid_argument("gru_cell: shape mismatch");
  Var z = tape.sigmoid_(tape.add(tape.add(tape.matmul(bind[p.wz], input),
                                          tape.matmul(bind[p.uz], hidden)),
                                 bind[p.bz]));
  Var r = tape.sigmoid_(tape.add(tape.add(tape.matmul(bind[p.wr], input),
                                          tape.matmul(bind[p.ur], hidden)),
                                 bind[p.br]));
  Var hc = tape.tanh_(tape.add(tape.add(tape.matmul(bind[p.wh], input),
                                        tape.matmul(bind[p.uh], tape.mul(r, hidden))),
                               bind[p.bh]));
  return tape.add(tape.mul(tape.one_minus(z), hidden), tape.mul(z, hc));
}

struct AttentionParams {
  int dim_in = 0, dim_out = 0;
  int w1, w2, a;  // a stacks the two halves of the attention vector
};

inline AttentionParams make_attention(ParamStore& store, const std::string& prefix, int dim_in,
                                      int dim_out) {
  AttentionParams p;
  p.dim_in = dim_in;
  p.dim_out = dim_out;
  p.w1 = store.add(prefix + ".w1", dim_out, dim_in, dim_in);
  p.w2 = store.add(prefix + ".w2", dim_out, dim_in, dim_in);
  p.a = store.add(prefix + ".a", 2 * dim_out, 1, 2 * dim_out);
  return p;
}

// alpha_m = softmax_m LeakyReLU(a^T [W1 b_m || W2 h]); returns sum_m alpha_m W1 b_m.
// Optional out-param exposes the attention weights for inspection.
inline Var graph_attention_aggregate(Tape& tape, ParamBinding& bind, const AttentionParams& p,
                                     std::span<const Var> messages, Var node_state,
                                     std::vector<double>* weights_out = nullptr) {
  if (messages.empty())
    throw std::invalid_argument("graph_attention_aggregate: empty parent list");
  Var a_top = tape.slice_rows(bind[p.a], 0, p.dim_out);
  Var a_bot = tape.slice_rows(bind[p.a], p.dim_out, p.dim_out);
  Var w2h = tape.matmul(bind[p.w2], node_state);
  Var score_h = tape.dot(a_bot, w2h);

  std::vector<Var> projected;
  std::vector<Var> logits;
  projected.reserve(messages.size());
  logits.reserve(messages.size());
  for (Var b : messages) {
    Var w1b = tape.matmul(bind[p.w1], b);
    projected.push_back(w1b);
    logits.push_back(tape.leaky_relu(tape.add(tape.dot(a_top, w1b), score_h), kLeakyReluSlope));
  }
  Var alpha = tape.softmax(tape.stack_scalars(logits));
  if (weights_out) *weights_out = tape.val(alpha).v;
  Var stacked = tape.concat_cols(projected);  // dim_out x P
  return tape.matmul(stacked, alpha);
}

// ---------------------------------------------------------------------------
// Plain (non-tape) numeric helpers.

inline double smooth_l1(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) {
    double ax = std::abs(x);
    s += ax <= 1.0 ? 0.5 * x * x : ax - 0.5;
  }
  return s;
}
inline double smooth_l1(std::initializer_list<double> xs) {
  return smooth_l1(std::span<const double>(xs.begin(), xs.size()));
}

inline std::vector<double> softmax_values(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  double mx = out[0];
  for (double x : out) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : out) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

inline constexpr double kFocalProbFloor = 1e-12;

// Multi-class focal loss -alpha[c] (1-p_c)^gamma log(p_c). clamped_flag, when
// given, reports that p_c hit the floor.
inline double focal_loss(std::span<const double> probs, int target, double gamma,
                         std::span<const double> alpha, bool* clamped_flag = nullptr) {
  if (target < 0 || target >= static_cast<int>(probs.size()))
    throw std::invalid_argument("focal_loss: target out of range");
  if (alpha.size() != probs.size())
    throw std::invalid_argument("focal_loss: alpha size mismatch");
  double p = probs[target];
  if (clamped_flag) *clamped_flag = p < kFocalProbFloor;
  p = std::max(p, kFocalProbFloor);
  return -alpha[target] * std::pow(1.0 - p, gamma) * std::log(p);
}

// Tape version applied to an already-softmaxed probability vector.
inline Var focal_loss_from_probs(Tape& tape, Var probs, int target, double gamma,
                                 std::span<const double> alpha) {
  const Tensor2& tp = tape.val(probs);
  if (target < 0 || target >= tp.rows || tp.cols != 1)
    throw std::invalid_argument("focal_loss_from_probs: bad target or shape");
  Var p = tape.clamp_min(tape.slice_rows(probs, target, 1), kFocalProbFloor);
  Var modulator = tape.pow_(tape.one_minus(p), gamma);
  Var nll = tape.scale(tape.log_(p), -1.0);
  return tape.scale(tape.mul(modulator, nll), alpha[target]);
}

}  // namespace dagmp
