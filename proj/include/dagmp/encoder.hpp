#pragma once

// Map-free agent history encoder: a GRU over per-step
// [displacement, velocity, yaw] inputs with invalid steps masked, a linear
// projection, and one round of agent-to-agent graph attention between
// agents within a distance threshold.

#include <optional>
#include <string>
#include <vector>

#include "dagmp/blocks.hpp"
#include "dagmp/scene.hpp"

namespace dagmp {

inline constexpr double kA2ARadiusMeters = 100.0;

struct EncoderParams {
  GruParams gru;
  int proj_w = -1, proj_b = -1;
  AttentionParams a2a;
  int gru_hidden = 0;
  int feat_dim = 0;
  double a2a_radius = kA2ARadiusMeters;
};

inline constexpr int kHistoryInputDim = 5;  // [dx, dy, vx, vy, yaw]

inline EncoderParams make_encoder(ParamStore& store, const std::string& prefix, int gru_hidden,
                                  int feat_dim) {
  EncoderParams p;
  p.gru_hidden = gru_hidden;
  p.feat_dim = feat_dim;
  p.gru = make_gru(store, prefix + ".gru", kHistoryInputDim, gru_hidden);
  p.proj_w = store.add(prefix + ".proj.w", feat_dim, gru_hidden, gru_hidden);
  p.proj_b = store.add(prefix + ".proj.b", feat_dim, 1, gru_hidden);
  p.a2a = make_attention(store, prefix + ".a2a", feat_dim, feat_dim);
  return p;
}

// One feature vector per agent, indexed by agent_id. present numbers the
// agents' present positions; agents whose present state is invalid take no
// part in the attention round.
inline std::vector<Var> encode_history(Tape& tape, ParamBinding& bind, const EncoderParams& enc,
                                       const PreprocessedHistory& history,
                                       const std::vector<AgentState>& present) {
  size_t n = history.agents.size();
  if (present.size() != n)
    throw std::invalid_argument("encode_history: present size mismatch");

  std::vector<Var> isolated(n);
  for (size_t a = 0; a < n; ++a) {
    Var h = tape.constant(Tensor2(enc.gru_hidden, 1));
    for (const auto& step : history.agents[a]) {
      if (!step.valid) continue;  // masked: hidden carried through
      Var x = tape.constant(
          Tensor2::column({step.disp.x, step.disp.y, step.vel.x, step.vel.y, step.yaw}));
      h = gru_cell(tape, bind, enc.gru, x, h);
    }
    isolated[a] = tape.add(tape.matmul(bind[enc.proj_w], h), bind[enc.proj_b]);
  }

  double radius_sq = enc.a2a_radius * enc.a2a_radius;
  std::vector<Var> out(n);
  for (size_t a = 0; a < n; ++a) {
    std::vector<Var> neighbors;
    if (present[a].valid) {
      for (size_t b = 0; b < n; ++b) {
        if (b == a || !present[b].valid) continue;
        if ((present[a].pos - present[b].pos).squared_norm() <= radius_sq)
          neighbors.push_back(isolated[b]);
      }
    }
    if (neighbors.empty()) {
      out[a] = isolated[a];
    } else {
      Var msg = graph_attention_aggregate(tape, bind, enc.a2a, neighbors, isolated[a]);
      out[a] = tape.add(isolated[a], msg);
    }
  }
  return out;
}

// Residual block plus linear head decoding 2*T_fut coordinates from
// [feature || one-hot(mode)]; shared by the proposal decoder, the
// factorized decoder, and the non-factorized baseline.
struct DecodeHead {
  int feat_dim = 0;
  int modes = 0;
  int t_fut = 0;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;  // residual block
  int wh = -1, bh = -1;                    // linear output layer
};

inline DecodeHead make_decode_head(ParamStore& store, const std::string& prefix, int feat_dim,
                                   int modes, int t_fut) {
  DecodeHead h;
  h.feat_dim = feat_dim;
  h.modes = modes;
  h.t_fut = t_fut;
  int d = feat_dim + modes;
  h.w1 = store.add(prefix + ".res.w1", d, d, d);
  h.b1 = store.add(prefix + ".res.b1", d, 1, d);
  h.w2 = store.add(prefix + ".res.w2", d, d, d);
  h.b2 = store.add(prefix + ".res.b2", d, 1, d);
  h.wh = store.add(prefix + ".out.w", 2 * t_fut, d, d);
  h.bh = store.add(prefix + ".out.b", 2 * t_fut, 1, d);
  return h;
}

// Coordinates are decoded as offsets from the agent's present position.
inline Var decode_head_forward(Tape& tape, ParamBinding& bind, const DecodeHead& head,
                               Var feature, int mode, Vec2 present_pos) {
  if (mode < 0 || mode >= head.modes)
    throw std::invalid_argument("decode_head_forward: mode out of range");
  Tensor2 onehot(head.modes, 1);
  onehot.v[mode] = 1.0;
  Var x = tape.concat_rows({feature, tape.constant(std::move(onehot))});
  Var r = tape.add(x, tape.add(tape.matmul(bind[head.w2],
                                           tape.relu(tape.add(tape.matmul(bind[head.w1], x),
                                                              bind[head.b1]))),
                               bind[head.b2]));
  Var offsets = tape.add(tape.matmul(bind[head.wh], r), bind[head.bh]);
  Tensor2 tile(2 * head.t_fut, 1);
  for (int t = 0; t < head.t_fut; ++t) {
    tile.v[2 * t] = present_pos.x;
    tile.v[2 * t + 1] = present_pos.y;
  }
  return tape.add(offsets, tape.constant(std::move(tile)));
}

// K_prop joint proposals; traj[k][agent] is a (2*T_fut x 1) coordinate
// column. Used as an auxiliary head that keeps encoder features
// future-aware; discarded at inference.
inline std::vector<std::vector<Var>> proposal_decode(Tape& tape, ParamBinding& bind,
                                                     const DecodeHead& head,
                                                     const std::vector<Var>& features,
                                                     const std::vector<AgentState>& present) {
  std::vector<std::vector<Var>> out(head.modes);
  for (int k = 0; k < head.modes; ++k) {
    out[k].resize(features.size());
    for (size_t a = 0; a < features.size(); ++a)
      out[k][a] = decode_head_forward(tape, bind, head, features[a], k, present[a].pos);
  }
  return out;
}

inline std::vector<AgentState> present_states(const Scene& scene) {
  std::vector<AgentState> out(scene.agents.size());
  for (const AgentTrack& a : scene.agents) out[a.agent_id] = a.present();
  return out;
}

}  // namespace dagmp
