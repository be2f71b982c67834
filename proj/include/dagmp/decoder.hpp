#pragma once

// Factorized joint trajectory decoding over a directed acyclic interaction
// graph: source nodes decode marginally, later nodes condition on their
// parents' decoded (or teacher-forced) futures through an
// encode / aggregate / combine / decode chain, level by level. Also the
// non-factorized baseline that decodes every agent independently.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagmp/blocks.hpp"
#include "dagmp/digraph.hpp"
#include "dagmp/encoder.hpp"
#include "dagmp/graph_predictor.hpp"
#include "dagmp/scene.hpp"

namespace dagmp {

// K joint future modalities; trajectories[k][agent_id][t] in meters.
struct TrajectoryBundle {
  int K = 0;
  std::vector<std::vector<std::vector<Vec2>>> trajectories;

  int num_agents() const { return K > 0 ? static_cast<int>(trajectories[0].size()) : 0; }
  int t_fut() const {
    return num_agents() > 0 ? static_cast<int>(trajectories[0][0].size()) : 0;
  }

  bool all_finite() const {
    for (const auto& mode : trajectories)
      for (const auto& traj : mode)
        for (const Vec2& p : traj)
          if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
    return true;
  }
};

struct DecoderParams {
  TypeEmbedding type_emb;
  MlpParams f_type_dec;  // 2*emb -> H -> H
  MlpParams encode_mlp;  // 2*T_fut -> H -> H -> H, 3 layers
  AttentionParams agg;
  GruParams comb;  // aggregated message is the input, node feature the hidden state
  DecodeHead decode;
  int feat_dim = 0;
  int modes = 0;
  int t_fut = 0;
};

inline DecoderParams make_decoder(ParamStore& store, const std::string& prefix, int feat_dim,
                                  int modes, int t_fut, int emb_dim = kTypeEmbeddingDim) {
  DecoderParams p;
  p.feat_dim = feat_dim;
  p.modes = modes;
  p.t_fut = t_fut;
  p.type_emb = make_type_embedding(store, prefix, emb_dim);
  p.f_type_dec = make_mlp(store, prefix + ".f_type_dec",
                          MlpSpec::dense({2 * emb_dim, feat_dim, feat_dim}));
  p.encode_mlp = make_mlp(store, prefix + ".encode",
                          MlpSpec::dense({2 * t_fut, feat_dim, feat_dim, feat_dim}));
  p.agg = make_attention(store, prefix + ".agg", feat_dim, feat_dim);
  p.comb = make_gru(store, prefix + ".comb", feat_dim, feat_dim);
  p.decode = make_decode_head(store, prefix + ".decode", feat_dim, modes, t_fut);
  return p;
}

// Flattened (2*T_fut x 1) coordinate column for ENCODE and the losses.
inline Tensor2 flatten_trajectory(const std::vector<Vec2>& traj) {
  Tensor2 out(static_cast<int>(traj.size()) * 2, 1);
  for (size_t t = 0; t < traj.size(); ++t) {
    out.v[2 * t] = traj[t].x;
    out.v[2 * t + 1] = traj[t].y;
  }
  return out;
}

inline Tensor2 flatten_future(const AgentTrack& track) {
  Tensor2 out(static_cast<int>(track.future.size()) * 2, 1);
  for (size_t t = 0; t < track.future.size(); ++t) {
    out.v[2 * t] = track.future[t].pos.x;
    out.v[2 * t + 1] = track.future[t].pos.y;
  }
  return out;
}

// Converts a flattened coordinate column into the displacement sequence
// relative to the agent's present position, keeping ENCODE translation
// insensitive.
inline Var coords_to_displacements(Tape& tape, Var coords, Vec2 present_pos) {
  int rows = tape.val(coords).rows;
  Var first = tape.sub(tape.slice_rows(coords, 0, 2),
                       tape.constant(Tensor2::column({present_pos.x, present_pos.y})));
  if (rows == 2) return first;
  Var tail = tape.sub(tape.slice_rows(coords, 2, rows - 2), tape.slice_rows(coords, 0, rows - 2));
  return tape.concat_rows({first, tail});
}

// Per-(modality, node) call counters for verifying the scheduling contract.
struct DecodeStats {
  std::vector<std::vector<int>> decode_calls;  // [K][N]
  std::vector<std::vector<int>> comb_calls;

  void init(int k, int n) {
    decode_calls.assign(k, std::vector<int>(n, 0));
    comb_calls.assign(k, std::vector<int>(n, 0));
  }
};

// teacher, when given, supplies the futures that parent messages are
// encoded from instead of the decoder's own predictions; it carries either
// one trajectory set (K == 1, broadcast to every modality) or one per
// modality.
inline std::vector<std::vector<Var>> decode_factorized(
    Tape& tape, ParamBinding& bind, const DecoderParams& dec, const std::vector<Var>& features,
    const Dag& dag, const Scene& scene, const TrajectoryBundle* teacher = nullptr,
    DecodeStats* stats = nullptr) {
  int n_agents = static_cast<int>(features.size());
  if (dag.n_nodes != n_agents)
    throw std::invalid_argument("decode_factorized: dag does not match feature count");
  if (teacher && teacher->K != 1 && teacher->K != dec.modes)
    throw std::invalid_argument("decode_factorized: teacher must carry 1 or K modalities");
  dag.validate();

  std::vector<const AgentTrack*> by_id(scene.agents.size());
  for (const AgentTrack& a : scene.agents) by_id[a.agent_id] = &a;
  auto parents = dag.parents();
  std::vector<int> children_count(n_agents, 0);
  for (const auto& e : dag.edges) ++children_count[e.src];
  if (stats) stats->init(dec.modes, n_agents);

  std::vector<std::vector<Var>> out(dec.modes, std::vector<Var>(n_agents));
  for (int k = 0; k < dec.modes; ++k) {
    std::vector<Var> working = features;  // per-modality copy of the node features
    std::vector<Var> encoded(n_agents);   // e_m, filled once m is decoded

    for (const auto& level : dag.levels) {
      for (int node : level) {
        if (!parents[node].empty()) {
          std::vector<Var> messages;
          messages.reserve(parents[node].size());
          for (int parent : parents[node]) {
            Var a_mn = mlp_forward(
                tape, bind, dec.f_type_dec,
                tape.concat_rows({lookup_type(tape, bind, dec.type_emb, by_id[parent]->type),
                                  lookup_type(tape, bind, dec.type_emb, by_id[node]->type)}));
            messages.push_back(tape.add(encoded[parent], a_mn));
          }
          Var aggregated = graph_attention_aggregate(tape, bind, dec.agg, messages, working[node]);
          working[node] = gru_cell(tape, bind, dec.comb, aggregated, working[node]);
          if (stats) ++stats->comb_calls[k][node];
        }
        out[k][node] = decode_head_forward(tape, bind, dec.decode, working[node], k,
                                           by_id[node]->present().pos);
        if (stats) ++stats->decode_calls[k][node];
      }
      // encode futures for nodes whose children are still pending
      for (int node : level) {
        if (children_count[node] == 0) continue;
        Var future_coords;
        if (teacher) {
          const auto& traj = teacher->trajectories[teacher->K == 1 ? 0 : k][node];
          future_coords = tape.constant(flatten_trajectory(traj));
        } else {
          future_coords = out[k][node];
        }
        encoded[node] = mlp_forward(tape, bind, dec.encode_mlp,
                                    coords_to_displacements(tape, future_coords,
                                                            by_id[node]->present().pos));
      }
    }
  }
  return out;
}

// Baseline: every agent decoded independently per modality, no future
// conditioning. Coincides with decode_factorized on an edgeless DAG when
// the DECODE parameters are shared.
inline std::vector<std::vector<Var>> decode_nonfactorized(Tape& tape, ParamBinding& bind,
                                                          const DecoderParams& dec,
                                                          const std::vector<Var>& features,
                                                          const Scene& scene) {
  std::vector<const AgentTrack*> by_id(scene.agents.size());
  for (const AgentTrack& a : scene.agents) by_id[a.agent_id] = &a;
  std::vector<std::vector<Var>> out(dec.modes, std::vector<Var>(features.size()));
  for (int k = 0; k < dec.modes; ++k)
    for (size_t a = 0; a < features.size(); ++a)
      out[k][a] =
          decode_head_forward(tape, bind, dec.decode, features[a], k, by_id[a]->present().pos);
  return out;
}

inline TrajectoryBundle bundle_from_vars(const Tape& tape,
                                         const std::vector<std::vector<Var>>& traj_vars) {
  TrajectoryBundle bundle;
  bundle.K = static_cast<int>(traj_vars.size());
  bundle.trajectories.resize(traj_vars.size());
  for (size_t k = 0; k < traj_vars.size(); ++k) {
    bundle.trajectories[k].resize(traj_vars[k].size());
    for (size_t a = 0; a < traj_vars[k].size(); ++a) {
      const Tensor2& t = tape.val(traj_vars[k][a]);
      bundle.trajectories[k][a].resize(t.rows / 2);
      for (int s = 0; s < t.rows / 2; ++s)
        bundle.trajectories[k][a][s] = {t.v[2 * s], t.v[2 * s + 1]};
    }
  }
  return bundle;
}

inline TrajectoryBundle truth_bundle(const Scene& scene) {
  TrajectoryBundle bundle;
  bundle.K = 1;
  bundle.trajectories.resize(1);
  bundle.trajectories[0].resize(scene.agents.size());
  for (const AgentTrack& a : scene.agents) {
    auto& traj = bundle.trajectories[0][a.agent_id];
    traj.resize(a.future.size());
    for (size_t t = 0; t < a.future.size(); ++t) traj[t] = a.future[t].pos;
  }
  return bundle;
}

inline nlohmann::json bundle_to_json(const TrajectoryBundle& bundle) {
  nlohmann::json j;
  j["K"] = bundle.K;
  nlohmann::json agents = nlohmann::json::array();
  for (int a = 0; a < bundle.num_agents(); ++a) {
    nlohmann::json modes = nlohmann::json::array();
    for (int k = 0; k < bundle.K; ++k) {
      nlohmann::json traj = nlohmann::json::array();
      for (const Vec2& p : bundle.trajectories[k][a]) traj.push_back({p.x, p.y});
      modes.push_back(std::move(traj));
    }
    agents.push_back({{"agent_id", a}, {"modes", std::move(modes)}});
  }
  j["agents"] = std::move(agents);
  return j;
}

inline TrajectoryBundle bundle_from_json(const nlohmann::json& j) {
  TrajectoryBundle bundle;
  bundle.K = j.at("K").get<int>();
  bundle.trajectories.resize(bundle.K);
  size_t n_agents = j.at("agents").size();
  for (auto& mode : bundle.trajectories) mode.resize(n_agents);
  for (const auto& ja : j.at("agents")) {
    int id = ja.at("agent_id").get<int>();
    const auto& modes = ja.at("modes");
    for (int k = 0; k < bundle.K; ++k) {
      auto& traj = bundle.trajectories[k].at(id);
      for (const auto& jp : modes.at(k))
        traj.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
    }
  }
  return bundle;
}

}  // namespace dagmp
