#pragma once

// Learned pairwise interaction classifier over encoded agent features and
// its conversion into a predicted directed acyclic interaction graph.

#include <string>
#include <utility>
#include <vector>

#include "dagmp/blocks.hpp"
#include "dagmp/digraph.hpp"
#include "dagmp/encoder.hpp"
#include "dagmp/labeling.hpp"
#include "dagmp/scene.hpp"

namespace dagmp {

inline constexpr int kTypeEmbeddingDim = 16;

struct TypeEmbedding {
  int table = -1;  // (kNumAgentTypes * dim) x 1
  int dim = kTypeEmbeddingDim;
};

inline TypeEmbedding make_type_embedding(ParamStore& store, const std::string& prefix,
                                         int dim = kTypeEmbeddingDim) {
  TypeEmbedding e;
  e.dim = dim;
  e.table = store.add(prefix + ".type_emb", kNumAgentTypes * dim, 1, dim);
  return e;
}

inline Var lookup_type(Tape& tape, ParamBinding& bind, const TypeEmbedding& emb, AgentType type) {
  return tape.slice_rows(bind[emb.table], static_cast<int>(type) * emb.dim, emb.dim);
}

struct PredictorParams {
  TypeEmbedding type_emb;
  MlpParams f_dist;  // 2 -> H -> H
  MlpParams f_type;  // 2*emb -> H -> H
  MlpParams f_edge;  // 4H -> H -> H
  MlpParams f_int;   // H -> H -> 3
  int feat_dim = 0;
};

inline PredictorParams make_predictor(ParamStore& store, const std::string& prefix, int feat_dim,
                                      int emb_dim = kTypeEmbeddingDim) {
  PredictorParams p;
  p.feat_dim = feat_dim;
  p.type_emb = make_type_embedding(store, prefix, emb_dim);
  p.f_dist = make_mlp(store, prefix + ".f_dist", MlpSpec::dense({2, feat_dim, feat_dim}));
  p.f_type = make_mlp(store, prefix + ".f_type", MlpSpec::dense({2 * emb_dim, feat_dim, feat_dim}));
  p.f_edge = make_mlp(store, prefix + ".f_edge", MlpSpec::dense({4 * feat_dim, feat_dim, feat_dim}));
  p.f_int = make_mlp(store, prefix + ".f_int", MlpSpec::dense({feat_dim, feat_dim, 3}));
  return p;
}

struct EdgeFeature {
  int m = 0, n = 0;  // canonical pair, m < n
  Var feature;
};

// h^e = f_edge([h_m || h_n || f_dist(p_m - p_n) || f_type([emb_m, emb_n])])
// with positions taken at the present timestep. One feature per unordered
// evaluated pair, in canonical orientation.
inline std::vector<EdgeFeature> edge_features(Tape& tape, ParamBinding& bind,
                                              const PredictorParams& p,
                                              const std::vector<Var>& features,
                                              const Scene& scene) {
  std::vector<const AgentTrack*> by_id(scene.agents.size());
  for (const AgentTrack& a : scene.agents) by_id[a.agent_id] = &a;

  std::vector<EdgeFeature> out;
  int n_agents = scene.num_agents();
  for (int m = 0; m < n_agents; ++m) {
    if (!by_id[m]->evaluate) continue;
    if (!by_id[m]->present().valid)
      throw std::invalid_argument("edge_features: evaluated agent lacks a present position");
    for (int n = m + 1; n < n_agents; ++n) {
      if (!by_id[n]->evaluate) continue;
      if (!by_id[n]->present().valid)
        throw std::invalid_argument("edge_features: evaluated agent lacks a present position");
      Vec2 delta = by_id[m]->present().pos - by_id[n]->present().pos;
      Var dist = mlp_forward(tape, bind, p.f_dist,
                             tape.constant(Tensor2::column({delta.x, delta.y})));
      Var types = mlp_forward(
          tape, bind, p.f_type,
          tape.concat_rows({lookup_type(tape, bind, p.type_emb, by_id[m]->type),
                            lookup_type(tape, bind, p.type_emb, by_id[n]->type)}));
      Var x = tape.concat_rows({features[m], features[n], dist, types});
      out.push_back({m, n, mlp_forward(tape, bind, p.f_edge, x)});
    }
  }
  return out;
}

struct EdgeProbs {
  int m = 0, n = 0;
  Var probs;  // 3x1 on the simplex: (none, m->n, n->m)
};

inline std::vector<EdgeProbs> classify_edges(Tape& tape, ParamBinding& bind,
                                             const PredictorParams& p,
                                             const std::vector<EdgeFeature>& edges) {
  std::vector<EdgeProbs> out;
  out.reserve(edges.size());
  for (const EdgeFeature& e : edges)
    out.push_back({e.m, e.n, tape.softmax(mlp_forward(tape, bind, p.f_int, e.feature))});
  return out;
}

inline InteractionGraph probs_to_interaction_graph(Tape& tape, const std::vector<EdgeProbs>& edges,
                                                   int n_agents) {
  InteractionGraph graph;
  graph.n_agents = n_agents;
  for (const EdgeProbs& e : edges) {
    InteractionGraph::Edge out;
    out.m = e.m;
    out.n = e.n;
    const Tensor2& p = tape.val(e.probs);
    out.probs = {p.v[0], p.v[1], p.v[2]};
    int argmax = 0;
    for (int c = 1; c < 3; ++c)
      if (p.v[c] > p.v[argmax]) argmax = c;
    out.label = static_cast<EdgeLabel>(argmax);
    graph.edges.push_back(out);
  }
  return graph;
}

}  // namespace dagmp
