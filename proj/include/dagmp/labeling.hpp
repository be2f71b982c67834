#pragma once

// Ground-truth pairwise interaction labels from future trajectories.
// The sparse heuristic scans all future timestep pairs within a time
// window for footprint collisions; the dense one uses a plain distance
// threshold of length_m + length_n over all timestep pairs. Direction is
// first-arrival at the conflict point.

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagmp/collision.hpp"
#include "dagmp/scene.hpp"

namespace dagmp {

enum class EdgeLabel { kNoInteraction = 0, kMInfluencesN = 1, kNInfluencesM = 2 };

inline const char* edge_label_name(EdgeLabel l) {
  switch (l) {
    case EdgeLabel::kNoInteraction: return "no_interaction";
    case EdgeLabel::kMInfluencesN: return "m_influences_n";
    case EdgeLabel::kNInfluencesM: return "n_influences_m";
  }
  throw std::invalid_argument("unknown edge label");
}

inline EdgeLabel edge_label_from_name(const std::string& s) {
  if (s == "no_interaction") return EdgeLabel::kNoInteraction;
  if (s == "m_influences_n") return EdgeLabel::kMInfluencesN;
  if (s == "n_influences_m") return EdgeLabel::kNInfluencesM;
  throw std::invalid_argument("unknown edge label: " + s);
}

struct InteractionGraph {
  struct Edge {
    int m = 0, n = 0;  // canonical pair, m < n
    EdgeLabel label = EdgeLabel::kNoInteraction;
    std::optional<std::array<double, 3>> probs;  // (none, m->n, n->m), sums to 1
  };
  int n_agents = 0;
  std::vector<Edge> edges;  // sorted by (m, n)

  const Edge* find(int m, int n) const {
    for (const Edge& e : edges)
      if (e.m == m && e.n == n) return &e;
    return nullptr;
  }

  void validate() const {
    for (const Edge& e : edges) {
      if (!(e.m < e.n) || e.m < 0 || e.n >= n_agents)
        throw std::invalid_argument("interaction graph: edge pair must satisfy 0 <= m < n < N");
      if (e.probs) {
        double s = 0.0;
        for (double p : *e.probs) {
          if (p < -1e-12) throw std::invalid_argument("interaction graph: negative probability");
          s += p;
        }
        if (std::abs(s - 1.0) > 1e-6)
          throw std::invalid_argument("interaction graph: probabilities must sum to 1");
      }
    }
  }
};

inline constexpr double kDefaultSparseEpsSeconds = 2.5;

// Timestep window floor(eps/dt); the tiny slack keeps exact multiples like
// 2.5/0.1 from landing one step short.
inline int interaction_window_steps(double eps_seconds, double dt) {
  if (eps_seconds < 0.0 || dt <= 0.0)
    throw std::invalid_argument("interaction window: need eps >= 0 and dt > 0");
  return static_cast<int>(std::floor(eps_seconds / dt + 1e-9));
}

namespace detail {

struct FirstCollision {
  int t_m = 0, t_n = 0;
};

// argmin over qualifying pairs of min{t_m, t_n}; ties by smaller
// max{t_m, t_n}, then smaller t_m.
inline bool better_pair(int tm, int tn, const FirstCollision& best) {
  int lo = std::min(tm, tn), blo = std::min(best.t_m, best.t_n);
  if (lo != blo) return lo < blo;
  int hi = std::max(tm, tn), bhi = std::max(best.t_m, best.t_n);
  if (hi != bhi) return hi < bhi;
  return tm < best.t_m;
}

inline EdgeLabel direction_from_pair(const FirstCollision& c, int id_m, int id_n) {
  if (c.t_m < c.t_n) return EdgeLabel::kMInfluencesN;
  if (c.t_n < c.t_m) return EdgeLabel::kNInfluencesM;
  // simultaneous arrival: the lower agent id is the influencer
  return id_m < id_n ? EdgeLabel::kMInfluencesN : EdgeLabel::kNInfluencesM;
}

}  // namespace detail

inline EdgeLabel label_pair_sparse(const AgentTrack& track_m, const AgentTrack& track_n,
                                   double eps_seconds, double dt) {
  if (!track_m.has_future() || !track_n.has_future())
    throw std::invalid_argument("label_pair_sparse: both futures required");
  int window = interaction_window_steps(eps_seconds, dt);
  Footprint fm = footprint_of(track_m), fn = footprint_of(track_n);
  int tm_count = static_cast<int>(track_m.future.size());
  int tn_count = static_cast<int>(track_n.future.size());

  bool found = false;
  detail::FirstCollision best;
  for (int tm = 0; tm < tm_count; ++tm) {
    const AgentState& sm = track_m.future[tm];
    if (!sm.valid) continue;
    int lo = std::max(0, tm - window), hi = std::min(tn_count - 1, tm + window);
    for (int tn = lo; tn <= hi; ++tn) {
      const AgentState& sn = track_n.future[tn];
      if (!sn.valid) continue;
      if (found && !detail::better_pair(tm, tn, best)) continue;
      if (poses_collide({sm.pos, sm.yaw}, fm, {sn.pos, sn.yaw}, fn)) {
        best = {tm, tn};
        found = true;
      }
    }
  }
  if (!found) return EdgeLabel::kNoInteraction;
  return detail::direction_from_pair(best, track_m.agent_id, track_n.agent_id);
}

inline EdgeLabel label_pair_dense(const AgentTrack& track_m, const AgentTrack& track_n) {
  if (!track_m.has_future() || !track_n.has_future())
    throw std::invalid_argument("label_pair_dense: both futures required");
  double threshold = track_m.length + track_n.length;
  double threshold_sq = threshold * threshold;

  bool found = false;
  detail::FirstCollision best;
  for (int tm = 0; tm < static_cast<int>(track_m.future.size()); ++tm) {
    const AgentState& sm = track_m.future[tm];
    if (!sm.valid) continue;
    for (int tn = 0; tn < static_cast<int>(track_n.future.size()); ++tn) {
      const AgentState& sn = track_n.future[tn];
      if (!sn.valid) continue;
      if (found && !detail::better_pair(tm, tn, best)) continue;
      if ((sm.pos - sn.pos).squared_norm() <= threshold_sq) {
        best = {tm, tn};
        found = true;
      }
    }
  }
  if (!found) return EdgeLabel::kNoInteraction;
  return detail::direction_from_pair(best, track_m.agent_id, track_n.agent_id);
}

enum class LabelHeuristic { kSparse, kDense };

// Labels every unordered pair of evaluated agents.
inline InteractionGraph build_ground_truth_graph(const Scene& scene, LabelHeuristic heuristic,
                                                 double eps_seconds = kDefaultSparseEpsSeconds) {
  scene.validate();
  InteractionGraph graph;
  graph.n_agents = scene.num_agents();
  std::vector<const AgentTrack*> by_id(scene.agents.size(), nullptr);
  for (const AgentTrack& a : scene.agents) by_id[a.agent_id] = &a;
  for (int m = 0; m < graph.n_agents; ++m) {
    if (!by_id[m]->evaluate) continue;
    for (int n = m + 1; n < graph.n_agents; ++n) {
      if (!by_id[n]->evaluate) continue;
      InteractionGraph::Edge edge;
      edge.m = m;
      edge.n = n;
      edge.label = heuristic == LabelHeuristic::kSparse
                       ? label_pair_sparse(*by_id[m], *by_id[n], eps_seconds, scene.dt)
                       : label_pair_dense(*by_id[m], *by_id[n]);
      graph.edges.push_back(edge);
    }
  }
  return graph;
}

// Agents incident to at least one directional edge.
inline std::set<int> interactive_agents(const InteractionGraph& graph) {
  std::set<int> out;
  for (const auto& e : graph.edges) {
    if (e.label == EdgeLabel::kNoInteraction) continue;
    out.insert(e.m);
    out.insert(e.n);
  }
  return out;
}

inline int count_directional_edges(const InteractionGraph& graph) {
  int c = 0;
  for (const auto& e : graph.edges)
    if (e.label != EdgeLabel::kNoInteraction) ++c;
  return c;
}

inline nlohmann::json interaction_graph_to_json(const InteractionGraph& graph) {
  nlohmann::json j;
  j["n_agents"] = graph.n_agents;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges) {
    nlohmann::json je{{"m", e.m}, {"n", e.n}, {"label", edge_label_name(e.label)}};
    if (e.probs) je["probs"] = *e.probs;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j;
}

inline InteractionGraph interaction_graph_from_json(const nlohmann::json& j) {
  InteractionGraph graph;
  graph.n_agents = j.at("n_agents").get<int>();
  for (const auto& je : j.at("edges")) {
    InteractionGraph::Edge e;
    e.m = je.at("m").get<int>();
    e.n = je.at("n").get<int>();
    e.label = edge_label_from_name(je.at("label").get<std::string>());
    if (je.contains("probs")) {
      std::array<double, 3> p{};
      for (int i = 0; i < 3; ++i) p[i] = je.at("probs").at(i).get<double>();
      e.probs = p;
    }
    graph.edges.push_back(e);
  }
  graph.validate();
  return graph;
}

}  // namespace dagmp
