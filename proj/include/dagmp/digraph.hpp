#pragma once

// Directed-graph machinery: elementary-cycle enumeration (Johnson's
// algorithm over Tarjan SCCs), dagification by repeatedly dropping the
// lowest-confidence cycle edge, and longest-path level scheduling.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "dagmp/labeling.hpp"

namespace dagmp {

struct DirectedEdge {
  int src = 0;
  int dst = 0;
  double conf = 1.0;

  bool operator==(const DirectedEdge&) const = default;
};

struct Digraph {
  int n = 0;
  std::vector<DirectedEdge> edges;

  void validate() const {
    for (const auto& e : edges) {
      if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
        throw std::invalid_argument("digraph: edge endpoint out of range");
      if (e.conf < 0.0 || e.conf > 1.0)
        throw std::invalid_argument("digraph: confidence must be in [0, 1]");
    }
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : edges) adj[e.src].push_back(e.dst);
    for (auto& row : adj) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return adj;
  }
};

namespace detail {

// Tarjan strongly connected components, iterative to keep deep graphs safe.
inline std::vector<std::vector<int>> strongly_connected_components(
    const std::vector<std::vector<int>>& adj) {
  int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> sccs;
  int counter = 0;

  struct Frame {
    int v;
    size_t next_child;
  };
  for (int start = 0; start < n; ++start) {
    if (index[start] != -1) continue;
    std::vector<Frame> frames{{start, 0}};
    index[start] = low[start] = counter++;
    stack.push_back(start);
    on_stack[start] = 1;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next_child < adj[f.v].size()) {
        int w = adj[f.v][f.next_child++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        int v = f.v;
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
        if (low[v] == index[v]) {
          std::vector<int> comp;
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp.push_back(w);
            if (w == v) break;
          }
          sccs.push_back(std::move(comp));
        }
      }
    }
  }
  return sccs;
}

}  // namespace detail

// Thrown when an enumeration exceeds its cycle cap.
struct CycleOverflow : std::runtime_error {
  CycleOverflow() : std::runtime_error("cycle enumeration exceeded cap") {}
};

inline constexpr size_t kCycleCap = 1000000;

// All elementary cycles, each rotated so its lowest node comes first, the
// list sorted lexicographically. Throws CycleOverflow past max_cycles.
inline std::vector<std::vector<int>> enumerate_cycles(const Digraph& graph,
                                                      size_t max_cycles = kCycleCap) {
  graph.validate();
  for (const auto& e : graph.edges)
    if (e.src == e.dst) throw std::invalid_argument("enumerate_cycles: self-loop present");

  int n = graph.n;
  auto full_adj = graph.adjacency();
  std::vector<std::vector<int>> cycles;

  // Johnson's algorithm: for each start vertex s (ascending), explore the
  // subgraph induced by {v >= s} restricted to s's SCC.
  std::vector<int> blocked(n, 0);
  std::vector<std::vector<int>> block_lists(n);
  std::vector<int> path;

  for (int s = 0; s < n; ++s) {
    // adjacency of the subgraph on vertices >= s
    std::vector<std::vector<int>> sub(n);
    for (int v = s; v < n; ++v)
      for (int w : full_adj[v])
        if (w >= s) sub[v].push_back(w);

    auto sccs = detail::strongly_connected_components(sub);
    const std::vector<int>* comp = nullptr;
    for (const auto& c : sccs)
      if (std::find(c.begin(), c.end(), s) != c.end()) {
        comp = &c;
        break;
      }
    if (!comp || comp->size() < 1) continue;
    std::vector<char> in_comp(n, 0);
    for (int v : *comp) in_comp[v] = 1;
    bool s_has_cycle_edges = false;
    for (int w : sub[s])
      if (in_comp[w]) s_has_cycle_edges = true;
    if (comp->size() == 1 && !s_has_cycle_edges) continue;

    for (int v : *comp) {
      blocked[v] = 0;
      block_lists[v].clear();
    }

    std::function<void(int)> unblock = [&](int v) {
      blocked[v] = 0;
      for (int w : block_lists[v])
        if (blocked[w]) unblock(w);
      block_lists[v].clear();
    };

    std::function<bool(int)> circuit = [&](int v) -> bool {
      bool found = false;
      path.push_back(v);
      blocked[v] = 1;
      for (int w : sub[v]) {
        if (!in_comp[w]) continue;
        if (w == s) {
          if (cycles.size() >= max_cycles) throw CycleOverflow();
          cycles.push_back(path);
          found = true;
        } else if (!blocked[w]) {
          if (circuit(w)) found = true;
        }
      }
      if (found) {
        unblock(v);
      } else {
        for (int w : sub[v]) {
          if (!in_comp[w]) continue;
          auto& bl = block_lists[w];
          if (std::find(bl.begin(), bl.end(), v) == bl.end()) bl.push_back(v);
        }
      }
      path.pop_back();
      return found;
    };

    circuit(s);
  }

  // Paths already start at their lowest node; canonical order is plain
  // lexicographic.
  std::sort(cycles.begin(), cycles.end());
  return cycles;
}

// Kahn topological sort; empty optional when a cycle exists.
inline std::optional<std::vector<int>> topological_order(const Digraph& graph) {
  std::vector<int> indegree(graph.n, 0);
  auto adj = graph.adjacency();
  for (int v = 0; v < graph.n; ++v)
    for (int w : adj[v]) ++indegree[w];
  std::vector<int> queue, order;
  for (int v = 0; v < graph.n; ++v)
    if (indegree[v] == 0) queue.push_back(v);
  for (size_t i = 0; i < queue.size(); ++i) {
    int v = queue[i];
    order.push_back(v);
    for (int w : adj[v])
      if (--indegree[w] == 0) queue.push_back(w);
  }
  if (static_cast<int>(order.size()) != graph.n) return std::nullopt;
  return order;
}

inline bool is_acyclic(const Digraph& graph) { return topological_order(graph).has_value(); }

// level(v) = 0 for parentless nodes, else 1 + max over parents.
inline std::vector<std::vector<int>> level_schedule(const Digraph& graph) {
  auto order = topological_order(graph);
  if (!order) throw std::invalid_argument("level_schedule: graph has a cycle");
  std::vector<int> level(graph.n, 0);
  std::vector<std::vector<int>> parents(graph.n);
  for (const auto& e : graph.edges) parents[e.dst].push_back(e.src);
  int max_level = 0;
  for (int v : *order) {
    for (int p : parents[v]) level[v] = std::max(level[v], level[p] + 1);
    max_level = std::max(max_level, level[v]);
  }
  std::vector<std::vector<int>> levels(graph.n == 0 ? 0 : max_level + 1);
  for (int v = 0; v < graph.n; ++v) levels[level[v]].push_back(v);
  return levels;
}

struct Dag {
  int n_nodes = 0;
  std::vector<DirectedEdge> edges;
  std::vector<std::vector<int>> levels;

  Digraph as_digraph() const { return Digraph{n_nodes, edges}; }

  std::vector<std::vector<int>> parents() const {
    std::vector<std::vector<int>> out(n_nodes);
    for (const auto& e : edges) out[e.dst].push_back(e.src);
    for (auto& row : out) std::sort(row.begin(), row.end());
    return out;
  }

  void validate() const {
    as_digraph().validate();
    if (!is_acyclic(as_digraph())) throw std::invalid_argument("dag: cycle present");
    std::vector<int> level_of(n_nodes, -1);
    for (size_t l = 0; l < levels.size(); ++l)
      for (int v : levels[l]) level_of.at(v) = static_cast<int>(l);
    for (int v = 0; v < n_nodes; ++v)
      if (level_of[v] < 0) throw std::invalid_argument("dag: node missing from levels");
    for (const auto& e : edges)
      if (!(level_of[e.src] < level_of[e.dst]))
        throw std::invalid_argument("dag: edge must go to a strictly higher level");
  }
};

inline Dag make_dag(const Digraph& graph) {
  Dag dag;
  dag.n_nodes = graph.n;
  dag.edges = graph.edges;
  dag.levels = level_schedule(graph);
  return dag;
}

inline Dag make_edgeless_dag(int n_nodes) { return make_dag(Digraph{n_nodes, {}}); }

namespace detail {

// Lowest-confidence edge among those on at least one current cycle; ties by
// lexicographically smallest (src, dst).
inline size_t pick_removal_edge(const Digraph& graph,
                                const std::vector<std::vector<int>>& cycles) {
  std::vector<char> on_cycle_adj;  // flattened n*n membership of cyclic edges
  int n = graph.n;
  on_cycle_adj.assign(static_cast<size_t>(n) * n, 0);
  for (const auto& cycle : cycles) {
    for (size_t i = 0; i < cycle.size(); ++i) {
      int u = cycle[i], v = cycle[(i + 1) % cycle.size()];
      on_cycle_adj[static_cast<size_t>(u) * n + v] = 1;
    }
  }
  size_t best = graph.edges.size();
  for (size_t i = 0; i < graph.edges.size(); ++i) {
    const auto& e = graph.edges[i];
    if (!on_cycle_adj[static_cast<size_t>(e.src) * n + e.dst]) continue;
    if (best == graph.edges.size()) {
      best = i;
      continue;
    }
    const auto& b = graph.edges[best];
    if (e.conf < b.conf || (e.conf == b.conf && std::pair(e.src, e.dst) < std::pair(b.src, b.dst)))
      best = i;
  }
  if (best == graph.edges.size())
    throw std::logic_error("dagify: cycles reported but no cyclic edge found");
  return best;
}

// Fallback for pathologically cyclic graphs: repeatedly drop the
// lowest-confidence DFS back edge until acyclic.
inline void dagify_by_back_edges(Digraph& graph) {
  while (!is_acyclic(graph)) {
    int n = graph.n;
    std::vector<std::vector<size_t>> out_edges(n);
    for (size_t i = 0; i < graph.edges.size(); ++i) out_edges[graph.edges[i].src].push_back(i);
    std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
    std::vector<size_t> back_edges;
    std::function<void(int)> dfs = [&](int v) {
      color[v] = 1;
      for (size_t ei : out_edges[v]) {
        int w = graph.edges[ei].dst;
        if (color[w] == 1)
          back_edges.push_back(ei);
        else if (color[w] == 0)
          dfs(w);
      }
      color[v] = 2;
    };
    for (int v = 0; v < n; ++v)
      if (color[v] == 0) dfs(v);
    if (back_edges.empty()) return;
    size_t best = back_edges[0];
    for (size_t ei : back_edges) {
      const auto &e = graph.edges[ei], &b = graph.edges[best];
      if (e.conf < b.conf ||
          (e.conf == b.conf && std::pair(e.src, e.dst) < std::pair(b.src, b.dst)))
        best = ei;
    }
    graph.edges.erase(graph.edges.begin() + static_cast<long>(best));
  }
}

}  // namespace detail

// While cycles remain, removes the single globally-lowest-confidence edge
// that participates in a cycle, then re-enumerates. removed_out, when
// given, receives the removals in order.
inline Dag dagify(const Digraph& input, std::vector<DirectedEdge>* removed_out = nullptr) {
  Digraph graph = input;
  graph.validate();
  while (true) {
    std::vector<std::vector<int>> cycles;
    try {
      cycles = enumerate_cycles(graph);
    } catch (const CycleOverflow&) {
      Digraph before = graph;
      detail::dagify_by_back_edges(graph);
      if (removed_out) {
        for (const auto& e : before.edges)
          if (std::find(graph.edges.begin(), graph.edges.end(), e) == graph.edges.end())
            removed_out->push_back(e);
      }
      break;
    }
    if (cycles.empty()) break;
    size_t idx = detail::pick_removal_edge(graph, cycles);
    if (removed_out) removed_out->push_back(graph.edges[idx]);
    graph.edges.erase(graph.edges.begin() + static_cast<long>(idx));
  }
  return make_dag(graph);
}

// Directed graph from per-pair class probabilities: argmax class per pair,
// ties broken in class order (none, m->n, n->m); directional winners add
// one edge with the winning probability as confidence.
inline Digraph graph_from_predictions(const InteractionGraph& graph) {
  Digraph out;
  out.n = graph.n_agents;
  for (const auto& e : graph.edges) {
    if (!e.probs) throw std::invalid_argument("graph_from_predictions: missing probabilities");
    const auto& p = *e.probs;
    double sum = 0.0;
    for (double x : p) {
      if (!(x >= -1e-12) || !std::isfinite(x))
        throw std::invalid_argument("graph_from_predictions: malformed probability vector");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("graph_from_predictions: probabilities must sum to 1");
    int argmax = 0;
    for (int c = 1; c < 3; ++c)
      if (p[c] > p[argmax]) argmax = c;
    if (argmax == 1)
      out.edges.push_back({e.m, e.n, p[1]});
    else if (argmax == 2)
      out.edges.push_back({e.n, e.m, p[2]});
  }
  return out;
}

inline nlohmann::json digraph_to_json(const Digraph& graph) {
  nlohmann::json j;
  j["n_nodes"] = graph.n;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges)
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"conf", e.conf}});
  j["edges"] = std::move(edges);
  return j;
}

inline nlohmann::json dag_to_json(const Dag& dag) { return digraph_to_json(dag.as_digraph()); }

inline Digraph digraph_from_json(const nlohmann::json& j) {
  Digraph graph;
  graph.n = j.at("n_nodes").get<int>();
  for (const auto& je : j.at("edges"))
    graph.edges.push_back(
        {je.at("src").get<int>(), je.at("dst").get<int>(), je.at("conf").get<double>()});
  graph.validate();
  return graph;
}

inline Dag dag_from_json(const nlohmann::json& j) {
  Digraph graph = digraph_from_json(j);
  return make_dag(graph);
}

}  // namespace dagmp
