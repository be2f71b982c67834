#pragma once

// Joint and interactive evaluation metrics: minFDE/minADE over K joint
// modalities, miss/collision rates, the constant-velocity baseline, and
// the interactive metrics filtered by the ground-truth sparse interaction
// graph and constant-velocity FDE.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagmp/collision.hpp"
#include "dagmp/decoder.hpp"
#include "dagmp/labeling.hpp"
#include "dagmp/scene.hpp"

namespace dagmp {

// Agents that count for metrics: flagged for evaluation with a ground-truth
// position at both the present and final timesteps.
inline std::vector<int> evaluated_agents(const Scene& scene) {
  std::vector<int> out;
  for (const AgentTrack& a : scene.agents) {
    if (!a.evaluate || !a.has_future()) continue;
    if (!a.present().valid || !a.future.back().valid) continue;
    out.push_back(a.agent_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline double endpoint_error(const TrajectoryBundle& bundle, int k, const AgentTrack& truth) {
  const auto& traj = bundle.trajectories[k][truth.agent_id];
  return (traj.back() - truth.future.back().pos).norm();
}

inline double average_error(const TrajectoryBundle& bundle, int k, const AgentTrack& truth) {
  const auto& traj = bundle.trajectories[k][truth.agent_id];
  double sum = 0.0;
  int count = 0;
  for (size_t t = 0; t < traj.size(); ++t) {
    if (!truth.future[t].valid) continue;
    sum += (traj[t] - truth.future[t].pos).norm();
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

}  // namespace detail

struct JointErrors {
  double min_fde = 0.0;
  double min_ade = 0.0;
  int best_k = 0;  // argmin scene FDE, ties to the lowest index
  std::vector<double> fde_per_mode;
  std::vector<double> ade_per_mode;
};

inline JointErrors joint_min_fde_ade(const TrajectoryBundle& bundle, const Scene& scene) {
  std::vector<int> agents = evaluated_agents(scene);
  if (agents.empty()) throw std::invalid_argument("joint_min_fde_ade: no evaluated agents");
  for (int id : agents)
    if (id >= bundle.num_agents())
      throw std::invalid_argument("joint_min_fde_ade: bundle does not cover evaluated agents");

  JointErrors out;
  out.fde_per_mode.resize(bundle.K);
  out.ade_per_mode.resize(bundle.K);
  for (int k = 0; k < bundle.K; ++k) {
    double fde = 0.0, ade = 0.0;
    for (int id : agents) {
      const AgentTrack& truth = scene.agent(id);
      fde += detail::endpoint_error(bundle, k, truth);
      ade += detail::average_error(bundle, k, truth);
    }
    out.fde_per_mode[k] = fde / agents.size();
    out.ade_per_mode[k] = ade / agents.size();
  }
  out.best_k = 0;
  for (int k = 0; k < bundle.K; ++k) {
    if (out.fde_per_mode[k] < out.fde_per_mode[out.best_k]) out.best_k = k;
  }
  out.min_fde = *std::min_element(out.fde_per_mode.begin(), out.fde_per_mode.end());
  out.min_ade = *std::min_element(out.ade_per_mode.begin(), out.ade_per_mode.end());
  return out;
}

// Longitudinal threshold of the miss definition as a function of the
// ground-truth speed at the final timestep.
inline double miss_longitudinal_threshold(double v) {
  if (v <= 1.4) return 1.0;
  if (v <= 11.0) return 1.0 + (v - 1.4) / (11.0 - 1.4);
  return 2.0;
}

inline constexpr double kMissLateralThreshold = 1.0;

// Endpoint error decomposed in the ground-truth final-heading frame; a miss
// is |lat| > 1 m or |long| > eps_long(v).
inline bool miss(Vec2 pred_endpoint, Vec2 truth_endpoint, Vec2 truth_final_velocity,
                 double truth_final_yaw) {
  Vec2 err = pred_endpoint - truth_endpoint;
  double c = std::cos(truth_final_yaw), s = std::sin(truth_final_yaw);
  double longitudinal = err.x * c + err.y * s;
  double lateral = -err.x * s + err.y * c;
  double v = truth_final_velocity.norm();
  return std::abs(lateral) > kMissLateralThreshold ||
         std::abs(longitudinal) > miss_longitudinal_threshold(v);
}

inline bool agent_misses(const TrajectoryBundle& bundle, int k, const AgentTrack& truth) {
  const auto& traj = bundle.trajectories[k][truth.agent_id];
  const AgentState& fin = truth.future.back();
  return miss(traj.back(), fin.pos, fin.vel, fin.yaw);
}

// Minimum over modalities of the fraction of evaluated agents that miss.
inline double scene_miss_rate(const TrajectoryBundle& bundle, const Scene& scene) {
  std::vector<int> agents = evaluated_agents(scene);
  if (agents.empty()) throw std::invalid_argument("scene_miss_rate: no evaluated agents");
  double best = 1.0;
  for (int k = 0; k < bundle.K; ++k) {
    int misses = 0;
    for (int id : agents)
      if (agent_misses(bundle, k, scene.agent(id))) ++misses;
    best = std::min(best, static_cast<double>(misses) / agents.size());
  }
  return best;
}

// Headings for predicted coordinate trajectories: the direction of the
// step displacement, the final step reusing the previous value; steps
// shorter than 1e-6 m carry the last defined yaw, seeded with the present
// yaw.
inline std::vector<double> derive_headings(const std::vector<Vec2>& traj, double present_yaw) {
  std::vector<double> yaw(traj.size(), present_yaw);
  double last = present_yaw;
  for (size_t t = 0; t < traj.size(); ++t) {
    if (t + 1 < traj.size()) {
      Vec2 d = traj[t + 1] - traj[t];
      if (d.norm() >= 1e-6) last = std::atan2(d.y, d.x);
    }
    yaw[t] = last;
  }
  return yaw;
}

namespace detail {

// Pairs colliding at any shared timestep of modality k.
inline bool modality_has_collision(const TrajectoryBundle& bundle, int k, const Scene& scene,
                                   const std::vector<int>& agents,
                                   std::optional<int> exclude_agent) {
  std::vector<std::vector<double>> headings(scene.agents.size());
  std::vector<Footprint> feet(scene.agents.size());
  for (int id : agents) {
    const AgentTrack& a = scene.agent(id);
    headings[id] = derive_headings(bundle.trajectories[k][id], a.present().yaw);
    feet[id] = footprint_of(a);
  }
  for (size_t i = 0; i < agents.size(); ++i) {
    for (size_t j = i + 1; j < agents.size(); ++j) {
      int a = agents[i], b = agents[j];
      if (exclude_agent && (a == *exclude_agent || b == *exclude_agent)) continue;
      const auto& ta = bundle.trajectories[k][a];
      const auto& tb = bundle.trajectories[k][b];
      size_t steps = std::min(ta.size(), tb.size());
      for (size_t t = 0; t < steps; ++t) {
        if (poses_collide({ta[t], headings[a][t]}, feet[a], {tb[t], headings[b][t]}, feet[b]))
          return true;
      }
    }
  }
  return false;
}

}  // namespace detail

struct CollisionRates {
  double scr = 0.0;       // fraction of modalities with any collision
  double cross_col = 0.0; // same, not counting pairs that involve the ego
};

inline CollisionRates scene_collision_rate(const TrajectoryBundle& bundle, const Scene& scene,
                                           std::optional<int> ego_id = std::nullopt) {
  std::vector<int> agents = evaluated_agents(scene);
  CollisionRates out;
  if (bundle.K == 0) return out;
  int scr_hits = 0, cross_hits = 0;
  for (int k = 0; k < bundle.K; ++k) {
    if (detail::modality_has_collision(bundle, k, scene, agents, std::nullopt)) ++scr_hits;
    if (detail::modality_has_collision(bundle, k, scene, agents, ego_id)) ++cross_hits;
  }
  out.scr = static_cast<double>(scr_hits) / bundle.K;
  out.cross_col = static_cast<double>(cross_hits) / bundle.K;
  return out;
}

// SMR restricted to modalities without non-ego collisions; 1 when no
// modality qualifies.
inline double conditional_miss_rate(const TrajectoryBundle& bundle, const Scene& scene,
                                    std::optional<int> ego_id = std::nullopt) {
  std::vector<int> agents = evaluated_agents(scene);
  if (agents.empty()) throw std::invalid_argument("conditional_miss_rate: no evaluated agents");
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < bundle.K; ++k) {
    if (detail::modality_has_collision(bundle, k, scene, agents, ego_id)) continue;
    int misses = 0;
    for (int id : agents)
      if (agent_misses(bundle, k, scene.agent(id))) ++misses;
    best = std::min(best, static_cast<double>(misses) / agents.size());
  }
  return std::isfinite(best) ? best : 1.0;
}

// Unrolls the mean observed velocity from the present position.
inline std::vector<Vec2> constant_velocity_rollout(const AgentTrack& track, double dt, int t_fut) {
  Vec2 v_avg{};
  int count = 0;
  for (const AgentState& s : track.past) {
    if (!s.valid) continue;
    v_avg = v_avg + s.vel;
    ++count;
  }
  if (count == 0)
    throw std::invalid_argument("constant_velocity_rollout: no valid observed velocities");
  v_avg = v_avg * (1.0 / count);
  std::vector<Vec2> out(t_fut);
  for (int s = 1; s <= t_fut; ++s) out[s - 1] = track.present().pos + v_avg * (dt * s);
  return out;
}

inline double constant_velocity_fde(const AgentTrack& track, double dt) {
  auto rollout = constant_velocity_rollout(track, dt, static_cast<int>(track.future.size()));
  return (rollout.back() - track.future.back().pos).norm();
}

struct InteractiveErrors {
  double imin_fde = 0.0;
  double imin_ade = 0.0;
  int agent_count = 0;
};

// FDE/ADE of the globally best modality restricted to interactive agents,
// optionally dropping agents whose constant-velocity FDE is below
// d_filter. Empty optional when no agent qualifies.
inline std::optional<InteractiveErrors> interactive_metrics(const TrajectoryBundle& bundle,
                                                            const Scene& scene,
                                                            const InteractionGraph& gt_graph,
                                                            double d_filter) {
  std::vector<int> agents = evaluated_agents(scene);
  if (agents.empty()) return std::nullopt;
  std::set<int> interactive = interactive_agents(gt_graph);

  std::vector<int> qualifying;
  for (int id : agents) {
    if (!interactive.count(id)) continue;
    if (d_filter > 0.0 && constant_velocity_fde(scene.agent(id), scene.dt) < d_filter) continue;
    qualifying.push_back(id);
  }
  if (qualifying.empty()) return std::nullopt;

  int best_k = joint_min_fde_ade(bundle, scene).best_k;
  InteractiveErrors out;
  out.agent_count = static_cast<int>(qualifying.size());
  for (int id : qualifying) {
    const AgentTrack& truth = scene.agent(id);
    out.imin_fde += detail::endpoint_error(bundle, best_k, truth);
    out.imin_ade += detail::average_error(bundle, best_k, truth);
  }
  out.imin_fde /= qualifying.size();
  out.imin_ade /= qualifying.size();
  return out;
}

// ---------------------------------------------------------------------------
// Corpus aggregation.

struct SceneMetrics {
  std::string scene_id;
  double min_fde = 0.0, min_ade = 0.0;
  int best_k = 0;
  double smr = 0.0, scr = 0.0, cross_col = 0.0, cmr = 0.0;
  std::optional<InteractiveErrors> interactive[3];  // d = 0, 3, 5
};

inline constexpr std::array<double, 3> kInteractiveFilters{0.0, 3.0, 5.0};

inline SceneMetrics compute_scene_metrics(const TrajectoryBundle& bundle, const Scene& scene,
                                          const InteractionGraph& gt_sparse_graph,
                                          std::optional<int> ego_id = std::nullopt) {
  SceneMetrics m;
  m.scene_id = scene.scene_id;
  JointErrors je = joint_min_fde_ade(bundle, scene);
  m.min_fde = je.min_fde;
  m.min_ade = je.min_ade;
  m.best_k = je.best_k;
  m.smr = scene_miss_rate(bundle, scene);
  CollisionRates cr = scene_collision_rate(bundle, scene, ego_id);
  m.scr = cr.scr;
  m.cross_col = cr.cross_col;
  m.cmr = conditional_miss_rate(bundle, scene, ego_id);
  for (size_t i = 0; i < kInteractiveFilters.size(); ++i)
    m.interactive[i] = interactive_metrics(bundle, scene, gt_sparse_graph, kInteractiveFilters[i]);
  return m;
}

struct MetricReport {
  double min_fde = 0.0, min_ade = 0.0;
  double smr = 0.0, scr = 0.0, cross_col = 0.0, cmr = 0.0;
  double imin_fde[3] = {0.0, 0.0, 0.0};
  double imin_ade[3] = {0.0, 0.0, 0.0};
  int scene_count = 0;
  int interactive_scene_count[3] = {0, 0, 0};
  double decode_seconds = 0.0;  // total factorized-decode wall time

  std::vector<SceneMetrics> per_scene;
};

// Unweighted mean over scenes; scenes without qualifying interactive
// agents contribute nothing to the interactive means.
inline MetricReport aggregate_metrics(std::vector<SceneMetrics> scenes) {
  MetricReport r;
  r.scene_count = static_cast<int>(scenes.size());
  for (const SceneMetrics& m : scenes) {
    r.min_fde += m.min_fde;
    r.min_ade += m.min_ade;
    r.smr += m.smr;
    r.scr += m.scr;
    r.cross_col += m.cross_col;
    r.cmr += m.cmr;
    for (int i = 0; i < 3; ++i) {
      if (!m.interactive[i]) continue;
      r.imin_fde[i] += m.interactive[i]->imin_fde;
      r.imin_ade[i] += m.interactive[i]->imin_ade;
      ++r.interactive_scene_count[i];
    }
  }
  if (r.scene_count > 0) {
    r.min_fde /= r.scene_count;
    r.min_ade /= r.scene_count;
    r.smr /= r.scene_count;
    r.scr /= r.scene_count;
    r.cross_col /= r.scene_count;
    r.cmr /= r.scene_count;
  }
  for (int i = 0; i < 3; ++i) {
    if (r.interactive_scene_count[i] > 0) {
      r.imin_fde[i] /= r.interactive_scene_count[i];
      r.imin_ade[i] /= r.interactive_scene_count[i];
    }
  }
  r.per_scene = std::move(scenes);
  return r;
}

inline nlohmann::json metric_report_to_json(const MetricReport& r, bool include_scenes = false) {
  nlohmann::json j;
  j["minFDE"] = r.min_fde;
  j["minADE"] = r.min_ade;
  j["SMR"] = r.smr;
  j["SCR"] = r.scr;
  j["CrossCol"] = r.cross_col;
  j["CMR"] = r.cmr;
  j["iminFDE"] = r.imin_fde[0];
  j["iminADE"] = r.imin_ade[0];
  j["iminFDE_3"] = r.imin_fde[1];
  j["iminADE_3"] = r.imin_ade[1];
  j["iminFDE_5"] = r.imin_fde[2];
  j["iminADE_5"] = r.imin_ade[2];
  j["scenes"] = r.scene_count;
  j["interactive_scenes"] = {r.interactive_scene_count[0], r.interactive_scene_count[1],
                             r.interactive_scene_count[2]};
  j["decode_seconds"] = r.decode_seconds;
  if (include_scenes) {
    nlohmann::json scenes = nlohmann::json::array();
    for (const SceneMetrics& m : r.per_scene) {
      nlohmann::json js{{"scene_id", m.scene_id}, {"minFDE", m.min_fde}, {"minADE", m.min_ade},
                        {"best_k", m.best_k},     {"SMR", m.smr},        {"SCR", m.scr},
                        {"CrossCol", m.cross_col}, {"CMR", m.cmr}};
      scenes.push_back(std::move(js));
    }
    j["per_scene"] = std::move(scenes);
  }
  return j;
}

}  // namespace dagmp
