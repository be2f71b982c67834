#pragma once

// Canonical scene representation: per-agent state tracks over a fixed
// past/future horizon, preprocessing into displacement sequences, rigid
// normalization, and the scene JSON format.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dagmp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

// Wraps into [-pi, pi).
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

inline Vec2 rotate(Vec2 p, double angle) {
  double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

// x' = R(angle) x + translation
struct RigidTransform {
  double angle = 0.0;
  Vec2 translation{};

  Vec2 apply_point(Vec2 p) const { return rotate(p, angle) + translation; }
  Vec2 apply_vector(Vec2 v) const { return rotate(v, angle); }
  double apply_yaw(double yaw) const { return normalize_angle(yaw + angle); }

  RigidTransform inverse() const {
    return {-angle, rotate(translation * -1.0, -angle)};
  }
};

enum class AgentType { kVehicle, kPedestrian, kBicyclist, kMotorcyclist, kBus };

inline const char* agent_type_name(AgentType t) {
  switch (t) {
    case AgentType::kVehicle: return "vehicle";
    case AgentType::kPedestrian: return "pedestrian";
    case AgentType::kBicyclist: return "bicyclist";
    case AgentType::kMotorcyclist: return "motorcyclist";
    case AgentType::kBus: return "bus";
  }
  throw std::invalid_argument("unknown agent type");
}

inline AgentType agent_type_from_name(const std::string& s) {
  if (s == "vehicle") return AgentType::kVehicle;
  if (s == "pedestrian") return AgentType::kPedestrian;
  if (s == "bicyclist") return AgentType::kBicyclist;
  if (s == "motorcyclist") return AgentType::kMotorcyclist;
  if (s == "bus") return AgentType::kBus;
  throw std::invalid_argument("unknown agent type: " + s);
}

inline constexpr int kNumAgentTypes = 5;

// Default footprint length/width in meters when a dataset provides none.
inline void default_footprint(AgentType t, double& length, double& width) {
  switch (t) {
    case AgentType::kVehicle: length = 4.0; width = 2.0; return;
    case AgentType::kPedestrian: length = 0.7; width = 0.7; return;
    case AgentType::kBicyclist: length = 2.0; width = 0.7; return;
    case AgentType::kMotorcyclist: length = 2.0; width = 0.7; return;
    case AgentType::kBus: length = 12.5; width = 2.5; return;
  }
  throw std::invalid_argument("unknown agent type");
}

struct AgentState {
  Vec2 pos{};
  Vec2 vel{};
  double yaw = 0.0;
  bool valid = true;

  bool operator==(const AgentState&) const = default;
};

struct AgentTrack {
  int agent_id = 0;
  AgentType type = AgentType::kVehicle;
  double length = 4.0;
  double width = 2.0;
  std::vector<AgentState> past;
  std::vector<AgentState> future;  // empty at pure inference
  bool evaluate = true;

  bool operator==(const AgentTrack&) const = default;

  bool has_future() const { return !future.empty(); }
  const AgentState& present() const { return past.back(); }
};

constexpr double kDefaultDt = 0.1;  // both reference datasets sample at 10 Hz

struct Scene {
  std::string scene_id;
  double dt = kDefaultDt;
  int t_obs = 0;
  int t_fut = 0;
  std::vector<AgentTrack> agents;

  bool operator==(const Scene&) const = default;

  int num_agents() const { return static_cast<int>(agents.size()); }

  void validate() const {
    if (t_obs <= 0 || t_fut < 0 || dt <= 0.0) throw std::invalid_argument("scene: bad horizon");
    std::vector<bool> seen(agents.size(), false);
    for (const AgentTrack& a : agents) {
      if (a.agent_id < 0 || a.agent_id >= num_agents() || seen[a.agent_id])
        throw std::invalid_argument("scene: agent ids must be unique and dense in [0, N)");
      seen[a.agent_id] = true;
      if (!(a.length >= a.width) || !(a.width > 0.0))
        throw std::invalid_argument("scene: footprint requires length >= width > 0");
      if (static_cast<int>(a.past.size()) != t_obs)
        throw std::invalid_argument("scene: past must have exactly T_obs states");
      if (a.has_future() && static_cast<int>(a.future.size()) != t_fut)
        throw std::invalid_argument("scene: future must have exactly T_fut states");
    }
  }

  const AgentTrack& agent(int id) const {
    for (const AgentTrack& a : agents)
      if (a.agent_id == id) return a;
    throw std::invalid_argument("scene: no agent " + std::to_string(id));
  }
};

// Per-timestep displacement/velocity/yaw with the validity flag passed
// through for the encoder's mask.
struct PreprocessedHistory {
  struct Entry {
    Vec2 disp{};
    Vec2 vel{};
    double yaw = 0.0;
    bool valid = true;
  };
  std::vector<std::vector<Entry>> agents;  // indexed by agent_id
};

// Displacement at t is pos(t) - pos(t-1) when both states are valid;
// t = 0 and any step with a missing endpoint get the zero vector.
inline PreprocessedHistory preprocess(const Scene& scene) {
  scene.validate();
  PreprocessedHistory out;
  out.agents.resize(scene.agents.size());
  for (const AgentTrack& track : scene.agents) {
    auto& entries = out.agents[track.agent_id];
    entries.resize(track.past.size());
    for (size_t t = 0; t < track.past.size(); ++t) {
      const AgentState& s = track.past[t];
      PreprocessedHistory::Entry e;
      e.vel = s.vel;
      e.yaw = s.yaw;
      e.valid = s.valid;
      if (t > 0 && s.valid && track.past[t - 1].valid) e.disp = s.pos - track.past[t - 1].pos;
      entries[t] = e;
    }
  }
  return out;
}

inline AgentState transform_state(const AgentState& s, const RigidTransform& tf) {
  AgentState out = s;
  out.pos = tf.apply_point(s.pos);
  out.vel = tf.apply_vector(s.vel);
  out.yaw = tf.apply_yaw(s.yaw);
  return out;
}

// Centers and rotates the scene so the anchor's present state sits at the
// origin with yaw 0. Returns the transform that was applied.
inline std::pair<Scene, RigidTransform> normalize(const Scene& scene, int anchor_agent) {
  scene.validate();
  const AgentTrack& anchor = scene.agent(anchor_agent);
  const AgentState& present = anchor.present();
  if (!present.valid)
    throw std::invalid_argument("normalize: anchor has no valid present state");

  RigidTransform tf;
  tf.angle = -present.yaw;
  tf.translation = rotate(present.pos * -1.0, -present.yaw);

  Scene out = scene;
  for (AgentTrack& track : out.agents) {
    for (AgentState& s : track.past) s = transform_state(s, tf);
    for (AgentState& s : track.future) s = transform_state(s, tf);
  }
  return {std::move(out), tf};
}

// Agent whose present position is closest to the centroid of all valid
// present positions; ties go to the lowest agent_id.
inline int pick_eval_anchor(const Scene& scene) {
  Vec2 centroid{};
  int count = 0;
  for (const AgentTrack& a : scene.agents) {
    if (!a.present().valid) continue;
    centroid = centroid + a.present().pos;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("pick_eval_anchor: no valid present states");
  centroid = centroid * (1.0 / count);

  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const AgentTrack& a : scene.agents) {
    if (!a.present().valid) continue;
    double d = (a.present().pos - centroid).squared_norm();
    if (d < best_d || (d == best_d && a.agent_id < best)) {
      best = a.agent_id;
      best_d = d;
    }
  }
  return best;
}

// Uniform over agents with a valid present state; used as training-time
// augmentation.
inline int pick_random_anchor(const Scene& scene, std::mt19937_64& rng) {
  std::vector<int> candidates;
  for (const AgentTrack& a : scene.agents)
    if (a.present().valid) candidates.push_back(a.agent_id);
  if (candidates.empty()) throw std::invalid_argument("pick_random_anchor: no valid present states");
  std::uniform_int_distribution<size_t> dist(0, candidates.size() - 1);
  return candidates[dist(rng)];
}

// ---------------------------------------------------------------------------
// JSON scene format. States carry explicit timestep indices; 0..T_obs-1 are
// past, T_obs..T_obs+T_fut-1 are future.

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["scene_id"] = scene.scene_id;
  j["dt"] = scene.dt;
  j["T_obs"] = scene.t_obs;
  j["T_fut"] = scene.t_fut;
  nlohmann::json agents = nlohmann::json::array();
  std::vector<const AgentTrack*> ordered;
  for (const AgentTrack& a : scene.agents) ordered.push_back(&a);
  std::sort(ordered.begin(), ordered.end(),
            [](const AgentTrack* a, const AgentTrack* b) { return a->agent_id < b->agent_id; });
  for (const AgentTrack* a : ordered) {
    nlohmann::json ja;
    ja["agent_id"] = a->agent_id;
    ja["agent_type"] = agent_type_name(a->type);
    ja["length"] = a->length;
    ja["width"] = a->width;
    ja["evaluate"] = a->evaluate;
    nlohmann::json states = nlohmann::json::array();
    auto emit = [&](const AgentState& s, int t) {
      states.push_back({{"t", t},
                        {"x", s.pos.x},
                        {"y", s.pos.y},
                        {"vx", s.vel.x},
                        {"vy", s.vel.y},
                        {"yaw", s.yaw},
                        {"valid", s.valid}});
    };
    for (size_t t = 0; t < a->past.size(); ++t) emit(a->past[t], static_cast<int>(t));
    for (size_t t = 0; t < a->future.size(); ++t)
      emit(a->future[t], scene.t_obs + static_cast<int>(t));
    ja["states"] = std::move(states);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  scene.scene_id = j.at("scene_id").get<std::string>();
  scene.dt = j.at("dt").get<double>();
  scene.t_obs = j.at("T_obs").get<int>();
  scene.t_fut = j.at("T_fut").get<int>();
  for (const auto& ja : j.at("agents")) {
    AgentTrack track;
    track.agent_id = ja.at("agent_id").get<int>();
    track.type = agent_type_from_name(ja.at("agent_type").get<std::string>());
    track.length = ja.at("length").get<double>();
    track.width = ja.at("width").get<double>();
    track.evaluate = ja.value("evaluate", true);
    int n_states = static_cast<int>(ja.at("states").size());
    bool with_future = n_states > scene.t_obs;
    track.past.resize(scene.t_obs);
    if (with_future) track.future.resize(scene.t_fut);
    for (const auto& js : ja.at("states")) {
      int t = js.at("t").get<int>();
      AgentState s;
      s.pos = {js.at("x").get<double>(), js.at("y").get<double>()};
      s.vel = {js.at("vx").get<double>(), js.at("vy").get<double>()};
      s.yaw = js.at("yaw").get<double>();
      s.valid = js.at("valid").get<bool>();
      if (t < 0 || t >= scene.t_obs + scene.t_fut)
        throw std::invalid_argument("scene json: state index out of range");
      if (t < scene.t_obs)
        track.past[t] = s;
      else if (with_future)
        track.future[t - scene.t_obs] = s;
    }
    scene.agents.push_back(std::move(track));
  }
  std::sort(scene.agents.begin(), scene.agents.end(),
            [](const AgentTrack& a, const AgentTrack& b) { return a.agent_id < b.agent_id; });
  scene.validate();
  return scene;
}

inline void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << scene_to_json(scene).dump(1) << "\n";
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return scene_from_json(j);
}

}  // namespace dagmp
