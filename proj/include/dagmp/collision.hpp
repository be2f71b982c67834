#pragma once

// Circle-approximation collision test between two agent poses. Each agent
// is a row of circles along its heading axis; two agents collide when any
// circle-center pair is strictly closer than (w_i + w_j) / sqrt(3.8).

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dagmp/scene.hpp"

namespace dagmp {

struct Footprint {
  double length = 0.0;
  double width = 0.0;
  std::vector<double> circle_centers;  // longitudinal offsets, symmetric about 0
};

// max(1, round(length/width)) circles evenly spaced on
// [-(length-width)/2, +(length-width)/2].
inline Footprint make_footprint(double length, double width) {
  if (!(length >= width) || !(width > 0.0))
    throw std::invalid_argument("make_footprint: requires length >= width > 0");
  Footprint f;
  f.length = length;
  f.width = width;
  int count = std::max(1, static_cast<int>(std::llround(length / width)));
  double span = (length - width) / 2.0;
  if (count == 1) {
    f.circle_centers.push_back(0.0);
  } else {
    for (int i = 0; i < count; ++i)
      f.circle_centers.push_back(-span + 2.0 * span * i / (count - 1));
  }
  return f;
}

inline Footprint footprint_of(const AgentTrack& track) {
  return make_footprint(track.length, track.width);
}

inline double collision_threshold(double width_i, double width_j) {
  if (!(width_i > 0.0) || !(width_j > 0.0))
    throw std::invalid_argument("collision_threshold: widths must be positive");
  return (width_i + width_j) / std::sqrt(3.8);
}

struct Pose {
  Vec2 pos{};
  double yaw = 0.0;
};

inline bool poses_collide(const Pose& pose_i, const Footprint& foot_i, const Pose& pose_j,
                          const Footprint& foot_j) {
  if (foot_i.circle_centers.empty() || foot_j.circle_centers.empty())
    throw std::invalid_argument("poses_collide: footprint without circles");
  double eps = collision_threshold(foot_i.width, foot_j.width);
  double eps_sq = eps * eps;
  double ci = std::cos(pose_i.yaw), si = std::sin(pose_i.yaw);
  double cj = std::cos(pose_j.yaw), sj = std::sin(pose_j.yaw);
  for (double oi : foot_i.circle_centers) {
    Vec2 pi{pose_i.pos.x + ci * oi, pose_i.pos.y + si * oi};
    for (double oj : foot_j.circle_centers) {
      Vec2 pj{pose_j.pos.x + cj * oj, pose_j.pos.y + sj * oj};
      if ((pi - pj).squared_norm() < eps_sq) return true;  // strictly lower than threshold
    }
  }
  return false;
}

}  // namespace dagmp
