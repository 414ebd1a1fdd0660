#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mccf {

// Sampling interval shared by every dataset and simulator in the toolkit.
inline constexpr double kDt = 0.1;

// Practical acceleration envelope applied to all models.
inline constexpr double kAccelMin = -10.0;
inline constexpr double kAccelMax = 5.0;

// Default bumper-to-bumper vehicle length when the data carries none.
inline constexpr double kDefaultVehicleLength = 5.0;

inline double clamp_accel(double a) {
  if (a < kAccelMin) return kAccelMin;
  if (a > kAccelMax) return kAccelMax;
  return a;
}

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Car-following state of a follower relative to its leader.
//   v  : follower speed (m/s)
//   dv : relative speed v - v_lead (m/s), positive when closing in
//   d  : bumper-to-bumper spacing (m)
struct CFState {
  double v = 0.0;
  double dv = 0.0;
  double d = 0.0;

  double leader_speed() const { return v - dv; }
};

struct TrajectoryPoint {
  double t = 0.0;    // seconds, multiples of 0.1
  double x_f = 0.0;  // follower position along lane (m)
  double v_f = 0.0;  // follower speed (m/s)
  double a_f = 0.0;  // follower acceleration (m/s^2)
  double x_l = 0.0;  // leader position (m)
  double v_l = 0.0;  // leader speed (m/s)
  double a_l = 0.0;  // leader acceleration (m/s^2)
};

// One car-following episode: time-aligned leader/follower series at 0.1 s.
struct TrajectoryPair {
  std::string pair_id;
  std::string interaction_type;  // free-text label, e.g. "HDV-HDV"
  std::vector<TrajectoryPoint> points;
  double length_avg = kDefaultVehicleLength;  // average vehicle length l (m)
  bool solo = false;  // leaderless trajectory awaiting ghost-leader augmentation

  // Time span covered by the points, (T-1)*dt.
  double duration() const {
    return points.size() < 2 ? 0.0 : points.back().t - points.front().t;
  }
};

struct Dataset {
  std::vector<TrajectoryPair> pairs;
  std::string split_tag;  // "train" | "test" | ""

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const auto& p : pairs) n += p.points.size();
    return n;
  }
};

inline CFState state_at(const TrajectoryPair& pair, std::size_t i) {
  const TrajectoryPoint& pt = pair.points[i];
  return CFState{pt.v_f, pt.v_f - pt.v_l, pt.x_l - pt.x_f - pair.length_avg};
}

// Per-point car-following states for a whole pair: d = x_l - x_f - l,
// dv = v_f - v_l.
inline std::vector<CFState> derive_states(const TrajectoryPair& pair) {
  std::vector<CFState> out;
  out.reserve(pair.points.size());
  for (std::size_t i = 0; i < pair.points.size(); ++i) out.push_back(state_at(pair, i));
  return out;
}

}  // namespace mccf
