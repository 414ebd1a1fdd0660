#pragma once

#include <cstdint>
#include <vector>

#include "mccf/baselines.hpp"
#include "mccf/core.hpp"
#include "mccf/inference.hpp"
#include "mccf/rng.hpp"

namespace mccf {

// Open-loop rollout of a parametric follower against the ground-truth
// leader, with the same truncate-and-flag crash semantics as the MC-CF
// rollouts so open-loop metrics compare like for like.
inline Rollout baseline_rollout(const FollowerModel& model, const TrajectoryPair& pair,
                                std::uint64_t seed, std::uint64_t rollout_index = 0) {
  Rollout r;
  if (pair.points.empty()) return r;
  Rng rng(derive_seed(seed, pair_stream_key(pair.pair_id), rollout_index));
  CFState s = state_at(pair, 0);
  double x = pair.points[0].x_f;
  r.states.push_back(s);
  r.positions.push_back(x);
  r.speeds.push_back(s.v);
  for (std::size_t t = 0; t + 1 < pair.points.size(); ++t) {
    const double a = model.accel(s, pair.points[t].a_l, rng);
    const auto& next_pt = pair.points[t + 1];
    const auto [s_next, x_next] =
        kinematic_step(s, x, a, next_pt.x_l, next_pt.v_l, pair.length_avg);
    s = s_next;
    x = x_next;
    r.states.push_back(s);
    r.positions.push_back(x);
    r.speeds.push_back(s.v);
    r.accels.push_back(a);
    if (s.d <= 0.0) {
      r.crashed = true;
      r.crash_index = t + 1;
      break;
    }
  }
  return r;
}

inline std::vector<Rollout> baseline_rollouts(const FollowerModel& model,
                                              const TrajectoryPair& pair, std::uint64_t seed,
                                              std::size_t k_rollouts) {
  std::vector<Rollout> out;
  out.reserve(k_rollouts);
  for (std::size_t k = 0; k < k_rollouts; ++k) {
    out.push_back(baseline_rollout(model, pair, seed, k));
  }
  return out;
}

// One-step counterpart: reset to the ground-truth state every step.
inline std::vector<OneStepPrediction> one_step_predict_baseline(const FollowerModel& model,
                                                                const TrajectoryPair& pair,
                                                                std::uint64_t seed) {
  std::vector<OneStepPrediction> out;
  if (pair.points.size() < 2) return out;
  out.reserve(pair.points.size() - 1);
  Rng rng(derive_seed(seed, pair_stream_key(pair.pair_id)));
  for (std::size_t t = 0; t + 1 < pair.points.size(); ++t) {
    const CFState s = state_at(pair, t);
    const double a = model.accel(s, pair.points[t].a_l, rng);
    const auto& next_pt = pair.points[t + 1];
    const auto [s_next, x_next] =
        kinematic_step(s, pair.points[t].x_f, a, next_pt.x_l, next_pt.v_l, pair.length_avg);
    (void)x_next;
    out.push_back({s_next.d, s_next.v, a});
  }
  return out;
}

}  // namespace mccf
