#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mccf/core.hpp"
#include "mccf/rng.hpp"
#include "mccf/state_space.hpp"
#include "mccf/stats.hpp"

namespace mccf {

enum class InferenceMode { kDeterministic, kStochastic };

struct InferenceConfig {
  InferenceMode mode = InferenceMode::kStochastic;
  bool conservative = false;
  double ttc_tight = 3.0;   // s
  double ttc_loose = 10.0;  // s
  double pct_tight = 5.0;   // percentile of the pool under tight TTC
  double pct_loose = 30.0;
  std::uint64_t seed = 0;
  double dt = kDt;
};

struct Prediction {
  std::uint64_t next_cluster = 0;
  double accel = 0.0;
};

inline std::uint64_t pair_stream_key(const std::string& pair_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : pair_id) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

// Rows with no observed exits fall back to a self-loop.
inline std::uint64_t argmax_next(const ClusterModel& model, std::uint64_t current) {
  const TransitionRow* row = model.transitions.row(current);
  if (!row || row->probs.empty()) return current;
  std::uint64_t best = row->probs.front().first;
  double best_p = row->probs.front().second;
  for (const auto& [to, p] : row->probs) {
    if (p > best_p) {  // ties keep the earlier (lowest) id
      best_p = p;
      best = to;
    }
  }
  return best;
}

inline std::uint64_t sample_next(const ClusterModel& model, std::uint64_t current, Rng& rng) {
  const TransitionRow* row = model.transitions.row(current);
  if (!row || row->probs.empty()) return current;
  const double u = rng.uniform();
  double cum = 0.0;
  for (const auto& [to, p] : row->probs) {
    cum += p;
    if (u < cum) return to;
  }
  return row->probs.back().first;
}

}  // namespace detail

// Most probable next cluster; acceleration is the mean of its pool.
inline Prediction predict_det(const ClusterModel& model, const CFState& s) {
  const std::uint64_t current = nearest_cluster(model, s);
  const std::uint64_t next = detail::argmax_next(model, current);
  const auto& pool = model.cluster(next).accel_samples;
  return {next, mean(pool)};
}

// Next cluster sampled from the transition row; acceleration drawn
// uniformly from the cluster's pool. With conservative mode on and the
// follower closing in (dv > 0), TTC = d/dv gates the pool to its bottom
// percentile: TTC < ttc_tight uses pct_tight, TTC < ttc_loose pct_loose.
inline Prediction predict_stoch(const ClusterModel& model, const CFState& s,
                                const InferenceConfig& cfg, Rng& rng) {
  const std::uint64_t current = nearest_cluster(model, s);
  const std::uint64_t next = detail::sample_next(model, current, rng);
  const auto& pool = model.cluster(next).accel_samples;  // ascending

  std::size_t upper = pool.size();  // one past the last eligible sample
  if (cfg.conservative && s.dv > 0.0) {
    const double ttc = s.d / s.dv;
    double pct = 100.0;
    if (ttc < cfg.ttc_tight) {
      pct = cfg.pct_tight;
    } else if (ttc < cfg.ttc_loose) {
      pct = cfg.pct_loose;
    }
    if (pct < 100.0) {
      const double threshold = quantile_sorted(pool, pct / 100.0);
      upper = static_cast<std::size_t>(
          std::upper_bound(pool.begin(), pool.end(), threshold) - pool.begin());
      if (upper == 0) upper = 1;  // the pool minimum always stays eligible
    }
  }
  const double accel = pool[static_cast<std::size_t>(rng.below(upper))];
  return {next, accel};
}

// v' = max(v + a*dt, 0); x' = x + (v + v')/2*dt; d' = x_l' - x' - l.
inline std::pair<CFState, double> kinematic_step(const CFState& s, double x_f, double accel,
                                                 double leader_x_next, double leader_v_next,
                                                 double length_avg, double dt = kDt) {
  const double v_next = std::max(s.v + accel * dt, 0.0);
  const double x_next = x_f + 0.5 * (s.v + v_next) * dt;
  const double d_next = leader_x_next - x_next - length_avg;
  return {CFState{v_next, v_next - leader_v_next, d_next}, x_next};
}

struct OneStepPrediction {
  double d = 0.0;  // predicted spacing at t+1
  double v = 0.0;  // predicted speed at t+1
  double a = 0.0;  // predicted acceleration at t
};

// Resets to the ground-truth state at every step; T-1 predictions for a
// T-step pair.
inline std::vector<OneStepPrediction> one_step_predict(const ClusterModel& model,
                                                       const TrajectoryPair& pair,
                                                       const InferenceConfig& cfg) {
  std::vector<OneStepPrediction> out;
  if (pair.points.size() < 2) return out;
  out.reserve(pair.points.size() - 1);
  Rng rng(derive_seed(cfg.seed, pair_stream_key(pair.pair_id)));
  for (std::size_t t = 0; t + 1 < pair.points.size(); ++t) {
    const CFState s = state_at(pair, t);
    const Prediction p = cfg.mode == InferenceMode::kDeterministic
                             ? predict_det(model, s)
                             : predict_stoch(model, s, cfg, rng);
    const auto& next_pt = pair.points[t + 1];
    const auto [s_next, x_next] = kinematic_step(s, pair.points[t].x_f, p.accel, next_pt.x_l,
                                                 next_pt.v_l, pair.length_avg, cfg.dt);
    (void)x_next;
    out.push_back({s_next.d, s_next.v, p.accel});
  }
  return out;
}

struct Rollout {
  std::vector<CFState> states;     // states[0] is the true initial state
  std::vector<double> positions;   // follower x per recorded step
  std::vector<double> speeds;
  std::vector<double> accels;      // applied acceleration per transition
  bool crashed = false;
  std::size_t crash_index = 0;  // step at which spacing first reached <= 0
};

// Recursive rollout against the ground-truth leader from the true initial
// follower state. Truncates and flags at the first d <= 0. Rollout k of K
// owns an independent stream derived from (seed, pair, k), so results are
// reproducible and order-independent.
inline Rollout open_loop_rollout_one(const ClusterModel& model, const TrajectoryPair& pair,
                                     const InferenceConfig& cfg, std::uint64_t rollout_index) {
  Rollout r;
  if (pair.points.empty()) return r;
  Rng rng(derive_seed(cfg.seed, pair_stream_key(pair.pair_id), rollout_index));
  CFState s = state_at(pair, 0);
  double x = pair.points[0].x_f;
  r.states.push_back(s);
  r.positions.push_back(x);
  r.speeds.push_back(s.v);
  for (std::size_t t = 0; t + 1 < pair.points.size(); ++t) {
    const Prediction p = cfg.mode == InferenceMode::kDeterministic
                             ? predict_det(model, s)
                             : predict_stoch(model, s, cfg, rng);
    const auto& next_pt = pair.points[t + 1];
    const auto [s_next, x_next] =
        kinematic_step(s, x, p.accel, next_pt.x_l, next_pt.v_l, pair.length_avg, cfg.dt);
    s = s_next;
    x = x_next;
    r.states.push_back(s);
    r.positions.push_back(x);
    r.speeds.push_back(s.v);
    r.accels.push_back(p.accel);
    if (s.d <= 0.0) {
      r.crashed = true;
      r.crash_index = t + 1;
      break;
    }
  }
  return r;
}

inline std::vector<Rollout> open_loop_rollout(const ClusterModel& model,
                                              const TrajectoryPair& pair,
                                              const InferenceConfig& cfg, std::size_t k_rollouts) {
  std::vector<Rollout> out;
  out.reserve(k_rollouts);
  for (std::size_t k = 0; k < k_rollouts; ++k) {
    out.push_back(open_loop_rollout_one(model, pair, cfg, k));
  }
  return out;
}

}  // namespace mccf
