#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mccf/baselines.hpp"
#include "mccf/core.hpp"
#include "mccf/inference.hpp"
#include "mccf/parallel.hpp"
#include "mccf/rng.hpp"
#include "mccf/stats.hpp"

namespace mccf {

// Forced acceleration schedule for one target vehicle: decelerate, hold
// speed (a = 0), accelerate, then hand control back to the model.
struct PerturbationProfile {
  double start_time = 50.0;    // s
  double decel = 1.0;          // magnitude, m/s^2
  double decel_duration = 5.0; // s
  double hold_duration = 10.0; // s
  double accel = 1.0;          // m/s^2
  double accel_duration = 5.0; // s
  std::size_t target_vehicle = 0;

  // Commanded acceleration at time t, if the profile is active then.
  std::optional<double> command(double t) const {
    if (t < start_time) return std::nullopt;
    double edge = start_time + decel_duration;
    if (t < edge) return -decel;
    edge += hold_duration;
    if (t < edge) return 0.0;
    edge += accel_duration;
    if (t < edge) return accel;
    return std::nullopt;
  }
};

struct RingConfig {
  double length = 3000.0;      // m
  std::size_t n_vehicles = 200;
  double v_start = 5.84;       // m/s
  double dt = kDt;
  double horizon = 300.0;      // s
  std::size_t trials = 20;
  double vehicle_length = kDefaultVehicleLength;
  std::optional<PerturbationProfile> perturbation;
  std::uint64_t seed = 0;
  std::size_t dump_trials = 0;      // how many leading trials to record
  std::size_t dump_sample_every = 5;  // record every n-th step
};

struct CollisionEvent {
  double t = 0.0;
  std::size_t follower = 0;
};

// Positions are kept as a fixed initial offset plus a running displacement.
// Gaps are base_gap[i] + (displacement[leader] - displacement[i]), which
// keeps the headway sum telescoping (bitwise L in the uniform case) and
// avoids wrap-around mod arithmetic entirely.
struct RingState {
  std::vector<double> base_offset;   // initial position of each vehicle
  std::vector<double> base_gap;      // initial center-to-center gap to the leader
  std::vector<double> displacement;  // distance travelled since t = 0
  std::vector<double> speeds;
  std::vector<double> applied_accels;  // effective accel from the last step
  std::vector<bool> in_contact;
  std::vector<CollisionEvent> collisions;
  double road_length = 0.0;
  double vehicle_length = 0.0;

  std::size_t leader_of(std::size_t i) const {
    return i + 1 == base_offset.size() ? 0 : i + 1;
  }

  // Center-to-center gap to the leader.
  double gap(std::size_t i) const {
    return base_gap[i] + (displacement[leader_of(i)] - displacement[i]);
  }

  // Bumper-to-bumper spacing.
  double spacing(std::size_t i) const { return gap(i) - vehicle_length; }

  // Wrapped position in [0, road_length).
  double position(std::size_t i) const {
    const double x = std::fmod(base_offset[i] + displacement[i], road_length);
    return x < 0.0 ? x + road_length : x;
  }

  double headway_sum() const {
    double s = 0.0;
    for (std::size_t i = 0; i < base_offset.size(); ++i) s += gap(i);
    return s;
  }
};

// Uniform placement at spacing L/N, everyone at v_start; vehicle i follows
// vehicle (i+1) mod N.
inline RingState init_ring(const RingConfig& cfg) {
  const std::size_t n = cfg.n_vehicles;
  if (n < 2) throw std::invalid_argument("ring needs at least 2 vehicles");
  if (static_cast<double>(n) * cfg.vehicle_length >= cfg.length) {
    throw std::invalid_argument("infeasible density: vehicles do not fit on the ring");
  }
  RingState st;
  st.road_length = cfg.length;
  st.vehicle_length = cfg.vehicle_length;
  const double headway = cfg.length / static_cast<double>(n);
  st.base_offset.resize(n);
  st.base_gap.resize(n);
  st.displacement.assign(n, 0.0);
  st.speeds.assign(n, cfg.v_start);
  st.applied_accels.assign(n, 0.0);
  st.in_contact.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    st.base_offset[i] = headway * static_cast<double>(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    st.base_gap[i] = i + 1 == n ? st.base_offset[0] + cfg.length - st.base_offset[n - 1]
                                : st.base_offset[i + 1] - st.base_offset[i];
  }
  return st;
}

// Collision bookkeeping after a synchronous step: one event per contiguous
// contact episode; on contact the follower is clamped 0.1 m behind the
// leader's rear at the leader's speed and the run continues.
inline std::vector<CollisionEvent> detect_collisions(RingState& st, double t) {
  std::vector<CollisionEvent> events;
  const std::size_t n = st.base_offset.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = st.spacing(i);
    if (d <= 0.0) {
      if (!st.in_contact[i]) {
        events.push_back({t, i});
        st.in_contact[i] = true;
      }
      const std::size_t li = st.leader_of(i);
      // gap = base_gap + (s_l - s_f) = vehicle_length + 0.1
      st.displacement[i] =
          st.displacement[li] + st.base_gap[i] - st.vehicle_length - 0.1;
      st.speeds[i] = st.speeds[li];
    } else {
      st.in_contact[i] = false;
    }
  }
  return events;
}

// One synchronous step from the pre-step snapshot at simulation time t.
// The perturbed vehicle obeys the active profile phase; everyone else
// queries the follower model. rngs holds one stream per vehicle.
inline void step_ring(RingState& st, const FollowerModel& model, const RingConfig& cfg, double t,
                      std::vector<Rng>& rngs) {
  const std::size_t n = st.base_offset.size();
  const std::vector<double> speeds_before = st.speeds;
  std::vector<double> commanded(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t li = st.leader_of(i);
    const CFState s{speeds_before[i], speeds_before[i] - speeds_before[li], st.spacing(i)};
    std::optional<double> forced;
    if (cfg.perturbation && cfg.perturbation->target_vehicle == i) {
      forced = cfg.perturbation->command(t);
    }
    commanded[i] = forced ? *forced : model.accel(s, st.applied_accels[li], rngs[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double v0 = speeds_before[i];
    const double v1 = std::max(v0 + commanded[i] * cfg.dt, 0.0);
    st.displacement[i] += 0.5 * (v0 + v1) * cfg.dt;
    st.speeds[i] = v1;
    st.applied_accels[i] = (v1 - v0) / cfg.dt;
  }
  const auto events = detect_collisions(st, t + cfg.dt);
  st.collisions.insert(st.collisions.end(), events.begin(), events.end());
}

struct RingTrajectoryRow {
  std::size_t trial = 0;
  double t = 0.0;
  std::size_t vehicle = 0;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
};

struct RingTrialResult {
  std::size_t collision_count = 0;
  std::vector<CollisionEvent> collisions;
  std::vector<RingTrajectoryRow> trajectory;  // only when dumped
  double max_speed_deviation = 0.0;           // vs v_start, over the whole run
};

inline RingTrialResult run_trial(const RingConfig& cfg, const FollowerModel& model,
                                 std::size_t trial_index, bool dump) {
  RingState st = init_ring(cfg);
  const std::uint64_t trial_seed = derive_seed(cfg.seed, 0x417, trial_index);
  std::vector<Rng> rngs;
  rngs.reserve(cfg.n_vehicles);
  for (std::size_t i = 0; i < cfg.n_vehicles; ++i) rngs.emplace_back(derive_seed(trial_seed, i));

  RingTrialResult result;
  const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
  const std::size_t sample_every = cfg.dump_sample_every == 0 ? 1 : cfg.dump_sample_every;
  auto record = [&](std::size_t step, double t) {
    if (!dump || step % sample_every != 0) return;
    for (std::size_t i = 0; i < cfg.n_vehicles; ++i) {
      result.trajectory.push_back(
          {trial_index, t, i, st.position(i), st.speeds[i], st.applied_accels[i]});
    }
  };
  record(0, 0.0);
  for (std::size_t step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * cfg.dt;
    step_ring(st, model, cfg, t, rngs);
    for (double v : st.speeds) {
      result.max_speed_deviation = std::max(result.max_speed_deviation, std::abs(v - cfg.v_start));
    }
    record(step + 1, static_cast<double>(step + 1) * cfg.dt);
  }
  result.collision_count = st.collisions.size();
  result.collisions = st.collisions;
  return result;
}

struct RingExperimentStats {
  std::vector<std::size_t> collisions_per_trial;
  double mean = 0.0;
  double stddev = 0.0;  // sample std (ddof = 1)
  std::vector<RingTrajectoryRow> dumped_trajectories;
};

// cfg.trials independent seeded trials; collision statistics plus the
// requested space-time trajectory dump.
inline RingExperimentStats run_experiment(const RingConfig& cfg, const FollowerModel& model,
                                          std::size_t threads = 1) {
  std::vector<RingTrialResult> results(cfg.trials);
  parallel_for(cfg.trials, threads, [&](std::size_t trial) {
    results[trial] = run_trial(cfg, model, trial, trial < cfg.dump_trials);
  });
  RingExperimentStats stats;
  std::vector<double> counts;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    stats.collisions_per_trial.push_back(results[trial].collision_count);
    counts.push_back(static_cast<double>(results[trial].collision_count));
    stats.dumped_trajectories.insert(stats.dumped_trajectories.end(),
                                     results[trial].trajectory.begin(),
                                     results[trial].trajectory.end());
  }
  stats.mean = mean(counts);
  stats.stddev = stdev(counts);
  return stats;
}

// Speed with zero IDM acceleration at uniform spacing L/N, by bisection on
// [0, v0] to 1e-9 m/s; the jam limit (d <= s0) returns 0.
inline double idm_equilibrium_speed(const IDMParams& p, std::size_t n_vehicles, double length,
                                    double vehicle_length = kDefaultVehicleLength) {
  const double d = length / static_cast<double>(n_vehicles) - vehicle_length;
  if (!(d > 0.0)) throw std::invalid_argument("no positive spacing at this density");
  auto residual = [&](double v) { return idm_accel(p, CFState{v, 0.0, d}); };
  double lo = 0.0;
  double hi = p.v0;
  if (residual(lo) <= 0.0) return 0.0;
  if (residual(hi) >= 0.0) throw NumericalError("no equilibrium root in [0, v0]");
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (residual(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// MC-CF as a ring follower: same inference configuration as the open-loop
// predictor; unseen states go through the nearest-cluster fallback.
class McDriver final : public FollowerModel {
 public:
  McDriver(const ClusterModel& model, InferenceConfig cfg) : model_(model), cfg_(cfg) {}

  double accel(const CFState& s, double /*a_lead*/, Rng& rng) const override {
    const Prediction p = cfg_.mode == InferenceMode::kDeterministic
                             ? predict_det(model_, s)
                             : predict_stoch(model_, s, cfg_, rng);
    return p.accel;
  }

  bool stochastic() const override { return cfg_.mode == InferenceMode::kStochastic; }
  std::string name() const override {
    return cfg_.mode == InferenceMode::kDeterministic ? "mccf-det" : "mccf-stoch";
  }

 private:
  const ClusterModel& model_;
  InferenceConfig cfg_;
};

}  // namespace mccf
