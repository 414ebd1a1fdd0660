#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mccf/baselines.hpp"
#include "mccf/core.hpp"
#include "mccf/inference.hpp"
#include "mccf/rng.hpp"
#include "mccf/stats.hpp"
#include "mccf/trajdata.hpp"

namespace mccf {

struct DEConfig {
  std::size_t pop_size = 15;
  double mutation_lo = 0.5;  // F dithered per generation in [lo, hi]
  double mutation_hi = 1.0;
  double recombination = 0.7;
  std::size_t max_iter = 50;
  double tol = 0.01;
  std::uint64_t seed = 0;
};

struct ParamSpec {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

using Bounds = std::vector<ParamSpec>;

struct DEResult {
  std::vector<double> best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<double> history;  // best cost after init and after each generation
  std::size_t generations = 0;
  bool converged = false;
};

// best1bin with per-generation dithered F, binomial crossover with one
// guaranteed coordinate, Latin hypercube initialization, uniform resampling
// of out-of-bounds components, and deferred greedy selection (so objective
// evaluations may run in any order). Stops when
// std(costs) <= tol * |mean(costs)| or after max_iter generations.
inline DEResult differential_evolution(const std::function<double(const std::vector<double>&)>& objective,
                                       const Bounds& bounds, const DEConfig& cfg) {
  const std::size_t dim = bounds.size();
  const std::size_t pop_n = cfg.pop_size;
  if (dim == 0) throw std::invalid_argument("empty bounds");
  if (pop_n < 4) throw std::invalid_argument("population size must be at least 4");
  for (const auto& b : bounds) {
    if (!(b.lo < b.hi)) throw std::invalid_argument("invalid bound for " + b.name);
  }

  Rng rng(derive_seed(cfg.seed, 0xde));
  auto scale = [&](std::size_t j, double unit) { return bounds[j].lo + unit * (bounds[j].hi - bounds[j].lo); };

  // Latin hypercube: one sample per equal-probability slice per dimension.
  std::vector<std::vector<double>> pop(pop_n, std::vector<double>(dim));
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<std::size_t> perm(pop_n);
    for (std::size_t i = 0; i < pop_n; ++i) perm[i] = i;
    shuffle(perm, rng);
    for (std::size_t i = 0; i < pop_n; ++i) {
      const double unit = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(pop_n);
      pop[i][j] = scale(j, unit);
    }
  }

  auto safe_eval = [&](const std::vector<double>& x) {
    const double c = objective(x);
    return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
  };

  std::vector<double> costs(pop_n);
  for (std::size_t i = 0; i < pop_n; ++i) costs[i] = safe_eval(pop[i]);
  std::size_t best_idx = static_cast<std::size_t>(
      std::min_element(costs.begin(), costs.end()) - costs.begin());
  if (!std::isfinite(costs[best_idx])) {
    throw NumericalError("objective non-finite for the entire initial population");
  }

  DEResult result;
  result.history.push_back(costs[best_idx]);

  auto converged = [&]() {
    double m = 0.0;
    for (double c : costs) m += c;
    m /= static_cast<double>(pop_n);
    if (!std::isfinite(m)) return false;
    double var = 0.0;
    for (double c : costs) var += (c - m) * (c - m);
    const double sd = std::sqrt(var / static_cast<double>(pop_n));
    return sd <= cfg.tol * std::abs(m);
  };

  std::vector<std::vector<double>> trials(pop_n, std::vector<double>(dim));
  std::vector<double> trial_costs(pop_n);
  for (std::size_t gen = 0; gen < cfg.max_iter && !result.converged; ++gen) {
    const double f = rng.uniform(cfg.mutation_lo, cfg.mutation_hi);
    for (std::size_t i = 0; i < pop_n; ++i) {
      std::size_t r1 = static_cast<std::size_t>(rng.below(pop_n));
      while (r1 == i) r1 = static_cast<std::size_t>(rng.below(pop_n));
      std::size_t r2 = static_cast<std::size_t>(rng.below(pop_n));
      while (r2 == i || r2 == r1) r2 = static_cast<std::size_t>(rng.below(pop_n));

      const std::size_t j_rand = static_cast<std::size_t>(rng.below(dim));
      for (std::size_t j = 0; j < dim; ++j) {
        const bool cross = rng.uniform() < cfg.recombination || j == j_rand;
        double value = cross ? pop[best_idx][j] + f * (pop[r1][j] - pop[r2][j]) : pop[i][j];
        if (value < bounds[j].lo || value > bounds[j].hi) {
          value = scale(j, rng.uniform());
        }
        trials[i][j] = value;
      }
    }
    for (std::size_t i = 0; i < pop_n; ++i) trial_costs[i] = safe_eval(trials[i]);
    for (std::size_t i = 0; i < pop_n; ++i) {
      if (trial_costs[i] <= costs[i]) {
        pop[i] = trials[i];
        costs[i] = trial_costs[i];
        if (costs[i] < costs[best_idx]) best_idx = i;
      }
    }
    result.history.push_back(costs[best_idx]);
    result.generations = gen + 1;
    result.converged = converged();
  }

  result.best = pop[best_idx];
  result.best_cost = costs[best_idx];
  return result;
}

namespace detail {

// Open-loop follower simulation against the ground-truth leader. A crash
// (d <= 0) clamps the follower just behind the leader at the leader's
// speed and the run continues, so the objective stays finite.
inline std::vector<double> simulate_follower_speeds(const FollowerModel& model,
                                                    const TrajectoryPair& pair, Rng& rng) {
  const std::size_t n = pair.points.size();
  std::vector<double> speeds(n);
  if (n == 0) return speeds;
  double x = pair.points[0].x_f;
  CFState s = state_at(pair, 0);
  speeds[0] = s.v;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const double a = model.accel(s, pair.points[t].a_l, rng);
    const auto& next_pt = pair.points[t + 1];
    auto [s_next, x_next] =
        kinematic_step(s, x, a, next_pt.x_l, next_pt.v_l, pair.length_avg);
    if (s_next.d <= 0.0) {
      x_next = next_pt.x_l - pair.length_avg - 0.1;
      s_next = CFState{next_pt.v_l, 0.0, 0.1};
    }
    s = s_next;
    x = x_next;
    speeds[t + 1] = s.v;
  }
  return speeds;
}

}  // namespace detail

// Pooled speed RMSE over every step of every pair:
// sqrt(sum_j sum_t (v_sim - v_true)^2 / sum_j T_j). Stochastic models are
// driven by per-pair streams fixed by noise_seed, making the objective a
// deterministic function of the parameters.
inline double rmse_v_objective(const FollowerModel& model, const Dataset& train,
                               std::uint64_t noise_seed = 0) {
  double sum_sq = 0.0;
  std::size_t steps = 0;
  for (const auto& pair : train.pairs) {
    Rng rng(derive_seed(noise_seed, pair_stream_key(pair.pair_id)));
    const std::vector<double> sim = detail::simulate_follower_speeds(model, pair, rng);
    for (std::size_t t = 0; t < sim.size(); ++t) {
      const double e = sim[t] - pair.points[t].v_f;
      sum_sq += e * e;
    }
    steps += sim.size();
  }
  return pooled_rmse(sum_sq, steps);
}

inline Bounds table_bounds(const std::string& name) {
  if (name == "idm") {
    return {{"v0", 5.0, 50.0}, {"T", 0.5, 3.0},  {"a_max", 0.1, 5.0},
            {"b", 0.1, 10.0},  {"s0", 0.5, 10.0}, {"delta", 1.0, 10.0}};
  }
  if (name == "sidm") {
    Bounds b = table_bounds("idm");
    b.push_back({"sigma", 0.01, 2.0});
    return b;
  }
  if (name == "vanarem") {
    return {{"k_a", 0.1, 5.0},     {"k_v", 0.1, 5.0},  {"k_d", 0.1, 5.0},
            {"t_system", 0.5, 3.0}, {"v_int", 5.0, 50.0}, {"r_min", 0.1, 5.0},
            {"d_p", 0.1, 10.0},     {"d_dec", 0.1, 10.0}, {"k", 0.1, 1.0}};
  }
  if (name == "fvdm-cth" || name == "fvdm-sigmoid") {
    return {{"K1", 0.1, 5.0}, {"K2", 0.1, 5.0}, {"s0", 0.1, 10.0},
            {"T", 0.5, 3.0},  {"V_max", 5.0, 50.0}};
  }
  if (name == "gipps") {
    return {{"a_max", 0.5, 3.0}, {"b", 1.0, 4.0},    {"tau", 0.1, 1.5}, {"theta", 0.3, 1.0},
            {"s0", 0.1, 10.0},   {"V_max", 5.0, 50.0}, {"b_hat", 2.0, 5.0}};
  }
  throw std::invalid_argument("unknown baseline model: " + name);
}

inline ParamMap params_from_vector(const Bounds& bounds, const std::vector<double>& x) {
  ParamMap m;
  for (std::size_t j = 0; j < bounds.size(); ++j) m[bounds[j].name] = x[j];
  return m;
}

struct CalibrationResult {
  std::string model;
  Bounds bounds;
  ParamMap params;
  double best_cost = 0.0;
  std::vector<double> history;
  double wall_time_s = 0.0;
};

// Wires the published bounds for the named model into DE over the pooled
// speed-RMSE objective. SIDM optimizes the IDM parameters and sigma
// jointly with a fixed per-evaluation noise seed.
inline CalibrationResult calibrate_model(const std::string& name, const Dataset& train,
                                         const DEConfig& cfg) {
  const Bounds bounds = table_bounds(name);
  const std::uint64_t noise_seed = derive_seed(cfg.seed, 0x51d3);
  const auto objective = [&](const std::vector<double>& x) {
    for (double v : x) {
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    }
    const auto model = make_baseline(name, params_from_vector(bounds, x));
    return rmse_v_objective(*model, train, noise_seed);
  };

  const auto start = std::chrono::steady_clock::now();
  const DEResult de = differential_evolution(objective, bounds, cfg);
  const auto stop = std::chrono::steady_clock::now();

  CalibrationResult result;
  result.model = name;
  result.bounds = bounds;
  result.params = params_from_vector(bounds, de.best);
  result.best_cost = de.best_cost;
  result.history = de.history;
  result.wall_time_s = std::chrono::duration<double>(stop - start).count();
  return result;
}

}  // namespace mccf
