#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mccf/core.hpp"
#include "mccf/inference.hpp"
#include "mccf/state_space.hpp"

namespace mccf {

// Floor probability for transitions never observed in training.
inline constexpr double kUnseenTransitionProb = 1e-6;

struct RmseAccumulator {
  double sum_sq = 0.0;
  std::size_t n = 0;

  void add(double pred, double truth) {
    const double e = pred - truth;
    sum_sq += e * e;
    ++n;
  }

  double value() const { return pooled_rmse(sum_sq, n); }
};

inline double rmse_one_step(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("RMSE length mismatch");
  RmseAccumulator acc;
  for (std::size_t i = 0; i < pred.size(); ++i) acc.add(pred[i], truth[i]);
  return acc.value();
}

// Classical dynamic-programming DTW over the full cost matrix with steps
// {up, right, diagonal}, matched endpoints, squared-distance local cost
// and no warping window.
inline double dtw_distance(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("DTW of empty sequence");
  const std::size_t m = x.size();
  const std::size_t n = y.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= n; ++j) {
      const double diff = x[i - 1] - y[j - 1];
      cur[j] = diff * diff + std::min(prev[j], std::min(cur[j - 1], prev[j - 1]));
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

// Mean longitudinal displacement over the common horizon.
inline double average_displacement(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw std::invalid_argument("displacement length mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

inline double final_displacement(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw std::invalid_argument("displacement length mismatch");
  }
  return std::abs(pred.back() - truth.back());
}

// Minimum of `metric` over the non-crashing rollouts; empty when every
// rollout crashed (such pairs are excluded upstream).
inline std::optional<double> min_over_rollouts(
    const std::function<double(const Rollout&)>& metric, std::span<const Rollout> rollouts) {
  std::optional<double> best;
  for (const auto& r : rollouts) {
    if (r.crashed) continue;
    const double v = metric(r);
    if (!best || v < *best) best = v;
  }
  return best;
}

// Crash summary of one model's rollouts over the evaluation set.
struct ModelCrashes {
  std::string name;
  bool deterministic = false;
  std::vector<std::vector<bool>> crashed;  // [pair][rollout]
};

// Pairs eligible for open-loop comparison: no deterministic model crashes
// and every stochastic model has at least one crash-free rollout.
inline std::vector<std::size_t> fair_filter(std::size_t n_pairs,
                                            std::span<const ModelCrashes> models) {
  std::vector<std::size_t> eligible;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    bool ok = true;
    for (const auto& m : models) {
      if (p >= m.crashed.size()) throw std::invalid_argument("fair filter: missing rollouts");
      if (m.deterministic) {
        if (!m.crashed[p].empty() && m.crashed[p][0]) ok = false;
      } else {
        bool any_clean = false;
        for (bool c : m.crashed[p]) any_clean = any_clean || !c;
        if (!any_clean) ok = false;
      }
      if (!ok) break;
    }
    if (ok) eligible.push_back(p);
  }
  return eligible;
}

// Fraction of pairs whose single rollout ever reaches d <= 0.
inline double overlap_rate(std::span<const bool> crashed_per_pair) {
  if (crashed_per_pair.empty()) return 0.0;
  std::size_t crashes = 0;
  for (bool c : crashed_per_pair)
    if (c) ++crashes;
  return static_cast<double>(crashes) / static_cast<double>(crashed_per_pair.size());
}

inline std::optional<double> transition_prob(const TransitionMatrix& tm, std::uint64_t from,
                                             std::uint64_t to) {
  const TransitionRow* row = tm.row(from);
  if (!row) return std::nullopt;
  auto it = std::lower_bound(row->probs.begin(), row->probs.end(), to,
                             [](const auto& e, std::uint64_t key) { return e.first < key; });
  if (it == row->probs.end() || it->first != to) return std::nullopt;
  return it->second;
}

// exp(mean log P(C_{t+1}|C_t)) along the trajectory's cluster sequence;
// unseen transitions take the floor probability.
inline double geom_mean_prob(const ClusterModel& model, std::span<const CFState> trajectory) {
  if (trajectory.size() < 2) {
    throw std::invalid_argument("geometric mean probability needs at least 2 states");
  }
  double log_sum = 0.0;
  std::uint64_t prev = nearest_cluster(model, trajectory[0]);
  for (std::size_t t = 1; t < trajectory.size(); ++t) {
    const std::uint64_t cur = nearest_cluster(model, trajectory[t]);
    const auto p = transition_prob(model.transitions, prev, cur);
    log_sum += std::log(p.value_or(kUnseenTransitionProb));
    prev = cur;
  }
  return std::exp(log_sum / static_cast<double>(trajectory.size() - 1));
}

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of the first sample
  double p = 0.0;  // two-sided, normal approximation
};

// Rank-sum test with midrank ties; p from the normal approximation with
// tie and continuity corrections.
inline MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  if (n1 < 2 || n2 < 2) throw std::invalid_argument("Mann-Whitney needs at least 2 per sample");

  struct Entry {
    double value;
    bool from_a;
  };
  std::vector<Entry> all;
  all.reserve(n1 + n2);
  for (double x : a) all.push_back({x, true});
  for (double x : b) all.push_back({x, false});
  std::sort(all.begin(), all.end(), [](const Entry& l, const Entry& r) { return l.value < r.value; });

  const std::size_t n = all.size();
  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t across tie groups
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && all[j].value == all[i].value) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].from_a) rank_sum_a += midrank;
    }
    i = j;
  }

  const double fn1 = static_cast<double>(n1);
  const double fn2 = static_cast<double>(n2);
  const double fn = static_cast<double>(n);
  const double u1 = rank_sum_a - fn1 * (fn1 + 1.0) / 2.0;
  const double mu = fn1 * fn2 / 2.0;
  const double var = fn1 * fn2 / 12.0 * ((fn + 1.0) - tie_term / (fn * (fn - 1.0)));

  MannWhitneyResult result;
  result.u = u1;
  if (var <= 0.0) {
    result.p = 1.0;
    return result;
  }
  const double diff = u1 - mu;
  const double cc = diff > 0.0 ? -0.5 : (diff < 0.0 ? 0.5 : 0.0);
  const double z = (diff + cc) / std::sqrt(var);
  result.p = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  return result;
}

}  // namespace mccf
