#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive (enumeration, direct definitions) so they can vouch
// for the optimized library paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "mccf/core.hpp"
#include "mccf/kdtree.hpp"
#include "mccf/rng.hpp"

namespace oracle {

// DTW by explicit enumeration of every monotone warping path with steps
// {down, right, diagonal} and matched endpoints. Exponential; keep the
// sequences short (<= 8).
inline double dtw_brute_force(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  const std::size_t n = y.size();
  double best = std::numeric_limits<double>::infinity();
  struct Frame {
    std::size_t i, j;
    double cost;
  };
  std::vector<Frame> stack;
  auto local = [&](std::size_t i, std::size_t j) {
    const double diff = x[i] - y[j];
    return diff * diff;
  };
  stack.push_back({0, 0, local(0, 0)});
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.i == m - 1 && f.j == n - 1) {
      best = std::min(best, f.cost);
      continue;
    }
    if (f.i + 1 < m) stack.push_back({f.i + 1, f.j, f.cost + local(f.i + 1, f.j)});
    if (f.j + 1 < n) stack.push_back({f.i, f.j + 1, f.cost + local(f.i, f.j + 1)});
    if (f.i + 1 < m && f.j + 1 < n) {
      stack.push_back({f.i + 1, f.j + 1, f.cost + local(f.i + 1, f.j + 1)});
    }
  }
  return best;
}

// Linear-interpolation quantile written from the definition.
inline double quantile_type7(std::vector<double> sample, double p) {
  std::sort(sample.begin(), sample.end());
  const double h = p * (static_cast<double>(sample.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  return std::lerp(sample[lo], sample[hi], h - std::floor(h));
}

// Exhaustive nearest neighbor with the lowest-label tie rule.
inline mccf::KdTree3::Hit nearest_brute_force(const std::vector<mccf::Vec3>& points,
                                              const std::vector<std::uint64_t>& labels,
                                              const mccf::Vec3& query,
                                              std::uint64_t exclude = mccf::KdTree3::kNoExclude) {
  mccf::KdTree3::Hit best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] == exclude) continue;
    const double d = mccf::squared_distance(points[i], query);
    if (d < best.dist_sq || (d == best.dist_sq && labels[i] < best.label)) {
      best.dist_sq = d;
      best.label = labels[i];
    }
  }
  return best;
}

// Uniform random search with a fixed evaluation budget; the baseline any
// real optimizer has to beat.
inline double random_search_best(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<std::pair<double, double>>& bounds,
                                 std::size_t evaluations, std::uint64_t seed) {
  mccf::Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> x(bounds.size());
  for (std::size_t e = 0; e < evaluations; ++e) {
    for (std::size_t j = 0; j < bounds.size(); ++j) {
      x[j] = rng.uniform(bounds[j].first, bounds[j].second);
    }
    best = std::min(best, f(x));
  }
  return best;
}

// Car-following pair whose states hop between three fixed anchor states
// according to a known 3-state chain. Positions carry the spacing
// directly; the kinematic columns are not meant to be integrable.
struct ChainSpec {
  double transition[3][3] = {{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.25, 0.25, 0.5}};
  mccf::CFState anchors[3] = {
      mccf::CFState{4.0, -4.0, 8.0},
      mccf::CFState{10.0, 0.0, 22.0},
      mccf::CFState{16.0, 4.0, 38.0},
  };
  double accel_of_state[3] = {-1.0, 0.0, 1.0};
  double vehicle_length = 5.0;
};

struct ChainTrace {
  mccf::TrajectoryPair pair;
  std::vector<int> states;
};

inline ChainTrace chain_pair(const ChainSpec& spec, std::size_t steps, std::uint64_t seed) {
  mccf::Rng rng(seed);
  ChainTrace trace;
  trace.pair.pair_id = "chain";
  trace.pair.length_avg = spec.vehicle_length;
  int state = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    trace.states.push_back(state);
    const mccf::CFState& a = spec.anchors[state];
    mccf::TrajectoryPoint pt;
    pt.t = static_cast<double>(t) * mccf::kDt;
    pt.x_f = 0.0;
    pt.v_f = a.v;
    pt.a_f = spec.accel_of_state[state];
    pt.x_l = a.d + spec.vehicle_length;
    pt.v_l = a.v - a.dv;
    trace.pair.points.push_back(pt);

    const double u = rng.uniform();
    double cum = 0.0;
    int next = 2;
    for (int s = 0; s < 3; ++s) {
      cum += spec.transition[state][s];
      if (u < cum) {
        next = s;
        break;
      }
    }
    state = next;
  }
  return trace;
}

}  // namespace oracle
