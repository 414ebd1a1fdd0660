#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mccf/core.hpp"
#include "mccf/kdtree.hpp"
#include "mccf/stats.hpp"
#include "mccf/trajdata.hpp"

namespace mccf {

// Grid dimension order everywhere: [0] = dv, [1] = d, [2] = v.
inline constexpr std::size_t kDimDv = 0;
inline constexpr std::size_t kDimD = 1;
inline constexpr std::size_t kDimV = 2;

// Fallback when a dimension's sample distribution is degenerate (IQR = 0).
inline constexpr std::size_t kDegenerateBins = 32;

struct Range {
  double min = 0.0;
  double max = 0.0;
};

// Default ranges for urban trajectory data.
inline std::array<Range, 3> urban_ranges() {
  return {Range{-10.0, 10.0}, Range{0.0, 45.0}, Range{0.0, 20.0}};
}

// Extended ranges once high-speed freeway data is added.
inline std::array<Range, 3> freeway_ranges() {
  return {Range{-30.0, 30.0}, Range{0.0, 150.0}, Range{0.0, 40.0}};
}

// h = 2 * IQR / n^(1/3), with linear-interpolation (type 7) quantiles.
inline double fd_bin_width(std::vector<double> samples) {
  if (samples.size() < 2) throw NumericalError("bin width needs at least 2 samples");
  std::sort(samples.begin(), samples.end());
  const double spread = iqr_sorted(samples);
  if (spread <= 0.0) throw NumericalError("degenerate distribution: IQR is zero");
  return 2.0 * spread / std::cbrt(static_cast<double>(samples.size()));
}

// k = ceil((max - min) / h)
inline std::size_t fd_num_bins(const Range& range, double h) {
  if (!(range.max > range.min)) throw std::invalid_argument("empty range");
  if (!(h > 0.0)) throw std::invalid_argument("non-positive bin width");
  return static_cast<std::size_t>(std::ceil((range.max - range.min) / h));
}

using BinIndex = std::array<std::size_t, 3>;

struct StateGrid {
  std::array<Range, 3> ranges{};   // (dv, d, v)
  std::array<double, 3> widths{};  // h per dimension
  std::array<std::size_t, 3> counts{};

  double value(const CFState& s, std::size_t dim) const {
    switch (dim) {
      case kDimDv: return s.dv;
      case kDimD: return s.d;
      default: return s.v;
    }
  }

  // Half-open bins [lo, hi), top bin closed; out-of-range values clamp to
  // the boundary bin.
  BinIndex bin_of(const CFState& s) const {
    BinIndex idx{};
    for (std::size_t dim = 0; dim < 3; ++dim) {
      const double offset = (value(s, dim) - ranges[dim].min) / widths[dim];
      double b = std::floor(offset);
      if (b < 0.0) b = 0.0;
      const double top = static_cast<double>(counts[dim] - 1);
      if (b > top) b = top;
      idx[dim] = static_cast<std::size_t>(b);
    }
    return idx;
  }

  bool in_range(const CFState& s) const {
    for (std::size_t dim = 0; dim < 3; ++dim) {
      const double x = value(s, dim);
      if (x < ranges[dim].min || x > ranges[dim].max) return false;
    }
    return true;
  }

  std::uint64_t flatten(const BinIndex& idx) const {
    return (static_cast<std::uint64_t>(idx[kDimDv]) * counts[kDimD] + idx[kDimD]) * counts[kDimV] +
           idx[kDimV];
  }

  // Range-normalized coordinates; each dimension scaled to [0, 1] over its
  // configured range.
  Vec3 normalized(const CFState& s) const {
    Vec3 out{};
    for (std::size_t dim = 0; dim < 3; ++dim) {
      out[dim] = (value(s, dim) - ranges[dim].min) / (ranges[dim].max - ranges[dim].min);
    }
    return out;
  }
};

inline BinIndex discretize_state(const StateGrid& grid, const CFState& s) {
  return grid.bin_of(s);
}

// Per-dimension FD widths from the pooled training samples; uniform edges
// over the stated ranges. Counts samples outside the ranges if asked.
inline StateGrid build_grid(const Dataset& train, const std::array<Range, 3>& ranges,
                            std::size_t* out_of_range_count = nullptr) {
  StateGrid grid;
  grid.ranges = ranges;
  std::array<std::vector<double>, 3> pooled;
  for (const auto& pair : train.pairs) {
    for (std::size_t i = 0; i < pair.points.size(); ++i) {
      const CFState s = state_at(pair, i);
      pooled[kDimDv].push_back(s.dv);
      pooled[kDimD].push_back(s.d);
      pooled[kDimV].push_back(s.v);
    }
  }
  std::size_t clamped = 0;
  for (std::size_t dim = 0; dim < 3; ++dim) {
    for (double x : pooled[dim]) {
      if (x < ranges[dim].min || x > ranges[dim].max) ++clamped;
    }
    try {
      grid.widths[dim] = fd_bin_width(pooled[dim]);
      grid.counts[dim] = fd_num_bins(ranges[dim], grid.widths[dim]);
    } catch (const NumericalError&) {
      grid.counts[dim] = kDegenerateBins;
      grid.widths[dim] = (ranges[dim].max - ranges[dim].min) / static_cast<double>(kDegenerateBins);
    }
  }
  if (out_of_range_count) *out_of_range_count = clamped;
  return grid;
}

struct Cluster {
  std::uint64_t id = 0;
  std::uint64_t count = 0;   // raw sample count, preserved across IQR filtering
  CFState centroid{};        // sample mean, raw units
  Vec3 centroid_norm{};      // (centroid - range_min) / (range_max - range_min)
  std::vector<double> accel_samples;  // sorted; outlier-filtered after training
};

struct TransitionRow {
  // Both sorted by destination id.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;
  std::vector<std::pair<std::uint64_t, double>> probs;
};

struct TransitionMatrix {
  std::map<std::uint64_t, TransitionRow> rows;

  const TransitionRow* row(std::uint64_t from) const {
    auto it = rows.find(from);
    return it == rows.end() ? nullptr : &it->second;
  }

  std::uint64_t total_count() const {
    std::uint64_t n = 0;
    for (const auto& [from, row] : rows)
      for (const auto& [to, c] : row.counts) n += c;
    return n;
  }
};

struct ModelMeta {
  std::uint64_t dataset_hash = 0;
  std::uint64_t n_min = 10;
  std::uint64_t training_samples = 0;
  std::uint64_t occupied_bins = 0;
  std::uint64_t clamped_samples = 0;
};

struct ClusterModel {
  StateGrid grid;
  std::vector<Cluster> clusters;  // ascending id
  std::unordered_map<std::uint64_t, std::uint64_t> bin_to_cluster;  // flattened bin -> id
  TransitionMatrix transitions;
  ModelMeta meta;

  // Derived lookup structures; rebuilt by finalize(), never persisted.
  std::unordered_map<std::uint64_t, std::size_t> index_of;
  KdTree3 centroid_index;

  const Cluster& cluster(std::uint64_t id) const { return clusters[index_of.at(id)]; }

  double compression_ratio() const {
    return clusters.empty() ? 0.0
                            : static_cast<double>(meta.occupied_bins) /
                                  static_cast<double>(clusters.size());
  }

  void finalize() {
    index_of.clear();
    std::vector<Vec3> pts;
    std::vector<std::uint64_t> labels;
    pts.reserve(clusters.size());
    labels.reserve(clusters.size());
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      index_of[clusters[i].id] = i;
      pts.push_back(clusters[i].centroid_norm);
      labels.push_back(clusters[i].id);
    }
    centroid_index = KdTree3(std::move(pts), std::move(labels));
  }
};

inline std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t bits) {
    h ^= bits;
    h *= 0x100000001b3ULL;
  };
  auto mix_double = [&](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    mix(bits);
  };
  for (const auto& pair : ds.pairs) {
    for (char c : pair.pair_id) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    mix_double(pair.length_avg);
    for (const auto& pt : pair.points) {
      mix_double(pt.t);
      mix_double(pt.x_f);
      mix_double(pt.v_f);
      mix_double(pt.a_f);
      mix_double(pt.x_l);
      mix_double(pt.v_l);
    }
  }
  return h;
}

// Maps a state to its trained cluster; unseen bins fall back to the
// nearest centroid in normalized coordinates, ties to the lowest id.
inline std::uint64_t nearest_cluster(const ClusterModel& model, const CFState& s) {
  const auto hit = model.bin_to_cluster.find(model.grid.flatten(model.grid.bin_of(s)));
  if (hit != model.bin_to_cluster.end()) return hit->second;
  return model.centroid_index.nearest(model.grid.normalized(s)).label;
}

// Counts consecutive-step cluster transitions within each pair (never
// across pair boundaries) and row-normalizes.
inline TransitionMatrix estimate_transitions(const Dataset& train, const ClusterModel& model) {
  std::map<std::uint64_t, std::map<std::uint64_t, std::uint64_t>> counts;
  for (const auto& pair : train.pairs) {
    if (pair.points.empty()) continue;
    std::uint64_t prev = nearest_cluster(model, state_at(pair, 0));
    for (std::size_t i = 1; i < pair.points.size(); ++i) {
      const std::uint64_t cur = nearest_cluster(model, state_at(pair, i));
      ++counts[prev][cur];
      prev = cur;
    }
  }
  TransitionMatrix tm;
  for (const auto& [from, dests] : counts) {
    TransitionRow row;
    std::uint64_t total = 0;
    for (const auto& [to, c] : dests) total += c;
    row.counts.reserve(dests.size());
    row.probs.reserve(dests.size());
    for (const auto& [to, c] : dests) {
      row.counts.emplace_back(to, c);
      row.probs.emplace_back(to, static_cast<double>(c) / static_cast<double>(total));
    }
    tm.rows.emplace(from, std::move(row));
  }
  return tm;
}

namespace detail {

struct WorkingCluster {
  std::uint64_t id = 0;
  std::uint64_t count = 0;
  CFState centroid{};
  Vec3 centroid_norm{};
  std::vector<double> accels;
  std::vector<std::uint64_t> bins;  // flattened bin keys mapped to this cluster
  bool alive = true;
};

}  // namespace detail

// Spatially constrained state clustering. Every occupied bin starts as a
// cluster; sparse clusters (count < n_min) are iteratively merged into
// their nearest neighbor in normalized centroid space, smallest source
// first, skipping any merge whose source or destination was already
// consumed in the same batch. Transition probabilities are estimated with
// the final map, and acceleration pools are outlier-filtered last.
inline ClusterModel train_clusters(const Dataset& train, const StateGrid& grid,
                                   std::uint64_t n_min) {
  if (n_min < 1) throw std::invalid_argument("n_min must be at least 1");

  // 1. Initialization: one cluster per occupied bin.
  struct BinAccum {
    std::uint64_t count = 0;
    double sum_dv = 0.0, sum_d = 0.0, sum_v = 0.0;
    std::vector<double> accels;
  };
  std::unordered_map<std::uint64_t, BinAccum> bins;
  std::uint64_t total_samples = 0;
  for (const auto& pair : train.pairs) {
    for (std::size_t i = 0; i < pair.points.size(); ++i) {
      const CFState s = state_at(pair, i);
      if (!std::isfinite(s.v) || !std::isfinite(s.dv) || !std::isfinite(s.d)) {
        throw TrainingError("pair '" + pair.pair_id +
                            "' has non-finite states; augment solo pairs before training");
      }
      BinAccum& acc = bins[grid.flatten(grid.bin_of(s))];
      ++acc.count;
      acc.sum_dv += s.dv;
      acc.sum_d += s.d;
      acc.sum_v += s.v;
      acc.accels.push_back(pair.points[i].a_f);
      ++total_samples;
    }
  }
  if (total_samples < n_min) {
    throw TrainingError("training set has " + std::to_string(total_samples) +
                        " samples, below the minimum cluster size " + std::to_string(n_min));
  }

  std::vector<std::uint64_t> keys;
  keys.reserve(bins.size());
  for (const auto& [key, acc] : bins) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  std::vector<detail::WorkingCluster> work;
  work.reserve(keys.size());
  std::unordered_map<std::uint64_t, std::size_t> slot;  // id -> index into work
  for (std::uint64_t next_id = 0; next_id < keys.size(); ++next_id) {
    BinAccum& acc = bins[keys[next_id]];
    detail::WorkingCluster c;
    c.id = next_id;
    c.count = acc.count;
    const double n = static_cast<double>(acc.count);
    c.centroid = CFState{acc.sum_v / n, acc.sum_dv / n, acc.sum_d / n};
    c.centroid_norm = grid.normalized(c.centroid);
    c.accels = std::move(acc.accels);
    c.bins.push_back(keys[next_id]);
    slot[c.id] = work.size();
    work.push_back(std::move(c));
  }

  // 2. Iterative merging.
  auto collect_sparse = [&]() {
    std::vector<std::size_t> sparse;
    for (std::size_t i = 0; i < work.size(); ++i)
      if (work[i].alive && work[i].count < n_min) sparse.push_back(i);
    return sparse;
  };

  std::vector<std::size_t> sparse = collect_sparse();
  while (!sparse.empty()) {
    std::vector<Vec3> pts;
    std::vector<std::uint64_t> labels;
    for (const auto& c : work) {
      if (!c.alive) continue;
      pts.push_back(c.centroid_norm);
      labels.push_back(c.id);
    }
    if (labels.size() <= 1) break;  // single-cluster collapse
    const KdTree3 tree(std::move(pts), std::move(labels));

    struct Merge {
      std::uint64_t src, dst;
      std::uint64_t src_count;
      double dist_sq;
    };
    std::vector<Merge> merges;
    merges.reserve(sparse.size());
    for (std::size_t i : sparse) {
      const auto hit = tree.nearest(work[i].centroid_norm, work[i].id);
      merges.push_back({work[i].id, hit.label, work[i].count, hit.dist_sq});
    }
    std::sort(merges.begin(), merges.end(), [](const Merge& a, const Merge& b) {
      if (a.src_count != b.src_count) return a.src_count < b.src_count;
      if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
      if (a.src != b.src) return a.src < b.src;
      return a.dst < b.dst;
    });

    std::set<std::uint64_t> consumed;
    for (const auto& m : merges) {
      if (consumed.count(m.src) || consumed.count(m.dst)) continue;
      detail::WorkingCluster& src = work[slot[m.src]];
      detail::WorkingCluster& dst = work[slot[m.dst]];
      const double n_src = static_cast<double>(src.count);
      const double n_dst = static_cast<double>(dst.count);
      const double n_new = n_src + n_dst;
      dst.centroid.v = (n_dst * dst.centroid.v + n_src * src.centroid.v) / n_new;
      dst.centroid.dv = (n_dst * dst.centroid.dv + n_src * src.centroid.dv) / n_new;
      dst.centroid.d = (n_dst * dst.centroid.d + n_src * src.centroid.d) / n_new;
      dst.centroid_norm = grid.normalized(dst.centroid);
      dst.count += src.count;
      dst.accels.insert(dst.accels.end(), src.accels.begin(), src.accels.end());
      dst.bins.insert(dst.bins.end(), src.bins.begin(), src.bins.end());
      src.alive = false;
      src.accels.clear();
      src.bins.clear();
      consumed.insert(m.src);
    }
    sparse = collect_sparse();
  }

  // 3. Assemble the model; IQR-filter pools; transitions last.
  ClusterModel model;
  model.grid = grid;
  model.meta.n_min = n_min;
  model.meta.training_samples = total_samples;
  model.meta.occupied_bins = keys.size();
  model.meta.dataset_hash = dataset_hash(train);
  std::size_t clamped = 0;
  for (const auto& pair : train.pairs) {
    for (std::size_t i = 0; i < pair.points.size(); ++i) {
      if (!grid.in_range(state_at(pair, i))) ++clamped;
    }
  }
  model.meta.clamped_samples = clamped;

  for (auto& c : work) {
    if (!c.alive) continue;
    Cluster out;
    out.id = c.id;
    out.count = c.count;
    out.centroid = c.centroid;
    out.centroid_norm = c.centroid_norm;
    out.accel_samples = iqr_filter(c.accels);
    std::sort(out.accel_samples.begin(), out.accel_samples.end());
    for (std::uint64_t bin : c.bins) model.bin_to_cluster[bin] = c.id;
    model.clusters.push_back(std::move(out));
  }
  std::sort(model.clusters.begin(), model.clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
  model.finalize();
  model.transitions = estimate_transitions(train, model);
  return model;
}

}  // namespace mccf
