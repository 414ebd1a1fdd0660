#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mccf/core.hpp"
#include "mccf/csv.hpp"
#include "mccf/rng.hpp"
#include "mccf/stats.hpp"

namespace mccf {

// Maps the trajectory CSV's column names onto the roles the toolkit needs.
// Required roles: pair_id, t, x_f, v_f, x_l, v_l. Leader cells may be left
// empty on every row of a pair to mark it as a solo (leaderless) trajectory.
struct ColumnMap {
  std::string pair_id = "pair_id";
  std::string t = "t";
  std::string x_f = "x_f";
  std::string v_f = "v_f";
  std::string x_l = "x_l";
  std::string v_l = "v_l";
  std::string a_f = "a_f";            // optional
  std::string a_l = "a_l";            // optional
  std::string length_f = "length_f";  // optional
  std::string length_l = "length_l";  // optional
  std::string interaction = "interaction_type";  // optional
};

namespace detail {

inline void finite_difference_accel(std::vector<double>& accel, const std::vector<double>& speed) {
  const std::size_t n = speed.size();
  accel.resize(n);
  if (n == 1) {
    accel[0] = 0.0;
    return;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) accel[i] = (speed[i + 1] - speed[i]) / kDt;
  accel[n - 1] = accel[n - 2];
}

}  // namespace detail

// Reads a trajectory CSV and groups rows into pairs sorted by time.
// Missing a_f/a_l columns are reconstructed with a forward finite
// difference of the corresponding speed (last point copies the previous).
inline Dataset parse_trajectory_csv(const std::string& path, const ColumnMap& schema = {}) {
  const csv::Table table = csv::read_file(path);

  auto require = [&](const std::string& name) {
    auto col = table.column(name);
    if (!col) throw ParseError(path + ": missing required column '" + name + "'");
    return *col;
  };
  const std::size_t c_id = require(schema.pair_id);
  const std::size_t c_t = require(schema.t);
  const std::size_t c_xf = require(schema.x_f);
  const std::size_t c_vf = require(schema.v_f);
  const std::size_t c_xl = require(schema.x_l);
  const std::size_t c_vl = require(schema.v_l);
  const auto c_af = table.column(schema.a_f);
  const auto c_al = table.column(schema.a_l);
  const auto c_lf = table.column(schema.length_f);
  const auto c_ll = table.column(schema.length_l);
  const auto c_ia = table.column(schema.interaction);

  struct Row {
    std::size_t line;
    TrajectoryPoint pt;
    bool leaderless;
    bool has_af, has_al;
    double len_f, len_l;
    std::string interaction;
  };
  std::map<std::string, std::vector<Row>> grouped;  // ordered for stable output

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    Row row{};
    row.line = line;
    row.pt.t = csv::parse_double(cells[c_t], path, line);
    row.pt.x_f = csv::parse_double(cells[c_xf], path, line);
    row.pt.v_f = csv::parse_double(cells[c_vf], path, line);
    row.leaderless = cells[c_xl].empty() && cells[c_vl].empty();
    if (!row.leaderless) {
      row.pt.x_l = csv::parse_double(cells[c_xl], path, line);
      row.pt.v_l = csv::parse_double(cells[c_vl], path, line);
    } else {
      row.pt.x_l = std::numeric_limits<double>::quiet_NaN();
      row.pt.v_l = std::numeric_limits<double>::quiet_NaN();
    }
    row.has_af = c_af && !cells[*c_af].empty();
    if (row.has_af) row.pt.a_f = csv::parse_double(cells[*c_af], path, line);
    row.has_al = c_al && !cells[*c_al].empty() && !row.leaderless;
    if (row.has_al) row.pt.a_l = csv::parse_double(cells[*c_al], path, line);
    row.len_f = c_lf && !cells[*c_lf].empty() ? csv::parse_double(cells[*c_lf], path, line)
                                              : std::numeric_limits<double>::quiet_NaN();
    row.len_l = c_ll && !cells[*c_ll].empty() ? csv::parse_double(cells[*c_ll], path, line)
                                              : std::numeric_limits<double>::quiet_NaN();
    if (c_ia) row.interaction = cells[*c_ia];
    if (row.pt.v_f < 0.0 || (!row.leaderless && row.pt.v_l < 0.0)) {
      throw ValidationError(path + ":" + std::to_string(line) + ": negative speed");
    }
    grouped[cells[c_id]].push_back(std::move(row));
  }

  Dataset ds;
  for (auto& [id, rows] : grouped) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.pt.t < b.pt.t; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double dt = rows[i].pt.t - rows[i - 1].pt.t;
      if (dt == 0.0) {
        throw ValidationError(path + ":" + std::to_string(rows[i].line) +
                              ": duplicate (pair_id, t) row in pair '" + id + "'");
      }
      if (std::abs(dt - kDt) > 1e-6) {
        throw ValidationError(path + ":" + std::to_string(rows[i].line) + ": pair '" + id +
                              "' has non-contiguous time steps (dt=" + std::to_string(dt) + ")");
      }
    }
    const bool solo = rows.front().leaderless;
    for (const auto& row : rows) {
      if (row.leaderless != solo) {
        throw ValidationError(path + ":" + std::to_string(row.line) + ": pair '" + id +
                              "' mixes leaderless and led rows");
      }
    }

    TrajectoryPair pair;
    pair.pair_id = id;
    pair.solo = solo;
    pair.interaction_type = rows.front().interaction;
    pair.points.reserve(rows.size());
    double len_sum = 0.0;
    std::size_t len_n = 0;
    for (const auto& row : rows) {
      pair.points.push_back(row.pt);
      const bool f_ok = !std::isnan(row.len_f);
      const bool l_ok = !std::isnan(row.len_l);
      if (f_ok || l_ok) {
        len_sum += f_ok && l_ok ? 0.5 * (row.len_f + row.len_l) : (f_ok ? row.len_f : row.len_l);
        ++len_n;
      }
    }
    pair.length_avg = len_n ? len_sum / static_cast<double>(len_n) : kDefaultVehicleLength;

    if (!rows.front().has_af) {
      std::vector<double> v(pair.points.size()), a;
      for (std::size_t i = 0; i < pair.points.size(); ++i) v[i] = pair.points[i].v_f;
      detail::finite_difference_accel(a, v);
      for (std::size_t i = 0; i < pair.points.size(); ++i) pair.points[i].a_f = a[i];
    }
    if (!solo && !rows.front().has_al) {
      std::vector<double> v(pair.points.size()), a;
      for (std::size_t i = 0; i < pair.points.size(); ++i) v[i] = pair.points[i].v_l;
      detail::finite_difference_accel(a, v);
      for (std::size_t i = 0; i < pair.points.size(); ++i) pair.points[i].a_l = a[i];
    }
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

struct PreprocessConfig {
  double min_duration = 10.0;  // seconds, pre-trim time span
  double max_spacing = 45.0;   // meters; 150 for freeway-extended models
  double min_speed = 3.0;      // m/s; max speed within the pair must exceed it
  double trim = 2.0;           // seconds removed from each end
};

// Applies the eligibility filters and the head/tail trim.
//
// Steps with a_f outside [-10, 5] m/s^2 are removed and the pair is split
// at the removals; every fragment is re-checked against the duration rule.
// Solo pairs skip the spacing filter (no leader yet). Filtering only; an
// empty result is allowed.
inline Dataset preprocess_pairs(const Dataset& ds, const PreprocessConfig& cfg = {}) {
  Dataset out;
  out.split_tag = ds.split_tag;
  const std::size_t trim_pts = static_cast<std::size_t>(std::llround(cfg.trim / kDt));

  for (const auto& pair : ds.pairs) {
    // Split into maximal runs of in-range accelerations.
    std::vector<std::pair<std::size_t, std::size_t>> segments;  // [begin, end)
    std::size_t begin = 0;
    bool open = false;
    for (std::size_t i = 0; i <= pair.points.size(); ++i) {
      const bool ok = i < pair.points.size() && pair.points[i].a_f >= kAccelMin &&
                      pair.points[i].a_f <= kAccelMax;
      if (ok && !open) {
        begin = i;
        open = true;
      } else if (!ok && open) {
        segments.emplace_back(begin, i);
        open = false;
      }
    }

    const bool was_split = segments.size() != 1 || segments[0].first != 0 ||
                           segments[0].second != pair.points.size();
    std::size_t fragment = 0;
    for (const auto& [seg_begin, seg_end] : segments) {
      TrajectoryPair sub;
      sub.pair_id = was_split ? pair.pair_id + "#" + std::to_string(fragment++) : pair.pair_id;
      sub.interaction_type = pair.interaction_type;
      sub.length_avg = pair.length_avg;
      sub.solo = pair.solo;
      sub.points.assign(pair.points.begin() + static_cast<std::ptrdiff_t>(seg_begin),
                        pair.points.begin() + static_cast<std::ptrdiff_t>(seg_end));

      if (sub.duration() < cfg.min_duration) continue;

      double max_speed = 0.0;
      bool spacing_ok = true;
      for (std::size_t i = 0; i < sub.points.size(); ++i) {
        const auto& pt = sub.points[i];
        max_speed = std::max(max_speed, pt.v_f);
        if (!sub.solo) {
          max_speed = std::max(max_speed, pt.v_l);
          const double d = pt.x_l - pt.x_f - sub.length_avg;
          if (!(d > 0.0) || d > cfg.max_spacing) {
            spacing_ok = false;
            break;
          }
        }
      }
      if (!spacing_ok || !(max_speed > cfg.min_speed)) continue;

      if (sub.points.size() > 2 * trim_pts) {
        sub.points.erase(sub.points.begin(),
                         sub.points.begin() + static_cast<std::ptrdiff_t>(trim_pts));
        sub.points.resize(sub.points.size() - trim_pts);
      } else {
        continue;
      }
      out.pairs.push_back(std::move(sub));
    }
  }
  return out;
}

// Position/speed column agreement, checked trapezoidally step by step.
// Returns human-readable warnings; disagreement is not an error.
inline std::vector<std::string> consistency_warnings(const TrajectoryPair& pair,
                                                     double tolerance = 0.01) {
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i + 1 < pair.points.size(); ++i) {
    const auto& a = pair.points[i];
    const auto& b = pair.points[i + 1];
    const double predicted = a.x_f + 0.5 * (a.v_f + b.v_f) * kDt;
    const double err = std::abs(b.x_f - predicted);
    if (err > tolerance) {
      warnings.push_back("pair '" + pair.pair_id + "' t=" + std::to_string(b.t) +
                         ": position/speed mismatch of " + std::to_string(err) + " m");
    }
  }
  return warnings;
}

// Deterministic shuffled split by pair_id. The id list is sorted before
// shuffling so the outcome is independent of input row order.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                                    std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  std::vector<std::string> ids;
  ids.reserve(ds.pairs.size());
  for (const auto& p : ds.pairs) ids.push_back(p.pair_id);
  {
    auto sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("duplicate pair_id in dataset");
    }
    ids = std::move(sorted);
  }
  Rng rng(derive_seed(seed, 0x5e17));
  shuffle(ids, rng);
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
  std::unordered_set<std::string> test_ids(ids.begin(),
                                           ids.begin() + static_cast<std::ptrdiff_t>(n_test));

  Dataset train, test;
  train.split_tag = "train";
  test.split_tag = "test";
  for (const auto& p : ds.pairs) {
    (test_ids.count(p.pair_id) ? test : train).pairs.push_back(p);
  }
  return {std::move(train), std::move(test)};
}

// Gives every solo pair a synthetic leader at dv = 0 and the requested
// spacing; non-solo pairs pass through untouched.
inline Dataset augment_solo(const Dataset& ds, double ghost_spacing) {
  Dataset out;
  out.split_tag = ds.split_tag;
  out.pairs.reserve(ds.pairs.size());
  for (const auto& pair : ds.pairs) {
    TrajectoryPair copy = pair;
    if (copy.solo) {
      for (auto& pt : copy.points) {
        pt.x_l = pt.x_f + copy.length_avg + ghost_spacing;
        pt.v_l = pt.v_f;
        pt.a_l = pt.a_f;
      }
      copy.solo = false;
    }
    out.pairs.push_back(std::move(copy));
  }
  return out;
}

struct DurationSummary {
  std::size_t pair_count = 0;
  double mean_s = 0.0;
  double std_s = 0.0;
  double max_s = 0.0;
  double min_s = 0.0;
};

inline DurationSummary summarize_durations(const Dataset& ds) {
  DurationSummary s;
  s.pair_count = ds.pairs.size();
  if (ds.pairs.empty()) return s;
  std::vector<double> durations;
  durations.reserve(ds.pairs.size());
  for (const auto& p : ds.pairs) durations.push_back(p.duration());
  s.mean_s = mean(durations);
  s.std_s = stdev(durations);
  s.max_s = *std::max_element(durations.begin(), durations.end());
  s.min_s = *std::min_element(durations.begin(), durations.end());
  return s;
}

}  // namespace mccf
