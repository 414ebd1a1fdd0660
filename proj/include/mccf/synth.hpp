#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mccf/baselines.hpp"
#include "mccf/core.hpp"
#include "mccf/csv.hpp"
#include "mccf/rng.hpp"

namespace mccf {

// Synthetic corpus knobs. The generated pairs stay inside the urban state
// ranges so they can feed training directly.
struct SynthConfig {
  std::size_t n_pairs = 100;
  std::size_t steps = 150;  // points per pair
  std::size_t n_solo = 0;   // leaderless pairs appended after the CF pairs
  double leader_v_lo = 0.0;
  double leader_v_hi = 8.0;
  double gain_spacing = 0.4;   // pull toward the desired spacing (1/s^2)
  double gain_closing = 0.6;   // damp the closing speed (1/s)
  double time_headway = 1.2;   // desired spacing = min_gap + T * v
  double min_gap = 2.0;
  double noise = 0.3;          // uniform acceleration noise amplitude
  double outlier_prob = 0.0;   // chance of an aggressive acceleration burst
  double outlier_accel = 4.0;
  double vehicle_length = kDefaultVehicleLength;
};

namespace detail {

// Leader speed profile: bounded random-walk acceleration with occasional
// harder braking, so the corpus covers stop-and-go as well as cruising.
inline std::vector<double> leader_speed_profile(const SynthConfig& cfg, std::size_t steps,
                                                Rng& rng) {
  std::vector<double> v(steps);
  double speed = rng.uniform(0.5 * cfg.leader_v_hi, cfg.leader_v_hi);
  double accel = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    v[t] = speed;
    if (t % 10 == 0) {
      accel = rng.uniform() < 0.15 ? rng.uniform(-2.0, -0.5) : rng.uniform(-1.0, 1.0);
    }
    speed = std::clamp(speed + accel * kDt, cfg.leader_v_lo, cfg.leader_v_hi);
  }
  return v;
}

}  // namespace detail

// Noisy linear-feedback driver following a wandering leader. With
// outlier_prob > 0 the driver occasionally floors the throttle, seeding
// the acceleration pools with aggressive samples.
inline Dataset generate_stochastic_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  Dataset ds;
  for (std::size_t p = 0; p < cfg.n_pairs; ++p) {
    Rng rng(derive_seed(seed, 0x57, p));
    TrajectoryPair pair;
    pair.pair_id = "synth-" + std::to_string(p);
    pair.interaction_type = "HDV-HDV";
    pair.length_avg = cfg.vehicle_length;

    const std::vector<double> v_lead = detail::leader_speed_profile(cfg, cfg.steps, rng);
    double x_l = 50.0;
    double v_f = std::clamp(v_lead[0] + rng.uniform(-1.0, 1.0), 0.0, cfg.leader_v_hi);
    double d = cfg.min_gap + cfg.time_headway * v_f + rng.uniform(0.0, 4.0);
    double x_f = x_l - d - cfg.vehicle_length;

    for (std::size_t t = 0; t < cfg.steps; ++t) {
      TrajectoryPoint pt;
      pt.t = static_cast<double>(t) * kDt;
      pt.x_f = x_f;
      pt.v_f = v_f;
      pt.x_l = x_l;
      pt.v_l = v_lead[t];

      double a;
      const double desired = cfg.min_gap + cfg.time_headway * v_f;
      const double dv = v_f - v_lead[t];
      if (cfg.outlier_prob > 0.0 && rng.uniform() < cfg.outlier_prob) {
        a = cfg.outlier_accel;
      } else {
        a = cfg.gain_spacing * (d - desired) - cfg.gain_closing * dv +
            rng.uniform(-cfg.noise, cfg.noise);
      }
      // Keep the generated data collision-free and inside the urban grid.
      const double v_next_probe = std::max(v_f + clamp_accel(a) * kDt, 0.0);
      const double d_probe = d + (v_lead[t] - 0.5 * (v_f + v_next_probe)) * kDt;
      if (d_probe < 0.5) a = -6.0;
      a = clamp_accel(a);
      pt.a_f = a;
      pair.points.push_back(pt);

      const double v_next = std::max(v_f + a * kDt, 0.0);
      const double v_l_next = t + 1 < cfg.steps ? v_lead[t + 1] : v_lead[t];
      x_f += 0.5 * (v_f + v_next) * kDt;
      x_l += 0.5 * (v_lead[t] + v_l_next) * kDt;
      v_f = v_next;
      d = x_l - x_f - cfg.vehicle_length;
    }
    ds.pairs.push_back(std::move(pair));
  }

  for (std::size_t p = 0; p < cfg.n_solo; ++p) {
    Rng rng(derive_seed(seed, 0x501, p));
    TrajectoryPair pair;
    pair.pair_id = "solo-" + std::to_string(p);
    pair.interaction_type = "solo";
    pair.length_avg = cfg.vehicle_length;
    pair.solo = true;
    double v = rng.uniform(2.0, cfg.leader_v_hi);
    double x = 0.0;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      TrajectoryPoint pt;
      pt.t = static_cast<double>(t) * kDt;
      pt.x_f = x;
      pt.v_f = v;
      double a = rng.uniform(-0.5, 0.8);
      if (v > cfg.leader_v_hi - 0.5) a = std::min(a, 0.0);
      a = clamp_accel(a);
      pt.a_f = a;
      pt.x_l = std::numeric_limits<double>::quiet_NaN();
      pt.v_l = std::numeric_limits<double>::quiet_NaN();
      pair.points.push_back(pt);
      const double v_next = std::max(v + a * kDt, 0.0);
      x += 0.5 * (v + v_next) * kDt;
      v = v_next;
    }
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

// Followers driven by a fixed IDM parameter set behind wandering leaders;
// ground truth for the calibration round-trip.
inline Dataset generate_idm_corpus(const IDMParams& params, const SynthConfig& cfg,
                                   std::uint64_t seed) {
  Dataset ds;
  for (std::size_t p = 0; p < cfg.n_pairs; ++p) {
    Rng rng(derive_seed(seed, 0x1d3, p));
    TrajectoryPair pair;
    pair.pair_id = "idm-" + std::to_string(p);
    pair.interaction_type = "HDV-HDV";
    pair.length_avg = cfg.vehicle_length;

    const std::vector<double> v_lead = detail::leader_speed_profile(cfg, cfg.steps, rng);
    double x_l = 60.0;
    double v_f = std::clamp(v_lead[0] + rng.uniform(-0.5, 0.5), 0.0, cfg.leader_v_hi);
    double d = params.s0 + params.T * v_f + rng.uniform(1.0, 6.0);
    double x_f = x_l - d - cfg.vehicle_length;

    for (std::size_t t = 0; t < cfg.steps; ++t) {
      TrajectoryPoint pt;
      pt.t = static_cast<double>(t) * kDt;
      pt.x_f = x_f;
      pt.v_f = v_f;
      pt.x_l = x_l;
      pt.v_l = v_lead[t];
      const double a = idm_accel(params, CFState{v_f, v_f - v_lead[t], d});
      pt.a_f = a;
      pair.points.push_back(pt);

      const double v_next = std::max(v_f + a * kDt, 0.0);
      const double v_l_next = t + 1 < cfg.steps ? v_lead[t + 1] : v_lead[t];
      x_f += 0.5 * (v_f + v_next) * kDt;
      x_l += 0.5 * (v_lead[t] + v_l_next) * kDt;
      v_f = v_next;
      d = x_l - x_f - cfg.vehicle_length;
    }
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

// Writes a dataset in the toolkit's ingestion schema. Solo pairs keep
// their leader columns empty.
inline void write_trajectory_csv(const Dataset& ds, const std::string& path) {
  csv::Writer w(path);
  w.header({"pair_id", "t", "x_f", "v_f", "x_l", "v_l", "a_f", "interaction_type"});
  auto& out = w.stream();
  char buf[64];
  auto num = [&](double x) {
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    out.write(buf, res.ptr - buf);
  };
  for (const auto& pair : ds.pairs) {
    for (const auto& pt : pair.points) {
      out << pair.pair_id << ',';
      num(pt.t);
      out << ',';
      num(pt.x_f);
      out << ',';
      num(pt.v_f);
      out << ',';
      if (!pair.solo) num(pt.x_l);
      out << ',';
      if (!pair.solo) num(pt.v_l);
      out << ',';
      num(pt.a_f);
      out << ',' << pair.interaction_type << '\n';
    }
  }
}

}  // namespace mccf
