#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "mccf/core.hpp"
#include "mccf/rng.hpp"

namespace mccf {

struct IDMParams {
  double v0 = 30.0;     // desired speed (m/s)
  double T = 1.5;       // desired time headway (s)
  double a_max = 1.5;   // maximum acceleration (m/s^2)
  double b = 2.0;       // comfortable deceleration (m/s^2)
  double s0 = 2.0;      // minimum gap (m)
  double delta = 4.0;   // acceleration exponent
};

struct SIDMParams {
  IDMParams idm;
  double sigma = 0.3;  // noise strength (m/s^2)
};

struct VanAremParams {
  double k_a = 1.0;       // leader-acceleration gain
  double k_v = 0.58;      // relative-speed gain (1/s)
  double k_d = 0.1;       // spacing gain (1/s^2)
  double t_system = 1.0;  // system time headway (s)
  double v_int = 30.0;    // intended speed (m/s)
  double r_min = 2.0;     // minimum spacing (m)
  double d_p = 3.0;       // leader deceleration capability (m/s^2)
  double d_dec = 3.0;     // follower deceleration capability (m/s^2)
  double k = 0.3;         // intended-speed gain
};

enum class FVDMProfile { kConstantTimeHeadway, kSigmoid };

struct FVDMParams {
  double K1 = 0.5;     // spacing gain (1/s^2)
  double K2 = 0.5;     // velocity gain (1/s)
  double s0 = 2.0;     // minimum spacing (m)
  double T = 1.5;      // desired time headway (s)
  double V_max = 30.0; // maximum speed (m/s)
  FVDMProfile profile = FVDMProfile::kConstantTimeHeadway;
};

struct GippsParams {
  double a_max = 1.5;  // maximum acceleration (m/s^2)
  double b = 2.0;      // comfortable deceleration (m/s^2, > 0)
  double tau = 0.7;    // reaction time (s)
  double theta = 0.35; // anticipation time (s)
  double s0 = 2.0;     // minimum spacing (m)
  double V_max = 30.0; // desired speed (m/s)
  double b_hat = 3.0;  // expected leader deceleration (m/s^2, > 0)
};

// a = a_max [1 - (v/v0)^delta - (s*/d)^2],
// s* = s0 + v T + v dv / (2 sqrt(a_max b)). Mid-crash inputs (d <= 0)
// return maximum deceleration.
inline double idm_accel(const IDMParams& p, const CFState& s) {
  if (s.d <= 0.0) return kAccelMin;
  const double s_star = p.s0 + s.v * p.T + s.v * s.dv / (2.0 * std::sqrt(p.a_max * p.b));
  const double a =
      p.a_max * (1.0 - std::pow(s.v / p.v0, p.delta) - (s_star / s.d) * (s_star / s.d));
  return clamp_accel(a);
}

inline double sidm_accel(const SIDMParams& p, const CFState& s, Rng& rng) {
  if (s.d <= 0.0) return kAccelMin;
  const double s_star =
      p.idm.s0 + s.v * p.idm.T + s.v * s.dv / (2.0 * std::sqrt(p.idm.a_max * p.idm.b));
  const double a = p.idm.a_max *
                   (1.0 - std::pow(s.v / p.idm.v0, p.idm.delta) - (s_star / s.d) * (s_star / s.d));
  return clamp_accel(a + p.sigma * rng.normal());
}

// a = min(k (v_int - v), k_a a_lead - k_v dv + k_d (d - d_ref)) with
// d_ref = max(r_safe, r_system, r_min).
inline double van_arem_accel(const VanAremParams& p, const CFState& s, double a_lead) {
  if (s.d <= 0.0) return kAccelMin;
  const double r_safe = 0.5 * s.dv * s.dv * (1.0 / p.d_p - 1.0 / p.d_dec);
  const double r_system = p.t_system * s.v;
  const double d_ref = std::max(r_safe, std::max(r_system, p.r_min));
  const double a_v = p.k * (p.v_int - s.v);
  const double a_d = p.k_a * a_lead - p.k_v * s.dv + p.k_d * (s.d - d_ref);
  return clamp_accel(std::min(a_v, a_d));
}

inline double fvdm_desired_speed(const FVDMParams& p, double d) {
  if (d <= p.s0) return 0.0;
  if (p.profile == FVDMProfile::kConstantTimeHeadway) {
    return std::min(p.V_max, (d - p.s0) / p.T);
  }
  const double span = p.T * p.V_max;
  if (d >= p.s0 + span) return p.V_max;
  return 0.5 * p.V_max * (1.0 - std::cos(std::numbers::pi * (d - p.s0) / span));
}

// a = K1 (V(d) - v) - K2 dv
inline double fvdm_accel(const FVDMParams& p, const CFState& s) {
  if (s.d <= 0.0) return kAccelMin;
  return clamp_accel(p.K1 * (fvdm_desired_speed(p, s.d) - s.v) - p.K2 * s.dv);
}

// Next speed as the minimum of the free-flow and safe-braking branches;
// an infeasible (negative) braking radicand forces a stop.
inline double gipps_next_speed(const GippsParams& p, const CFState& s, double v_lead) {
  const double free_flow = s.v + 2.5 * p.a_max * p.tau * (1.0 - s.v / p.V_max) *
                                     std::sqrt(0.025 + s.v / p.V_max);
  const double horizon = 0.5 * p.tau + p.theta;
  const double radicand = p.b * p.b * horizon * horizon +
                          p.b * (2.0 * (s.d - p.s0) - p.tau * s.v + v_lead * v_lead / p.b_hat);
  double braking = 0.0;
  if (radicand >= 0.0) {
    braking = -p.b * horizon + std::sqrt(radicand);
  }
  return std::max(std::min(free_flow, braking), 0.0);
}

inline double gipps_accel(const GippsParams& p, const CFState& s) {
  if (s.d <= 0.0) return kAccelMin;
  const double v_next = gipps_next_speed(p, s, s.leader_speed());
  return clamp_accel((v_next - s.v) / p.tau);
}

// Uniform interface the simulators drive: acceleration from the current
// state, the leader's last applied acceleration, and an RNG for the
// stochastic members.
class FollowerModel {
 public:
  virtual ~FollowerModel() = default;
  virtual double accel(const CFState& s, double a_lead, Rng& rng) const = 0;
  virtual bool stochastic() const { return false; }
  virtual std::string name() const = 0;
};

namespace detail {

struct IDMModel final : FollowerModel {
  IDMParams p;
  explicit IDMModel(IDMParams params) : p(params) {}
  double accel(const CFState& s, double, Rng&) const override { return idm_accel(p, s); }
  std::string name() const override { return "idm"; }
};

struct SIDMModel final : FollowerModel {
  SIDMParams p;
  explicit SIDMModel(SIDMParams params) : p(params) {}
  double accel(const CFState& s, double, Rng& rng) const override { return sidm_accel(p, s, rng); }
  bool stochastic() const override { return true; }
  std::string name() const override { return "sidm"; }
};

struct VanAremModel final : FollowerModel {
  VanAremParams p;
  explicit VanAremModel(VanAremParams params) : p(params) {}
  double accel(const CFState& s, double a_lead, Rng&) const override {
    return van_arem_accel(p, s, a_lead);
  }
  std::string name() const override { return "vanarem"; }
};

struct FVDMModel final : FollowerModel {
  FVDMParams p;
  explicit FVDMModel(FVDMParams params) : p(params) {}
  double accel(const CFState& s, double, Rng&) const override { return fvdm_accel(p, s); }
  std::string name() const override {
    return p.profile == FVDMProfile::kConstantTimeHeadway ? "fvdm-cth" : "fvdm-sigmoid";
  }
};

struct GippsModel final : FollowerModel {
  GippsParams p;
  explicit GippsModel(GippsParams params) : p(params) {}
  double accel(const CFState& s, double, Rng&) const override { return gipps_accel(p, s); }
  std::string name() const override { return "gipps"; }
};

}  // namespace detail

using ParamMap = std::map<std::string, double>;

inline const std::vector<std::string>& baseline_model_names() {
  static const std::vector<std::string> names = {"idm",      "sidm",  "vanarem",
                                                 "fvdm-cth", "fvdm-sigmoid", "gipps"};
  return names;
}

inline IDMParams idm_from_map(const ParamMap& m) {
  IDMParams p;
  p.v0 = m.at("v0");
  p.T = m.at("T");
  p.a_max = m.at("a_max");
  p.b = m.at("b");
  p.s0 = m.at("s0");
  p.delta = m.at("delta");
  return p;
}

inline ParamMap idm_to_map(const IDMParams& p) {
  return {{"v0", p.v0}, {"T", p.T}, {"a_max", p.a_max}, {"b", p.b}, {"s0", p.s0},
          {"delta", p.delta}};
}

// Builds a follower model from the CLI's flat parameter map.
inline std::unique_ptr<FollowerModel> make_baseline(const std::string& name, const ParamMap& m) {
  if (name == "idm") return std::make_unique<detail::IDMModel>(idm_from_map(m));
  if (name == "sidm") {
    SIDMParams p;
    p.idm = idm_from_map(m);
    p.sigma = m.at("sigma");
    return std::make_unique<detail::SIDMModel>(p);
  }
  if (name == "vanarem") {
    VanAremParams p;
    p.k_a = m.at("k_a");
    p.k_v = m.at("k_v");
    p.k_d = m.at("k_d");
    p.t_system = m.at("t_system");
    p.v_int = m.at("v_int");
    p.r_min = m.at("r_min");
    p.d_p = m.at("d_p");
    p.d_dec = m.at("d_dec");
    p.k = m.at("k");
    return std::make_unique<detail::VanAremModel>(p);
  }
  if (name == "fvdm-cth" || name == "fvdm-sigmoid") {
    FVDMParams p;
    p.K1 = m.at("K1");
    p.K2 = m.at("K2");
    p.s0 = m.at("s0");
    p.T = m.at("T");
    p.V_max = m.at("V_max");
    p.profile = name == "fvdm-cth" ? FVDMProfile::kConstantTimeHeadway : FVDMProfile::kSigmoid;
    return std::make_unique<detail::FVDMModel>(p);
  }
  if (name == "gipps") {
    GippsParams p;
    p.a_max = m.at("a_max");
    p.b = m.at("b");
    p.tau = m.at("tau");
    p.theta = m.at("theta");
    p.s0 = m.at("s0");
    p.V_max = m.at("V_max");
    p.b_hat = m.at("b_hat");
    return std::make_unique<detail::GippsModel>(p);
  }
  throw std::invalid_argument("unknown baseline model: " + name);
}

}  // namespace mccf
