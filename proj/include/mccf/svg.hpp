#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mccf/core.hpp"
#include "mccf/ringsim.hpp"

namespace mccf {

// Space-time diagram of one ring trial: position (wrapped) vs time, one
// polyline per vehicle broken at lap wraps, segments colored by speed.
inline void write_space_time_svg(const std::string& path,
                                 const std::vector<RingTrajectoryRow>& rows, double road_length,
                                 double horizon, std::size_t trial = 0) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open SVG file for writing: " + path);

  const int width = 1000;
  const int height = 600;
  const int margin = 45;
  auto sx = [&](double t) {
    return margin + (width - 2 * margin) * (horizon > 0.0 ? t / horizon : 0.0);
  };
  auto sy = [&](double x) {
    return height - margin - (height - 2 * margin) * (road_length > 0.0 ? x / road_length : 0.0);
  };

  double v_max = 1e-9;
  for (const auto& r : rows) {
    if (r.trial == trial) v_max = std::max(v_max, r.v);
  }
  auto color = [&](double v) {
    // slow = red, fast = blue
    const double f = std::clamp(v / v_max, 0.0, 1.0);
    const int red = static_cast<int>(220.0 * (1.0 - f));
    const int blue = static_cast<int>(220.0 * f);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x20%02x", red, blue);
    return std::string(buf);
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"13\">time (s)</text>\n";
  out << "<text x=\"14\" y=\"" << height / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
      << "transform=\"rotate(-90 14 " << height / 2 << ")\">position (m)</text>\n";

  std::size_t n_vehicles = 0;
  for (const auto& r : rows) {
    if (r.trial == trial) n_vehicles = std::max(n_vehicles, r.vehicle + 1);
  }
  std::vector<std::vector<const RingTrajectoryRow*>> per_vehicle(n_vehicles);
  for (const auto& r : rows) {
    if (r.trial == trial) per_vehicle[r.vehicle].push_back(&r);
  }

  for (auto& series : per_vehicle) {
    std::sort(series.begin(), series.end(),
              [](const RingTrajectoryRow* a, const RingTrajectoryRow* b) { return a->t < b->t; });
    for (std::size_t i = 1; i < series.size(); ++i) {
      const auto* a = series[i - 1];
      const auto* b = series[i];
      if (b->x < a->x - 0.5 * road_length) continue;  // lap wrap; break the line
      out << "<line x1=\"" << sx(a->t) << "\" y1=\"" << sy(a->x) << "\" x2=\"" << sx(b->t)
          << "\" y2=\"" << sy(b->x) << "\" stroke=\"" << color(b->v)
          << "\" stroke-width=\"0.8\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace mccf
