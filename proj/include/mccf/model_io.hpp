#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mccf/core.hpp"
#include "mccf/state_space.hpp"

namespace mccf {

inline constexpr const char* kModelSchema = "mccf-model/1";

namespace detail {

// Locale-independent float formatting with 17 significant digits, so a
// written model parses back to the identical doubles and a second save is
// byte-identical to the first.
inline void append_double(std::string& out, double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

inline void append_u64(std::string& out, std::uint64_t x) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, res.ptr);
}

}  // namespace detail

inline std::string serialize_model(const ClusterModel& model) {
  std::string s;
  s.reserve(1024 + model.clusters.size() * 160);
  auto d = [&s](double x) { detail::append_double(s, x); };
  auto u = [&s](std::uint64_t x) { detail::append_u64(s, x); };

  s += "{\"schema\":\"";
  s += kModelSchema;
  s += "\",\"grid\":{\"ranges\":[";
  for (std::size_t dim = 0; dim < 3; ++dim) {
    if (dim) s += ',';
    s += '[';
    d(model.grid.ranges[dim].min);
    s += ',';
    d(model.grid.ranges[dim].max);
    s += ']';
  }
  s += "],\"widths\":[";
  for (std::size_t dim = 0; dim < 3; ++dim) {
    if (dim) s += ',';
    d(model.grid.widths[dim]);
  }
  s += "],\"counts\":[";
  for (std::size_t dim = 0; dim < 3; ++dim) {
    if (dim) s += ',';
    u(model.grid.counts[dim]);
  }
  s += "]},\n\"clusters\":[";
  for (std::size_t i = 0; i < model.clusters.size(); ++i) {
    const Cluster& c = model.clusters[i];
    if (i) s += ',';
    s += "\n{\"id\":";
    u(c.id);
    s += ",\"count\":";
    u(c.count);
    s += ",\"centroid\":[";
    d(c.centroid.dv);
    s += ',';
    d(c.centroid.d);
    s += ',';
    d(c.centroid.v);
    s += "],\"centroid_norm\":[";
    d(c.centroid_norm[0]);
    s += ',';
    d(c.centroid_norm[1]);
    s += ',';
    d(c.centroid_norm[2]);
    s += "],\"accel_samples\":[";
    for (std::size_t k = 0; k < c.accel_samples.size(); ++k) {
      if (k) s += ',';
      d(c.accel_samples[k]);
    }
    s += "]}";
  }
  s += "],\n\"bin_to_cluster\":[";
  {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> entries(model.bin_to_cluster.begin(),
                                                                 model.bin_to_cluster.end());
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i) s += ',';
      s += '[';
      u(entries[i].first);
      s += ',';
      u(entries[i].second);
      s += ']';
    }
  }
  s += "],\n\"transitions\":[";
  {
    bool first_row = true;
    for (const auto& [from, row] : model.transitions.rows) {
      if (!first_row) s += ',';
      first_row = false;
      s += "\n[";
      u(from);
      s += ",[";
      for (std::size_t i = 0; i < row.probs.size(); ++i) {
        if (i) s += ',';
        s += '[';
        u(row.probs[i].first);
        s += ',';
        d(row.probs[i].second);
        s += ',';
        u(row.counts[i].second);
        s += ']';
      }
      s += "]]";
    }
  }
  s += "],\n\"meta\":{\"dataset_hash\":";
  u(model.meta.dataset_hash);
  s += ",\"n_min\":";
  u(model.meta.n_min);
  s += ",\"training_samples\":";
  u(model.meta.training_samples);
  s += ",\"occupied_bins\":";
  u(model.meta.occupied_bins);
  s += ",\"clamped_samples\":";
  u(model.meta.clamped_samples);
  s += "}}\n";
  return s;
}

inline void save_model(const ClusterModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open model file for writing: " + path);
  out << serialize_model(model);
  if (!out) throw IoError("failed writing model file: " + path);
}

inline ClusterModel parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != kModelSchema) {
      throw ValidationError("model schema mismatch: expected " + std::string(kModelSchema));
    }
    ClusterModel model;
    const auto& grid = j.at("grid");
    for (std::size_t dim = 0; dim < 3; ++dim) {
      model.grid.ranges[dim].min = grid.at("ranges").at(dim).at(0).get<double>();
      model.grid.ranges[dim].max = grid.at("ranges").at(dim).at(1).get<double>();
      model.grid.widths[dim] = grid.at("widths").at(dim).get<double>();
      model.grid.counts[dim] = grid.at("counts").at(dim).get<std::uint64_t>();
    }
    for (const auto& jc : j.at("clusters")) {
      Cluster c;
      c.id = jc.at("id").get<std::uint64_t>();
      c.count = jc.at("count").get<std::uint64_t>();
      c.centroid.dv = jc.at("centroid").at(0).get<double>();
      c.centroid.d = jc.at("centroid").at(1).get<double>();
      c.centroid.v = jc.at("centroid").at(2).get<double>();
      for (std::size_t dim = 0; dim < 3; ++dim) {
        c.centroid_norm[dim] = jc.at("centroid_norm").at(dim).get<double>();
      }
      c.accel_samples = jc.at("accel_samples").get<std::vector<double>>();
      if (c.accel_samples.empty()) throw ValidationError("cluster with empty acceleration pool");
      model.clusters.push_back(std::move(c));
    }
    for (const auto& entry : j.at("bin_to_cluster")) {
      model.bin_to_cluster[entry.at(0).get<std::uint64_t>()] = entry.at(1).get<std::uint64_t>();
    }
    for (const auto& jrow : j.at("transitions")) {
      TransitionRow row;
      for (const auto& e : jrow.at(1)) {
        row.probs.emplace_back(e.at(0).get<std::uint64_t>(), e.at(1).get<double>());
        row.counts.emplace_back(e.at(0).get<std::uint64_t>(), e.at(2).get<std::uint64_t>());
      }
      model.transitions.rows.emplace(jrow.at(0).get<std::uint64_t>(), std::move(row));
    }
    const auto& meta = j.at("meta");
    model.meta.dataset_hash = meta.at("dataset_hash").get<std::uint64_t>();
    model.meta.n_min = meta.at("n_min").get<std::uint64_t>();
    model.meta.training_samples = meta.at("training_samples").get<std::uint64_t>();
    model.meta.occupied_bins = meta.at("occupied_bins").get<std::uint64_t>();
    model.meta.clamped_samples = meta.at("clamped_samples").get<std::uint64_t>();

    model.finalize();
    for (const auto& [bin, id] : model.bin_to_cluster) {
      (void)bin;
      if (!model.index_of.count(id)) {
        throw ValidationError("bin_to_cluster references unknown cluster id");
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model file violates the schema: ") + e.what());
  }
}

inline ClusterModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace mccf
