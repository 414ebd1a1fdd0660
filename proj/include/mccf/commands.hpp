#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mccf/calibrate.hpp"
#include "mccf/core.hpp"
#include "mccf/inference.hpp"
#include "mccf/metrics.hpp"
#include "mccf/model_io.hpp"
#include "mccf/parallel.hpp"
#include "mccf/ringsim.hpp"
#include "mccf/rollouts.hpp"
#include "mccf/state_space.hpp"
#include "mccf/svg.hpp"
#include "mccf/synth.hpp"
#include "mccf/trajdata.hpp"

namespace mccf {

using Json = nlohmann::json;

// Shared command context: the merged JSON config (file values overridden
// by command-line flags) plus the output directory.
struct RunContext {
  Json config;
  std::filesystem::path out = ".";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::ostream* log = &std::cout;
};

namespace cli_detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

// Full provenance: the exact configuration a run resolved to.
inline void write_resolved_config(const RunContext& ctx, const std::string& command,
                                  const Json& resolved) {
  Json j = resolved;
  j["command"] = command;
  j["seed"] = ctx.seed;
  j["threads"] = ctx.threads;
  write_json(ctx.out / "resolved_config.json", j);
}

inline double get_num(const Json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

inline std::uint64_t get_u64(const Json& j, const std::string& key, std::uint64_t fallback) {
  return j.contains(key) ? j.at(key).get<std::uint64_t>() : fallback;
}

inline std::string get_str(const Json& j, const std::string& key, const std::string& fallback) {
  return j.contains(key) ? j.at(key).get<std::string>() : fallback;
}

inline std::string fmt(double x, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, x);
  return buf;
}

// Aligned-column text table.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string render() const {
    std::vector<std::size_t> widths(header_.size());
    for (std::size_t c = 0; c < header_.size(); ++c) widths[c] = header_[c].size();
    for (const auto& row : rows_) {
      for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c) {
        widths[c] = std::max(widths[c], row[c].size());
      }
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < widths.size(); ++c) {
        const std::string& s = c < cells.size() ? cells[c] : std::string();
        out << s << std::string(widths[c] - s.size() + 2, ' ');
      }
      out << '\n';
    };
    line(header_);
    std::size_t total = 0;
    for (std::size_t w : widths) total += w + 2;
    out << std::string(total, '-') << '\n';
    for (const auto& row : rows_) line(row);
    return out.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline ColumnMap column_map_from_json(const Json& j) {
  ColumnMap m;
  if (!j.is_object()) return m;
  m.pair_id = get_str(j, "pair_id", m.pair_id);
  m.t = get_str(j, "t", m.t);
  m.x_f = get_str(j, "x_f", m.x_f);
  m.v_f = get_str(j, "v_f", m.v_f);
  m.x_l = get_str(j, "x_l", m.x_l);
  m.v_l = get_str(j, "v_l", m.v_l);
  m.a_f = get_str(j, "a_f", m.a_f);
  m.a_l = get_str(j, "a_l", m.a_l);
  m.length_f = get_str(j, "length_f", m.length_f);
  m.length_l = get_str(j, "length_l", m.length_l);
  m.interaction = get_str(j, "interaction", m.interaction);
  return m;
}

// Dataset writer used by ingest and gen: full schema so downstream
// commands re-parse without loss.
inline void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  csv::Writer w(path.string());
  w.header({"pair_id", "t", "x_f", "v_f", "x_l", "v_l", "a_f", "a_l", "length_f",
            "interaction_type"});
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
      out << ',';
      if (!pair.solo) num(pt.a_l);
      out << ',';
      num(pair.length_avg);
      out << ',' << pair.interaction_type << '\n';
    }
  }
}

inline std::array<Range, 3> ranges_from_json(const Json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "urban") return urban_ranges();
    if (name == "freeway") return freeway_ranges();
    throw ValidationError("unknown range preset: " + name);
  }
  if (j.is_object()) {
    auto dim = [&](const char* key) {
      const auto& a = j.at(key);
      return Range{a.at(0).get<double>(), a.at(1).get<double>()};
    };
    return {dim("dv"), dim("d"), dim("v")};
  }
  return urban_ranges();
}

inline Json summary_to_json(const DurationSummary& s) {
  return Json{{"cf_pairs", s.pair_count}, {"mean_s", s.mean_s}, {"std_s", s.std_s},
              {"max_s", s.max_s},         {"min_s", s.min_s}};
}

}  // namespace cli_detail

// ingest: parse -> preprocess -> split; writes per-split CSVs and
// duration summary statistics.
inline void cmd_ingest(const RunContext& ctx) {
  using namespace cli_detail;
  const Json& cfg = ctx.config;
  const std::string input = cfg.at("input").get<std::string>();
  const ColumnMap columns = column_map_from_json(cfg.value("columns", Json::object()));
  PreprocessConfig pre;
  if (cfg.contains("preprocess")) {
    const Json& p = cfg.at("preprocess");
    pre.min_duration = get_num(p, "min_duration", pre.min_duration);
    pre.max_spacing = get_num(p, "max_spacing", pre.max_spacing);
    pre.min_speed = get_num(p, "min_speed", pre.min_speed);
    pre.trim = get_num(p, "trim", pre.trim);
  }
  const double test_fraction = get_num(cfg, "test_fraction", 0.1);

  const Dataset raw = parse_trajectory_csv(input, columns);
  const Dataset clean = preprocess_pairs(raw, pre);
  if (clean.pairs.empty()) {
    write_text(ctx.out / "summary.txt", "no eligible pairs after preprocessing\n");
    write_resolved_config(ctx, "ingest", cfg);
    *ctx.log << "no eligible pairs after preprocessing\n";
    return;
  }
  auto [train, test] = split_train_test(clean, test_fraction, ctx.seed);

  write_dataset_csv(train, ctx.out / "train.csv");
  write_dataset_csv(test, ctx.out / "test.csv");

  std::vector<std::string> warnings;
  for (const auto& pair : clean.pairs) {
    const auto w = consistency_warnings(pair);
    warnings.insert(warnings.end(), w.begin(), w.end());
  }
  if (!warnings.empty()) {
    std::ostringstream ws;
    for (const auto& w : warnings) ws << w << '\n';
    write_text(ctx.out / "warnings.txt", ws.str());
  }

  TextTable table({"Split", "CF Pairs", "Mean (s)", "Std (s)", "Max (s)", "Min (s)"});
  Json summary;
  for (const auto* ds : {&train, &test}) {
    const DurationSummary s = summarize_durations(*ds);
    table.add_row({ds->split_tag, std::to_string(s.pair_count), fmt(s.mean_s, 2), fmt(s.std_s, 2),
                   fmt(s.max_s, 1), fmt(s.min_s, 1)});
    summary[ds->split_tag] = summary_to_json(s);
  }
  summary["raw_pairs"] = raw.pairs.size();
  summary["preprocessed_pairs"] = clean.pairs.size();
  summary["consistency_warnings"] = warnings.size();
  const std::string rendered = table.render();
  write_text(ctx.out / "summary.txt", rendered);
  write_json(ctx.out / "summary.json", summary);
  write_resolved_config(ctx, "ingest", cfg);
  *ctx.log << rendered;
}

// train: grid -> clusters -> transitions; optional solo augmentation.
inline void cmd_train(const RunContext& ctx) {
  using namespace cli_detail;
  const Json& cfg = ctx.config;
  const std::string train_csv = cfg.at("train_csv").get<std::string>();
  const ColumnMap columns = column_map_from_json(cfg.value("columns", Json::object()));
  const auto ranges = ranges_from_json(cfg.value("ranges", Json("urban")));
  const std::uint64_t n_min = get_u64(cfg, "n_min", 10);

  Dataset train = parse_trajectory_csv(train_csv, columns);
  if (cfg.value("solo", Json::object()).value("enabled", true)) {
    const double default_ghost = ranges[kDimD].max;  // 45 urban, 150 freeway
    const double ghost =
        get_num(cfg.value("solo", Json::object()), "ghost_spacing", default_ghost);
    train = augment_solo(train, ghost);
  }

  std::size_t out_of_range = 0;
  const StateGrid grid = build_grid(train, ranges, &out_of_range);
  ClusterModel model = train_clusters(train, grid, n_min);

  const std::filesystem::path model_path = ctx.out / "model.json";
  save_model(model, model_path.string());

  static const char* dim_names[3] = {"Relative Speed (m/s)", "Spacing (m)",
                                     "Follower Speed (m/s)"};
  TextTable table({"Dimension", "Range", "# bins", "Step size"});
  for (std::size_t dim = 0; dim < 3; ++dim) {
    table.add_row({dim_names[dim],
                   "(" + fmt(ranges[dim].min, 0) + ", " + fmt(ranges[dim].max, 0) + ")",
                   std::to_string(grid.counts[dim]), fmt(grid.widths[dim], 4)});
  }
  std::ostringstream report;
  report << table.render();
  report << "\ntraining samples:  " << model.meta.training_samples << '\n'
         << "occupied bins:     " << model.meta.occupied_bins << '\n'
         << "final clusters:    " << model.clusters.size() << '\n'
         << "compression ratio: " << fmt(model.compression_ratio(), 2) << '\n'
         << "transitions:       " << model.transitions.total_count() << '\n'
         << "out-of-range samples (clamped): " << out_of_range << '\n';

  Json jreport;
  jreport["bins"] = {grid.counts[0], grid.counts[1], grid.counts[2]};
  jreport["widths"] = {grid.widths[0], grid.widths[1], grid.widths[2]};
  jreport["occupied_bins"] = model.meta.occupied_bins;
  jreport["clusters"] = model.clusters.size();
  jreport["compression_ratio"] = model.compression_ratio();
  jreport["training_samples"] = model.meta.training_samples;
  jreport["transition_count"] = model.transitions.total_count();
  jreport["clamped_samples"] = out_of_range;
  jreport["model_file"] = model_path.string();

  write_text(ctx.out / "training_report.txt", report.str());
  write_json(ctx.out / "training_report.json", jreport);
  write_resolved_config(ctx, "train", cfg);
  *ctx.log << report.str();
}

// calibrate: DE over the pooled speed-RMSE objective for one or all
// baseline models.
inline void cmd_calibrate(const RunContext& ctx) {
  using namespace cli_detail;
  const Json& cfg = ctx.config;
  const std::string train_csv = cfg.at("train_csv").get<std::string>();
  const ColumnMap columns = column_map_from_json(cfg.value("columns", Json::object()));
  const Dataset train = parse_trajectory_csv(train_csv, columns);

  DEConfig de;
  de.seed = ctx.seed;
  if (cfg.contains("de")) {
    const Json& d = cfg.at("de");
    de.pop_size = get_u64(d, "pop_size", de.pop_size);
    de.mutation_lo = get_num(d, "mutation_lo", de.mutation_lo);
    de.mutation_hi = get_num(d, "mutation_hi", de.mutation_hi);
    de.recombination = get_num(d, "recombination", de.recombination);
    de.max_iter = get_u64(d, "max_iter", de.max_iter);
    de.tol = get_num(d, "tol", de.tol);
  }

  std::vector<std::string> names;
  const std::string which = get_str(cfg, "model", "all");
  if (which == "all") {
    names = baseline_model_names();
  } else {
    names.push_back(which);
  }

  for (const auto& name : names) {
    const CalibrationResult result = calibrate_model(name, train, de);
    Json j;
    j["model"] = result.model;
    Json jb = Json::object();
    for (const auto& b : result.bounds) jb[b.name] = {b.lo, b.hi};
    j["bounds"] = jb;
    j["params"] = result.params;
    j["best_cost"] = result.best_cost;
    j["history"] = result.history;
    j["wall_time_s"] = result.wall_time_s;
    write_json(ctx.out / ("calibration_" + name + ".json"), j);
    *ctx.log << name << ": RMSE_v = " << fmt(result.best_cost) << " ("
             << result.history.size() - 1 << " generations, " << fmt(result.wall_time_s, 1)
             << " s)\n";
  }
  write_resolved_config(ctx, "calibrate", cfg);
}

namespace cli_detail {

struct EvalModelSpec {
  std::string name;
  bool deterministic = true;
  bool is_mccf = false;
  std::unique_ptr<FollowerModel> baseline;          // when !is_mccf
  InferenceConfig inference;                        // when is_mccf
};

struct PairTruth {
  std::vector<double> spacing;
  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> position;
};

inline PairTruth truth_of(const TrajectoryPair& pair) {
  PairTruth t;
  for (std::size_t i = 0; i < pair.points.size(); ++i) {
    const CFState s = state_at(pair, i);
    t.spacing.push_back(s.d);
    t.speed.push_back(s.v);
    t.accel.push_back(pair.points[i].a_f);
    t.position.push_back(pair.points[i].x_f);
  }
  return t;
}

inline ParamMap param_map_from_json(const Json& j) {
  ParamMap m;
  for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().get<double>();
  return m;
}

// Baseline parameters: inline under "baseline_params", else from
// calibration_<name>.json in "calibration_dir".
inline ParamMap load_baseline_params(const Json& cfg, const std::string& name) {
  if (cfg.contains("baseline_params") && cfg.at("baseline_params").contains(name)) {
    return param_map_from_json(cfg.at("baseline_params").at(name));
  }
  if (cfg.contains("calibration_dir")) {
    const std::filesystem::path path =
        std::filesystem::path(cfg.at("calibration_dir").get<std::string>()) /
        ("calibration_" + name + ".json");
    std::ifstream in(path);
    if (!in) throw IoError("missing calibration file: " + path.string());
    Json j;
    in >> j;
    return param_map_from_json(j.at("params"));
  }
  throw ValidationError("no parameters provided for baseline model '" + name + "'");
}

}  // namespace cli_detail

// evaluate: one-step + open-loop (K sweep) + OR + geometric-mean
// probability with the Mann-Whitney comparison.
inline void cmd_evaluate(const RunContext& ctx) {
  using namespace cli_detail;
  const Json& cfg = ctx.config;
  const ColumnMap columns = column_map_from_json(cfg.value("columns", Json::object()));
  const Dataset test = parse_trajectory_csv(cfg.at("test_csv").get<std::string>(), columns);
  if (test.pairs.empty()) throw ValidationError("evaluation dataset is empty");

  std::vector<std::size_t> k_list = {1, 3, 6, 10, 15};
  if (cfg.contains("k_list")) k_list = cfg.at("k_list").get<std::vector<std::size_t>>();
  std::sort(k_list.begin(), k_list.end());
  const std::size_t k_max = k_list.back();

  std::vector<std::string> names = {"idm",   "vanarem",  "fvdm-cth", "fvdm-sigmoid",
                                    "gipps", "sidm", "mccf-det", "mccf-stoch"};
  if (cfg.contains("models")) names = cfg.at("models").get<std::vector<std::string>>();

  ClusterModel mccf_model;
  bool mccf_loaded = false;
  auto specs = std::vector<EvalModelSpec>();
  for (const auto& name : names) {
    EvalModelSpec spec;
    spec.name = name;
    if (name == "mccf-det" || name == "mccf-stoch") {
      if (!mccf_loaded) {
        mccf_model = load_model(cfg.at("model_file").get<std::string>());
        mccf_loaded = true;
      }
      spec.is_mccf = true;
      spec.deterministic = name == "mccf-det";
      spec.inference.mode =
          spec.deterministic ? InferenceMode::kDeterministic : InferenceMode::kStochastic;
      spec.inference.seed = ctx.seed;
      spec.inference.conservative = cfg.value("conservative", false);
    } else {
      spec.baseline = make_baseline(name, load_baseline_params(cfg, name));
      spec.deterministic = !spec.baseline->stochastic();
    }
    specs.push_back(std::move(spec));
  }

  std::vector<PairTruth> truths;
  truths.reserve(test.pairs.size());
  for (const auto& pair : test.pairs) truths.push_back(truth_of(pair));

  // Rollouts: K = 1 for deterministic models, K = k_max for stochastic.
  struct ModelResults {
    std::vector<std::vector<Rollout>> rollouts;        // [pair][k]
    std::vector<OneStepPrediction> one_step_flat;      // pooled
    std::vector<double> truth_d, truth_v, truth_a;     // aligned to one_step_flat
    std::vector<double> geo_probs;                     // per pair, K = 1 trajectory
  };
  std::vector<ModelResults> results(specs.size());

  for (std::size_t mi = 0; mi < specs.size(); ++mi) {
    auto& spec = specs[mi];
    auto& res = results[mi];
    const std::size_t k_count = spec.deterministic ? 1 : k_max;
    res.rollouts.resize(test.pairs.size());
    parallel_for(test.pairs.size(), ctx.threads, [&](std::size_t pi) {
      const auto& pair = test.pairs[pi];
      res.rollouts[pi] = spec.is_mccf
                             ? open_loop_rollout(mccf_model, pair, spec.inference, k_count)
                             : baseline_rollouts(*spec.baseline, pair, ctx.seed, k_count);
    });
    for (std::size_t pi = 0; pi < test.pairs.size(); ++pi) {
      const auto& pair = test.pairs[pi];
      const auto preds = spec.is_mccf
                             ? one_step_predict(mccf_model, pair, spec.inference)
                             : one_step_predict_baseline(*spec.baseline, pair, ctx.seed);
      for (std::size_t t = 0; t < preds.size(); ++t) {
        res.one_step_flat.push_back(preds[t]);
        res.truth_d.push_back(truths[pi].spacing[t + 1]);
        res.truth_v.push_back(truths[pi].speed[t + 1]);
        res.truth_a.push_back(truths[pi].accel[t]);
      }
      if (mccf_loaded && res.rollouts[pi][0].states.size() >= 2) {
        res.geo_probs.push_back(geom_mean_prob(mccf_model, res.rollouts[pi][0].states));
      }
    }
  }

  Json report;
  TextTable table({"Model", "RMSE(s)", "RMSE(v)", "RMSE(a)", "minDTW(s)", "minDTW(v)", "minADE",
                   "minFDE", "OR", "K", "pairs"});

  std::ostringstream k_curve;
  k_curve << "model,k,min_dtw_s,min_dtw_v,min_ade,min_fde,pairs\n";

  for (std::size_t mi = 0; mi < specs.size(); ++mi) {
    const auto& spec = specs[mi];
    const auto& res = results[mi];

    RmseAccumulator acc_s, acc_v, acc_a;
    for (std::size_t i = 0; i < res.one_step_flat.size(); ++i) {
      acc_s.add(res.one_step_flat[i].d, res.truth_d[i]);
      acc_v.add(res.one_step_flat[i].v, res.truth_v[i]);
      acc_a.add(res.one_step_flat[i].a, res.truth_a[i]);
    }

    std::vector<bool> crashed_single;
    for (const auto& rs : res.rollouts) crashed_single.push_back(rs[0].crashed);
    const double or_value = overlap_rate(crashed_single);

    Json jmodel;
    jmodel["one_step"] = {{"rmse_s", acc_s.value()}, {"rmse_v", acc_v.value()},
                          {"rmse_a", acc_a.value()}};
    jmodel["overlap_rate"] = or_value;
    jmodel["deterministic"] = spec.deterministic;

    const std::vector<std::size_t> model_ks = spec.deterministic ? std::vector<std::size_t>{1}
                                                                 : k_list;
    for (std::size_t k : model_ks) {
      // Fair comparison at this K across all models under evaluation.
      std::vector<ModelCrashes> crash_info;
      for (std::size_t mj = 0; mj < specs.size(); ++mj) {
        ModelCrashes mc;
        mc.name = specs[mj].name;
        mc.deterministic = specs[mj].deterministic;
        for (const auto& rs : results[mj].rollouts) {
          const std::size_t upto = specs[mj].deterministic ? 1 : std::min(k, rs.size());
          std::vector<bool> flags;
          for (std::size_t i = 0; i < upto; ++i) flags.push_back(rs[i].crashed);
          mc.crashed.push_back(std::move(flags));
        }
        crash_info.push_back(std::move(mc));
      }
      const auto eligible = fair_filter(test.pairs.size(), crash_info);

      double sum_dtw_s = 0.0, sum_dtw_v = 0.0, sum_ade = 0.0, sum_fde = 0.0;
      for (std::size_t pi : eligible) {
        const auto& truth = truths[pi];
        const std::size_t upto = spec.deterministic ? 1 : std::min(k, res.rollouts[pi].size());
        std::span<const Rollout> rs(res.rollouts[pi].data(), upto);
        auto spacing_of = [&](const Rollout& r) {
          std::vector<double> d(r.states.size());
          for (std::size_t i = 0; i < r.states.size(); ++i) d[i] = r.states[i].d;
          return dtw_distance(d, truth.spacing);
        };
        sum_dtw_s += min_over_rollouts(spacing_of, rs).value();
        sum_dtw_v +=
            min_over_rollouts([&](const Rollout& r) { return dtw_distance(r.speeds, truth.speed); },
                              rs)
                .value();
        sum_ade += min_over_rollouts(
                       [&](const Rollout& r) { return average_displacement(r.positions, truth.position); },
                       rs)
                       .value();
        sum_fde += min_over_rollouts(
                       [&](const Rollout& r) { return final_displacement(r.positions, truth.position); },
                       rs)
                       .value();
      }
      const double n = eligible.empty() ? 1.0 : static_cast<double>(eligible.size());
      Json jk;
      jk["pairs"] = eligible.size();
      if (eligible.empty()) {
        jk["absent"] = true;
      } else {
        jk["min_dtw_s"] = sum_dtw_s / n;
        jk["min_dtw_v"] = sum_dtw_v / n;
        jk["min_ade"] = sum_ade / n;
        jk["min_fde"] = sum_fde / n;
      }
      jmodel["open_loop"]["k" + std::to_string(k)] = jk;

      table.add_row({spec.name + (spec.deterministic ? "" : " (" + std::to_string(k) + ")"),
                     k == model_ks.front() ? fmt(acc_s.value()) : "-",
                     k == model_ks.front() ? fmt(acc_v.value()) : "-",
                     k == model_ks.front() ? fmt(acc_a.value()) : "-",
                     eligible.empty() ? "-" : fmt(sum_dtw_s / n),
                     eligible.empty() ? "-" : fmt(sum_dtw_v / n),
                     eligible.empty() ? "-" : fmt(sum_ade / n),
                     eligible.empty() ? "-" : fmt(sum_fde / n),
                     k == model_ks.front() ? fmt(or_value) : "-", std::to_string(k),
                     std::to_string(eligible.size())});
      if (!spec.deterministic && !eligible.empty()) {
        k_curve << spec.name << ',' << k << ',' << sum_dtw_s / n << ',' << sum_dtw_v / n << ','
                << sum_ade / n << ',' << sum_fde / n << ',' << eligible.size() << '\n';
      }
    }
    report["models"][spec.name] = jmodel;
  }

  // Transition-probability comparison against ground truth.
  if (mccf_loaded) {
    std::vector<double> gt_probs;
    for (const auto& pair : test.pairs) {
      const auto states = derive_states(pair);
      if (states.size() >= 2) gt_probs.push_back(geom_mean_prob(mccf_model, states));
    }
    TextTable prob_table({"Model", "Test Statistic", "p-Value", "Significant", "Mean", "Median"});
    auto median_of = [](std::vector<double> xs) { return quantile(std::move(xs), 0.5); };
    prob_table.add_row({"Ground Truth", "-", "-", "-", fmt(mean(gt_probs), 3),
                        fmt(median_of(gt_probs), 3)});
    Json jprob;
    jprob["ground_truth"] = {{"mean", mean(gt_probs)}, {"median", median_of(gt_probs)}};
    for (std::size_t mi = 0; mi < specs.size(); ++mi) {
      const auto& probs = results[mi].geo_probs;
      if (probs.size() < 2 || gt_probs.size() < 2) continue;
      const auto mw = mann_whitney(probs, gt_probs);
      const bool significant = mw.p < 0.1;
      prob_table.add_row({specs[mi].name, fmt(mw.u, 0), fmt(mw.p, 3),
                          significant ? "True" : "False", fmt(mean(probs), 3),
                          fmt(median_of(probs), 3)});
      jprob["models"][specs[mi].name] = {{"u", mw.u},
                                         {"p", mw.p},
                                         {"significant", significant},
                                         {"mean", mean(probs)},
                                         {"median", median_of(probs)}};
    }
    report["transition_probability"] = jprob;
    write_text(ctx.out / "prob_table.txt", prob_table.render());
  }

  const std::string rendered = table.render();
  write_text(ctx.out / "eval_table.txt", rendered);
  write_text(ctx.out / "k_curve.csv", k_curve.str());
  write_json(ctx.out / "eval_report.json", report);
  write_resolved_config(ctx, "evaluate", cfg);
  *ctx.log << rendered;
}

namespace cli_detail {

inline RingConfig scenario_config(const std::string& name) {
  RingConfig cfg;
  PerturbationProfile severe;
  severe.decel_duration = 10.0;
  severe.hold_duration = 30.0;
  severe.accel_duration = 10.0;
  if (name == "normal-equilibrium") {
    cfg.perturbation.reset();
  } else if (name == "standard-shockwave") {
    cfg.perturbation = PerturbationProfile{};
  } else if (name == "severe-shockwave") {
    cfg.perturbation = severe;
  } else if (name == "high-speed-shockwave") {
    cfg.n_vehicles = 40;
    cfg.v_start = 30.0;
    cfg.perturbation = severe;
  } else {
    throw ValidationError("unknown scenario: " + name);
  }
  return cfg;
}

inline RingConfig ring_config_from_json(const Json& cfg, std::uint64_t seed) {
  RingConfig ring;
  if (cfg.contains("scenario")) ring = scenario_config(cfg.at("scenario").get<std::string>());
  ring.length = get_num(cfg, "length", ring.length);
  ring.n_vehicles = get_u64(cfg, "n_vehicles", ring.n_vehicles);
  ring.v_start = get_num(cfg, "v_start", ring.v_start);
  ring.dt = get_num(cfg, "dt", ring.dt);
  ring.horizon = get_num(cfg, "horizon", ring.horizon);
  ring.trials = get_u64(cfg, "trials", ring.trials);
  ring.vehicle_length = get_num(cfg, "vehicle_length", ring.vehicle_length);
  ring.dump_trials = get_u64(cfg, "dump_trials", 1);
  ring.dump_sample_every = get_u64(cfg, "dump_sample_every", 5);
  ring.seed = seed;
  if (cfg.contains("perturbation")) {
    const Json& p = cfg.at("perturbation");
    if (p.is_null()) {
      ring.perturbation.reset();
    } else {
      PerturbationProfile prof;
      prof.start_time = get_num(p, "start_time", prof.start_time);
      prof.decel = get_num(p, "decel", prof.decel);
      prof.decel_duration = get_num(p, "decel_duration", prof.decel_duration);
      prof.hold_duration = get_num(p, "hold_duration", prof.hold_duration);
      prof.accel = get_num(p, "accel", prof.accel);
      prof.accel_duration = get_num(p, "accel_duration", prof.accel_duration);
      prof.target_vehicle = get_u64(p, "target_vehicle", prof.target_vehicle);
      ring.perturbation = prof;
    }
  }
  return ring;
}

}  // namespace cli_detail

// simulate: a named or custom ring scenario with collision statistics,
// trajectory dumps and a space-time diagram.
inline void cmd_simulate(const RunContext& ctx) {
  using namespace cli_detail;
  const Json& cfg = ctx.config;
  RingConfig ring = ring_config_from_json(cfg, ctx.seed);

  const Json jmodel = cfg.at("model");
  const std::string type = get_str(jmodel, "type", "baseline");
  std::unique_ptr<FollowerModel> driver;
  ClusterModel mccf_model;
  if (type == "mccf") {
    mccf_model = load_model(jmodel.at("model_file").get<std::string>());
    InferenceConfig inf;
    const Json ji = jmodel.value("inference", Json::object());
    inf.mode = get_str(ji, "mode", "stochastic") == "deterministic"
                   ? InferenceMode::kDeterministic
                   : InferenceMode::kStochastic;
    inf.conservative = ji.value("conservative", false);
    inf.ttc_tight = get_num(ji, "ttc_tight", inf.ttc_tight);
    inf.ttc_loose = get_num(ji, "ttc_loose", inf.ttc_loose);
    inf.pct_tight = get_num(ji, "pct_tight", inf.pct_tight);
    inf.pct_loose = get_num(ji, "pct_loose", inf.pct_loose);
    inf.seed = ctx.seed;
    driver = std::make_unique<McDriver>(mccf_model, inf);
  } else if (type == "baseline") {
    driver = make_baseline(jmodel.at("name").get<std::string>(),
                           param_map_from_json(jmodel.at("params")));
  } else {
    throw ValidationError("unknown simulation model type: " + type);
  }

  if (cfg.value("v_start_idm_equilibrium", false)) {
    const IDMParams p = idm_from_map(param_map_from_json(cfg.at("idm_params")));
    ring.v_start = idm_equilibrium_speed(p, ring.n_vehicles, ring.length, ring.vehicle_length);
  }

  const RingExperimentStats stats = run_experiment(ring, *driver, ctx.threads);

  Json jstats;
  jstats["model"] = driver->name();
  jstats["trials"] = ring.trials;
  jstats["v_start"] = ring.v_start;
  jstats["collisions_per_trial"] = stats.collisions_per_trial;
  jstats["mean"] = stats.mean;
  jstats["std"] = stats.stddev;
  write_json(ctx.out / "stats.json", jstats);

  {
    csv::Writer w((ctx.out / "trajectories.csv").string());
    w.header({"trial", "t", "vehicle", "x", "v", "a"});
    auto& out = w.stream();
    for (const auto& row : stats.dumped_trajectories) {
      out << row.trial << ',' << row.t << ',' << row.vehicle << ',' << row.x << ',' << row.v << ','
          << row.a << '\n';
    }
  }
  if (cfg.value("svg", true) && !stats.dumped_trajectories.empty()) {
    write_space_time_svg((ctx.out / "space_time.svg").string(), stats.dumped_trajectories,
                         ring.length, ring.horizon, 0);
  }
  write_resolved_config(ctx, "simulate", cfg);
  *ctx.log << driver->name() << ": " << fmt(stats.mean, 2) << " +/- " << fmt(stats.stddev, 2)
           << " collisions over " << ring.trials << " trials\n";
}

// gen: synthetic corpora in the ingestion schema, for demos and smoke
// runs without proprietary data.
inline void cmd_gen(const RunContext& ctx) {
  using namespace cli_detail;
  const Json& cfg = ctx.config;
  SynthConfig synth;
  synth.n_pairs = get_u64(cfg, "n_pairs", 100);
  synth.steps = get_u64(cfg, "steps", 150);
  synth.n_solo = get_u64(cfg, "n_solo", 0);
  synth.noise = get_num(cfg, "noise", synth.noise);
  synth.outlier_prob = get_num(cfg, "outlier_prob", 0.0);
  synth.leader_v_hi = get_num(cfg, "leader_v_hi", synth.leader_v_hi);

  const std::string kind = get_str(cfg, "kind", "stochastic");
  Dataset ds;
  if (kind == "stochastic") {
    ds = generate_stochastic_corpus(synth, ctx.seed);
  } else if (kind == "idm") {
    IDMParams p;
    if (cfg.contains("idm_params")) p = idm_from_map(param_map_from_json(cfg.at("idm_params")));
    ds = generate_idm_corpus(p, synth, ctx.seed);
  } else {
    throw ValidationError("unknown corpus kind: " + kind);
  }
  const std::filesystem::path path = ctx.out / get_str(cfg, "output", "corpus.csv");
  write_dataset_csv(ds, path);
  write_resolved_config(ctx, "gen", cfg);
  *ctx.log << "wrote " << ds.pairs.size() << " pairs to " << path.string() << '\n';
}

}  // namespace mccf
