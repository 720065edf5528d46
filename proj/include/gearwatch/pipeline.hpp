/**
 * @file pipeline.hpp
 * @brief Run configuration and the simulate / cluster / monitor / report stages.
 *
 * Each stage reads its inputs, computes per-turbine results (in parallel up to
 * `jobs`), then writes outputs in turbine order with atomic renames. Outputs
 * depend only on the configuration and input files, never on `jobs`.
 */
#pragma once

#include <algorithm>
#include <cctype>
#include <exception>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gearwatch/drift_monitor.hpp"
#include "gearwatch/error.hpp"
#include "gearwatch/io.hpp"
#include "gearwatch/mixture_model.hpp"
#include "gearwatch/mode_labeling.hpp"
#include "gearwatch/ratio_model.hpp"
#include "gearwatch/report.hpp"
#include "gearwatch/scada_ingest.hpp"
#include "gearwatch/synth_data.hpp"

namespace gearwatch {

namespace fs = std::filesystem;

struct RunConfig {
  std::vector<fs::path> inputs;
  std::optional<ColumnProfile> column_profile;  // empty: detect per file
  int train_year{2016};
  int validate_year{2017};
  int k_min{1};
  int k_max{10};
  int fixed_k{6};
  SelectionRule selection{SelectionRule::FixedK};
  double r2_threshold{0.99};
  Pooling pooling{Pooling::Pooled};
  std::uint64_t seed{42};
  fs::path output{"gearwatch-out"};
  int jobs{1};
  EmConfig em;
  ChartRules chart;
  SynthConfig simulate;
  bool simulate_years_set{false};
  std::function<void(const std::string&)> log;

  void info(const std::string& msg) const {
    if (log) log(msg);
  }

  /// Checks value ranges and that every input path exists.
  void validate(bool need_inputs) const {
    if (train_year == validate_year) throw ConfigError("train_year and validate_year must differ");
    if (k_min < 1 || k_max > 25 || k_min > k_max) throw ConfigError("k_range must satisfy 1 <= min <= max <= 25");
    if (fixed_k < 1 || fixed_k > 25) throw ConfigError("fixed_k must lie in 1..25");
    if (selection == SelectionRule::FixedK && (fixed_k < k_min || fixed_k > k_max)) {
      throw ConfigError("fixed_k must lie inside k_range when selection is fixed-k");
    }
    if (!(r2_threshold > 0.0 && r2_threshold < 1.0)) throw ConfigError("r2_threshold must lie in (0, 1)");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (em.n_restarts < 1 || em.max_iter < 1 || !(em.rel_tol > 0.0) || em.kmeans_iters < 0 || !(em.reg_scale >= 0.0)) {
      throw ConfigError("invalid EM settings");
    }
    if (chart.run_length < 2 || !(chart.sigma_multiple > 0.0)) throw ConfigError("invalid chart settings");
    if (need_inputs) {
      if (inputs.empty()) throw ConfigError("no input files configured");
      for (const auto& p : inputs) {
        if (!fs::exists(p)) throw IngestError("input file not found: " + p.string());
      }
    }
  }
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{"inputs",  "column_profile", "train_year", "validate_year", "k_range",
                                          "fixed_k", "selection",      "r2_threshold", "pooling",     "seed",
                                          "output",  "jobs",           "em",         "chart",         "simulate"};
  return keys;
}

inline ColumnProfile profile_from_json(const nlohmann::json& j) {
  ColumnProfile p = ColumnProfile::edp();
  const std::map<std::string, std::string*> fields{
      {"timestamp", &p.timestamp},         {"turbine_id", &p.turbine_id},     {"wind_speed_avg", &p.wind_speed_avg},
      {"power_avg", &p.power_avg},         {"rotor_rpm_avg", &p.rotor_rpm_avg}, {"gen_rpm_avg", &p.gen_rpm_avg},
      {"pitch_angle_avg", &p.pitch_angle_avg}};
  for (const auto& [key, value] : j.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown column_profile key: " + key);
    *it->second = value.get<std::string>();
  }
  return p;
}

inline void apply_simulate_json(SynthConfig& s, const nlohmann::json& j) {
  for (const auto& [key, v] : j.items()) {
    if (key == "turbines") {
      s.turbines = v.get<std::vector<std::string>>();
    } else if (key == "years") {
      s.years = v.get<std::vector<int>>();
    } else if (key == "gear_slope") {
      s.gear_slope = v.get<double>();
    } else if (key == "gear_intercept") {
      s.gear_intercept = v.get<double>();
    } else if (key == "noise_sigma") {
      s.noise_sigma = v.get<double>();
    } else if (key == "decoupled_gen_sigma") {
      s.decoupled_gen_sigma = v.get<double>();
    } else if (key == "occupancy") {
      if (v.is_array()) {
        const auto occ = v.get<std::vector<double>>();
        if (occ.size() != 6) throw ConfigError("occupancy needs 6 entries");
        std::copy(occ.begin(), occ.end(), s.occupancy.begin());
      } else {
        s.occupancy.fill(0.0);
        for (const auto& [mode, p] : v.items()) {
          auto m = parse_mode_label(mode);
          if (!m) throw ConfigError("unknown mode in occupancy: " + mode);
          s.occupancy[static_cast<std::size_t>(*m)] = p.get<double>();
        }
      }
    } else if (key == "drifts") {
      s.drifts.clear();
      for (const auto& d : v) {
        DriftSpec spec;
        spec.turbine_id = d.at("turbine").get<std::string>();
        spec.iso_year = d.value("year", 0);
        spec.start_week = d.at("week").get<int>();
        const auto shape = d.value("shape", std::string("step"));
        if (shape == "step") {
          spec.shape = DriftShape::Step;
        } else if (shape == "ramp") {
          spec.shape = DriftShape::Ramp;
        } else {
          throw ConfigError("drift shape must be step or ramp");
        }
        spec.magnitude = d.at("magnitude").get<double>();
        spec.ramp_weeks = d.value("ramp_weeks", 4);
        s.drifts.push_back(std::move(spec));
      }
    } else {
      throw ConfigError("unknown simulate key: " + key);
    }
  }
}

}  // namespace detail

/// Applies a JSON configuration document; relative paths resolve against `base_dir`.
inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j, const fs::path& base_dir = {}) {
  try {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (!detail::known_config_keys().count(key)) throw ConfigError("unknown configuration key: " + key);
    }
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    if (j.contains("inputs")) {
      cfg.inputs.clear();
      for (const auto& p : j["inputs"]) cfg.inputs.push_back(resolve(p.get<std::string>()));
    }
    if (j.contains("column_profile")) {
      const auto& cp = j["column_profile"];
      if (cp.is_string()) {
        const auto name = cp.get<std::string>();
        if (name == "auto") {
          cfg.column_profile.reset();
        } else if (name == "edp") {
          cfg.column_profile = ColumnProfile::edp();
        } else if (name == "canonical") {
          cfg.column_profile = ColumnProfile::canonical();
        } else {
          throw ConfigError("column_profile must be auto, edp, canonical or an object");
        }
      } else {
        cfg.column_profile = detail::profile_from_json(cp);
      }
    }
    if (j.contains("train_year")) cfg.train_year = j["train_year"].get<int>();
    if (j.contains("validate_year")) cfg.validate_year = j["validate_year"].get<int>();
    if (j.contains("k_range")) {
      const auto r = j["k_range"].get<std::vector<int>>();
      if (r.size() != 2) throw ConfigError("k_range must be [min, max]");
      cfg.k_min = r[0];
      cfg.k_max = r[1];
    }
    if (j.contains("fixed_k")) cfg.fixed_k = j["fixed_k"].get<int>();
    if (j.contains("selection")) {
      auto rule = parse_selection_rule(j["selection"].get<std::string>());
      if (!rule) throw ConfigError("selection must be min-aic or fixed-k");
      cfg.selection = *rule;
    }
    if (j.contains("r2_threshold")) cfg.r2_threshold = j["r2_threshold"].get<double>();
    if (j.contains("pooling")) {
      auto p = parse_pooling(j["pooling"].get<std::string>());
      if (!p) throw ConfigError("pooling must be pooled or per-mode");
      cfg.pooling = *p;
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output")) cfg.output = resolve(j["output"].get<std::string>());
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    if (j.contains("em")) {
      for (const auto& [key, v] : j["em"].items()) {
        if (key == "restarts") cfg.em.n_restarts = v.get<int>();
        else if (key == "rel_tol") cfg.em.rel_tol = v.get<double>();
        else if (key == "max_iter") cfg.em.max_iter = v.get<int>();
        else if (key == "kmeans_iters") cfg.em.kmeans_iters = v.get<int>();
        else if (key == "reg_scale") cfg.em.reg_scale = v.get<double>();
        else throw ConfigError("unknown em key: " + key);
      }
    }
    if (j.contains("chart")) {
      for (const auto& [key, v] : j["chart"].items()) {
        if (key == "sigma_multiple") cfg.chart.sigma_multiple = v.get<double>();
        else if (key == "run_length") cfg.chart.run_length = v.get<int>();
        else throw ConfigError("unknown chart key: " + key);
      }
    }
    if (j.contains("simulate")) {
      detail::apply_simulate_json(cfg.simulate, j["simulate"]);
      cfg.simulate_years_set = j["simulate"].contains("years");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid configuration value: ") + e.what());
  }
}

inline RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("configuration file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path, Stage::Config));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  apply_config_json(cfg, j, path.parent_path());
  return cfg;
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the lowest-index failure.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::optional<Result>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n) return;
        i = next++;
      }
      try {
        results[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  if (threads == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Result> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

inline std::string mode_slug(ModeLabel m) {
  std::string s(to_string(m));
  for (auto& c : s) c = c == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/// Loads every configured input and merges them (sorted, duplicates collapsed).
inline LoadResult load_inputs(const RunConfig& cfg) {
  LoadResult all;
  for (const auto& p : cfg.inputs) {
    const auto profile = cfg.column_profile ? *cfg.column_profile : detect_profile(p);
    auto part = load_scada(p, profile);
    cfg.info("loaded " + p.string() + ": " + std::to_string(part.records.size()) + " records, " +
             std::to_string(part.dropped) + " dropped, " + std::to_string(part.duplicates) + " duplicates");
    all.rows += part.rows;
    all.dropped += part.dropped;
    all.duplicates += part.duplicates;
    all.records.insert(all.records.end(), std::make_move_iterator(part.records.begin()),
                       std::make_move_iterator(part.records.end()));
  }
  const auto before = all.duplicates;
  detail::sort_and_dedup(all);
  all.duplicates += before;
  return all;
}

// ---------------------------------------------------------------- simulate

struct SimulateResult {
  std::vector<fs::path> scada_files;
  std::vector<fs::path> truth_files;
  std::size_t records{0};
};

inline SimulateResult cmd_simulate(const RunConfig& cfg) {
  cfg.validate(false);
  SynthConfig sc = cfg.simulate;
  sc.seed = cfg.seed;
  if (!cfg.simulate_years_set) {
    sc.years.clear();
    for (int y = std::min(cfg.train_year, cfg.validate_year); y <= std::max(cfg.train_year, cfg.validate_year); ++y) {
      sc.years.push_back(y);
    }
  }
  sc.validate();
  struct Files {
    std::string scada;
    std::string truth;
    std::size_t n;
  };
  const auto parts = detail::parallel_map<Files>(sc.turbines.size(), cfg.jobs, [&](std::size_t i) {
    auto out = generate_turbine(sc, i);
    return Files{records_to_csv(out.records), truth_csv(out.truth), out.records.size()};
  });
  SimulateResult res;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto scada = cfg.output / ("scada_" + sc.turbines[i] + ".csv");
    const auto truth = cfg.output / ("truth_" + sc.turbines[i] + ".csv");
    io::write_file_atomic(scada, parts[i].scada);
    io::write_file_atomic(truth, parts[i].truth);
    res.scada_files.push_back(scada);
    res.truth_files.push_back(truth);
    res.records += parts[i].n;
  }
  cfg.info("simulated " + std::to_string(res.records) + " records for " + std::to_string(parts.size()) + " turbines");
  return res;
}

// ---------------------------------------------------------------- cluster

struct TurbineClustering {
  std::string turbine_id;
  ModelSweep sweep;
  LabeledModel labeled;
  std::vector<ModeStatsRow> stats;
  std::vector<int> cluster_of;  // per record of this turbine, record order
};

inline std::string sweep_csv(const ModelSweep& sweep) {
  std::ostringstream os;
  os << "k,aic,bic,loglik,chosen\n";
  for (const auto& e : sweep.entries) {
    os << e.k << ',' << io::format_number(e.aic) << ',' << io::format_number(e.bic) << ','
       << io::format_number(e.log_likelihood) << ',' << (e.k == sweep.chosen_k ? 1 : 0) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json clustering_to_json(const TurbineClustering& c) {
  nlohmann::ordered_json j;
  j["turbine_id"] = c.turbine_id;
  const auto model = model_to_json(c.labeled.mixture);
  for (const auto& [k, v] : model.items()) j[k] = v;
  auto labels = nlohmann::ordered_json::array();
  for (auto m : c.labeled.mapping) labels.push_back(std::string(to_string(m)));
  j["cluster_labels"] = labels;
  j["match_cost"] = c.labeled.match_cost;
  nlohmann::ordered_json sw;
  sw["selection_rule"] = std::string(to_string(c.sweep.rule));
  sw["chosen_k"] = c.sweep.chosen_k;
  const auto best = std::min_element(c.sweep.entries.begin(), c.sweep.entries.end(),
                                     [](const SweepEntry& a, const SweepEntry& b) { return a.aic < b.aic; });
  sw["min_aic_k"] = best->k;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : c.sweep.entries) {
    entries.push_back({{"k", e.k}, {"aic", e.aic}, {"bic", e.bic}, {"loglik", e.log_likelihood}});
  }
  sw["entries"] = entries;
  j["sweep"] = sw;
  j["mode_stats"] = mode_stats_to_json(c.stats);
  return j;
}

inline TurbineClustering cluster_turbine(const RunConfig& cfg, const std::string& id,
                                         const std::vector<ScadaRecord>& records) {
  const auto split = split_by_year(records, cfg.train_year, cfg.validate_year);
  auto z = standardize(split.train);
  TurbineClustering out;
  out.turbine_id = id;
  out.sweep = sweep_k(z.features, cfg.k_min, cfg.k_max, cfg.seed, cfg.em, cfg.selection, cfg.fixed_k, z.params);
  out.labeled = label_clusters(out.sweep.chosen());
  std::vector<FeatureVector> all;
  all.reserve(records.size());
  for (const auto& r : records) all.push_back(z.params.apply(raw_features(r)));
  out.cluster_of = assign_labels(out.labeled.mixture, all);
  out.stats = mode_stats(records, out.cluster_of, out.labeled.mapping);
  return out;
}

struct ClusterResult {
  LoadResult load;
  std::vector<TurbineClustering> turbines;
};

/// standardize -> sweep_k -> chosen model -> label_clusters, per turbine; writes sweep CSV and model JSON.
inline ClusterResult cmd_cluster(const RunConfig& cfg) {
  cfg.validate(true);
  ClusterResult res;
  res.load = load_inputs(cfg);
  const auto groups = group_by_turbine(res.load.records);
  std::vector<const std::pair<const std::string, std::vector<ScadaRecord>>*> items;
  for (const auto& g : groups) items.push_back(&g);
  res.turbines = detail::parallel_map<TurbineClustering>(items.size(), cfg.jobs, [&](std::size_t i) {
    return cluster_turbine(cfg, items[i]->first, items[i]->second);
  });
  for (const auto& t : res.turbines) {
    for (const auto& w : t.sweep.warnings) cfg.info("turbine " + t.turbine_id + ": " + w);
    io::write_file_atomic(cfg.output / ("sweep_" + t.turbine_id + ".csv"), sweep_csv(t.sweep));
    io::write_file_atomic(cfg.output / ("model_" + t.turbine_id + ".json"), detail::dump(clustering_to_json(t)));
    cfg.info("turbine " + t.turbine_id + ": k=" + std::to_string(t.sweep.chosen_k) + " (" +
             std::string(to_string(t.sweep.rule)) + "), " + std::to_string(t.labeled.mixture.diagnostics.iterations) +
             " EM iterations, converged=" + (t.labeled.mixture.diagnostics.converged ? "yes" : "no"));
  }
  return res;
}

// ---------------------------------------------------------------- monitor

struct SeriesChart {
  std::optional<ModeLabel> mode;
  std::optional<ControlChart> chart;  // empty when the baseline was unusable
  std::string status;                 // "ok" or the failure reason
  std::vector<WeeklyResidual> training_weeks;
  std::vector<WeeklyResidual> validation_weeks;
  std::vector<DriftFlag> flags;
};

struct TurbineMonitoring {
  std::string turbine_id;
  std::vector<RatioModel> models;
  std::vector<RejectedMode> failed_fits;
  TurbineRetention retention;
  std::vector<SeriesChart> charts;
  bool excluded{false};
};

inline TurbineMonitoring monitor_turbine(const RunConfig& cfg, const std::string& id,
                                         const std::vector<ScadaRecord>& records) {
  const auto model_path = cfg.output / ("model_" + id + ".json");
  if (!fs::exists(model_path)) {
    throw MonitorError("no clustering model for turbine " + id + " (expected " + model_path.string() +
                       "); run the cluster stage first");
  }
  nlohmann::json mj;
  try {
    mj = nlohmann::json::parse(io::read_file(model_path, Stage::Monitoring));
  } catch (const nlohmann::json::parse_error& e) {
    throw MonitorError("cannot parse " + model_path.string() + ": " + e.what());
  }
  const auto mixture = model_from_json(mj);
  std::vector<ModeLabel> mapping;
  for (const auto& l : mj.at("cluster_labels")) {
    auto m = parse_mode_label(l.get<std::string>());
    if (!m) throw MonitorError("unknown mode label in " + model_path.string());
    mapping.push_back(*m);
  }
  if (static_cast<int>(mapping.size()) != mixture.k) throw MonitorError("cluster_labels do not match k");

  std::vector<FeatureVector> z;
  z.reserve(records.size());
  for (const auto& r : records) z.push_back(mixture.standardization.apply(raw_features(r)));
  const auto cluster_of = assign_labels(mixture, z);

  TurbineMonitoring out;
  out.turbine_id = id;
  std::map<ModeLabel, std::vector<SpeedPoint>> train_points;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (calendar_year(records[i].timestamp) != cfg.train_year) continue;
    train_points[mapping[static_cast<std::size_t>(cluster_of[i])]].push_back(
        {records[i].rotor_rpm_avg, records[i].gen_rpm_avg});
  }
  for (auto mode : kAllModes) {
    auto it = train_points.find(mode);
    if (it == train_points.end()) continue;
    try {
      out.models.push_back(fit_ratio_model(it->second, id, mode, cfg.train_year));
    } catch (const MonitorError& e) {
      out.failed_fits.push_back({mode, std::nullopt, e.what()});
    }
  }
  const auto gate = gate_modes(out.models, cfg.r2_threshold);
  if (auto it = gate.turbines.find(id); it != gate.turbines.end()) out.retention = it->second;
  for (const auto& f : out.failed_fits) out.retention.rejected.push_back(f);
  out.excluded = out.retention.retained.empty();
  if (out.excluded) return out;

  std::map<ModeLabel, const RatioModel*> by_mode;
  for (const auto& m : out.retention.retained) by_mode[m.mode] = &m;
  std::vector<LabeledResidual> train_res, val_res;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ModeLabel mode = mapping[static_cast<std::size_t>(cluster_of[i])];
    auto it = by_mode.find(mode);
    if (it == by_mode.end()) continue;
    const int year = calendar_year(records[i].timestamp);
    if (year != cfg.train_year && year != cfg.validate_year) continue;
    const LabeledResidual r{records[i].timestamp, id, mode,
                            records[i].gen_rpm_avg - it->second->predict(records[i].rotor_rpm_avg)};
    (year == cfg.train_year ? train_res : val_res).push_back(r);
  }
  const auto train_weeks = weekly_series(train_res, cfg.pooling);
  const auto val_weeks = weekly_series(val_res, cfg.pooling);

  std::vector<std::optional<ModeLabel>> series_keys;
  if (cfg.pooling == Pooling::Pooled) {
    series_keys.push_back(std::nullopt);
  } else {
    for (const auto& m : out.retention.retained) series_keys.push_back(m.mode);
    std::sort(series_keys.begin(), series_keys.end());
  }
  for (const auto& key : series_keys) {
    SeriesChart sc;
    sc.mode = key;
    for (const auto& w : train_weeks) {
      if (w.mode == key) sc.training_weeks.push_back(w);
    }
    for (const auto& w : val_weeks) {
      if (w.mode == key) sc.validation_weeks.push_back(w);
    }
    try {
      sc.chart = build_chart(sc.training_weeks, cfg.chart);
      sc.chart->turbine_id = id;
      sc.chart->mode = key;
      sc.flags = detect_drift(*sc.chart, sc.validation_weeks, cfg.chart);
      sc.status = "ok";
    } catch (const MonitorError& e) {
      if (cfg.pooling == Pooling::Pooled) throw MonitorError("turbine " + id + ": " + e.what());
      sc.status = e.what();
    }
    out.charts.push_back(std::move(sc));
  }
  return out;
}

inline nlohmann::ordered_json flag_to_json(const DriftFlag& f) {
  nlohmann::ordered_json j;
  j["iso_year"] = f.week.year;
  j["iso_week"] = f.week.week;
  j["rule"] = std::string(to_string(f.rule));
  j["value"] = f.value;
  if (f.mode) j["mode"] = std::string(to_string(*f.mode));
  return j;
}

inline nlohmann::ordered_json ratio_model_to_json(const RatioModel& m) {
  return {{"turbine", m.turbine_id}, {"mode", std::string(to_string(m.mode))},
          {"slope", m.slope},        {"intercept", m.intercept},
          {"r2", m.r_squared},       {"n", m.n},
          {"train_period", m.train_period}};
}

struct MonitorResult {
  LoadResult load;
  std::vector<TurbineMonitoring> turbines;
  nlohmann::ordered_json ratio_models;
  nlohmann::ordered_json summary;
};

/// Fits ratio models on the training year, charts weekly residuals, writes drift CSVs and summaries.
inline MonitorResult cmd_monitor(const RunConfig& cfg) {
  cfg.validate(true);
  MonitorResult res;
  res.load = load_inputs(cfg);
  const auto groups = group_by_turbine(res.load.records);
  std::vector<const std::pair<const std::string, std::vector<ScadaRecord>>*> items;
  for (const auto& g : groups) items.push_back(&g);
  res.turbines = detail::parallel_map<TurbineMonitoring>(items.size(), cfg.jobs, [&](std::size_t i) {
    return monitor_turbine(cfg, items[i]->first, items[i]->second);
  });

  auto& rm = res.ratio_models;
  rm["threshold"] = cfg.r2_threshold;
  rm["train_year"] = cfg.train_year;
  rm["units"] = {{"slope", "gen_rpm/rotor_rpm"}, {"intercept", "gen_rpm"}};
  rm["models"] = nlohmann::ordered_json::array();
  rm["rejected"] = nlohmann::ordered_json::array();
  auto& sm = res.summary;
  sm["pooling"] = std::string(to_string(cfg.pooling));
  sm["train_year"] = cfg.train_year;
  sm["validate_year"] = cfg.validate_year;
  sm["residual_units"] = "gen_rpm";
  sm["turbines"] = nlohmann::ordered_json::object();

  for (const auto& t : res.turbines) {
    for (const auto& m : t.models) rm["models"].push_back(ratio_model_to_json(m));
    for (const auto& r : t.retention.rejected) {
      nlohmann::ordered_json j{{"turbine", t.turbine_id}, {"mode", std::string(to_string(r.mode))}};
      j["r2"] = r.r_squared ? nlohmann::ordered_json(*r.r_squared) : nlohmann::ordered_json(nullptr);
      j["reason"] = r.reason;
      rm["rejected"].push_back(std::move(j));
    }
    nlohmann::ordered_json tj;
    tj["status"] = t.excluded ? "excluded" : "monitored";
    auto retained = nlohmann::ordered_json::array();
    for (const auto& m : t.retention.retained) retained.push_back(std::string(to_string(m.mode)));
    tj["retained_modes"] = retained;
    tj["flags"] = nlohmann::ordered_json::array();
    tj["charts"] = nlohmann::ordered_json::array();
    if (t.excluded) cfg.info("turbine " + t.turbine_id + ": all modes rejected, excluded from monitoring");
    for (const auto& sc : t.charts) {
      nlohmann::ordered_json cj;
      if (sc.mode) cj["mode"] = std::string(to_string(*sc.mode));
      cj["status"] = sc.status;
      if (sc.chart) {
        cj["center"] = sc.chart->center;
        cj["sigma"] = sc.chart->sigma;
        cj["ucl"] = sc.chart->ucl;
        cj["lcl"] = sc.chart->lcl;
        cj["baseline_weeks"] = sc.chart->baseline_weeks;
        const std::string name = sc.mode ? "drift_" + t.turbine_id + "_" + detail::mode_slug(*sc.mode) + ".csv"
                                         : "drift_" + t.turbine_id + ".csv";
        io::write_file_atomic(cfg.output / name,
                              drift_csv(*sc.chart, sc.training_weeks, sc.validation_weeks, sc.flags));
        cj["file"] = name;
      }
      for (const auto& f : sc.flags) tj["flags"].push_back(flag_to_json(f));
      tj["charts"].push_back(std::move(cj));
    }
    sm["turbines"][t.turbine_id] = std::move(tj);
  }
  io::write_file_atomic(cfg.output / "ratio_models.json", detail::dump(rm));
  io::write_file_atomic(cfg.output / "summary.json", detail::dump(sm));
  return res;
}

// ---------------------------------------------------------------- report

/// Joins whatever stage outputs exist in the output directory into report.json and report.txt.
inline nlohmann::ordered_json cmd_report(const RunConfig& cfg) {
  if (!fs::is_directory(cfg.output)) throw ConfigError("output directory not found: " + cfg.output.string());
  std::vector<fs::path> model_files;
  for (const auto& e : fs::directory_iterator(cfg.output)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("model_") && name.ends_with(".json")) model_files.push_back(e.path());
  }
  std::sort(model_files.begin(), model_files.end());
  auto parse = [](const fs::path& p) {
    try {
      return nlohmann::ordered_json::parse(io::read_file(p, Stage::Config));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("cannot parse " + p.string() + ": " + e.what());
    }
  };
  std::vector<nlohmann::ordered_json> models;
  for (const auto& p : model_files) models.push_back(parse(p));
  const auto ratio_path = cfg.output / "ratio_models.json";
  const auto summary_path = cfg.output / "summary.json";
  const auto ratio = fs::exists(ratio_path) ? parse(ratio_path) : nlohmann::ordered_json();
  const auto summary = fs::exists(summary_path) ? parse(summary_path) : nlohmann::ordered_json();
  if (models.empty() && ratio.is_null() && summary.is_null()) {
    throw ConfigError("nothing to report in " + cfg.output.string());
  }
  const auto rep = assemble_report(models, ratio, summary);
  io::write_file_atomic(cfg.output / "report.json", detail::dump(rep));
  io::write_file_atomic(cfg.output / "report.txt", report_text(rep));
  return rep;
}

}  // namespace gearwatch
