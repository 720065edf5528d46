/**
 * @file report.hpp
 * @brief Per-mode statistics and the run summary (JSON + plain text).
 */
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gearwatch/io.hpp"
#include "gearwatch/mode_labeling.hpp"
#include "gearwatch/scada_ingest.hpp"

namespace gearwatch {

struct FeatureStats {
  double min{std::numeric_limits<double>::infinity()};
  double max{-std::numeric_limits<double>::infinity()};
  double mean{0.0};
};

/// One row of the mode table; feature order (wind, rotor, pitch, power) in original units.
struct ModeStatsRow {
  ModeLabel mode{};
  std::size_t count{0};
  std::array<FeatureStats, 4> features{};
};

inline constexpr std::array<const char*, 4> kStatsFeatureNames{"wind_speed", "rotor_rpm", "pitch_angle", "power"};

/// Count, min, max and mean per mode for the records' cluster assignments; rows follow label order.
inline std::vector<ModeStatsRow> mode_stats(std::span<const ScadaRecord> records, std::span<const int> cluster_of,
                                            std::span<const ModeLabel> mapping) {
  if (records.size() != cluster_of.size()) {
    throw ModelError("mode_stats: assignments do not cover records");
  }
  std::map<ModeLabel, ModeStatsRow> rows;
  std::map<ModeLabel, std::array<double, 4>> sums;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto c = static_cast<std::size_t>(cluster_of[i]);
    if (c >= mapping.size()) throw ModelError("mode_stats: cluster index outside mapping");
    const ModeLabel m = mapping[c];
    auto& row = rows[m];
    row.mode = m;
    ++row.count;
    const std::array<double, 4> v{records[i].wind_speed_avg, records[i].rotor_rpm_avg, records[i].pitch_angle_avg,
                                  records[i].power_avg};
    auto& s = sums[m];
    for (int d = 0; d < 4; ++d) {
      row.features[d].min = std::min(row.features[d].min, v[d]);
      row.features[d].max = std::max(row.features[d].max, v[d]);
      s[d] += v[d];
    }
  }
  std::vector<ModeStatsRow> out;
  for (auto& [m, row] : rows) {
    for (int d = 0; d < 4; ++d) {
      // clamp guards the last-ulp case where the rounded mean escapes [min, max]
      row.features[d].mean = std::clamp(sums[m][d] / static_cast<double>(row.count), row.features[d].min,
                                        row.features[d].max);
    }
    out.push_back(row);
  }
  return out;
}

inline nlohmann::ordered_json mode_stats_to_json(std::span<const ModeStatsRow> rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["mode"] = std::string(to_string(r.mode));
    j["count"] = r.count;
    for (int d = 0; d < 4; ++d) {
      j[kStatsFeatureNames[d]] = {{"min", r.features[d].min}, {"max", r.features[d].max}, {"mean", r.features[d].mean}};
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

/**
 * @brief Joins cluster, ratio-model and drift artifacts into one document.
 *
 * `models` are the per-turbine model documents written by the cluster stage,
 * `ratio_models` and `summary` the documents written by the monitor stage
 * (either may be null when that stage has not run).
 */
inline nlohmann::ordered_json assemble_report(std::span<const nlohmann::ordered_json> models,
                                              const nlohmann::ordered_json& ratio_models,
                                              const nlohmann::ordered_json& summary) {
  nlohmann::ordered_json rep;
  rep["turbines"] = nlohmann::ordered_json::object();
  nlohmann::ordered_json turbines = nlohmann::ordered_json::object();
  for (const auto& m : models) {
    const std::string id = m.at("turbine_id").get<std::string>();
    auto& t = turbines[id];
    t["sweep"] = m.value("sweep", nlohmann::ordered_json::object());
    t["k"] = m.at("k");
    t["aic"] = m.at("aic");
    t["bic"] = m.at("bic");
    t["cluster_labels"] = m.value("cluster_labels", nlohmann::ordered_json::array());
    t["mode_stats"] = m.value("mode_stats", nlohmann::ordered_json::array());
  }
  if (!ratio_models.is_null()) {
    for (const auto& r : ratio_models.at("models")) {
      turbines[r.at("turbine").get<std::string>()]["ratio_models"].push_back(r);
    }
    for (const auto& r : ratio_models.value("rejected", nlohmann::ordered_json::array())) {
      turbines[r.at("turbine").get<std::string>()]["rejected_modes"].push_back(r);
    }
    rep["r2_threshold"] = ratio_models.value("threshold", 0.99);
  }
  if (!summary.is_null()) {
    rep["pooling"] = summary.value("pooling", "pooled");
    for (const auto& [id, s] : summary.at("turbines").items()) {
      auto& t = turbines[id];
      t["status"] = s.at("status");
      t["flags"] = s.value("flags", nlohmann::ordered_json::array());
      if (s.contains("charts")) t["charts"] = s.at("charts");
    }
  }
  rep["turbines"] = std::move(turbines);
  return rep;
}

inline std::string report_text(const nlohmann::ordered_json& rep) {
  std::ostringstream os;
  auto num = [](const nlohmann::ordered_json& v, int digits) {
    return v.is_number() ? io::format_number(v.get<double>(), digits) : std::string("-");
  };
  os << "gearwatch run report\n";
  if (rep.contains("r2_threshold")) os << "R^2 retention threshold: " << num(rep["r2_threshold"], 6) << '\n';
  if (rep.contains("pooling")) os << "weekly pooling: " << rep["pooling"].get<std::string>() << '\n';
  for (const auto& [id, t] : rep.at("turbines").items()) {
    os << "\n== turbine " << id << " ==\n";
    if (t.contains("sweep") && t["sweep"].contains("entries")) {
      const auto& sw = t["sweep"];
      os << "model sweep (rule " << sw.value("selection_rule", "?") << ", chosen k = " << sw.value("chosen_k", 0)
         << ", min-AIC k = " << sw.value("min_aic_k", 0) << ")\n";
      os << "  k        aic            bic            loglik\n";
      for (const auto& e : sw["entries"]) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-3d %-14s %-14s %-14s\n", e.at("k").get<int>(),
                      num(e.at("aic"), 10).c_str(), num(e.at("bic"), 10).c_str(), num(e.at("loglik"), 10).c_str());
        os << line;
      }
    }
    if (t.contains("mode_stats")) {
      os << "mode statistics (wind m/s | rotor rpm | pitch deg | power kW, min/max/mean)\n";
      for (const auto& r : t["mode_stats"]) {
        os << "  " << r.at("mode").get<std::string>() << "  count " << r.at("count").get<std::size_t>() << '\n';
        for (const char* f : kStatsFeatureNames) {
          const auto& s = r.at(f);
          os << "    " << f << ": " << num(s.at("min"), 5) << " / " << num(s.at("max"), 5) << " / "
             << num(s.at("mean"), 5) << '\n';
        }
      }
    }
    if (t.contains("ratio_models")) {
      os << "ratio models (gen_rpm = slope * rotor_rpm + intercept)\n";
      for (const auto& r : t["ratio_models"]) {
        os << "  " << r.at("mode").get<std::string>() << ": slope " << num(r.at("slope"), 8) << ", intercept "
           << num(r.at("intercept"), 6) << ", r2 " << num(r.at("r2"), 6) << ", n " << r.at("n").get<std::size_t>()
           << '\n';
      }
    }
    if (t.contains("rejected_modes")) {
      for (const auto& r : t["rejected_modes"]) {
        os << "  rejected " << r.at("mode").get<std::string>() << ": " << r.value("reason", "") << '\n';
      }
    }
    if (t.contains("status")) {
      os << "monitoring status: " << t["status"].get<std::string>() << '\n';
      const auto& flags = t["flags"];
      if (flags.empty()) {
        os << "  no drift flags\n";
      }
      for (const auto& f : flags) {
        os << "  flag " << f.at("iso_year").get<int>() << "-W" << f.at("iso_week").get<int>() << " "
           << f.at("rule").get<std::string>() << " value " << num(f.at("value"), 6);
        if (f.contains("mode")) os << " (" << f["mode"].get<std::string>() << ")";
        os << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace gearwatch
