/**
 * @file scada_ingest.hpp
 * @brief Parse, validate and partition 10-minute SCADA CSV logs.
 */
#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gearwatch/csv.hpp"
#include "gearwatch/error.hpp"
#include "gearwatch/io.hpp"
#include "gearwatch/time.hpp"

namespace gearwatch {

/// One 10-minute observation for one turbine.
struct ScadaRecord {
  Timestamp timestamp{};
  std::string turbine_id;
  double wind_speed_avg{};   // m/s
  double power_avg{};        // kW, negative while consuming
  double rotor_rpm_avg{};    // RPM
  double gen_rpm_avg{};      // RPM, driven side of the gearbox
  double pitch_angle_avg{};  // degrees

  bool operator==(const ScadaRecord&) const = default;
};

/**
 * @brief Maps each consumed quantity to its column name in an input file.
 *
 * Only five numeric channels plus identity columns are consumed; every other
 * column of an export is ignored.
 */
struct ColumnProfile {
  std::string timestamp;
  std::string turbine_id;
  std::string wind_speed_avg;
  std::string power_avg;
  std::string rotor_rpm_avg;
  std::string gen_rpm_avg;
  std::string pitch_angle_avg;

  /// EDP open-data export names (the shipped default).
  static ColumnProfile edp() {
    return {"Timestamp", "Turbine_ID", "Amb_WindSpeed_Avg", "Grd_Prod_Pwr_Avg",
            "Rtr_RPM_Avg", "Gen_RPM_Avg", "Blds_PitchAngle_Avg"};
  }

  /// Names used by normalized record files written by this library.
  static ColumnProfile canonical() {
    return {"timestamp", "turbine_id", "wind_speed_avg", "power_avg",
            "rotor_rpm_avg", "gen_rpm_avg", "pitch_angle_avg"};
  }

  [[nodiscard]] std::array<const std::string*, 7> columns() const {
    return {&timestamp, &turbine_id, &wind_speed_avg, &power_avg, &rotor_rpm_avg, &gen_rpm_avg, &pitch_angle_avg};
  }
};

struct LoadResult {
  std::vector<ScadaRecord> records;
  std::size_t rows{0};        // data rows seen (header excluded)
  std::size_t dropped{0};     // rows failing validation
  std::size_t duplicates{0};  // valid rows collapsed onto an earlier (turbine, timestamp)
};

namespace detail {

inline bool record_valid(const ScadaRecord& r) {
  return !r.turbine_id.empty() && r.wind_speed_avg >= 0.0 && r.rotor_rpm_avg >= 0.0 && r.gen_rpm_avg >= 0.0;
}

inline void sort_and_dedup(LoadResult& out) {
  auto& recs = out.records;
  std::stable_sort(recs.begin(), recs.end(), [](const ScadaRecord& a, const ScadaRecord& b) {
    return std::tie(a.turbine_id, a.timestamp) < std::tie(b.turbine_id, b.timestamp);
  });
  auto last = std::unique(recs.begin(), recs.end(), [](const ScadaRecord& a, const ScadaRecord& b) {
    return a.turbine_id == b.turbine_id && a.timestamp == b.timestamp;
  });
  out.duplicates = static_cast<std::size_t>(recs.end() - last);
  recs.erase(last, recs.end());
}

}  // namespace detail

/**
 * @brief Reads SCADA rows from a CSV stream.
 *
 * Rows with a missing or unparseable required cell, or a negative wind/rotor/
 * generator reading, are dropped and counted. Output is sorted by
 * (turbine_id, timestamp) with duplicates collapsed to their first occurrence.
 * Throws IngestError when a mapped column is absent or more than half of the
 * rows are dropped.
 */
inline LoadResult load_scada(std::istream& in, const ColumnProfile& profile, const std::string& source = "<stream>") {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) {
    throw IngestError("empty input, header row required: " + source);
  }
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) {
    header[0].erase(0, 3);
  }
  std::array<std::size_t, 7> idx{};
  const auto names = profile.columns();
  for (std::size_t c = 0; c < names.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return csv::strip_unit(h) == *names[c]; });
    if (it == header.end()) {
      throw IngestError("missing column '" + *names[c] + "' in " + source);
    }
    idx[c] = static_cast<std::size_t>(it - header.begin());
  }
  const std::size_t needed = *std::max_element(idx.begin(), idx.end());

  LoadResult out;
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) {
      continue;  // blank line
    }
    ++out.rows;
    if (row.size() <= needed) {
      ++out.dropped;
      continue;
    }
    auto ts = parse_timestamp(row[idx[0]]);
    auto wind = io::parse_number(row[idx[2]]);
    auto power = io::parse_number(row[idx[3]]);
    auto rotor = io::parse_number(row[idx[4]]);
    auto gen = io::parse_number(row[idx[5]]);
    auto pitch = io::parse_number(row[idx[6]]);
    if (!ts || !wind || !power || !rotor || !gen || !pitch) {
      ++out.dropped;
      continue;
    }
    ScadaRecord r{*ts, row[idx[1]], *wind, *power, *rotor, *gen, *pitch};
    if (!detail::record_valid(r)) {
      ++out.dropped;
      continue;
    }
    out.records.push_back(std::move(r));
  }
  if (out.rows > 0 && out.dropped * 2 > out.rows) {
    throw IngestError("dropped " + std::to_string(out.dropped) + " of " + std::to_string(out.rows) +
                      " rows in " + source + "; check the column profile");
  }
  detail::sort_and_dedup(out);
  return out;
}

inline LoadResult load_scada(const std::filesystem::path& path, const ColumnProfile& profile) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IngestError("cannot open input file: " + path.string());
  }
  return load_scada(in, profile, path.string());
}

/// Picks the canonical profile when the header already uses canonical names, otherwise EDP.
inline ColumnProfile detect_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IngestError("cannot open input file: " + path.string());
  }
  csv::Reader reader(in);
  std::vector<std::string> header;
  reader.next(header);
  const bool canonical = std::any_of(header.begin(), header.end(),
                                     [](const std::string& h) { return csv::strip_unit(h) == "wind_speed_avg"; });
  return canonical ? ColumnProfile::canonical() : ColumnProfile::edp();
}

inline constexpr const char* kRecordHeader =
    "timestamp[UTC],turbine_id,wind_speed_avg[m/s],power_avg[kW],rotor_rpm_avg[rpm],gen_rpm_avg[rpm],"
    "pitch_angle_avg[deg]";

/// Normalized record CSV with canonical column names (units in brackets).
inline void write_records(std::ostream& out, std::span<const ScadaRecord> records) {
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << format_timestamp(r.timestamp) << ',' << csv::escape(r.turbine_id) << ','
        << io::format_number(r.wind_speed_avg) << ',' << io::format_number(r.power_avg) << ','
        << io::format_number(r.rotor_rpm_avg) << ',' << io::format_number(r.gen_rpm_avg) << ','
        << io::format_number(r.pitch_angle_avg) << '\n';
  }
}

inline std::string records_to_csv(std::span<const ScadaRecord> records) {
  std::ostringstream os;
  write_records(os, records);
  return os.str();
}

struct DataSplit {
  std::vector<ScadaRecord> train;
  std::vector<ScadaRecord> validate;
  std::size_t discarded{0};  // records outside both years
};

/// Partitions by calendar (UTC) year. Throws IngestError on empty input or empty train set.
inline DataSplit split_by_year(std::span<const ScadaRecord> records, int train_year, int validate_year) {
  if (records.empty()) {
    throw IngestError("no records to split");
  }
  if (train_year == validate_year) {
    throw ConfigError("train and validation years must differ");
  }
  DataSplit split;
  for (const auto& r : records) {
    const int y = calendar_year(r.timestamp);
    if (y == train_year) {
      split.train.push_back(r);
    } else if (y == validate_year) {
      split.validate.push_back(r);
    } else {
      ++split.discarded;
    }
  }
  if (split.train.empty()) {
    throw IngestError("no records in training year " + std::to_string(train_year));
  }
  return split;
}

/// Records grouped per turbine, keys in lexicographic order.
inline std::map<std::string, std::vector<ScadaRecord>> group_by_turbine(std::span<const ScadaRecord> records) {
  std::map<std::string, std::vector<ScadaRecord>> out;
  for (const auto& r : records) {
    out[r.turbine_id].push_back(r);
  }
  return out;
}

}  // namespace gearwatch
