/**
 * @file synth_data.hpp
 * @brief Synthetic SCADA streams with known operating modes, gear slope and injected drift.
 *
 * Default mode parameters are approximations shaped after the T01 mode table:
 * means are the tabulated means and each axis standard deviation is one sixth
 * of the tabulated min-max range. They are test fixtures, not measurements.
 */
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/random/discrete_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "gearwatch/error.hpp"
#include "gearwatch/io.hpp"
#include "gearwatch/mode_labeling.hpp"
#include "gearwatch/scada_ingest.hpp"
#include "gearwatch/time.hpp"

namespace gearwatch {

/// Per-mode Gaussian over (wind m/s, rotor rpm, pitch deg, power kW), diagonal covariance.
struct SynthMode {
  std::array<double, 4> mean{};
  std::array<double, 4> stddev{};
  bool coupled{true};  // generator follows rotor through the gearbox
};

enum class DriftShape { Step, Ramp };

struct DriftSpec {
  std::string turbine_id;
  int iso_year{0};  // 0 = last generated year
  int start_week{1};
  DriftShape shape{DriftShape::Step};
  double magnitude{0.0};  // multiples of noise_sigma
  int ramp_weeks{4};      // ramp reaches full magnitude after this many weeks
};

namespace detail {

struct TableRow {
  ModeLabel label;
  double count;
  std::array<double, 3> wind, rotor, pitch, power;  // min, max, mean
};

inline SynthMode mode_from_row(const TableRow& r, bool coupled) {
  auto sd = [](const std::array<double, 3>& a) { return (a[1] - a[0]) / 6.0; };
  return {{r.wind[2], r.rotor[2], r.pitch[2], r.power[2]}, {sd(r.wind), sd(r.rotor), sd(r.pitch), sd(r.power)}, coupled};
}

inline const std::array<TableRow, 6>& mode_table() {
  static const std::array<TableRow, 6> rows{{
      {ModeLabel::Idling, 26767, {0.4, 4.6, 2.1}, {0.0, 4.3, 0.8}, {23.6, 24.3, 23.9}, {-25.0, 0.9, -5.7}},
      {ModeLabel::Start, 8323, {1.7, 5.0, 3.4}, {0.0, 11.5, 7.1}, {-0.4, 36.4, 11.0}, {-27.5, 122.0, 11.3}},
      {ModeLabel::GridConnecting, 29548, {3.1, 6.8, 5.1}, {10.5, 13.3, 11.5}, {-2.3, 0.8, -1.1}, {-0.9, 579.2, 223.8}},
      {ModeLabel::SubRatedProduction, 22993, {5.6, 10.6, 8.1}, {11.8, 14.9, 13.9}, {-2.5, -0.4, -1.9}, {91.0, 1710.3, 923.0}},
      {ModeLabel::PitchManaged, 3094, {0.6, 24.8, 8.6}, {0.0, 14.9, 2.5}, {-2.2, 90.6, 65.6}, {-30.1, 1803.9, 84.7}},
      {ModeLabel::RatedProduction, 13958, {9.2, 23.5, 12.6}, {14.3, 14.9, 14.8}, {-2.0, 22.8, 4.1}, {1322.2, 2000.5, 1870.1}},
  }};
  return rows;
}

inline double round_decimals(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

inline std::array<double, 6> default_occupancy() {
  std::array<double, 6> occ{};
  double total = 0.0;
  for (const auto& r : mode_table()) total += r.count;
  for (const auto& r : mode_table()) occ[static_cast<std::size_t>(r.label)] = r.count / total;
  return occ;
}

/// Idling is the only mode whose generator speed is decoupled from the rotor.
inline std::array<SynthMode, 6> default_modes() {
  std::array<SynthMode, 6> modes{};
  for (const auto& r : mode_table()) {
    modes[static_cast<std::size_t>(r.label)] = mode_from_row(r, r.label != ModeLabel::Idling);
  }
  return modes;
}

}  // namespace detail

struct SynthConfig {
  std::vector<std::string> turbines{"T01", "T06", "T07", "T09", "T11"};
  std::vector<int> years{2016, 2017};
  std::uint64_t seed{42};
  double gear_slope{120.0};     // gen rpm per rotor rpm
  double gear_intercept{0.0};   // gen rpm
  std::array<double, 6> occupancy{detail::default_occupancy()};  // indexed by ModeLabel, T01 mode counts
  std::array<SynthMode, 6> modes{detail::default_modes()};   // indexed by ModeLabel
  double noise_sigma{1.0};            // gen rpm, coupled modes
  double decoupled_gen_sigma{5.0};    // gen rpm, folded normal around 0
  std::vector<DriftSpec> drifts;

  void validate() const {
    if (turbines.empty()) throw ConfigError("simulation needs at least one turbine");
    std::set<std::string> ids(turbines.begin(), turbines.end());
    if (ids.size() != turbines.size() || ids.count("")) throw ConfigError("turbine ids must be unique and non-empty");
    if (years.empty()) throw ConfigError("simulation needs at least one year");
    for (std::size_t i = 1; i < years.size(); ++i) {
      if (years[i] != years[i - 1] + 1) throw ConfigError("simulation years must be consecutive and ascending");
    }
    double s = 0.0;
    for (double p : occupancy) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("occupancy probabilities must be finite and >= 0");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("occupancy must sum to 1, got " + std::to_string(s));
    for (const auto& m : modes) {
      for (int d = 0; d < 4; ++d) {
        if (!std::isfinite(m.mean[d]) || !(m.stddev[d] >= 0.0) || !std::isfinite(m.stddev[d])) {
          throw ConfigError("mode parameters must be finite with non-negative spread");
        }
      }
    }
    if (!std::isfinite(gear_slope) || !std::isfinite(gear_intercept) || !(noise_sigma >= 0.0) ||
        !(decoupled_gen_sigma >= 0.0)) {
      throw ConfigError("gear and noise parameters must be finite, noise >= 0");
    }
    for (const auto& d : drifts) {
      if (!std::isfinite(d.magnitude)) throw ConfigError("drift magnitude must be finite");
      if (d.start_week < 1 || d.start_week > 53) throw ConfigError("drift start week must lie in 1..53");
      if (d.shape == DriftShape::Ramp && d.ramp_weeks < 1) throw ConfigError("ramp drift needs ramp_weeks >= 1");
      if (!ids.count(d.turbine_id)) throw ConfigError("drift names unknown turbine " + d.turbine_id);
    }
  }
};

/// Additive generator-speed drift (rpm) at time t for one turbine.
inline double drift_at(const SynthConfig& cfg, const std::string& turbine, Timestamp t) {
  double total = 0.0;
  for (const auto& d : cfg.drifts) {
    if (d.turbine_id != turbine) continue;
    const int year = d.iso_year != 0 ? d.iso_year : cfg.years.back();
    const Timestamp start{iso_week_start({year, d.start_week})};
    if (t < start) continue;
    const double full = d.magnitude * cfg.noise_sigma;
    if (d.shape == DriftShape::Step) {
      total += full;
    } else {
      const double weeks = std::chrono::duration<double>(t - start).count() / (7.0 * 86400.0);
      total += full * std::min(1.0, weeks / d.ramp_weeks);
    }
  }
  return total;
}

struct TruthRow {
  Timestamp timestamp{};
  std::string turbine_id;
  ModeLabel mode{};
  double drift{};
};

struct SynthOutput {
  std::vector<ScadaRecord> records;  // sorted by (turbine, timestamp)
  std::vector<TruthRow> truth;       // parallel to records
};

/// Seed for turbine `index`, independent of the other turbines.
inline constexpr std::uint64_t turbine_seed(std::uint64_t master, std::size_t index) {
  return master ^ ((static_cast<std::uint64_t>(index) + 1) * 0xD1B54A32D192ED03ULL);
}

/// Stream for one turbine on the 10-minute grid covering all configured years.
inline SynthOutput generate_turbine(const SynthConfig& cfg, std::size_t turbine_index) {
  using namespace std::chrono;
  const auto& id = cfg.turbines.at(turbine_index);
  std::mt19937_64 rng(turbine_seed(cfg.seed, turbine_index));
  boost::random::discrete_distribution<int> pick_mode(cfg.occupancy.begin(), cfg.occupancy.end());
  boost::random::normal_distribution<double> unit(0.0, 1.0);

  const Timestamp begin{sys_days{year{cfg.years.front()} / January / 1}};
  const Timestamp end{sys_days{year{cfg.years.back() + 1} / January / 1}};
  SynthOutput out;
  const auto steps = static_cast<std::size_t>((end - begin) / minutes{10});
  out.records.reserve(steps);
  out.truth.reserve(steps);
  for (Timestamp t = begin; t < end; t += minutes{10}) {
    const auto mode = static_cast<ModeLabel>(pick_mode(rng));
    const auto& m = cfg.modes[static_cast<std::size_t>(mode)];
    const double wind = std::max(0.0, m.mean[0] + m.stddev[0] * unit(rng));
    const double rotor = std::max(0.0, m.mean[1] + m.stddev[1] * unit(rng));
    const double pitch = m.mean[2] + m.stddev[2] * unit(rng);
    const double power = m.mean[3] + m.stddev[3] * unit(rng);
    const double noise = unit(rng);
    const double drift = drift_at(cfg, id, t);

    ScadaRecord r;
    r.timestamp = t;
    r.turbine_id = id;
    r.wind_speed_avg = detail::round_decimals(wind, 2);
    r.rotor_rpm_avg = detail::round_decimals(rotor, 3);
    r.pitch_angle_avg = detail::round_decimals(pitch, 2);
    r.power_avg = detail::round_decimals(power, 1);
    const double gen = m.coupled
                           ? cfg.gear_slope * r.rotor_rpm_avg + cfg.gear_intercept + cfg.noise_sigma * noise + drift
                           : std::abs(cfg.decoupled_gen_sigma * noise) + drift;
    r.gen_rpm_avg = detail::round_decimals(std::max(0.0, gen), 2);
    out.records.push_back(std::move(r));
    out.truth.push_back({t, id, mode, drift});
  }
  return out;
}

/// All turbines, in configuration order. Identical config gives identical output.
inline SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order(cfg.turbines.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cfg.turbines[a] < cfg.turbines[b]; });
  SynthOutput all;
  for (std::size_t i : order) {
    auto part = generate_turbine(cfg, i);
    all.records.insert(all.records.end(), std::make_move_iterator(part.records.begin()),
                       std::make_move_iterator(part.records.end()));
    all.truth.insert(all.truth.end(), std::make_move_iterator(part.truth.begin()),
                     std::make_move_iterator(part.truth.end()));
  }
  return all;
}

inline constexpr const char* kTruthHeader = "timestamp[UTC],true_mode,drift_value[gen_rpm]";

inline std::string truth_csv(std::span<const TruthRow> rows) {
  std::ostringstream os;
  os << kTruthHeader << '\n';
  for (const auto& r : rows) {
    os << format_timestamp(r.timestamp) << ',' << to_string(r.mode) << ',' << io::format_number(r.drift) << '\n';
  }
  return os.str();
}

}  // namespace gearwatch
