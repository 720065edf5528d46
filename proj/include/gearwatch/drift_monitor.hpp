/**
 * @file drift_monitor.hpp
 * @brief Weekly residual aggregation and Shewhart charting with a run rule.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gearwatch/error.hpp"
#include "gearwatch/io.hpp"
#include "gearwatch/mode_labeling.hpp"
#include "gearwatch/time.hpp"

namespace gearwatch {

/// Residual of one retained-mode observation.
struct LabeledResidual {
  Timestamp timestamp{};
  std::string turbine_id;
  ModeLabel mode{};
  double residual{};  // gen rpm
};

enum class Pooling { Pooled, PerMode };

inline std::string_view to_string(Pooling p) { return p == Pooling::Pooled ? "pooled" : "per-mode"; }
inline std::optional<Pooling> parse_pooling(std::string_view s) {
  if (s == "pooled") return Pooling::Pooled;
  if (s == "per-mode") return Pooling::PerMode;
  return std::nullopt;
}

struct WeeklyResidual {
  std::string turbine_id;
  std::optional<ModeLabel> mode;  // set only for per-mode series
  IsoWeek week{};
  double mean_residual{};
  std::size_t count{0};
};

/**
 * @brief Mean residual per (turbine[, mode], ISO week).
 *
 * Output is ordered by turbine, then mode, then week. Weeks without data are
 * absent rather than zero-filled.
 */
inline std::vector<WeeklyResidual> weekly_series(std::span<const LabeledResidual> residuals,
                                                 Pooling pooling = Pooling::Pooled) {
  struct Acc {
    double sum{0.0};
    double comp{0.0};
    std::size_t count{0};
  };
  using Key = std::tuple<std::string, int, IsoWeek>;  // mode -1 when pooled
  std::map<Key, Acc> groups;
  for (const auto& r : residuals) {
    const int mode = pooling == Pooling::Pooled ? -1 : static_cast<int>(r.mode);
    auto& a = groups[Key{r.turbine_id, mode, iso_week_of(r.timestamp)}];
    const double t = a.sum + r.residual;
    a.comp += std::abs(a.sum) >= std::abs(r.residual) ? (a.sum - t) + r.residual : (r.residual - t) + a.sum;
    a.sum = t;
    ++a.count;
  }
  std::vector<WeeklyResidual> out;
  out.reserve(groups.size());
  for (const auto& [key, a] : groups) {
    const auto& [turbine, mode, week] = key;
    WeeklyResidual w;
    w.turbine_id = turbine;
    if (mode >= 0) w.mode = static_cast<ModeLabel>(mode);
    w.week = week;
    w.mean_residual = (a.sum + a.comp) / static_cast<double>(a.count);
    w.count = a.count;
    out.push_back(std::move(w));
  }
  return out;
}

struct ControlChart {
  std::string turbine_id;
  std::optional<ModeLabel> mode;
  double center{};
  double sigma{};
  double ucl{};
  double lcl{};
  std::size_t baseline_weeks{0};
};

struct ChartRules {
  double sigma_multiple{3.0};
  int run_length{8};
};

inline constexpr std::size_t kMinBaselineWeeks = 8;

/// Center and sample standard deviation (n-1) of the training weekly means.
inline ControlChart build_chart(std::span<const WeeklyResidual> training_weeks, const ChartRules& rules = {}) {
  if (training_weeks.size() < kMinBaselineWeeks) {
    throw MonitorError("insufficient baseline: " + std::to_string(training_weeks.size()) + " training weeks, need " +
                       std::to_string(kMinBaselineWeeks));
  }
  const auto n = static_cast<double>(training_weeks.size());
  double sum = 0.0;
  for (const auto& w : training_weeks) sum += w.mean_residual;
  const double center = sum / n;
  double ss = 0.0;
  for (const auto& w : training_weeks) ss += (w.mean_residual - center) * (w.mean_residual - center);
  const double sigma = std::sqrt(ss / (n - 1.0));
  double scale = 0.0;
  for (const auto& w : training_weeks) scale = std::max(scale, std::abs(w.mean_residual));
  // spread at rounding level of identical weeks counts as zero
  if (!(sigma > 64.0 * std::numeric_limits<double>::epsilon() * scale)) {
    throw MonitorError("degenerate baseline: weekly mean residuals have zero spread");
  }
  ControlChart c;
  c.turbine_id = training_weeks.front().turbine_id;
  c.mode = training_weeks.front().mode;
  c.center = center;
  c.sigma = sigma;
  c.ucl = center + rules.sigma_multiple * sigma;
  c.lcl = center - rules.sigma_multiple * sigma;
  c.baseline_weeks = training_weeks.size();
  return c;
}

enum class DriftRule { BeyondLimits, RunSameSide };

inline std::string_view to_string(DriftRule r) {
  return r == DriftRule::BeyondLimits ? "beyond-3-sigma" : "run-of-8-same-side";
}

struct DriftFlag {
  std::string turbine_id;
  std::optional<ModeLabel> mode;
  IsoWeek week{};
  DriftRule rule{};
  double value{};  // weekly mean residual, gen rpm
};

/**
 * @brief Applies the limit rule and the same-side run rule to validation weeks.
 *
 * A week beyond center +/- k sigma is flagged. The week completing a run of
 * `run_length` consecutive weeks strictly on one side of center is flagged;
 * a missing week or a week exactly on center resets the run.
 */
inline std::vector<DriftFlag> detect_drift(const ControlChart& chart, std::span<const WeeklyResidual> validation_weeks,
                                           const ChartRules& rules = {}) {
  std::vector<WeeklyResidual> weeks(validation_weeks.begin(), validation_weeks.end());
  std::stable_sort(weeks.begin(), weeks.end(),
                   [](const WeeklyResidual& a, const WeeklyResidual& b) { return a.week < b.week; });
  const double limit = rules.sigma_multiple * chart.sigma;
  std::vector<DriftFlag> flags;
  int run = 0;
  int side = 0;
  std::optional<IsoWeek> prev;
  for (const auto& w : weeks) {
    const double dev = w.mean_residual - chart.center;
    if (std::abs(dev) > limit) {
      flags.push_back({chart.turbine_id, w.mode, w.week, DriftRule::BeyondLimits, w.mean_residual});
    }
    const int s = dev > 0.0 ? 1 : (dev < 0.0 ? -1 : 0);
    const bool contiguous = prev && consecutive_weeks(*prev, w.week);
    if (s != 0 && contiguous && s == side) {
      ++run;
    } else {
      run = s != 0 ? 1 : 0;
    }
    side = s;
    prev = w.week;
    if (run == rules.run_length) {
      flags.push_back({chart.turbine_id, w.mode, w.week, DriftRule::RunSameSide, w.mean_residual});
    }
  }
  return flags;
}

inline constexpr const char* kDriftHeader =
    "iso_year,iso_week,mean_residual[gen_rpm],count,center[gen_rpm],ucl[gen_rpm],lcl[gen_rpm],flag_rule,period";

/// Plot-ready chart table: training weeks then validation weeks, flags joined by ';'.
inline std::string drift_csv(const ControlChart& chart, std::span<const WeeklyResidual> training_weeks,
                             std::span<const WeeklyResidual> validation_weeks, std::span<const DriftFlag> flags) {
  std::ostringstream os;
  os << kDriftHeader << '\n';
  auto emit = [&](const WeeklyResidual& w, std::string_view period, bool with_flags) {
    std::string rule;
    if (with_flags) {
      for (const auto& f : flags) {
        if (f.week == w.week && f.mode == w.mode) {
          if (!rule.empty()) rule += ';';
          rule += to_string(f.rule);
        }
      }
    }
    os << w.week.year << ',' << w.week.week << ',' << io::format_number(w.mean_residual) << ',' << w.count << ','
       << io::format_number(chart.center) << ',' << io::format_number(chart.ucl) << ','
       << io::format_number(chart.lcl) << ',' << rule << ',' << period << '\n';
  };
  for (const auto& w : training_weeks) emit(w, "train", false);
  for (const auto& w : validation_weeks) emit(w, "validate", true);
  return os.str();
}

}  // namespace gearwatch
