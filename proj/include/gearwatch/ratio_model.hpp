/**
 * @file ratio_model.hpp
 * @brief Per-mode generator-vs-rotor speed regressions and the R^2 retention gate.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gearwatch/error.hpp"
#include "gearwatch/mode_labeling.hpp"
#include "gearwatch/time.hpp"

namespace gearwatch {

inline constexpr std::size_t kMinRatioSamples = 30;

/// Rotor (driving) speed over generator (driven) speed. Throws MonitorError when gen_rpm <= 0.
inline double speed_ratio(double rotor_rpm, double gen_rpm) {
  if (!(gen_rpm > 0.0)) {
    throw MonitorError("undefined speed ratio: generator speed " + std::to_string(gen_rpm) + " rpm");
  }
  return rotor_rpm / gen_rpm;
}

struct SpeedPoint {
  double rotor_rpm{};
  double gen_rpm{};
};

struct RatioModel {
  std::string turbine_id;
  ModeLabel mode{};
  double slope{};      // gen rpm per rotor rpm
  double intercept{};  // gen rpm
  double r_squared{};
  std::size_t n{0};
  int train_period{0};

  [[nodiscard]] double predict(double rotor_rpm) const { return slope * rotor_rpm + intercept; }
};

/**
 * @brief Least-squares line gen = slope * rotor + intercept.
 *
 * Uses centered sums. R^2 = 1 - SS_res / SS_tot, reported as 0 when the
 * generator speed is constant. Throws MonitorError for fewer than 30 points
 * or a constant rotor speed.
 */
inline RatioModel fit_ratio_model(std::span<const SpeedPoint> points, const std::string& turbine_id, ModeLabel mode,
                                  int train_period) {
  if (points.size() < kMinRatioSamples) {
    throw MonitorError("insufficient data for " + turbine_id + "/" + std::string(to_string(mode)) + ": " +
                       std::to_string(points.size()) + " points, need " + std::to_string(kMinRatioSamples));
  }
  const auto n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    sx += p.rotor_rpm;
    sy += p.gen_rpm;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    const double dx = p.rotor_rpm - mx, dy = p.gen_rpm - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) {
    throw MonitorError("degenerate mode " + turbine_id + "/" + std::string(to_string(mode)) +
                       ": rotor speed has zero variance");
  }
  RatioModel m;
  m.turbine_id = turbine_id;
  m.mode = mode;
  m.slope = sxy / sxx;
  m.intercept = my - m.slope * mx;
  m.n = points.size();
  m.train_period = train_period;
  double ss_res = 0.0;
  for (const auto& p : points) {
    const double r = p.gen_rpm - m.predict(p.rotor_rpm);
    ss_res += r * r;
  }
  m.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 0.0;
  return m;
}

struct ResidualPoint {
  Timestamp timestamp{};
  double residual{};  // gen rpm, actual - predicted
};

struct TimedSpeedPoint {
  Timestamp timestamp{};
  double rotor_rpm{};
  double gen_rpm{};
};

inline std::vector<ResidualPoint> residuals(const RatioModel& model, std::span<const TimedSpeedPoint> points) {
  std::vector<ResidualPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({p.timestamp, p.gen_rpm - model.predict(p.rotor_rpm)});
  return out;
}

struct RejectedMode {
  ModeLabel mode{};
  std::optional<double> r_squared;  // empty when the fit itself failed
  std::string reason;
};

struct TurbineRetention {
  std::vector<RatioModel> retained;
  std::vector<RejectedMode> rejected;
  [[nodiscard]] bool excluded() const { return retained.empty(); }
};

struct RetainedModeSet {
  double threshold{0.99};
  std::map<std::string, TurbineRetention> turbines;
  std::vector<std::string> warnings;
};

/// Keeps models with r_squared >= threshold, grouped by turbine.
inline RetainedModeSet gate_modes(std::span<const RatioModel> models, double threshold = 0.99) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("R^2 threshold must lie in (0, 1)");
  }
  RetainedModeSet out;
  out.threshold = threshold;
  for (const auto& m : models) {
    auto& t = out.turbines[m.turbine_id];
    if (m.r_squared >= threshold) {
      t.retained.push_back(m);
    } else {
      t.rejected.push_back({m.mode, m.r_squared, "r2 " + std::to_string(m.r_squared) + " below threshold"});
    }
  }
  for (const auto& [id, t] : out.turbines) {
    if (t.excluded()) out.warnings.push_back("turbine " + id + ": all modes rejected, excluded from monitoring");
  }
  return out;
}

}  // namespace gearwatch
