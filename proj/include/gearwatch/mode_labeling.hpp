/**
 * @file mode_labeling.hpp
 * @brief Maps anonymous mixture components onto the six turbine operating modes.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gearwatch/mixture_model.hpp"

namespace gearwatch {

/// Declaration order is the tie-break order.
enum class ModeLabel : int {
  Idling = 0,
  Start,
  GridConnecting,
  SubRatedProduction,
  PitchManaged,
  RatedProduction,
};

inline constexpr std::array<ModeLabel, 6> kAllModes{ModeLabel::Idling,         ModeLabel::Start,
                                                    ModeLabel::GridConnecting, ModeLabel::SubRatedProduction,
                                                    ModeLabel::PitchManaged,   ModeLabel::RatedProduction};

inline constexpr std::string_view to_string(ModeLabel m) {
  switch (m) {
    case ModeLabel::Idling: return "Idling";
    case ModeLabel::Start: return "Start";
    case ModeLabel::GridConnecting: return "Grid Connecting";
    case ModeLabel::SubRatedProduction: return "Sub-Rated Prod";
    case ModeLabel::PitchManaged: return "Pitch Managed";
    case ModeLabel::RatedProduction: return "Rated Production";
  }
  return "?";
}

inline std::optional<ModeLabel> parse_mode_label(std::string_view s) {
  for (auto m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

/// Mode centroid in original units.
struct ModeSignature {
  ModeLabel label{};
  double wind_speed{};  // m/s
  double rotor_rpm{};   // RPM
  double pitch_angle{}; // deg
  double power{};       // kW

  [[nodiscard]] std::array<double, 4> as_array() const { return {wind_speed, rotor_rpm, pitch_angle, power}; }
};

/// Mean operating point of each mode as observed on turbine T01 (EDP, 2016-2017).
inline std::vector<ModeSignature> canonical_signatures() {
  return {
      {ModeLabel::Idling, 2.1, 0.8, 23.9, -5.7},
      {ModeLabel::Start, 3.4, 7.1, 11.0, 11.3},
      {ModeLabel::GridConnecting, 5.1, 11.5, -1.1, 223.8},
      {ModeLabel::SubRatedProduction, 8.1, 13.9, -1.9, 923.0},
      {ModeLabel::PitchManaged, 8.6, 2.5, 65.6, 84.7},
      {ModeLabel::RatedProduction, 12.6, 14.8, 4.1, 1870.1},
  };
}

struct LabeledModel {
  MixtureModel mixture;
  std::vector<ModeLabel> mapping;  // cluster index -> mode
  double match_cost{};
};

/// Component means in original units, ordered (wind, rotor, pitch, power) to match signatures.
inline std::vector<std::array<double, 4>> component_centroids(const MixtureModel& model) {
  std::vector<std::array<double, 4>> out;
  for (const auto& c : model.components) {
    FeatureVector z{c.mean(0), c.mean(1), c.mean(2), c.mean(3)};
    const auto raw = model.standardization.invert(z);
    out.push_back({raw[kWind], raw[kRotor], raw[kPitch], raw[kPower]});
  }
  return out;
}

/// Pairwise cost matrix [cluster][signature]: Euclidean distance after dividing each axis by the signature range.
inline std::vector<std::vector<double>> match_costs(std::span<const std::array<double, 4>> centroids,
                                                    std::span<const ModeSignature> signatures) {
  std::array<double, 4> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& s : signatures) {
    const auto v = s.as_array();
    for (int d = 0; d < 4; ++d) {
      lo[d] = std::min(lo[d], v[d]);
      hi[d] = std::max(hi[d], v[d]);
    }
  }
  std::array<double, 4> range{};
  for (int d = 0; d < 4; ++d) range[d] = hi[d] - lo[d] > 0.0 ? hi[d] - lo[d] : 1.0;

  std::vector<std::vector<double>> cost(centroids.size(), std::vector<double>(signatures.size()));
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    for (std::size_t s = 0; s < signatures.size(); ++s) {
      const auto v = signatures[s].as_array();
      double acc = 0.0;
      for (int d = 0; d < 4; ++d) {
        const double t = (centroids[c][d] - v[d]) / range[d];
        acc += t * t;
      }
      cost[c][s] = std::sqrt(acc);
    }
  }
  return cost;
}

/**
 * @brief Labels every mixture component with an operating mode.
 *
 * With as many components as signatures the minimum-cost one-to-one mapping
 * is found by exhaustive search over permutations; otherwise each component
 * takes its nearest signature. Ties go to the earlier label.
 */
inline LabeledModel label_clusters(const MixtureModel& model, std::span<const ModeSignature> signatures) {
  if (signatures.empty()) {
    throw ModelError("no mode signatures supplied");
  }
  // Label order decides ties, so consider signatures sorted by label.
  std::vector<ModeSignature> sigs(signatures.begin(), signatures.end());
  std::stable_sort(sigs.begin(), sigs.end(),
                   [](const ModeSignature& a, const ModeSignature& b) { return a.label < b.label; });
  const auto centroids = component_centroids(model);
  const auto cost = match_costs(centroids, sigs);

  LabeledModel out{model, std::vector<ModeLabel>(centroids.size()), 0.0};
  if (centroids.size() == sigs.size()) {
    // perm[c] = signature index for cluster c; lexicographic enumeration keeps the first minimum.
    std::vector<std::size_t> perm(sigs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (std::size_t c = 0; c < perm.size(); ++c) total += cost[c][perm[c]];
      if (total < best_cost) {
        best_cost = total;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (std::size_t c = 0; c < best.size(); ++c) out.mapping[c] = sigs[best[c]].label;
    out.match_cost = best_cost;
  } else {
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const auto it = std::min_element(cost[c].begin(), cost[c].end());
      out.mapping[c] = sigs[static_cast<std::size_t>(it - cost[c].begin())].label;
      out.match_cost += *it;
    }
  }
  return out;
}

inline LabeledModel label_clusters(const MixtureModel& model) {
  const auto sigs = canonical_signatures();
  return label_clusters(model, sigs);
}

}  // namespace gearwatch
