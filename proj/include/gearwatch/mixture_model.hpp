/**
 * @file mixture_model.hpp
 * @brief Full-covariance Gaussian mixtures over standardized 4-D SCADA features.
 *
 * Fitting is expectation-maximization seeded by k-means++ and a few Lloyd
 * iterations, repeated over several derived seeds with the best final
 * log-likelihood kept. Inputs are canonicalized (sorted) before fitting and
 * all reductions run in a fixed order, so a fit depends only on the multiset
 * of points, the component count, the seed and the configuration.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <random>

#include "json.hpp"

#include "gearwatch/error.hpp"
#include "gearwatch/scada_ingest.hpp"

namespace gearwatch {

inline constexpr int kFeatureDim = 4;

/// Feature order: power, wind speed, rotor speed, pitch angle.
using FeatureVector = std::array<double, kFeatureDim>;

inline constexpr std::array<std::string_view, kFeatureDim> kFeatureNames{"power", "wind_speed", "rotor_rpm",
                                                                        "pitch_angle"};
enum FeatureIndex : int { kPower = 0, kWind = 1, kRotor = 2, kPitch = 3 };

inline FeatureVector raw_features(const ScadaRecord& r) {
  return {r.power_avg, r.wind_speed_avg, r.rotor_rpm_avg, r.pitch_angle_avg};
}

/// Per-feature z-score parameters (sample standard deviation, n-1 denominator).
struct Standardization {
  std::array<double, kFeatureDim> mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, kFeatureDim> std{1.0, 1.0, 1.0, 1.0};

  [[nodiscard]] FeatureVector apply(const FeatureVector& raw) const {
    FeatureVector z{};
    for (int d = 0; d < kFeatureDim; ++d) z[d] = (raw[d] - mean[d]) / std[d];
    return z;
  }
  [[nodiscard]] FeatureVector invert(const FeatureVector& z) const {
    FeatureVector raw{};
    for (int d = 0; d < kFeatureDim; ++d) raw[d] = z[d] * std[d] + mean[d];
    return raw;
  }

  bool operator==(const Standardization&) const = default;
};

struct StandardizedFeatures {
  std::vector<FeatureVector> features;
  Standardization params;
};

namespace detail {

/// Sum of a column after sorting it, so the result ignores input order.
inline double ordered_sum(std::vector<double>& column) {
  std::sort(column.begin(), column.end());
  double s = 0.0, c = 0.0;
  for (double v : column) {  // Neumaier
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

struct KahanSum {
  double sum{0.0};
  double comp{0.0};
  void add(double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  [[nodiscard]] double value() const { return sum + comp; }
};

}  // namespace detail

/// Z-scores each feature. Throws ModelError for fewer than two points or a zero-variance feature.
inline StandardizedFeatures standardize(std::span<const FeatureVector> raw) {
  if (raw.size() < 2) {
    throw ModelError("standardize needs at least 2 records, got " + std::to_string(raw.size()));
  }
  const auto n = static_cast<double>(raw.size());
  Standardization params;
  std::vector<double> column(raw.size());
  for (int d = 0; d < kFeatureDim; ++d) {
    for (std::size_t i = 0; i < raw.size(); ++i) column[i] = raw[i][d];
    const double mean = detail::ordered_sum(column) / n;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double dev = raw[i][d] - mean;
      column[i] = dev * dev;
    }
    const double var = detail::ordered_sum(column) / (n - 1.0);
    if (!(var > 0.0) || !std::isfinite(var)) {
      throw ModelError("zero-variance feature: " + std::string(kFeatureNames[d]));
    }
    params.mean[d] = mean;
    params.std[d] = std::sqrt(var);
  }
  StandardizedFeatures out{{}, params};
  out.features.reserve(raw.size());
  for (const auto& x : raw) out.features.push_back(params.apply(x));
  return out;
}

inline StandardizedFeatures standardize(std::span<const ScadaRecord> records) {
  std::vector<FeatureVector> raw;
  raw.reserve(records.size());
  for (const auto& r : records) raw.push_back(raw_features(r));
  return standardize(raw);
}

struct EmConfig {
  int n_restarts{4};
  double rel_tol{1e-7};
  int max_iter{500};
  int kmeans_iters{10};  // Lloyd iterations cap; stops early once labels are stable
  double reg_scale{1e-6};  // diagonal loading = reg_scale * trace / 4
  int max_reseeds{3};
};

struct GaussianComponent {
  double weight{};
  Eigen::Vector4d mean{Eigen::Vector4d::Zero()};
  Eigen::Matrix4d covariance{Eigen::Matrix4d::Identity()};
};

struct FitDiagnostics {
  std::vector<double> ll_trace;   // log-likelihood after every E-step, initial parameters first
  std::vector<int> reseed_at;     // trace indices produced right after a component re-seed
  std::vector<std::string> events;
  int iterations{0};
  bool converged{false};
  int restart{0};                 // winning restart index
};

struct MixtureModel {
  int k{0};
  std::vector<GaussianComponent> components;
  double log_likelihood{};
  double aic{};
  double bic{};
  std::size_t n{0};
  Standardization standardization;
  std::uint64_t seed{0};
  FitDiagnostics diagnostics;
};

/// Free parameters of a k-component full-covariance mixture in 4-D.
inline constexpr int parameter_count(int k) {
  return (k - 1) + kFeatureDim * k + (kFeatureDim * (kFeatureDim + 1) / 2) * k;
}
inline double aic_score(double log_likelihood, int k) { return 2.0 * parameter_count(k) - 2.0 * log_likelihood; }
inline double bic_score(double log_likelihood, int k, std::size_t n) {
  return parameter_count(k) * std::log(static_cast<double>(n)) - 2.0 * log_likelihood;
}

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Cached evaluation form of one weighted component: log(w) - log|2 pi S|/2 and inverse Cholesky factor.
struct ComponentEval {
  std::array<double, kFeatureDim> mean{};
  std::array<double, 10> inv_chol{};  // lower triangle of L^-1, row-major packed
  double log_norm{};
  bool ok{false};
};

inline ComponentEval make_eval(const GaussianComponent& c) {
  ComponentEval e;
  Eigen::LLT<Eigen::Matrix4d> llt(c.covariance);
  if (llt.info() != Eigen::Success || !(c.weight > 0.0)) {
    return e;
  }
  const Eigen::Matrix4d l = llt.matrixL();
  double logdet = 0.0;
  for (int d = 0; d < kFeatureDim; ++d) logdet += 2.0 * std::log(l(d, d));
  const Eigen::Matrix4d linv = l.triangularView<Eigen::Lower>().solve(Eigen::Matrix4d::Identity());
  int p = 0;
  for (int r = 0; r < kFeatureDim; ++r) {
    for (int col = 0; col <= r; ++col) e.inv_chol[p++] = linv(r, col);
  }
  for (int d = 0; d < kFeatureDim; ++d) e.mean[d] = c.mean(d);
  e.log_norm = std::log(c.weight) - 0.5 * (kFeatureDim * kLog2Pi + logdet);
  e.ok = std::isfinite(e.log_norm);
  return e;
}

/// log( w * N(x | mean, cov) )
inline double log_weighted_density(const ComponentEval& e, const FeatureVector& x) {
  const double d0 = x[0] - e.mean[0], d1 = x[1] - e.mean[1], d2 = x[2] - e.mean[2], d3 = x[3] - e.mean[3];
  const auto& m = e.inv_chol;
  const double y0 = m[0] * d0;
  const double y1 = m[1] * d0 + m[2] * d1;
  const double y2 = m[3] * d0 + m[4] * d1 + m[5] * d2;
  const double y3 = m[6] * d0 + m[7] * d1 + m[8] * d2 + m[9] * d3;
  return e.log_norm - 0.5 * (y0 * y0 + y1 * y1 + y2 * y2 + y3 * y3);
}

/// Fills `resp` (row-major n x k) with posteriors; returns total log-likelihood.
inline double e_step(std::span<const FeatureVector> x, std::span<const ComponentEval> evals, std::vector<double>& resp) {
  const std::size_t k = evals.size();
  resp.resize(x.size() * k);
  std::vector<double> lp(k);
  KahanSum ll;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      lp[j] = evals[j].ok ? log_weighted_density(evals[j], x[i]) : -std::numeric_limits<double>::infinity();
      mx = std::max(mx, lp[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double diff = lp[j] - mx;
      // exp underflows to exactly 0 below -746; skipping the call is bit-identical
      lp[j] = diff == 0.0 ? 1.0 : (diff < -746.0 ? 0.0 : std::exp(diff));
      s += lp[j];
    }
    const double inv = 1.0 / s;
    double* r = resp.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) r[j] = lp[j] * inv;
    ll.add(mx + std::log(s));
  }
  return ll.value();
}

inline void regularize(Eigen::Matrix4d& cov, double reg_scale) {
  cov = 0.5 * (cov + cov.transpose());
  const double floor = std::max(reg_scale * cov.trace() / kFeatureDim, 1e-12);
  cov.diagonal().array() += floor;
}

/// Weighted mean and covariance with chunked, fixed-order accumulation.
inline void weighted_moments(std::span<const FeatureVector> x, const double* w, std::size_t stride, double total,
                             Eigen::Vector4d& mean, Eigen::Matrix4d& cov) {
  constexpr std::size_t kChunk = 4096;
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  for (std::size_t start = 0; start < x.size(); start += kChunk) {
    Eigen::Vector4d part = Eigen::Vector4d::Zero();
    const std::size_t end = std::min(x.size(), start + kChunk);
    for (std::size_t i = start; i < end; ++i) {
      const double wi = w[i * stride];
      for (int d = 0; d < kFeatureDim; ++d) part(d) += wi * x[i][d];
    }
    acc += part;
  }
  mean = acc / total;
  Eigen::Matrix4d cacc = Eigen::Matrix4d::Zero();
  for (std::size_t start = 0; start < x.size(); start += kChunk) {
    Eigen::Matrix4d part = Eigen::Matrix4d::Zero();
    const std::size_t end = std::min(x.size(), start + kChunk);
    for (std::size_t i = start; i < end; ++i) {
      const double wi = w[i * stride];
      if (wi == 0.0) continue;
      double dv[kFeatureDim];
      for (int d = 0; d < kFeatureDim; ++d) dv[d] = x[i][d] - mean(d);
      for (int r = 0; r < kFeatureDim; ++r) {
        for (int c = 0; c <= r; ++c) part(r, c) += wi * dv[r] * dv[c];
      }
    }
    cacc += part;
  }
  for (int r = 0; r < kFeatureDim; ++r) {
    for (int c = r + 1; c < kFeatureDim; ++c) cacc(r, c) = cacc(c, r);
  }
  cov = cacc / total;
}

inline std::vector<double> column_sums(const std::vector<double>& resp, std::size_t n, std::size_t k) {
  constexpr std::size_t kChunk = 4096;
  std::vector<double> nk(k, 0.0), part(k);
  for (std::size_t start = 0; start < n; start += kChunk) {
    std::fill(part.begin(), part.end(), 0.0);
    const std::size_t end = std::min(n, start + kChunk);
    for (std::size_t i = start; i < end; ++i) {
      for (std::size_t j = 0; j < k; ++j) part[j] += resp[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) nk[j] += part[j];
  }
  return nk;
}

/// Component moments from responsibilities; chunked fixed-order sums, centered second pass.
inline void m_step(std::span<const FeatureVector> x, const std::vector<double>& resp, std::size_t k,
                   double reg_scale, std::vector<GaussianComponent>& comps) {
  constexpr std::size_t kChunk = 4096;
  const std::size_t n = x.size();
  const auto nd = static_cast<double>(n);
  for (std::size_t j = 0; j < k; ++j) {
    const double* w = resp.data() + j;
    double nk = 0.0, s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t start = 0; start < n; start += kChunk) {
      double p = 0.0, p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
      const std::size_t end = std::min(n, start + kChunk);
      for (std::size_t i = start; i < end; ++i) {
        const double wi = w[i * k];
        const auto& xi = x[i];
        p += wi;
        p0 += wi * xi[0];
        p1 += wi * xi[1];
        p2 += wi * xi[2];
        p3 += wi * xi[3];
      }
      nk += p;
      s0 += p0;
      s1 += p1;
      s2 += p2;
      s3 += p3;
    }
    const double m0 = s0 / nk, m1 = s1 / nk, m2 = s2 / nk, m3 = s3 / nk;
    std::array<double, 10> c{};
    for (std::size_t start = 0; start < n; start += kChunk) {
      double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0, a9 = 0;
      const std::size_t end = std::min(n, start + kChunk);
      for (std::size_t i = start; i < end; ++i) {
        const double wi = w[i * k];
        const auto& xi = x[i];
        const double d0 = xi[0] - m0, d1 = xi[1] - m1, d2 = xi[2] - m2, d3 = xi[3] - m3;
        const double e0 = wi * d0, e1 = wi * d1, e2 = wi * d2, e3 = wi * d3;
        a0 += e0 * d0;
        a1 += e1 * d0;
        a2 += e1 * d1;
        a3 += e2 * d0;
        a4 += e2 * d1;
        a5 += e2 * d2;
        a6 += e3 * d0;
        a7 += e3 * d1;
        a8 += e3 * d2;
        a9 += e3 * d3;
      }
      const std::array<double, 10> part{a0, a1, a2, a3, a4, a5, a6, a7, a8, a9};
      for (std::size_t q = 0; q < c.size(); ++q) c[q] += part[q];
    }
    auto& g = comps[j];
    g.weight = nk / nd;
    g.mean = Eigen::Vector4d(m0, m1, m2, m3);
    std::size_t q = 0;
    for (int r = 0; r < kFeatureDim; ++r) {
      for (int col = 0; col <= r; ++col) g.covariance(r, col) = g.covariance(col, r) = c[q++] / nk;
    }
    regularize(g.covariance, reg_scale);
  }
}

inline double squared_distance(const FeatureVector& a, const Eigen::Vector4d& b) {
  double s = 0.0;
  for (int d = 0; d < kFeatureDim; ++d) {
    const double t = a[d] - b(d);
    s += t * t;
  }
  return s;
}

/// Greedy k-means++ seeding (best of several D^2 draws per center) followed by Lloyd iterations.
inline std::vector<GaussianComponent> kmeans_init(std::span<const FeatureVector> x, int k, std::uint64_t seed,
                                                  const EmConfig& cfg, const Eigen::Matrix4d& global_cov) {
  std::mt19937_64 rng(seed);
  const std::size_t n = x.size();
  std::vector<Eigen::Vector4d> centers;
  centers.reserve(static_cast<std::size_t>(k));
  boost::random::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const auto first = pick(rng);
  centers.emplace_back(x[first][0], x[first][1], x[first][2], x[first][3]);

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x[i], centers[0]);
  boost::random::uniform_real_distribution<double> unit(0.0, 1.0);
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  std::vector<double> trial_d2(n), best_d2(n);
  for (int c = 1; c < k; ++c) {
    KahanSum total;
    for (double v : d2) total.add(v);
    double best_potential = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (int t = 0; t < trials; ++t) {
      std::size_t chosen = n - 1;
      if (total.value() > 0.0) {
        const double target = unit(rng) * total.value();
        double run = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          run += d2[i];
          if (run >= target && d2[i] > 0.0) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = pick(rng);
      }
      const Eigen::Vector4d cand(x[chosen][0], x[chosen][1], x[chosen][2], x[chosen][3]);
      KahanSum potential;
      for (std::size_t i = 0; i < n; ++i) {
        trial_d2[i] = std::min(d2[i], squared_distance(x[i], cand));
        potential.add(trial_d2[i]);
      }
      if (potential.value() < best_potential) {
        best_potential = potential.value();
        best_idx = chosen;
        best_d2.swap(trial_d2);
      }
    }
    centers.emplace_back(x[best_idx][0], x[best_idx][1], x[best_idx][2], x[best_idx][3]);
    d2.swap(best_d2);
  }

  std::vector<int> label(n, 0);
  auto assign_all = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double dist = squared_distance(x[i], centers[static_cast<std::size_t>(c)]);
        if (dist < best) {
          best = dist;
          arg = c;
        }
      }
      changed = changed || label[i] != arg;
      label[i] = arg;
    }
    return changed;
  };
  assign_all();
  for (int it = 0; it < cfg.kmeans_iters; ++it) {
    std::vector<Eigen::Vector4d> sums(static_cast<std::size_t>(k), Eigen::Vector4d::Zero());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<std::size_t>(label[i])];
      for (int d = 0; d < kFeatureDim; ++d) s(d) += x[i][d];
      ++counts[static_cast<std::size_t>(label[i])];
    }
    for (int c = 0; c < k; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      if (counts[cu] > 0) centers[cu] = sums[cu] / static_cast<double>(counts[cu]);
    }
    if (!assign_all()) break;
  }

  std::vector<GaussianComponent> comps(static_cast<std::size_t>(k));
  std::vector<double> w(n);
  for (int c = 0; c < k; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = label[i] == c ? 1.0 : 0.0;
      count += label[i] == c ? 1 : 0;
    }
    comps[cu].weight = std::max<double>(static_cast<double>(count), 1.0) / static_cast<double>(n);
    if (count > static_cast<std::size_t>(kFeatureDim)) {
      weighted_moments(x, w.data(), 1, static_cast<double>(count), comps[cu].mean, comps[cu].covariance);
    } else {
      comps[cu].mean = centers[cu];
      comps[cu].covariance = global_cov;
    }
    regularize(comps[cu].covariance, cfg.reg_scale);
  }
  double wsum = 0.0;
  for (const auto& c : comps) wsum += c.weight;
  for (auto& c : comps) c.weight /= wsum;
  return comps;
}

struct RestartFailed {
  std::string reason;
};

struct RunResult {
  std::vector<GaussianComponent> comps;
  double ll{};
  FitDiagnostics diag;
};

inline RunResult run_em(std::span<const FeatureVector> x, int k, std::uint64_t seed, const EmConfig& cfg,
                        const Eigen::Matrix4d& global_cov) {
  const auto ku = static_cast<std::size_t>(k);
  RunResult run;
  run.comps = kmeans_init(x, k, seed, cfg, global_cov);
  std::vector<ComponentEval> evals(ku);
  std::vector<double> resp;
  auto evaluate = [&] {
    for (std::size_t j = 0; j < ku; ++j) evals[j] = make_eval(run.comps[j]);
    return e_step(x, evals, resp);
  };
  double ll = evaluate();
  run.diag.ll_trace.push_back(ll);
  int reseeds = 0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    // Re-seed collapsed components before the M-step would divide by ~0 mass.
    for (;;) {
      const auto nk = column_sums(resp, x.size(), ku);
      std::optional<std::size_t> collapsed;
      for (std::size_t j = 0; j < ku; ++j) {
        if (nk[j] < 1.0 || !evals[j].ok) {
          collapsed = j;
          break;
        }
      }
      if (!collapsed) break;
      if (++reseeds > cfg.max_reseeds) {
        throw RestartFailed{"component collapse repeated more than " + std::to_string(cfg.max_reseeds) + " times"};
      }
      std::size_t worst = 0;
      double worst_max = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = *std::max_element(resp.begin() + static_cast<std::ptrdiff_t>(i * ku),
                                           resp.begin() + static_cast<std::ptrdiff_t>((i + 1) * ku));
        if (m < worst_max) {
          worst_max = m;
          worst = i;
        }
      }
      auto& c = run.comps[*collapsed];
      c.mean = Eigen::Vector4d(x[worst][0], x[worst][1], x[worst][2], x[worst][3]);
      c.covariance = global_cov;
      regularize(c.covariance, cfg.reg_scale);
      c.weight = 1.0 / static_cast<double>(k);
      double wsum = 0.0;
      for (const auto& cc : run.comps) wsum += cc.weight;
      for (auto& cc : run.comps) cc.weight /= wsum;
      run.diag.events.push_back("iteration " + std::to_string(it) + ": component " + std::to_string(*collapsed) +
                                " collapsed, re-seeded at point " + std::to_string(worst));
      ll = evaluate();
      run.diag.reseed_at.push_back(static_cast<int>(run.diag.ll_trace.size()));
      run.diag.ll_trace.push_back(ll);
    }
    m_step(x, resp, ku, cfg.reg_scale, run.comps);
    const double next = evaluate();
    run.diag.ll_trace.push_back(next);
    run.diag.iterations = it;
    const double change = std::abs(next - ll) / std::max(std::abs(ll), std::numeric_limits<double>::min());
    ll = next;
    if (change < cfg.rel_tol) {
      run.diag.converged = true;
      break;
    }
  }
  run.ll = ll;
  return run;
}

}  // namespace detail

/// Seed of restart `r` derived from the master seed by a fixed increment.
inline constexpr std::uint64_t restart_seed(std::uint64_t master, int r) {
  return master + static_cast<std::uint64_t>(r) * 0x9E3779B97F4A7C15ULL;
}

/**
 * @brief Fits a k-component mixture by EM; best of `cfg.n_restarts` runs.
 *
 * Requires k >= 1 and at least 10 points per component. A run whose
 * components collapse more than `cfg.max_reseeds` times is abandoned; if all
 * runs are abandoned a ModelError is thrown.
 */
inline MixtureModel em_fit(std::span<const FeatureVector> features, int k, std::uint64_t seed,
                           const EmConfig& cfg = {}, const Standardization& standardization = {}) {
  if (k < 1) {
    throw ModelError("component count must be >= 1");
  }
  if (features.size() < static_cast<std::size_t>(10 * k)) {
    throw ModelError("k=" + std::to_string(k) + " needs at least " + std::to_string(10 * k) + " samples, got " +
                     std::to_string(features.size()));
  }
  for (const auto& f : features) {
    for (double v : f) {
      if (!std::isfinite(v)) throw ModelError("non-finite feature value");
    }
  }
  std::vector<FeatureVector> x(features.begin(), features.end());
  std::sort(x.begin(), x.end());

  std::vector<double> ones(x.size(), 1.0);
  Eigen::Vector4d gmean;
  Eigen::Matrix4d gcov;
  detail::weighted_moments(x, ones.data(), 1, static_cast<double>(x.size()), gmean, gcov);
  detail::regularize(gcov, cfg.reg_scale);

  std::optional<detail::RunResult> best;
  std::vector<std::string> failures;
  for (int r = 0; r < std::max(1, cfg.n_restarts); ++r) {
    try {
      auto run = detail::run_em(x, k, restart_seed(seed, r), cfg, gcov);
      run.diag.restart = r;
      if (!best || run.ll > best->ll) best = std::move(run);
    } catch (const detail::RestartFailed& f) {
      failures.push_back("restart " + std::to_string(r) + ": " + f.reason);
    }
  }
  if (!best) {
    std::string msg = "EM failed for k=" + std::to_string(k) + " in every restart";
    for (const auto& f : failures) msg += "; " + f;
    throw ModelError(msg);
  }
  MixtureModel m;
  m.k = k;
  m.components = std::move(best->comps);
  m.log_likelihood = best->ll;
  m.n = x.size();
  m.aic = aic_score(m.log_likelihood, k);
  m.bic = bic_score(m.log_likelihood, k, m.n);
  m.standardization = standardization;
  m.seed = seed;
  m.diagnostics = std::move(best->diag);
  for (auto& f : failures) m.diagnostics.events.push_back(std::move(f));
  return m;
}

struct Assignment {
  int index{0};
  std::vector<double> responsibilities;
};

/// Posterior responsibilities and argmax component (ties go to the lowest index).
inline std::vector<Assignment> assign(const MixtureModel& model, std::span<const FeatureVector> features) {
  std::vector<detail::ComponentEval> evals;
  evals.reserve(model.components.size());
  for (const auto& c : model.components) evals.push_back(detail::make_eval(c));
  std::vector<double> resp;
  detail::e_step(features, evals, resp);
  const auto k = model.components.size();
  std::vector<Assignment> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& a = out[i];
    a.responsibilities.assign(resp.begin() + static_cast<std::ptrdiff_t>(i * k),
                              resp.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    for (std::size_t j = 1; j < k; ++j) {
      if (a.responsibilities[j] > a.responsibilities[static_cast<std::size_t>(a.index)]) a.index = static_cast<int>(j);
    }
  }
  return out;
}

/// Hard labels only; avoids materializing per-point responsibility vectors.
inline std::vector<int> assign_labels(const MixtureModel& model, std::span<const FeatureVector> features) {
  std::vector<detail::ComponentEval> evals;
  for (const auto& c : model.components) evals.push_back(detail::make_eval(c));
  std::vector<int> out(features.size(), 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < evals.size(); ++j) {
      const double lp =
          evals[j].ok ? detail::log_weighted_density(evals[j], features[i]) : -std::numeric_limits<double>::infinity();
      if (lp > best) {
        best = lp;
        out[i] = static_cast<int>(j);
      }
    }
  }
  return out;
}

enum class SelectionRule { MinAic, FixedK };

inline std::string_view to_string(SelectionRule r) { return r == SelectionRule::MinAic ? "min-aic" : "fixed-k"; }
inline std::optional<SelectionRule> parse_selection_rule(std::string_view s) {
  if (s == "min-aic") return SelectionRule::MinAic;
  if (s == "fixed-k") return SelectionRule::FixedK;
  return std::nullopt;
}

struct SweepEntry {
  int k{};
  double aic{};
  double bic{};
  double log_likelihood{};
};

struct ModelSweep {
  std::vector<SweepEntry> entries;
  std::vector<MixtureModel> models;  // parallel to entries
  int chosen_k{0};
  SelectionRule rule{SelectionRule::MinAic};
  std::vector<std::string> warnings;

  [[nodiscard]] const MixtureModel& chosen() const {
    for (const auto& m : models) {
      if (m.k == chosen_k) return m;
    }
    throw ModelError("chosen k missing from sweep");
  }
};

/**
 * @brief Fits one model per k in [k_min, k_max] and selects a component count.
 *
 * Under FixedK the chosen count is `fixed_k`, which must lie in the range.
 * A k whose fit fails is omitted with a warning; an empty sweep is fatal.
 */
inline ModelSweep sweep_k(std::span<const FeatureVector> features, int k_min, int k_max, std::uint64_t seed,
                          const EmConfig& cfg = {}, SelectionRule rule = SelectionRule::MinAic, int fixed_k = 6,
                          const Standardization& standardization = {}) {
  if (k_min < 1 || k_max > 25 || k_min > k_max) {
    throw ConfigError("k range must satisfy 1 <= k_min <= k_max <= 25, got " + std::to_string(k_min) + ".." +
                      std::to_string(k_max));
  }
  if (rule == SelectionRule::FixedK && (fixed_k < k_min || fixed_k > k_max)) {
    throw ConfigError("fixed k=" + std::to_string(fixed_k) + " lies outside the k range");
  }
  ModelSweep sweep;
  sweep.rule = rule;
  for (int k = k_min; k <= k_max; ++k) {
    try {
      auto m = em_fit(features, k, seed, cfg, standardization);
      sweep.entries.push_back({k, m.aic, m.bic, m.log_likelihood});
      sweep.models.push_back(std::move(m));
    } catch (const ModelError& e) {
      sweep.warnings.push_back("k=" + std::to_string(k) + " omitted: " + e.what());
    }
  }
  if (sweep.entries.empty()) {
    throw ModelError("model sweep produced no fitted models");
  }
  if (rule == SelectionRule::MinAic) {
    const auto best = std::min_element(sweep.entries.begin(), sweep.entries.end(),
                                       [](const SweepEntry& a, const SweepEntry& b) { return a.aic < b.aic; });
    sweep.chosen_k = best->k;
  } else {
    const bool present = std::any_of(sweep.entries.begin(), sweep.entries.end(),
                                     [&](const SweepEntry& e) { return e.k == fixed_k; });
    if (!present) {
      throw ModelError("fixed k=" + std::to_string(fixed_k) + " failed to fit");
    }
    sweep.chosen_k = fixed_k;
  }
  return sweep;
}

// ---- JSON ----

inline nlohmann::ordered_json model_to_json(const MixtureModel& m) {
  nlohmann::ordered_json j;
  j["k"] = m.k;
  // ordered_json objects are vector-backed; build arrays before inserting
  auto weights = nlohmann::ordered_json::array();
  auto means = nlohmann::ordered_json::array();
  auto covs = nlohmann::ordered_json::array();
  for (const auto& c : m.components) {
    weights.push_back(c.weight);
    nlohmann::ordered_json mu = nlohmann::ordered_json::array();
    for (int d = 0; d < kFeatureDim; ++d) mu.push_back(c.mean(d));
    means.push_back(std::move(mu));
    nlohmann::ordered_json cov = nlohmann::ordered_json::array();
    for (int r = 0; r < kFeatureDim; ++r) {
      for (int col = 0; col < kFeatureDim; ++col) cov.push_back(c.covariance(r, col));
    }
    covs.push_back(std::move(cov));
  }
  j["weights"] = std::move(weights);
  j["means"] = std::move(means);
  j["covariances"] = std::move(covs);
  j["feature_order"] = {"power", "wind_speed", "rotor_rpm", "pitch_angle"};
  j["standardization"] = {{"mean", m.standardization.mean}, {"std", m.standardization.std}};
  j["seed"] = m.seed;
  j["n"] = m.n;
  j["log_likelihood"] = m.log_likelihood;
  j["aic"] = m.aic;
  j["bic"] = m.bic;
  j["iterations"] = m.diagnostics.iterations;
  j["converged"] = m.diagnostics.converged;
  j["restart"] = m.diagnostics.restart;
  return j;
}

inline MixtureModel model_from_json(const nlohmann::json& j) {
  try {
    MixtureModel m;
    m.k = j.at("k").get<int>();
    const auto& weights = j.at("weights");
    const auto& means = j.at("means");
    const auto& covs = j.at("covariances");
    if (static_cast<int>(weights.size()) != m.k || static_cast<int>(means.size()) != m.k ||
        static_cast<int>(covs.size()) != m.k) {
      throw ModelError("model JSON component arrays do not match k");
    }
    for (int c = 0; c < m.k; ++c) {
      GaussianComponent g;
      g.weight = weights[static_cast<std::size_t>(c)].get<double>();
      for (int d = 0; d < kFeatureDim; ++d) g.mean(d) = means[static_cast<std::size_t>(c)].at(static_cast<std::size_t>(d)).get<double>();
      for (int r = 0; r < kFeatureDim; ++r) {
        for (int col = 0; col < kFeatureDim; ++col) {
          g.covariance(r, col) = covs[static_cast<std::size_t>(c)].at(static_cast<std::size_t>(r * kFeatureDim + col)).get<double>();
        }
      }
      m.components.push_back(g);
    }
    m.standardization.mean = j.at("standardization").at("mean").get<std::array<double, kFeatureDim>>();
    m.standardization.std = j.at("standardization").at("std").get<std::array<double, kFeatureDim>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n = j.at("n").get<std::size_t>();
    m.log_likelihood = j.at("log_likelihood").get<double>();
    m.aic = j.at("aic").get<double>();
    m.bic = j.at("bic").get<double>();
    m.diagnostics.iterations = j.value("iterations", 0);
    m.diagnostics.converged = j.value("converged", false);
    m.diagnostics.restart = j.value("restart", 0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace gearwatch
