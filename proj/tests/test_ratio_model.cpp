#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace gearwatch;

namespace {

std::vector<SpeedPoint> noisy_line(std::size_t n, double slope, double intercept, double sigma, double lo, double hi,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::normal_distribution<double> e(0.0, sigma);
  std::vector<SpeedPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = u(rng);
    pts.push_back({r, slope * r + intercept + e(rng)});
  }
  return pts;
}

}  // namespace

TEST(SpeedRatio, Examples) {
  EXPECT_EQ(speed_ratio(10.0, 10.0), 1.0);
  EXPECT_NEAR(speed_ratio(14.9, 1800.0), 0.0082777777777777777, 1e-15);
  EXPECT_THROW(speed_ratio(5.0, 0.0), MonitorError);
  EXPECT_THROW(speed_ratio(5.0, -1.0), MonitorError);
}

TEST(FitRatio, ExactLine) {
  std::vector<SpeedPoint> pts;
  for (int i = 0; i < 40; ++i) {
    const double r = 10.0 + 0.1 * i;
    pts.push_back({r, 120.0 * r});
  }
  const auto m = fit_ratio_model(pts, "T01", ModeLabel::SubRatedProduction, 2016);
  EXPECT_NEAR(m.slope, 120.0, 1e-10);
  EXPECT_NEAR(m.intercept, 0.0, 1e-8);
  EXPECT_NEAR(m.r_squared, 1.0, 1e-12);
  EXPECT_EQ(m.n, 40u);
  EXPECT_EQ(m.train_period, 2016);
  EXPECT_EQ(m.turbine_id, "T01");
  EXPECT_EQ(m.mode, ModeLabel::SubRatedProduction);
}

TEST(FitRatio, NoisyProductionLine) {
  const auto pts = noisy_line(1000, 120.0, 0.0, 1.0, 11.0, 15.0, 4);
  const auto m = fit_ratio_model(pts, "T01", ModeLabel::RatedProduction, 2016);
  EXPECT_NEAR(m.slope, 120.0, 0.5);
  EXPECT_GE(m.r_squared, 0.996);
}

TEST(FitRatio, MatchesNormalEquationOracle) {
  std::mt19937_64 rng(100);
  std::uniform_int_distribution<int> size(30, 100);
  std::uniform_real_distribution<double> coef(-200.0, 200.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    const auto pts = noisy_line(n, coef(rng), coef(rng), 3.0, 0.0, 15.0, rng());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      x(static_cast<Eigen::Index>(i), 0) = pts[i].rotor_rpm;
      x(static_cast<Eigen::Index>(i), 1) = 1.0;
      y(static_cast<Eigen::Index>(i)) = pts[i].gen_rpm;
    }
    const Eigen::Vector2d beta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    const auto m = fit_ratio_model(pts, "T", ModeLabel::Start, 2016);
    EXPECT_NEAR(m.slope, beta(0), 1e-9 * std::max(1.0, std::abs(beta(0))));
    EXPECT_NEAR(m.intercept, beta(1), 1e-9 * std::max(1.0, std::abs(beta(1))));
    double res_sum = 0.0, abs_gen = 0.0;
    for (const auto& p : pts) {
      res_sum += p.gen_rpm - m.predict(p.rotor_rpm);
      abs_gen += std::abs(p.gen_rpm);
    }
    EXPECT_LE(std::abs(res_sum), 1e-8 * abs_gen);
    EXPECT_GE(m.r_squared, 0.0);
    EXPECT_LE(m.r_squared, 1.0);
  }
}

TEST(FitRatio, OffsetShiftsInterceptOnly) {
  const auto pts = noisy_line(200, 118.0, 3.0, 1.0, 10.0, 15.0, 9);
  const auto base = fit_ratio_model(pts, "T", ModeLabel::Start, 2016);
  auto shifted = pts;
  const double c = 250.0;
  for (auto& p : shifted) p.gen_rpm += c;
  const auto m = fit_ratio_model(shifted, "T", ModeLabel::Start, 2016);
  EXPECT_NEAR(m.slope, base.slope, 1e-9);
  EXPECT_NEAR(m.intercept, base.intercept + c, 1e-8);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(shifted[i].gen_rpm - m.predict(shifted[i].rotor_rpm), pts[i].gen_rpm - base.predict(pts[i].rotor_rpm),
                1e-8);
  }
}

TEST(FitRatio, RSquaredInvariantUnderRotorRescaling) {
  const auto pts = noisy_line(300, 120.0, 0.0, 5.0, 0.0, 15.0, 10);
  const auto base = fit_ratio_model(pts, "T", ModeLabel::Start, 2016);
  auto scaled = pts;
  for (auto& p : scaled) p.rotor_rpm = 60.0 * p.rotor_rpm + 7.0;
  const auto m = fit_ratio_model(scaled, "T", ModeLabel::Start, 2016);
  EXPECT_NEAR(m.r_squared, base.r_squared, 1e-12);
  EXPECT_NEAR(m.slope * 60.0, base.slope, 1e-9);
}

TEST(FitRatio, Errors) {
  EXPECT_THROW(fit_ratio_model(noisy_line(29, 120, 0, 1, 10, 15, 1), "T", ModeLabel::Start, 2016), MonitorError);
  std::vector<SpeedPoint> flat(40, SpeedPoint{12.0, 1440.0});
  EXPECT_THROW(fit_ratio_model(flat, "T", ModeLabel::Start, 2016), MonitorError);
  std::vector<SpeedPoint> const_gen;
  for (int i = 0; i < 40; ++i) const_gen.push_back({10.0 + i, 5.0});
  EXPECT_EQ(fit_ratio_model(const_gen, "T", ModeLabel::Start, 2016).r_squared, 0.0);
}

TEST(Residuals, Examples) {
  RatioModel m;
  m.slope = 120.0;
  m.intercept = 0.0;
  const std::vector<TimedSpeedPoint> pts{{gwtest::at(2017, 1, 1), 10.0, 1205.0},
                                         {gwtest::at(2017, 1, 1, 0, 10), 12.0, 1440.0}};
  const auto r = residuals(m, pts);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_DOUBLE_EQ(r[0].residual, 5.0);
  EXPECT_EQ(r[0].timestamp, pts[0].timestamp);
  EXPECT_DOUBLE_EQ(r[1].residual, 0.0);
}

TEST(GateModes, ThresholdComparison) {
  std::vector<RatioModel> models(3);
  const std::array<double, 3> r2{0.999, 0.991, 0.42};
  const std::array<ModeLabel, 3> modes{ModeLabel::SubRatedProduction, ModeLabel::GridConnecting, ModeLabel::Idling};
  for (std::size_t i = 0; i < 3; ++i) {
    models[i].turbine_id = "T01";
    models[i].mode = modes[i];
    models[i].r_squared = r2[i];
  }
  const auto g = gate_modes(models, 0.99);
  const auto& t = g.turbines.at("T01");
  ASSERT_EQ(t.retained.size(), 2u);
  EXPECT_EQ(t.retained[0].mode, ModeLabel::SubRatedProduction);
  EXPECT_EQ(t.retained[1].mode, ModeLabel::GridConnecting);
  ASSERT_EQ(t.rejected.size(), 1u);
  EXPECT_EQ(t.rejected[0].mode, ModeLabel::Idling);
  EXPECT_EQ(t.rejected[0].r_squared, 0.42);
  EXPECT_FALSE(t.excluded());
  EXPECT_TRUE(g.warnings.empty());
}

TEST(GateModes, IdlingLikeNoiseIsRejected) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> rotor(0.8, 0.7), gen(0.0, 5.0);
  std::vector<SpeedPoint> pts;
  for (int i = 0; i < 2000; ++i) pts.push_back({std::max(0.0, rotor(rng)), std::abs(gen(rng))});
  const auto m = fit_ratio_model(pts, "T09", ModeLabel::Idling, 2016);
  EXPECT_LT(m.r_squared, 0.5);
  const auto g = gate_modes(std::vector<RatioModel>{m}, 0.99);
  EXPECT_TRUE(g.turbines.at("T09").excluded());
  ASSERT_EQ(g.warnings.size(), 1u);
  EXPECT_NE(g.warnings[0].find("T09"), std::string::npos);
}

TEST(GateModes, ThresholdRange) {
  EXPECT_THROW(gate_modes({}, 0.0), ConfigError);
  EXPECT_THROW(gate_modes({}, 1.0), ConfigError);
  EXPECT_NO_THROW(gate_modes({}, 0.5));
}
