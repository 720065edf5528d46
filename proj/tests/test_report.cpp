#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace gearwatch;
using gwtest::at;
using gwtest::record;

TEST(ModeStats, SingleRecordCluster) {
  const std::vector<ScadaRecord> recs{record(at(2016, 1, 1), "T01", 7.5, 800.0, 13.0, 1560.0, -1.5)};
  const std::vector<int> cl{0};
  const std::vector<ModeLabel> mapping{ModeLabel::SubRatedProduction};
  const auto rows = mode_stats(recs, cl, mapping);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].mode, ModeLabel::SubRatedProduction);
  EXPECT_EQ(rows[0].count, 1u);
  const std::array<double, 4> v{7.5, 13.0, -1.5, 800.0};
  for (int d = 0; d < 4; ++d) {
    EXPECT_EQ(rows[0].features[d].min, v[d]);
    EXPECT_EQ(rows[0].features[d].max, v[d]);
    EXPECT_EQ(rows[0].features[d].mean, v[d]);
  }
}

TEST(ModeStats, IdlingOnlyStream) {
  std::vector<ScadaRecord> recs;
  for (int i = 0; i < 50; ++i) recs.push_back(record(at(2016, 1, 1) + std::chrono::minutes{10 * i}, "T01", 1.0 + i * 0.01, -3.0, 0.5, 2.0, 24.0));
  const std::vector<int> cl(recs.size(), 1);
  const std::vector<ModeLabel> mapping{ModeLabel::Start, ModeLabel::Idling};
  const auto rows = mode_stats(recs, cl, mapping);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].mode, ModeLabel::Idling);
  EXPECT_EQ(rows[0].count, 50u);
  EXPECT_DOUBLE_EQ(rows[0].features[0].min, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].features[0].max, 1.49);
  EXPECT_NEAR(rows[0].features[0].mean, 1.245, 1e-12);
}

TEST(ModeStats, CountsSumAndOrdering) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_int_distribution<int> pick(0, 6);
  std::vector<ModeLabel> mapping{ModeLabel::RatedProduction, ModeLabel::Idling,  ModeLabel::Start,
                                 ModeLabel::PitchManaged,    ModeLabel::Idling,  ModeLabel::GridConnecting,
                                 ModeLabel::SubRatedProduction};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScadaRecord> recs;
    std::vector<int> cl;
    const int n = 1 + static_cast<int>(rng() % 500);
    for (int i = 0; i < n; ++i) {
      recs.push_back(record(at(2016, 1, 1) + std::chrono::minutes{10 * i}, "T01", u(rng), u(rng) * 20 - 30, u(rng) / 6,
                            u(rng), u(rng) - 5));
      cl.push_back(pick(rng));
    }
    const auto rows = mode_stats(recs, cl, mapping);
    std::size_t total = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      total += rows[i].count;
      if (i > 0) {
        EXPECT_LT(rows[i - 1].mode, rows[i].mode);
      }
      for (const auto& f : rows[i].features) {
        EXPECT_LE(f.min, f.mean);
        EXPECT_LE(f.mean, f.max);
      }
    }
    EXPECT_EQ(total, recs.size());
  }
}

TEST(ModeStats, Preconditions) {
  const std::vector<ScadaRecord> recs{record(at(2016, 1, 1), "T01", 1, 1, 1, 1, 1)};
  const std::vector<ModeLabel> mapping{ModeLabel::Idling};
  EXPECT_THROW(mode_stats(recs, std::vector<int>{}, mapping), ModelError);
  EXPECT_THROW(mode_stats(recs, std::vector<int>{3}, mapping), ModelError);
}

TEST(Report, AssembleAndRender) {
  nlohmann::ordered_json model;
  model["turbine_id"] = "T01";
  model["k"] = 2;
  model["aic"] = 10.5;
  model["bic"] = 12.25;
  model["cluster_labels"] = {"Idling", "Rated Production"};
  model["sweep"] = {{"selection_rule", "fixed-k"},
                    {"chosen_k", 2},
                    {"min_aic_k", 2},
                    {"entries", {{{"k", 2}, {"aic", 10.5}, {"bic", 12.25}, {"loglik", -1.0}}}}};
  model["mode_stats"] = nlohmann::ordered_json::array();
  nlohmann::ordered_json ratio;
  ratio["threshold"] = 0.99;
  ratio["models"] = {{{"turbine", "T01"}, {"mode", "Rated Production"}, {"slope", 120.0}, {"intercept", 0.5},
                      {"r2", 0.999}, {"n", 100}}};
  ratio["rejected"] = {{{"turbine", "T01"}, {"mode", "Idling"}, {"r2", 0.1}, {"reason", "r2 below threshold"}}};
  nlohmann::ordered_json summary;
  summary["pooling"] = "pooled";
  summary["turbines"]["T01"] = {{"status", "monitored"},
                                {"flags", {{{"iso_year", 2017}, {"iso_week", 40}, {"rule", "beyond-3-sigma"}, {"value", 4.5}}}}};
  const std::vector<nlohmann::ordered_json> models{model};
  const auto rep = assemble_report(models, ratio, summary);
  const auto& t = rep.at("turbines").at("T01");
  EXPECT_EQ(t.at("k"), 2);
  EXPECT_EQ(t.at("status"), "monitored");
  EXPECT_EQ(t.at("ratio_models").size(), 1u);
  EXPECT_EQ(t.at("rejected_modes").size(), 1u);
  EXPECT_EQ(rep.at("r2_threshold"), 0.99);

  const auto text = report_text(rep);
  EXPECT_NE(text.find("== turbine T01 =="), std::string::npos);
  EXPECT_NE(text.find("flag 2017-W40 beyond-3-sigma"), std::string::npos);
  EXPECT_NE(text.find("rejected Idling"), std::string::npos);
  EXPECT_NE(text.find("slope 120"), std::string::npos);

  const auto partial = assemble_report(models, nlohmann::ordered_json(), nlohmann::ordered_json());
  EXPECT_FALSE(partial.contains("pooling"));
  EXPECT_FALSE(partial["turbines"]["T01"].contains("status"));
  EXPECT_NO_THROW(report_text(partial));
}
