#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "sfgru/sweeps.hpp"

using namespace sfgru;

namespace {

std::vector<Track> sweep_tracks(std::size_t n = 24, std::size_t len = 140) {
  SynthConfig cfg;
  cfg.n_tracks = n;
  cfg.track_len_frames = len;
  cfg.class_ratio = 1.0;
  cfg.snr = 8.0;
  cfg.seed = 5;
  return synth_generate(cfg);
}

SweepConfig quick_config() {
  SweepConfig cfg;
  cfg.train = TrainConfig::synth_defaults();
  cfg.train.epochs = 1;
  cfg.train.batch_size = 8;
  cfg.train.seed = 7;
  cfg.split_seed = 7;
  return cfg;
}

ModelSpec quick_spec(ModelKind kind, std::size_t m = 15) {
  ModelSpec spec;
  spec.kind = kind;
  spec.hidden_dim = 4;
  spec.obs_len = m;
  if (kind == ModelKind::Static) spec.fusion_order = {FeatureKey::Cp, FeatureKey::Cs};
  return spec;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += static_cast<std::size_t>(c == '\n');
  return n;
}

}  // namespace

TEST(SweepTte, OneRowPerModelAndAnchor) {
  const std::vector<Track> tracks = sweep_tracks();
  const std::vector<ModelSpec> specs = {quick_spec(ModelKind::Static),
                                        quick_spec(ModelKind::StackedFusionGru)};
  const SweepResult result = sweep_tte(specs, tracks, 15, quick_config());
  ASSERT_EQ(result.rows.size(), 38u);

  std::set<double> ttes;
  for (const SweepRow& r : result.rows) {
    ttes.insert(r.tte_s);
    EXPECT_TRUE(r.metrics.has_value()) << r.model << " tte " << r.tte_s << ": " << r.skip_reason;
    EXPECT_DOUBLE_EQ(r.obs_len_s, 0.5);
  }
  EXPECT_EQ(ttes.size(), 19u);
  EXPECT_DOUBLE_EQ(*ttes.begin(), 0.0);
  EXPECT_DOUBLE_EQ(*ttes.rbegin(), 3.0);
  EXPECT_EQ(result.rows.front().model, "static");
  EXPECT_EQ(result.rows.back().model, "sf-gru");
}

TEST(SweepObsLength, SixteenCombinations) {
  const std::vector<Track> tracks = sweep_tracks();
  const SweepResult result =
      sweep_obs_length(quick_spec(ModelKind::StackedFusionGru), tracks, quick_config());
  ASSERT_EQ(result.rows.size(), 16u);
  std::set<std::pair<double, double>> grid;
  for (const SweepRow& r : result.rows) {
    grid.insert({r.obs_len_s, r.tte_s});
    EXPECT_TRUE(r.metrics.has_value()) << r.skip_reason;
  }
  EXPECT_EQ(grid.size(), 16u);
  EXPECT_TRUE(grid.count({0.3, 0.0}));
  EXPECT_TRUE(grid.count({1.5, 3.0}));
}

TEST(AblateFeatures, SevenConfigurations) {
  const std::vector<Track> tracks = sweep_tracks();
  const SweepResult result =
      ablate_features(quick_spec(ModelKind::StackedFusionGru), tracks, quick_config());
  ASSERT_EQ(result.rows.size(), 7u);
  const std::vector<std::string> expected = {"Cp",        "Cps",         "Cp+Cs",
                                             "Cp+Cs+P",   "Cp+Cs+P+D",   "Cp+Cs+P+B",
                                             "Cp+Cs+P+B+S"};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(result.rows[i].features, expected[i]);
    EXPECT_TRUE(result.rows[i].metrics.has_value()) << result.rows[i].skip_reason;
  }
}

TEST(FusionOrder, SixPermutationsAndValidation) {
  const std::vector<Track> tracks = sweep_tracks();
  const SweepResult result =
      sweep_fusion_order(tracks, default_fusion_orders(), quick_config(), 4, 15, 60);
  ASSERT_EQ(result.rows.size(), 6u);
  EXPECT_EQ(result.rows.front().fusion_order, "P+S+B+Cp+Cs");
  EXPECT_EQ(result.rows.back().fusion_order, "Cp+Cs+P+B+S");
  for (const SweepRow& r : result.rows) EXPECT_EQ(r.model, "sf-gru");

  // a non-permutation order is rejected up front
  EXPECT_THROW(sweep_fusion_order(tracks, {{FeatureKey::Cp, FeatureKey::Cp, FeatureKey::P,
                                            FeatureKey::B, FeatureKey::S}},
                                  quick_config()),
               error);
  EXPECT_THROW(sweep_fusion_order(tracks, {{FeatureKey::Cp, FeatureKey::Cs}}, quick_config()),
               error);
}

TEST(Sweeps, SkippedConditionsKeepTheirRows) {
  // tracks too short for a 2 s anchor: every condition is emitted but skipped
  const std::vector<Track> tracks = sweep_tracks(6, 30);
  const SweepResult result =
      ablate_features(quick_spec(ModelKind::StackedFusionGru), tracks, quick_config());
  ASSERT_EQ(result.rows.size(), 7u);
  for (const SweepRow& r : result.rows) {
    EXPECT_FALSE(r.metrics.has_value());
    EXPECT_FALSE(r.skip_reason.empty());
  }
  const std::string csv = to_csv(result);
  EXPECT_NE(csv.find("NA,NA,NA,NA,NA"), std::string::npos);
}

TEST(Sweeps, DeterministicAndJobInvariant) {
  const std::vector<Track> tracks = sweep_tracks();
  SweepConfig cfg = quick_config();
  const std::string csv1 = to_csv(sweep_fusion_order(tracks, default_fusion_orders(), cfg, 4));
  const std::string csv2 = to_csv(sweep_fusion_order(tracks, default_fusion_orders(), cfg, 4));
  EXPECT_EQ(csv1, csv2);

  cfg.jobs = 2;
  const std::string csv3 = to_csv(sweep_fusion_order(tracks, default_fusion_orders(), cfg, 4));
  EXPECT_EQ(csv1, csv3);
}

TEST(Csv, HeaderAndFormatting) {
  SweepResult result;
  SweepRow row;
  row.model = "sf-gru";
  row.fusion_order = "Cp+Cs+P+B+S";
  row.features = "Cp+Cs+P+B+S";
  row.tte_s = 2.0;
  row.obs_len_s = 0.5;
  MetricsReport m;
  m.accuracy = 0.84444;
  m.auc = 0.829;
  m.f1 = 0.721;
  m.precision = 0.657;
  m.recall = 0.8;
  row.metrics = m;
  row.n_train = 100;
  row.n_test = 40;
  row.seed = 12345;
  result.rows.push_back(row);

  const std::string csv = to_csv(result);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header,
            "model,fusion_order,features,tte_s,obs_len_s,acc,auc,f1,precision,recall,n_train,"
            "n_test,seed");
  std::getline(in, line);
  EXPECT_EQ(line, "sf-gru,Cp+Cs+P+B+S,Cp+Cs+P+B+S,2.0000,0.5000,0.8444,0.8290,0.7210,0.6570,"
                  "0.8000,100,40,12345");
  EXPECT_EQ(count_lines(csv), 2u);

  // undefined AUC prints NA
  result.rows[0].metrics->auc.reset();
  EXPECT_NE(to_csv(result).find(",NA,"), std::string::npos);
}
