#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sfgru/dataset.hpp"

using namespace sfgru;

namespace {

// Minimal hand-built track; c_p[0] stores the frame index so window tests
// can see exactly which frames were picked.
Track marker_track(const std::string& id, std::size_t len, std::size_t event, int label) {
  Track t;
  t.id = id;
  t.fps = 30.0;
  t.frame_w = 1920;
  t.frame_h = 1080;
  t.label = label;
  t.event_frame = event;
  for (std::size_t i = 0; i < len; ++i) {
    TrackFrame f;
    const double x = 100.0 + static_cast<double>(i);
    f.bbox = BBox{x, 200.0, x + 40.0, 320.0};
    for (std::size_t j = 0; j < kPoseDim; ++j) f.pose.joints[j] = 500.0;
    f.speed_kmh = 20.0;
    f.c_p = Vec(kContextDim, 0.0);
    f.c_p[0] = static_cast<double>(i);
    f.c_s = Vec(kContextDim, 0.5);
    t.frames.push_back(std::move(f));
  }
  return t;
}

std::string tmp_path(const std::string& name) { return ::testing::TempDir() + "/" + name; }

}  // namespace

TEST(LoadTracks, EmptyFileGivesEmptyList) {
  const std::string path = tmp_path("empty.jsonl");
  std::ofstream(path).close();
  EXPECT_TRUE(load_tracks(path).empty());
}

TEST(LoadTracks, RoundTripIsLossless) {
  SynthConfig cfg;
  cfg.n_tracks = 3;
  cfg.track_len_frames = 5;
  cfg.seed = 4;
  cfg.emit_flip_context = true;
  const std::vector<Track> tracks = synth_generate(cfg);
  const std::string path = tmp_path("roundtrip.jsonl");
  save_tracks(path, tracks);
  const std::vector<Track> loaded = load_tracks(path);
  ASSERT_EQ(loaded.size(), tracks.size());

  // compare through a second serialization: equal bytes means equal values
  const std::string path2 = tmp_path("roundtrip2.jsonl");
  save_tracks(path2, loaded);
  std::ifstream a(path), b(path2);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  EXPECT_EQ(sa, sb);
}

TEST(LoadTracks, BadDimensionNamesFieldAndLine) {
  SynthConfig cfg;
  cfg.n_tracks = 2;
  cfg.track_len_frames = 3;
  const std::vector<Track> tracks = synth_generate(cfg);
  const std::string good = tmp_path("good.jsonl");
  save_tracks(good, tracks);

  // truncate one c_p on the second line
  std::ifstream in(good);
  std::string line1, line2;
  std::getline(in, line1);
  std::getline(in, line2);
  const auto pos = line2.find("\"c_p\":[");
  ASSERT_NE(pos, std::string::npos);
  // drop one number from the array
  const auto comma = line2.find(',', pos + 7);
  line2.erase(pos + 7, comma - (pos + 7) + 1);
  const std::string bad = tmp_path("bad.jsonl");
  std::ofstream(bad) << line1 << "\n" << line2 << "\n";

  try {
    load_tracks(bad);
    FAIL() << "expected schema error";
  } catch (const schema_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("c_p"), std::string::npos) << msg;
  }
}

TEST(LoadTracks, MalformedJsonReportsLine) {
  const std::string path = tmp_path("malformed.jsonl");
  std::ofstream(path) << "{\"id\": \"a\"\n";
  try {
    load_tracks(path);
    FAIL() << "expected schema error";
  } catch (const schema_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(LoadTracks, UnknownFieldsRejected) {
  SynthConfig cfg;
  cfg.n_tracks = 1;
  cfg.track_len_frames = 3;
  const std::vector<Track> tracks = synth_generate(cfg);
  const std::string good = tmp_path("known.jsonl");
  save_tracks(good, tracks);
  std::ifstream in(good);
  std::string line;
  std::getline(in, line);
  line.insert(1, "\"surprise\":1,");
  const std::string bad = tmp_path("unknown.jsonl");
  std::ofstream(bad) << line << "\n";
  EXPECT_THROW(load_tracks(bad), schema_error);
}

TEST(Split, SixtyFortyDeterministicAndDisjoint) {
  std::vector<Track> tracks;
  for (int i = 0; i < 10; ++i) {
    tracks.push_back(marker_track("t" + std::to_string(i), 3, 2, i % 2));
  }
  const DatasetSplit s1 = split_train_test(tracks, 0.6, 42);
  const DatasetSplit s2 = split_train_test(tracks, 0.6, 42);
  EXPECT_EQ(s1.train.size(), 6u);
  EXPECT_EQ(s1.test.size(), 4u);
  EXPECT_EQ(s1.train, s2.train);
  EXPECT_EQ(s1.test, s2.test);

  std::set<std::string> all(s1.train.begin(), s1.train.end());
  for (const std::string& id : s1.test) EXPECT_TRUE(all.insert(id).second);
  EXPECT_EQ(all.size(), 10u);

  EXPECT_THROW(split_train_test({tracks[0]}, 0.6, 1), error);
}

TEST(SampleWindow, AnchorsAtEventMinusTte) {
  Track track = marker_track("t", 220, 200, 1);
  const auto s = sample_window(track, SamplingSpec::make(15, 60));
  ASSERT_TRUE(s.has_value());
  ASSERT_EQ(s->window.length(), 15u);
  EXPECT_DOUBLE_EQ(s->window.frames.front().c_p[0], 126.0);
  EXPECT_DOUBLE_EQ(s->window.frames.back().c_p[0], 140.0);
  EXPECT_EQ(s->label, 1);
}

TEST(SampleWindow, ZeroTteEndsAtEvent) {
  Track track = marker_track("t", 100, 80, 0);
  const auto s = sample_window(track, SamplingSpec::make(10, 0));
  ASSERT_TRUE(s.has_value());
  EXPECT_DOUBLE_EQ(s->window.frames.back().c_p[0], 80.0);
}

TEST(SampleWindow, InsufficientHistoryIsSkipSignal) {
  Track track = marker_track("t", 30, 29, 0);
  EXPECT_FALSE(sample_window(track, SamplingSpec::make(15, 60)).has_value());
  EXPECT_FALSE(sample_window(track, SamplingSpec::make(31, 0)).has_value());
}

TEST(SampleWindow, NeverReadsPastTheAnchor) {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t len = 40 + rng.next_below(100);
    const std::size_t event = len - 1 - rng.next_below(5);
    Track track = marker_track("t", len, event, 1);
    const std::size_t m = 1 + rng.next_below(20);
    const std::size_t tte = rng.next_below(40);
    const auto s = sample_window(track, SamplingSpec::make(m, tte));
    if (!s) continue;
    for (const FrameFeatures& f : s->window.frames) {
      EXPECT_LE(f.c_p[0], static_cast<double>(event - tte));
    }
  }
}

TEST(TteGrid, NineteenPointsOverThreeSeconds) {
  const std::vector<std::size_t> grid = tte_grid(30.0);
  ASSERT_EQ(grid.size(), 19u);
  EXPECT_EQ(grid.front(), 0u);
  EXPECT_EQ(grid.back(), 90u);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_EQ(grid[i] - grid[i - 1], 5u);
}

TEST(FilterMinLength, ThresholdArithmetic) {
  std::vector<Track> tracks;
  tracks.push_back(marker_track("keep35", 120, 104, 1));   // 105 usable frames
  tracks.push_back(marker_track("drop35", 120, 103, 0));   // 104 usable frames
  tracks.push_back(marker_track("keep45", 140, 134, 1));   // 135 usable frames
  const auto at35 = filter_min_length(tracks, 3.5);
  ASSERT_EQ(at35.size(), 2u);
  EXPECT_EQ(at35[0].id, "keep35");
  const auto at45 = filter_min_length(tracks, 4.5);
  ASSERT_EQ(at45.size(), 1u);
  EXPECT_EQ(at45[0].id, "keep45");
  EXPECT_TRUE(filter_min_length({}, 3.5).empty());
}

TEST(FilterMinLength, EveryKeptTrackYieldsWindowsAtEveryGridPoint) {
  std::vector<Track> tracks;
  for (int i = 0; i < 5; ++i) {
    tracks.push_back(marker_track("t" + std::to_string(i), 110 + i, 104 + i % 3, i % 2));
  }
  for (const Track& t : filter_min_length(tracks, 3.5)) {
    for (std::size_t tte : tte_grid()) {
      EXPECT_TRUE(sample_window(t, SamplingSpec::make(15, tte)).has_value())
          << t.id << " tte " << tte;
    }
  }
}

TEST(Balance, ExactEqualityAndDeterminism) {
  std::vector<WindowSample> samples;
  Track big = marker_track("big", 20, 19, 0);
  for (int i = 0; i < 50; ++i) {
    WindowSample s = *sample_window(big, SamplingSpec::make(3, 0));
    s.label = 0;
    s.track_id = "n" + std::to_string(i);
    samples.push_back(std::move(s));
  }
  for (int i = 0; i < 20; ++i) {
    WindowSample s = *sample_window(big, SamplingSpec::make(3, 0));
    s.label = 1;
    s.track_id = "c" + std::to_string(i);
    samples.push_back(std::move(s));
  }

  const auto balanced = balance_subsample(samples, std::uint64_t{7});
  std::size_t pos = 0, neg = 0;
  for (const auto& s : balanced) (s.label == 1 ? pos : neg)++;
  EXPECT_EQ(pos, 20u);
  EXPECT_EQ(neg, 20u);

  const auto again = balance_subsample(samples, std::uint64_t{7});
  ASSERT_EQ(balanced.size(), again.size());
  for (std::size_t i = 0; i < balanced.size(); ++i) {
    EXPECT_EQ(balanced[i].track_id, again[i].track_id);
  }
}

TEST(Balance, AlreadyBalancedUnchangedAndSingleClassRejected) {
  std::vector<WindowSample> samples;
  Track t = marker_track("t", 10, 9, 0);
  for (int i = 0; i < 4; ++i) {
    WindowSample s = *sample_window(t, SamplingSpec::make(3, 0));
    s.label = i % 2;
    s.track_id = std::to_string(i);
    samples.push_back(std::move(s));
  }
  const auto balanced = balance_subsample(samples, std::uint64_t{1});
  ASSERT_EQ(balanced.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(balanced[i].track_id, std::to_string(i));

  std::vector<WindowSample> single(samples.begin(), samples.begin() + 1);
  EXPECT_THROW(balance_subsample(single, std::uint64_t{1}), error);
}

TEST(Synth, ClassRatioCounts) {
  SynthConfig cfg;
  cfg.n_tracks = 140;
  cfg.track_len_frames = 4;
  cfg.class_ratio = 2.5;
  const std::vector<Track> tracks = synth_generate(cfg);
  std::size_t cross = 0;
  for (const Track& t : tracks) cross += static_cast<std::size_t>(t.label == 1);
  EXPECT_EQ(cross, 40u);
  EXPECT_EQ(tracks.size() - cross, 100u);
}

TEST(Synth, DeterministicBytes) {
  SynthConfig cfg;
  cfg.n_tracks = 4;
  cfg.track_len_frames = 6;
  cfg.seed = 99;
  const std::string p1 = tmp_path("synth1.jsonl");
  const std::string p2 = tmp_path("synth2.jsonl");
  save_tracks(p1, synth_generate(cfg));
  save_tracks(p2, synth_generate(cfg));
  std::ifstream a(p1), b(p2);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  EXPECT_EQ(sa, sb);
  EXPECT_FALSE(sa.empty());
}

TEST(Synth, ProducesValidTracks) {
  for (double snr : {0.0, 8.0}) {
    SynthConfig cfg;
    cfg.n_tracks = 10;
    cfg.track_len_frames = 40;
    cfg.snr = snr;
    cfg.seed = 3;
    for (const Track& t : synth_generate(cfg)) {
      EXPECT_EQ(t.event_frame, 39u);
      for (const TrackFrame& f : t.frames) {
        EXPECT_TRUE(f.bbox.valid());
        EXPECT_GE(f.bbox.x1, 0.0);
        EXPECT_LE(f.bbox.x2, 1920.0);
        EXPECT_GE(f.speed_kmh, 0.0);
        EXPECT_TRUE(all_finite(f.c_p));
        EXPECT_TRUE(all_finite(f.c_s));
        for (double x : f.pose.joints) EXPECT_TRUE(std::isfinite(x));
      }
    }
  }
}

TEST(Synth, InvalidConfigRejected) {
  SynthConfig cfg;
  cfg.class_ratio = 0.0;
  EXPECT_THROW(synth_generate(cfg), error);
  cfg.class_ratio = 2.5;
  cfg.snr = -1.0;
  EXPECT_THROW(synth_generate(cfg), error);
}

TEST(AssembleWindow, ShiftInvarianceOfDisplacement) {
  Track track = marker_track("t", 60, 59, 1);
  const ObservationWindow w1 = assemble_window(track, 10, 5);
  const ObservationWindow w2 = assemble_window(track, 30, 5);
  // the marker track moves at constant velocity, so window-relative
  // displacement is identical regardless of where the window starts
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(w1.disp[t], w2.disp[t]);
}

TEST(AssembleWindow, ShortTrackRejected) {
  Track track = marker_track("t", 5, 4, 0);
  EXPECT_THROW(assemble_window(track, 3, 5), error);
}
