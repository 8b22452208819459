#pragma once

#include <atomic>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sfgru/dataset.hpp"
#include "sfgru/train.hpp"

namespace sfgru {

struct SweepRow {
  std::string model;
  std::string fusion_order;
  std::string features;
  double tte_s = 0.0;
  double obs_len_s = 0.0;
  std::optional<MetricsReport> metrics;  // empty when the condition was skipped
  std::string skip_reason;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct SweepConfig {
  TrainConfig train;
  double split_ratio = 0.6;
  std::uint64_t split_seed = 0;
  int jobs = 1;
};

namespace detail {

inline double uniform_fps(const std::vector<Track>& tracks) {
  if (tracks.empty()) throw error("sweep: empty track set");
  const double fps = tracks.front().fps;
  for (const Track& t : tracks) {
    if (t.fps != fps) {
      throw error("sweep: tracks must share one fps (got " + std::to_string(fps) + " and " +
                  std::to_string(t.fps) + ")");
    }
  }
  return fps;
}

inline std::vector<const Track*> select_tracks(const std::vector<Track>& tracks,
                                               const std::vector<std::string>& ids) {
  std::vector<const Track*> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    for (const Track& t : tracks) {
      if (t.id == id) {
        out.push_back(&t);
        break;
      }
    }
  }
  return out;
}

inline std::vector<WindowSample> sample_all(const std::vector<const Track*>& tracks,
                                            const SamplingSpec& sampling) {
  std::vector<WindowSample> out;
  for (const Track* t : tracks) {
    if (auto s = sample_window(*t, sampling)) out.push_back(std::move(*s));
  }
  return out;
}

// Train one condition from scratch and evaluate it; fills everything but the
// descriptor columns.
inline void run_condition(SweepRow& row, const ModelSpec& spec,
                          const std::vector<const Track*>& train_tracks,
                          const std::vector<const Track*>& test_tracks,
                          const SamplingSpec& sampling, const TrainConfig& cfg) {
  std::vector<WindowSample> train_samples = sample_all(train_tracks, sampling);
  std::vector<WindowSample> test_samples = sample_all(test_tracks, sampling);
  row.n_train = train_samples.size();
  row.n_test = test_samples.size();
  if (train_samples.empty() || test_samples.empty()) {
    row.skip_reason = "no windows after sampling";
    return;
  }
  if (cfg.balance) {
    std::size_t pos = 0;
    for (const WindowSample& s : train_samples) pos += static_cast<std::size_t>(s.label == 1);
    if (pos == 0 || pos == train_samples.size()) {
      row.skip_reason = "single-class training set";
      return;
    }
  }
  TrainResult res = train(spec, train_samples, cfg);
  row.metrics = evaluate(spec, res.params, test_samples);
}

struct Condition {
  ModelSpec spec;
  SamplingSpec sampling;
  double tte_s;
  double obs_len_s;
};

inline SweepResult run_sweep(const std::vector<Condition>& conditions,
                             const std::vector<Track>& tracks, const SweepConfig& cfg) {
  SweepResult result;
  result.rows.resize(conditions.size());
  if (tracks.size() < 2) {
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      const Condition& c = conditions[i];
      SweepRow& row = result.rows[i];
      row.model = to_string(c.spec.kind);
      row.features = fusion_order_str(c.spec.fusion_order);
      row.fusion_order =
          c.spec.kind == ModelKind::StackedFusionGru ? fusion_order_str(c.spec.fusion_order) : "-";
      row.tte_s = c.tte_s;
      row.obs_len_s = c.obs_len_s;
      row.skip_reason = "fewer than 2 tracks after filtering";
    }
    return result;
  }

  const DatasetSplit split = split_train_test(tracks, cfg.split_ratio, cfg.split_seed);
  const std::vector<const Track*> train_tracks = select_tracks(tracks, split.train);
  const std::vector<const Track*> test_tracks = select_tracks(tracks, split.test);
  const Rng master(cfg.train.seed);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= conditions.size()) return;
      const Condition& c = conditions[i];
      SweepRow& row = result.rows[i];
      row.model = to_string(c.spec.kind);
      row.features = fusion_order_str(c.spec.fusion_order);
      row.fusion_order =
          c.spec.kind == ModelKind::StackedFusionGru ? fusion_order_str(c.spec.fusion_order) : "-";
      row.tte_s = c.tte_s;
      row.obs_len_s = c.obs_len_s;
      TrainConfig cond_cfg = cfg.train;
      cond_cfg.seed = master.fork(1 + i).seed();
      row.seed = cond_cfg.seed;
      run_condition(row, c.spec, train_tracks, test_tracks, c.sampling, cond_cfg);
    }
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  return result;
}

}  // namespace detail

// One row per (architecture, TTE anchor): 19 anchors spanning 0-3 s, tracks
// with at least 3.5 s of history.
inline SweepResult sweep_tte(const std::vector<ModelSpec>& specs, const std::vector<Track>& tracks,
                             std::size_t m, const SweepConfig& cfg) {
  const std::vector<Track> usable = filter_min_length(tracks, 3.5);
  const double fps = detail::uniform_fps(tracks);
  std::vector<detail::Condition> conditions;
  for (const ModelSpec& spec : specs) {
    for (std::size_t tte : tte_grid(fps)) {
      detail::Condition c;
      c.spec = spec;
      c.spec.obs_len = m;
      c.sampling = SamplingSpec::make(m, tte);
      c.tte_s = static_cast<double>(tte) / fps;
      c.obs_len_s = static_cast<double>(m) / fps;
      conditions.push_back(std::move(c));
    }
  }
  return detail::run_sweep(conditions, usable, cfg);
}

// The (observation length x TTE) grid, 16 combinations by default, tracks
// with at least 4.5 s of history.
inline SweepResult sweep_obs_length(const ModelSpec& spec, const std::vector<Track>& tracks,
                                    const SweepConfig& cfg,
                                    const std::vector<double>& obs_lengths_s = {0.3, 0.5, 1.0, 1.5},
                                    const std::vector<double>& ttes_s = {0.0, 1.0, 2.0, 3.0}) {
  const std::vector<Track> usable = filter_min_length(tracks, 4.5);
  const double fps = detail::uniform_fps(tracks);
  std::vector<detail::Condition> conditions;
  for (double obs_s : obs_lengths_s) {
    for (double tte_s : ttes_s) {
      detail::Condition c;
      c.spec = spec;
      c.spec.obs_len = seconds_to_frames(obs_s, fps);
      c.sampling = SamplingSpec::make(c.spec.obs_len, seconds_to_frames(tte_s, fps));
      c.tte_s = tte_s;
      c.obs_len_s = obs_s;
      conditions.push_back(std::move(c));
    }
  }
  return detail::run_sweep(conditions, usable, cfg);
}

// The seven feature configurations of the ablation study, appearance only up
// to the full five-stream set.
inline const std::vector<std::vector<FeatureKey>>& ablation_feature_sets() {
  static const std::vector<std::vector<FeatureKey>> sets = {
      {FeatureKey::Cp},
      {FeatureKey::Cps},
      {FeatureKey::Cp, FeatureKey::Cs},
      {FeatureKey::Cp, FeatureKey::Cs, FeatureKey::P},
      {FeatureKey::Cp, FeatureKey::Cs, FeatureKey::P, FeatureKey::D},
      {FeatureKey::Cp, FeatureKey::Cs, FeatureKey::P, FeatureKey::B},
      {FeatureKey::Cp, FeatureKey::Cs, FeatureKey::P, FeatureKey::B, FeatureKey::S},
  };
  return sets;
}

inline SweepResult ablate_features(const ModelSpec& base, const std::vector<Track>& tracks,
                                   const SweepConfig& cfg, std::size_t tte_frames = 60) {
  const double fps = detail::uniform_fps(tracks);
  std::vector<detail::Condition> conditions;
  for (const auto& features : ablation_feature_sets()) {
    detail::Condition c;
    c.spec = base;
    c.spec.fusion_order = features;
    c.sampling = SamplingSpec::make(base.obs_len, tte_frames);
    c.tte_s = static_cast<double>(tte_frames) / fps;
    c.obs_len_s = static_cast<double>(base.obs_len) / fps;
    conditions.push_back(std::move(c));
  }
  return detail::run_sweep(conditions, tracks, cfg);
}

// The six stacking orders compared in the fusion-order study.
inline const std::vector<std::vector<FeatureKey>>& default_fusion_orders() {
  using K = FeatureKey;
  static const std::vector<std::vector<FeatureKey>> orders = {
      {K::P, K::S, K::B, K::Cp, K::Cs},  {K::S, K::B, K::Cp, K::Cs, K::P},
      {K::B, K::Cp, K::Cs, K::P, K::S},  {K::S, K::Cp, K::Cs, K::P, K::B},
      {K::Cp, K::B, K::Cs, K::S, K::P},  {K::Cp, K::Cs, K::P, K::B, K::S},
  };
  return orders;
}

inline SweepResult sweep_fusion_order(const std::vector<Track>& tracks,
                                      const std::vector<std::vector<FeatureKey>>& orders,
                                      const SweepConfig& cfg, std::size_t hidden_dim = 256,
                                      std::size_t m = 15, std::size_t tte_frames = 60) {
  using K = FeatureKey;
  const std::vector<K> base_keys = {K::Cp, K::Cs, K::P, K::B, K::S};
  for (const auto& order : orders) {
    std::vector<K> sorted_order = order;
    std::vector<K> sorted_base = base_keys;
    auto cmp = [](K a, K b) { return static_cast<int>(a) < static_cast<int>(b); };
    std::sort(sorted_order.begin(), sorted_order.end(), cmp);
    std::sort(sorted_base.begin(), sorted_base.end(), cmp);
    if (sorted_order != sorted_base) {
      throw error("sweep_fusion_order: '" + fusion_order_str(order) +
                  "' is not a permutation of " + fusion_order_str(base_keys));
    }
  }
  const double fps = detail::uniform_fps(tracks);
  std::vector<detail::Condition> conditions;
  for (const auto& order : orders) {
    detail::Condition c;
    c.spec.kind = ModelKind::StackedFusionGru;
    c.spec.fusion_order = order;
    c.spec.hidden_dim = hidden_dim;
    c.spec.obs_len = m;
    c.sampling = SamplingSpec::make(m, tte_frames);
    c.tte_s = static_cast<double>(tte_frames) / fps;
    c.obs_len_s = static_cast<double>(m) / fps;
    conditions.push_back(std::move(c));
  }
  return detail::run_sweep(conditions, tracks, cfg);
}

// ---------------------------------------------------------------------------
// CSV report: fixed header, 4-decimal floats, NA for undefined or skipped
// values.

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string to_csv(const SweepResult& result) {
  std::string out =
      "model,fusion_order,features,tte_s,obs_len_s,acc,auc,f1,precision,recall,n_train,n_test,seed\n";
  for (const SweepRow& r : result.rows) {
    out += r.model + "," + r.fusion_order + "," + r.features + ",";
    out += format_metric(r.tte_s) + "," + format_metric(r.obs_len_s) + ",";
    if (r.metrics) {
      const MetricsReport& m = *r.metrics;
      out += format_metric(m.accuracy) + ",";
      out += m.auc ? format_metric(*m.auc) : std::string("NA");
      out += "," + format_metric(m.f1) + "," + format_metric(m.precision) + "," +
             format_metric(m.recall);
    } else {
      out += "NA,NA,NA,NA,NA";
    }
    out += "," + std::to_string(r.n_train) + "," + std::to_string(r.n_test) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

inline void write_csv(const std::string& path, const SweepResult& result) {
  std::ofstream out(path);
  if (!out) throw error("write_csv: cannot open " + path);
  out << to_csv(result);
  if (!out) throw error("write_csv: write failed for " + path);
}

}  // namespace sfgru
