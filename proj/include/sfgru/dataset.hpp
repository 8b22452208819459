#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfgru/features.hpp"
#include "sfgru/numerics.hpp"

namespace sfgru {

// Raw per-frame observation as ingested: pixel-space annotations plus
// precomputed context vectors. c_ps (undivided context) and the flipped
// context variants are optional in the ingest format.
struct TrackFrame {
  BBox bbox;
  Pose pose;
  double speed_kmh = 0.0;
  Vec c_p, c_s;
  std::optional<Vec> c_ps;
  std::optional<Vec> c_p_flip, c_s_flip;
};

// One pedestrian: contiguous per-frame observations, the frame of the
// crossing (or out-of-view) event, and the binary label. frames[i] is the
// observation at frame index i.
struct Track {
  std::string id;
  double fps = 30.0;
  double frame_w = 0.0, frame_h = 0.0;
  int label = 0;  // 1 = crossing, 0 = non-crossing
  std::size_t event_frame = 0;
  std::vector<TrackFrame> frames;
};

inline std::size_t seconds_to_frames(double seconds, double fps) {
  return static_cast<std::size_t>(std::lround(seconds * fps));
}

inline FrameFeatures to_frame_features(const TrackFrame& rf, double frame_w, double frame_h) {
  FrameFeatures f;
  f.c_p = rf.c_p;
  f.c_s = rf.c_s;
  if (rf.c_ps) {
    f.c_ps = *rf.c_ps;
  } else {
    // Undivided-context fallback when the ingest record carries none.
    f.c_ps = Vec(rf.c_p.size());
    for (std::size_t i = 0; i < rf.c_p.size() && i < rf.c_s.size(); ++i) {
      f.c_ps[i] = 0.5 * (rf.c_p[i] + rf.c_s[i]);
    }
  }
  f.pose_norm = normalize_pose(rf.pose, frame_w, frame_h);
  f.bbox = rf.bbox;
  f.speed_kmh = rf.speed_kmh;
  f.c_p_flip = rf.c_p_flip;
  f.c_s_flip = rf.c_s_flip;
  return f;
}

// The m frames [start, start+m-1] of a track as a model-ready window.
// Displacement is relative to the window's own first frame.
inline ObservationWindow assemble_window(const Track& track, std::size_t start, std::size_t m) {
  if (m == 0) throw error("assemble_window: m must be positive");
  if (start + m > track.frames.size()) {
    throw error("assemble_window: track " + track.id + " has " +
                std::to_string(track.frames.size()) + " frames, requested [" +
                std::to_string(start) + ", " + std::to_string(start + m - 1) + "]");
  }
  std::vector<FrameFeatures> frames;
  frames.reserve(m);
  for (std::size_t i = start; i < start + m; ++i) {
    const TrackFrame& rf = track.frames[i];
    if (rf.c_p.size() != kContextDim) {
      throw error("assemble_window: track " + track.id + " frame " + std::to_string(i) +
                  " missing modality c_p");
    }
    if (rf.c_s.size() != kContextDim) {
      throw error("assemble_window: track " + track.id + " frame " + std::to_string(i) +
                  " missing modality c_s");
    }
    frames.push_back(to_frame_features(rf, track.frame_w, track.frame_h));
  }
  return make_window(std::move(frames), track.frame_w, track.frame_h);
}

struct WindowSample {
  ObservationWindow window;
  int label = 0;
  std::string track_id;
};

// Observation length, anchor, and the track-length requirement they imply.
struct SamplingSpec {
  std::size_t obs_len_frames = 15;
  std::size_t tte_frames = 60;
  std::size_t min_track_frames = 75;

  static SamplingSpec make(std::size_t m, std::size_t tte) {
    return SamplingSpec{m, tte, m + tte};
  }
};

// The m frames ending tte_frames before the event. Insufficient history is a
// skip, not an error: short tracks simply contribute no sample.
inline std::optional<WindowSample> sample_window(const Track& track, const SamplingSpec& spec) {
  const std::size_t m = spec.obs_len_frames;
  const std::size_t tte = spec.tte_frames;
  if (track.event_frame < tte) return std::nullopt;
  const std::size_t end = track.event_frame - tte;
  if (end + 1 < m) return std::nullopt;
  if (end >= track.frames.size()) return std::nullopt;
  WindowSample s;
  s.window = assemble_window(track, end + 1 - m, m);
  s.label = track.label;
  s.track_id = track.id;
  return s;
}

// Time-to-event anchors: 19 points spanning 0 to 3 seconds in uniform
// integer-frame steps (5 frames at 30 fps).
inline std::vector<std::size_t> tte_grid(double fps = 30.0) {
  const std::size_t step = static_cast<std::size_t>(std::lround(fps / 6.0));
  std::vector<std::size_t> grid;
  grid.reserve(19);
  for (std::size_t k = 0; k < 19; ++k) grid.push_back(k * step);
  return grid;
}

// Keep tracks with at least `seconds` of usable history up to the event.
inline std::vector<Track> filter_min_length(const std::vector<Track>& tracks, double seconds) {
  std::vector<Track> out;
  for (const Track& t : tracks) {
    if (t.event_frame + 1 >= seconds_to_frames(seconds, t.fps)) out.push_back(t);
  }
  return out;
}

// Track-level 60-40 split, deterministic from the seed.
struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

inline DatasetSplit split_train_test(const std::vector<Track>& tracks, double ratio,
                                     std::uint64_t seed) {
  if (tracks.size() < 2) throw error("split_train_test: need at least 2 tracks");
  std::vector<std::size_t> idx(tracks.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = idx.size(); i-- > 1;) {
    std::swap(idx[i], idx[rng.next_below(i + 1)]);
  }
  const std::size_t n_train = static_cast<std::size_t>(ratio * static_cast<double>(tracks.size()));
  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_train ? split.train : split.test).push_back(tracks[idx[i]].id);
  }
  return split;
}

// Subsample the majority class to the minority count, keeping original
// order; deterministic from the rng.
inline std::vector<WindowSample> balance_subsample(const std::vector<WindowSample>& samples,
                                                   Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (samples[i].label == 1 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) {
    throw error("balance_subsample: both classes must be present (got " +
                std::to_string(pos.size()) + " crossing, " + std::to_string(neg.size()) +
                " non-crossing)");
  }
  std::vector<std::size_t>& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  for (std::size_t i = 0; i < keep; ++i) {
    std::swap(majority[i], majority[i + rng.next_below(majority.size() - i)]);
  }
  majority.resize(keep);

  std::vector<std::size_t> kept;
  kept.reserve(2 * keep);
  kept.insert(kept.end(), pos.begin(), pos.end());
  kept.insert(kept.end(), neg.begin(), neg.end());
  std::sort(kept.begin(), kept.end());
  std::vector<WindowSample> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(samples[i]);
  return out;
}

inline std::vector<WindowSample> balance_subsample(const std::vector<WindowSample>& samples,
                                                   std::uint64_t seed) {
  Rng rng(seed);
  return balance_subsample(samples, rng);
}

// ---------------------------------------------------------------------------
// Track file I/O: UTF-8 JSON lines, one track per line. Unknown fields are
// rejected; dimension and range violations are reported with line numbers.

namespace detail {

inline Vec json_to_vec(const nlohmann::json& j, std::size_t expected, const std::string& field,
                       std::size_t line) {
  if (!j.is_array() || j.size() != expected) {
    throw schema_error("line " + std::to_string(line) + ": " + field + " must be an array of " +
                       std::to_string(expected) + " numbers" +
                       (j.is_array() ? " (got " + std::to_string(j.size()) + ")" : ""));
  }
  Vec v(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!j[i].is_number()) {
      throw schema_error("line " + std::to_string(line) + ": " + field + "[" + std::to_string(i) +
                         "] is not a number");
    }
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) {
      throw schema_error("line " + std::to_string(line) + ": " + field + "[" + std::to_string(i) +
                         "] is not finite");
    }
  }
  return v;
}

inline void reject_unknown_fields(const nlohmann::json& obj,
                                  const std::vector<std::string>& known, const std::string& where,
                                  std::size_t line) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw schema_error("line " + std::to_string(line) + ": unknown field '" + it.key() +
                         "' in " + where);
    }
  }
}

inline Track parse_track(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw schema_error("line " + std::to_string(line) + ": not a JSON object");
  reject_unknown_fields(j, {"id", "fps", "frame_w", "frame_h", "label", "event_frame", "frames"},
                        "track", line);
  Track t;
  try {
    t.id = j.at("id").get<std::string>();
    t.fps = j.at("fps").get<double>();
    t.frame_w = j.at("frame_w").get<double>();
    t.frame_h = j.at("frame_h").get<double>();
    const std::string label = j.at("label").get<std::string>();
    if (label == "crossing") {
      t.label = 1;
    } else if (label == "non_crossing") {
      t.label = 0;
    } else {
      throw schema_error("line " + std::to_string(line) + ": label must be 'crossing' or "
                         "'non_crossing', got '" + label + "'");
    }
    t.event_frame = j.at("event_frame").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw schema_error("line " + std::to_string(line) + ": " + e.what());
  }
  if (!(t.fps > 0) || !(t.frame_w > 0) || !(t.frame_h > 0)) {
    throw schema_error("line " + std::to_string(line) + ": fps and frame dimensions must be positive");
  }

  const auto& frames = j.at("frames");
  if (!frames.is_array() || frames.empty()) {
    throw schema_error("line " + std::to_string(line) + ": frames must be a non-empty array");
  }
  t.frames.reserve(frames.size());
  for (const auto& fj : frames) {
    if (!fj.is_object()) {
      throw schema_error("line " + std::to_string(line) + ": frame entry is not an object");
    }
    reject_unknown_fields(
        fj, {"bbox", "pose", "speed", "c_p", "c_s", "c_ps", "c_p_flip", "c_s_flip"}, "frame", line);
    TrackFrame f;
    const Vec box = json_to_vec(fj.at("bbox"), 4, "bbox", line);
    f.bbox = BBox{box[0], box[1], box[2], box[3]};
    if (!f.bbox.valid()) {
      throw schema_error("line " + std::to_string(line) + ": bbox is degenerate");
    }
    const Vec pose = json_to_vec(fj.at("pose"), kPoseDim, "pose", line);
    std::copy(pose.begin(), pose.end(), f.pose.joints.begin());
    if (!fj.at("speed").is_number()) {
      throw schema_error("line " + std::to_string(line) + ": speed is not a number");
    }
    f.speed_kmh = fj.at("speed").get<double>();
    if (!std::isfinite(f.speed_kmh) || f.speed_kmh < 0.0) {
      throw schema_error("line " + std::to_string(line) + ": speed must be finite and >= 0");
    }
    f.c_p = json_to_vec(fj.at("c_p"), kContextDim, "c_p", line);
    f.c_s = json_to_vec(fj.at("c_s"), kContextDim, "c_s", line);
    if (fj.contains("c_ps")) f.c_ps = json_to_vec(fj.at("c_ps"), kContextDim, "c_ps", line);
    if (fj.contains("c_p_flip")) {
      f.c_p_flip = json_to_vec(fj.at("c_p_flip"), kContextDim, "c_p_flip", line);
    }
    if (fj.contains("c_s_flip")) {
      f.c_s_flip = json_to_vec(fj.at("c_s_flip"), kContextDim, "c_s_flip", line);
    }
    t.frames.push_back(std::move(f));
  }
  if (t.event_frame >= t.frames.size()) {
    throw schema_error("line " + std::to_string(line) + ": event_frame " +
                       std::to_string(t.event_frame) + " outside [0, " +
                       std::to_string(t.frames.size()) + ")");
  }
  return t;
}

inline nlohmann::json track_to_json(const Track& t) {
  nlohmann::json j;
  j["id"] = t.id;
  j["fps"] = t.fps;
  j["frame_w"] = t.frame_w;
  j["frame_h"] = t.frame_h;
  j["label"] = t.label == 1 ? "crossing" : "non_crossing";
  j["event_frame"] = t.event_frame;
  nlohmann::json frames = nlohmann::json::array();
  for (const TrackFrame& f : t.frames) {
    nlohmann::json fj;
    fj["bbox"] = {f.bbox.x1, f.bbox.y1, f.bbox.x2, f.bbox.y2};
    fj["pose"] = f.pose.joints;
    fj["speed"] = f.speed_kmh;
    fj["c_p"] = f.c_p;
    fj["c_s"] = f.c_s;
    if (f.c_ps) fj["c_ps"] = *f.c_ps;
    if (f.c_p_flip) fj["c_p_flip"] = *f.c_p_flip;
    if (f.c_s_flip) fj["c_s_flip"] = *f.c_s_flip;
    frames.push_back(std::move(fj));
  }
  j["frames"] = std::move(frames);
  return j;
}

}  // namespace detail

inline std::vector<Track> load_tracks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error("load_tracks: cannot open " + path);
  std::vector<Track> tracks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw schema_error("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    tracks.push_back(detail::parse_track(j, line_no));
  }
  return tracks;
}

inline void save_tracks(const std::string& path, const std::vector<Track>& tracks) {
  std::ofstream out(path);
  if (!out) throw error("save_tracks: cannot open " + path);
  for (const Track& t : tracks) {
    out << detail::track_to_json(t).dump() << "\n";
  }
  if (!out) throw error("save_tracks: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Synthetic track generator. The label is written into every modality, all
// scaled by the same gain, so that ablation sweeps respond to feature sets:
// crossing tracks drift laterally toward the image center and decelerate,
// their gait amplitude grows, and a class-conditional offset along a fixed
// random direction is added to the context vectors. With signal gain
// snr/(1+snr) and noise gain 1/(1+snr), snr=0 makes every channel
// label-independent and snr -> inf makes the classes separable from the
// dynamics alone.
struct SynthConfig {
  std::size_t n_tracks = 140;
  std::size_t track_len_frames = 90;
  double class_ratio = 2.5;  // non-crossing : crossing
  double snr = 8.0;
  std::uint64_t seed = 0;
  bool emit_flip_context = false;
};

namespace detail {

// Rough upright skeleton in a 150-unit-tall reference frame, 18 joints.
inline constexpr std::array<std::pair<double, double>, kNumJoints> kSkeleton = {{
    {0, -70},    // nose
    {0, -55},    // neck
    {-12, -55},  // right shoulder
    {-16, -35},  // right elbow
    {-17, -15},  // right wrist
    {12, -55},   // left shoulder
    {16, -35},   // left elbow
    {17, -15},   // left wrist
    {-8, -5},    // right hip
    {-9, 25},    // right knee
    {-10, 55},   // right ankle
    {8, -5},     // left hip
    {9, 25},     // left knee
    {10, 55},    // left ankle
    {-3, -73},   // right eye
    {3, -73},    // left eye
    {-6, -70},   // right ear
    {6, -70},    // left ear
}};

}  // namespace detail

inline std::vector<Track> synth_generate(const SynthConfig& cfg) {
  if (cfg.n_tracks == 0 || cfg.track_len_frames < 2) {
    throw error("synth_generate: n_tracks and track_len_frames must be positive");
  }
  if (!(cfg.class_ratio > 0.0)) throw error("synth_generate: class_ratio must be positive");
  if (!(cfg.snr >= 0.0) || !std::isfinite(cfg.snr)) {
    throw error("synth_generate: snr must be finite and >= 0");
  }

  const double signal = cfg.snr / (cfg.snr + 1.0);
  const double noise = 1.0 / (cfg.snr + 1.0);
  const std::size_t n_cross = static_cast<std::size_t>(
      std::lround(static_cast<double>(cfg.n_tracks) / (cfg.class_ratio + 1.0)));
  const double fw = 1920.0, fh = 1080.0;

  Rng master(cfg.seed);
  Rng proj_rng = master.fork(0);
  Vec u_p(kContextDim), u_s(kContextDim);
  double np = 0.0, ns = 0.0;
  for (std::size_t i = 0; i < kContextDim; ++i) {
    u_p[i] = proj_rng.normal();
    u_s[i] = proj_rng.normal();
    np += u_p[i] * u_p[i];
    ns += u_s[i] * u_s[i];
  }
  np = std::sqrt(np);
  ns = std::sqrt(ns);
  for (std::size_t i = 0; i < kContextDim; ++i) {
    u_p[i] /= np;
    u_s[i] /= ns;
  }

  std::vector<Track> tracks;
  tracks.reserve(cfg.n_tracks);
  for (std::size_t idx = 0; idx < cfg.n_tracks; ++idx) {
    Rng rng = master.fork(idx + 1);
    const bool crossing = idx < n_cross;
    const double y_sign = crossing ? 1.0 : -1.0;
    const std::size_t len = cfg.track_len_frames;

    Track t;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05zu", idx);
    t.id = id;
    t.fps = 30.0;
    t.frame_w = fw;
    t.frame_h = fh;
    t.label = crossing ? 1 : 0;
    t.event_frame = len - 1;

    const double box_h = rng.uniform(120.0, 260.0);
    const double box_w = 0.4 * box_h;
    const double cx0 = rng.uniform(250.0, fw - 250.0);
    const double cy0 = rng.uniform(400.0, 750.0);
    const double base_vx = rng.uniform(-0.8, 0.8);
    const double vy = rng.uniform(-0.3, 0.3);
    const double cross_vx = (cx0 < fw / 2.0 ? 1.0 : -1.0) * rng.uniform(2.0, 4.0);
    const double vx = base_vx + signal * (crossing ? cross_vx : 0.0);
    const double speed0 = rng.uniform(25.0, 40.0);
    const double decel = crossing ? signal * 0.7 : 0.0;
    const double gait_amp = 4.0 + signal * (crossing ? 8.0 : 0.0);
    const double gait_phase = rng.uniform(0.0, 2.0 * M_PI);

    Vec base_p(kContextDim), base_s(kContextDim);
    for (std::size_t i = 0; i < kContextDim; ++i) {
      base_p[i] = 0.3 * rng.normal();
      base_s[i] = 0.3 * rng.normal();
    }

    t.frames.reserve(len);
    for (std::size_t fr = 0; fr < len; ++fr) {
      TrackFrame f;
      const double td = static_cast<double>(fr);
      double cx = cx0 + vx * td + noise * 2.0 * rng.normal();
      double cy = cy0 + vy * td + noise * 1.0 * rng.normal();
      cx = std::clamp(cx, box_w / 2.0 + 1.0, fw - box_w / 2.0 - 1.0);
      cy = std::clamp(cy, box_h / 2.0 + 1.0, fh - box_h / 2.0 - 1.0);
      f.bbox = BBox{cx - box_w / 2.0, cy - box_h / 2.0, cx + box_w / 2.0, cy + box_h / 2.0};

      f.speed_kmh =
          std::max(0.0, speed0 * (1.0 - decel * td / static_cast<double>(len)) +
                            noise * 1.0 * rng.normal());

      const double scale = box_h / 150.0;
      const double swing = gait_amp * std::sin(2.0 * M_PI * td / 12.0 + gait_phase);
      for (std::size_t jt = 0; jt < kNumJoints; ++jt) {
        double jx = cx + detail::kSkeleton[jt].first * scale + noise * 3.0 * rng.normal();
        double jy = cy + detail::kSkeleton[jt].second * scale + noise * 3.0 * rng.normal();
        // knees and ankles swing in antiphase
        if (jt == 9 || jt == 10) jx += swing * scale;
        if (jt == 12 || jt == 13) jx -= swing * scale;
        f.pose.joints[2 * jt] = std::clamp(jx, 0.0, fw);
        f.pose.joints[2 * jt + 1] = std::clamp(jy, 0.0, fh);
      }

      f.c_p = Vec(kContextDim);
      f.c_s = Vec(kContextDim);
      for (std::size_t i = 0; i < kContextDim; ++i) {
        f.c_p[i] = base_p[i] + signal * y_sign * u_p[i] + noise * rng.normal();
        f.c_s[i] = base_s[i] + signal * y_sign * u_s[i] + noise * rng.normal();
      }
      if (cfg.emit_flip_context) {
        // Synthetic context carries no geometry; the mirrored scene has the
        // same feature vector.
        f.c_p_flip = f.c_p;
        f.c_s_flip = f.c_s;
      }
      t.frames.push_back(std::move(f));
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace sfgru
