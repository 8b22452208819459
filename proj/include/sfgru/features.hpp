#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sfgru/numerics.hpp"

namespace sfgru {

inline constexpr std::size_t kContextDim = 512;  // appearance / surround vector length
inline constexpr std::size_t kNumJoints = 18;
inline constexpr std::size_t kPoseDim = 2 * kNumJoints;

// Axis-aligned box, two-point form (x1,y1) top-left, (x2,y2) bottom-right.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x1 < x2 && y1 < y2; }
};

// 18 body joints in pixel coordinates. A joint with a negative coordinate is
// treated as missing (detector failure); it normalizes to the (0,0) sentinel.
struct Pose {
  std::array<double, kPoseDim> joints{};  // x,y interleaved

  bool joint_missing(std::size_t j) const { return joints[2 * j] < 0.0 || joints[2 * j + 1] < 0.0; }
};

// Joint index pairs that swap under a horizontal flip (left/right limbs and
// face landmarks in the fixed 18-joint order: nose, neck, R/L shoulder,
// elbow, wrist, R/L hip, knee, ankle, R/L eye, R/L ear).
inline constexpr std::array<std::pair<int, int>, 8> kFlipJointPairs = {
    {{2, 5}, {3, 6}, {4, 7}, {8, 11}, {9, 12}, {10, 13}, {14, 15}, {16, 17}}};

// Scale the box height about its center, set width equal to the new height,
// then clamp to the frame. Clamping at the edges may break squareness.
inline BBox scale_squarify_box(const BBox& b, double scale, double frame_w, double frame_h) {
  if (!b.valid()) {
    throw error("scale_squarify_box: degenerate box (" + std::to_string(b.x1) + "," +
                std::to_string(b.y1) + "," + std::to_string(b.x2) + "," + std::to_string(b.y2) +
                ")");
  }
  if (scale < 1.0) throw error("scale_squarify_box: scale must be >= 1");
  const double new_h = b.height() * scale;
  const double cx = b.cx();
  const double cy = b.cy();
  BBox out;
  out.x1 = cx - 0.5 * new_h;
  out.x2 = cx + 0.5 * new_h;
  out.y1 = cy - 0.5 * new_h;
  out.y2 = cy + 0.5 * new_h;
  out.x1 = std::max(0.0, out.x1);
  out.y1 = std::max(0.0, out.y1);
  out.x2 = std::min(frame_w, out.x2);
  out.y2 = std::min(frame_h, out.y2);
  return out;
}

// The original pedestrian box expressed in crop-local coordinates, clipped to
// the crop. Downstream image tooling fills this region with neutral gray.
inline BBox suppression_region(const BBox& original, const BBox& crop) {
  BBox inter;
  inter.x1 = std::max(original.x1, crop.x1);
  inter.y1 = std::max(original.y1, crop.y1);
  inter.x2 = std::min(original.x2, crop.x2);
  inter.y2 = std::min(original.y2, crop.y2);
  if (!(inter.x1 < inter.x2 && inter.y1 < inter.y2)) {
    throw error("suppression_region: pedestrian box does not intersect the crop");
  }
  return BBox{inter.x1 - crop.x1, inter.y1 - crop.y1, inter.x2 - crop.x1, inter.y2 - crop.y1};
}

// (x/frame_w, y/frame_h) per joint, interleaved; missing joints become (0,0).
inline Vec normalize_pose(const Pose& p, double frame_w, double frame_h) {
  Vec out(kPoseDim, 0.0);
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    if (p.joint_missing(j)) continue;
    out[2 * j] = p.joints[2 * j] / frame_w;
    out[2 * j + 1] = p.joints[2 * j + 1] / frame_h;
  }
  return out;
}

// vb^t = box^t - box^1 componentwise; vb^1 is the zero 4-vector.
inline std::vector<Vec> bbox_displacement(const std::vector<BBox>& boxes) {
  if (boxes.empty()) return {};
  std::vector<Vec> out;
  out.reserve(boxes.size());
  const BBox& b0 = boxes.front();
  for (const BBox& b : boxes) {
    out.push_back(Vec{b.x1 - b0.x1, b.y1 - b0.y1, b.x2 - b0.x2, b.y2 - b0.y2});
  }
  return out;
}

// Same, on box centers.
inline std::vector<Vec> center_displacement(const std::vector<BBox>& boxes) {
  if (boxes.empty()) return {};
  std::vector<Vec> out;
  out.reserve(boxes.size());
  const double cx0 = boxes.front().cx();
  const double cy0 = boxes.front().cy();
  for (const BBox& b : boxes) {
    out.push_back(Vec{b.cx() - cx0, b.cy() - cy0});
  }
  return out;
}

// Model-ready features for one frame. pose_norm is frame-normalized; the
// optional flipped context vectors come from the ingest record and feed the
// flip augmentation.
struct FrameFeatures {
  Vec c_p;        // kContextDim
  Vec c_s;        // kContextDim
  Vec c_ps;       // kContextDim, full undivided context
  Vec pose_norm;  // kPoseDim
  BBox bbox;
  double speed_kmh = 0.0;
  std::optional<Vec> c_p_flip;
  std::optional<Vec> c_s_flip;
};

// Mirror one frame about the vertical axis. Box coordinates reflect, pose x
// becomes 1-x with left/right joints swapped, speed is unchanged. Context
// vectors are replaced by the ingested flipped variants when present;
// otherwise they stay unchanged and the returned flag reports it.
struct FlipResult {
  FrameFeatures frame;
  bool context_flipped = true;
};

inline FlipResult horizontal_flip(const FrameFeatures& f, double frame_w) {
  FlipResult res;
  FrameFeatures& out = res.frame;
  out.bbox = BBox{frame_w - f.bbox.x2, f.bbox.y1, frame_w - f.bbox.x1, f.bbox.y2};
  out.speed_kmh = f.speed_kmh;

  out.pose_norm = f.pose_norm;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const double x = f.pose_norm[2 * j];
    const double y = f.pose_norm[2 * j + 1];
    if (x == 0.0 && y == 0.0) continue;  // missing-joint sentinel
    out.pose_norm[2 * j] = 1.0 - x;
  }
  for (const auto& [a, b] : kFlipJointPairs) {
    std::swap(out.pose_norm[2 * a], out.pose_norm[2 * b]);
    std::swap(out.pose_norm[2 * a + 1], out.pose_norm[2 * b + 1]);
  }

  if (f.c_p_flip) {
    out.c_p = *f.c_p_flip;
    out.c_p_flip = f.c_p;
  } else {
    out.c_p = f.c_p;
    res.context_flipped = false;
  }
  if (f.c_s_flip) {
    out.c_s = *f.c_s_flip;
    out.c_s_flip = f.c_s;
  } else {
    out.c_s = f.c_s;
    res.context_flipped = false;
  }
  out.c_ps = Vec(kContextDim);
  for (std::size_t i = 0; i < kContextDim; ++i) out.c_ps[i] = 0.5 * (out.c_p[i] + out.c_s[i]);
  return res;
}

// m consecutive frames plus the derived per-modality sequences. Displacement
// is relative to the window's own first frame.
struct ObservationWindow {
  std::vector<FrameFeatures> frames;
  double frame_w = 0, frame_h = 0;
  std::vector<Vec> disp;         // 4-d per frame
  std::vector<Vec> center_disp;  // 2-d per frame

  std::size_t length() const { return frames.size(); }
};

inline ObservationWindow make_window(std::vector<FrameFeatures> frames, double frame_w,
                                     double frame_h) {
  if (frames.empty()) throw error("make_window: empty frame sequence");
  ObservationWindow w;
  w.frame_w = frame_w;
  w.frame_h = frame_h;
  std::vector<BBox> boxes;
  boxes.reserve(frames.size());
  for (const FrameFeatures& f : frames) boxes.push_back(f.bbox);
  w.disp = bbox_displacement(boxes);
  w.center_disp = center_displacement(boxes);
  w.frames = std::move(frames);
  return w;
}

struct WindowFlipResult {
  ObservationWindow window;
  bool context_flipped = true;
};

inline WindowFlipResult flip_window(const ObservationWindow& w) {
  WindowFlipResult res;
  std::vector<FrameFeatures> frames;
  frames.reserve(w.frames.size());
  for (const FrameFeatures& f : w.frames) {
    FlipResult fr = horizontal_flip(f, w.frame_w);
    res.context_flipped = res.context_flipped && fr.context_flipped;
    frames.push_back(std::move(fr.frame));
  }
  res.window = make_window(std::move(frames), w.frame_w, w.frame_h);
  return res;
}

}  // namespace sfgru
