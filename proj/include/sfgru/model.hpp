#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfgru/features.hpp"
#include "sfgru/gru.hpp"
#include "sfgru/numerics.hpp"

namespace sfgru {

// Feature streams a model can consume. B is the box displacement relative to
// the window start, D the center displacement, Cps the undivided context.
enum class FeatureKey { Cp, Cs, P, B, S, Cps, D };

inline std::size_t feature_dim(FeatureKey k) {
  switch (k) {
    case FeatureKey::Cp:
    case FeatureKey::Cs:
    case FeatureKey::Cps:
      return kContextDim;
    case FeatureKey::P:
      return kPoseDim;
    case FeatureKey::B:
      return 4;
    case FeatureKey::S:
      return 1;
    case FeatureKey::D:
      return 2;
  }
  throw error("feature_dim: unknown key");
}

inline std::string to_string(FeatureKey k) {
  switch (k) {
    case FeatureKey::Cp: return "Cp";
    case FeatureKey::Cs: return "Cs";
    case FeatureKey::P: return "P";
    case FeatureKey::B: return "B";
    case FeatureKey::S: return "S";
    case FeatureKey::Cps: return "Cps";
    case FeatureKey::D: return "D";
  }
  throw error("to_string: unknown feature key");
}

inline FeatureKey parse_feature_key(const std::string& s) {
  std::string t;
  for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "cp") return FeatureKey::Cp;
  if (t == "cs") return FeatureKey::Cs;
  if (t == "p") return FeatureKey::P;
  if (t == "b") return FeatureKey::B;
  if (t == "s") return FeatureKey::S;
  if (t == "cps") return FeatureKey::Cps;
  if (t == "d") return FeatureKey::D;
  throw error("parse_feature_key: unknown key '" + s + "'");
}

enum class ModelKind { Static, SingleGru, MultiStreamGru, HierarchicalGru, StackedGru, StackedFusionGru };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Static: return "static";
    case ModelKind::SingleGru: return "gru";
    case ModelKind::MultiStreamGru: return "m-gru";
    case ModelKind::HierarchicalGru: return "h-gru";
    case ModelKind::StackedGru: return "s-gru";
    case ModelKind::StackedFusionGru: return "sf-gru";
  }
  throw error("to_string: unknown model kind");
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "static") return ModelKind::Static;
  if (s == "gru") return ModelKind::SingleGru;
  if (s == "m-gru") return ModelKind::MultiStreamGru;
  if (s == "h-gru") return ModelKind::HierarchicalGru;
  if (s == "s-gru") return ModelKind::StackedGru;
  if (s == "sf-gru") return ModelKind::StackedFusionGru;
  throw error("parse_model_kind: unknown model '" + s + "'");
}

// Which architecture to build: the variant, the feature set in fusion order
// (bottom of the stack first), capacity, and the observation length the
// model expects.
struct ModelSpec {
  ModelKind kind = ModelKind::StackedFusionGru;
  std::vector<FeatureKey> fusion_order = {FeatureKey::Cp, FeatureKey::Cs, FeatureKey::P,
                                          FeatureKey::B, FeatureKey::S};
  std::size_t hidden_dim = 256;
  std::size_t obs_len = 15;
  bool use_bias = true;
};

inline std::string fusion_order_str(const std::vector<FeatureKey>& order) {
  std::string s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) s.push_back('+');
    s += to_string(order[i]);
  }
  return s;
}

inline void validate_spec(const ModelSpec& spec) {
  if (spec.fusion_order.empty()) throw error("model spec: fusion_order must be non-empty");
  for (std::size_t i = 0; i < spec.fusion_order.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.fusion_order.size(); ++j) {
      if (spec.fusion_order[i] == spec.fusion_order[j]) {
        throw error("model spec: duplicate feature key " + to_string(spec.fusion_order[i]));
      }
    }
  }
  if (spec.hidden_dim == 0) throw error("model spec: hidden_dim must be positive");
  if (spec.obs_len == 0) throw error("model spec: obs_len must be positive");
}

inline std::size_t sum_feature_dims(const std::vector<FeatureKey>& order) {
  std::size_t s = 0;
  for (FeatureKey k : order) s += feature_dim(k);
  return s;
}

// Per-level GRU input widths for the stack variants.
inline std::vector<std::size_t> level_input_dims(const ModelSpec& spec) {
  const std::size_t h = spec.hidden_dim;
  std::vector<std::size_t> dims;
  switch (spec.kind) {
    case ModelKind::Static:
      break;
    case ModelKind::SingleGru:
      dims.push_back(sum_feature_dims(spec.fusion_order));
      break;
    case ModelKind::StackedGru:
      dims.push_back(sum_feature_dims(spec.fusion_order));
      for (std::size_t j = 1; j < spec.fusion_order.size(); ++j) dims.push_back(h);
      break;
    case ModelKind::StackedFusionGru:
      dims.push_back(feature_dim(spec.fusion_order[0]));
      for (std::size_t j = 1; j < spec.fusion_order.size(); ++j) {
        dims.push_back(h + feature_dim(spec.fusion_order[j]));
      }
      break;
    case ModelKind::MultiStreamGru:
      break;
    case ModelKind::HierarchicalGru:
      dims.push_back(spec.fusion_order.size() * h);  // fusion layer over all streams
      break;
  }
  return dims;
}

inline std::size_t classifier_input_dim(const ModelSpec& spec) {
  const std::size_t h = spec.hidden_dim;
  switch (spec.kind) {
    case ModelKind::Static:
      return sum_feature_dims(spec.fusion_order);
    case ModelKind::SingleGru:
    case ModelKind::StackedGru:
    case ModelKind::StackedFusionGru:
    case ModelKind::HierarchicalGru:
      return h;
    case ModelKind::MultiStreamGru:
      return spec.fusion_order.size() * h;
  }
  throw error("classifier_input_dim: unknown model kind");
}

// All learnable state of one architecture. streams holds the per-feature
// GRUs of the multi-stream variants; levels the stacked cells (and the
// hierarchical fusion cell).
struct ModelParams {
  std::vector<GruParams> streams;
  std::vector<GruParams> levels;
  LinearParams classifier;
};

inline bool uses_streams(ModelKind k) {
  return k == ModelKind::MultiStreamGru || k == ModelKind::HierarchicalGru;
}

// Zero-valued parameters with the spec's shapes.
inline ModelParams make_model_params(const ModelSpec& spec) {
  validate_spec(spec);
  ModelParams p;
  if (uses_streams(spec.kind)) {
    for (FeatureKey k : spec.fusion_order) {
      p.streams.push_back(make_gru(feature_dim(k), spec.hidden_dim, spec.use_bias));
    }
  }
  for (std::size_t d : level_input_dims(spec)) {
    p.levels.push_back(make_gru(d, spec.hidden_dim, spec.use_bias));
  }
  p.classifier = make_linear(classifier_input_dim(spec));
  return p;
}

// Glorot-initialized weights, zero biases; deterministic from the seed.
inline ModelParams init_model(const ModelSpec& spec, Rng& rng) {
  validate_spec(spec);
  ModelParams p;
  if (uses_streams(spec.kind)) {
    for (FeatureKey k : spec.fusion_order) {
      p.streams.push_back(init_gru(rng, feature_dim(k), spec.hidden_dim, spec.use_bias));
    }
  }
  for (std::size_t d : level_input_dims(spec)) {
    p.levels.push_back(init_gru(rng, d, spec.hidden_dim, spec.use_bias));
  }
  p.classifier = init_linear(rng, classifier_input_dim(spec));
  return p;
}

inline std::size_t gru_param_count(std::size_t input_dim, std::size_t hidden_dim, bool use_bias) {
  return 3 * hidden_dim * (input_dim + hidden_dim) + (use_bias ? 3 * hidden_dim : 0);
}

// Exact number of trainable scalars, from the closed form.
inline std::size_t param_count(const ModelSpec& spec) {
  validate_spec(spec);
  std::size_t n = 0;
  if (uses_streams(spec.kind)) {
    for (FeatureKey k : spec.fusion_order) {
      n += gru_param_count(feature_dim(k), spec.hidden_dim, spec.use_bias);
    }
  }
  for (std::size_t d : level_input_dims(spec)) {
    n += gru_param_count(d, spec.hidden_dim, spec.use_bias);
  }
  n += classifier_input_dim(spec) + 1;
  return n;
}

// Visits every trainable array in a fixed order (streams, levels,
// classifier). f(name, is_bias, values) with values a span, const when the
// params are. Gradients and Adam moments walk the same order, so a flat
// offset identifies a parameter across containers.
template <class Params, class F>
inline void for_each_param(Params& p, F&& f) {
  auto visit_gru = [&](const std::string& prefix, auto& g) {
    f(prefix + ".Wxr", false, std::span(g.Wxr.data));
    f(prefix + ".Wxz", false, std::span(g.Wxz.data));
    f(prefix + ".Wxh", false, std::span(g.Wxh.data));
    f(prefix + ".Whr", false, std::span(g.Whr.data));
    f(prefix + ".Whz", false, std::span(g.Whz.data));
    f(prefix + ".Whh", false, std::span(g.Whh.data));
    if (g.use_bias) {
      f(prefix + ".br", true, std::span(g.br));
      f(prefix + ".bz", true, std::span(g.bz));
      f(prefix + ".bh", true, std::span(g.bh));
    }
  };
  for (std::size_t i = 0; i < p.streams.size(); ++i) {
    visit_gru("stream" + std::to_string(i), p.streams[i]);
  }
  for (std::size_t i = 0; i < p.levels.size(); ++i) {
    visit_gru("level" + std::to_string(i), p.levels[i]);
  }
  f("classifier.W", false, std::span(p.classifier.W.data));
  f("classifier.b", true, std::span(&p.classifier.b, 1));
}

inline std::vector<double> flatten_params(const ModelParams& p) {
  std::vector<double> flat;
  for_each_param(p, [&](const std::string&, bool, std::span<const double> v) {
    flat.insert(flat.end(), v.begin(), v.end());
  });
  return flat;
}

inline void unflatten_params(ModelParams& p, const std::vector<double>& flat) {
  std::size_t off = 0;
  for_each_param(p, [&](const std::string&, bool, std::span<double> v) {
    if (off + v.size() > flat.size()) throw error("unflatten_params: flat vector too short");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = flat[off + i];
    off += v.size();
  });
  if (off != flat.size()) throw error("unflatten_params: flat vector too long");
}

// ---------------------------------------------------------------------------
// Forward / backward

inline const Vec& window_feature(const ObservationWindow& w, FeatureKey k, std::size_t t,
                                 Vec& scratch) {
  const FrameFeatures& f = w.frames[t];
  const Vec* v = nullptr;
  switch (k) {
    case FeatureKey::Cp: v = &f.c_p; break;
    case FeatureKey::Cs: v = &f.c_s; break;
    case FeatureKey::Cps: v = &f.c_ps; break;
    case FeatureKey::P: v = &f.pose_norm; break;
    case FeatureKey::B: v = &w.disp[t]; break;
    case FeatureKey::D: v = &w.center_disp[t]; break;
    case FeatureKey::S:
      scratch.assign(1, f.speed_kmh);
      v = &scratch;
      break;
  }
  if (v->size() != feature_dim(k)) {
    throw error("window is missing modality " + to_string(k) + " (got length " +
                std::to_string(v->size()) + ", expected " + std::to_string(feature_dim(k)) + ")");
  }
  return *v;
}

inline Vec concat_features(const ObservationWindow& w, const std::vector<FeatureKey>& keys,
                           std::size_t t) {
  Vec out;
  out.reserve(sum_feature_dims(keys));
  Vec scratch;
  for (FeatureKey k : keys) {
    const Vec& v = window_feature(w, k, t, scratch);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

struct ModelCache {
  std::vector<std::vector<GruStepCache>> streams;  // per stream, per step
  std::vector<std::vector<GruStepCache>> levels;   // per level, per step
  Vec classifier_input;
  double logit = 0.0;
  double prob = 0.0;
};

inline double forward(const ModelSpec& spec, const ModelParams& params,
                      const ObservationWindow& window, ModelCache& cache) {
  validate_spec(spec);
  const std::size_t m = spec.obs_len;
  if (window.length() != m) {
    throw error("forward: window length " + std::to_string(window.length()) +
                " does not match obs_len " + std::to_string(m));
  }
  const std::size_t h = spec.hidden_dim;
  const Vec h0(h, 0.0);
  cache = ModelCache{};
  Vec scratch;

  switch (spec.kind) {
    case ModelKind::Static:
      cache.classifier_input = concat_features(window, spec.fusion_order, m - 1);
      break;

    case ModelKind::SingleGru: {
      std::vector<Vec> xs(m);
      for (std::size_t t = 0; t < m; ++t) xs[t] = concat_features(window, spec.fusion_order, t);
      cache.levels.push_back(gru_sequence_forward(params.levels[0], xs, h0));
      cache.classifier_input = cache.levels[0].back().h;
      break;
    }

    case ModelKind::StackedGru: {
      std::vector<Vec> xs(m);
      for (std::size_t t = 0; t < m; ++t) xs[t] = concat_features(window, spec.fusion_order, t);
      for (std::size_t j = 0; j < params.levels.size(); ++j) {
        cache.levels.push_back(gru_sequence_forward(params.levels[j], xs, h0));
        for (std::size_t t = 0; t < m; ++t) xs[t] = cache.levels[j][t].h;
      }
      cache.classifier_input = cache.levels.back().back().h;
      break;
    }

    case ModelKind::StackedFusionGru: {
      // Level 0 consumes the first feature; level j the previous level's
      // state concatenated with feature j, step by step.
      std::vector<Vec> xs(m);
      for (std::size_t t = 0; t < m; ++t) {
        xs[t] = window_feature(window, spec.fusion_order[0], t, scratch);
      }
      cache.levels.push_back(gru_sequence_forward(params.levels[0], xs, h0));
      for (std::size_t j = 1; j < params.levels.size(); ++j) {
        for (std::size_t t = 0; t < m; ++t) {
          const Vec& prev_h = cache.levels[j - 1][t].h;
          const Vec& feat = window_feature(window, spec.fusion_order[j], t, scratch);
          xs[t].clear();
          xs[t].reserve(prev_h.size() + feat.size());
          xs[t].insert(xs[t].end(), prev_h.begin(), prev_h.end());
          xs[t].insert(xs[t].end(), feat.begin(), feat.end());
        }
        cache.levels.push_back(gru_sequence_forward(params.levels[j], xs, h0));
      }
      cache.classifier_input = cache.levels.back().back().h;
      break;
    }

    case ModelKind::MultiStreamGru: {
      cache.classifier_input.reserve(spec.fusion_order.size() * h);
      for (std::size_t s = 0; s < spec.fusion_order.size(); ++s) {
        std::vector<Vec> xs(m);
        for (std::size_t t = 0; t < m; ++t) {
          xs[t] = window_feature(window, spec.fusion_order[s], t, scratch);
        }
        cache.streams.push_back(gru_sequence_forward(params.streams[s], xs, h0));
        const Vec& last = cache.streams[s].back().h;
        cache.classifier_input.insert(cache.classifier_input.end(), last.begin(), last.end());
      }
      break;
    }

    case ModelKind::HierarchicalGru: {
      for (std::size_t s = 0; s < spec.fusion_order.size(); ++s) {
        std::vector<Vec> xs(m);
        for (std::size_t t = 0; t < m; ++t) {
          xs[t] = window_feature(window, spec.fusion_order[s], t, scratch);
        }
        cache.streams.push_back(gru_sequence_forward(params.streams[s], xs, h0));
      }
      std::vector<Vec> xs(m);
      for (std::size_t t = 0; t < m; ++t) {
        xs[t].reserve(spec.fusion_order.size() * h);
        for (const auto& stream : cache.streams) {
          xs[t].insert(xs[t].end(), stream[t].h.begin(), stream[t].h.end());
        }
      }
      cache.levels.push_back(gru_sequence_forward(params.levels[0], xs, h0));
      cache.classifier_input = cache.levels[0].back().h;
      break;
    }
  }

  cache.logit = linear_forward(params.classifier, cache.classifier_input);
  cache.prob = sigmoid(cache.logit);
  return cache.prob;
}

inline double forward(const ModelSpec& spec, const ModelParams& params,
                      const ObservationWindow& window) {
  ModelCache cache;
  return forward(spec, params, window, cache);
}

// Gradient of scale * BCE(prob, label) w.r.t. every parameter, accumulated
// into grads (shaped by make_model_params).
inline void backward(const ModelSpec& spec, const ModelParams& params, const ModelCache& cache,
                     int label, double scale, ModelParams& grads) {
  const std::size_t m = spec.obs_len;
  const std::size_t h = spec.hidden_dim;
  const double dlogit = bce_dlogit(cache.prob, label) * scale;
  Vec dclf = linear_backward(params.classifier, cache.classifier_input, dlogit, grads.classifier);

  auto zero_dhs = [&](std::size_t n) { return std::vector<Vec>(n, Vec(h, 0.0)); };

  switch (spec.kind) {
    case ModelKind::Static:
      break;

    case ModelKind::SingleGru: {
      std::vector<Vec> dhs = zero_dhs(m);
      dhs[m - 1] = std::move(dclf);
      gru_sequence_backward(params.levels[0], cache.levels[0], dhs, grads.levels[0]);
      break;
    }

    case ModelKind::StackedGru: {
      std::vector<Vec> dhs = zero_dhs(m);
      dhs[m - 1] = std::move(dclf);
      for (std::size_t j = params.levels.size(); j-- > 0;) {
        std::vector<Vec> dxs =
            gru_sequence_backward(params.levels[j], cache.levels[j], dhs, grads.levels[j]);
        if (j == 0) break;
        dhs = std::move(dxs);  // level j's inputs are level j-1's states
      }
      break;
    }

    case ModelKind::StackedFusionGru: {
      std::vector<Vec> dhs = zero_dhs(m);
      dhs[m - 1] = std::move(dclf);
      for (std::size_t j = params.levels.size(); j-- > 0;) {
        std::vector<Vec> dxs =
            gru_sequence_backward(params.levels[j], cache.levels[j], dhs, grads.levels[j]);
        if (j == 0) break;
        // The leading h entries of level j's input are level j-1's state.
        dhs = zero_dhs(m);
        for (std::size_t t = 0; t < m; ++t) {
          for (std::size_t i = 0; i < h; ++i) dhs[t][i] = dxs[t][i];
        }
      }
      break;
    }

    case ModelKind::MultiStreamGru: {
      for (std::size_t s = 0; s < params.streams.size(); ++s) {
        std::vector<Vec> dhs = zero_dhs(m);
        for (std::size_t i = 0; i < h; ++i) dhs[m - 1][i] = dclf[s * h + i];
        gru_sequence_backward(params.streams[s], cache.streams[s], dhs, grads.streams[s]);
      }
      break;
    }

    case ModelKind::HierarchicalGru: {
      std::vector<Vec> dhs = zero_dhs(m);
      dhs[m - 1] = std::move(dclf);
      std::vector<Vec> dxs =
          gru_sequence_backward(params.levels[0], cache.levels[0], dhs, grads.levels[0]);
      for (std::size_t s = 0; s < params.streams.size(); ++s) {
        std::vector<Vec> dstream(m, Vec(h, 0.0));
        for (std::size_t t = 0; t < m; ++t) {
          for (std::size_t i = 0; i < h; ++i) dstream[t][i] = dxs[t][s * h + i];
        }
        gru_sequence_backward(params.streams[s], cache.streams[s], dstream, grads.streams[s]);
      }
      break;
    }
  }
}

}  // namespace sfgru
