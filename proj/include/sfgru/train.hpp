#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sfgru/dataset.hpp"
#include "sfgru/metrics.hpp"
#include "sfgru/model.hpp"

namespace sfgru {

struct TrainConfig {
  double lr = 5e-6;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double l2 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 0;
  bool flip_augment = true;
  bool balance = true;

  // lr tuned to precomputed-CNN feature magnitudes
  static TrainConfig paper_defaults() { return TrainConfig{}; }

  // small synthetic sets underfit badly at the paper lr
  static TrainConfig synth_defaults() {
    TrainConfig c;
    c.lr = 1e-3;
    return c;
  }

  void validate() const {
    if (!(lr >= 0.0) || epochs == 0 || batch_size == 0 || !(l2 >= 0.0)) {
      throw error("train config: lr/epochs/batch_size/l2 must be positive");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw error("train config: beta1 and beta2 must lie in (0,1)");
    }
  }
};

// First and second moments mirroring the model's flat parameter order.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

inline AdamState make_adam_state(const ModelSpec& spec) {
  const std::size_t n = param_count(spec);
  return AdamState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
}

// One ADAM update. L2 enters as additive weight decay on the gradient,
// weights only; biases are exempt.
inline void adam_step(ModelParams& params, ModelParams& grads, AdamState& state,
                      const TrainConfig& cfg) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::size_t off = 0;

  struct GradSpan {
    std::string name;
    bool is_bias;
    std::span<double> values;
  };
  std::vector<GradSpan> grad_spans;
  for_each_param(grads, [&](const std::string& name, bool is_bias, std::span<double> v) {
    grad_spans.push_back({name, is_bias, v});
  });

  std::size_t gi = 0;
  for_each_param(params, [&](const std::string& name, bool is_bias, std::span<double> w) {
    if (gi >= grad_spans.size() || grad_spans[gi].values.size() != w.size()) {
      throw error("adam_step: gradient shape mismatch at " + name);
    }
    std::span<double> g = grad_spans[gi++].values;
    if (off + w.size() > state.m.size()) throw error("adam_step: state too small at " + name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      double gv = g[i];
      if (!std::isfinite(gv)) {
        throw numeric_error("adam_step: non-finite gradient in " + name + "[" +
                            std::to_string(i) + "]");
      }
      if (!is_bias) gv += cfg.l2 * w[i];
      double& mi = state.m[off + i];
      double& vi = state.v[off + i];
      mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gv;
      vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gv * gv;
      w[i] -= cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps_adam);
    }
    off += w.size();
  });
}

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;
  std::size_t samples_per_epoch = 0;  // after balancing and augmentation, last epoch
  bool flip_context_missing = false;  // some flip used unflipped context vectors
};

// Epoch loop: per epoch re-balance with a fresh deterministic draw, double
// with horizontally flipped copies, shuffle, then minimize the mean BCE per
// minibatch with ADAM.
inline TrainResult train(const ModelSpec& spec, const std::vector<WindowSample>& train_samples,
                         const TrainConfig& cfg, std::ostream* log = nullptr) {
  validate_spec(spec);
  cfg.validate();
  if (train_samples.empty()) throw error("train: empty training set");

  Rng master(cfg.seed);
  Rng init_rng = master.fork(0);
  TrainResult res;
  res.params = init_model(spec, init_rng);
  AdamState adam = make_adam_state(spec);
  ModelParams grads = make_model_params(spec);
  ModelCache cache;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = master.fork(1 + epoch);
    std::vector<WindowSample> epoch_samples =
        cfg.balance ? balance_subsample(train_samples, epoch_rng) : train_samples;

    if (cfg.flip_augment) {
      const std::size_t base = epoch_samples.size();
      for (std::size_t i = 0; i < base; ++i) {
        WindowFlipResult fr = flip_window(epoch_samples[i].window);
        if (!fr.context_flipped) res.flip_context_missing = true;
        epoch_samples.push_back(
            WindowSample{std::move(fr.window), epoch_samples[i].label, epoch_samples[i].track_id});
      }
    }

    std::vector<std::size_t> order(epoch_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i-- > 1;) {
      std::swap(order[i], order[epoch_rng.next_below(i + 1)]);
    }

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t bend = std::min(b + cfg.batch_size, order.size());
      const double inv_bn = 1.0 / static_cast<double>(bend - b);
      for_each_param(grads, [](const std::string&, bool, std::span<double> v) {
        std::fill(v.begin(), v.end(), 0.0);
      });
      double batch_loss = 0.0;
      for (std::size_t k = b; k < bend; ++k) {
        const WindowSample& s = epoch_samples[order[k]];
        const double prob = forward(spec, res.params, s.window, cache);
        batch_loss += bce_loss(prob, s.label);
        backward(spec, res.params, cache, s.label, inv_bn, grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(b / cfg.batch_size) + " (lr " +
                            std::to_string(cfg.lr) + ")");
      }
      loss_sum += batch_loss;
      adam_step(res.params, grads, adam, cfg);
    }

    res.epoch_loss.push_back(loss_sum / static_cast<double>(epoch_samples.size()));
    res.samples_per_epoch = epoch_samples.size();
    if (log) {
      *log << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << res.epoch_loss.back()
           << "\n";
    }
  }
  return res;
}

// Probabilities on an evaluation set and the report derived from them.
inline MetricsReport evaluate(const ModelSpec& spec, const ModelParams& params,
                              const std::vector<WindowSample>& samples, double threshold = 0.5) {
  if (samples.empty()) throw error("evaluate: empty evaluation set");
  std::vector<double> probs;
  std::vector<int> labels;
  probs.reserve(samples.size());
  labels.reserve(samples.size());
  ModelCache cache;
  for (const WindowSample& s : samples) {
    probs.push_back(forward(spec, params, s.window, cache));
    labels.push_back(s.label);
  }
  return compute_metrics(probs, labels, threshold);
}

}  // namespace sfgru
