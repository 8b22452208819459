#pragma once

// Verification-only module: a scalar re-implementation of every
// architecture's forward pass, templated on the arithmetic type, plus the
// gradient-check driver built on it. Nothing in the library proper depends
// on this header; it exists so the finite-difference oracle can be evaluated
// (a) independently of the code path it checks and (b) in extended
// precision, where central-difference cancellation noise sits far below the
// 1e-8 denominator floor of the relative-error measure.

#include <cmath>
#include <string>
#include <vector>

#include "sfgru/dataset.hpp"
#include "sfgru/model.hpp"

namespace sfgru::reference {

template <class Real>
std::vector<Real> feature_at(const ObservationWindow& w, FeatureKey k, std::size_t t) {
  const Vec* v = nullptr;
  switch (k) {
    case FeatureKey::Cp: v = &w.frames[t].c_p; break;
    case FeatureKey::Cs: v = &w.frames[t].c_s; break;
    case FeatureKey::Cps: v = &w.frames[t].c_ps; break;
    case FeatureKey::P: v = &w.frames[t].pose_norm; break;
    case FeatureKey::B: v = &w.disp[t]; break;
    case FeatureKey::D: v = &w.center_disp[t]; break;
    case FeatureKey::S: return {static_cast<Real>(w.frames[t].speed_kmh)};
  }
  return std::vector<Real>(v->begin(), v->end());
}

// One scalar GRU step; h is updated in place.
template <class Real>
void gru_step(const GruParams& p, const std::vector<Real>& x, std::vector<Real>& h) {
  const std::size_t H = p.hidden_dim;
  std::vector<Real> r(H), z(H), cand(H), hn(H);
  for (std::size_t i = 0; i < H; ++i) {
    Real ar = static_cast<Real>(p.br[i]);
    Real az = static_cast<Real>(p.bz[i]);
    for (std::size_t j = 0; j < x.size(); ++j) {
      ar += static_cast<Real>(p.Wxr(i, j)) * x[j];
      az += static_cast<Real>(p.Wxz(i, j)) * x[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      ar += static_cast<Real>(p.Whr(i, j)) * h[j];
      az += static_cast<Real>(p.Whz(i, j)) * h[j];
    }
    r[i] = Real(1) / (Real(1) + std::exp(-ar));
    z[i] = Real(1) / (Real(1) + std::exp(-az));
  }
  for (std::size_t i = 0; i < H; ++i) {
    Real ah = static_cast<Real>(p.bh[i]);
    for (std::size_t j = 0; j < x.size(); ++j) ah += static_cast<Real>(p.Wxh(i, j)) * x[j];
    for (std::size_t j = 0; j < H; ++j) ah += static_cast<Real>(p.Whh(i, j)) * (r[j] * h[j]);
    cand[i] = std::tanh(ah);
  }
  for (std::size_t i = 0; i < H; ++i) hn[i] = (Real(1) - z[i]) * h[i] + z[i] * cand[i];
  h = std::move(hn);
}

template <class Real>
Real forward_prob(const ModelSpec& spec, const ModelParams& params, const ObservationWindow& w) {
  const std::size_t m = spec.obs_len;
  const std::size_t H = spec.hidden_dim;
  const std::size_t n = spec.fusion_order.size();
  std::vector<Real> read_out;

  auto concat_all = [&](std::size_t t) {
    std::vector<Real> x;
    for (FeatureKey k : spec.fusion_order) {
      const std::vector<Real> f = feature_at<Real>(w, k, t);
      x.insert(x.end(), f.begin(), f.end());
    }
    return x;
  };

  switch (spec.kind) {
    case ModelKind::Static:
      read_out = concat_all(m - 1);
      break;

    case ModelKind::SingleGru: {
      std::vector<Real> h(H, Real(0));
      for (std::size_t t = 0; t < m; ++t) gru_step(params.levels[0], concat_all(t), h);
      read_out = h;
      break;
    }

    case ModelKind::StackedGru: {
      std::vector<std::vector<Real>> h(n, std::vector<Real>(H, Real(0)));
      for (std::size_t t = 0; t < m; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
          const std::vector<Real> x = j == 0 ? concat_all(t) : h[j - 1];
          gru_step(params.levels[j], x, h[j]);
        }
      }
      read_out = h[n - 1];
      break;
    }

    case ModelKind::StackedFusionGru: {
      std::vector<std::vector<Real>> h(n, std::vector<Real>(H, Real(0)));
      for (std::size_t t = 0; t < m; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
          std::vector<Real> x;
          if (j == 0) {
            x = feature_at<Real>(w, spec.fusion_order[0], t);
          } else {
            x = h[j - 1];
            const std::vector<Real> f = feature_at<Real>(w, spec.fusion_order[j], t);
            x.insert(x.end(), f.begin(), f.end());
          }
          gru_step(params.levels[j], x, h[j]);
        }
      }
      read_out = h[n - 1];
      break;
    }

    case ModelKind::MultiStreamGru: {
      for (std::size_t s = 0; s < n; ++s) {
        std::vector<Real> h(H, Real(0));
        for (std::size_t t = 0; t < m; ++t) {
          gru_step(params.streams[s], feature_at<Real>(w, spec.fusion_order[s], t), h);
        }
        read_out.insert(read_out.end(), h.begin(), h.end());
      }
      break;
    }

    case ModelKind::HierarchicalGru: {
      std::vector<std::vector<Real>> hs(n, std::vector<Real>(H, Real(0)));
      std::vector<Real> top(H, Real(0));
      for (std::size_t t = 0; t < m; ++t) {
        std::vector<Real> x;
        for (std::size_t s = 0; s < n; ++s) {
          gru_step(params.streams[s], feature_at<Real>(w, spec.fusion_order[s], t), hs[s]);
          x.insert(x.end(), hs[s].begin(), hs[s].end());
        }
        gru_step(params.levels[0], x, top);
      }
      read_out = top;
      break;
    }
  }

  Real logit = static_cast<Real>(params.classifier.b);
  for (std::size_t i = 0; i < read_out.size(); ++i) {
    logit += static_cast<Real>(params.classifier.W(0, i)) * read_out[i];
  }
  return Real(1) / (Real(1) + std::exp(-logit));
}

template <class Real>
Real total_bce(const ModelSpec& spec, const ModelParams& params,
               const std::vector<WindowSample>& samples) {
  const Real eps = Real(1e-12);
  Real total = Real(0);
  for (const WindowSample& s : samples) {
    Real p = forward_prob<Real>(spec, params, s.window);
    if (p < eps) p = eps;
    if (p > Real(1) - eps) p = Real(1) - eps;
    total += s.label == 1 ? -std::log(p) : -std::log(Real(1) - p);
  }
  return total;
}

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::size_t n_params = 0;
  std::string worst_param;
};

// Analytic BPTT gradients of the total BCE against central finite
// differences of the extended-precision scalar reference, h = 1e-5,
// relative error with denominator max(|a|, |b|, 1e-8).
inline GradcheckReport gradcheck(const ModelSpec& spec, ModelParams& params,
                                 const std::vector<WindowSample>& samples, double h = 1e-5) {
  ModelParams analytic = make_model_params(spec);
  ModelCache cache;
  for (const WindowSample& s : samples) {
    forward(spec, params, s.window, cache);
    backward(spec, params, cache, s.label, 1.0, analytic);
  }
  const std::vector<double> exact = flatten_params(analytic);

  struct Slot {
    std::string name;
    std::span<double> values;
  };
  std::vector<Slot> slots;
  for_each_param(params, [&](const std::string& name, bool, std::span<double> v) {
    slots.push_back({name, v});
  });

  GradcheckReport report;
  report.n_params = exact.size();
  std::size_t flat = 0;
  for (Slot& slot : slots) {
    for (std::size_t i = 0; i < slot.values.size(); ++i, ++flat) {
      double& theta = slot.values[i];
      const double saved = theta;
      theta = saved + h;
      const long double fp = total_bce<long double>(spec, params, samples);
      theta = saved - h;
      const long double fm = total_bce<long double>(spec, params, samples);
      theta = saved;
      const double numeric = static_cast<double>((fp - fm) / (2.0L * static_cast<long double>(h)));
      const double denom = std::max({std::fabs(exact[flat]), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(exact[flat] - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = slot.name;
      }
    }
  }
  return report;
}

}  // namespace sfgru::reference
