#pragma once

#include <cstddef>
#include <vector>

#include "sfgru/numerics.hpp"

namespace sfgru {

// One GRU cell:
//   r = sigmoid(Wxr x + Whr h_prev + br)
//   z = sigmoid(Wxz x + Whz h_prev + bz)
//   h~ = tanh(Wxh x + Whh (r . h_prev) + bh)
//   h = (1 - z) . h_prev + z . h~
// With use_bias=false the bias vectors stay identically zero and are
// excluded from optimization.
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix Wxr, Wxz, Wxh;  // hidden_dim x input_dim
  Matrix Whr, Whz, Whh;  // hidden_dim x hidden_dim
  Vec br, bz, bh;        // hidden_dim
  bool use_bias = true;
};

inline GruParams make_gru(std::size_t input_dim, std::size_t hidden_dim, bool use_bias = true) {
  GruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.Wxr = Matrix(hidden_dim, input_dim);
  p.Wxz = Matrix(hidden_dim, input_dim);
  p.Wxh = Matrix(hidden_dim, input_dim);
  p.Whr = Matrix(hidden_dim, hidden_dim);
  p.Whz = Matrix(hidden_dim, hidden_dim);
  p.Whh = Matrix(hidden_dim, hidden_dim);
  p.br = Vec(hidden_dim, 0.0);
  p.bz = Vec(hidden_dim, 0.0);
  p.bh = Vec(hidden_dim, 0.0);
  p.use_bias = use_bias;
  return p;
}

inline GruParams init_gru(Rng& rng, std::size_t input_dim, std::size_t hidden_dim,
                          bool use_bias = true) {
  GruParams p = make_gru(input_dim, hidden_dim, use_bias);
  p.Wxr = init_uniform(rng, hidden_dim, input_dim, input_dim, hidden_dim);
  p.Wxz = init_uniform(rng, hidden_dim, input_dim, input_dim, hidden_dim);
  p.Wxh = init_uniform(rng, hidden_dim, input_dim, input_dim, hidden_dim);
  p.Whr = init_uniform(rng, hidden_dim, hidden_dim, hidden_dim, hidden_dim);
  p.Whz = init_uniform(rng, hidden_dim, hidden_dim, hidden_dim, hidden_dim);
  p.Whh = init_uniform(rng, hidden_dim, hidden_dim, hidden_dim, hidden_dim);
  return p;
}

// Snapshots of one forward step; everything backward needs.
struct GruStepCache {
  Vec x, h_prev, r, z, h_tilde, h;
};

inline GruStepCache gru_step_forward(const GruParams& p, const Vec& x, const Vec& h_prev) {
  if (x.size() != p.input_dim) {
    throw error("gru_step_forward: input length " + std::to_string(x.size()) + " vs input_dim " +
                std::to_string(p.input_dim));
  }
  if (h_prev.size() != p.hidden_dim) {
    throw error("gru_step_forward: hidden length " + std::to_string(h_prev.size()) +
                " vs hidden_dim " + std::to_string(p.hidden_dim));
  }
  GruStepCache c;
  c.x = x;
  c.h_prev = h_prev;

  Vec pre_r = add(matvec(p.Wxr, x), matvec(p.Whr, h_prev));
  Vec pre_z = add(matvec(p.Wxz, x), matvec(p.Whz, h_prev));
  if (p.use_bias) {
    add_inplace(pre_r, p.br);
    add_inplace(pre_z, p.bz);
  }
  c.r = sigmoid(pre_r);
  c.z = sigmoid(pre_z);

  Vec pre_h = add(matvec(p.Wxh, x), matvec(p.Whh, hadamard(c.r, h_prev)));
  if (p.use_bias) add_inplace(pre_h, p.bh);
  c.h_tilde = tanh(pre_h);

  c.h = Vec(p.hidden_dim);
  for (std::size_t i = 0; i < p.hidden_dim; ++i) {
    c.h[i] = (1.0 - c.z[i]) * h_prev[i] + c.z[i] * c.h_tilde[i];
  }
  return c;
}

struct GruStepGrad {
  Vec dx;
  Vec dh_prev;
};

// Exact gradients of the cached step. Parameter gradients accumulate into
// grad (same shape as the cell), so steps compose across time and levels.
inline GruStepGrad gru_step_backward(const GruParams& p, const GruStepCache& c, const Vec& dh,
                                     GruParams& grad) {
  if (dh.size() != p.hidden_dim) {
    throw error("gru_step_backward: upstream length " + std::to_string(dh.size()) +
                " vs hidden_dim " + std::to_string(p.hidden_dim));
  }
  const std::size_t n = p.hidden_dim;

  // h = (1-z) . h_prev + z . h~
  Vec dz(n), dh_tilde(n), dh_prev(n);
  for (std::size_t i = 0; i < n; ++i) {
    dz[i] = dh[i] * (c.h_tilde[i] - c.h_prev[i]);
    dh_tilde[i] = dh[i] * c.z[i];
    dh_prev[i] = dh[i] * (1.0 - c.z[i]);
  }

  // h~ = tanh(pre_h), pre_h = Wxh x + Whh (r . h_prev) + bh
  Vec dpre_h(n);
  for (std::size_t i = 0; i < n; ++i) dpre_h[i] = dh_tilde[i] * (1.0 - c.h_tilde[i] * c.h_tilde[i]);
  add_outer(grad.Wxh, dpre_h, c.x);
  add_outer(grad.Whh, dpre_h, hadamard(c.r, c.h_prev));
  if (p.use_bias) add_inplace(grad.bh, dpre_h);

  Vec d_rh = matvec_transposed(p.Whh, dpre_h);
  Vec dr(n);
  for (std::size_t i = 0; i < n; ++i) {
    dr[i] = d_rh[i] * c.h_prev[i];
    dh_prev[i] += d_rh[i] * c.r[i];
  }

  // r = sigmoid(pre_r), z = sigmoid(pre_z)
  Vec dpre_r(n), dpre_z(n);
  for (std::size_t i = 0; i < n; ++i) {
    dpre_r[i] = dr[i] * c.r[i] * (1.0 - c.r[i]);
    dpre_z[i] = dz[i] * c.z[i] * (1.0 - c.z[i]);
  }
  add_outer(grad.Wxr, dpre_r, c.x);
  add_outer(grad.Whr, dpre_r, c.h_prev);
  add_outer(grad.Wxz, dpre_z, c.x);
  add_outer(grad.Whz, dpre_z, c.h_prev);
  if (p.use_bias) {
    add_inplace(grad.br, dpre_r);
    add_inplace(grad.bz, dpre_z);
  }
  add_inplace(dh_prev, matvec_transposed(p.Whr, dpre_r));
  add_inplace(dh_prev, matvec_transposed(p.Whz, dpre_z));

  GruStepGrad g;
  g.dx = matvec_transposed(p.Wxr, dpre_r);
  add_inplace(g.dx, matvec_transposed(p.Wxz, dpre_z));
  add_inplace(g.dx, matvec_transposed(p.Wxh, dpre_h));
  g.dh_prev = std::move(dh_prev);
  return g;
}

// Unrolls the cell left to right; caches[t].h is the state after xs[t].
inline std::vector<GruStepCache> gru_sequence_forward(const GruParams& p,
                                                      const std::vector<Vec>& xs, const Vec& h0) {
  if (xs.empty()) throw error("gru_sequence_forward: empty sequence");
  std::vector<GruStepCache> caches;
  caches.reserve(xs.size());
  const Vec* h = &h0;
  for (const Vec& x : xs) {
    caches.push_back(gru_step_forward(p, x, *h));
    h = &caches.back().h;
  }
  return caches;
}

// BPTT over one unrolled cell. dhs[t] is the upstream gradient on the state
// after step t (zero vectors where nothing flows in). Returns per-step input
// gradients; parameter gradients accumulate into grad.
inline std::vector<Vec> gru_sequence_backward(const GruParams& p,
                                              const std::vector<GruStepCache>& caches,
                                              const std::vector<Vec>& dhs, GruParams& grad,
                                              Vec* dh0 = nullptr) {
  if (caches.size() != dhs.size()) {
    throw error("gru_sequence_backward: cache/upstream length mismatch");
  }
  const std::size_t m = caches.size();
  std::vector<Vec> dxs(m);
  Vec carry(p.hidden_dim, 0.0);
  for (std::size_t t = m; t-- > 0;) {
    Vec dh = add(dhs[t], carry);
    GruStepGrad g = gru_step_backward(p, caches[t], dh, grad);
    dxs[t] = std::move(g.dx);
    carry = std::move(g.dh_prev);
  }
  if (dh0) *dh0 = std::move(carry);
  return dxs;
}

// Final read-out: logit = W x + b.
struct LinearParams {
  Matrix W;  // 1 x input_dim
  double b = 0.0;
};

inline LinearParams make_linear(std::size_t input_dim) {
  LinearParams p;
  p.W = Matrix(1, input_dim);
  return p;
}

inline LinearParams init_linear(Rng& rng, std::size_t input_dim) {
  LinearParams p;
  p.W = init_uniform(rng, 1, input_dim, input_dim, 1);
  return p;
}

inline double linear_forward(const LinearParams& p, const Vec& x) {
  if (x.size() != p.W.cols) {
    throw error("linear_forward: input length " + std::to_string(x.size()) + " vs weight " +
                shape_str(p.W));
  }
  double s = p.b;
  for (std::size_t j = 0; j < x.size(); ++j) s += p.W.data[j] * x[j];
  return s;
}

inline Vec linear_backward(const LinearParams& p, const Vec& x, double dlogit,
                           LinearParams& grad) {
  if (x.size() != p.W.cols) {
    throw error("linear_backward: input length " + std::to_string(x.size()) + " vs weight " +
                shape_str(p.W));
  }
  Vec dx(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    grad.W.data[j] += dlogit * x[j];
    dx[j] = dlogit * p.W.data[j];
  }
  grad.b += dlogit;
  return dx;
}

inline constexpr double kBceEps = 1e-12;

inline double bce_loss(double prob, int label) {
  if (label != 0 && label != 1) {
    throw error("bce_loss: label must be 0 or 1, got " + std::to_string(label));
  }
  double p = prob;
  if (p < kBceEps) p = kBceEps;
  if (p > 1.0 - kBceEps) p = 1.0 - kBceEps;
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

// d(loss)/d(logit) with prob = sigmoid(logit); stable through saturation.
inline double bce_dlogit(double prob, int label) {
  if (label != 0 && label != 1) {
    throw error("bce_dlogit: label must be 0 or 1, got " + std::to_string(label));
  }
  return prob - static_cast<double>(label);
}

}  // namespace sfgru
