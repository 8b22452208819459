#include <gtest/gtest.h>

#include <cmath>

#include "sfgru/gru.hpp"

using namespace sfgru;

namespace {

// Test-side flatten/unflatten for one cell, independent of the model layer.
std::vector<double> flatten_cell(const GruParams& p) {
  std::vector<double> flat;
  for (const Matrix* m : {&p.Wxr, &p.Wxz, &p.Wxh, &p.Whr, &p.Whz, &p.Whh}) {
    flat.insert(flat.end(), m->data.begin(), m->data.end());
  }
  if (p.use_bias) {
    for (const Vec* v : {&p.br, &p.bz, &p.bh}) flat.insert(flat.end(), v->begin(), v->end());
  }
  return flat;
}

void unflatten_cell(GruParams& p, const std::vector<double>& flat) {
  std::size_t off = 0;
  for (Matrix* m : {&p.Wxr, &p.Wxz, &p.Wxh, &p.Whr, &p.Whz, &p.Whh}) {
    std::copy(flat.begin() + off, flat.begin() + off + m->data.size(), m->data.begin());
    off += m->data.size();
  }
  if (p.use_bias) {
    for (Vec* v : {&p.br, &p.bz, &p.bh}) {
      std::copy(flat.begin() + off, flat.begin() + off + v->size(), v->begin());
      off += v->size();
    }
  }
  ASSERT_EQ(off, flat.size());
}

GruParams random_cell(Rng& rng, std::size_t input_dim, std::size_t hidden_dim) {
  GruParams p = init_gru(rng, input_dim, hidden_dim);
  for (double& b : p.br) b = rng.uniform(-0.5, 0.5);
  for (double& b : p.bz) b = rng.uniform(-0.5, 0.5);
  for (double& b : p.bh) b = rng.uniform(-0.5, 0.5);
  return p;
}

Vec random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST(GruStep, ZeroWeightsGiveHalvedState) {
  GruParams p = make_gru(2, 2);
  const GruStepCache c = gru_step_forward(p, Vec{0.3, -0.7}, Vec{1.0, 1.0});
  EXPECT_EQ(c.r, (Vec{0.5, 0.5}));
  EXPECT_EQ(c.z, (Vec{0.5, 0.5}));
  EXPECT_EQ(c.h_tilde, (Vec{0.0, 0.0}));
  EXPECT_EQ(c.h, (Vec{0.5, 0.5}));
}

TEST(GruStep, ScalarCellHandEvaluated) {
  // Wxr=Wxz=Wxh=1, Whr=Whz=0, Whh=1, no bias contribution, x=1, h_prev=0:
  // r = z = sigmoid(1), h~ = tanh(1), h = sigmoid(1)*tanh(1).
  GruParams p = make_gru(1, 1);
  p.Wxr(0, 0) = 1.0;
  p.Wxz(0, 0) = 1.0;
  p.Wxh(0, 0) = 1.0;
  p.Whh(0, 0) = 1.0;
  const GruStepCache c = gru_step_forward(p, Vec{1.0}, Vec{0.0});
  EXPECT_NEAR(c.r[0], 0.7310585786, 1e-9);
  EXPECT_NEAR(c.z[0], 0.7310585786, 1e-9);
  EXPECT_NEAR(c.h_tilde[0], 0.7615941560, 1e-9);
  EXPECT_NEAR(c.h[0], 0.5567699411, 1e-9);
}

TEST(GruStep, UpdateGateSaturationPassesCandidate) {
  // Large positive z pre-activation with h_prev = 0 drives h -> h~.
  GruParams p = make_gru(1, 1);
  p.Wxz(0, 0) = 50.0;
  p.Wxh(0, 0) = 0.8;
  const GruStepCache c = gru_step_forward(p, Vec{1.0}, Vec{0.0});
  EXPECT_NEAR(c.h[0], c.h_tilde[0], 1e-15);
}

TEST(GruStep, GateRangesAndBoundedness) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    GruParams p = random_cell(rng, 4, 5);
    const Vec x = random_vec(rng, 4, -3.0, 3.0);
    const Vec h_prev = random_vec(rng, 5);  // inf-norm <= 1
    const GruStepCache c = gru_step_forward(p, x, h_prev);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_GT(c.r[i], 0.0);
      EXPECT_LT(c.r[i], 1.0);
      EXPECT_GT(c.z[i], 0.0);
      EXPECT_LT(c.z[i], 1.0);
      EXPECT_GT(c.h_tilde[i], -1.0);
      EXPECT_LT(c.h_tilde[i], 1.0);
      EXPECT_LE(std::fabs(c.h[i]), 1.0);
    }
  }
}

TEST(GruStep, ShapeMismatchRejected) {
  GruParams p = make_gru(3, 2);
  EXPECT_THROW(gru_step_forward(p, Vec{1.0}, Vec{0.0, 0.0}), error);
  EXPECT_THROW(gru_step_forward(p, Vec{1.0, 2.0, 3.0}, Vec{0.0}), error);
}

TEST(GruStep, CacheReplayBitwise) {
  Rng rng(33);
  GruParams p = random_cell(rng, 3, 4);
  const Vec x = random_vec(rng, 3);
  const Vec h_prev = random_vec(rng, 4);
  const GruStepCache c1 = gru_step_forward(p, x, h_prev);
  const GruStepCache c2 = gru_step_forward(p, c1.x, c1.h_prev);
  EXPECT_EQ(c1.r, c2.r);
  EXPECT_EQ(c1.z, c2.z);
  EXPECT_EQ(c1.h_tilde, c2.h_tilde);
  EXPECT_EQ(c1.h, c2.h);
}

TEST(GruBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(5);
  GruParams p = random_cell(rng, 3, 4);
  const GruStepCache c = gru_step_forward(p, random_vec(rng, 3), random_vec(rng, 4));
  GruParams grad = make_gru(3, 4);
  const GruStepGrad g = gru_step_backward(p, c, Vec(4, 0.0), grad);
  for (double x : g.dx) EXPECT_EQ(x, 0.0);
  for (double x : g.dh_prev) EXPECT_EQ(x, 0.0);
  for (double x : flatten_cell(grad)) EXPECT_EQ(x, 0.0);
}

TEST(GruBackward, ZeroWeightCellHalvesUpstream) {
  GruParams p = make_gru(2, 2);
  const GruStepCache c = gru_step_forward(p, Vec{0.1, 0.2}, Vec{0.4, -0.3});
  GruParams grad = make_gru(2, 2);
  const GruStepGrad g = gru_step_backward(p, c, Vec{1.0, -2.0}, grad);
  EXPECT_NEAR(g.dh_prev[0], 0.5, 1e-15);
  EXPECT_NEAR(g.dh_prev[1], -1.0, 1e-15);
}

TEST(GruBackward, StepGradientsMatchFiniteDifferences) {
  // Loss c . h for a random 3-d cell; every parameter within 1e-6 relative.
  Rng rng(17);
  GruParams p = random_cell(rng, 3, 3);
  const Vec x = random_vec(rng, 3);
  const Vec h_prev = random_vec(rng, 3);
  const Vec cvec = random_vec(rng, 3);

  const GruStepCache cache = gru_step_forward(p, x, h_prev);
  GruParams analytic = make_gru(3, 3);
  gru_step_backward(p, cache, cvec, analytic);

  GruParams probe = make_gru(3, 3);
  auto f = [&](const std::vector<double>& theta) {
    unflatten_cell(probe, theta);
    const GruStepCache c = gru_step_forward(probe, x, h_prev);
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += cvec[i] * c.h[i];
    return s;
  };
  const std::vector<double> numeric = finite_diff_grad(f, flatten_cell(p), 1e-5);
  const std::vector<double> exact = flatten_cell(analytic);
  ASSERT_EQ(numeric.size(), exact.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double denom = std::max({std::fabs(numeric[i]), std::fabs(exact[i]), 1e-8});
    EXPECT_LT(std::fabs(numeric[i] - exact[i]) / denom, 1e-6) << "param index " << i;
  }
}

TEST(GruSequence, LengthOneEqualsSingleStep) {
  Rng rng(8);
  GruParams p = random_cell(rng, 2, 3);
  const Vec x = random_vec(rng, 2);
  const Vec h0(3, 0.0);
  const auto caches = gru_sequence_forward(p, {x}, h0);
  const GruStepCache single = gru_step_forward(p, x, h0);
  EXPECT_EQ(caches.size(), 1u);
  EXPECT_EQ(caches[0].h, single.h);
}

TEST(GruSequence, ZeroWeightHalvingRecurrence) {
  GruParams p = make_gru(1, 1);
  const auto caches = gru_sequence_forward(p, {Vec{0.0}, Vec{0.0}, Vec{0.0}}, Vec{1.0});
  EXPECT_DOUBLE_EQ(caches[0].h[0], 0.5);
  EXPECT_DOUBLE_EQ(caches[1].h[0], 0.25);
  EXPECT_DOUBLE_EQ(caches[2].h[0], 0.125);
}

TEST(GruSequence, EmptySequenceRejected) {
  GruParams p = make_gru(1, 1);
  EXPECT_THROW(gru_sequence_forward(p, {}, Vec{0.0}), error);
}

TEST(GruSequence, MatchesScalarLoopReference) {
  // Independent scalar reference: plain index loops over the raw arrays.
  Rng rng(29);
  const std::size_t in = 2, hid = 2, m = 4;
  GruParams p = random_cell(rng, in, hid);
  std::vector<Vec> xs;
  for (std::size_t t = 0; t < m; ++t) xs.push_back(random_vec(rng, in));

  Vec h(hid, 0.0);
  std::vector<Vec> ref;
  for (std::size_t t = 0; t < m; ++t) {
    Vec r(hid), z(hid), ht(hid), hn(hid);
    for (std::size_t i = 0; i < hid; ++i) {
      double ar = p.br[i], az = p.bz[i];
      for (std::size_t j = 0; j < in; ++j) {
        ar += p.Wxr(i, j) * xs[t][j];
        az += p.Wxz(i, j) * xs[t][j];
      }
      for (std::size_t j = 0; j < hid; ++j) {
        ar += p.Whr(i, j) * h[j];
        az += p.Whz(i, j) * h[j];
      }
      r[i] = 1.0 / (1.0 + std::exp(-ar));
      z[i] = 1.0 / (1.0 + std::exp(-az));
    }
    for (std::size_t i = 0; i < hid; ++i) {
      double ah = p.bh[i];
      for (std::size_t j = 0; j < in; ++j) ah += p.Wxh(i, j) * xs[t][j];
      for (std::size_t j = 0; j < hid; ++j) ah += p.Whh(i, j) * (r[j] * h[j]);
      ht[i] = std::tanh(ah);
    }
    for (std::size_t i = 0; i < hid; ++i) hn[i] = (1.0 - z[i]) * h[i] + z[i] * ht[i];
    h = hn;
    ref.push_back(h);
  }

  const auto caches = gru_sequence_forward(p, xs, Vec(hid, 0.0));
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t i = 0; i < hid; ++i) {
      EXPECT_NEAR(caches[t].h[i], ref[t][i], 1e-12);
    }
  }
}

TEST(GruSequence, BpttMatchesFiniteDifferences) {
  // Total BCE of a fixed linear read-out of the last state, rel err 1e-4.
  Rng rng(31);
  const std::size_t in = 3, hid = 6, m = 5;
  GruParams p = random_cell(rng, in, hid);
  LinearParams clf = init_linear(rng, hid);
  std::vector<Vec> xs;
  for (std::size_t t = 0; t < m; ++t) xs.push_back(random_vec(rng, in));
  const int label = 1;

  const auto caches = gru_sequence_forward(p, xs, Vec(hid, 0.0));
  const double prob = sigmoid(linear_forward(clf, caches.back().h));
  GruParams analytic = make_gru(in, hid);
  std::vector<Vec> dhs(m, Vec(hid, 0.0));
  LinearParams clf_grad = make_linear(hid);
  dhs[m - 1] = linear_backward(clf, caches.back().h, bce_dlogit(prob, label), clf_grad);
  gru_sequence_backward(p, caches, dhs, analytic);

  GruParams probe = make_gru(in, hid);
  auto f = [&](const std::vector<double>& theta) {
    unflatten_cell(probe, theta);
    const auto c = gru_sequence_forward(probe, xs, Vec(hid, 0.0));
    return bce_loss(sigmoid(linear_forward(clf, c.back().h)), label);
  };
  const std::vector<double> numeric = finite_diff_grad(f, flatten_cell(p), 1e-5);
  const std::vector<double> exact = flatten_cell(analytic);
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double denom = std::max({std::fabs(numeric[i]), std::fabs(exact[i]), 1e-8});
    EXPECT_LT(std::fabs(numeric[i] - exact[i]) / denom, 1e-4) << "param index " << i;
  }
}

TEST(Linear, ValuesAndGradient) {
  LinearParams zero = make_linear(2);
  EXPECT_EQ(linear_forward(zero, Vec{1.0, 2.0}), 0.0);
  EXPECT_DOUBLE_EQ(sigmoid(linear_forward(zero, Vec{1.0, 2.0})), 0.5);

  LinearParams p = make_linear(2);
  p.W(0, 0) = 1.0;
  p.W(0, 1) = -1.0;
  p.b = 0.5;
  EXPECT_DOUBLE_EQ(linear_forward(p, Vec{2.0, 1.0}), 1.5);

  const Vec x{0.7, -0.4};
  auto f = [&](const std::vector<double>& theta) {
    LinearParams q = make_linear(2);
    q.W(0, 0) = theta[0];
    q.W(0, 1) = theta[1];
    q.b = theta[2];
    return linear_forward(q, x);
  };
  const std::vector<double> numeric = finite_diff_grad(f, {1.0, -1.0, 0.5}, 1e-5);
  LinearParams grad = make_linear(2);
  linear_backward(p, x, 1.0, grad);
  EXPECT_NEAR(grad.W(0, 0), numeric[0], 1e-8);
  EXPECT_NEAR(grad.W(0, 1), numeric[1], 1e-8);
  EXPECT_NEAR(grad.b, numeric[2], 1e-8);
}

TEST(Bce, ValuesAndGradient) {
  EXPECT_NEAR(bce_loss(0.5, 1), 0.6931471805599453, 1e-12);
  EXPECT_NEAR(bce_loss(1.0 - 1e-12, 1), 0.0, 1e-11);
  EXPECT_DOUBLE_EQ(bce_dlogit(0.8, 0), 0.8);
  EXPECT_THROW(bce_loss(0.5, 2), error);
  EXPECT_THROW(bce_dlogit(0.5, -1), error);
  // label 1 at saturated-low probability stays finite through the clamp
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
}
