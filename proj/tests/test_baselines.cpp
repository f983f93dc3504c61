#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vsensor/baselines.hpp"

using namespace vsensor;

namespace {

Tensor2 random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n01;
  Tensor2 t(r, c);
  for (double& x : t.values()) x = n01(rng);
  return t;
}

template <typename M>
double frozen_mask_loss(M& m, const Tensor2& x, const Tensor2& y, bool with_grad) {
  Rng rng(31);
  typename M::Cache cache;
  const auto r = mse_loss(m.forward(x, Mode::Train, rng, &cache), y);
  if (with_grad) m.backward(cache, r.grad);
  return r.loss;
}

template <typename M>
void nudge_biases(M& m, Rng& rng) {
  std::normal_distribution<double> n01(0.1, 0.1);
  for (auto* p : m.parameters()) {
    if (p->value.rows() == 1) {
      for (double& v : p->value.values()) v = n01(rng);
    }
  }
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveFinalBias) {
  Rng rng(0);
  MlpModel m(5, MlpConfig{}, rng);
  for (auto* p : m.parameters()) p->value.fill(0.0);
  m.l4.b.value[0] = 7.25;
  const Tensor2 y = m.forward(random_matrix(4, 5, rng), Mode::Eval, rng, nullptr);
  for (double v : y.values()) EXPECT_EQ(v, 7.25);
}

TEST(Cnn, ZeroWeightsGiveFinalBias) {
  Rng rng(0);
  CnnModel m(7, CnnConfig{}, rng);
  for (auto* p : m.parameters()) p->value.fill(0.0);
  m.fc2.b.value[0] = -3.5;
  const Tensor2 y = m.forward(random_matrix(3, 7, rng), Mode::Eval, rng, nullptr);
  for (double v : y.values()) EXPECT_EQ(v, -3.5);
}

TEST(Baselines, EvalModeDeterministic) {
  Rng rng(1);
  MlpModel mlp(6, MlpConfig{}, rng);
  CnnModel cnn(6, CnnConfig{}, rng);
  const Tensor2 x = random_matrix(5, 6, rng);
  Rng a(1), b(2);
  EXPECT_EQ(mlp.forward(x, Mode::Eval, a, nullptr), mlp.forward(x, Mode::Eval, b, nullptr));
  EXPECT_EQ(cnn.forward(x, Mode::Eval, a, nullptr), cnn.forward(x, Mode::Eval, b, nullptr));
}

TEST(Baselines, ShapeMismatchThrows) {
  Rng rng(1);
  MlpModel mlp(6, MlpConfig{}, rng);
  CnnModel cnn(6, CnnConfig{}, rng);
  EXPECT_THROW(mlp.forward(Tensor2(2, 5), Mode::Eval, rng, nullptr), ShapeError);
  EXPECT_THROW(cnn.forward(Tensor2(2, 5), Mode::Eval, rng, nullptr), ShapeError);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    MlpModel m(6, MlpConfig{{8, 7, 5}, 0.5}, rng);
    nudge_biases(m, rng);
    const Tensor2 x = random_matrix(4, 6, rng), y = random_matrix(4, 1, rng);
    const auto res = grad_check([&](bool g) { return frozen_mask_loss(m, x, y, g); }, m.parameters());
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst_param;
  }
}

TEST(Cnn, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    CnnModel m(7, CnnConfig{3, 3, 6, 0.5}, rng);
    nudge_biases(m, rng);
    const Tensor2 x = random_matrix(4, 7, rng), y = random_matrix(4, 1, rng);
    const auto res = grad_check([&](bool g) { return frozen_mask_loss(m, x, y, g); }, m.parameters());
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst_param;
  }
}

TEST(Gbt, ConstantTargets) {
  Rng rng(2);
  const Tensor2 x = random_matrix(30, 3, rng);
  const std::vector<double> y(30, 4.5);
  const GbtModel m = gbt_fit(x, y, GbtConfig{});
  for (std::size_t i = 0; i < 30; ++i) EXPECT_DOUBLE_EQ(m.predict(x.row(i)), 4.5);
  for (const auto& t : m.trees) EXPECT_EQ(t.leaf_count(), 1u);
}

TEST(Gbt, SeparableBinaryFeature) {
  Tensor2 x(40, 2);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 0) = static_cast<double>(i % 7);
    x(i, 1) = i < 20 ? 0.0 : 1.0;
    y[i] = i < 20 ? 0.0 : 10.0;
  }
  const GbtModel m = gbt_fit(x, y, GbtConfig{});
  EXPECT_LT(m.train_mse.back(), 0.01);
  EXPECT_EQ(m.trees.front().nodes.front().feature, 1);
}

TEST(Gbt, DepthOneMatchesExhaustiveSplitSearch) {
  Rng rng(3);
  const Tensor2 x = random_matrix(25, 3, rng);
  std::vector<double> y(25);
  std::normal_distribution<double> n01;
  for (std::size_t i = 0; i < 25; ++i) y[i] = 3 * x(i, 1) + n01(rng);
  const GbtModel m = gbt_fit(x, y, GbtConfig{1, 1, 1.0, 1});

  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 25.0;
  double best_sse = std::numeric_limits<double>::infinity();
  std::size_t bf = 0;
  double bt = 0;
  for (std::size_t f = 0; f < 3; ++f) {
    for (std::size_t i = 0; i < 25; ++i) {
      const double thr = x(i, f);
      double sl = 0, sr = 0;
      int nl = 0, nr = 0;
      for (std::size_t k = 0; k < 25; ++k) {
        if (x(k, f) <= thr) {
          sl += y[k];
          ++nl;
        } else {
          sr += y[k];
          ++nr;
        }
      }
      if (nl == 0 || nr == 0) continue;
      double sse = 0;
      for (std::size_t k = 0; k < 25; ++k) {
        const double p = x(k, f) <= thr ? sl / nl : sr / nr;
        sse += (y[k] - p) * (y[k] - p);
      }
      if (sse < best_sse - 1e-12) {
        best_sse = sse;
        bf = f;
        bt = thr;
      }
    }
  }
  double sl = 0, sr = 0;
  int nl = 0, nr = 0;
  for (std::size_t k = 0; k < 25; ++k) {
    if (x(k, bf) <= bt) {
      sl += y[k] - mean;
      ++nl;
    } else {
      sr += y[k] - mean;
      ++nr;
    }
  }
  ASSERT_EQ(m.trees.size(), 1u);
  EXPECT_EQ(m.trees[0].nodes[0].feature, static_cast<int>(bf));
  for (std::size_t k = 0; k < 25; ++k) {
    const double expect = mean + (x(k, bf) <= bt ? sl / nl : sr / nr);
    EXPECT_NEAR(m.predict(x.row(k)), expect, 1e-9);
  }
  EXPECT_NEAR(m.train_mse.back(), best_sse / 25.0, 1e-9);
}

TEST(Gbt, ZeroTreesPredictsMean) {
  Rng rng(4);
  const Tensor2 x = random_matrix(10, 2, rng);
  std::vector<double> y(10);
  std::iota(y.begin(), y.end(), 1.0);
  const GbtModel m = gbt_fit(x, y, GbtConfig{0, 3, 0.1, 1});
  EXPECT_DOUBLE_EQ(gbt_predict(m, x.row(3)), 5.5);
}

TEST(Gbt, DeepEnsembleOverfits) {
  Rng rng(5);
  const Tensor2 x = random_matrix(40, 3, rng);
  std::vector<double> y(40);
  std::normal_distribution<double> n01;
  for (double& v : y) v = 20 + 5 * n01(rng);
  const GbtModel m = gbt_fit(x, y, GbtConfig{100, 12, 1.0, 1});
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(m.predict(x.row(i)), y[i], 1e-6);
}

TEST(Gbt, FeaturePermutationWithRemappedTrees) {
  Rng rng(6);
  const Tensor2 x = random_matrix(50, 4, rng);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = x(i, 0) - 2 * x(i, 3) + x(i, 1) * x(i, 2);
  const GbtModel m = gbt_fit(x, y, GbtConfig{30, 3, 0.3, 1});
  const std::array<int, 4> perm{2, 0, 3, 1};  // old feature f moves to column perm[f]
  GbtModel p = m;
  for (auto& t : p.trees) {
    for (auto& n : t.nodes) {
      if (n.feature >= 0) n.feature = perm[n.feature];
    }
  }
  for (std::size_t i = 0; i < 50; ++i) {
    std::vector<double> xp(4);
    for (int f = 0; f < 4; ++f) xp[perm[f]] = x(i, f);
    EXPECT_EQ(p.predict(xp), m.predict(x.row(i)));
  }
}

TEST(Gbt, TrainingLossNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed + 10);
    const Tensor2 x = random_matrix(200, 5, rng);
    std::vector<double> y(200);
    std::normal_distribution<double> n01;
    for (std::size_t i = 0; i < 200; ++i) y[i] = std::sin(x(i, 0)) * 10 + x(i, 2) * x(i, 4) + n01(rng);
    const GbtModel m = gbt_fit(x, y, GbtConfig{});
    ASSERT_EQ(m.train_mse.size(), 101u);
    for (std::size_t t = 1; t < m.train_mse.size(); ++t) EXPECT_LE(m.train_mse[t], m.train_mse[t - 1]);
  }
}

TEST(Gbt, EmptyInputThrows) {
  EXPECT_THROW(gbt_fit(Tensor2(0, 3), std::vector<double>{}, GbtConfig{}), std::invalid_argument);
}
