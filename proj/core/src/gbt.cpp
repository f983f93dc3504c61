#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vsensor/baselines.hpp"

namespace vsensor {

double RegressionTree::predict(std::span<const double> x) const {
  if (nodes.empty()) return 0.0;
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

double GbtModel::predict_partial(std::span<const double> x, std::size_t n_trees) const {
  if (x.size() != n_features) throw ShapeError("gbt_predict: expected " + std::to_string(n_features) + " features");
  double y = init;
  const std::size_t m = std::min(n_trees, trees.size());
  for (std::size_t t = 0; t < m; ++t) y += trees[t].predict(x);
  return y;
}

double GbtModel::predict(std::span<const double> x) const { return predict_partial(x, trees.size()); }

double gbt_predict(const GbtModel& model, std::span<const double> x) { return model.predict(x); }

namespace {

struct SplitCandidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

double mse_of(std::span<const double> y, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - f[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

// Grows one least-squares tree level by level. Leaf values are the mean
// residual scaled by the learning rate.
RegressionTree grow_tree(const Tensor2& x, const std::vector<std::vector<std::size_t>>& sorted,
                         std::span<const double> residual, const GbtConfig& cfg) {
  const std::size_t n = x.rows();
  const std::size_t n_feat = x.cols();
  RegressionTree tree;
  tree.nodes.push_back({});
  std::vector<std::size_t> node_of(n, 0);
  std::vector<std::size_t> active{0};

  // Per-node totals, indexed by tree node id.
  std::vector<double> total_sum(1, 0.0);
  std::vector<std::size_t> total_cnt(1, n);
  for (double r : residual) total_sum[0] += r;

  for (std::size_t depth = 0; depth < cfg.max_depth && !active.empty(); ++depth) {
    const std::size_t n_nodes = tree.nodes.size();
    std::vector<char> is_active(n_nodes, 0);
    for (std::size_t a : active) is_active[a] = 1;
    std::vector<SplitCandidate> best(n_nodes);
    std::vector<double> left_sum(n_nodes);
    std::vector<std::size_t> left_cnt(n_nodes);
    std::vector<double> last(n_nodes);

    for (std::size_t f = 0; f < n_feat; ++f) {
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      std::fill(left_cnt.begin(), left_cnt.end(), 0);
      for (std::size_t i : sorted[f]) {
        const std::size_t nd = node_of[i];
        if (!is_active[nd]) continue;
        const double v = x(i, f);
        if (left_cnt[nd] >= cfg.min_samples_leaf && v != last[nd]) {
          const std::size_t nl = left_cnt[nd];
          const std::size_t nr = total_cnt[nd] - nl;
          if (nr >= cfg.min_samples_leaf) {
            const double sl = left_sum[nd];
            const double sr = total_sum[nd] - sl;
            const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                                total_sum[nd] * total_sum[nd] / static_cast<double>(total_cnt[nd]);
            if (gain > best[nd].gain) {
              double thr = last[nd] + (v - last[nd]) / 2.0;
              if (!(thr < v)) thr = last[nd];
              best[nd] = {gain, static_cast<std::int32_t>(f), thr};
            }
          }
        }
        left_sum[nd] += residual[i];
        ++left_cnt[nd];
        last[nd] = v;
      }
    }

    std::vector<std::size_t> next_active;
    for (std::size_t nd : active) {
      const auto& b = best[nd];
      const double scale = std::max(1.0, std::abs(total_sum[nd] * total_sum[nd] / static_cast<double>(total_cnt[nd])));
      if (b.feature < 0 || !(b.gain > 1e-12 * scale)) continue;
      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      tree.nodes[nd].feature = b.feature;
      tree.nodes[nd].threshold = b.threshold;
      tree.nodes[nd].left = left;
      tree.nodes[nd].right = left + 1;
      total_sum.resize(tree.nodes.size(), 0.0);
      total_cnt.resize(tree.nodes.size(), 0);
      next_active.push_back(static_cast<std::size_t>(left));
      next_active.push_back(static_cast<std::size_t>(left + 1));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nd = tree.nodes[node_of[i]];
      if (nd.feature < 0) continue;
      node_of[i] = static_cast<std::size_t>(x(i, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left
                                                                                                       : nd.right);
      total_sum[node_of[i]] += residual[i];
      ++total_cnt[node_of[i]];
    }
    active = std::move(next_active);
  }

  std::vector<double> sum(tree.nodes.size(), 0.0);
  std::vector<std::size_t> cnt(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[node_of[i]] += residual[i];
    ++cnt[node_of[i]];
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (tree.nodes[k].feature < 0 && cnt[k] > 0) {
      tree.nodes[k].value = cfg.learning_rate * sum[k] / static_cast<double>(cnt[k]);
    }
  }
  return tree;
}

}  // namespace

GbtModel gbt_fit(const Tensor2& x, std::span<const double> y, const GbtConfig& cfg) {
  if (x.rows() == 0 || y.empty()) throw std::invalid_argument("gbt_fit: empty input");
  if (x.rows() != y.size()) throw ShapeError("gbt_fit: row count mismatch");
  if (x.rows() < 2) throw std::invalid_argument("gbt_fit: need at least 2 rows");
  if (!x.all_finite()) throw std::invalid_argument("gbt_fit: non-finite features");
  if (cfg.min_samples_leaf == 0) throw std::invalid_argument("gbt_fit: min_samples_leaf must be >= 1");

  GbtModel model;
  model.config = cfg;
  model.n_features = x.cols();
  model.init = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

  const std::size_t n = x.rows();
  std::vector<std::vector<std::size_t>> sorted(x.cols(), std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0);
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
  }

  std::vector<double> pred(n, model.init);
  std::vector<double> residual(n);
  model.train_mse.push_back(mse_of(y, pred));
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];
    RegressionTree tree = grow_tree(x, sorted, residual, cfg);
    for (std::size_t i = 0; i < n; ++i) pred[i] += tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.train_mse.push_back(mse_of(y, pred));
  }
  return model;
}

}  // namespace vsensor
