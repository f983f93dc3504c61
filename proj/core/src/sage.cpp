#include "vsensor/sage.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vsensor {

std::string to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::Mean: return "mean";
    case AggregatorKind::MaxPool: return "maxpool";
    case AggregatorKind::MeanPool: return "meanpool";
    case AggregatorKind::Attentional: return "attention";
  }
  return "?";
}

AggregatorKind aggregator_from_string(const std::string& s) {
  for (auto k : kAllAggregators) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown aggregator '" + s + "' (mean|maxpool|meanpool|attention)");
}

void SageConfig::validate() const {
  if (hidden[0] == 0 || hidden[1] == 0 || pool_dim == 0) throw std::invalid_argument("SageConfig: dims must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("SageConfig: dropout must lie in [0, 1)");
  if (budget.hop1() == 0 || budget.hop2() == 0) throw std::invalid_argument("SageConfig: sample budgets must be >= 1");
}

namespace {
bool is_pool(AggregatorKind k) { return k == AggregatorKind::MaxPool || k == AggregatorKind::MeanPool; }
}  // namespace

SageLayer::SageLayer(const std::string& name, AggregatorKind kind, std::size_t d_in, std::size_t d_out,
                     std::size_t pool_dim, Rng& rng)
    : w_self(name + ".w_self", d_in, d_out), bias(name + ".bias", 1, d_out), kind_(kind) {
  glorot_init(w_self.value, d_in, d_out, rng);
  const std::size_t d_agg = is_pool(kind) ? pool_dim : d_in;
  w_neigh = Param(name + ".w_neigh", d_agg, d_out);
  glorot_init(w_neigh.value, d_agg, d_out, rng);
  if (is_pool(kind)) {
    w_pool = Param(name + ".w_pool", d_in, pool_dim);
    b_pool = Param(name + ".b_pool", 1, pool_dim);
    glorot_init(w_pool.value, d_in, pool_dim, rng);
  }
  if (kind == AggregatorKind::Attentional) {
    attention = Param(name + ".attention", 1, 2 * d_out);
    glorot_init(attention.value, 2 * d_out, 1, rng);
  }
}

std::size_t SageLayer::agg_dim() const {
  switch (kind_) {
    case AggregatorKind::Mean: return in_dim();
    case AggregatorKind::MaxPool:
    case AggregatorKind::MeanPool: return w_pool.value.cols();
    case AggregatorKind::Attentional: return out_dim();
  }
  return 0;
}

void SageLayer::collect(ParamList& out) {
  out.push_back(&w_self);
  out.push_back(&w_neigh);
  out.push_back(&bias);
  if (is_pool(kind_)) {
    out.push_back(&w_pool);
    out.push_back(&b_pool);
  }
  if (kind_ == AggregatorKind::Attentional) out.push_back(&attention);
}

void SageLayer::aggregate_rows(const Tensor2& in, const Tensor2& pooled, const Tensor2& proj, std::size_t self_row,
                               std::span<const std::size_t> neigh, std::span<double> out,
                               std::vector<std::size_t>* argmax, std::vector<double>* alpha,
                               std::vector<double>* scores) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (neigh.empty()) return;
  const double inv = 1.0 / static_cast<double>(neigh.size());
  switch (kind_) {
    case AggregatorKind::Mean:
      for (std::size_t v : neigh) {
        auto r = in.row(v);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j] * inv;
      }
      break;
    case AggregatorKind::MeanPool:
      for (std::size_t v : neigh) {
        auto r = pooled.row(v);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j] * inv;
      }
      break;
    case AggregatorKind::MaxPool: {
      std::vector<std::size_t> arg(out.size(), neigh[0]);
      auto r0 = pooled.row(neigh[0]);
      std::copy(r0.begin(), r0.end(), out.begin());
      for (std::size_t idx = 1; idx < neigh.size(); ++idx) {
        auto r = pooled.row(neigh[idx]);
        for (std::size_t j = 0; j < out.size(); ++j) {
          if (r[j] > out[j]) {
            out[j] = r[j];
            arg[j] = neigh[idx];
          }
        }
      }
      if (argmax) *argmax = std::move(arg);
      break;
    }
    case AggregatorKind::Attentional: {
      const std::size_t d = out_dim();
      auto a = attention.value.values();
      auto q_self = proj.row(self_row);
      double self_term = 0.0;
      for (std::size_t j = 0; j < d; ++j) self_term += a[j] * q_self[j];
      std::vector<double> s(neigh.size());
      std::vector<double> w(neigh.size());
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t idx = 0; idx < neigh.size(); ++idx) {
        auto q = proj.row(neigh[idx]);
        double t = self_term;
        for (std::size_t j = 0; j < d; ++j) t += a[d + j] * q[j];
        s[idx] = t;
        w[idx] = leaky_relu(t, 0.2);
        mx = std::max(mx, w[idx]);
      }
      double z = 0.0;
      for (double& e : w) {
        e = std::exp(e - mx);
        z += e;
      }
      for (double& e : w) e /= z;
      for (std::size_t idx = 0; idx < neigh.size(); ++idx) {
        auto q = proj.row(neigh[idx]);
        for (std::size_t j = 0; j < d; ++j) out[j] += w[idx] * q[j];
      }
      if (alpha) *alpha = std::move(w);
      if (scores) *scores = std::move(s);
      break;
    }
  }
}

Tensor2 SageLayer::forward(const Tensor2& in, std::span<const std::size_t> self_rows,
                           const std::vector<std::vector<std::size_t>>& neigh_rows, const Tensor2& mask,
                           Cache* cache) const {
  const std::size_t k = self_rows.size();
  if (in.cols() != in_dim()) {
    throw ShapeError("SageLayer: input " + in.shape_string() + " but layer expects " + std::to_string(in_dim()) +
                     " columns");
  }
  if (neigh_rows.size() != k || mask.rows() != k || mask.cols() != out_dim()) {
    throw ShapeError("SageLayer: inconsistent batch description");
  }

  Tensor2 pooled;
  Tensor2 proj;
  if (is_pool(kind_)) {
    pooled = matmul(in, w_pool.value);
    for (std::size_t r = 0; r < pooled.rows(); ++r) {
      auto row = pooled.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = sigmoid(row[j] + b_pool.value[j]);
    }
  } else if (kind_ == AggregatorKind::Attentional) {
    proj = matmul(in, w_neigh.value);
  }

  Tensor2 agg(k, agg_dim());
  std::vector<std::vector<std::size_t>> argmax(cache && kind_ == AggregatorKind::MaxPool ? k : 0);
  std::vector<std::vector<double>> alpha(cache && kind_ == AggregatorKind::Attentional ? k : 0);
  std::vector<std::vector<double>> scores(alpha.size());
  for (std::size_t i = 0; i < k; ++i) {
    aggregate_rows(in, pooled, proj, self_rows[i], neigh_rows[i], agg.row(i),
                   argmax.empty() ? nullptr : &argmax[i], alpha.empty() ? nullptr : &alpha[i],
                   scores.empty() ? nullptr : &scores[i]);
  }

  Tensor2 pre(k, out_dim());
  for (std::size_t i = 0; i < k; ++i) {
    auto z = pre.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = bias.value[j];
    row_matmul_acc(in.row(self_rows[i]), w_self.value, z);
    if (kind_ == AggregatorKind::Attentional) {
      auto a = agg.row(i);
      for (std::size_t j = 0; j < z.size(); ++j) z[j] += a[j];
    } else {
      row_matmul_acc(agg.row(i), w_neigh.value, z);
    }
  }
  hadamard_inplace(pre, mask);
  Tensor2 out = relu(pre);

  if (cache) {
    cache->in = in;
    cache->self_rows.assign(self_rows.begin(), self_rows.end());
    cache->neigh_rows = neigh_rows;
    cache->pooled = std::move(pooled);
    cache->proj = std::move(proj);
    cache->agg = std::move(agg);
    cache->argmax = std::move(argmax);
    cache->alpha = std::move(alpha);
    cache->scores = std::move(scores);
    cache->pre = std::move(pre);
    cache->mask = mask;
  }
  return out;
}

Tensor2 SageLayer::backward(const Cache& c, const Tensor2& d_out, bool need_input_grad) {
  const std::size_t k = c.self_rows.size();
  if (d_out.rows() != k || d_out.cols() != out_dim()) throw ShapeError("SageLayer::backward: bad d_out shape");
  Tensor2 dz = d_out;
  relu_backward_inplace(c.pre, dz);
  hadamard_inplace(dz, c.mask);

  const std::size_t m = c.in.rows();
  Tensor2 d_in(need_input_grad ? m : 0, need_input_grad ? in_dim() : 0);

  for (std::size_t i = 0; i < k; ++i) {
    auto g = dz.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) bias.grad[j] += g[j];
    outer_acc(c.in.row(c.self_rows[i]), g, w_self.grad);
    if (need_input_grad) row_matmul_bt_acc(g, w_self.value, d_in.row(c.self_rows[i]));
  }

  if (kind_ == AggregatorKind::Attentional) {
    const std::size_t d = out_dim();
    Tensor2 d_proj(m, d);
    auto a = attention.value.values();
    auto ga = attention.grad.values();
    for (std::size_t i = 0; i < k; ++i) {
      const auto& neigh = c.neigh_rows[i];
      if (neigh.empty()) continue;
      auto dagg = dz.row(i);
      const auto& alpha = c.alpha[i];
      const auto& s = c.scores[i];
      std::vector<double> dalpha(neigh.size(), 0.0);
      double weighted = 0.0;
      for (std::size_t idx = 0; idx < neigh.size(); ++idx) {
        auto q = c.proj.row(neigh[idx]);
        auto dq = d_proj.row(neigh[idx]);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dq[j] += alpha[idx] * dagg[j];
          dot += dagg[j] * q[j];
        }
        dalpha[idx] = dot;
        weighted += alpha[idx] * dot;
      }
      const std::size_t self = c.self_rows[i];
      auto q_self = c.proj.row(self);
      for (std::size_t idx = 0; idx < neigh.size(); ++idx) {
        const double de = alpha[idx] * (dalpha[idx] - weighted);
        const double ds = de * (s[idx] > 0.0 ? 1.0 : 0.2);
        auto q = c.proj.row(neigh[idx]);
        for (std::size_t j = 0; j < d; ++j) {
          ga[j] += ds * q_self[j];
          ga[d + j] += ds * q[j];
        }
        auto dq_self = d_proj.row(self);
        for (std::size_t j = 0; j < d; ++j) dq_self[j] += ds * a[j];
        auto dq = d_proj.row(neigh[idx]);
        for (std::size_t j = 0; j < d; ++j) dq[j] += ds * a[d + j];
      }
    }
    matmul_at_b_acc(c.in, d_proj, w_neigh.grad);
    if (need_input_grad) {
      Tensor2 t = matmul_a_bt(d_proj, w_neigh.value);
      for (std::size_t i = 0; i < t.size(); ++i) d_in[i] += t[i];
    }
    return d_in;
  }

  Tensor2 d_pooled(is_pool(kind_) ? m : 0, is_pool(kind_) ? agg_dim() : 0);
  std::vector<double> dagg(agg_dim());
  for (std::size_t i = 0; i < k; ++i) {
    const auto& neigh = c.neigh_rows[i];
    auto g = dz.row(i);
    outer_acc(c.agg.row(i), g, w_neigh.grad);
    if (neigh.empty()) continue;
    std::fill(dagg.begin(), dagg.end(), 0.0);
    row_matmul_bt_acc(g, w_neigh.value, dagg);
    const double inv = 1.0 / static_cast<double>(neigh.size());
    switch (kind_) {
      case AggregatorKind::Mean:
        if (need_input_grad) {
          for (std::size_t v : neigh) {
            auto r = d_in.row(v);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += dagg[j] * inv;
          }
        }
        break;
      case AggregatorKind::MeanPool:
        for (std::size_t v : neigh) {
          auto r = d_pooled.row(v);
          for (std::size_t j = 0; j < r.size(); ++j) r[j] += dagg[j] * inv;
        }
        break;
      case AggregatorKind::MaxPool:
        for (std::size_t j = 0; j < dagg.size(); ++j) d_pooled(c.argmax[i][j], j) += dagg[j];
        break;
      case AggregatorKind::Attentional: break;
    }
  }
  if (is_pool(kind_)) {
    for (std::size_t idx = 0; idx < d_pooled.size(); ++idx) {
      const double p = c.pooled[idx];
      d_pooled[idx] *= p * (1.0 - p);
    }
    matmul_at_b_acc(c.in, d_pooled, w_pool.grad);
    for (std::size_t r = 0; r < d_pooled.rows(); ++r) {
      auto row = d_pooled.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) b_pool.grad[j] += row[j];
    }
    if (need_input_grad) {
      Tensor2 t = matmul_a_bt(d_pooled, w_pool.value);
      for (std::size_t i = 0; i < t.size(); ++i) d_in[i] += t[i];
    }
  }
  return d_in;
}

std::vector<double> SageLayer::aggregate(std::span<const double> self,
                                         const std::vector<std::vector<double>>& neighbors) const {
  if (self.size() != in_dim()) throw ShapeError("aggregate: self vector has wrong length");
  Tensor2 in(1 + neighbors.size(), in_dim());
  std::copy(self.begin(), self.end(), in.row(0).begin());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (neighbors[i].size() != in_dim()) throw ShapeError("aggregate: neighbour vector has wrong length");
    std::copy(neighbors[i].begin(), neighbors[i].end(), in.row(i + 1).begin());
    rows.push_back(i + 1);
  }
  Tensor2 pooled;
  Tensor2 proj;
  if (is_pool(kind_)) {
    pooled = matmul(in, w_pool.value);
    for (std::size_t r = 0; r < pooled.rows(); ++r) {
      auto row = pooled.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = sigmoid(row[j] + b_pool.value[j]);
    }
  } else if (kind_ == AggregatorKind::Attentional) {
    proj = matmul(in, w_neigh.value);
  }
  std::vector<double> out(agg_dim());
  aggregate_rows(in, pooled, proj, 0, rows, out, nullptr, nullptr, nullptr);
  return out;
}

std::vector<double> SageLayer::attention_weights(std::span<const double> self,
                                                 const std::vector<std::vector<double>>& neighbors) const {
  if (kind_ != AggregatorKind::Attentional) throw std::logic_error("attention_weights on non-attentional layer");
  Tensor2 in(1 + neighbors.size(), in_dim());
  std::copy(self.begin(), self.end(), in.row(0).begin());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    std::copy(neighbors[i].begin(), neighbors[i].end(), in.row(i + 1).begin());
    rows.push_back(i + 1);
  }
  const Tensor2 proj = matmul(in, w_neigh.value);
  std::vector<double> out(agg_dim());
  std::vector<double> alpha;
  aggregate_rows(in, Tensor2{}, proj, 0, rows, out, nullptr, &alpha, nullptr);
  return alpha;
}

SagePlan plan_batch(const SpatialGraph& g, std::span<const std::size_t> targets, const SampleBudget& budget,
                    Rng& rng) {
  SagePlan p;
  p.targets.assign(targets.begin(), targets.end());
  p.l2_neigh.reserve(targets.size());
  std::vector<bool> needed(g.n_nodes, false);
  for (std::size_t t : targets) {
    p.l2_neigh.push_back(sample_neighbors(g, t, budget.hop1(), rng));
    needed[t] = true;
    for (std::size_t u : p.l2_neigh.back()) needed[u] = true;
  }
  for (std::size_t v = 0; v < g.n_nodes; ++v) {
    if (!needed[v]) continue;
    p.l1_nodes.push_back(v);
    p.l1_neigh.push_back(sample_neighbors(g, v, budget.hop2(), rng));
  }
  return p;
}

SagePlan plan_single(const SpatialGraph& g, std::size_t node, const SampleBudget& budget, Rng& rng) {
  const NeighborhoodSample s = sample_neighborhood(g, node, budget, rng);
  auto own = sample_neighbors(g, node, budget.hop2(), rng);
  SagePlan p;
  p.targets = {node};
  p.l2_neigh = {s.hop1};
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> l1;
  l1.emplace_back(node, std::move(own));
  for (std::size_t i = 0; i < s.hop1.size(); ++i) l1.emplace_back(s.hop1[i], s.hop2[i]);
  std::sort(l1.begin(), l1.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [v, nb] : l1) {
    p.l1_nodes.push_back(v);
    p.l1_neigh.push_back(std::move(nb));
  }
  return p;
}

SageModel::SageModel(std::size_t input_dim, const SageConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  cfg.validate();
  layer1 = SageLayer("sage.l1", cfg.aggregator, input_dim, cfg.hidden[0], cfg.pool_dim, init_rng);
  layer2 = SageLayer("sage.l2", cfg.aggregator, cfg.hidden[0], cfg.hidden[1], cfg.pool_dim, init_rng);
  head = DenseLayer("sage.head", cfg.hidden[1], 1, init_rng);
}

ParamList SageModel::parameters() {
  ParamList out;
  layer1.collect(out);
  layer2.collect(out);
  head.collect(out);
  return out;
}

Tensor2 SageModel::forward(const Tensor2& node_feats, const SagePlan& plan, Mode mode, Rng& rng,
                           Cache* cache) const {
  const std::size_t n = node_feats.rows();
  const Tensor2 mask1 = dropout_mask(plan.l1_nodes.size(), layer1.out_dim(), cfg_.dropout, mode, rng);
  SageLayer::Cache* c1 = cache ? &cache->c1 : nullptr;
  SageLayer::Cache* c2 = cache ? &cache->c2 : nullptr;
  const Tensor2 h1 = layer1.forward(node_feats, plan.l1_nodes, plan.l1_neigh, mask1, c1);

  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> pos(n, npos);
  for (std::size_t i = 0; i < plan.l1_nodes.size(); ++i) pos[plan.l1_nodes[i]] = i;
  auto lookup = [&](std::size_t v) {
    if (v >= n || pos[v] == npos) throw std::logic_error("SagePlan: layer-2 node missing from layer 1");
    return pos[v];
  };
  std::vector<std::size_t> self2;
  std::vector<std::vector<std::size_t>> neigh2;
  self2.reserve(plan.targets.size());
  neigh2.reserve(plan.targets.size());
  for (std::size_t i = 0; i < plan.targets.size(); ++i) {
    self2.push_back(lookup(plan.targets[i]));
    std::vector<std::size_t> nb;
    nb.reserve(plan.l2_neigh[i].size());
    for (std::size_t v : plan.l2_neigh[i]) nb.push_back(lookup(v));
    neigh2.push_back(std::move(nb));
  }
  const Tensor2 mask2 = dropout_mask(plan.targets.size(), layer2.out_dim(), cfg_.dropout, mode, rng);
  Tensor2 h2 = layer2.forward(h1, self2, neigh2, mask2, c2);
  Tensor2 y = head.forward(h2);
  if (cache) {
    cache->plan = plan;
    cache->h2 = std::move(h2);
  }
  return y;
}

void SageModel::backward(const Cache& cache, const Tensor2& d_pred) {
  const Tensor2 dh2 = head.backward(cache.h2, d_pred);
  const Tensor2 dh1 = layer2.backward(cache.c2, dh2, true);
  layer1.backward(cache.c1, dh1, false);
}

double sage_forward(const SageModel& model, const SpatialGraph& g, const Tensor2& node_feats, std::size_t node,
                    Rng& rng, Mode mode) {
  if (node >= g.n_nodes || node_feats.rows() != g.n_nodes) {
    throw ShapeError("sage_forward: node index or feature rows do not match the graph");
  }
  const SagePlan plan = plan_single(g, node, model.config().budget, rng);
  return model.forward(node_feats, plan, mode, rng, nullptr)[0];
}

std::vector<TrainingRow> make_training_rows(const Dataset& ds, const SpatialGraph& g) {
  if (g.n_nodes != ds.n_sensors()) throw ShapeError("make_training_rows: graph and dataset disagree on node count");
  std::vector<TrainingRow> rows;
  for (std::size_t t = 1; t < ds.frames.size(); ++t) {
    const auto& f = ds.frames[t];
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      if (!f.present[s]) continue;
      auto r = f.features.row(s);
      rows.push_back({t, s, std::vector<double>(r.begin(), r.end()), f.target_no2[s]});
    }
  }
  return rows;
}

std::string to_string(const InitScheme& s) {
  switch (s.kind) {
    case InitKind::ActualFirst: return "actual";
    case InitKind::DatasetMean: return "mean";
    case InitKind::FixedEstimate: {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, s.value);
      return "fixed:" + std::string(buf, p);
    }
  }
  return "?";
}

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "actual") return InitScheme::actual_first();
  if (s == "mean") return InitScheme::dataset_mean();
  if (s.rfind("fixed:", 0) == 0) {
    const std::string num = s.substr(6);
    double v = 0.0;
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec == std::errc() && p == num.data() + num.size() && std::isfinite(v)) return InitScheme::fixed(v);
  }
  throw std::invalid_argument("init scheme must be actual, mean or fixed:<value>; got '" + s + "'");
}

ResolvedInit resolve_init(const Dataset& ds, std::size_t node, const InitScheme& init) {
  if (node >= ds.n_sensors()) throw std::out_of_range("rollout: unknown node index " + std::to_string(node));
  switch (init.kind) {
    case InitKind::FixedEstimate: return {init.value, 0};
    case InitKind::DatasetMean: return {ds.mean_no2(), 0};
    case InitKind::ActualFirst:
      for (std::size_t t = 0; t < ds.frames.size(); ++t) {
        if (ds.frames[t].present[node]) return {ds.frames[t].target_no2[node], t};
      }
      throw DataError("rollout: node " + ds.locations[node].id + " has no reading to initialise from");
  }
  throw std::logic_error("unreachable");
}

std::vector<double> rollout_series(const Dataset& ds, std::size_t node, const ResolvedInit& init,
                                   const FramePredictor& predict) {
  if (node >= ds.n_sensors()) throw std::out_of_range("rollout: unknown node index " + std::to_string(node));
  std::vector<double> out;
  if (init.start_frame + 1 >= ds.frames.size()) return out;
  out.reserve(ds.frames.size() - init.start_frame - 1);
  const std::size_t col = FeatureSchema::kPrevNo2;
  double prev = init.value;
  for (std::size_t t = init.start_frame + 1; t < ds.frames.size(); ++t) {
    Tensor2 x = ds.frames[t].features;
    x(node, col) = ds.stats ? ds.stats->apply(col, prev) : prev;
    const double y = predict(x, node);
    out.push_back(y);
    prev = y;
  }
  return out;
}

std::vector<double> rollout(const SageModel& model, const SpatialGraph& g, const Dataset& ds,
                            std::size_t target_node, const InitScheme& init, Rng& rng) {
  const ResolvedInit r = resolve_init(ds, target_node, init);
  return rollout_series(ds, target_node, r, [&](const Tensor2& x, std::size_t node) {
    return sage_forward(model, g, x, node, rng, Mode::Eval);
  });
}

}  // namespace vsensor
