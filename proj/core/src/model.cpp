#include "vsensor/model.hpp"

#include <stdexcept>

namespace vsensor {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Sage: return "sage";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Gbt: return "gbt";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::Sage, ModelKind::Mlp, ModelKind::Cnn, ModelKind::Gbt}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown model kind '" + s + "' (sage|mlp|cnn|gbt)");
}

nlohmann::json to_json(const ModelConfig& c) {
  using nlohmann::json;
  return json{
      {"kind", to_string(c.kind)},
      {"sage",
       {{"aggregator", to_string(c.sage.aggregator)},
        {"hidden", {c.sage.hidden[0], c.sage.hidden[1]}},
        {"pool_dim", c.sage.pool_dim},
        {"budget", {c.sage.budget.per_hop[0], c.sage.budget.per_hop[1]}},
        {"dropout", c.sage.dropout}}},
      {"mlp", {{"hidden", {c.mlp.hidden[0], c.mlp.hidden[1], c.mlp.hidden[2]}}, {"dropout", c.mlp.dropout}}},
      {"cnn",
       {{"channels", c.cnn.channels}, {"kernel", c.cnn.kernel}, {"hidden", c.cnn.hidden}, {"dropout", c.cnn.dropout}}},
      {"gbt",
       {{"n_trees", c.gbt.n_trees},
        {"max_depth", c.gbt.max_depth},
        {"learning_rate", c.gbt.learning_rate},
        {"min_samples_leaf", c.gbt.min_samples_leaf}}},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("sage")) {
    const auto& s = j.at("sage");
    c.sage.aggregator = aggregator_from_string(s.value("aggregator", to_string(c.sage.aggregator)));
    if (s.contains("hidden")) c.sage.hidden = {s["hidden"][0].get<std::size_t>(), s["hidden"][1].get<std::size_t>()};
    c.sage.pool_dim = s.value("pool_dim", c.sage.pool_dim);
    if (s.contains("budget")) {
      c.sage.budget.per_hop = {s["budget"][0].get<std::size_t>(), s["budget"][1].get<std::size_t>()};
    }
    c.sage.dropout = s.value("dropout", c.sage.dropout);
  }
  if (j.contains("mlp")) {
    const auto& m = j.at("mlp");
    if (m.contains("hidden")) {
      c.mlp.hidden = {m["hidden"][0].get<std::size_t>(), m["hidden"][1].get<std::size_t>(),
                      m["hidden"][2].get<std::size_t>()};
    }
    c.mlp.dropout = m.value("dropout", c.mlp.dropout);
  }
  if (j.contains("cnn")) {
    const auto& m = j.at("cnn");
    c.cnn.channels = m.value("channels", c.cnn.channels);
    c.cnn.kernel = m.value("kernel", c.cnn.kernel);
    c.cnn.hidden = m.value("hidden", c.cnn.hidden);
    c.cnn.dropout = m.value("dropout", c.cnn.dropout);
  }
  if (j.contains("gbt")) {
    const auto& m = j.at("gbt");
    c.gbt.n_trees = m.value("n_trees", c.gbt.n_trees);
    c.gbt.max_depth = m.value("max_depth", c.gbt.max_depth);
    c.gbt.learning_rate = m.value("learning_rate", c.gbt.learning_rate);
    c.gbt.min_samples_leaf = m.value("min_samples_leaf", c.gbt.min_samples_leaf);
  }
  return c;
}

Model Model::create(const ModelConfig& cfg, std::size_t input_dim, std::uint64_t seed) {
  Rng rng(seed);
  switch (cfg.kind) {
    case ModelKind::Sage: return Model(cfg, SageModel(input_dim, cfg.sage, rng));
    case ModelKind::Mlp: return Model(cfg, MlpModel(input_dim, cfg.mlp, rng));
    case ModelKind::Cnn: return Model(cfg, CnnModel(input_dim, cfg.cnn, rng));
    case ModelKind::Gbt: {
      GbtModel g;
      g.config = cfg.gbt;
      g.n_features = input_dim;
      return Model(cfg, std::move(g));
    }
  }
  throw std::logic_error("unreachable");
}

std::size_t Model::input_dim() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GbtModel>) {
          return m.n_features;
        } else {
          return m.input_dim();
        }
      },
      impl_);
}

namespace {
Tensor2 gather_rows(const Tensor2& x, std::span<const std::size_t> rows) {
  Tensor2 out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}
}  // namespace

Tensor2 Model::forward(const Tensor2& node_feats, std::span<const std::size_t> targets, const SpatialGraph& g,
                       Mode mode, Rng& rng, Cache* cache) const {
  switch (cfg_.kind) {
    case ModelKind::Sage: {
      const auto& m = std::get<SageModel>(impl_);
      const SagePlan plan = plan_batch(g, targets, m.config().budget, rng);
      if (!cache) return m.forward(node_feats, plan, mode, rng, nullptr);
      auto& c = cache->emplace<SageModel::Cache>();
      return m.forward(node_feats, plan, mode, rng, &c);
    }
    case ModelKind::Mlp: {
      const auto& m = std::get<MlpModel>(impl_);
      const Tensor2 x = gather_rows(node_feats, targets);
      if (!cache) return m.forward(x, mode, rng, nullptr);
      return m.forward(x, mode, rng, &cache->emplace<MlpModel::Cache>());
    }
    case ModelKind::Cnn: {
      const auto& m = std::get<CnnModel>(impl_);
      const Tensor2 x = gather_rows(node_feats, targets);
      if (!cache) return m.forward(x, mode, rng, nullptr);
      return m.forward(x, mode, rng, &cache->emplace<CnnModel::Cache>());
    }
    case ModelKind::Gbt: {
      const auto& m = std::get<GbtModel>(impl_);
      Tensor2 y(targets.size(), 1);
      for (std::size_t i = 0; i < targets.size(); ++i) y[i] = m.predict(node_feats.row(targets[i]));
      return y;
    }
  }
  throw std::logic_error("unreachable");
}

void Model::backward(const Cache& cache, const Tensor2& d_pred) {
  switch (cfg_.kind) {
    case ModelKind::Sage: std::get<SageModel>(impl_).backward(std::get<SageModel::Cache>(cache), d_pred); return;
    case ModelKind::Mlp: std::get<MlpModel>(impl_).backward(std::get<MlpModel::Cache>(cache), d_pred); return;
    case ModelKind::Cnn: std::get<CnnModel>(impl_).backward(std::get<CnnModel::Cache>(cache), d_pred); return;
    case ModelKind::Gbt: throw std::logic_error("gradient-boosted trees have no backward pass");
  }
}

double Model::predict_one(const Tensor2& node_feats, std::size_t node, const SpatialGraph& g, Rng& rng) const {
  if (cfg_.kind == ModelKind::Sage) return sage_forward(std::get<SageModel>(impl_), g, node_feats, node, rng, Mode::Eval);
  const std::size_t t[1] = {node};
  return forward(node_feats, t, g, Mode::Eval, rng, nullptr)[0];
}

ParamList Model::parameters() {
  return std::visit(
      [](auto& m) -> ParamList {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GbtModel>) {
          return {};
        } else {
          return m.parameters();
        }
      },
      impl_);
}

void Model::set_output_bias(double b) {
  switch (cfg_.kind) {
    case ModelKind::Sage: std::get<SageModel>(impl_).head.b.value[0] = b; return;
    case ModelKind::Mlp: std::get<MlpModel>(impl_).l4.b.value[0] = b; return;
    case ModelKind::Cnn: std::get<CnnModel>(impl_).fc2.b.value[0] = b; return;
    case ModelKind::Gbt: return;
  }
}

}  // namespace vsensor
