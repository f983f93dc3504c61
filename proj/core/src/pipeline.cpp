#include "vsensor/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace vsensor {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("TrainConfig: lr must be a nonnegative number");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("TrainConfig: val_fraction in [0, 1)");
  if (knn_k < 1) throw std::invalid_argument("TrainConfig: knn_k must be >= 1");
}

void TransferConfig::validate() const {
  source.validate();
  if (!(finetune_lr >= 0.0)) throw std::invalid_argument("TransferConfig: finetune_lr must be nonnegative");
  if (finetune_lr > source.lr) throw std::invalid_argument("TransferConfig: fine-tune lr must not exceed pretrain lr");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"model", to_json(c.model)}, {"epochs", c.epochs},   {"lr", c.lr},
          {"patience", c.patience},    {"val_fraction", c.val_fraction}, {"seed", c.seed},
          {"frozen", c.frozen},        {"knn_k", c.knn_k}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.patience = j.value("patience", c.patience);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.seed = j.value("seed", c.seed);
  c.frozen = j.value("frozen", c.frozen);
  c.knn_k = j.value("knn_k", c.knn_k);
  return c;
}

nlohmann::json to_json(const TransferConfig& c) {
  return {{"source", to_json(c.source)},
          {"finetune_epochs", c.finetune_epochs},
          {"finetune_lr", c.finetune_lr},
          {"frozen", c.frozen},
          {"use_source_stats", c.use_source_stats}};
}

TransferConfig transfer_config_from_json(const nlohmann::json& j) {
  TransferConfig c;
  if (j.contains("source")) c.source = train_config_from_json(j.at("source"));
  c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
  c.finetune_lr = j.value("finetune_lr", c.finetune_lr);
  c.frozen = j.value("frozen", c.frozen);
  c.use_source_stats = j.value("use_source_stats", c.use_source_stats);
  return c;
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(fold) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset prepare(const Dataset& raw) { return standardize(fill_prev_no2(raw)).first; }

Dataset prepare_with_stats(const Dataset& raw, const StandardizationStats& stats) {
  return apply_stats(fill_prev_no2(raw), stats);
}

namespace {

struct Batch {
  std::size_t frame;
  std::vector<std::size_t> nodes;
  Tensor2 y;
};

std::vector<Batch> collect_batches(const Dataset& ds, TargetAccessObserver* observer) {
  std::vector<Batch> out;
  for (std::size_t t = 1; t < ds.frames.size(); ++t) {
    const auto& f = ds.frames[t];
    Batch b{t, {}, {}};
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      if (f.present[s]) b.nodes.push_back(s);
    }
    if (b.nodes.empty()) continue;
    b.y = Tensor2(b.nodes.size(), 1);
    for (std::size_t i = 0; i < b.nodes.size(); ++i) {
      if (observer) observer->on_read(AccessPhase::Training, t, b.nodes[i]);
      b.y[i] = f.target_no2[b.nodes[i]];
    }
    out.push_back(std::move(b));
  }
  return out;
}

double batches_mse(const Model& model, const Dataset& ds, const SpatialGraph& g, std::span<const Batch> batches,
                   std::uint64_t seed) {
  Rng rng(seed);
  double sse = 0.0;
  std::size_t n = 0;
  for (const auto& b : batches) {
    const Tensor2 pred = model.forward(ds.frames[b.frame].features, b.nodes, g, Mode::Eval, rng, nullptr);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - b.y[i];
      sse += d * d;
    }
    n += pred.size();
  }
  return n == 0 ? 0.0 : sse / static_cast<double>(n);
}

void check_inputs(const Dataset& ds, const SpatialGraph& g) {
  if (!ds.stats) throw DataError("training expects a standardized dataset (see prepare())");
  if (g.n_nodes != ds.n_sensors()) throw ShapeError("graph and dataset disagree on node count");
}

}  // namespace

double evaluate_mse(const Model& model, const Dataset& ds, const SpatialGraph& g,
                    const std::vector<std::size_t>& frames) {
  check_inputs(ds, g);
  auto batches = collect_batches(ds, nullptr);
  if (!frames.empty()) {
    std::erase_if(batches, [&](const Batch& b) {
      return std::find(frames.begin(), frames.end(), b.frame) == frames.end();
    });
  }
  return batches_mse(model, ds, g, batches, 0x7a11ULL);
}

TrainResult train(const Dataset& ds, const SpatialGraph& g, const TrainConfig& cfg, const Model* init,
                  TargetAccessObserver* observer) {
  cfg.validate();
  check_inputs(ds, g);
  const std::vector<Batch> batches = collect_batches(ds, observer);
  std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(batches.size())));
  if (n_val >= batches.size()) n_val = 0;
  const std::span<const Batch> train_b(batches.data(), batches.size() - n_val);
  const std::span<const Batch> val_b(batches.data() + train_b.size(), n_val);
  if (train_b.empty()) throw TrainingError("no training rows: every sensor is absent after the first frame");

  TrainResult result;
  if (init) {
    if (init->input_dim() != ds.schema.size()) throw ShapeError("initial model does not match the feature width");
    result.model = *init;
  } else {
    result.model = Model::create(cfg.model, ds.schema.size(), fold_seed(cfg.seed, 0x1000));
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& b : train_b) {
      for (std::size_t i = 0; i < b.y.size(); ++i) sum += b.y[i];
      n += b.y.size();
    }
    result.model.set_output_bias(sum / static_cast<double>(n));
  }
  Model& model = result.model;
  TrainHistory& hist = result.history;

  if (!model.is_neural()) {
    std::size_t rows = 0;
    for (const auto& b : batches) rows += b.nodes.size();
    Tensor2 x(rows, ds.schema.size());
    std::vector<double> y;
    y.reserve(rows);
    std::size_t r = 0;
    for (const auto& b : batches) {
      for (std::size_t i = 0; i < b.nodes.size(); ++i, ++r) {
        auto src = ds.frames[b.frame].features.row(b.nodes[i]);
        std::copy(src.begin(), src.end(), x.row(r).begin());
        y.push_back(b.y[i]);
      }
    }
    GbtModel fitted = gbt_fit(x, y, cfg.model.gbt);
    hist.train_loss = fitted.train_mse;
    hist.epochs_run = 1;
    std::get<GbtModel>(model.impl()) = std::move(fitted);
    return result;
  }

  Rng rng(fold_seed(cfg.seed, 0x2000));
  Adam adam(AdamConfig{cfg.lr});
  adam.set_frozen_prefixes(cfg.frozen);
  const ParamList params = model.parameters();

  std::vector<std::size_t> order(train_b.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Model best = model;
  double best_val = std::numeric_limits<double>::infinity();
  // Fine-tuning keeps the starting weights unless an epoch beats them.
  if (init && !val_b.empty()) best_val = batches_mse(model, ds, g, val_b, fold_seed(cfg.seed, 0x3000));
  std::size_t wait = 0;
  Model::Cache cache;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Batch& b = train_b[idx];
      zero_grads(params);
      const Tensor2 pred = model.forward(ds.frames[b.frame].features, b.nodes, g, Mode::Train, rng, &cache);
      const LossWithGrad l = mse_loss(pred, b.y);
      if (!std::isfinite(l.loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", frame " +
                            format_utc_hour(ds.frames[b.frame].timestamp));
      }
      model.backward(cache, l.grad);
      adam.step(params);
      loss_sum += l.loss;
    }
    hist.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    hist.epochs_run = epoch + 1;
    if (val_b.empty()) {
      best = model;
      hist.best_epoch = epoch;
      continue;
    }
    const double v = batches_mse(model, ds, g, val_b, fold_seed(cfg.seed, 0x3000));
    if (!std::isfinite(v)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    hist.val_loss.push_back(v);
    if (v < best_val) {
      best_val = v;
      best = model;
      hist.best_epoch = epoch;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

TrainResult finetune(const Model& pretrained, const Dataset& target, const SpatialGraph& g, const TransferConfig& cfg,
                     TargetAccessObserver* observer) {
  cfg.validate();
  if (cfg.finetune_epochs == 0) return {pretrained, {}};
  if (!pretrained.is_neural()) throw std::invalid_argument("fine-tuning requires a neural model");
  TrainConfig tc = cfg.source;
  tc.model = pretrained.config();
  tc.epochs = cfg.finetune_epochs;
  tc.lr = cfg.finetune_lr;
  tc.frozen = cfg.frozen;
  return train(target, g, tc, &pretrained, observer);
}

TransferResult transfer(const Dataset& source, const Dataset& target, const SpatialGraph& source_graph,
                        const SpatialGraph& target_graph, const TransferConfig& cfg) {
  cfg.validate();
  if (!(source.schema == target.schema)) throw DataError("transfer: source and target feature schemas differ");
  TrainResult pre = train(source, source_graph, cfg.source);
  TrainResult ft = finetune(pre.model, target, target_graph, cfg);
  return {std::move(pre.model), std::move(ft.model), std::move(pre.history), std::move(ft.history)};
}

FoldResult run_fold(const Dataset& raw, const SpatialGraph& g, const EvalConfig& cfg, std::size_t heldout,
                    TargetAccessObserver* observer) {
  if (heldout >= raw.n_sensors()) throw std::out_of_range("run_fold: bad held-out index");
  if (raw.stats) throw DataError("leave_one_out expects the raw (unstandardized) dataset");
  FoldResult r;
  r.heldout = heldout;
  const std::string& id = raw.locations[heldout].id;
  if (raw.present_count(heldout) == 0) {
    r.warning = "location " + id + " has no readings; skipped";
    return r;
  }

  const Dataset fold_raw = mask_sensor(raw, heldout);
  const Dataset fold = cfg.fixed_stats ? prepare_with_stats(fold_raw, *cfg.fixed_stats) : prepare(fold_raw);
  r.stats = *fold.stats;

  TrainConfig tc = cfg.train;
  tc.seed = fold_seed(cfg.train.seed, heldout);
  if (cfg.pretrained) {
    TransferConfig ft = cfg.finetune;
    ft.source = tc;
    r.model = finetune(*cfg.pretrained, fold, g, ft, observer).model;
  } else {
    r.model = train(fold, g, tc, nullptr, observer).model;
  }

  ResolvedInit init{0.0, 0};
  switch (cfg.init.kind) {
    case InitKind::FixedEstimate: init = {cfg.init.value, 0}; break;
    case InitKind::DatasetMean: init = {fold.mean_no2(), 0}; break;
    case InitKind::ActualFirst:
      for (std::size_t t = 0; t < raw.frames.size(); ++t) {
        if (raw.frames[t].present[heldout]) {
          if (observer) observer->on_read(AccessPhase::Init, t, heldout);
          init = {raw.frames[t].target_no2[heldout], t};
          break;
        }
      }
      break;
  }
  r.start_frame = init.start_frame;

  Rng rng(fold_seed(tc.seed, 0x4000));
  std::vector<double> pred = rollout_series(fold, heldout, init, [&](const Tensor2& x, std::size_t node) {
    return r.model.predict_one(x, node, g, rng);
  });
  for (double& p : pred) p = std::max(p, 0.0);
  r.predictions = pred;

  std::vector<double> p_obs, a_obs, dp, da;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t t = init.start_frame + 1 + i;
    if (!raw.frames[t].present[heldout]) continue;
    if (observer) observer->on_read(AccessPhase::Metric, t, heldout);
    const double a = raw.frames[t].target_no2[heldout];
    p_obs.push_back(pred[i]);
    a_obs.push_back(a);
    if (i + 1 < pred.size() && raw.frames[t + 1].present[heldout]) {
      if (observer) observer->on_read(AccessPhase::Metric, t + 1, heldout);
      dp.push_back(pred[i + 1] - pred[i]);
      da.push_back(raw.frames[t + 1].target_no2[heldout] - a);
    }
  }
  if (p_obs.empty() || dp.empty()) {
    r.warning = "location " + id + " has too few readings after the initial frame; skipped";
    return r;
  }
  try {
    LocationMetrics m{id, p_obs.size(), {rmse(p_obs, a_obs), nrmse(p_obs, a_obs), rmse(dp, da)}};
    r.metrics = m;
  } catch (const MetricError& e) {
    r.warning = "location " + id + ": " + e.what() + "; skipped";
  }
  return r;
}

namespace {
class LockedObserver : public TargetAccessObserver {
 public:
  explicit LockedObserver(TargetAccessObserver* inner) : inner_(inner) {}
  void on_read(AccessPhase phase, std::size_t frame, std::size_t sensor) override {
    std::lock_guard lock(mu_);
    inner_->on_read(phase, frame, sensor);
  }

 private:
  TargetAccessObserver* inner_;
  std::mutex mu_;
};
}  // namespace

EvalReport leave_one_out(const Dataset& raw, const SpatialGraph& g, const EvalConfig& cfg,
                         TargetAccessObserver* observer) {
  const std::size_t n = raw.n_sensors();
  if (n < 2) throw std::invalid_argument("leave_one_out: need at least 2 locations");
  if (g.n_nodes != n) throw ShapeError("leave_one_out: graph and dataset disagree on node count");

  std::vector<std::optional<FoldResult>> folds(n);
  std::vector<std::exception_ptr> errors(n);
  const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, n);
  if (threads == 1) {
    for (std::size_t l = 0; l < n; ++l) folds[l] = run_fold(raw, g, cfg, l, observer);
  } else {
    LockedObserver locked(observer);
    TargetAccessObserver* obs = observer ? &locked : nullptr;
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t l = next++; l < n; l = next++) {
          try {
            folds[l] = run_fold(raw, g, cfg, l, obs);
          } catch (...) {
            errors[l] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalReport report;
  report.model = to_string(cfg.train.model.kind) + (cfg.pretrained ? "-transfer" : "");
  // Folds are merged in ascending location-id order.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return raw.locations[a].id < raw.locations[b].id; });
  for (std::size_t l : order) {
    const auto& f = *folds[l];
    if (f.metrics) report.locations.push_back(*f.metrics);
    if (f.warning) report.warnings.push_back(*f.warning);
  }
  report.recompute_average();

  const nlohmann::json train_json = to_json(cfg.train);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(train_json.dump())));
  report.metadata = {{"model_kind", to_string(cfg.train.model.kind)},
                     {"seed", cfg.train.seed},
                     {"fold_seeds", nlohmann::json::array()},
                     {"config_hash", hash},
                     {"transferred", cfg.pretrained.has_value()},
                     {"init", to_string(cfg.init)},
                     {"folds", n}};
  for (std::size_t l : order) report.metadata["fold_seeds"].push_back(fold_seed(cfg.train.seed, l));
  if (cfg.pretrained) report.metadata["finetune"] = to_json(cfg.finetune);
  return report;
}

}  // namespace vsensor
