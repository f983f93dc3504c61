// Acceptance runner: one PASS/FAIL line per criterion, exit code 1 if any fail.
// Optional argv: criterion numbers to run (default all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "vsensor/baselines.hpp"
#include "vsensor/geograph.hpp"
#include "vsensor/metrics.hpp"
#include "vsensor/pipeline.hpp"
#include "vsensor/sage.hpp"
#include "vsensor/synthgen.hpp"

using namespace vsensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += why;
    }
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor2 random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n01;
  Tensor2 t(r, c);
  for (double& x : t.values()) x = n01(rng);
  return t;
}

void jitter_biases(const ParamList& params, Rng& rng) {
  std::normal_distribution<double> n(0.2, 0.1);
  for (auto* p : params) {
    if (p->value.rows() == 1) {
      for (double& v : p->value.values()) v = n(rng);
    }
  }
}

SpatialGraph ring_with_chord() {
  SpatialGraph g = SpatialGraph::empty(5);
  for (auto [a, b] : std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {0, 2}}) {
    g.adjacency[a].push_back(b);
    g.adjacency[b].push_back(a);
    g.edge_lengths[a].push_back(1.0);
    g.edge_lengths[b].push_back(1.0);
  }
  for (auto& a : g.adjacency) std::sort(a.begin(), a.end());
  return g;
}

// ---------------------------------------------------------------------------

Outcome c1_improvement_oracle() {
  Outcome o;
  EvalReport base, next;
  base.model = "sage";
  next.model = "sage-transfer";
  base.locations = {{"bristol", 1, {17.016, 0.526, 9.426}}};
  next.locations = {{"bristol", 1, {15.623, 0.481, 6.354}}};
  base.recompute_average();
  next.recompute_average();
  const ImprovementTable t = compare_reports(base, next);
  const double want[3] = {8.185, 8.576, 32.593};
  const double got[3] = {t.percent.rmse, t.percent.nrmse, t.percent.grad_rmse};
  for (int i = 0; i < 3; ++i) o.require(std::abs(got[i] - want[i]) <= 0.05, fmt("column %d: %.3f vs %.3f", i, got[i], want[i]));
  o.detail = fmt("%.3f / %.3f / %.3f", got[0], got[1], got[2]) + (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

Outcome c2_normaliser_consistency() {
  Outcome o;
  struct Row {
    const char* name;
    double rmse, nrmse;
  };
  const Row rows[] = {{"MLP", 27.482, 0.876},         {"XGBoost", 22.773, 0.721},
                      {"CNN", 21.133, 0.672},         {"Transferred CNN", 18.362, 0.583},
                      {"GraphSAGE", 17.016, 0.526},   {"Transferred GraphSAGE", 15.623, 0.481}};
  std::string report;
  for (const auto& r : rows) {
    const double implied = r.rmse / r.nrmse;
    report += fmt("%s%s=%.2f", report.empty() ? "" : ", ", r.name, implied);
    o.require(implied >= 31.0 && implied <= 33.0, fmt("%s implied mean %.2f outside [31, 33]", r.name, implied));
  }
  o.detail = "implied location means: " + report + (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

Outcome c3_gradients() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t checks = 0;
  auto record = [&](const std::string& arch, std::uint64_t seed, const GradCheckResult& r) {
    ++checks;
    worst = std::max(worst, r.max_rel_error);
    o.require(r.max_rel_error < 1e-4,
              fmt("%s seed %llu: %.2e at %s[%zu]", arch.c_str(), static_cast<unsigned long long>(seed),
                  r.max_rel_error, r.worst_param.c_str(), r.worst_index));
  };
  const SpatialGraph g = ring_with_chord();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (AggregatorKind k : kAllAggregators) {
      SageConfig cfg;
      cfg.aggregator = k;
      cfg.hidden = {6, 6};
      cfg.pool_dim = 5;
      cfg.budget = SampleBudget{{16, 16}};
      Rng rng(seed * 101 + 1);
      SageModel m(4, cfg, rng);
      jitter_biases(m.parameters(), rng);
      const Tensor2 x = random_matrix(5, 4, rng), y = random_matrix(3, 1, rng);
      const std::vector<std::size_t> targets{0, 2, 4};
      const SagePlan plan = plan_batch(g, targets, cfg.budget, rng);
      auto loss = [&](bool with_grad) {
        Rng drop(seed + 77);
        SageModel::Cache cache;
        const auto r = mse_loss(m.forward(x, plan, Mode::Train, drop, &cache), y);
        if (with_grad) m.backward(cache, r.grad);
        return r.loss;
      };
      record("sage-" + to_string(k), seed, grad_check(loss, m.parameters(), 1e-5));
    }
    {
      Rng rng(seed * 101 + 2);
      MlpModel m(6, MlpConfig{{8, 7, 5}, 0.5}, rng);
      jitter_biases(m.parameters(), rng);
      const Tensor2 x = random_matrix(4, 6, rng), y = random_matrix(4, 1, rng);
      auto loss = [&](bool with_grad) {
        Rng drop(seed + 78);
        MlpModel::Cache cache;
        const auto r = mse_loss(m.forward(x, Mode::Train, drop, &cache), y);
        if (with_grad) m.backward(cache, r.grad);
        return r.loss;
      };
      record("mlp", seed, grad_check(loss, m.parameters(), 1e-5));
    }
    {
      Rng rng(seed * 101 + 3);
      CnnModel m(7, CnnConfig{3, 3, 6, 0.5}, rng);
      jitter_biases(m.parameters(), rng);
      const Tensor2 x = random_matrix(4, 7, rng), y = random_matrix(4, 1, rng);
      auto loss = [&](bool with_grad) {
        Rng drop(seed + 79);
        CnnModel::Cache cache;
        const auto r = mse_loss(m.forward(x, Mode::Train, drop, &cache), y);
        if (with_grad) m.backward(cache, r.grad);
        return r.loss;
      };
      record("cnn", seed, grad_check(loss, m.parameters(), 1e-5));
    }
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(sec < 30.0, fmt("took %.1fs", sec));
  o.detail = fmt("%zu checks over 5 seeds, worst rel error %.2e, %.1fs", checks, worst, sec) +
             (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

Outcome c4_aggregators() {
  Outcome o;
  Rng rng(4);
  std::normal_distribution<double> n01;
  auto vec = [&](std::size_t d) {
    std::vector<double> v(d);
    for (double& x : v) x = n01(rng);
    return v;
  };
  std::size_t orderings = 0;
  double worst_sum = 0;
  for (AggregatorKind k : kAllAggregators) {
    SageLayer layer("sage.l1", k, 4, 5, 6, rng);
    for (std::size_t n = 1; n <= 5; ++n) {
      const auto self = vec(4);
      std::vector<std::vector<double>> neigh;
      for (std::size_t i = 0; i < n; ++i) neigh.push_back(vec(4));
      const auto ref = layer.aggregate(self, neigh);
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      double dev = 0;
      do {
        std::vector<std::vector<double>> p;
        for (std::size_t i : idx) p.push_back(neigh[i]);
        const auto out = layer.aggregate(self, p);
        for (std::size_t j = 0; j < out.size(); ++j) dev = std::max(dev, std::abs(out[j] - ref[j]));
        ++orderings;
      } while (std::next_permutation(idx.begin(), idx.end()));
      o.require(dev <= 1e-12, fmt("%s with %zu neighbours deviates by %.2e", to_string(k).c_str(), n, dev));
      if (k == AggregatorKind::Attentional) {
        const auto w = layer.attention_weights(self, neigh);
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        o.require(std::abs(s - 1.0) <= 1e-12, fmt("attention weights sum to %.15f", s));
      }
    }
    const auto empty = layer.aggregate(vec(4), {});
    o.require(empty.size() == layer.agg_dim() &&
                  std::all_of(empty.begin(), empty.end(), [](double v) { return v == 0.0; }),
              to_string(k) + " empty neighbourhood is not the zero vector");
  }
  o.detail = fmt("%zu orderings across 4 aggregators, |sum(attention)-1| <= %.1e, empty -> zeros", orderings, worst_sum) +
             (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

struct AccessLog : TargetAccessObserver {
  std::vector<std::tuple<AccessPhase, std::size_t, std::size_t>> reads;
  void on_read(AccessPhase p, std::size_t f, std::size_t s) override { reads.emplace_back(p, f, s); }
};

Outcome c5_hygiene() {
  Outcome o;
  CityConfig c;
  c.n_sensors = 5;
  c.n_hours = 200;
  c.seed = 5;
  const Dataset raw = generate_city(c);
  const SpatialGraph g = build_knn_graph(raw.locations, 3);
  std::size_t train_reads = 0, init_reads = 0, metric_reads = 0;
  for (ModelKind kind : {ModelKind::Sage, ModelKind::Mlp, ModelKind::Cnn, ModelKind::Gbt}) {
    EvalConfig ec;
    ec.train.model.kind = kind;
    ec.train.epochs = 2;
    ec.train.model.gbt.n_trees = 10;
    for (std::size_t l = 0; l < raw.n_sensors(); ++l) {
      AccessLog log;
      const FoldResult f = run_fold(raw, g, ec, l, &log);
      std::size_t held_train = 0, held_init = 0;
      for (auto [phase, frame, s] : log.reads) {
        switch (phase) {
          case AccessPhase::Training:
            ++train_reads;
            held_train += s == l;
            break;
          case AccessPhase::Init:
            ++init_reads;
            held_init += s == l;
            o.require(s == l, "init read another sensor");
            break;
          case AccessPhase::Metric:
            ++metric_reads;
            o.require(s == l && frame > f.start_frame, "metric read outside the held-out series");
            break;
        }
      }
      o.require(held_train == 0, fmt("%s fold %zu: %zu training reads of the held-out sensor",
                                     to_string(kind).c_str(), l, held_train));
      o.require(held_init <= 1, "more than one init read");
    }
  }
  o.require(train_reads > 0, "observer saw no training reads");
  o.detail = fmt("4 models x 5 folds: %zu training reads (0 held-out), %zu init, %zu metric", train_reads, init_reads,
                 metric_reads) +
             (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

Outcome c6_ordering() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double sage_sum = 0, mlp_sum = 0;
  std::string per_seed;
  std::size_t seeds = 0;
  auto run_seed = [&](std::uint64_t seed) {
    CityConfig c;
    c.seed = seed;
    c.n_hours = 4000;
    const Dataset ds = generate_city(c);
    const SpatialGraph g = build_knn_graph(ds.locations, 3);
    double r[2];
    int i = 0;
    for (ModelKind kind : {ModelKind::Sage, ModelKind::Mlp}) {
      EvalConfig ec;
      ec.train.model.kind = kind;
      ec.train.epochs = 5;
      ec.train.seed = seed;
      r[i++] = leave_one_out(ds, g, ec).average.nrmse;
    }
    sage_sum += r[0];
    mlp_sum += r[1];
    ++seeds;
    per_seed += fmt("%sseed %llu: sage %.4f mlp %.4f", per_seed.empty() ? "" : "; ", static_cast<unsigned long long>(seed),
                    r[0], r[1]);
  };
  for (std::uint64_t s = 0; s < 3; ++s) run_seed(s);
  if (std::abs(sage_sum - mlp_sum) / seeds < 1e-3) run_seed(3);
  const double sage = sage_sum / seeds, mlp = mlp_sum / seeds;
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(sage < mlp, "GraphSAGE not below MLP");
  o.detail = fmt("mean NRMSE sage %.4f < mlp %.4f over %zu seeds, %.0fs [", sage, mlp, seeds, sec) + per_seed + "]" +
             (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

Outcome c7_transfer() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double tn = 0, sn = 0, tg = 0, sg = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Dataset src = prepare(generate_city(source_city_preset(seed, 4000)));
    CityConfig tc;
    tc.seed = seed + 100;
    tc.n_hours = 4000;
    const Dataset target = slice_frames(generate_city(tc), 0, 400);  // 10% of frames
    const SpatialGraph gs = build_knn_graph(src.locations, 3);
    const SpatialGraph gt = build_knn_graph(target.locations, 3);

    TrainConfig pre_cfg;
    pre_cfg.epochs = 15;
    pre_cfg.seed = seed;
    const TrainResult pre = train(src, gs, pre_cfg);

    EvalConfig scratch;
    scratch.train = pre_cfg;
    scratch.train.epochs = 50;
    EvalConfig transfer = scratch;
    transfer.pretrained = pre.model;
    transfer.finetune.source = pre_cfg;
    transfer.finetune.finetune_epochs = 20;
    transfer.finetune.finetune_lr = 1e-4;

    const EvalReport rs = leave_one_out(target, gt, scratch);
    const EvalReport rt = leave_one_out(target, gt, transfer);
    sn += rs.average.nrmse;
    sg += rs.average.grad_rmse;
    tn += rt.average.nrmse;
    tg += rt.average.grad_rmse;
    per_seed += fmt("%sseed %llu: nrmse %.4f vs %.4f, grad %.3f vs %.3f", per_seed.empty() ? "" : "; ",
                    static_cast<unsigned long long>(seed), rt.average.nrmse, rs.average.nrmse, rt.average.grad_rmse,
                    rs.average.grad_rmse);
  }
  tn /= 3, sn /= 3, tg /= 3, sg /= 3;
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(tn < sn, "transfer NRMSE not below scratch");
  o.require(tg < sg, "transfer Grad-RMSE not below scratch");
  o.detail = fmt("transfer vs scratch: NRMSE %.4f < %.4f, Grad-RMSE %.3f < %.3f, %.0fs [", tn, sn, tg, sg, sec) +
             per_seed + "]" + (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

Outcome c8_autocorrelation() {
  Outcome o;
  double lo = 1, hi = -1;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CityConfig c;
    c.seed = seed;
    c.n_hours = 5000;
    const Dataset ds = generate_city(c);
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      std::vector<double> y;
      for (const auto& f : ds.frames) y.push_back(f.target_no2[s]);
      const double r = lag_autocorr(y, 1);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      o.require(r >= 0.85 && r <= 0.98, fmt("seed %llu sensor %zu: %.3f", static_cast<unsigned long long>(seed), s, r));
    }
  }
  o.detail = fmt("lag-1 range [%.3f, %.3f] over 3 seeds x 8 sensors x 5000 h", lo, hi) +
             (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

Outcome c9_metric_examples() {
  Outcome o;
  using V = std::vector<double>;
  auto near = [&](double got, double want, double tol, const char* what) {
    o.require(std::abs(got - want) <= tol, fmt("%s: %.9g vs %.9g", what, got, want));
  };
  std::size_t n = 0;
  auto ex = [&](double got, double want, double tol, const char* what) {
    ++n;
    near(got, want, tol, what);
  };
  auto throws = [&](auto f, const char* what) {
    ++n;
    try {
      f();
      o.require(false, std::string(what) + " did not throw");
    } catch (const std::exception&) {
    }
  };
  ex(rmse(V{4, 5, 6}, V{4, 5, 6}), 0, 0, "rmse identical");
  ex(rmse(V{2, 2}, V{0, 2}), std::sqrt(2.0), 1e-12, "rmse [2,2]/[0,2]");
  ex(rmse(V{3.5, 5.5, 1.5}, V{1, 3, -1}), 2.5, 1e-12, "rmse offset");
  throws([] { rmse(V{}, V{}); }, "rmse empty");
  ex(nrmse(V{5, 6}, V{5, 6}), 0, 0, "nrmse identical");
  ex(17.016 / 32.35, 0.526, 5e-4, "nrmse GraphSAGE normaliser");
  ex(nrmse(V{20, 60, 50}, V{24, 56, 40}), nrmse(V{10, 30, 25}, V{12, 28, 20}), 1e-15, "nrmse scale invariance");
  throws([] { nrmse(V{1, 1}, V{0, 0}); }, "nrmse zero mean");
  ex(grad_rmse(V{3, 4, 8}, V{1, 2, 6}), 0, 1e-12, "grad_rmse offset");
  ex(grad_rmse(V{0, 2, 0}, V{0, 0, 0}), 2, 1e-12, "grad_rmse [0,2,0]");
  ex(grad_rmse(V{3, 3, 3}, V{7, 7, 7}), 0, 0, "grad_rmse constants");
  throws([] { grad_rmse(V{1}, V{1}); }, "grad_rmse length 1");
  ex(improvement(17.016, 15.623), 8.19, 0.05, "improvement rmse");
  ex(improvement(9.426, 6.354), 32.59, 0.05, "improvement grad");
  ex(improvement(3.3, 3.3), 0, 0, "improvement equal");
  throws([] { improvement(0.0, 1.0); }, "improvement base 0");
  ex(haversine({51.45, -2.6}, {51.45, -2.6}), 0, 0, "haversine coincident");
  ex(haversine({0, 0}, {0, 180}), M_PI * 6371000.0, 1e-3, "haversine antipodal");
  ex(haversine({51.4545, -2.5879}, {51.5072, -0.1276}), 170500, 500, "haversine Bristol-London");

  auto column = [](std::initializer_list<double> vals) {
    Dataset ds;
    ds.locations.push_back({"A", 51.45, -2.6, 10});
    const UtcHour t0 = make_utc_hour(2019, 1, 7, 0);
    std::size_t t = 0;
    for (double v : vals) {
      HourlyFrame f = make_empty_frame(ds.locations, t0 + static_cast<std::int64_t>(t++));
      f.features(0, 3) = v;
      f.target_no2[0] = 1.0;
      f.present[0] = true;
      ds.frames.push_back(std::move(f));
    }
    return fill_prev_no2(ds);
  };
  {
    const auto [sd, st] = standardize(column({2, 4, 6}));
    ex(sd.frames[0].features(0, 3), -1.2247, 1e-4, "standardize [2,4,6][0]");
    ex(sd.frames[1].features(0, 3), 0, 1e-12, "standardize [2,4,6][1]");
    ex(sd.frames[2].features(0, 3), 1.2247, 1e-4, "standardize [2,4,6][2]");
  }
  {
    const auto [sd, st] = standardize(column({5, 5, 5}));
    ex(sd.frames[1].features(0, 3), 0, 0, "standardize constant value");
    ex(st.std[3], 1, 0, "standardize constant std");
  }
  {
    CityConfig ca, cb;
    ca.n_sensors = 4, ca.n_hours = 100, ca.seed = 1;
    cb.n_sensors = 5, cb.n_hours = 120, cb.seed = 2;
    const Dataset a = fill_prev_no2(generate_city(ca)), b = fill_prev_no2(generate_city(cb));
    const Dataset back = inverse_standardize(apply_stats(b, compute_stats(a)));
    double worst = 0;
    for (std::size_t t = 0; t < b.n_frames(); ++t) {
      for (std::size_t i = 0; i < b.frames[t].features.size(); ++i) {
        const double x = b.frames[t].features[i];
        worst = std::max(worst, std::abs(back.frames[t].features[i] - x) / std::max(1.0, std::abs(x)));
      }
    }
    ex(worst, 0, 1e-9, "standardize round trip");
  }
  o.detail = fmt("%zu examples", n) + (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome c10_determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "vsensor_acceptance_det";
  fs::remove_all(root);
  std::vector<std::string> blobs;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = root / std::to_string(rep);
    const std::string city = (d / "city").string(), ck = (d / "model.vsck").string(), ev = (d / "eval").string();
    const std::vector<std::vector<std::string>> steps = {
        {"synth", "--sensors", "5", "--hours", "300", "--seed", "17", "--out", city},
        {"train", "--data", city, "--model", "sage", "--epochs", "3", "--seed", "17", "--out", ck},
        {"eval", "--data", city, "--ckpt", ck, "--out", ev},
        {"plot", "--data", city, "--ckpt", ck, "--location", "S02", "--hours", "120", "--out", (d / "s02.svg").string()},
    };
    for (const auto& args : steps) {
      std::ostringstream out, err;
      const int rc = cli::run_cli(args, out, err);
      o.require(rc == 0, args[0] + " exited " + std::to_string(rc) + ": " + err.str());
      if (rc != 0) return o;
    }
    std::string blob;
    for (const char* f : {"report.json", "report.csv", "per_location.csv"}) blob += slurp(fs::path(ev) / f);
    blob += "|" + slurp(d / "s02.svg");
    blobs.push_back(blob);
  }
  o.require(blobs[0] == blobs[1], "outputs differ between identical runs");
  o.detail = fmt("synth->train->eval->plot twice: %zu identical bytes of reports + SVG", blobs[0].size()) +
             (o.detail.empty() ? "" : " (" + o.detail + ")");
  fs::remove_all(root);
  return o;
}

Outcome c11_gbt() {
  Outcome o;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CityConfig c;
    c.seed = seed + 40;
    c.n_hours = 150;
    const Dataset ds = prepare(generate_city(c));
    std::vector<double> y;
    for (const auto& f : ds.frames) {
      for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
        if (f.present[s]) y.push_back(f.target_no2[s]);
      }
    }
    Tensor2 xs(y.size(), FeatureSchema::kWidth);
    std::size_t r = 0;
    for (const auto& f : ds.frames) {
      for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
        if (f.present[s]) std::copy(f.features.row(s).begin(), f.features.row(s).end(), xs.row(r++).begin());
      }
    }
    const GbtModel m = gbt_fit(xs, y, GbtConfig{});
    std::size_t violations = 0;
    for (std::size_t t = 1; t < m.train_mse.size(); ++t) violations += m.train_mse[t] > m.train_mse[t - 1];
    o.require(m.train_mse.size() == 101 && violations == 0,
              fmt("seed %llu: %zu increases", static_cast<unsigned long long>(seed), violations));
  }
  // Depth-1, single tree, learning rate 1: exhaustive split search.
  Rng rng(11);
  std::normal_distribution<double> n01;
  const std::size_t n = 30, d = 4;
  const Tensor2 x = random_matrix(n, d, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 2 * x(i, 2) - x(i, 0) + 0.5 * n01(rng);
  const GbtModel m = gbt_fit(x, y, GbtConfig{1, 1, 1.0, 1});
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_pred;
  for (std::size_t f = 0; f < d; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      const double thr = x(i, f);
      double sl = 0, sr = 0;
      int nl = 0, nr = 0;
      for (std::size_t k = 0; k < n; ++k) (x(k, f) <= thr ? (sl += y[k], ++nl) : (sr += y[k], ++nr));
      if (!nl || !nr) continue;
      std::vector<double> pred(n);
      double sse = 0;
      for (std::size_t k = 0; k < n; ++k) {
        pred[k] = x(k, f) <= thr ? sl / nl : sr / nr;
        sse += (y[k] - pred[k]) * (y[k] - pred[k]);
      }
      if (sse < best - 1e-12) best = sse, best_pred = pred;
    }
  }
  double dev = 0;
  for (std::size_t k = 0; k < n; ++k) dev = std::max(dev, std::abs(m.predict(x.row(k)) - best_pred[k]));
  o.require(dev < 1e-9, fmt("depth-1 fit deviates from oracle by %.2e", dev));
  o.require(std::abs(m.train_mse.back() - best / n) < 1e-9, "depth-1 training MSE differs from oracle SSE");
  o.detail = fmt("100-tree MSE monotone on 3 datasets; depth-1 oracle max deviation %.1e", dev) +
             (o.detail.empty() ? "" : " (" + o.detail + ")");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"improvement-table oracle", c1_improvement_oracle},
      {"NRMSE normaliser consistency", c2_normaliser_consistency},
      {"gradient correctness", c3_gradients},
      {"aggregator properties", c4_aggregators},
      {"leave-one-out hygiene", c5_hygiene},
      {"GraphSAGE < MLP on synthetic data", c6_ordering},
      {"transfer beats scratch", c7_transfer},
      {"autocorrelation signature", c8_autocorrelation},
      {"metric examples", c9_metric_examples},
      {"CLI determinism", c10_determinism},
      {"GBT properties", c11_gbt},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
