#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "json_config.hpp"
#include "svg.hpp"
#include "vsensor/checkpoint.hpp"
#include "vsensor/pipeline.hpp"
#include "vsensor/synthgen.hpp"

namespace vsensor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- small io helpers ------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + tmp.string());
    f << content;
    if (!f) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Collects what goes into a run manifest.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), started_(utc_now()) {
    t0_ = std::chrono::steady_clock::now();
  }
  void input(const fs::path& p) { inputs_[p.string()] = hex64(fnv1a64(read_file(p))); }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }
  json& config() { return config_; }
  json& seeds() { return seeds_; }
  json& extra() { return extra_; }

  void write(const fs::path& path, const std::vector<std::string>& argv) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    json j = {{"command", command_},
              {"argv", argv},
              {"config", config_},
              {"seeds", seeds_},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"timings", {{"started_utc", started_}, {"finished_utc", utc_now()}, {"wall_seconds", secs}}}};
    if (!extra_.is_null()) j["details"] = extra_;
    write_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  json config_ = json::object();
  json seeds_ = json::object();
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  json extra_;
};

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

struct LoadedData {
  Dataset raw;
  fs::path locations, readings;
};

LoadedData load_dir(const fs::path& dir) {
  LoadedData d;
  d.locations = dir / "locations.csv";
  d.readings = dir / "readings.csv";
  if (!fs::exists(d.locations) || !fs::exists(d.readings)) {
    throw DataError("data directory " + dir.string() + " must contain locations.csv and readings.csv");
  }
  d.raw = load_dataset(d.locations, d.readings);
  return d;
}

SpatialGraph graph_for(const Dataset& ds, std::size_t k, std::ostream& err) {
  std::vector<std::string> warnings;
  SpatialGraph g = build_knn_graph(ds.locations, k, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  return g;
}

std::size_t location_index(const Dataset& ds, const std::string& id) {
  auto idx = ds.sensor_index(id);
  if (!idx) throw ReferenceError("unknown location '" + id + "'");
  return *idx;
}

std::size_t threads_from_env(std::size_t folds) {
  const char* v = std::getenv("VS_THREADS");
  if (!v || !*v) return folds;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw std::invalid_argument("VS_THREADS must be a positive integer");
  return std::min<std::size_t>(static_cast<std::size_t>(n), folds);
}

// ---- training flags shared by train / transfer / eval ------------------------

struct TrainFlags {
  std::string model = "sage";
  std::string aggregator = "meanpool";
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t patience = 10;
  double val_fraction = 0.1;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  std::size_t knn_k = 3;
  std::size_t gbt_trees = 100;
  std::size_t gbt_depth = 4;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["model"] = app->add_option("--model", model, "sage|mlp|cnn|gbt")->capture_default_str();
    opts["aggregator"] =
        app->add_option("--aggregator", aggregator, "mean|maxpool|meanpool|attention")->capture_default_str();
    opts["epochs"] = app->add_option("--epochs", epochs, "training epochs")->capture_default_str();
    opts["lr"] = app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    opts["patience"] = app->add_option("--patience", patience, "early-stopping patience")->capture_default_str();
    opts["val-fraction"] =
        app->add_option("--val-fraction", val_fraction, "chronological validation tail")->capture_default_str();
    opts["dropout"] = app->add_option("--dropout", dropout, "dropout rate")->capture_default_str();
    opts["seed"] = app->add_option("--seed", seed, "random seed")->capture_default_str();
    opts["knn-k"] = app->add_option("--knn-k", knn_k, "neighbours per sensor in the graph")->capture_default_str();
    opts["gbt-trees"] = app->add_option("--gbt-trees", gbt_trees, "boosting rounds")->capture_default_str();
    opts["gbt-depth"] = app->add_option("--gbt-depth", gbt_depth, "tree depth")->capture_default_str();
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

  // Flags override `base` only where given explicitly (or from --config).
  TrainConfig apply(TrainConfig c, bool all) const {
    if (all || given("model")) c.model.kind = model_kind_from_string(model);
    if (all || given("aggregator")) c.model.sage.aggregator = aggregator_from_string(aggregator);
    if (all || given("epochs")) c.epochs = epochs;
    if (all || given("lr")) c.lr = lr;
    if (all || given("patience")) c.patience = patience;
    if (all || given("val-fraction")) c.val_fraction = val_fraction;
    if (all || given("dropout")) {
      c.model.sage.dropout = dropout;
      c.model.mlp.dropout = dropout;
      c.model.cnn.dropout = dropout;
    }
    if (all || given("seed")) c.seed = seed;
    if (all || given("knn-k")) c.knn_k = knn_k;
    if (all || given("gbt-trees")) c.model.gbt.n_trees = gbt_trees;
    if (all || given("gbt-depth")) c.model.gbt.max_depth = gbt_depth;
    c.model.sage.seed = c.seed;
    c.validate();
    c.model.sage.validate();
    return c;
  }
};

void add_config_option(CLI::App* app) {
  // Consumed by expand_json_config before parsing; registered for --help.
  app->add_option("--config", "JSON file with flag values (flags win on conflict)");
}

json history_json(const TrainHistory& h) {
  return {{"train_loss", h.train_loss},
          {"val_loss", h.val_loss},
          {"best_epoch", h.best_epoch},
          {"epochs_run", h.epochs_run}};
}

// ---- commands ----------------------------------------------------------------

struct SynthFlags {
  std::optional<std::size_t> sensors;
  std::size_t hours = 4000;
  std::uint64_t seed = 0;
  std::string preset = "default";
  std::string out;
  std::optional<double> base, noise_std, amplitude, spread, field_std, lag1, length_scale, missing_rate;
  std::optional<std::string> start;
};

int cmd_synth(const SynthFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  CityConfig c;
  if (f.preset == "source") {
    c = source_city_preset(f.seed, f.hours);
  } else if (f.preset != "default") {
    throw std::invalid_argument("unknown preset '" + f.preset + "' (default|source)");
  } else {
    c.n_hours = f.hours;
    c.seed = f.seed;
  }
  if (f.sensors) c.n_sensors = *f.sensors;
  if (f.base) c.base = *f.base;
  if (f.noise_std) c.noise_std = *f.noise_std;
  if (f.amplitude) c.diurnal_amplitude = *f.amplitude;
  if (f.spread) c.scale_spread = *f.spread;
  if (f.field_std) c.field_std = *f.field_std;
  if (f.lag1) c.lag1 = *f.lag1;
  if (f.length_scale) c.length_scale_m = *f.length_scale;
  if (f.missing_rate) c.missing_rate = *f.missing_rate;
  if (f.start) c.start = parse_utc_hour(*f.start);

  Manifest m("synth");
  const Dataset ds = generate_city(c);
  const fs::path dir(f.out);
  write_city(ds, dir);
  m.config() = {{"n_sensors", c.n_sensors},
                {"n_hours", c.n_hours},
                {"bbox", {c.bbox.lat_min, c.bbox.lat_max, c.bbox.lon_min, c.bbox.lon_max}},
                {"lag1", c.lag1},
                {"diurnal_amplitude", c.diurnal_amplitude},
                {"base", c.base},
                {"length_scale_m", c.length_scale_m},
                {"noise_std", c.noise_std},
                {"scale_spread", c.scale_spread},
                {"field_std", c.field_std},
                {"met_effect", c.met_effect},
                {"missing_rate", c.missing_rate},
                {"n_roads", c.n_roads},
                {"start", format_utc_hour(c.start)},
                {"preset", f.preset}};
  m.seeds() = {{"seed", c.seed}};
  m.output(dir / "locations.csv");
  m.output(dir / "readings.csv");
  m.write(dir / "manifest.json", argv);
  out << "wrote " << ds.n_sensors() << " sensors x " << ds.n_frames() << " hours to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& data, const std::string& out_path, const TrainFlags& tf,
              const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Manifest m("train");
  const LoadedData d = load_dir(data);
  m.input(d.locations);
  m.input(d.readings);
  const TrainConfig cfg = tf.apply(TrainConfig{}, true);
  const Dataset ds = prepare(d.raw);
  const SpatialGraph g = graph_for(ds, cfg.knn_k, err);
  TrainResult r = train(ds, g, cfg);
  const json meta = {{"command", "train"}, {"train", to_json(cfg)}};
  save_checkpoint(out_path, r.model, ds.stats, meta);
  m.config() = to_json(cfg);
  m.seeds() = {{"seed", cfg.seed}};
  m.extra() = {{"history", history_json(r.history)}, {"graph_diameter", g.diameter() ? json(*g.diameter()) : json()}};
  m.output(out_path);
  m.write(manifest_for_file(out_path), argv);
  out << "trained " << to_string(cfg.model.kind) << " for " << r.history.epochs_run << " epochs; checkpoint "
      << out_path << "\n";
  return kExitOk;
}

struct TransferFlags {
  std::string source, target, out, pretrained_out;
  std::size_t finetune_epochs = 20;
  double finetune_lr = 1e-4;
  std::vector<std::string> freeze;
  bool use_source_stats = false;
};

void add_finetune_flags(CLI::App* app, TransferFlags& f) {
  app->add_option("--finetune-epochs", f.finetune_epochs, "fine-tuning epochs")->capture_default_str();
  app->add_option("--finetune-lr", f.finetune_lr, "fine-tuning learning rate")->capture_default_str();
  app->add_option("--freeze", f.freeze, "parameter-name prefix kept fixed while fine-tuning (repeatable)");
  app->add_flag("--use-source-stats", f.use_source_stats,
                "standardise the target city with the source statistics");
}

TransferConfig transfer_config(const TrainConfig& source, const TransferFlags& f) {
  TransferConfig c;
  c.source = source;
  c.finetune_epochs = f.finetune_epochs;
  c.finetune_lr = f.finetune_lr;
  c.frozen = f.freeze;
  c.use_source_stats = f.use_source_stats;
  c.validate();
  return c;
}

int cmd_transfer(const TransferFlags& f, const TrainFlags& tf, const std::vector<std::string>& argv,
                 std::ostream& out, std::ostream& err) {
  Manifest m("transfer");
  const LoadedData src = load_dir(f.source);
  const LoadedData tgt = load_dir(f.target);
  for (const auto* d : {&src, &tgt}) {
    m.input(d->locations);
    m.input(d->readings);
  }
  const TransferConfig cfg = transfer_config(tf.apply(TrainConfig{}, true), f);
  const Dataset s = prepare(src.raw);
  const Dataset t = cfg.use_source_stats ? prepare_with_stats(tgt.raw, *s.stats) : prepare(tgt.raw);
  const SpatialGraph gs = graph_for(s, cfg.source.knn_k, err);
  const SpatialGraph gt = graph_for(t, cfg.source.knn_k, err);
  TransferResult r = transfer(s, t, gs, gt, cfg);
  const json meta = {{"command", "transfer"}, {"train", to_json(cfg.source)}, {"transfer", to_json(cfg)}};
  save_checkpoint(f.out, r.finetuned, t.stats, meta);
  m.output(f.out);
  if (!f.pretrained_out.empty()) {
    save_checkpoint(f.pretrained_out, r.pretrained, s.stats, meta);
    m.output(f.pretrained_out);
  }
  m.config() = to_json(cfg);
  m.seeds() = {{"seed", cfg.source.seed}};
  m.extra() = {{"pretrain_history", history_json(r.pretrain_history)},
               {"finetune_history", history_json(r.finetune_history)}};
  m.write(manifest_for_file(f.out), argv);
  out << "pretrained " << r.pretrain_history.epochs_run << " epochs, fine-tuned " << r.finetune_history.epochs_run
      << " epochs; checkpoint " << f.out << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string data, ckpt, out, init = "actual";
  std::vector<std::string> compare;
  bool finetune = false;
};

int cmd_compare(const EvalFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  if (f.compare.size() != 2) throw std::invalid_argument("--compare needs exactly two report files");
  Manifest m("eval --compare");
  std::vector<EvalReport> reports;
  for (const auto& p : f.compare) {
    m.input(p);
    try {
      reports.push_back(report_from_json(json::parse(read_file(p))));
    } catch (const json::exception& e) {
      throw DataError("cannot read report " + p + ": " + e.what());
    }
  }
  const ImprovementTable t = compare_reports(reports[0], reports[1]);
  if (f.out.empty()) {
    out << improvement_csv(t);
    return kExitOk;
  }
  const fs::path dir(f.out);
  write_atomic(dir / "improvement.json", to_json(t).dump(2) + "\n");
  write_atomic(dir / "improvement.csv", improvement_csv(t));
  m.output(dir / "improvement.json");
  m.output(dir / "improvement.csv");
  m.write(dir / "manifest.json", argv);
  out << improvement_csv(t);
  return kExitOk;
}

int cmd_eval(const EvalFlags& f, const TrainFlags& tf, const TransferFlags& ftf, const std::vector<std::string>& argv,
             std::ostream& out, std::ostream& err) {
  if (!f.compare.empty()) return cmd_compare(f, argv, out);
  if (f.data.empty()) throw CLI::RequiredError("--data");
  if (f.out.empty()) throw CLI::RequiredError("--out");
  if (f.ckpt.empty() && !tf.given("model")) throw CLI::RequiredError("--ckpt or --model");
  if (f.finetune && f.ckpt.empty()) throw CLI::ValidationError("--finetune", "requires --ckpt");

  Manifest m("eval");
  const LoadedData d = load_dir(f.data);
  m.input(d.locations);
  m.input(d.readings);

  EvalConfig ec;
  if (!f.ckpt.empty()) {
    m.input(f.ckpt);
    Checkpoint ck = load_checkpoint(f.ckpt);
    TrainConfig base;
    if (ck.config.contains("train")) base = train_config_from_json(ck.config["train"]);
    base.model = ck.model.config();
    ec.train = tf.apply(base, false);
    if (f.finetune) {
      ec.finetune = transfer_config(ec.train, ftf);
      ec.pretrained = std::move(ck.model);
      if (ftf.use_source_stats) {
        if (!ck.stats) throw CheckpointError("checkpoint carries no standardisation statistics");
        ec.fixed_stats = ck.stats;
      }
    }
  } else {
    ec.train = tf.apply(TrainConfig{}, true);
  }
  ec.init = init_scheme_from_string(f.init);
  ec.threads = threads_from_env(d.raw.n_sensors());

  const SpatialGraph g = graph_for(d.raw, ec.train.knn_k, err);
  const EvalReport report = leave_one_out(d.raw, g, ec);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";

  const fs::path dir(f.out);
  write_atomic(dir / "report.json", to_json(report).dump(2) + "\n");
  write_atomic(dir / "report.csv", report_csv(report));
  write_atomic(dir / "per_location.csv", per_location_csv(report));
  for (const char* name : {"report.json", "report.csv", "per_location.csv"}) m.output(dir / name);
  m.config() = {{"train", to_json(ec.train)}, {"init", to_string(ec.init)}, {"threads", ec.threads}};
  if (ec.pretrained) m.config()["finetune"] = to_json(ec.finetune);
  m.seeds() = {{"seed", ec.train.seed}, {"fold_seeds", report.metadata.value("fold_seeds", json::array())}};
  m.write(dir / "manifest.json", argv);
  out << report_csv(report);
  return kExitOk;
}

struct PredictFlags {
  std::string data, ckpt, location, out, init = "actual", predictions;
  std::size_t knn_k = 3;
  bool knn_given = false;
  std::uint64_t seed = 0;
  std::size_t start = 0;
  std::size_t hours = 0;
};

struct Prediction {
  std::size_t node = 0;
  std::size_t start_frame = 0;
  std::vector<double> values;  // frames start_frame+1 .. T-1
};

// Rollout for one location using a checkpoint. The location's targets are
// hidden before its features are standardised, exactly as in evaluation.
Prediction predict_location(const Dataset& raw, const Checkpoint& ck, const std::string& location,
                            const InitScheme& init, std::optional<std::size_t> knn, std::uint64_t seed,
                            std::ostream& err) {
  Prediction p;
  p.node = location_index(raw, location);
  std::size_t k = 3;
  if (ck.config.contains("train")) k = train_config_from_json(ck.config["train"]).knn_k;
  if (knn) k = *knn;
  const SpatialGraph g = graph_for(raw, k, err);
  const Dataset masked = mask_sensor(raw, p.node);
  const Dataset ds = ck.stats ? prepare_with_stats(masked, *ck.stats) : prepare(masked);
  ResolvedInit ri = resolve_init(raw, p.node, init);
  if (init.kind == InitKind::DatasetMean) ri.value = ds.mean_no2();
  p.start_frame = ri.start_frame;
  Rng rng(seed);
  p.values = rollout_series(ds, p.node, ri, [&](const Tensor2& x, std::size_t node) {
    return ck.model.predict_one(x, node, g, rng);
  });
  for (double& v : p.values) v = std::max(v, 0.0);
  return p;
}

int cmd_predict(const PredictFlags& f, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Manifest m("predict");
  const LoadedData d = load_dir(f.data);
  m.input(d.locations);
  m.input(d.readings);
  m.input(f.ckpt);
  const Checkpoint ck = load_checkpoint(f.ckpt);
  const InitScheme init = init_scheme_from_string(f.init);
  const Prediction p = predict_location(d.raw, ck, f.location, init,
                                        f.knn_given ? std::optional(f.knn_k) : std::nullopt, f.seed, err);
  std::string csv = "timestamp,predicted_no2_ugm3\n";
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    csv += format_utc_hour(d.raw.frames[p.start_frame + 1 + i].timestamp) + "," + fmt6(p.values[i]) + "\n";
  }
  write_atomic(f.out, csv);
  m.output(f.out);
  m.config() = {{"location", f.location}, {"init", to_string(init)}, {"model", to_json(ck.model.config())}};
  m.seeds() = {{"seed", f.seed}};
  m.write(manifest_for_file(f.out), argv);
  out << "wrote " << p.values.size() << " predictions for " << f.location << " to " << f.out << "\n";
  return kExitOk;
}

std::map<std::int64_t, double> read_predictions_csv(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line) || line.rfind("timestamp,predicted_no2_ugm3", 0) != 0) {
    throw FormatError(p.string() + ": expected header timestamp,predicted_no2_ugm3");
  }
  std::map<std::int64_t, double> out;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(p.string(), ln, "expected 2 fields");
    try {
      out[parse_utc_hour(line.substr(0, comma)).hours] = std::stod(line.substr(comma + 1));
    } catch (const std::exception& e) {
      throw ParseError(p.string(), ln, e.what());
    }
  }
  return out;
}

int cmd_plot(const PredictFlags& f, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  if (f.ckpt.empty() == f.predictions.empty()) {
    throw CLI::ValidationError("plot", "give exactly one of --ckpt or --predictions");
  }
  Manifest m("plot");
  const LoadedData d = load_dir(f.data);
  m.input(d.locations);
  m.input(d.readings);
  const std::size_t node = location_index(d.raw, f.location);
  const std::size_t T = d.raw.n_frames();

  std::vector<double> pred(T, std::numeric_limits<double>::quiet_NaN());
  if (!f.ckpt.empty()) {
    m.input(f.ckpt);
    const Checkpoint ck = load_checkpoint(f.ckpt);
    const Prediction p = predict_location(d.raw, ck, f.location, init_scheme_from_string(f.init),
                                          f.knn_given ? std::optional(f.knn_k) : std::nullopt, f.seed, err);
    for (std::size_t i = 0; i < p.values.size(); ++i) pred[p.start_frame + 1 + i] = p.values[i];
  } else {
    m.input(f.predictions);
    const auto byhour = read_predictions_csv(f.predictions);
    for (std::size_t t = 0; t < T; ++t) {
      auto it = byhour.find(d.raw.frames[t].timestamp.hours);
      if (it != byhour.end()) pred[t] = it->second;
    }
  }

  const std::size_t first = std::min(f.start, T - 1);
  const std::size_t count = f.hours == 0 ? T - first : std::min(f.hours, T - first);
  SeriesPlot plot;
  plot.title = "NO2 at " + f.location + ": actual vs predicted";
  for (std::size_t t = first; t < first + count; ++t) {
    const auto& fr = d.raw.frames[t];
    plot.labels.push_back(format_utc_hour(fr.timestamp));
    plot.actual.push_back(fr.present[node] ? fr.target_no2[node] : std::numeric_limits<double>::quiet_NaN());
    plot.predicted.push_back(pred[t]);
  }
  write_atomic(f.out, render_series_svg(plot));
  m.output(f.out);
  m.config() = {{"location", f.location}, {"start", first}, {"hours", count}};
  m.write(manifest_for_file(f.out), argv);
  out << "wrote " << f.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vsensor: graph-based virtual NO2 sensors", "vsensor"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "generate a synthetic city (locations.csv + readings.csv)");
  synth->add_option("--sensors", sf.sensors, "sensor count (default 8, or 60 for the source preset)");
  synth->add_option("--hours", sf.hours, "hours of data")->capture_default_str();
  synth->add_option("--seed", sf.seed, "random seed")->capture_default_str();
  synth->add_option("--preset", sf.preset, "default|source")->capture_default_str();
  synth->add_option("--base", sf.base, "base NO2 level (ug/m3)");
  synth->add_option("--noise-std", sf.noise_std, "observation noise std (ug/m3)");
  synth->add_option("--amplitude", sf.amplitude, "diurnal amplitude (ug/m3)");
  synth->add_option("--spread", sf.spread, "per-sensor scale spread");
  synth->add_option("--field-std", sf.field_std, "spatial field std (ug/m3)");
  synth->add_option("--lag1", sf.lag1, "AR(1) coefficient of the spatial field");
  synth->add_option("--length-scale", sf.length_scale, "spatial length scale (m)");
  synth->add_option("--missing-rate", sf.missing_rate, "probability a reading is dropped");
  synth->add_option("--start", sf.start, "first hour, e.g. 2019-01-01T00:00:00Z");
  synth->add_option("--out", sf.out, "output directory")->required();
  add_config_option(synth);

  std::string train_data, train_out;
  TrainFlags train_flags;
  auto* trainc = app.add_subcommand("train", "train a model on a city and write a checkpoint");
  trainc->add_option("--data", train_data, "data directory")->required();
  trainc->add_option("--out", train_out, "checkpoint path")->required();
  train_flags.add(trainc);
  add_config_option(trainc);

  TransferFlags xf;
  TrainFlags xtrain;
  auto* transferc = app.add_subcommand("transfer", "pretrain on a source city, fine-tune on a target city");
  transferc->add_option("--source", xf.source, "source data directory")->required();
  transferc->add_option("--target", xf.target, "target data directory")->required();
  transferc->add_option("--out", xf.out, "fine-tuned checkpoint path")->required();
  transferc->add_option("--pretrained-out", xf.pretrained_out, "also write the pretrained checkpoint");
  xtrain.add(transferc);
  add_finetune_flags(transferc, xf);
  add_config_option(transferc);

  EvalFlags ef;
  TrainFlags etrain;
  TransferFlags eft;
  auto* evalc = app.add_subcommand("eval", "leave-one-location-out evaluation, or --compare two reports");
  evalc->add_option("--data", ef.data, "data directory");
  evalc->add_option("--ckpt", ef.ckpt, "checkpoint supplying the model configuration (and weights with --finetune)");
  evalc->add_option("--out", ef.out, "output directory (optional with --compare)");
  evalc->add_option("--init", ef.init, "rollout init: actual|mean|fixed:C")->capture_default_str();
  evalc->add_flag("--finetune", ef.finetune, "fine-tune the checkpoint weights in every fold");
  evalc->add_option("--compare", ef.compare, "base and new report.json")->expected(2);
  etrain.add(evalc);
  add_finetune_flags(evalc, eft);
  add_config_option(evalc);

  PredictFlags pf;
  auto* predictc = app.add_subcommand("predict", "roll out a checkpoint at one location");
  predictc->add_option("--data", pf.data, "data directory")->required();
  predictc->add_option("--ckpt", pf.ckpt, "checkpoint")->required();
  predictc->add_option("--location", pf.location, "sensor id to predict")->required();
  predictc->add_option("--out", pf.out, "output CSV")->required();
  predictc->add_option("--init", pf.init, "rollout init: actual|mean|fixed:C")->capture_default_str();
  auto* pk = predictc->add_option("--knn-k", pf.knn_k, "graph neighbours (default: from checkpoint)");
  predictc->add_option("--seed", pf.seed, "sampling seed")->capture_default_str();
  add_config_option(predictc);

  PredictFlags lf;
  auto* plotc = app.add_subcommand("plot", "SVG of actual vs predicted NO2 at one location");
  plotc->add_option("--data", lf.data, "data directory")->required();
  plotc->add_option("--location", lf.location, "sensor id")->required();
  plotc->add_option("--out", lf.out, "output SVG")->required();
  plotc->add_option("--ckpt", lf.ckpt, "checkpoint to roll out");
  plotc->add_option("--predictions", lf.predictions, "prediction CSV (timestamp,predicted_no2_ugm3)");
  plotc->add_option("--init", lf.init, "rollout init: actual|mean|fixed:C")->capture_default_str();
  plotc->add_option("--start", lf.start, "first frame index of the window")->capture_default_str();
  plotc->add_option("--hours", lf.hours, "window length (0 = to the end)")->capture_default_str();
  auto* lk = plotc->add_option("--knn-k", lf.knn_k, "graph neighbours (default: from checkpoint)");
  plotc->add_option("--seed", lf.seed, "sampling seed")->capture_default_str();
  add_config_option(plotc);

  std::vector<std::string> argv_copy;
  try {
    argv_copy = expand_json_config(args);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    std::vector<std::string> rev(argv_copy.rbegin(), argv_copy.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(sf, argv_copy, out);
    if (trainc->parsed()) return cmd_train(train_data, train_out, train_flags, argv_copy, out, err);
    if (transferc->parsed()) return cmd_transfer(xf, xtrain, argv_copy, out, err);
    if (evalc->parsed()) return cmd_eval(ef, etrain, eft, argv_copy, out, err);
    if (predictc->parsed()) {
      pf.knn_given = pk->count() > 0;
      return cmd_predict(pf, argv_copy, out, err);
    }
    if (plotc->parsed()) {
      lf.knn_given = lk->count() > 0;
      return cmd_plot(lf, argv_copy, out, err);
    }
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << "\n";
    return kExitData;
  } catch (const MetricError& e) {
    err << "metric error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    err << "json error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitData;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace vsensor::cli
