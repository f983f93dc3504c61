#include "vsensor/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace vsensor {

namespace {
void check_pair(std::span<const double> pred, std::span<const double> actual, std::size_t min_len, const char* what) {
  if (pred.size() != actual.size()) throw MetricError(std::string(what) + ": series lengths differ");
  if (pred.size() < min_len) {
    throw MetricError(std::string(what) + ": need at least " + std::to_string(min_len) + " points");
  }
}
}  // namespace

double rmse(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, 1, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double nrmse(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, 1, "nrmse");
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
  if (!(mean > 0.0)) throw MetricError("nrmse: mean of the observed series must be positive");
  return rmse(pred, actual) / mean;
}

double grad_rmse(std::span<const double> pred, std::span<const double> actual) {
  check_pair(pred, actual, 2, "grad_rmse");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pred.size(); ++i) {
    const double d = (pred[i + 1] - pred[i]) - (actual[i + 1] - actual[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size() - 1));
}

double improvement(double base, double next) {
  if (!(base > 0.0)) throw MetricError("improvement: base metric must be positive");
  return (base - next) / base * 100.0;
}

void EvalReport::recompute_average() {
  average = {};
  if (locations.empty()) return;
  for (const auto& l : locations) {
    average.rmse += l.metrics.rmse;
    average.nrmse += l.metrics.nrmse;
    average.grad_rmse += l.metrics.grad_rmse;
  }
  const double n = static_cast<double>(locations.size());
  average.rmse /= n;
  average.nrmse /= n;
  average.grad_rmse /= n;
}

namespace {
nlohmann::json metrics_json(const MetricSet& m) {
  return {{"rmse", m.rmse}, {"nrmse", m.nrmse}, {"grad_rmse", m.grad_rmse}};
}
MetricSet metrics_from(const nlohmann::json& j) {
  return {j.at("rmse").get<double>(), j.at("nrmse").get<double>(), j.at("grad_rmse").get<double>()};
}
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json locs = nlohmann::json::array();
  for (const auto& l : r.locations) {
    auto j = metrics_json(l.metrics);
    j["id"] = l.id;
    j["n_points"] = l.n_points;
    locs.push_back(j);
  }
  return {{"model", r.model},
          {"locations", locs},
          {"average", metrics_json(r.average)},
          {"metadata", r.metadata},
          {"warnings", r.warnings}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.model = j.at("model").get<std::string>();
  for (const auto& l : j.at("locations")) {
    r.locations.push_back({l.at("id").get<std::string>(), l.value("n_points", std::size_t{0}), metrics_from(l)});
  }
  r.average = metrics_from(j.at("average"));
  if (j.contains("metadata")) r.metadata = j["metadata"];
  if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  return r;
}

std::string report_csv(const EvalReport& r) {
  return "model,rmse,nrmse,grad_rmse\n" + r.model + "," + fmt(r.average.rmse) + "," + fmt(r.average.nrmse) + "," +
         fmt(r.average.grad_rmse) + "\n";
}

std::string per_location_csv(const EvalReport& r) {
  std::string out = "location,n_points,rmse,nrmse,grad_rmse\n";
  for (const auto& l : r.locations) {
    out += l.id + "," + std::to_string(l.n_points) + "," + fmt(l.metrics.rmse) + "," + fmt(l.metrics.nrmse) + "," +
           fmt(l.metrics.grad_rmse) + "\n";
  }
  return out;
}

ImprovementTable compare_reports(const EvalReport& base, const EvalReport& next) {
  ImprovementTable t{base.model, next.model, base.average, next.average, {}};
  t.percent.rmse = improvement(base.average.rmse, next.average.rmse);
  t.percent.nrmse = improvement(base.average.nrmse, next.average.nrmse);
  t.percent.grad_rmse = improvement(base.average.grad_rmse, next.average.grad_rmse);
  return t;
}

nlohmann::json to_json(const ImprovementTable& t) {
  return {{"base", {{"model", t.base_model}, {"metrics", metrics_json(t.base)}}},
          {"new", {{"model", t.new_model}, {"metrics", metrics_json(t.next)}}},
          {"percentage_improvement", metrics_json(t.percent)}};
}

std::string improvement_csv(const ImprovementTable& t) {
  std::string out = "model,rmse,nrmse,grad_rmse\n";
  out += t.base_model + "," + fmt(t.base.rmse) + "," + fmt(t.base.nrmse) + "," + fmt(t.base.grad_rmse) + "\n";
  out += t.new_model + "," + fmt(t.next.rmse) + "," + fmt(t.next.nrmse) + "," + fmt(t.next.grad_rmse) + "\n";
  out += "Percentage Improvement," + fmt(t.percent.rmse) + "," + fmt(t.percent.nrmse) + "," +
         fmt(t.percent.grad_rmse) + "\n";
  return out;
}

}  // namespace vsensor
