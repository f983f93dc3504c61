#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vsensor {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// sqrt(mean((pred - actual)^2))
double rmse(std::span<const double> pred, std::span<const double> actual);
// rmse / mean(actual); mean(actual) must be positive.
double nrmse(std::span<const double> pred, std::span<const double> actual);
// RMSE between first differences of the two series.
double grad_rmse(std::span<const double> pred, std::span<const double> actual);
// (base - next) / base * 100
double improvement(double base, double next);

struct MetricSet {
  double rmse = 0.0;
  double nrmse = 0.0;
  double grad_rmse = 0.0;
};

struct LocationMetrics {
  std::string id;
  std::size_t n_points = 0;
  MetricSet metrics;
};

struct EvalReport {
  std::string model;
  std::vector<LocationMetrics> locations;
  MetricSet average;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::string> warnings;

  // Arithmetic mean of the per-location entries.
  void recompute_average();
};

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
// Header `model,rmse,nrmse,grad_rmse` plus one averaged row.
std::string report_csv(const EvalReport& r);
std::string per_location_csv(const EvalReport& r);

struct ImprovementTable {
  std::string base_model;
  std::string new_model;
  MetricSet base;
  MetricSet next;
  MetricSet percent;
};

ImprovementTable compare_reports(const EvalReport& base, const EvalReport& next);
nlohmann::json to_json(const ImprovementTable& t);
std::string improvement_csv(const ImprovementTable& t);

}  // namespace vsensor
