#pragma once

// Synthetic cities: seasonal/diurnal NO2 with an AR(1) spatially correlated
// field, meteorology that shifts the level, and a daily satellite column.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vsensor/dataset.hpp"
#include "vsensor/timeutil.hpp"

namespace vsensor {

struct BoundingBox {
  double lat_min = 51.43;
  double lat_max = 51.48;
  double lon_min = -2.63;
  double lon_max = -2.55;
};

struct CityConfig {
  std::size_t n_sensors = 8;
  std::size_t n_hours = 4000;
  BoundingBox bbox;
  std::uint64_t seed = 0;
  double lag1 = 0.9;                // AR(1) coefficient of the spatial field
  double diurnal_amplitude = 15.0;  // ug/m3
  double base = 30.0;               // ug/m3
  double length_scale_m = 2000.0;
  double noise_std = 4.0;
  double scale_spread = 0.4;  // per-sensor multiplier in [1 - spread, 1 + spread]
  double field_std = 10.0;    // marginal std of the spatial field
  double met_effect = 1.0;    // 0 removes the meteorological shift
  double missing_rate = 0.0;  // probability a reading is dropped
  std::size_t n_roads = 5;
  UtcHour start = make_utc_hour(2019, 1, 1, 0);

  void validate() const;
};

// Larger, dirtier city on a separate bounding box, used as the transfer
// source.
CityConfig source_city_preset(std::uint64_t seed, std::size_t n_hours = 4000);

struct SyntheticCity {
  Dataset dataset;  // raw: not standardised, autoregressive slot unfilled
  std::vector<Polyline> roads;
  std::vector<double> sensor_scale;
};

SyntheticCity generate_city_detailed(const CityConfig& cfg);
Dataset generate_city(const CityConfig& cfg);

// Writes locations.csv and readings.csv into `dir` (created if needed).
void write_city(const Dataset& ds, const std::filesystem::path& dir);

// Pearson correlation of (x_t, x_{t+lag}).
double lag_autocorr(std::span<const double> series, std::size_t lag);

// Lower-triangular L with L L^T = a (a is n x n, row-major). Throws on a
// matrix that is not positive definite.
std::vector<double> cholesky(std::span<const double> a, std::size_t n);

}  // namespace vsensor
