#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "vsensor/dataset.hpp"
#include "vsensor/synthgen.hpp"

namespace vsensor::testing {

// Sensors on a small east-west line near Bristol; every reading present,
// covariates drawn from `seed`, targets from `target(t, s)`.
template <typename F>
Dataset line_dataset(std::size_t n_sensors, std::size_t n_frames, F target, std::uint64_t seed = 1) {
  Dataset ds;
  for (std::size_t s = 0; s < n_sensors; ++s) {
    ds.locations.push_back({"L" + std::to_string(s), 51.45, -2.60 + 0.01 * static_cast<double>(s),
                            100.0 * static_cast<double>(s + 1)});
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const UtcHour t0 = make_utc_hour(2019, 1, 7, 0);
  for (std::size_t t = 0; t < n_frames; ++t) {
    HourlyFrame f = make_empty_frame(ds.locations, t0 + static_cast<std::int64_t>(t));
    for (std::size_t s = 0; s < n_sensors; ++s) {
      for (std::size_t c = 0; c < FeatureSchema::kNumCsvCovariates; ++c) f.features(s, c) = n01(rng);
      f.target_no2[s] = target(t, s);
      f.present[s] = true;
    }
    ds.frames.push_back(std::move(f));
  }
  return ds;
}

inline Dataset small_city(std::size_t sensors, std::size_t hours, std::uint64_t seed) {
  CityConfig c;
  c.n_sensors = sensors;
  c.n_hours = hours;
  c.seed = seed;
  return generate_city(c);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vsensor_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace vsensor::testing
