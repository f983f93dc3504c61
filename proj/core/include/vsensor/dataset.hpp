#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vsensor/tensor.hpp"
#include "vsensor/timeutil.hpp"

namespace vsensor {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CSV content; the message names the file and line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ReferenceError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateFeatureError : public DataError {
 public:
  using DataError::DataError;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct SensorLocation {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  double dist_road = 0.0;  // meters

  LatLon position() const { return {lat, lon}; }
};

enum class FeatureGroup { Satellite, Meteorological, Time, Static, Autoregressive };

struct FeatureSpec {
  std::string name;
  std::string unit;
  FeatureGroup group;
};

// Column layout of every feature row. The order is fixed: satellite,
// meteorological, time encoding, static, autoregressive.
class FeatureSchema {
 public:
  static FeatureSchema standard();
  // Arbitrary layout; the pipeline still indexes columns by the constants
  // below, so only schemas of the standard width are usable for training.
  static FeatureSchema from_specs(std::vector<FeatureSpec> specs);

  std::size_t size() const { return features_.size(); }
  const std::vector<FeatureSpec>& features() const { return features_; }
  std::size_t count(FeatureGroup g) const;
  std::size_t index_of(const std::string& name) const;
  // Stable FNV-1a hash over names, units and groups.
  std::uint64_t hash() const;

  bool operator==(const FeatureSchema& o) const { return hash() == o.hash(); }

  // Column indices for the standard schema.
  static constexpr std::size_t kSatNo2 = 0;
  static constexpr std::size_t kAerosol = 1;
  static constexpr std::size_t kFirstMet = 2;
  static constexpr std::size_t kNumCsvCovariates = 11;  // satellite + meteorological
  static constexpr std::size_t kFirstTime = 11;
  static constexpr std::size_t kDistRoad = 17;
  static constexpr std::size_t kPrevNo2 = 18;
  static constexpr std::size_t kWidth = 19;

 private:
  std::vector<FeatureSpec> features_;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

struct HourlyFrame {
  UtcHour timestamp;
  Tensor2 features;                // [n_sensors x schema width]
  std::vector<double> target_no2;  // ug/m3, NaN where absent
  std::vector<bool> present;
};

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> std;

  double apply(std::size_t col, double v) const { return (v - mean[col]) / std[col]; }
  double invert(std::size_t col, double v) const { return v * std[col] + mean[col]; }
  bool operator==(const StandardizationStats&) const = default;
};

struct Dataset {
  std::vector<SensorLocation> locations;
  FeatureSchema schema = FeatureSchema::standard();
  std::vector<HourlyFrame> frames;
  std::optional<StandardizationStats> stats;

  std::size_t n_sensors() const { return locations.size(); }
  std::size_t n_frames() const { return frames.size(); }
  std::optional<std::size_t> sensor_index(const std::string& id) const;
  std::size_t present_count(std::size_t sensor) const;
  // Mean over every present target in the dataset.
  double mean_no2() const;
};

// Builds a frame with time and static columns populated, covariates zeroed,
// the autoregressive slot NaN and every sensor absent.
HourlyFrame make_empty_frame(const std::vector<SensorLocation>& locations, UtcHour t);

// CSV ingestion. Readings missing for a (sensor, hour) pair produce
// present=false; covariates for such cells are carried forward from the
// sensor's latest reading (or back-filled before its first).
Dataset load_dataset(const std::filesystem::path& locations_csv, const std::filesystem::path& readings_csv);
std::vector<SensorLocation> load_locations(const std::filesystem::path& locations_csv);

// Writes the two CSV files (absent readings are omitted rows). Values are
// written in shortest round-trip form.
void write_locations_csv(const std::vector<SensorLocation>& locations, const std::filesystem::path& path);
void write_readings_csv(const Dataset& ds, const std::filesystem::path& path);

inline constexpr const char* kLocationsHeader = "sensor_id,lat,lon,dist_road_m";
inline constexpr const char* kReadingsHeader =
    "timestamp,sensor_id,no2_ugm3,sat_no2_molm2,aerosol_idx,wind_speed_ms,wind_gust_ms,wind_dir_deg,"
    "vpd_kpa,temp_c,pressure_pa,rel_humidity_pct,dewpoint_c,cloud_cover_pct";

// Standardises every feature column over present entries. Targets are left
// in ug/m3. Zero-variance columns map to 0 with a recorded std of 1.
std::pair<Dataset, StandardizationStats> standardize(const Dataset& ds);
// Computes statistics without applying them.
StandardizationStats compute_stats(const Dataset& ds);
Dataset apply_stats(const Dataset& ds, const StandardizationStats& stats);
Dataset inverse_standardize(const Dataset& ds);

// Fills the autoregressive column: y(t-1) if present, else the latest
// observation at the same hour of day as t-1, else the dataset mean. When
// the dataset is standardised the filled value is standardised too.
Dataset fill_prev_no2(const Dataset& ds);

using Polyline = std::vector<LatLon>;

// Minimum point-to-segment distance in meters using a local equirectangular
// projection centred on the query point.
double distance_to_road(const SensorLocation& loc, const std::vector<Polyline>& roads);

// Copy of `ds` with one sensor's targets hidden (present=false, NaN).
Dataset mask_sensor(const Dataset& ds, std::size_t sensor);

// Drops all frames outside [first, first + count).
Dataset slice_frames(const Dataset& ds, std::size_t first, std::size_t count);

}  // namespace vsensor
