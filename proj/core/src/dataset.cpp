#include "vsensor/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

namespace vsensor {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Satellite: return "satellite";
    case FeatureGroup::Meteorological: return "meteorological";
    case FeatureGroup::Time: return "time";
    case FeatureGroup::Static: return "static";
    case FeatureGroup::Autoregressive: return "autoregressive";
  }
  return "?";
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct LineReader {
  std::ifstream in;
  std::string file;
  std::size_t line_no = 0;
  std::string line;

  explicit LineReader(const std::filesystem::path& path) : in(path), file(path.string()) {
    if (!in) throw DataError("cannot open " + file);
  }
  bool next() {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  }
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FeatureSchema FeatureSchema::standard() {
  using G = FeatureGroup;
  FeatureSchema s;
  s.features_ = {
      {"sat_no2", "mol/m2", G::Satellite},
      {"aerosol_idx", "1", G::Satellite},
      {"wind_speed", "m/s", G::Meteorological},
      {"wind_gust", "m/s", G::Meteorological},
      {"wind_dir", "deg", G::Meteorological},
      {"vpd", "kPa", G::Meteorological},
      {"temp", "degC", G::Meteorological},
      {"pressure", "Pa", G::Meteorological},
      {"rel_humidity", "%", G::Meteorological},
      {"dewpoint", "degC", G::Meteorological},
      {"cloud_cover", "%", G::Meteorological},
      {"hour_sin", "1", G::Time},
      {"hour_cos", "1", G::Time},
      {"dow_sin", "1", G::Time},
      {"dow_cos", "1", G::Time},
      {"woy_sin", "1", G::Time},
      {"woy_cos", "1", G::Time},
      {"dist_road", "m", G::Static},
      {"prev_no2", "ug/m3", G::Autoregressive},
  };
  return s;
}

FeatureSchema FeatureSchema::from_specs(std::vector<FeatureSpec> specs) {
  FeatureSchema s;
  s.features_ = std::move(specs);
  return s;
}

std::size_t FeatureSchema::count(FeatureGroup g) const {
  return static_cast<std::size_t>(
      std::count_if(features_.begin(), features_.end(), [g](const FeatureSpec& f) { return f.group == g; }));
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  throw std::out_of_range("unknown feature " + name);
}

std::uint64_t FeatureSchema::hash() const {
  std::string blob;
  for (const auto& f : features_) {
    blob += f.name;
    blob += '|';
    blob += f.unit;
    blob += '|';
    blob += group_name(f.group);
    blob += ';';
  }
  return fnv1a64(blob);
}

std::optional<std::size_t> Dataset::sensor_index(const std::string& id) const {
  for (std::size_t i = 0; i < locations.size(); ++i) {
    if (locations[i].id == id) return i;
  }
  return std::nullopt;
}

std::size_t Dataset::present_count(std::size_t sensor) const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.present[sensor] ? 1 : 0;
  return n;
}

double Dataset::mean_no2() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    for (std::size_t s = 0; s < f.present.size(); ++s) {
      if (f.present[s]) {
        sum += f.target_no2[s];
        ++n;
      }
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

HourlyFrame make_empty_frame(const std::vector<SensorLocation>& locations, UtcHour t) {
  const std::size_t n = locations.size();
  HourlyFrame f{t, Tensor2(n, FeatureSchema::kWidth), std::vector<double>(n, kNaN), std::vector<bool>(n, false)};
  const auto enc = encode_time(t);
  for (std::size_t s = 0; s < n; ++s) {
    auto row = f.features.row(s);
    std::copy(enc.begin(), enc.end(), row.begin() + FeatureSchema::kFirstTime);
    row[FeatureSchema::kDistRoad] = locations[s].dist_road;
    row[FeatureSchema::kPrevNo2] = kNaN;
  }
  return f;
}

std::vector<SensorLocation> load_locations(const std::filesystem::path& locations_csv) {
  LineReader r(locations_csv);
  if (!r.next() || trim_cr(r.line) != kLocationsHeader) {
    throw ParseError(r.file, r.line_no, std::string("expected header '") + kLocationsHeader + "'");
  }
  std::vector<SensorLocation> locs;
  std::set<std::string> seen;
  while (r.next()) {
    const auto line = trim_cr(r.line);
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 4) throw ParseError(r.file, r.line_no, "expected 4 columns");
    SensorLocation loc;
    loc.id = std::string(cols[0]);
    if (loc.id.empty()) throw ParseError(r.file, r.line_no, "empty sensor_id");
    if (!parse_double(cols[1], loc.lat) || !parse_double(cols[2], loc.lon) ||
        !parse_double(cols[3], loc.dist_road)) {
      throw ParseError(r.file, r.line_no, "non-numeric coordinate or distance");
    }
    if (!(loc.lat >= -90.0 && loc.lat <= 90.0) || !(loc.lon >= -180.0 && loc.lon <= 180.0)) {
      throw ParseError(r.file, r.line_no, "coordinates out of range");
    }
    if (!(loc.dist_road >= 0.0) || !std::isfinite(loc.dist_road)) {
      throw ParseError(r.file, r.line_no, "dist_road_m must be a nonnegative number");
    }
    if (!seen.insert(loc.id).second) throw ParseError(r.file, r.line_no, "duplicate sensor_id " + loc.id);
    locs.push_back(std::move(loc));
  }
  if (locs.empty()) throw DataError(r.file + ": no sensors");
  return locs;
}

Dataset load_dataset(const std::filesystem::path& locations_csv, const std::filesystem::path& readings_csv) {
  Dataset ds;
  ds.locations = load_locations(locations_csv);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.locations.size(); ++i) index.emplace(ds.locations[i].id, i);

  struct Reading {
    UtcHour t;
    std::size_t sensor;
    double no2;
    std::array<double, FeatureSchema::kNumCsvCovariates> cov;
  };
  std::vector<Reading> readings;
  std::set<std::pair<std::int64_t, std::size_t>> keys;

  LineReader r(readings_csv);
  if (!r.next() || trim_cr(r.line) != kReadingsHeader) {
    throw ParseError(r.file, r.line_no, std::string("expected header '") + kReadingsHeader + "'");
  }
  while (r.next()) {
    const auto line = trim_cr(r.line);
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 14) {
      throw ParseError(r.file, r.line_no, "expected 14 columns, found " + std::to_string(cols.size()));
    }
    Reading rd;
    try {
      rd.t = parse_utc_hour(cols[0]);
    } catch (const std::invalid_argument& e) {
      throw FormatError(r.file + ":" + std::to_string(r.line_no) + ": " + e.what());
    }
    const auto it = index.find(std::string(cols[1]));
    if (it == index.end()) {
      throw ReferenceError(r.file + ":" + std::to_string(r.line_no) + ": unknown sensor_id '" +
                           std::string(cols[1]) + "'");
    }
    rd.sensor = it->second;
    if (!parse_double(cols[2], rd.no2) || !std::isfinite(rd.no2)) {
      throw ParseError(r.file, r.line_no, "bad no2_ugm3 value");
    }
    for (std::size_t k = 0; k < FeatureSchema::kNumCsvCovariates; ++k) {
      if (!parse_double(cols[3 + k], rd.cov[k]) || !std::isfinite(rd.cov[k])) {
        throw ParseError(r.file, r.line_no, "bad numeric value in column " + std::to_string(4 + k));
      }
    }
    if (!keys.emplace(rd.t.hours, rd.sensor).second) {
      throw ParseError(r.file, r.line_no, "duplicate reading for sensor " + ds.locations[rd.sensor].id);
    }
    readings.push_back(rd);
  }
  if (readings.empty()) throw DataError(r.file + ": no readings");

  auto [tmin_it, tmax_it] = std::minmax_element(readings.begin(), readings.end(),
                                                [](const Reading& a, const Reading& b) { return a.t < b.t; });
  const UtcHour t0 = tmin_it->t;
  const std::size_t n_frames = static_cast<std::size_t>(tmax_it->t - t0) + 1;
  const std::size_t n = ds.n_sensors();

  ds.frames.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) ds.frames.push_back(make_empty_frame(ds.locations, t0 + i));
  for (const auto& rd : readings) {
    auto& f = ds.frames[static_cast<std::size_t>(rd.t - t0)];
    f.present[rd.sensor] = true;
    f.target_no2[rd.sensor] = rd.no2;
    auto row = f.features.row(rd.sensor);
    std::copy(rd.cov.begin(), rd.cov.end(), row.begin());
  }

  // Covariates for absent cells: carry forward, back-fill leading gaps, and
  // fall back to the per-hour mean of observed sensors for sensors with no
  // readings at all.
  std::vector<bool> has_any(n, false);
  for (std::size_t s = 0; s < n; ++s) {
    std::optional<std::size_t> last;
    std::optional<std::size_t> first;
    for (std::size_t t = 0; t < n_frames; ++t) {
      if (ds.frames[t].present[s]) {
        if (!first) first = t;
        last = t;
      } else if (last) {
        auto src = ds.frames[*last].features.row(s);
        auto dst = ds.frames[t].features.row(s);
        std::copy_n(src.begin(), FeatureSchema::kNumCsvCovariates, dst.begin());
      }
    }
    if (first) {
      has_any[s] = true;
      auto src = ds.frames[*first].features.row(s);
      for (std::size_t t = 0; t < *first; ++t) {
        std::copy_n(src.begin(), FeatureSchema::kNumCsvCovariates, ds.frames[t].features.row(s).begin());
      }
    }
  }
  std::vector<double> carry(FeatureSchema::kNumCsvCovariates, 0.0);
  for (auto& f : ds.frames) {
    std::vector<double> sum(FeatureSchema::kNumCsvCovariates, 0.0);
    std::size_t cnt = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (!f.present[s]) continue;
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += f.features(s, k);
      ++cnt;
    }
    if (cnt > 0) {
      for (std::size_t k = 0; k < sum.size(); ++k) carry[k] = sum[k] / static_cast<double>(cnt);
    }
    for (std::size_t s = 0; s < n; ++s) {
      if (has_any[s]) continue;
      std::copy(carry.begin(), carry.end(), f.features.row(s).begin());
    }
  }
  return ds;
}

void write_locations_csv(const std::vector<SensorLocation>& locations, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << kLocationsHeader << '\n';
  for (const auto& l : locations) {
    out << l.id << ',' << format_double(l.lat) << ',' << format_double(l.lon) << ','
        << format_double(l.dist_road) << '\n';
  }
}

void write_readings_csv(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.stats) throw DataError("write_readings_csv expects an unstandardized dataset");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << kReadingsHeader << '\n';
  for (const auto& f : ds.frames) {
    const std::string ts = format_utc_hour(f.timestamp);
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      if (!f.present[s]) continue;
      out << ts << ',' << ds.locations[s].id << ',' << format_double(f.target_no2[s]);
      for (std::size_t k = 0; k < FeatureSchema::kNumCsvCovariates; ++k) {
        out << ',' << format_double(f.features(s, k));
      }
      out << '\n';
    }
  }
}

StandardizationStats compute_stats(const Dataset& ds) {
  const std::size_t w = ds.schema.size();
  StandardizationStats st{std::vector<double>(w, 0.0), std::vector<double>(w, 1.0)};
  std::vector<std::size_t> count(w, 0);
  for (const auto& f : ds.frames) {
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      if (!f.present[s]) continue;
      for (std::size_t c = 0; c < w; ++c) {
        const double v = f.features(s, c);
        if (!std::isfinite(v)) continue;
        st.mean[c] += v;
        ++count[c];
      }
    }
  }
  for (std::size_t c = 0; c < w; ++c) {
    if (count[c] < 2) {
      throw DegenerateFeatureError("feature '" + ds.schema.features()[c].name + "' has " +
                                   std::to_string(count[c]) + " present observations; need at least 2");
    }
    st.mean[c] /= static_cast<double>(count[c]);
  }
  std::vector<double> ss(w, 0.0);
  for (const auto& f : ds.frames) {
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      if (!f.present[s]) continue;
      for (std::size_t c = 0; c < w; ++c) {
        const double v = f.features(s, c);
        if (!std::isfinite(v)) continue;
        const double d = v - st.mean[c];
        ss[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < w; ++c) {
    const double sd = std::sqrt(ss[c] / static_cast<double>(count[c]));
    // Relative threshold so floating-point noise on a constant column does
    // not count as variance.
    const double scale = std::max(1.0, std::abs(st.mean[c]));
    st.std[c] = sd > 1e-12 * scale ? sd : 1.0;
  }
  return st;
}

Dataset apply_stats(const Dataset& ds, const StandardizationStats& stats) {
  if (ds.stats) throw DataError("dataset is already standardized");
  if (stats.mean.size() != ds.schema.size() || stats.std.size() != ds.schema.size()) {
    throw DataError("standardization stats do not match the feature schema width");
  }
  Dataset out = ds;
  for (auto& f : out.frames) {
    for (std::size_t s = 0; s < out.n_sensors(); ++s) {
      auto row = f.features.row(s);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = stats.apply(c, row[c]);
    }
  }
  out.stats = stats;
  return out;
}

std::pair<Dataset, StandardizationStats> standardize(const Dataset& ds) {
  if (ds.stats) throw DataError("dataset is already standardized");
  auto stats = compute_stats(ds);
  return {apply_stats(ds, stats), stats};
}

Dataset inverse_standardize(const Dataset& ds) {
  if (!ds.stats) throw DataError("dataset is not standardized");
  Dataset out = ds;
  for (auto& f : out.frames) {
    for (std::size_t s = 0; s < out.n_sensors(); ++s) {
      auto row = f.features.row(s);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = ds.stats->invert(c, row[c]);
    }
  }
  out.stats.reset();
  return out;
}

Dataset fill_prev_no2(const Dataset& ds) {
  Dataset out = ds;
  const double fallback = ds.mean_no2();
  const std::size_t n = ds.n_sensors();
  const std::size_t col = FeatureSchema::kPrevNo2;
  // last_by_hour[s][h]: latest value seen for sensor s at hour-of-day h.
  std::vector<std::array<double, 24>> last_by_hour(n);
  std::vector<std::array<bool, 24>> seen(n);
  for (auto& a : seen) a.fill(false);

  for (std::size_t t = 0; t < out.frames.size(); ++t) {
    if (t > 0) {
      const auto& prev = ds.frames[t - 1];
      const int h = prev.timestamp.hour_of_day();
      for (std::size_t s = 0; s < n; ++s) {
        if (prev.present[s]) {
          last_by_hour[s][h] = prev.target_no2[s];
          seen[s][h] = true;
        }
      }
    }
    auto& f = out.frames[t];
    const int hprev = (f.timestamp + (-1)).hour_of_day();
    for (std::size_t s = 0; s < n; ++s) {
      double v = fallback;
      if (t > 0 && seen[s][hprev]) v = last_by_hour[s][hprev];
      f.features(s, col) = ds.stats ? ds.stats->apply(col, v) : v;
    }
  }
  return out;
}

double distance_to_road(const SensorLocation& loc, const std::vector<Polyline>& roads) {
  if (roads.empty()) throw std::invalid_argument("distance_to_road: empty road list");
  constexpr double kEarthRadius = 6371000.0;
  constexpr double deg = std::numbers::pi / 180.0;
  const double coslat = std::cos(loc.lat * deg);
  auto project = [&](const LatLon& p) {
    return std::pair{kEarthRadius * (p.lon - loc.lon) * deg * coslat, kEarthRadius * (p.lat - loc.lat) * deg};
  };
  double best = std::numeric_limits<double>::infinity();
  for (const auto& road : roads) {
    if (road.size() < 2) throw std::invalid_argument("distance_to_road: polyline needs at least 2 vertices");
    for (std::size_t i = 0; i + 1 < road.size(); ++i) {
      const auto [ax, ay] = project(road[i]);
      const auto [bx, by] = project(road[i + 1]);
      const double dx = bx - ax;
      const double dy = by - ay;
      const double len2 = dx * dx + dy * dy;
      double u = len2 > 0.0 ? -(ax * dx + ay * dy) / len2 : 0.0;
      u = std::clamp(u, 0.0, 1.0);
      const double px = ax + u * dx;
      const double py = ay + u * dy;
      best = std::min(best, std::hypot(px, py));
    }
  }
  return best;
}

Dataset mask_sensor(const Dataset& ds, std::size_t sensor) {
  if (sensor >= ds.n_sensors()) throw std::out_of_range("mask_sensor: bad sensor index");
  Dataset out = ds;
  for (auto& f : out.frames) {
    f.present[sensor] = false;
    f.target_no2[sensor] = kNaN;
  }
  return out;
}

Dataset slice_frames(const Dataset& ds, std::size_t first, std::size_t count) {
  if (first > ds.frames.size()) throw std::out_of_range("slice_frames: start beyond end");
  Dataset out;
  out.locations = ds.locations;
  out.schema = ds.schema;
  out.stats = ds.stats;
  const std::size_t last = std::min(ds.frames.size(), first + count);
  out.frames.assign(ds.frames.begin() + static_cast<std::ptrdiff_t>(first),
                    ds.frames.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

}  // namespace vsensor
