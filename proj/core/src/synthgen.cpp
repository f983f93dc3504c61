#include "vsensor/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

#include "vsensor/geograph.hpp"

namespace vsensor {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Saturation vapour pressure in kPa (Tetens).
double sat_vp_kpa(double t_c) { return 0.6108 * std::exp(17.27 * t_c / (t_c + 237.3)); }

double bump(double h, double centre, double width) {
  double d = std::fabs(h - centre);
  d = std::min(d, 24.0 - d);
  return std::exp(-0.5 * d * d / (width * width));
}

// Morning and evening rush hours; weekends lose most of the morning peak.
// Scaled so the weekday peak sits 1 above the weekday daily mean.
double traffic_profile(double h, bool weekend) {
  static const auto norm = [] {
    double mean = 0.0, peak = 0.0;
    for (int k = 0; k < 24; ++k) {
      const double v = bump(k, 8, 2) + 1.2 * bump(k, 18, 2.5);
      mean += v / 24.0;
      peak = std::max(peak, v);
    }
    return std::pair{mean, peak - mean};
  }();
  const double v = (weekend ? 0.3 : 1.0) * bump(h, 8, 2) + (weekend ? 0.9 : 1.2) * bump(h, 18, 2.5);
  return (v - norm.first) / norm.second;
}

// Stationary AR(1) with the given coefficient and marginal std.
class Ar1 {
 public:
  Ar1(double phi, double sd, std::mt19937_64& rng) : phi_(phi), sd_(sd), rng_(rng) {
    x_ = sd_ * n_(rng_);
  }
  double next() {
    x_ = phi_ * x_ + sd_ * std::sqrt(1.0 - phi_ * phi_) * n_(rng_);
    return x_;
  }

 private:
  double phi_, sd_, x_ = 0.0;
  std::mt19937_64& rng_;
  std::normal_distribution<double> n_;
};

}  // namespace

void CityConfig::validate() const {
  if (n_sensors < 2) throw std::invalid_argument("CityConfig: need at least 2 sensors");
  if (n_hours < 1) throw std::invalid_argument("CityConfig: n_hours must be >= 1");
  if (!(bbox.lat_max > bbox.lat_min) || !(bbox.lon_max > bbox.lon_min)) {
    throw std::invalid_argument("CityConfig: degenerate bounding box");
  }
  if (bbox.lat_min < -90 || bbox.lat_max > 90 || bbox.lon_min < -180 || bbox.lon_max > 180) {
    throw std::invalid_argument("CityConfig: bounding box outside WGS84 range");
  }
  if (!(lag1 > 0.0 && lag1 < 1.0)) throw std::invalid_argument("CityConfig: lag1 must lie in (0, 1)");
  if (!(length_scale_m > 0.0)) throw std::invalid_argument("CityConfig: length scale must be positive");
  if (diurnal_amplitude < 0 || base < 0 || noise_std < 0 || field_std < 0 || met_effect < 0) {
    throw std::invalid_argument("CityConfig: amplitudes and scales must be nonnegative");
  }
  if (!(scale_spread >= 0.0 && scale_spread < 1.0)) throw std::invalid_argument("CityConfig: scale_spread in [0, 1)");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw std::invalid_argument("CityConfig: missing_rate in [0, 1)");
}

CityConfig source_city_preset(std::uint64_t seed, std::size_t n_hours) {
  CityConfig c;
  c.n_sensors = 60;
  c.n_hours = n_hours;
  c.bbox = {51.43, 51.565, -0.235, -0.019};
  c.base = 40.0;
  c.n_roads = 8;
  c.seed = seed ^ 0x10d0c1715eedULL;
  return c;
}

std::vector<double> cholesky(std::span<const double> a, std::size_t n) {
  if (a.size() != n * n) throw std::invalid_argument("cholesky: matrix size mismatch");
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw std::invalid_argument("cholesky: matrix is not positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  return l;
}

double lag_autocorr(std::span<const double> x, std::size_t lag) {
  if (x.size() <= lag + 1) throw std::invalid_argument("lag_autocorr: series too short for the lag");
  const std::size_t n = x.size() - lag;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += x[i];
    mb += x[i + lag];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i] - ma, b = x[i + lag] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw std::invalid_argument("lag_autocorr: zero variance");
  return sab / std::sqrt(saa * sbb);
}

SyntheticCity generate_city_detailed(const CityConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;
  const auto& bb = cfg.bbox;
  const std::size_t n = cfg.n_sensors;

  SyntheticCity city;
  // Roads: polylines crossing the box, alternately west-east and south-north.
  for (std::size_t r = 0; r < std::max<std::size_t>(cfg.n_roads, 1); ++r) {
    Polyline line;
    const std::size_t verts = 3;
    for (std::size_t v = 0; v < verts; ++v) {
      const double along = static_cast<double>(v) / (verts - 1);
      const double across = u01(rng);
      if (r % 2 == 0) {
        line.push_back({bb.lat_min + across * (bb.lat_max - bb.lat_min), bb.lon_min + along * (bb.lon_max - bb.lon_min)});
      } else {
        line.push_back({bb.lat_min + along * (bb.lat_max - bb.lat_min), bb.lon_min + across * (bb.lon_max - bb.lon_min)});
      }
    }
    city.roads.push_back(std::move(line));
  }

  auto& locs = city.dataset.locations;
  const int width = n < 100 ? 2 : (n < 1000 ? 3 : 6);
  for (std::size_t s = 0; s < n; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "S%0*zu", width, s + 1);
    SensorLocation loc{id, bb.lat_min + u01(rng) * (bb.lat_max - bb.lat_min),
                       bb.lon_min + u01(rng) * (bb.lon_max - bb.lon_min), 0.0};
    loc.dist_road = distance_to_road(loc, city.roads);
    locs.push_back(loc);
    city.sensor_scale.push_back(1.0 + cfg.scale_spread * (2.0 * std::exp(-loc.dist_road / 1000.0) - 1.0));
  }

  // Squared-exponential covariance over haversine distances.
  std::vector<double> chol;
  if (cfg.field_std > 0.0) {
    std::vector<double> k(n * n);
    const double var = cfg.field_std * cfg.field_std;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = haversine(locs[i].position(), locs[j].position()) / cfg.length_scale_m;
        k[i * n + j] = var * std::exp(-0.5 * d * d) + (i == j ? 1e-6 * var : 0.0);
      }
    }
    chol = cholesky(k, n);
  }

  // City-wide weather processes.
  Ar1 wind_ar(0.98, 2.5, rng), dir_ar(0.99, 60.0, rng), temp_ar(0.98, 2.0, rng), dew_ar(0.95, 1.0, rng),
      press_ar(0.995, 800.0, rng), cloud_ar(0.95, 30.0, rng), aerosol_ar(0.9, 0.5, rng);

  const double rho = cfg.lag1;
  std::vector<double> field(n, 0.0), z(n);
  auto draw_field = [&](double keep, double innov) {
    for (auto& v : z) v = n01(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += chol[i * n + k] * z[k];
      field[i] = keep * field[i] + innov * s;
    }
  };

  auto& frames = city.dataset.frames;
  frames.reserve(cfg.n_hours);
  std::vector<double> truth(cfg.n_hours * n);
  double aerosol_today = 0.0;
  for (std::size_t t = 0; t < cfg.n_hours; ++t) {
    const UtcHour ts{cfg.start.hours + static_cast<std::int64_t>(t)};
    HourlyFrame f = make_empty_frame(locs, ts);
    const double h = ts.hour_of_day();
    const double doy = ts.day_of_year();

    if (!chol.empty()) {
      if (t == 0) {
        draw_field(0.0, 1.0);
      } else {
        draw_field(rho, std::sqrt(1.0 - rho * rho));
      }
    }
    const double wind_c = std::max(0.3, 4.0 + 0.8 * std::sin(kTwoPi * (h - 9.0) / 24.0) + wind_ar.next());
    const double dir_c = std::fmod(240.0 + dir_ar.next() + 720.0, 360.0);
    const double temp_c = 10.0 + 6.0 * std::sin(kTwoPi * (doy - 110.0) / 365.0) +
                          4.0 * std::cos(kTwoPi * (h - 15.0) / 24.0) + temp_ar.next();
    const double dew_dep = 2.0 + 1.5 * std::max(0.0, std::cos(kTwoPi * (h - 15.0) / 24.0)) + std::abs(dew_ar.next());
    const double press_c = 101325.0 + press_ar.next();
    const double cloud_c = std::clamp(55.0 + cloud_ar.next(), 0.0, 100.0);
    if (h == 0 || t == 0) aerosol_today = aerosol_ar.next();

    const int dow = ts.day_of_week();
    const double weekly = dow >= 5 ? -0.25 : 0.1;
    const double diurnal = cfg.diurnal_amplitude * traffic_profile(h, dow >= 5);

    for (std::size_t s = 0; s < n; ++s) {
      auto row = f.features.row(s);
      const double wind = std::max(0.1, wind_c + 0.2 * n01(rng));
      const double temp = temp_c + 0.3 * n01(rng);
      const double dew = temp - dew_dep;
      const double rh = std::clamp(100.0 * sat_vp_kpa(dew) / sat_vp_kpa(temp), 0.0, 100.0);
      row[2] = wind;
      row[3] = wind * 1.5 + std::abs(0.5 * n01(rng));
      row[4] = std::fmod(dir_c + 5.0 * n01(rng) + 360.0, 360.0);
      row[5] = sat_vp_kpa(temp) * (1.0 - rh / 100.0);
      row[6] = temp;
      row[7] = press_c + 20.0 * n01(rng);
      row[8] = rh;
      row[9] = dew;
      row[10] = std::clamp(cloud_c + 3.0 * n01(rng), 0.0, 100.0);
      row[1] = aerosol_today;

      const double met = cfg.met_effect * (-5.0 * (wind - 4.0) - 1.0 * (temp - 10.0));
      double y = city.sensor_scale[s] * (cfg.base + diurnal + weekly * cfg.diurnal_amplitude) + field[s] + met +
                 cfg.noise_std * n01(rng);
      y = std::max(0.0, y);
      truth[t * n + s] = y;
      const bool drop = cfg.missing_rate > 0.0 && u01(rng) < cfg.missing_rate;
      if (!drop) {
        f.target_no2[s] = y;
        f.present[s] = true;
      }
    }
    frames.push_back(std::move(f));
  }

  // Satellite column: daily mean of the true level, constant within the UTC day.
  std::size_t day_start = 0;
  while (day_start < frames.size()) {
    std::size_t day_end = day_start + 1;
    while (day_end < frames.size() && frames[day_end].timestamp.day_index() == frames[day_start].timestamp.day_index()) {
      ++day_end;
    }
    for (std::size_t s = 0; s < n; ++s) {
      double m = 0.0;
      for (std::size_t t = day_start; t < day_end; ++t) m += truth[t * n + s];
      m /= static_cast<double>(day_end - day_start);
      const double col = std::max(0.0, m * 2e-6 + 5e-6 * n01(rng));
      for (std::size_t t = day_start; t < day_end; ++t) frames[t].features(s, FeatureSchema::kSatNo2) = col;
    }
    day_start = day_end;
  }
  return city;
}

Dataset generate_city(const CityConfig& cfg) { return generate_city_detailed(cfg).dataset; }

void write_city(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_locations_csv(ds.locations, dir / "locations.csv");
  write_readings_csv(ds, dir / "readings.csv");
}

}  // namespace vsensor
