#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "vsensor/geograph.hpp"
#include "vsensor/synthgen.hpp"

using namespace vsensor;

namespace {

std::vector<double> sensor_series(const Dataset& ds, std::size_t s) {
  std::vector<double> out;
  for (const auto& f : ds.frames) out.push_back(f.target_no2[s]);
  return out;
}

// Two-pass Pearson correlation, written independently of lag_autocorr.
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

std::uint64_t frame_hash(const HourlyFrame& f) {
  std::string bytes(reinterpret_cast<const char*>(f.target_no2.data()), f.target_no2.size() * sizeof(double));
  return fnv1a64(bytes);
}

}  // namespace

TEST(Synth, AllStochasticTermsOffGivesConstantBase) {
  CityConfig c;
  c.n_hours = 300;
  c.noise_std = 0;
  c.diurnal_amplitude = 0;
  c.scale_spread = 0;
  c.field_std = 0;
  c.met_effect = 0;
  const Dataset ds = generate_city(c);
  for (const auto& f : ds.frames) {
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) EXPECT_DOUBLE_EQ(f.target_no2[s], c.base);
  }
}

TEST(Synth, SameSeedIdentical) {
  CityConfig c;
  c.n_hours = 200;
  c.seed = 9;
  const Dataset a = generate_city(c), b = generate_city(c);
  ASSERT_EQ(a.n_frames(), b.n_frames());
  for (std::size_t t = 0; t < a.n_frames(); ++t) {
    // Raw frames carry NaN in the autoregressive slot, so compare bit patterns.
    const auto va = a.frames[t].features.values(), vb = b.frames[t].features.values();
    ASSERT_EQ(va.size(), vb.size());
    EXPECT_EQ(std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)), 0);
    EXPECT_EQ(a.frames[t].target_no2, b.frames[t].target_no2);
  }
}

TEST(Synth, DifferentSeedsShareNoFrame) {
  CityConfig c;
  c.n_hours = 500;
  c.seed = 1;
  const Dataset a = generate_city(c);
  c.seed = 2;
  const Dataset b = generate_city(c);
  std::set<std::uint64_t> ha;
  for (const auto& f : a.frames) ha.insert(frame_hash(f));
  for (const auto& f : b.frames) EXPECT_EQ(ha.count(frame_hash(f)), 0u);
}

TEST(Synth, DefaultLagOneAutocorrelationInBand) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    CityConfig c;
    c.n_hours = 5000;
    c.seed = seed;
    const Dataset ds = generate_city(c);
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      const auto x = sensor_series(ds, s);
      const double r = pearson({x.begin(), x.end() - 1}, {x.begin() + 1, x.end()});
      EXPECT_GE(r, 0.85) << "seed " << seed << " sensor " << s;
      EXPECT_LE(r, 0.98) << "seed " << seed << " sensor " << s;
      EXPECT_NEAR(lag_autocorr(x, 1), r, 1e-9);
    }
  }
}

TEST(Synth, NonNegativeAndSatelliteDailyConstant) {
  CityConfig c;
  c.n_hours = 24 * 10 + 7;
  c.start = make_utc_hour(2020, 2, 28, 5);
  c.base = 5;  // pushes some values to the clip
  const Dataset ds = generate_city(c);
  bool clipped = false;
  for (std::size_t t = 0; t < ds.n_frames(); ++t) {
    const auto& f = ds.frames[t];
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      EXPECT_GE(f.target_no2[s], 0.0);
      clipped |= f.target_no2[s] == 0.0;
      if (t > 0 && f.timestamp.day_index() == ds.frames[t - 1].timestamp.day_index()) {
        EXPECT_EQ(f.features(s, FeatureSchema::kSatNo2), ds.frames[t - 1].features(s, FeatureSchema::kSatNo2));
      }
    }
  }
  EXPECT_TRUE(clipped);
}

TEST(Synth, WindNegativelyCorrelatedWithNo2) {
  CityConfig c;
  c.n_hours = 3000;
  const Dataset ds = generate_city(c);
  std::vector<double> wind, no2;
  for (const auto& f : ds.frames) {
    for (std::size_t s = 0; s < ds.n_sensors(); ++s) {
      wind.push_back(f.features(s, FeatureSchema::kFirstMet));
      no2.push_back(f.target_no2[s]);
    }
  }
  EXPECT_LT(pearson(wind, no2), -0.1);
}

TEST(Synth, LocationsInBoxRoadDistancesAndIds) {
  CityConfig c;
  c.n_sensors = 12;
  c.n_hours = 5;
  const SyntheticCity city = generate_city_detailed(c);
  const auto& ds = city.dataset;
  EXPECT_EQ(ds.locations.front().id, "S01");
  EXPECT_EQ(ds.locations.back().id, "S12");
  for (const auto& l : ds.locations) {
    EXPECT_GE(l.lat, c.bbox.lat_min);
    EXPECT_LE(l.lat, c.bbox.lat_max);
    EXPECT_GE(l.lon, c.bbox.lon_min);
    EXPECT_LE(l.lon, c.bbox.lon_max);
    EXPECT_DOUBLE_EQ(l.dist_road, distance_to_road(l, city.roads));
  }
  for (double s : city.sensor_scale) {
    EXPECT_GE(s, 1 - c.scale_spread);
    EXPECT_LE(s, 1 + c.scale_spread);
  }
}

TEST(Synth, MissingRateDropsReadings) {
  CityConfig c;
  c.n_hours = 1000;
  c.missing_rate = 0.2;
  const Dataset ds = generate_city(c);
  std::size_t absent = 0;
  for (const auto& f : ds.frames) {
    for (bool p : f.present) absent += !p;
  }
  const double rate = static_cast<double>(absent) / (1000.0 * c.n_sensors);
  EXPECT_NEAR(rate, 0.2, 0.03);
}

TEST(Synth, SourcePresetIsLargerAndDirtier) {
  const CityConfig src = source_city_preset(0, 200);
  EXPECT_EQ(src.n_sensors, 60u);
  EXPECT_GT(src.base, CityConfig{}.base);
  EXPECT_NE(src.seed, 0u);
  const Dataset ds = generate_city(src);
  EXPECT_EQ(ds.n_sensors(), 60u);
}

TEST(Synth, DegenerateConfigRejected) {
  CityConfig c;
  c.bbox.lat_max = c.bbox.lat_min;
  EXPECT_THROW(generate_city(c), std::invalid_argument);
  c = CityConfig{};
  c.lag1 = 1.0;
  EXPECT_THROW(generate_city(c), std::invalid_argument);
}

TEST(LagAutocorr, Examples) {
  std::vector<double> periodic;
  for (int i = 0; i < 240; ++i) periodic.push_back(std::sin(2 * 3.141592653589793 * i / 24.0));
  EXPECT_NEAR(lag_autocorr(periodic, 24), 1.0, 1e-12);

  std::vector<double> ramp;
  for (int i = 0; i < 50; ++i) ramp.push_back(i * 0.5);
  EXPECT_NEAR(lag_autocorr(ramp, 1), 1.0, 1e-12);

  Rng rng(123);
  std::normal_distribution<double> n01;
  std::vector<double> noise(100000);
  for (double& v : noise) v = n01(rng);
  EXPECT_LT(std::abs(lag_autocorr(noise, 1)), 0.02);

  EXPECT_THROW(lag_autocorr(std::vector<double>{1, 2}, 1), std::invalid_argument);
  EXPECT_THROW(lag_autocorr(std::vector<double>(10, 3.0), 1), std::invalid_argument);
}

TEST(Cholesky, ReconstructsAndRejects) {
  const std::vector<double> a{4, 2, 0.6, 2, 2, 0.5, 0.6, 0.5, 3};
  const auto l = cholesky(a, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += l[i * 3 + k] * l[j * 3 + k];
      EXPECT_NEAR(s, a[i * 3 + j], 1e-12);
    }
  }
  EXPECT_THROW(cholesky(std::vector<double>{1, 2, 2, 1}, 2), std::invalid_argument);
}
