#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "sigsurv/timeseries.hpp"

namespace testutil {

inline sigsurv::SampledPath random_path(std::mt19937_64& rng, std::size_t k, std::size_t channels,
                                        double scale = 1.0) {
  std::uniform_real_distribution<double> gap(0.05, 0.5);
  std::normal_distribution<double> val(0.0, scale);
  std::vector<double> times{0.0};
  while (times.size() < k) times.push_back(times.back() + gap(rng));
  std::vector<double> values(k * channels);
  for (double& v : values) v = val(rng);
  return sigsurv::SampledPath(std::move(times), std::move(values), channels);
}

inline sigsurv::SurvivalRecord make_record(sigsurv::SampledPath p, double t, bool event,
                                           std::vector<double> statics = {}) {
  sigsurv::SurvivalRecord r;
  r.path = std::move(p);
  r.event_time = t;
  r.event = event;
  r.statics = std::move(statics);
  return r;
}

// Records with 2..6 observations and roughly 30% censoring.
inline sigsurv::Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t channels,
                                       std::size_t statics) {
  sigsurv::Dataset data;
  data.feature_names = sigsurv::default_names("f", channels);
  data.static_names = sigsurv::default_names("stat", statics);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = random_path(rng, 2 + i % 5, channels, 0.5);
    std::vector<double> w(statics);
    for (double& v : w) v = g(rng);
    const double t = p.last_time() + u(rng);
    data.records.push_back(make_record(std::move(p), t, u(rng) < 0.7, w));
    data.horizon = std::max(data.horizon, t);
  }
  return data;
}

}  // namespace testutil
