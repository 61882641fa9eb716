#include <cmath>
#include <random>

#include "doctest.h"
#include "sigsurv/error.hpp"
#include "sigsurv/simulate.hpp"

using namespace sigsurv;

TEST_CASE("fbm starts at zero and is seed-deterministic") {
  const auto a = fbm_paths(0.6, 50, 2.0, 3, 4, 11);
  const auto b = fbm_paths(0.6, 50, 2.0, 3, 4, 11);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    for (std::size_t j = 0; j < 3; ++j) CHECK(a[i].value(0, j) == 0.0);
  }
  CHECK(a[0].time(49) == 2.0);
  CHECK_FALSE(a[0] == a[1]);
  CHECK_THROWS_AS(FbmSampler(1.0, 10, 1.0), ValidationError);
  CHECK_THROWS_AS(FbmSampler(0.5, 1, 1.0), ValidationError);
}

TEST_CASE("brownian case has uncorrelated increments") {
  const FbmSampler s(0.5, 21, 1.0);
  double num = 0.0, den = 0.0;
  int pairs = 0;
  for (std::uint64_t i = 0; pairs < 10000; ++i) {
    const auto p = s.sample(1, i);
    for (std::size_t k = 1; k + 1 < p.size() && pairs < 10000; k += 2) {
      const double a = p.value(k, 0) - p.value(k - 1, 0);
      const double b = p.value(k + 1, 0) - p.value(k, 0);
      num += a * b;
      den += 0.5 * (a * a + b * b);
      ++pairs;
    }
  }
  CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("fbm variance follows t^{2H}") {
  const double h = 0.6;
  const FbmSampler s(h, 11, 2.0);  // t = 1 is grid index 5
  double sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto p = s.sample(1, derived_seed(3, static_cast<std::uint64_t>(i), 9));
    sq += p.value(5, 0) * p.value(5, 0);
  }
  CHECK(std::abs(sq / n - 1.0) < 0.05);
  double sq2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto p = s.sample(1, derived_seed(4, static_cast<std::uint64_t>(i), 9));
    sq2 += p.value(10, 0) * p.value(10, 0);
  }
  CHECK(std::abs(sq2 / n / std::pow(2.0, 2 * h) - 1.0) < 0.05);
}

TEST_CASE("deterministic OU stays below the threshold") {
  OUConfig cfg;
  cfg.sigma = 0.0;
  cfg.grid_points = 101;
  std::vector<double> grid(101);
  for (int k = 0; k <= 100; ++k) grid[static_cast<std::size_t>(k)] = 0.1 * k;
  const SampledPath zero(grid, std::vector<double>(101 * 4, 0.0), 4);
  const std::vector<double> xi(100, 1.0);
  const auto w = ou_trajectory(cfg, zero, xi);
  CHECK(first_crossing(w, cfg.threshold) == w.size());
  for (double v : w) CHECK(v <= cfg.mu + 1e-12);
  CHECK(w.back() > 0.0);
}

TEST_CASE("OU dataset shape") {
  OUConfig cfg;
  cfg.n = 30;
  cfg.grid_points = 200;
  cfg.seed = 2;
  const auto sim = ou_hitting_dataset(cfg);
  CHECK(sim.data.size() == 30);
  CHECK(sim.data.raw_channels() == 4);
  sim.data.validate();
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const auto& r = sim.data.records[i];
    CHECK(r.event_time > 0.0);
    if (!r.event) {
      CHECK(r.event_time == cfg.horizon);
    } else {
      CHECK(r.path.last_time() < r.event_time);
      CHECK(sim.hidden[i].back() >= cfg.threshold);
    }
  }
  const auto again = ou_hitting_dataset(cfg);
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    CHECK(again.data.records[i].path == sim.data.records[i].path);
    CHECK(again.data.records[i].event_time == sim.data.records[i].event_time);
  }
}

TEST_CASE("tumor crossing is stable under step refinement") {
  TumorConfig cfg;
  auto grid = [](int points) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) g[static_cast<std::size_t>(k)] = 10.0 * k / (points - 1);
    return g;
  };
  const auto coarse = grid(1001);
  const auto fine = grid(10001);
  const auto wc = tumor_trajectory(cfg, coarse, std::vector<double>(coarse.size(), 0.0));
  const auto wf = tumor_trajectory(cfg, fine, std::vector<double>(fine.size(), 0.0));
  const auto kc = first_crossing(wc, cfg.threshold);
  const auto kf = first_crossing(wf, cfg.threshold);
  REQUIRE(kc < wc.size());
  REQUIRE(kf < wf.size());
  CHECK(std::abs(coarse[kc] - fine[kf]) <= 0.01 + 1e-12);
}

TEST_CASE("tumor states stay nonnegative") {
  TumorConfig cfg;
  cfg.n = 20;
  cfg.grid_points = 300;
  cfg.seed = 5;
  const auto sim = tumor_growth_dataset(cfg);
  CHECK(sim.data.raw_channels() == 1);
  for (const auto& w : sim.hidden)
    for (double v : w) CHECK(v >= 0.0);
  for (const auto& r : sim.data.records)
    for (double v : r.path.values()) CHECK(v >= 0.0);
}

namespace {

std::vector<SampledPath> flat_drivers(std::size_t n) {
  return std::vector<SampledPath>(n, SampledPath({0.0}, {0.0}, 1));
}

}  // namespace

TEST_CASE("thinning with a constant intensity is exponential") {
  const double c = 0.7, tau = 3.0;
  auto truth = CoxSigParams::zeros(2, 2, 0, false);
  truth.alpha[0] = 0.0;
  // constant log-intensity through an all-ones static
  truth.beta = {std::log(c)};
  const std::size_t n = 4000;
  const std::vector<std::vector<double>> w(n, std::vector<double>{1.0});
  const Dataset data = simulate_from_intensity(truth, flat_drivers(n), w, tau, 8);
  for (double t : {0.5, 1.0, 2.0}) {
    double surv = 0.0;
    for (const auto& r : data.records) surv += r.event_time > t;
    surv /= static_cast<double>(n);
    const double p = std::exp(-c * t);
    CHECK(std::abs(surv - p) < 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)));
  }
  for (const auto& r : data.records) {
    CHECK(r.event_time > 0.0);
    if (!r.event) CHECK(r.event_time == tau);
  }
  const Dataset again = simulate_from_intensity(truth, flat_drivers(n), w, tau, 8);
  for (std::size_t i = 0; i < n; ++i) CHECK(again.records[i].event_time == data.records[i].event_time);
}

TEST_CASE("thinning with a tiny intensity censors everyone") {
  auto truth = CoxSigParams::zeros(2, 2, 0, false);
  truth.beta = {-40.0};
  const std::vector<std::vector<double>> w(200, std::vector<double>{1.0});
  const Dataset data = simulate_from_intensity(truth, flat_drivers(200), w, 5.0, 1);
  for (const auto& r : data.records) {
    CHECK_FALSE(r.event);
    CHECK(r.event_time == 5.0);
  }
}

TEST_CASE("thinned paths are cut at the event") {
  auto drivers = fbm_paths(0.6, 101, 5.0, 2, 50, 4);
  auto truth = CoxSigParams::zeros(3, 2, 0, false);
  truth.alpha[0] = 0.5;
  truth.alpha[2] = 0.2;
  const Dataset data = simulate_from_intensity(truth, drivers, {}, 5.0, 6);
  data.validate();
  for (const auto& r : data.records) CHECK(r.path.last_time() <= r.event_time);
}

TEST_CASE("thinning generator shares its truth across seeds") {
  ThinningConfig cfg;
  cfg.n = 100;
  cfg.seed = 1;
  const auto truth = thinning_truth(cfg);
  cfg.seed = 2;
  CHECK(thinning_truth(cfg).alpha == truth.alpha);
  const auto sim = thinning_dataset(cfg, truth);
  sim.data.validate();
  CHECK(sim.data.static_count() == 1);
  const double cens = sim.data.censoring_rate();
  CHECK(cens > 0.0);
  CHECK(cens < 0.9);
  MESSAGE("thinning censoring " << cens << ", mean obs " << sim.data.mean_observation_count());
}
