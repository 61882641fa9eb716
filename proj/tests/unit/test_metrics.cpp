#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "sigsurv/error.hpp"
#include "sigsurv/metrics.hpp"

using namespace sigsurv;

namespace {

Dataset survival(std::vector<double> t, std::vector<int> e) {
  Dataset d;
  d.feature_names = {"f1"};
  for (std::size_t i = 0; i < t.size(); ++i) {
    d.records.push_back(testutil::make_record(SampledPath({0.0}, {0.0}, 1), t[i], e[i] == 1));
    d.horizon = std::max(d.horizon, t[i]);
  }
  return d;
}

// Brute-force oracles, written directly from the displayed sums.
double km_oracle(const Dataset& d, double s) {
  std::set<double> cens;
  for (const auto& r : d.records)
    if (!r.event && r.event_time <= s) cens.insert(r.event_time);
  double g = 1.0;
  for (double c : cens) {
    double n = 0, m = 0;
    for (const auto& r : d.records) {
      if (r.event_time >= c) n += 1;
      if (r.event_time == c && !r.event) m += 1;
    }
    g *= (n - m) / n;
  }
  return g;
}

std::optional<double> cindex_oracle(const std::vector<double>& r, const Dataset& d, EvalPoint ep) {
  double num = 0, den = 0;
  for (std::size_t j = 0; j < d.size(); ++j)
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& a = d.records[i];
      const auto& b = d.records[j];
      const double ind = (a.event_time > b.event_time && b.event_time >= ep.t &&
                          b.event_time <= ep.t + ep.dt && b.event) ? 1.0 : 0.0;
      num += (r[i] > r[j] ? 1.0 : 0.0) * ind;
      den += ind;
    }
  if (den == 0) return std::nullopt;
  return num / den;
}

double brier_oracle(const std::vector<double>& r, const Dataset& d, EvalPoint ep) {
  double a = 0, b = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& x = d.records[i];
    a += (x.event_time <= ep.t + ep.dt && x.event) ? r[i] * r[i] : 0.0;
    b += (x.event_time > ep.t + ep.dt) ? (1 - r[i]) * (1 - r[i]) : 0.0;
  }
  return (a + b) / d.size();
}

double wbs_oracle(const std::vector<double>& r, const Dataset& d, EvalPoint ep) {
  double s = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& x = d.records[i];
    if (x.event_time <= ep.t && x.event) s += r[i] * r[i] / km_oracle(d, x.event_time);
    if (x.event_time >= ep.t) s += (1 - r[i]) * (1 - r[i]) / km_oracle(d, ep.t);
  }
  return s / d.size();
}

std::optional<double> auc_oracle(const std::vector<double>& r, const Dataset& d, EvalPoint ep) {
  auto w = [&](std::size_t i) {
    return d.records[i].event ? 1.0 / km_oracle(d, d.records[i].event_time) : 0.0;
  };
  auto inwin = [&](std::size_t i) {
    return d.records[i].event_time >= ep.t && d.records[i].event_time <= ep.t + ep.dt;
  };
  double num = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    a += d.records[i].event_time > ep.t + ep.dt ? 1.0 : 0.0;
    b += inwin(i) ? w(i) : 0.0;
    for (std::size_t j = 0; j < d.size(); ++j)
      num += (r[i] > r[j] && d.records[i].event_time > ep.t + ep.dt && inwin(j)) ? w(j) : 0.0;
  }
  if (a == 0 || b == 0) return std::nullopt;
  return num / (a * b);
}

}  // namespace

TEST_CASE("censoring Kaplan-Meier") {
  auto none = survival({1, 2, 3}, {1, 1, 1});
  auto g0 = CensoringKM::fit(none);
  for (double s : {0.0, 1.5, 10.0}) CHECK(g0(s) == 1.0);
  auto d = survival({1, 2, 3}, {1, 0, 1});
  auto g = CensoringKM::fit(d);
  CHECK(g(1.99) == 1.0);
  CHECK(g(2.0) == 0.5);
  CHECK(g(5.0) == 0.5);
  auto big = survival({0.5, 1, 1, 2, 2.5, 3}, {0, 0, 1, 0, 0, 1});
  auto gb = CensoringKM::fit(big);
  double prev = 1.0;
  for (double s = 0.0; s < 4.0; s += 0.25) {
    CHECK(gb(s) == km_oracle(big, s));
    CHECK(gb(s) <= prev);
    prev = gb(s);
  }
}

TEST_CASE("c-index hand cases") {
  auto d = survival({1, 2, 3}, {1, 1, 1});
  EvalPoint ep{0.0, 10.0};
  CHECK(*c_index(std::vector<double>{0.1, 0.5, 0.9}, d, ep) == 1.0);
  CHECK(*c_index(std::vector<double>{0.9, 0.5, 0.1}, d, ep) == 0.0);
  CHECK(*c_index(std::vector<double>{std::exp(0.1), std::exp(0.5), std::exp(0.9)}, d, ep) == 1.0);
  auto cens = survival({1, 2}, {0, 0});
  CHECK_FALSE(c_index(std::vector<double>{0.1, 0.2}, cens, ep).has_value());
  // ties are not concordant
  CHECK(*c_index(std::vector<double>{0.5, 0.5, 0.5}, d, ep) == 0.0);
}

TEST_CASE("brier hand cases") {
  auto d = survival({1, 2, 5, 6}, {1, 1, 0, 1});
  EvalPoint ep{0.0, 3.0};
  CHECK(brier(std::vector<double>{0, 0, 1, 1}, d, ep) == 0.0);
  CHECK(brier(std::vector<double>{0.5, 0.5, 0.5, 0.5}, d, ep) == doctest::Approx(0.25));
  auto c = survival({1, 5}, {0, 0});
  // a censored-in-window record contributes nothing
  CHECK(brier(std::vector<double>{0.3, 1.0}, c, ep) == 0.0);
}

TEST_CASE("weighted brier hand case") {
  // G = 0.5 after the censoring at 2; survivor term at t = 3 is doubled
  auto d = survival({1, 2, 4}, {1, 0, 1});
  auto g = CensoringKM::fit(d);
  EvalPoint ep{3.0, 1.0};
  std::vector<double> r{0.2, 0.4, 0.6};
  const double expect = (0.2 * 0.2 / 1.0 + 0.4 * 0.4 / 1.0 * 0.0 + 0.4 * 0.4 / 0.5) / 3.0;
  CHECK(weighted_brier(r, d, ep, g) == doctest::Approx(expect));
  auto none = survival({1, 2, 4}, {1, 1, 1});
  auto g1 = CensoringKM::fit(none);
  CHECK(weighted_brier(r, none, EvalPoint{3.0, 1.0}, g1) >= 0.0);
}

TEST_CASE("auc hand cases") {
  auto d = survival({1, 2, 5, 6}, {1, 1, 0, 1});
  auto g = CensoringKM::fit(d);
  EvalPoint ep{0.0, 3.0};
  CHECK(*auc_td(std::vector<double>{0.1, 0.2, 0.8, 0.9}, d, ep, g) == 1.0);
  CHECK(*auc_td(std::vector<double>{0.9, 0.8, 0.1, 0.2}, d, ep, g) == 0.0);
  CHECK_FALSE(auc_td(std::vector<double>{0.1, 0.2, 0.8, 0.9}, d, EvalPoint{10.0, 1.0}, g).has_value());
}

TEST_CASE("oracle equivalence on small random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> tick(1, 6);
  std::uniform_int_distribution<int> flag(0, 1);
  std::uniform_int_distribution<int> level(0, 4);
  int checked = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rep % 5;
    std::vector<double> t(n), r(n);
    std::vector<int> e(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = tick(rng) * 0.5;
      e[i] = flag(rng);
      r[i] = level(rng) * 0.25;  // coarse values force ties
    }
    auto d = survival(t, e);
    auto g = CensoringKM::fit(d);
    EvalPoint ep{tick(rng) * 0.25, tick(rng) * 0.5};
    bool zero_weight = false;
    for (const auto& x : d.records)
      if (km_oracle(d, x.event_time) == 0.0 || km_oracle(d, ep.t) == 0.0) zero_weight = true;
    CHECK(c_index(r, d, ep) == cindex_oracle(r, d, ep));
    CHECK(brier(r, d, ep) == brier_oracle(r, d, ep));
    if (!zero_weight) {
      CHECK(weighted_brier(r, d, ep, g) == doctest::Approx(wbs_oracle(r, d, ep)).epsilon(1e-15));
      auto a = auc_td(r, d, ep, g);
      auto b = auc_oracle(r, d, ep);
      CHECK(a.has_value() == b.has_value());
      if (a && b) CHECK(*a == doctest::Approx(*b).epsilon(1e-15));
      ++checked;
    }
    for (double s : {0.0, 0.5, 1.0, 1.75, 3.0}) CHECK(g(s) == km_oracle(d, s));
  }
  CHECK(checked > 100);
}

TEST_CASE("rank metrics ignore monotone transforms") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.feature_names = {"f1"};
  for (int i = 0; i < 40; ++i) {
    d.records.push_back(testutil::make_record(SampledPath({0.0}, {0.0}, 1), 0.1 + 5 * u(rng), u(rng) < 0.7));
    d.horizon = std::max(d.horizon, d.records.back().event_time);
  }
  auto g = CensoringKM::fit(d);
  std::vector<double> r(40), s(40);
  for (int i = 0; i < 40; ++i) {
    r[i] = u(rng);
    s[i] = std::log(r[i]) * 3 + 1;
  }
  EvalPoint ep{1.0, 2.0};
  CHECK(*c_index(r, d, ep) == *c_index(s, d, ep));
  CHECK(*auc_td(r, d, ep, g) == *auc_td(s, d, ep, g));
}

TEST_CASE("constant predictor brier minimized at empirical survival fraction") {
  auto d = survival({1, 2, 3, 5, 6, 7, 8}, {1, 1, 1, 0, 1, 1, 0});
  EvalPoint ep{0.0, 4.0};
  // in-window events 3, survivors 4 -> best constant = 4/7
  double best = 1e9, arg = -1;
  for (int k = 0; k <= 700; ++k) {
    const double p = k / 700.0;
    const double b = brier(std::vector<double>(7, p), d, ep);
    if (b < best) {
      best = b;
      arg = p;
    }
  }
  CHECK(arg == doctest::Approx(4.0 / 7.0).epsilon(2e-3));
}

TEST_CASE("averaging") {
  auto grid = averaging_grid(1.0, 2.0, 10);
  CHECK(grid.front() == 1.0);
  CHECK(grid.back() == doctest::Approx(1.9));
  CHECK(averaged_metric([](double) { return std::optional<double>(0.7); }, 0, 1).value == doctest::Approx(0.7));
  CHECK(*averaged_metric([](double t) { return std::optional<double>(t); }, 1, 3, 1).value == 1.0);
  auto lin = averaged_metric([](double t) { return std::optional<double>(2 * t + 1); }, 0, 1, 10);
  // left-anchored grid: mean = 2 * 0.45 + 1, within one grid step of the midpoint value 2
  CHECK(*lin.value == doctest::Approx(1.9));
  auto some = averaged_metric(
      [](double t) { return t < 0.5 ? std::optional<double>(1.0) : std::nullopt; }, 0, 1, 10);
  CHECK(some.used == 5);
  CHECK(some.skipped == 5);
  CHECK_THROWS_AS(averaged_metric([](double) { return std::optional<double>(); }, 0, 1), ValidationError);
}

TEST_CASE("percentiles and default grid") {
  auto d = survival({1, 2, 3, 4, 100}, {1, 1, 1, 1, 0});
  CHECK(event_time_percentile(d, 50) == 2.5);
  CHECK(event_time_percentile(d, 0) == 1.0);
  auto times = default_eval_times(d);
  CHECK(times.size() == 10);
  CHECK(times.front() == doctest::Approx(1.15));
}

TEST_CASE("model evaluation on a unit-rate model") {
  std::mt19937_64 rng(6);
  std::exponential_distribution<double> ex(1.0);
  Dataset d;
  d.feature_names = {"f1"};
  for (int i = 0; i < 50; ++i) {
    const double t = std::min(ex(rng), 3.0);
    d.records.push_back(testutil::make_record(SampledPath({0.0}, {0.0}, 1), t, t < 3.0));
    d.horizon = 3.0;
  }
  auto p = CoxSigParams::zeros(2, 2, 0, false);
  auto times = default_eval_times(d);
  auto rep = evaluate_model(p, d, times, 0.5);
  REQUIRE(rep.points.size() == 10);
  // every record gets the same prediction, so no pair is concordant
  CHECK(*rep.avg_c_index.value == 0.0);
  for (const auto& pt : rep.points) CHECK(*pt.brier >= 0.0);
}
