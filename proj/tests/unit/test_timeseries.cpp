#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sigsurv/dataset_io.hpp"
#include "sigsurv/error.hpp"
#include "sigsurv/timeseries.hpp"

using namespace sigsurv;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sigsurv_ts_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("sampled path validation") {
  CHECK_THROWS_AS(SampledPath({}, {}, 1), ValidationError);
  CHECK_THROWS_AS(SampledPath({0.0, 0.0}, {1, 2}, 1), ValidationError);
  CHECK_THROWS_AS(SampledPath({0.5}, {1}, 1), ValidationError);
  CHECK_THROWS_AS(SampledPath({0.0, 1.0}, {1, NAN}, 1), ValidationError);
  CHECK_THROWS_AS(SampledPath({0.0, 1.0}, {1}, 1), ValidationError);
  SampledPath ok({0.0, 1.0}, {1, 2}, 1);
  CHECK(ok.size() == 2);
}

TEST_CASE("fill-forward embedding of a single point") {
  SampledPath p({0.0}, {3.0, -1.0}, 2);
  auto e = embed_fill_forward(p, 1.0);
  REQUIRE(e.segments().size() == 1);
  CHECK(e.segments()[0].kind == SegmentKind::kTimeAdvance);
  CHECK(e.segments()[0].increment == std::vector<double>{0.0, 0.0, 1.0});
  CHECK_THROWS_AS(embed_fill_forward(SampledPath({0.0, 2.0}, {0, 0}, 1), 1.0), ValidationError);
}

TEST_CASE("fill-forward embedding of two points") {
  SampledPath p({0.0, 0.5}, {1.0, 4.0}, 1);
  auto e = embed_fill_forward(p, 1.0);
  REQUIRE(e.segments().size() == 3);
  CHECK(e.segments()[0].increment == std::vector<double>{0.0, 0.5});
  CHECK(e.segments()[1].kind == SegmentKind::kFeatureJump);
  CHECK(e.segments()[1].increment == std::vector<double>{3.0, 0.0});
  CHECK(e.segments()[2].increment == std::vector<double>{0.0, 0.5});
  auto x = e.point_at(0.7);
  CHECK(x[0] == doctest::Approx(4.0));
  CHECK(x[1] == doctest::Approx(0.7));
  // before the jump the old value is held
  CHECK(e.point_at(0.3)[0] == doctest::Approx(1.0));
}

TEST_CASE("segment count and chaining") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = testutil::random_path(rng, 1 + rep % 7, 2);
    auto e = embed_fill_forward(p, p.last_time() + 0.5);
    CHECK(e.segments().size() <= 2 * p.size() + 1);
    // endpoints chain: path at each observation equals (X(t_k), t_k)
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto x = e.point_at(p.time(k));
      CHECK(x[0] == doctest::Approx(p.value(k, 0)));
      CHECK(x[1] == doctest::Approx(p.value(k, 1)));
      CHECK(x[2] == doctest::Approx(p.time(k)));
    }
  }
}

TEST_CASE("restrict keeps prefix and has no look-ahead") {
  SampledPath p({0.0, 1.0, 2.0, 3.0}, {0, 1, 2, 3}, 1);
  CHECK(restrict_path(p, 5.0) == p);
  CHECK(restrict_path(p, 1.5).size() == 2);
  CHECK(restrict_path(p, -1.0).size() == 1);
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto q = testutil::random_path(rng, 8, 2);
    const double t = q.last_time() * 0.6;
    auto full = embed_fill_forward(q, q.last_time());
    auto cut = embed_fill_forward(restrict_path(q, t), t);
    for (double s : {0.0, 0.3 * t, 0.7 * t, t}) {
      auto a = full.point_at(s);
      auto b = cut.point_at(s);
      for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]));
    }
  }
}

TEST_CASE("total variation") {
  SampledPath flat({0.0, 0.5, 1.0}, {2, 2, 2}, 1);
  CHECK(total_variation(flat) == doctest::Approx(1.0));
  SampledPath p({0.0, 1.0, 2.0}, {0, 3, 1}, 1);
  CHECK(total_variation(p) == doctest::Approx(std::sqrt(10.0) + std::sqrt(5.0)));
  // collinear midpoint insertion
  SampledPath q({0.0, 0.5, 1.0, 2.0}, {0, 1.5, 3, 1}, 1);
  CHECK(total_variation(q) == doctest::Approx(total_variation(p)));
  CHECK(total_variation(p) >= std::hypot(1.0, 2.0));
}

TEST_CASE("mesh") {
  std::vector<double> t, v;
  for (int i = 0; i <= 10; ++i) {
    t.push_back(i * 0.1);
    v.push_back(0.0);
  }
  CHECK(mesh(SampledPath(t, v, 1)) == doctest::Approx(0.1));
  CHECK(mesh(SampledPath({0, 0.1, 0.9, 1}, {0, 0, 0, 0}, 1)) == doctest::Approx(0.8));
  CHECK_THROWS_AS(mesh(SampledPath({0.0}, {0.0}, 1)), ValidationError);
}

TEST_CASE("observe_on_grid") {
  std::vector<double> t, v;
  for (int i = 0; i < 1000; ++i) {
    t.push_back(i * 0.01);
    v.push_back(std::sin(i * 0.01));
  }
  SampledPath dense(t, v, 1);
  CHECK(observe_on_grid(dense, 1, 1e9) == dense);
  CHECK(observe_on_grid(dense, 2, 1e9).size() == 500);
  const auto half = observe_on_grid(dense, 1, dense.last_time() / 2).size();
  CHECK(half >= 499);
  CHECK(half <= 501);
  CHECK(observe_on_grid(dense, 7, 0.0).size() == 1);
}

TEST_CASE("survival record helpers") {
  auto r = testutil::make_record(SampledPath({0.0, 1.0}, {0, 1}, 1), 2.0, true);
  CHECK(r.at_risk(2.0));
  CHECK_FALSE(r.at_risk(2.1));
  CHECK(r.count(1.9) == 0);
  CHECK(r.count(2.0) == 1);
  r.event = false;
  CHECK(r.count(3.0) == 0);
  r.event_time = 0.5;
  CHECK_THROWS_AS(r.validate(), DataError);
}

TEST_CASE("loader: minimal file") {
  auto dir = scratch_dir("min");
  write(dir / "lon.csv", "id,time,f1\na,3.0,1.5\na,4.0,2.5\n");
  write(dir / "rec.csv", "id,event_time,event,stat1\na,5.0,1,0.25\n");
  auto data = load_dataset(dir / "lon.csv", dir / "rec.csv");
  REQUIRE(data.size() == 1);
  CHECK(data.records[0].path.size() == 2);
  CHECK(data.records[0].path.time(0) == 0.0);
  CHECK(data.records[0].path.time(1) == 1.0);
  CHECK(data.records[0].event_time == 2.0);
  CHECK(data.records[0].statics == std::vector<double>{0.25});
}

TEST_CASE("loader: distinct diagnostics") {
  auto dir = scratch_dir("err");
  auto kind_of = [&](const std::string& lon, const std::string& rec) {
    write(dir / "lon.csv", lon);
    write(dir / "rec.csv", rec);
    try {
      load_dataset(dir / "lon.csv", dir / "rec.csv");
    } catch (const DataError& e) {
      return e.kind();
    }
    FAIL("expected a DataError");
    return DataErrorKind::kIo;
  };
  CHECK(kind_of("id,t,f1\na,0,1\n", "id,event_time,event\na,1,1\n") == DataErrorKind::kMissingColumn);
  CHECK(kind_of("id,time,f1\na,0,1\na,0,2\n", "id,event_time,event\na,1,1\n") ==
        DataErrorKind::kNonMonotoneTimes);
  CHECK(kind_of("id,time,f1\na,0,1\n", "id,event_time,event\nb,1,1\n") == DataErrorKind::kIdMismatch);
  CHECK(kind_of("id,time,f1\na,0,nan\n", "id,event_time,event\na,1,1\n") == DataErrorKind::kNonFinite);
  CHECK(kind_of("id,time,f1\na,0,1\na,3,1\n", "id,event_time,event\na,1,1\n") ==
        DataErrorKind::kObservationAfterEvent);
  CHECK(kind_of("id,time,f1\na,0,1\n", "id,event_time,event\na,1,yes\n") == DataErrorKind::kParse);
}

TEST_CASE("save/load round trip is exact") {
  std::mt19937_64 rng(11);
  Dataset data;
  data.feature_names = default_names("f", 2);
  data.static_names = default_names("stat", 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    auto p = testutil::random_path(rng, 4, 2);
    data.records.push_back(
        testutil::make_record(p, p.last_time() + u(rng), i % 2 == 0, {u(rng) / 3.0}));
    data.records.back().id = "r" + std::to_string(i);
    data.horizon = std::max(data.horizon, data.records.back().event_time);
  }
  auto dir = scratch_dir("rt");
  save_dataset(data, dir / "lon.csv", dir / "rec.csv");
  auto back = load_dataset(dir / "lon.csv", dir / "rec.csv");
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.records[i].path == data.records[i].path);
    CHECK(back.records[i].event_time == data.records[i].event_time);
    CHECK(back.records[i].event == data.records[i].event);
    CHECK(back.records[i].statics == data.records[i].statics);
  }
}

TEST_CASE("standardizer") {
  std::mt19937_64 rng(2);
  Dataset data;
  data.feature_names = default_names("f", 2);
  for (int i = 0; i < 10; ++i) {
    auto p = testutil::random_path(rng, 5, 2, 3.0);
    data.records.push_back(testutil::make_record(p, p.last_time(), true));
  }
  auto s = Standardizer::fit(data);
  auto z = s.apply(data);
  double m = 0.0, sq = 0.0, n = 0.0;
  for (const auto& r : z.records)
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      m += r.path.value(k, 1);
      sq += r.path.value(k, 1) * r.path.value(k, 1);
      n += 1;
    }
  CHECK(m / n == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-6));
}
