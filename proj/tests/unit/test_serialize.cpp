#include <filesystem>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sigsurv/error.hpp"
#include "sigsurv/serialize.hpp"

using namespace sigsurv;

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config hash depends on content only") {
  const Json a{{"seed", 1}, {"gen", "ou"}};
  const Json b{{"seed", 1}, {"gen", "ou"}};
  const Json c{{"seed", 2}, {"gen", "ou"}};
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("coxsig model round trip") {
  auto p = CoxSigParams::zeros(3, 2, 1, true);
  for (std::size_t i = 0; i < p.alpha.size(); ++i) p.alpha[i] = 0.1 * static_cast<double>(i) - 0.37;
  p.beta = {1.0 / 3.0, -2.5, 0.125, 7.0};
  const auto back = std::get<CoxSigParams>(model_from_json(Json::parse(model_to_json(p).dump())));
  CHECK(back.alpha == p.alpha);
  CHECK(back.beta == p.beta);
  CHECK(back.plus);
  CHECK(back.depth == 2);
}

TEST_CASE("ncde model round trip") {
  NCDEIntensityParams n;
  n.field = NeuralField(2, 3, {5}, 9);
  n.alpha = {0.3, -0.2};
  n.beta = {};
  n.standardizer = Standardizer::identity(2);
  const auto back =
      std::get<NCDEIntensityParams>(model_from_json(Json::parse(model_to_json(n).dump())));
  CHECK(back.field.flat() == n.field.flat());
  CHECK(back.field.layer_sizes() == n.field.layer_sizes());
  CHECK(back.alpha == n.alpha);
  CHECK(back.standardizer.scale == n.standardizer.scale);
}

TEST_CASE("malformed models are rejected") {
  CHECK_THROWS_AS(model_from_json(Json{{"kind", "gbm"}}), ValidationError);
  CHECK_THROWS_AS(model_from_json(Json{{"kind", "coxsig"}}), ValidationError);
  auto j = model_to_json(CoxSigParams::zeros(2, 2, 0, false));
  j["alpha"] = Json::array({1.0});
  CHECK_THROWS_AS(model_from_json(j), ValidationError);
}

TEST_CASE("non-finite numbers serialize as null") {
  DivergenceTriple t;
  t.kl = std::numeric_limits<double>::infinity();
  CHECK(to_json(t)["kl"].is_null());
  CHECK(optional_number(std::nullopt).is_null());
}

TEST_CASE("json files round trip") {
  const auto path = std::filesystem::temp_directory_path() / "sigsurv_serialize_test.json";
  const Json j{{"x", 0.1}, {"y", {1, 2, 3}}};
  write_json(path, j);
  CHECK(read_json(path) == j);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_json(path), DataError);
}
