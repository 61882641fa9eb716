#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sigsurv/error.hpp"
#include "sigsurv/fit.hpp"

using namespace sigsurv;

TEST_CASE("elastic-net prox examples") {
  const std::vector<double> one{1.0};
  CHECK(prox_elastic_net(one, 0.2, 1.0, 1.0)[0] == doctest::Approx(0.8));
  const std::vector<double> two{2.0};
  CHECK(prox_elastic_net(two, 1.0, 1.0, 0.0)[0] == doctest::Approx(1.0));
  const std::vector<double> small{0.05, -0.05};
  for (double x : prox_elastic_net(small, 1.0, 1.0, 0.5)) CHECK(x == 0.0);
  const std::vector<double> neg{-3.0};
  // soft threshold 0.5, then divide by 1.5
  CHECK(prox_elastic_net(neg, 1.0, 1.0, 0.5)[0] == doctest::Approx(-2.5 / 1.5));
}

TEST_CASE("prox is nonexpansive") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5);
    for (double& x : a) x = g(rng);
    for (double& x : b) x = g(rng);
    for (bool sq : {true, false}) {
      const auto pa = prox_elastic_net(a, 0.3, 1.7, 0.4, sq);
      const auto pb = prox_elastic_net(b, 0.3, 1.7, 0.4, sq);
      double din = 0.0, dout = 0.0;
      for (int i = 0; i < 5; ++i) {
        din += (a[i] - b[i]) * (a[i] - b[i]);
        dout += (pa[i] - pb[i]) * (pa[i] - pb[i]);
      }
      CHECK(dout <= din + 1e-12);
    }
  }
}

TEST_CASE("penalty values") {
  const std::vector<double> v{1.0, -2.0};
  CHECK(elastic_net_penalty(v, 2.0, 0.5) == doctest::Approx(2.0 * (0.5 * 3.0 + 0.5 * 2.5)));
  CHECK(elastic_net_penalty(v, 1.0, 0.0, false) == doctest::Approx(std::sqrt(5.0)));
  CHECK(elastic_net_penalty(v, 0.0, 0.3) == 0.0);
}

TEST_CASE("proximal gradient: monotone objective and convergence") {
  std::mt19937_64 rng(11);
  const Dataset data = testutil::random_dataset(rng, 40, 2, 1);
  CoxSigProblem problem(data, 2, false);
  ElasticNetConfig pen;
  pen.eta1 = 0.01;
  pen.eta2 = 0.01;
  const auto fit = fit_coxsig(problem, pen);
  REQUIRE(fit.trace.size() > 1);
  for (std::size_t i = 1; i < fit.trace.size(); ++i)
    CHECK(fit.trace[i].objective <= fit.trace[i - 1].objective);
  CHECK(fit.converged);
  const double obj = problem.nll(fit.params) + elastic_net_penalty(fit.params.alpha, 0.01, 0.1) +
                     elastic_net_penalty(fit.params.beta, 0.01, 0.1);
  CHECK(fit.trace.back().objective == doctest::Approx(obj).epsilon(1e-10));
}

TEST_CASE("huge penalty keeps every coefficient at zero") {
  std::mt19937_64 rng(5);
  const Dataset data = testutil::random_dataset(rng, 25, 2, 2);
  ElasticNetConfig pen;
  pen.eta1 = 1e6;
  pen.eta2 = 1e6;
  pen.gamma = 1.0;
  const auto fit = fit_coxsig(data, 2, false, pen);
  for (double a : fit.params.alpha) CHECK(a == 0.0);
  for (double b : fit.params.beta) CHECK(b == 0.0);
}

TEST_CASE("unpenalized fit is stationary") {
  std::mt19937_64 rng(8);
  const Dataset data = testutil::random_dataset(rng, 60, 1, 1);
  CoxSigProblem problem(data, 2, false);
  ElasticNetConfig pen;
  pen.rel_tol = 1e-13;
  pen.max_iters = 20000;
  const auto fit = fit_coxsig(problem, pen);
  CoxSigGradient g;
  problem.nll_and_gradient(fit.params, g);
  double norm = 0.0;
  for (double x : g.alpha) norm += x * x;
  for (double x : g.beta) norm += x * x;
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("baseline fit is stationary in the time word") {
  Dataset data;
  data.feature_names = default_names("f", 1);
  const std::vector<std::pair<double, bool>> rows{{1.0, true}, {2.0, false}, {0.5, true},
                                                  {3.0, true}, {1.5, false}};
  for (auto [t, e] : rows) {
    data.records.push_back(testutil::make_record(SampledPath({0.0}, {0.0}, 1), t, e));
    data.horizon = std::max(data.horizon, t);
  }
  ElasticNetConfig pen;
  pen.rel_tol = 1e-14;
  pen.max_iters = 5000;
  const auto fit = fit_baseline_cox(data, pen, {}, 1);
  // words (f), (t); only (t) may move
  CHECK(fit.params.alpha[0] == 0.0);
  CoxSigProblem problem(data, 1, true);
  CoxSigGradient g;
  problem.nll_and_gradient(fit.params, g);
  CHECK(std::abs(g.alpha[1]) < 1e-4);
}

TEST_CASE("baseline mask freezes feature words") {
  std::mt19937_64 rng(21);
  const Dataset data = testutil::random_dataset(rng, 30, 2, 1);
  const auto fit = fit_baseline_cox(data, ElasticNetConfig{}, {}, 2);
  const auto mask = time_word_mask(3, 2);
  std::size_t free = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) CHECK(fit.params.alpha[i] == 0.0);
    free += mask[i];
  }
  CHECK(free == 2);  // (t), (t, t)
  CHECK_THROWS_AS(fit_coxsig(CoxSigProblem(data, 2, false), ElasticNetConfig{},
                             std::vector<char>(3, 1)),
                  ValidationError);
}

TEST_CASE("warm start reaches the same optimum") {
  std::mt19937_64 rng(2);
  const Dataset data = testutil::random_dataset(rng, 30, 1, 1);
  CoxSigProblem problem(data, 2, false);
  ElasticNetConfig pen;
  pen.eta1 = 0.05;
  pen.eta2 = 0.05;
  pen.rel_tol = 1e-12;
  pen.max_iters = 10000;
  const auto cold = fit_coxsig(problem, pen);
  ElasticNetConfig other = pen;
  other.eta1 = 0.5;
  const auto prev = fit_coxsig(problem, other);
  const auto warm = fit_coxsig(problem, pen, {}, &prev.params);
  CHECK(warm.trace.back().objective == doctest::Approx(cold.trace.back().objective).epsilon(1e-6));
}

TEST_CASE("preconditioned and accelerated solvers agree with plain ISTA") {
  std::mt19937_64 rng(13);
  const Dataset data = testutil::random_dataset(rng, 50, 2, 1);
  CoxSigProblem problem(data, 3, false);
  ElasticNetConfig pen;
  pen.eta1 = 0.02;
  pen.eta2 = 0.02;
  pen.rel_tol = 1e-13;
  pen.max_iters = 50000;
  const auto plain = fit_coxsig(problem, pen);
  for (auto [pre, acc] : {std::pair{true, false}, std::pair{false, true}, std::pair{true, true}}) {
    ElasticNetConfig opt = pen;
    opt.precondition = pre;
    opt.accelerate = acc;
    const auto fit = fit_coxsig(problem, opt);
    CAPTURE(pre);
    CAPTURE(acc);
    for (std::size_t i = 1; i < fit.trace.size(); ++i)
      CHECK(fit.trace[i].objective <= fit.trace[i - 1].objective);
    CHECK(fit.trace.back().objective ==
          doctest::Approx(plain.trace.back().objective).epsilon(1e-7));
    if (acc) CHECK(fit.trace.size() <= plain.trace.size());
  }
}

TEST_CASE("config validation") {
  {
    ElasticNetConfig bad;
    bad.precondition = true;
    bad.squared_l2 = false;
    CHECK_THROWS_AS(bad.check(), ValidationError);
  }
  ElasticNetConfig pen;
  pen.gamma = 1.5;
  CHECK_THROWS_AS(pen.check(), ValidationError);
  pen = {};
  pen.eta1 = -1.0;
  CHECK_THROWS_AS(pen.check(), ValidationError);
  CVGrid grid;
  CHECK_THROWS_AS(grid.check(), ValidationError);
  AdamConfig a;
  a.batch = 0;
  CHECK_THROWS_AS(a.check(), ValidationError);
}

TEST_CASE("standard grid and split") {
  const auto g = CVGrid::standard();
  REQUIRE(g.eta1.size() == 6);
  CHECK(g.eta1[0] == 1.0);
  CHECK(g.eta1[5] == doctest::Approx(std::exp(-5.0)));
  CHECK(CVGrid::standard(true).eta2[2] == doctest::Approx(0.01));
  const auto [tr, te] = split_indices(10, 0.8, 4);
  CHECK(tr.size() == 8);
  CHECK(te.size() == 2);
  std::vector<int> seen(10, 0);
  for (auto i : tr) ++seen[i];
  for (auto i : te) ++seen[i];
  for (int s : seen) CHECK(s == 1);
  CHECK(split_indices(10, 0.8, 4) == split_indices(10, 0.8, 4));
}

TEST_CASE("cross validation on a small grid") {
  std::mt19937_64 rng(17);
  const Dataset data = testutil::random_dataset(rng, 60, 1, 1);
  CVGrid grid;
  grid.eta1 = {1.0, 0.1};
  grid.eta2 = {0.1};
  grid.depths = {2};
  CVOptions opt;
  opt.dt = 0.5;
  const auto a = cross_validate(data, grid, opt, 9);
  const auto b = cross_validate(data, grid, opt, 9);
  CHECK(a.table.size() == 2);
  CHECK(a.best.eta1 == b.best.eta1);
  REQUIRE(a.best.score);
  for (const auto& e : a.table)
    if (e.score) CHECK(*e.score <= *a.best.score);
  CHECK(a.refit.params.alpha == b.refit.params.alpha);

  CVGrid single;
  single.eta1 = {0.3};
  single.eta2 = {0.3};
  single.depths = {3};
  const auto s = cross_validate(data, single, opt, 1);
  CHECK(s.best.eta1 == 0.3);
  CHECK(s.best.depth == 3);
  CHECK(s.refit.params.depth == 3);
}

TEST_CASE("ncde training") {
  std::mt19937_64 rng(4);
  const Dataset data = testutil::random_dataset(rng, 20, 2, 1);
  AdamConfig cfg;
  cfg.hidden = {8};
  cfg.batch = 8;
  cfg.epochs = 0;
  const auto init = init_ncde(data, cfg, 3);
  const auto zero = fit_ncde(data, cfg, 3);
  CHECK(zero.params.field.flat() == init.params.field.flat());
  CHECK(zero.params.alpha == init.params.alpha);
  CHECK(zero.epoch_loss.empty());
  for (double a : init.params.alpha) CHECK(std::abs(a) <= 0.5);

  cfg.epochs = 15;
  const auto f1 = fit_ncde(data, cfg, 3);
  const auto f2 = fit_ncde(data, cfg, 3);
  REQUIRE(f1.epoch_loss.size() == 15);
  CHECK(f1.epoch_loss == f2.epoch_loss);
  CHECK(f1.epoch_loss.back() < f1.epoch_loss.front());
  const double trained = neg_log_likelihood(f1.params, data);
  const double untrained = neg_log_likelihood(init.params, data);
  CHECK(trained < untrained);
}
