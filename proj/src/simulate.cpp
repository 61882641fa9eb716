#include "sigsurv/simulate.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <random>
#include <string>

#include "sigsurv/error.hpp"

namespace sigsurv {

namespace {

constexpr std::uint64_t kTagFbm = 1;
constexpr std::uint64_t kTagNoise = 2;
constexpr std::uint64_t kTagThinning = 3;
constexpr std::uint64_t kTagTruth = 4;

std::vector<double> linspace(double a, double b, int points) {
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) g[static_cast<std::size_t>(k)] = a + (b - a) * k / (points - 1);
  g.back() = b;
  return g;
}

double fbm_cov(double s, double t, double h) {
  return 0.5 * (std::pow(s, 2 * h) + std::pow(t, 2 * h) - std::pow(std::abs(t - s), 2 * h));
}

}  // namespace

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

FbmSampler::FbmSampler(double hurst, int points, double horizon) : hurst_(hurst) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw ValidationError("fbm: Hurst parameter must be in (0, 1)");
  if (points < 2) throw ValidationError("fbm: need at least two grid points");
  if (!(horizon > 0.0)) throw ValidationError("fbm: horizon must be positive");
  grid_ = linspace(0.0, horizon, points);
  const Eigen::Index m = points - 1;
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      cov(i, j) = cov(j, i) = fbm_cov(grid_[static_cast<std::size_t>(i) + 1],
                                      grid_[static_cast<std::size_t>(j) + 1], hurst);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * cov.diagonal().maxCoeff();
    cov.diagonal().array() += jitter;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("fbm: covariance is not positive definite");
  }
  chol_ = llt.matrixL();
}

SampledPath FbmSampler::sample(std::size_t channels, std::uint64_t seed) const {
  if (channels == 0) throw ValidationError("fbm: need at least one channel");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index m = chol_.rows();
  std::vector<double> values(grid_.size() * channels, 0.0);
  Eigen::VectorXd z(m);
  for (std::size_t j = 0; j < channels; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) z(i) = gauss(rng);
    const Eigen::VectorXd x = chol_.triangularView<Eigen::Lower>() * z;
    for (Eigen::Index i = 0; i < m; ++i)
      values[(static_cast<std::size_t>(i) + 1) * channels + j] = x(i);
  }
  return SampledPath(grid_, std::move(values), channels);
}

std::vector<SampledPath> fbm_paths(double hurst, int points, double horizon,
                                   std::size_t channels, std::size_t count,
                                   std::uint64_t seed) {
  const FbmSampler sampler(hurst, points, horizon);
  std::vector<SampledPath> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(sampler.sample(channels, derived_seed(seed, i, kTagFbm)));
  return out;
}

void OUConfig::check() const {
  if (n == 0 || d_features == 0) throw ValidationError("OUConfig: n and d_features must be positive");
  if (sigma < 0.0 || omega < 0.0) throw ValidationError("OUConfig: sigma and omega must be >= 0");
  if (!(hurst > 0.0 && hurst < 1.0)) throw ValidationError("OUConfig: H must be in (0, 1)");
  if (grid_points < 2 || !(horizon > 0.0)) throw ValidationError("OUConfig: bad grid");
  if (keep_every == 0) throw ValidationError("OUConfig: keep_every must be >= 1");
  if (w0 >= threshold) throw ValidationError("OUConfig: w0 must start below the threshold");
}

void TumorConfig::check() const {
  if (n == 0) throw ValidationError("TumorConfig: n must be positive");
  if (!(lambda0 > 0.0 && lambda1 > 0.0 && kappa1 > 0.0 && kappa2 >= 0.0))
    throw ValidationError("TumorConfig: rates must be positive");
  if (psi < 1.0) throw ValidationError("TumorConfig: psi must be >= 1");
  if (u0.size() != 4) throw ValidationError("TumorConfig: initial state has four compartments");
  for (double u : u0)
    if (u < 0.0) throw ValidationError("TumorConfig: initial state must be nonnegative");
  if (u0[0] + u0[1] + u0[2] + u0[3] >= threshold)
    throw ValidationError("TumorConfig: initial mass must start below the threshold");
  if (!(hurst > 0.0 && hurst < 1.0)) throw ValidationError("TumorConfig: H must be in (0, 1)");
  if (grid_points < 2 || !(horizon > 0.0)) throw ValidationError("TumorConfig: bad grid");
  if (keep_every == 0) throw ValidationError("TumorConfig: keep_every must be >= 1");
}

std::size_t first_crossing(const std::vector<double>& w, double threshold) {
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w[k] >= threshold) return k;
  return w.size();
}

namespace {

// Hitting-time record from a hidden trajectory on the grid. The observed
// series stops strictly before the event so no post-event value leaks.
SurvivalRecord hitting_record(const SampledPath& dense, const std::vector<double>& grid,
                              std::vector<double>& w, double threshold, std::size_t keep_every,
                              std::size_t index) {
  SurvivalRecord r;
  r.id = std::to_string(index);
  const std::size_t hit = first_crossing(w, threshold);
  if (hit < grid.size()) {
    r.event = true;
    r.event_time = grid[hit];
    const double half = 0.5 * (grid[hit] - grid[hit - 1]);
    r.path = observe_on_grid(dense, keep_every, grid[hit] - half);
    w.resize(hit + 1);
  } else {
    r.event = false;
    r.event_time = grid.back();
    r.path = observe_on_grid(dense, keep_every, grid.back());
  }
  return r;
}

}  // namespace

std::vector<double> ou_trajectory(const OUConfig& cfg, const SampledPath& x,
                                  std::span<const double> xi) {
  if (x.channels() != cfg.d_features || xi.size() + 1 != x.size())
    throw ValidationError("ou_trajectory: driver or noise has the wrong shape");
  std::vector<double> w(x.size());
  w[0] = cfg.w0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double h = x.time(k + 1) - x.time(k);
    const double noise = cfg.per_step_noise ? cfg.sigma : cfg.sigma * std::sqrt(h);
    double dx = 0.0;
    for (std::size_t j = 0; j < cfg.d_features; ++j) dx += x.value(k + 1, j) - x.value(k, j);
    w[k + 1] = w[k] - cfg.omega * (w[k] - cfg.mu) * h + dx + noise * xi[k];
  }
  return w;
}

Simulation ou_hitting_dataset(const OUConfig& cfg) {
  cfg.check();
  const FbmSampler sampler(cfg.hurst, cfg.grid_points, cfg.horizon);
  Simulation sim;
  sim.grid = sampler.grid();
  sim.data.feature_names = default_names("f", cfg.d_features);
  sim.data.horizon = cfg.horizon;
  const auto& grid = sim.grid;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const SampledPath x = sampler.sample(cfg.d_features, derived_seed(cfg.seed, i, kTagFbm));
    std::mt19937_64 rng(derived_seed(cfg.seed, i, kTagNoise));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> xi(grid.size() - 1);
    for (double& v : xi) v = gauss(rng);
    std::vector<double> w = ou_trajectory(cfg, x, xi);
    sim.data.records.push_back(hitting_record(x, grid, w, cfg.threshold, cfg.keep_every, i));
    sim.hidden.push_back(std::move(w));
  }
  return sim;
}

std::vector<double> tumor_trajectory(const TumorConfig& cfg, const std::vector<double>& grid,
                                     const std::vector<double>& x) {
  if (x.size() != grid.size()) throw ValidationError("tumor: dose path does not match the grid");
  std::array<double, 4> u{cfg.u0[0], cfg.u0[1], cfg.u0[2], cfg.u0[3]};
  std::vector<double> w(grid.size());
  w[0] = u[0] + u[1] + u[2] + u[3];
  const double ratio = cfg.lambda0 / cfg.lambda1;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double h = grid[k + 1] - grid[k];
    const double wk = w[k];
    const double growth =
        cfg.lambda0 * u[0] / std::pow(1.0 + std::pow(ratio * wk, cfg.psi), 1.0 / cfg.psi);
    const double kill = cfg.kappa2 * x[k] * u[0];
    const std::array<double, 4> du{growth - kill, kill - cfg.kappa1 * u[1],
                                   cfg.kappa1 * (u[1] - u[2]), cfg.kappa1 * (u[2] - u[3])};
    for (int c = 0; c < 4; ++c) u[c] += h * du[c];
    w[k + 1] = u[0] + u[1] + u[2] + u[3];
    if (!std::isfinite(w[k + 1]) || std::abs(w[k + 1]) > 1e8)
      throw NumericalError("tumor: state blew up at t = " + std::to_string(grid[k + 1]));
  }
  return w;
}

Simulation tumor_growth_dataset(const TumorConfig& cfg) {
  cfg.check();
  const FbmSampler sampler(cfg.hurst, cfg.grid_points, cfg.horizon);
  Simulation sim;
  sim.grid = sampler.grid();
  sim.data.feature_names = {"dose"};
  sim.data.horizon = cfg.horizon;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const SampledPath raw = sampler.sample(1, derived_seed(cfg.seed, i, kTagFbm));
    std::vector<double> dose(raw.values().begin(), raw.values().end());
    if (cfg.absolute_drug)
      for (double& v : dose) v = std::abs(v);
    const SampledPath x(sim.grid, dose, 1);
    std::vector<double> w = tumor_trajectory(cfg, sim.grid, dose);
    sim.data.records.push_back(hitting_record(x, sim.grid, w, cfg.threshold, cfg.keep_every, i));
    sim.hidden.push_back(std::move(w));
  }
  return sim;
}

Dataset simulate_from_intensity(const CoxSigParams& truth, const std::vector<SampledPath>& drivers,
                                const std::vector<std::vector<double>>& statics, double horizon,
                                std::uint64_t seed) {
  truth.check();
  if (!(horizon > 0.0)) throw ValidationError("simulate_from_intensity: horizon must be positive");
  if (drivers.empty()) throw ValidationError("simulate_from_intensity: no driver paths");
  if (!statics.empty() && statics.size() != drivers.size())
    throw ValidationError("simulate_from_intensity: one static vector per driver expected");
  Dataset data;
  data.horizon = horizon;
  data.feature_names = default_names("f", drivers.front().channels());
  data.static_names =
      default_names("stat", statics.empty() ? std::size_t{0} : statics.front().size());
  constexpr int kScan = 16;
  for (std::size_t i = 0; i < drivers.size(); ++i) {
    SurvivalRecord full;
    full.path = restrict_path(drivers[i], horizon);
    full.event_time = horizon;
    if (!statics.empty()) full.statics = statics[i];
    const LogIntensityCurve curve = log_intensity_curve(truth, full);

    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < curve.breaks.size(); ++k) {
      const double lo = curve.breaks[k];
      const double hi = k + 1 < curve.breaks.size() ? curve.breaks[k + 1] : horizon;
      for (int m = 0; m <= kScan; ++m) top = std::max(top, curve(lo + (hi - lo) * m / kScan));
    }
    if (!std::isfinite(top) || top > kLogIntensityGuard)
      throw NumericalError("simulate_from_intensity: intensity envelope is not finite for record " +
                           std::to_string(i));
    const double envelope = 1.2 * std::exp(top);

    std::mt19937_64 rng(derived_seed(seed, i, kTagThinning));
    std::exponential_distribution<double> gap(envelope);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double t = 0.0;
    SurvivalRecord r;
    r.id = std::to_string(i);
    r.statics = full.statics;
    r.event = false;
    r.event_time = horizon;
    while (true) {
      t += gap(rng);
      if (t > horizon) break;
      const double lam = std::exp(curve(t));
      if (lam > envelope)
        throw NumericalError("simulate_from_intensity: envelope exceeded for record " +
                             std::to_string(i));
      if (unif(rng) * envelope <= lam) {
        r.event = true;
        r.event_time = t;
        break;
      }
    }
    r.path = restrict_path(full.path, r.event_time);
    data.records.push_back(std::move(r));
  }
  return data;
}

void ThinningConfig::check() const {
  if (n == 0 || channels == 0) throw ValidationError("ThinningConfig: n and channels must be positive");
  if (depth < 1 || depth > kMaxSignatureDepth) throw ValidationError("ThinningConfig: bad depth");
  if (!(hurst > 0.0 && hurst < 1.0)) throw ValidationError("ThinningConfig: H must be in (0, 1)");
  if (grid_points < 2 || !(horizon > 0.0)) throw ValidationError("ThinningConfig: bad grid");
  if (!(base_rate > 0.0) || coef_scale < 0.0) throw ValidationError("ThinningConfig: bad rates");
}

CoxSigParams thinning_truth(const ThinningConfig& cfg) {
  cfg.check();
  const int d = static_cast<int>(cfg.channels) + 1;
  auto truth = CoxSigParams::zeros(d, cfg.depth, 1, false);
  truth.beta = {std::log(cfg.base_rate)};
  std::mt19937_64 rng(derived_seed(cfg.truth_seed, 0, kTagTruth));
  std::normal_distribution<double> g(0.0, cfg.coef_scale);
  double fact = 1.0;
  for (int k = 1; k <= cfg.depth; ++k) {
    fact *= k;
    const std::size_t lo = level_offset(d, k), hi = k == cfg.depth ? truth.alpha.size() : level_offset(d, k + 1);
    for (std::size_t i = lo; i < hi; ++i) truth.alpha[i] = g(rng) / fact;
  }
  return truth;
}

Simulation thinning_dataset(const ThinningConfig& cfg, const CoxSigParams& truth) {
  cfg.check();
  if (truth.channels != static_cast<int>(cfg.channels) + 1)
    throw ValidationError("thinning_dataset: truth does not match the channel count");
  Simulation sim;
  const auto drivers =
      fbm_paths(cfg.hurst, cfg.grid_points, cfg.horizon, cfg.channels, cfg.n, cfg.seed);
  const auto grid = drivers.front().times();
  sim.grid.assign(grid.begin(), grid.end());
  const std::vector<std::vector<double>> ones(cfg.n, std::vector<double>{1.0});
  sim.data = simulate_from_intensity(truth, drivers, ones, cfg.horizon, cfg.seed);
  sim.data.static_names = {"one"};
  return sim;
}

}  // namespace sigsurv
