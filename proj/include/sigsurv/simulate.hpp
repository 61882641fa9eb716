#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sigsurv/intensity.hpp"
#include "sigsurv/timeseries.hpp"

namespace sigsurv {

/// Exact fractional Brownian motion on an equispaced grid of `points` times
/// over [0, horizon] via a Cholesky factor of the covariance. The factor is
/// computed once and reused for every path.
class FbmSampler {
 public:
  FbmSampler(double hurst, int points, double horizon);
  double hurst() const noexcept { return hurst_; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  /// One path with `channels` independent fBm coordinates, x(0) = 0.
  SampledPath sample(std::size_t channels, std::uint64_t seed) const;

 private:
  double hurst_;
  std::vector<double> grid_;
  Eigen::MatrixXd chol_;  // lower factor over grid_[1..]
};

/// `count` paths; path i is drawn from a generator seeded by (seed, i).
std::vector<SampledPath> fbm_paths(double hurst, int points, double horizon,
                                   std::size_t channels, std::size_t count,
                                   std::uint64_t seed);

/// Generator seed of record `index` for a stream tagged `tag`.
std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t tag);

struct OUConfig {
  std::size_t n = 500;
  std::size_t d_features = 4;
  double sigma = 1.0;
  double mu = 0.1;
  double omega = 0.1;
  double hurst = 0.6;
  double threshold = 2.5;
  double w0 = 0.0;
  // Brownian term drawn as sigma * N(0, 1) per Euler step instead of
  // sigma * sqrt(h) * N(0, 1); matches the published censoring level much
  // better than the SDE as written.
  bool per_step_noise = false;
  int grid_points = 1000;
  double horizon = 10.0;
  std::size_t keep_every = 1;
  std::uint64_t seed = 0;
  void check() const;
};

struct TumorConfig {
  std::size_t n = 500;
  double lambda0 = 0.9;
  double lambda1 = 0.7;
  double kappa1 = 10.0;
  double kappa2 = 0.15;
  double psi = 20.0;
  std::vector<double> u0{0.8, 0.0, 0.0, 0.0};
  double threshold = 1.7;
  double hurst = 0.6;
  int grid_points = 1000;
  double horizon = 10.0;
  std::size_t keep_every = 1;
  bool absolute_drug = true;  // dose x_t = |fBm_t|; raw fBm otherwise
  std::uint64_t seed = 0;
  void check() const;
};

/// A simulated dataset plus the hidden state on the simulation grid (never
/// part of the dataset files).
struct Simulation {
  Dataset data;
  std::vector<double> grid;
  std::vector<std::vector<double>> hidden;  // per record, w on the grid up to T
};

/// First grid index with w >= threshold, or grid size when never reached.
std::size_t first_crossing(const std::vector<double>& w, double threshold);

/// Euler-Maruyama OU trajectory on the driver's grid: x holds the fBm
/// channels, xi one standard normal per step.
std::vector<double> ou_trajectory(const OUConfig& cfg, const SampledPath& x,
                                  std::span<const double> xi);

Simulation ou_hitting_dataset(const OUConfig& cfg);
Simulation tumor_growth_dataset(const TumorConfig& cfg);

/// Euler integration of the tumor system on the given grid, driven by the
/// dose path `x` (one value per grid time). Returns w on the grid.
std::vector<double> tumor_trajectory(const TumorConfig& cfg, const std::vector<double>& grid,
                                     const std::vector<double>& x);

struct ThinningConfig {
  std::size_t n = 200;
  std::size_t channels = 2;  // raw fBm channels; time is appended
  int depth = 2;
  double hurst = 0.6;
  int grid_points = 101;
  double horizon = 5.0;
  double base_rate = 0.1;    // exp(beta) on the constant static
  double coef_scale = 0.3;   // level-k coefficients ~ N(0, coef_scale^2) / k!
  std::uint64_t truth_seed = 7;
  std::uint64_t seed = 0;
  void check() const;
};

/// Ground-truth CoxSig intensity for the thinning generator; depends on
/// truth_seed only, so replicates with different seeds share it.
CoxSigParams thinning_truth(const ThinningConfig& cfg);

/// fBm drivers plus a constant static "one", events drawn from `truth`.
Simulation thinning_dataset(const ThinningConfig& cfg, const CoxSigParams& truth);

/// One event per record by thinning against a constant envelope (1.2 times
/// the largest intensity found by a scan of [0, horizon]); records without an
/// event are censored at the horizon. Paths are cut at T.
Dataset simulate_from_intensity(const CoxSigParams& truth, const std::vector<SampledPath>& drivers,
                                const std::vector<std::vector<double>>& statics, double horizon,
                                std::uint64_t seed);

}  // namespace sigsurv
