#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sigsurv/intensity.hpp"
#include "sigsurv/metrics.hpp"

namespace sigsurv {

struct ElasticNetConfig {
  double eta1 = 0.0;  // alpha penalty
  double eta2 = 0.0;  // beta penalty
  double gamma = 0.1;
  double step = 1e-3;       // initial step
  double shrink = 0.5;      // backtracking factor
  double growth = 2.0;      // step multiplier after an accepted iteration
  int max_iters = 2000;
  double rel_tol = 1e-6;
  int max_halvings = 60;
  bool squared_l2 = true;   // (1 - gamma)/2 ||.||^2 instead of (1 - gamma) ||.||
  // Same minimizer, fewer iterations: per-coordinate steps scaled by the
  // feature second moments, and monotone FISTA momentum with restarts.
  bool precondition = false;
  bool accelerate = false;
  void check() const;
};

/// Proximal map of step * eta * (gamma ||.||_1 + (1 - gamma) L2-part).
std::vector<double> prox_elastic_net(std::span<const double> v, double step, double eta,
                                     double gamma, bool squared_l2 = true);

double elastic_net_penalty(std::span<const double> v, double eta, double gamma,
                           bool squared_l2 = true);

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double step = 0.0;
};

struct CoxSigFit {
  CoxSigParams params;
  std::vector<TraceRow> trace;
  bool converged = false;
};

/// Proximal gradient with backtracking on a prepared problem. `mask`, when
/// non-empty, marks the alpha coefficients allowed to move; `start` is a warm
/// start (zeros otherwise).
CoxSigFit fit_coxsig(const CoxSigProblem& problem, const ElasticNetConfig& pen,
                     std::span<const char> mask = {},
                     const CoxSigParams* start = nullptr);

CoxSigFit fit_coxsig(const Dataset& data, int depth, bool plus, const ElasticNetConfig& pen,
                     const QuadratureConfig& quad = {});

/// Cox model with a polynomial log-baseline: alpha restricted to the
/// time-only words. Without statics, the first observed value serves as W.
CoxSigFit fit_baseline_cox(const Dataset& data, const ElasticNetConfig& pen,
                           const QuadratureConfig& quad = {}, int depth = 2);

/// Indices of the time-only words as a mask over alpha.
std::vector<char> time_word_mask(int channels, int depth);

struct AdamConfig {
  double lr = 0.01831563888873418;  // exp(-4)
  int epochs = 50;
  int batch = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int latent = 4;
  std::vector<int> hidden{128, 128};
  bool standardize = true;
  void check() const;
};

struct NCDEFit {
  NCDEIntensityParams params;
  std::vector<double> epoch_loss;  // mean mini-batch loss per epoch
};

NCDEFit init_ncde(const Dataset& data, const AdamConfig& cfg, std::uint64_t seed);
NCDEFit fit_ncde(const Dataset& data, const AdamConfig& cfg, std::uint64_t seed);

struct CVGrid {
  std::vector<double> eta1;
  std::vector<double> eta2;
  std::vector<int> depths;
  double train_fraction = 0.8;

  /// {1, b^-1, ..., b^-5} for both penalties, depths {2, 3}; b = e unless
  /// `decimal`, then b = 10.
  static CVGrid standard(bool decimal = false);
  void check() const;
};

struct CVOptions {
  bool plus = false;
  ElasticNetConfig pen;   // eta1/eta2 are overwritten by the grid
  QuadratureConfig quad;
  double dt = 1.0;
  std::vector<double> times;  // empty: default grid on the validation split
  bool warm_start = true;
};

struct CVEntry {
  double eta1 = 0.0;
  double eta2 = 0.0;
  int depth = 0;
  std::optional<double> score;  // mean of C-index minus Brier
};

struct CVResult {
  CVEntry best;
  std::vector<CVEntry> table;
  CoxSigFit refit;
};

/// Mixed validation metric of a fitted model: mean over evaluation times of
/// C-index - Brier (points with undefined C-index are skipped).
std::optional<double> mixed_metric(const MetricReport& rep);

CVResult cross_validate(const Dataset& data, const CVGrid& grid, const CVOptions& opt,
                        std::uint64_t seed);

/// Seeded shuffle split into (train, test) index sets.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace sigsurv
