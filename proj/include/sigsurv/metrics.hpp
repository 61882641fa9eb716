#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sigsurv/intensity.hpp"
#include "sigsurv/timeseries.hpp"

namespace sigsurv {

struct EvalPoint {
  double t = 0.0;
  double dt = 0.0;
};

/// Kaplan-Meier estimate of the censoring survival function: censorings are
/// the events, the risk set at s is {T >= s}. Right-continuous, G(0) = 1.
class CensoringKM {
 public:
  static CensoringKM fit(const Dataset& data);
  double operator()(double t) const;
  const std::vector<double>& jump_times() const noexcept { return times_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;  // G just after times_[k]
};

/// Concordance over pairs (i, j) with T_i > T_j, T_j in [t, t + dt],
/// Delta_j = 1; risk ties count as discordant. Empty when no pair qualifies.
std::optional<double> c_index(std::span<const double> risks, const Dataset& data,
                              const EvalPoint& ep, std::size_t* comparable = nullptr);

double brier(std::span<const double> risks, const Dataset& data, const EvalPoint& ep);

struct WeightedBrierOptions {
  bool harmonize = false;  // use t + dt as the threshold instead of t
};

/// IPCW Brier score normalized by 1/n. Terms whose weight needs G = 0 are
/// dropped and counted in `excluded`.
double weighted_brier(std::span<const double> risks, const Dataset& data, const EvalPoint& ep,
                      const CensoringKM& g, const WeightedBrierOptions& opt = {},
                      std::size_t* excluded = nullptr);

/// Time-dependent AUC with weights Delta_j / G(T_j). Empty when either
/// marginal sum vanishes.
std::optional<double> auc_td(std::span<const double> risks, const Dataset& data,
                             const EvalPoint& ep, const CensoringKM& g);

struct AveragedValue {
  std::optional<double> value;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Left-anchored grid t_i = t1 + i (t2 - t1) / n, i = 0..n-1.
std::vector<double> averaging_grid(double t1, double t2, int n_points);

/// Mean of `metric` over the averaging grid; undefined points are skipped.
AveragedValue averaged_metric(const std::function<std::optional<double>(double)>& metric,
                              double t1, double t2, int n_points = 10);

/// Linear-interpolation percentile (q in [0, 100]) of the observed event
/// times (Delta = 1).
double event_time_percentile(const Dataset& data, double q);

struct PointMetrics {
  EvalPoint ep;
  std::optional<double> c_index;
  std::optional<double> brier;
  std::optional<double> weighted_brier;
  std::optional<double> auc;
  std::size_t at_risk = 0;
  std::size_t comparable_pairs = 0;
  std::size_t wbs_excluded = 0;
};

struct MetricReport {
  std::vector<PointMetrics> points;
  AveragedValue avg_c_index;
  AveragedValue avg_brier;
  AveragedValue avg_weighted_brier;
  AveragedValue avg_auc;
};

struct EvaluationOptions {
  bool at_risk_only = true;  // score only records with T >= t at each t
  WeightedBrierOptions wbs;
  QuadratureConfig quad;
};

/// Metrics of `model` on `data` at each time in `times` with window dt.
/// Censoring weights come from `data` itself.
MetricReport evaluate_model(const IntensityModel& model, const Dataset& data,
                            std::span<const double> times, double dt,
                            const EvaluationOptions& opt = {});

/// Metrics from precomputed risks: risks[k][i] is the prediction for record i
/// at times[k].
MetricReport evaluate_risks(const std::vector<std::vector<double>>& risks, const Dataset& data,
                            std::span<const double> times, double dt,
                            const EvaluationOptions& opt = {});

/// Default evaluation times: 10-point left-anchored grid between the 5th and
/// 50th percentiles of the observed event times.
std::vector<double> default_eval_times(const Dataset& data, int n_points = 10);

}  // namespace sigsurv
