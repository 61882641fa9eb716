#include "sigsurv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sigsurv/error.hpp"

namespace sigsurv {
namespace {

void check_sizes(std::span<const double> risks, const Dataset& data) {
  if (risks.size() != data.size())
    throw ValidationError("metrics: one risk per record is required");
}

bool in_window(double s, const EvalPoint& ep) { return s >= ep.t && s <= ep.t + ep.dt; }

}  // namespace

CensoringKM CensoringKM::fit(const Dataset& data) {
  if (data.size() == 0) throw ValidationError("CensoringKM: empty dataset");
  std::vector<double> t;
  t.reserve(data.size());
  for (const auto& r : data.records) t.push_back(r.event_time);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
  CensoringKM km;
  double g = 1.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = t[order[i]];
    const std::size_t at_risk = order.size() - i;
    std::size_t censored = 0;
    std::size_t j = i;
    for (; j < order.size() && t[order[j]] == s; ++j)
      if (!data.records[order[j]].event) ++censored;
    if (censored > 0) {
      g *= static_cast<double>(at_risk - censored) / static_cast<double>(at_risk);
      km.times_.push_back(s);
      km.values_.push_back(g);
    }
    i = j;
  }
  return km;
}

double CensoringKM::operator()(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 1.0;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

std::optional<double> c_index(std::span<const double> risks, const Dataset& data,
                              const EvalPoint& ep, std::size_t* comparable) {
  check_sizes(risks, data);
  double num = 0.0;
  std::size_t den = 0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto& rj = data.records[j];
    if (!rj.event || !in_window(rj.event_time, ep)) continue;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!(data.records[i].event_time > rj.event_time)) continue;
      ++den;
      if (risks[i] > risks[j]) num += 1.0;
    }
  }
  if (comparable) *comparable = den;
  if (den == 0) return std::nullopt;
  return num / static_cast<double>(den);
}

double brier(std::span<const double> risks, const Dataset& data, const EvalPoint& ep) {
  check_sizes(risks, data);
  if (data.size() == 0) throw ValidationError("brier: empty dataset");
  const double horizon = ep.t + ep.dt;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    if (r.event_time <= horizon && r.event) sum += risks[i] * risks[i];
    else if (r.event_time > horizon) sum += (1.0 - risks[i]) * (1.0 - risks[i]);
  }
  return sum / static_cast<double>(data.size());
}

double weighted_brier(std::span<const double> risks, const Dataset& data, const EvalPoint& ep,
                      const CensoringKM& g, const WeightedBrierOptions& opt,
                      std::size_t* excluded) {
  check_sizes(risks, data);
  if (data.size() == 0) throw ValidationError("weighted_brier: empty dataset");
  const double thr = opt.harmonize ? ep.t + ep.dt : ep.t;
  const double g_thr = g(thr);
  std::size_t dropped = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    const double ri = risks[i];
    if (r.event_time <= thr && r.event) {
      const double w = g(r.event_time);
      if (w > 0.0) sum += ri * ri / w;
      else ++dropped;
    }
    // the displayed formula uses >= for survivors at the plain threshold
    const bool survivor = opt.harmonize ? r.event_time > thr : r.event_time >= thr;
    if (survivor) {
      if (g_thr > 0.0) sum += (1.0 - ri) * (1.0 - ri) / g_thr;
      else ++dropped;
    }
  }
  if (excluded) *excluded = dropped;
  return sum / static_cast<double>(data.size());
}

std::optional<double> auc_td(std::span<const double> risks, const Dataset& data,
                             const EvalPoint& ep, const CensoringKM& g) {
  check_sizes(risks, data);
  const double horizon = ep.t + ep.dt;
  std::vector<double> w(data.size(), 0.0);
  double wsum = 0.0;
  double survivors = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    if (r.event) {
      const double gi = g(r.event_time);
      w[i] = gi > 0.0 ? 1.0 / gi : 0.0;
    }
    if (in_window(r.event_time, ep)) wsum += w[i];
    if (r.event_time > horizon) survivors += 1.0;
  }
  if (wsum == 0.0 || survivors == 0.0) return std::nullopt;
  double num = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data.records[i].event_time > horizon)) continue;
    for (std::size_t j = 0; j < data.size(); ++j)
      if (in_window(data.records[j].event_time, ep) && risks[i] > risks[j]) num += w[j];
  }
  return num / (survivors * wsum);
}

std::vector<double> averaging_grid(double t1, double t2, int n_points) {
  if (n_points < 1) throw ValidationError("averaging_grid: n_points must be >= 1");
  if (!(t1 < t2)) throw ValidationError("averaging_grid: need t1 < t2");
  std::vector<double> out;
  for (int i = 0; i < n_points; ++i) out.push_back(t1 + i * (t2 - t1) / n_points);
  return out;
}

AveragedValue averaged_metric(const std::function<std::optional<double>(double)>& metric,
                              double t1, double t2, int n_points) {
  AveragedValue out;
  double sum = 0.0;
  for (double t : averaging_grid(t1, t2, n_points)) {
    auto v = metric(t);
    if (v) {
      sum += *v;
      ++out.used;
    } else {
      ++out.skipped;
    }
  }
  if (out.used == 0) throw ValidationError("averaged_metric: metric undefined at every point");
  out.value = sum / static_cast<double>(out.used);
  return out;
}

double event_time_percentile(const Dataset& data, double q) {
  if (q < 0.0 || q > 100.0) throw ValidationError("event_time_percentile: q must be in [0, 100]");
  std::vector<double> t;
  for (const auto& r : data.records)
    if (r.event) t.push_back(r.event_time);
  if (t.empty()) throw ValidationError("event_time_percentile: no observed events");
  std::sort(t.begin(), t.end());
  const double pos = q / 100.0 * static_cast<double>(t.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, t.size() - 1);
  return t[lo] + (pos - static_cast<double>(lo)) * (t[hi] - t[lo]);
}

std::vector<double> default_eval_times(const Dataset& data, int n_points) {
  return averaging_grid(event_time_percentile(data, 5.0), event_time_percentile(data, 50.0),
                        n_points);
}

namespace {

AveragedValue mean_of(const std::vector<PointMetrics>& pts,
                      std::optional<double> PointMetrics::*field) {
  AveragedValue out;
  double sum = 0.0;
  for (const auto& p : pts) {
    if (p.*field) {
      sum += *(p.*field);
      ++out.used;
    } else {
      ++out.skipped;
    }
  }
  if (out.used) out.value = sum / static_cast<double>(out.used);
  return out;
}

}  // namespace

MetricReport evaluate_risks(const std::vector<std::vector<double>>& risks, const Dataset& data,
                            std::span<const double> times, double dt,
                            const EvaluationOptions& opt) {
  if (risks.size() != times.size())
    throw ValidationError("evaluate_risks: one risk vector per evaluation time is required");
  if (!(dt > 0.0)) throw ValidationError("evaluate: dt must be positive");
  const CensoringKM g = CensoringKM::fit(data);
  MetricReport rep;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const EvalPoint ep{times[k], dt};
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!opt.at_risk_only || data.records[i].event_time >= ep.t) keep.push_back(i);
    PointMetrics pm;
    pm.ep = ep;
    pm.at_risk = keep.size();
    if (!keep.empty()) {
      const Dataset sub = data.subset(keep);
      std::vector<double> r;
      r.reserve(keep.size());
      for (std::size_t i : keep) r.push_back(risks[k].at(i));
      pm.c_index = c_index(r, sub, ep, &pm.comparable_pairs);
      pm.brier = brier(r, sub, ep);
      pm.weighted_brier = weighted_brier(r, sub, ep, g, opt.wbs, &pm.wbs_excluded);
      pm.auc = auc_td(r, sub, ep, g);
    }
    rep.points.push_back(pm);
  }
  rep.avg_c_index = mean_of(rep.points, &PointMetrics::c_index);
  rep.avg_brier = mean_of(rep.points, &PointMetrics::brier);
  rep.avg_weighted_brier = mean_of(rep.points, &PointMetrics::weighted_brier);
  rep.avg_auc = mean_of(rep.points, &PointMetrics::auc);
  return rep;
}

MetricReport evaluate_model(const IntensityModel& model, const Dataset& data,
                            std::span<const double> times, double dt,
                            const EvaluationOptions& opt) {
  std::vector<std::vector<double>> risks;
  risks.reserve(times.size());
  if (const auto* cox = std::get_if<CoxSigParams>(&model)) {
    const CoxSigPredictor pred(data, cox->depth, cox->plus);
    for (double t : times) risks.push_back(pred.survival(*cox, t, dt, opt.quad));
  } else {
    for (double t : times) {
      std::vector<double> r(data.size(), 1.0);
      for (std::size_t i = 0; i < data.size(); ++i)
        if (!opt.at_risk_only || data.records[i].event_time >= t)
          r[i] = conditional_survival(model, data.records[i], t, dt, opt.quad);
      risks.push_back(std::move(r));
    }
  }
  return evaluate_risks(risks, data, times, dt, opt);
}

}  // namespace sigsurv
