#include "sigsurv/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sigsurv/error.hpp"

namespace sigsurv {

SampledPath::SampledPath(std::vector<double> times, std::vector<double> values,
                         std::size_t channels)
    : times_(std::move(times)), values_(std::move(values)), channels_(channels) {
  if (times_.empty()) throw ValidationError("SampledPath: no observations");
  if (values_.size() != times_.size() * channels_)
    throw ValidationError("SampledPath: values must have one row per time");
  if (times_.front() != 0.0)
    throw ValidationError("SampledPath: first observation must be at time 0");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!std::isfinite(times_[k]))
      throw ValidationError("SampledPath: non-finite time");
    if (k > 0 && !(times_[k] > times_[k - 1]))
      throw ValidationError("SampledPath: times must be strictly increasing");
  }
  for (double v : values_)
    if (!std::isfinite(v)) throw ValidationError("SampledPath: non-finite value");
}

std::size_t SampledPath::last_index_at(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0;
  return static_cast<std::size_t>(it - times_.begin()) - 1;
}

EmbeddedPath::EmbeddedPath(std::vector<double> start, std::vector<Segment> segments,
                           double horizon)
    : start_(std::move(start)), segments_(std::move(segments)), horizon_(horizon) {
  for (const auto& s : segments_)
    if (s.increment.size() != start_.size())
      throw ValidationError("EmbeddedPath: segment dimension mismatch");
}

std::vector<double> EmbeddedPath::point_at(double s) const {
  std::vector<double> x(start_);
  for (const auto& seg : segments_) {
    if (seg.start_time > s) break;
    double frac = 1.0;
    if (seg.kind == SegmentKind::kTimeAdvance && seg.end_time > s)
      frac = (s - seg.start_time) / (seg.end_time - seg.start_time);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += frac * seg.increment[j];
  }
  return x;
}

double EmbeddedPath::one_variation(double t) const {
  double total = 0.0;
  for (const auto& seg : segments_) {
    if (seg.start_time > t) break;
    double norm = std::sqrt(std::inner_product(
        seg.increment.begin(), seg.increment.end(), seg.increment.begin(), 0.0));
    if (seg.kind == SegmentKind::kTimeAdvance && seg.end_time > t)
      norm *= (t - seg.start_time) / (seg.end_time - seg.start_time);
    total += norm;
  }
  return total;
}

EmbeddedPath embed_fill_forward(const SampledPath& path, double horizon) {
  if (path.empty()) throw ValidationError("embed_fill_forward: empty path");
  if (horizon < path.last_time())
    throw ValidationError("embed_fill_forward: horizon precedes last observation");
  const std::size_t raw = path.channels();
  const std::size_t dim = raw + 1;
  std::vector<double> start(dim, 0.0);
  std::copy_n(path.row(0).begin(), raw, start.begin());
  start[raw] = path.time(0);

  std::vector<Segment> segments;
  segments.reserve(2 * path.size() + 1);
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double tk = path.time(k);
    if (k > 0) {
      Segment jump{SegmentKind::kFeatureJump, tk, tk, std::vector<double>(dim, 0.0)};
      for (std::size_t j = 0; j < raw; ++j)
        jump.increment[j] = path.value(k, j) - path.value(k - 1, j);
      segments.push_back(std::move(jump));
    }
    const double next = (k + 1 < path.size()) ? path.time(k + 1) : horizon;
    if (next > tk) {
      Segment adv{SegmentKind::kTimeAdvance, tk, next, std::vector<double>(dim, 0.0)};
      adv.increment[raw] = next - tk;
      segments.push_back(std::move(adv));
    }
  }
  return EmbeddedPath(std::move(start), std::move(segments), horizon);
}

SampledPath restrict_path(const SampledPath& path, double t) {
  const std::size_t keep = path.last_index_at(t) + 1;
  if (keep == path.size()) return path;
  std::vector<double> times(path.times().begin(), path.times().begin() + keep);
  std::vector<double> values(path.values().begin(),
                             path.values().begin() + keep * path.channels());
  return SampledPath(std::move(times), std::move(values), path.channels());
}

double total_variation(const SampledPath& path) {
  double tv = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double dt = path.time(k) - path.time(k - 1);
    double sq = dt * dt;
    for (std::size_t j = 0; j < path.channels(); ++j) {
      const double dx = path.value(k, j) - path.value(k - 1, j);
      sq += dx * dx;
    }
    tv += std::sqrt(sq);
  }
  return tv;
}

double mesh(const SampledPath& path) {
  if (path.size() < 2) throw ValidationError("mesh: need at least two observations");
  double gap = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k)
    gap = std::max(gap, path.time(k) - path.time(k - 1));
  return gap;
}

SampledPath observe_on_grid(const SampledPath& dense, std::size_t keep_every,
                            double stop_at) {
  if (keep_every == 0) throw ValidationError("observe_on_grid: keep_every must be >= 1");
  std::vector<double> times;
  std::vector<double> values;
  for (std::size_t k = 0; k < dense.size(); ++k) {
    if (k > 0 && dense.time(k) > stop_at) break;
    if (k % keep_every != 0) continue;
    times.push_back(dense.time(k));
    auto row = dense.row(k);
    values.insert(values.end(), row.begin(), row.end());
  }
  return SampledPath(std::move(times), std::move(values), dense.channels());
}

void SurvivalRecord::validate() const {
  if (!std::isfinite(event_time) || event_time <= 0.0)
    throw DataError(DataErrorKind::kNonFinite,
                    "record " + id + ": event time must be finite and positive");
  if (path.last_time() > event_time)
    throw DataError(DataErrorKind::kObservationAfterEvent,
                    "record " + id + ": observation after event");
  for (double w : statics)
    if (!std::isfinite(w))
      throw DataError(DataErrorKind::kNonFinite, "record " + id + ": non-finite static");
}

void Dataset::validate() const {
  for (const auto& r : records) {
    r.validate();
    if (r.path.channels() != raw_channels())
      throw ValidationError("dataset: record " + r.id + " has wrong channel count");
    if (r.statics.size() != static_count())
      throw ValidationError("dataset: record " + r.id + " has wrong static count");
    if (r.event_time > horizon)
      throw ValidationError("dataset: record " + r.id + " event time exceeds horizon");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.horizon = horizon;
  out.feature_names = feature_names;
  out.static_names = static_names;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(records.at(i));
  return out;
}

double Dataset::censoring_rate() const {
  if (records.empty()) return 0.0;
  auto censored = std::count_if(records.begin(), records.end(),
                                [](const SurvivalRecord& r) { return !r.event; });
  return static_cast<double>(censored) / static_cast<double>(records.size());
}

double Dataset::mean_observation_count() const {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : records) total += static_cast<double>(r.path.size());
  return total / static_cast<double>(records.size());
}

std::vector<std::string> default_names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t j = 0; j < n; ++j) names.push_back(prefix + std::to_string(j + 1));
  return names;
}

Standardizer Standardizer::fit(const Dataset& data) {
  const std::size_t d = data.raw_channels();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
  double count = 0.0;
  for (const auto& r : data.records) {
    if (r.path.channels() != d)
      throw ValidationError("Standardizer::fit: record channel count does not match schema");
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        const double v = r.path.value(k, j);
        sum[j] += v;
        sumsq[j] += v * v;
      }
      count += 1.0;
    }
  }
  if (count == 0.0) return s;
  for (std::size_t j = 0; j < d; ++j) {
    s.mean[j] = sum[j] / count;
    const double var = sumsq[j] / count - s.mean[j] * s.mean[j];
    s.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

SampledPath Standardizer::apply(const SampledPath& path) const {
  if (path.channels() != mean.size())
    throw ValidationError("Standardizer::apply: channel count mismatch");
  std::vector<double> values(path.values().begin(), path.values().end());
  const std::size_t d = path.channels();
  for (std::size_t k = 0; k < path.size(); ++k)
    for (std::size_t j = 0; j < d; ++j)
      values[k * d + j] = (values[k * d + j] - mean[j]) / scale[j];
  return SampledPath(std::vector<double>(path.times().begin(), path.times().end()),
                     std::move(values), d);
}

Dataset Standardizer::apply(const Dataset& data) const {
  Dataset out = data;
  for (auto& r : out.records) r.path = apply(r.path);
  return out;
}

}  // namespace sigsurv
