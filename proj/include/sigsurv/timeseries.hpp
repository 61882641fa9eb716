#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sigsurv {

/// Irregularly sampled multivariate series. Row k holds the raw features
/// observed at times()[k]. The first observation is at time 0 and times are
/// strictly increasing; every value is finite.
class SampledPath {
 public:
  SampledPath() = default;
  SampledPath(std::vector<double> times, std::vector<double> values,
              std::size_t channels);

  std::size_t size() const noexcept { return times_.size(); }
  std::size_t channels() const noexcept { return channels_; }
  bool empty() const noexcept { return times_.empty(); }

  double time(std::size_t k) const { return times_[k]; }
  double last_time() const { return times_.back(); }
  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> row(std::size_t k) const {
    return {values_.data() + k * channels_, channels_};
  }
  double value(std::size_t k, std::size_t j) const {
    return values_[k * channels_ + j];
  }
  std::span<const double> values() const noexcept { return values_; }

  /// Index of the last observation at or before t (0 if t precedes all).
  std::size_t last_index_at(double t) const;

  bool operator==(const SampledPath&) const = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  std::size_t channels_ = 0;
};

enum class SegmentKind { kTimeAdvance, kFeatureJump };

/// One linear piece of the time-augmented fill-forward path.
struct Segment {
  SegmentKind kind;
  double start_time;
  double end_time;  // equals start_time for feature jumps
  std::vector<double> increment;  // length dim(), time channel last
};

/// Fill-forward embedding x^D(s) = (X(t_k), s) for s in [t_k, t_{k+1}).
/// Feature jumps are zero-duration segments; the time channel is the last
/// coordinate.
class EmbeddedPath {
 public:
  EmbeddedPath(std::vector<double> start, std::vector<Segment> segments,
               double horizon);

  std::size_t dim() const noexcept { return start_.size(); }
  double horizon() const noexcept { return horizon_; }
  std::span<const double> start() const noexcept { return start_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  /// Path value at time s, with all jumps at times <= s applied.
  std::vector<double> point_at(double s) const;

  /// Length of the embedded path on [0, t] (sum of Euclidean segment norms).
  double one_variation(double t) const;

 private:
  std::vector<double> start_;
  std::vector<Segment> segments_;
  double horizon_;
};

EmbeddedPath embed_fill_forward(const SampledPath& path, double horizon);

/// Observations with times <= t. Always keeps the initial observation.
SampledPath restrict_path(const SampledPath& path, double t);

/// Sum over consecutive observations of the Euclidean norm of the
/// time-augmented increment (X(t_{k+1}) - X(t_k), t_{k+1} - t_k).
double total_variation(const SampledPath& path);

/// Largest gap between consecutive observation times.
double mesh(const SampledPath& path);

/// Keeps every keep_every-th row (row 0 always) with time <= stop_at.
SampledPath observe_on_grid(const SampledPath& dense, std::size_t keep_every,
                            double stop_at);

/// Subject-level survival data. Observations never extend past event_time.
struct SurvivalRecord {
  SampledPath path;
  std::vector<double> statics;
  double event_time = 0.0;
  bool event = false;
  std::string id;

  void validate() const;
  /// At-risk indicator Y(t) = 1{t <= T}.
  bool at_risk(double t) const noexcept { return t <= event_time; }
  /// Counting process N(t): one jump at T if the event was observed.
  int count(double t) const noexcept { return (event && t >= event_time) ? 1 : 0; }
};

struct Dataset {
  std::vector<SurvivalRecord> records;
  double horizon = 0.0;
  std::vector<std::string> feature_names;
  std::vector<std::string> static_names;

  std::size_t size() const noexcept { return records.size(); }
  std::size_t raw_channels() const noexcept { return feature_names.size(); }
  std::size_t static_count() const noexcept { return static_names.size(); }

  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  double censoring_rate() const;
  double mean_observation_count() const;
};

/// Default feature/static names "f1".."fd", "stat1".."stats".
std::vector<std::string> default_names(const std::string& prefix, std::size_t n);

/// Per-channel affine rescaling of the raw features (time untouched).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& data);
  static Standardizer identity(std::size_t channels);
  SampledPath apply(const SampledPath& path) const;
  Dataset apply(const Dataset& data) const;
};

}  // namespace sigsurv
