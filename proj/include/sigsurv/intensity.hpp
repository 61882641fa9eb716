#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "sigsurv/latentcde.hpp"
#include "sigsurv/signature.hpp"
#include "sigsurv/timeseries.hpp"

namespace sigsurv {

/// log lambda(s) = alpha . S_N(x^D_[0,s]) + beta . W.
/// With `plus`, W is the record's statics followed by its first observation.
struct CoxSigParams {
  int channels = 0;  // d, time channel included
  int depth = 2;
  std::vector<double> alpha;  // sig_dim(channels, depth)
  std::vector<double> beta;
  bool plus = false;

  static CoxSigParams zeros(int channels, int depth, std::size_t statics, bool plus);
  void check() const;
};

/// log lambda(s) = alpha . z(s) + beta . W with z from the controlled ResNet on
/// standardized features; z is constant between observations.
struct NCDEIntensityParams {
  NeuralField field;
  std::vector<double> alpha;  // latent dimension
  std::vector<double> beta;
  Standardizer standardizer;

  void check() const;
};

using IntensityModel = std::variant<CoxSigParams, NCDEIntensityParams>;

struct QuadratureConfig {
  int substeps = 4;         // trapezoid panels per observation interval
  int window_panels = 32;   // panels for a prediction window [t, t + dt]
  void check() const;
};

/// Beyond this |log lambda| the likelihood refuses to continue.
inline constexpr double kLogIntensityGuard = 50.0;

/// Static covariates a model sees for one record.
std::vector<double> effective_statics(const SurvivalRecord& r, bool plus);

/// Piecewise log-intensity: on [breaks[k], breaks[k+1]) it equals
/// offset + sum_j coef(k, j) u^j / j!, u = s - breaks[k]. The last piece
/// extends to infinity (features frozen, time keeps moving).
struct LogIntensityCurve {
  std::vector<double> breaks;
  Eigen::MatrixXd coef;
  double offset = 0.0;

  double operator()(double s) const;
  /// Trapezoid integral of exp(curve) over [a, b] with `panels` per piece
  /// overlap. Throws NumericalError past the log-intensity guard when
  /// `guard` is set.
  double integral_exp(double a, double b, int panels, bool guard = false) const;
};

/// Log-intensity of `model` along the record's path, using observations at
/// times <= freeze_at only (all of them when absent).
LogIntensityCurve log_intensity_curve(const IntensityModel& model, const SurvivalRecord& r,
                                      std::optional<double> freeze_at = std::nullopt);

/// log lambda(s) with features frozen at min(s, freeze_at).
double log_intensity(const IntensityModel& model, const SurvivalRecord& r, double s,
                     std::optional<double> freeze_at = std::nullopt);

/// (1/n) sum_i [ int_0^{T_i} lambda ds - Delta_i log lambda(T_i) ].
double neg_log_likelihood(const IntensityModel& model, const Dataset& data,
                          const QuadratureConfig& quad = {});

/// Integral of lambda Y over [0, t].
double cumulative_hazard(const IntensityModel& model, const SurvivalRecord& r, double t,
                         const QuadratureConfig& quad = {});

/// exp(-int_t^{t+dt} lambda(u | features up to t) du).
double conditional_survival(const IntensityModel& model, const SurvivalRecord& r, double t,
                            double dt, const QuadratureConfig& quad = {});

std::vector<double> survival_predictions(const IntensityModel& model, const Dataset& data,
                                         double t, double dt, const QuadratureConfig& quad = {});

struct CoxSigGradient {
  std::vector<double> alpha;
  std::vector<double> beta;
};

/// Signatures at every observation of every record, computed once and reused
/// for any (alpha, beta) of the given depth.
class CoxSigProblem {
 public:
  CoxSigProblem(const Dataset& data, int depth, bool plus, const QuadratureConfig& quad = {});

  int channels() const noexcept { return d_; }
  int depth() const noexcept { return depth_; }
  bool plus() const noexcept { return plus_; }
  std::size_t alpha_size() const noexcept { return q_; }
  std::size_t beta_size() const noexcept { return s_; }
  std::size_t size() const noexcept { return recs_.size(); }

  double nll(const CoxSigParams& p) const;
  double nll_and_gradient(const CoxSigParams& p, CoxSigGradient& g) const;

  /// Time-weighted second moment of every feature (alpha block, then beta)
  /// over the at-risk intervals; the diagonal preconditioner of the solver.
  std::vector<double> feature_second_moments() const;

 private:
  struct Rec {
    Eigen::MatrixXd sig;       // K x q, signature just after each observation
    std::vector<double> h;     // interval lengths, last one ends at T
    Eigen::VectorXd w;
    bool event = false;
  };
  double evaluate(const CoxSigParams& p, CoxSigGradient* g) const;

  int d_ = 0;
  int depth_ = 0;
  bool plus_ = false;
  std::size_t q_ = 0;
  std::size_t s_ = 0;
  QuadratureConfig quad_;
  TimeSuffixTable table_;
  std::vector<Rec> recs_;
};

/// Fast conditional survival for many parameter vectors on a fixed set of
/// records: observation signatures are cached once.
class CoxSigPredictor {
 public:
  CoxSigPredictor(const Dataset& data, int depth, bool plus);
  std::size_t size() const noexcept { return recs_.size(); }
  /// r_i(t, dt) for every record i.
  std::vector<double> survival(const CoxSigParams& p, double t, double dt,
                               const QuadratureConfig& quad = {}) const;

 private:
  struct Rec {
    std::vector<double> times;
    Eigen::MatrixXd sig;
    Eigen::VectorXd w;
  };
  int d_ = 0;
  int depth_ = 0;
  bool plus_ = false;
  TimeSuffixTable table_;
  std::vector<Rec> recs_;
};

CoxSigGradient nll_gradient_coxsig(const CoxSigParams& p, const Dataset& data,
                                   const QuadratureConfig& quad = {});

/// Gradient of the NCDE negative log-likelihood over `data` (already
/// standardized by the caller's standardizer).
struct NCDEGradient {
  NeuralField::Gradient field;
  std::vector<double> alpha;
  std::vector<double> beta;
};
double ncde_nll_and_gradient(const NCDEIntensityParams& p, const Dataset& standardized,
                             std::span<const std::size_t> batch, NCDEGradient* g);

}  // namespace sigsurv
