#include "sigsurv/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sigsurv/error.hpp"

namespace sigsurv {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Signature just after each observation (jump included), one row per
// observation.
Eigen::MatrixXd observation_signatures(const SampledPath& path, int depth) {
  const int d = static_cast<int>(path.channels()) + 1;
  SigVector sig(d, depth);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(path.size()),
                      static_cast<Eigen::Index>(sig.size()));
  std::vector<double> jump(static_cast<std::size_t>(d), 0.0);
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (k > 0) {
      sig.append_time(path.time(k) - path.time(k - 1));
      bool moved = false;
      for (std::size_t j = 0; j + 1 < jump.size(); ++j) {
        jump[j] = path.value(k, j) - path.value(k - 1, j);
        moved = moved || jump[j] != 0.0;
      }
      if (moved) sig.append_segment(jump);
    }
    const auto c = sig.coefficients();
    for (std::size_t i = 0; i < c.size(); ++i)
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = c[i];
  }
  return out;
}

// Columns j = 0..N: alpha coefficients of words (w, d^j) indexed by w, plus
// the constant part coming from pure time words.
void suffix_matrices(const TimeSuffixTable& table, std::span<const double> alpha,
                     Eigen::MatrixXd& amat, Eigen::VectorXd& a0) {
  const auto q = static_cast<Eigen::Index>(alpha.size());
  amat.setZero(q, table.depth + 1);
  a0.setZero(table.depth + 1);
  for (int j = 0; j <= table.depth; ++j)
    for (const auto& pr : table.by_power[static_cast<std::size_t>(j)]) {
      if (pr.prefix == TimeSuffixTable::kEmptyWord) a0(j) = alpha[pr.word];
      else amat(static_cast<Eigen::Index>(pr.prefix), j) = alpha[pr.word];
    }
}

// u^j / j! for j = 0..n.
void powers(double u, int n, double* out) {
  out[0] = 1.0;
  for (int j = 1; j <= n; ++j) out[j] = out[j - 1] * u / j;
}

[[noreturn]] void overflow(std::size_t rec, double t, double v) {
  throw NumericalError("log-intensity " + std::to_string(v) + " out of range for record " +
                       std::to_string(rec) + " at t = " + std::to_string(t));
}

}  // namespace

CoxSigParams CoxSigParams::zeros(int channels, int depth, std::size_t statics, bool plus) {
  CoxSigParams p;
  p.channels = channels;
  p.depth = depth;
  p.alpha.assign(sig_dim(channels, depth), 0.0);
  p.beta.assign(statics + (plus ? static_cast<std::size_t>(channels - 1) : 0), 0.0);
  p.plus = plus;
  return p;
}

void CoxSigParams::check() const {
  if (channels < 1) throw ValidationError("CoxSigParams: channels must be >= 1");
  if (depth < 1 || depth > kMaxSignatureDepth)
    throw ValidationError("CoxSigParams: depth out of range");
  if (alpha.size() != sig_dim(channels, depth))
    throw ValidationError("CoxSigParams: alpha has the wrong length");
  for (double v : alpha)
    if (!std::isfinite(v)) throw ValidationError("CoxSigParams: non-finite alpha");
  for (double v : beta)
    if (!std::isfinite(v)) throw ValidationError("CoxSigParams: non-finite beta");
}

void NCDEIntensityParams::check() const {
  if (static_cast<int>(alpha.size()) != field.latent_dim())
    throw ValidationError("NCDEIntensityParams: readout size must equal latent dimension");
  if (standardizer.mean.size() + 1 != static_cast<std::size_t>(field.channels()))
    throw ValidationError("NCDEIntensityParams: standardizer does not match field channels");
}

void QuadratureConfig::check() const {
  if (substeps < 1 || window_panels < 1)
    throw ValidationError("QuadratureConfig: substeps must be >= 1");
}

std::vector<double> effective_statics(const SurvivalRecord& r, bool plus) {
  std::vector<double> w(r.statics);
  if (plus) {
    const auto first = r.path.row(0);
    w.insert(w.end(), first.begin(), first.end());
  }
  return w;
}

double LogIntensityCurve::operator()(double s) const {
  auto it = std::upper_bound(breaks.begin(), breaks.end(), s);
  const std::size_t k = it == breaks.begin() ? 0 : static_cast<std::size_t>(it - breaks.begin()) - 1;
  const double u = s - breaks[k];
  double acc = 0.0;
  double pw = 1.0;
  for (Eigen::Index j = 0; j < coef.cols(); ++j) {
    acc += coef(static_cast<Eigen::Index>(k), j) * pw;
    pw *= u / static_cast<double>(j + 1);
  }
  return offset + acc;
}

double LogIntensityCurve::integral_exp(double a, double b, int panels, bool guard) const {
  if (panels < 1) throw ValidationError("integral_exp: panels must be >= 1");
  if (b <= a) return 0.0;
  double total = 0.0;
  const int deg = static_cast<int>(coef.cols()) - 1;
  std::vector<double> pw(static_cast<std::size_t>(deg) + 1);
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    const double end = k + 1 < breaks.size() ? breaks[k + 1] : std::numeric_limits<double>::infinity();
    const double lo = std::max(a, breaks[k]);
    const double hi = std::min(b, end);
    if (hi <= lo) continue;
    const double step = (hi - lo) / panels;
    double piece = 0.0;
    for (int m = 0; m <= panels; ++m) {
      const double s = lo + step * m;
      powers(s - breaks[k], deg, pw.data());
      double v = offset;
      for (int j = 0; j <= deg; ++j) v += coef(static_cast<Eigen::Index>(k), j) * pw[static_cast<std::size_t>(j)];
      if (guard && std::abs(v) > kLogIntensityGuard) overflow(0, s, v);
      const double lam = std::exp(v);
      piece += (m == 0 || m == panels) ? 0.5 * lam : lam;
    }
    total += piece * step;
  }
  if (!std::isfinite(total)) throw NumericalError("integral_exp: non-finite cumulative hazard");
  return total;
}

LogIntensityCurve log_intensity_curve(const IntensityModel& model, const SurvivalRecord& r,
                                      std::optional<double> freeze_at) {
  const SampledPath path = freeze_at ? restrict_path(r.path, *freeze_at) : r.path;
  LogIntensityCurve curve;
  curve.breaks.assign(path.times().begin(), path.times().end());
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CoxSigParams>) {
          p.check();
          if (static_cast<std::size_t>(p.channels) != path.channels() + 1)
            throw ValidationError("log_intensity: model channels do not match record");
          const auto w = effective_statics(r, p.plus);
          if (w.size() != p.beta.size())
            throw ValidationError("log_intensity: beta size does not match statics");
          curve.offset = dot(p.beta, w);
          const auto table = TimeSuffixTable::build(p.channels, p.depth);
          Eigen::MatrixXd amat;
          Eigen::VectorXd a0;
          suffix_matrices(table, p.alpha, amat, a0);
          curve.coef = observation_signatures(path, p.depth) * amat;
          curve.coef.rowwise() += a0.transpose();
        } else {
          p.check();
          if (p.standardizer.mean.size() != path.channels())
            throw ValidationError("log_intensity: model channels do not match record");
          if (r.statics.size() != p.beta.size())
            throw ValidationError("log_intensity: beta size does not match statics");
          curve.offset = dot(p.beta, r.statics);
          const Unroll u =
              unroll(p.field, observation_increments(p.standardizer.apply(path)));
          curve.coef.resize(static_cast<Eigen::Index>(u.z.size()), 1);
          const Eigen::Map<const Eigen::VectorXd> a(p.alpha.data(),
                                                    static_cast<Eigen::Index>(p.alpha.size()));
          for (std::size_t k = 0; k < u.z.size(); ++k)
            curve.coef(static_cast<Eigen::Index>(k), 0) = a.dot(u.z[k]);
        }
      },
      model);
  return curve;
}

double log_intensity(const IntensityModel& model, const SurvivalRecord& r, double s,
                     std::optional<double> freeze_at) {
  if (s < 0.0) throw ValidationError("log_intensity: s must be >= 0");
  const double cut = freeze_at ? std::min(*freeze_at, s) : s;
  return log_intensity_curve(model, r, cut)(s);
}

namespace {

int panels_for(const IntensityModel& model, const QuadratureConfig& quad) {
  // the NCDE intensity is piecewise constant, one panel is exact
  return std::holds_alternative<NCDEIntensityParams>(model) ? 1 : quad.substeps;
}

}  // namespace

double neg_log_likelihood(const IntensityModel& model, const Dataset& data,
                          const QuadratureConfig& quad) {
  quad.check();
  if (data.size() == 0) throw ValidationError("neg_log_likelihood: empty dataset");
  const int panels = panels_for(model, quad);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    const auto curve = log_intensity_curve(model, r);
    double cum = 0.0;
    try {
      cum = curve.integral_exp(0.0, r.event_time, panels, true);
    } catch (const NumericalError&) {
      throw NumericalError("neg_log_likelihood: log-intensity out of range for record " +
                           std::to_string(i));
    }
    total += cum;
    if (r.event) {
      const double v = curve(r.event_time);
      if (std::abs(v) > kLogIntensityGuard) overflow(i, r.event_time, v);
      total -= v;
    }
  }
  return total / static_cast<double>(data.size());
}

double cumulative_hazard(const IntensityModel& model, const SurvivalRecord& r, double t,
                         const QuadratureConfig& quad) {
  quad.check();
  if (t < 0.0) throw ValidationError("cumulative_hazard: t must be >= 0");
  return log_intensity_curve(model, r).integral_exp(0.0, std::min(t, r.event_time),
                                                    panels_for(model, quad));
}

double conditional_survival(const IntensityModel& model, const SurvivalRecord& r, double t,
                            double dt, const QuadratureConfig& quad) {
  quad.check();
  if (t < 0.0 || dt < 0.0) throw ValidationError("conditional_survival: t, dt must be >= 0");
  if (dt == 0.0) return 1.0;
  const auto curve = log_intensity_curve(model, r, t);
  const int panels = std::holds_alternative<NCDEIntensityParams>(model) ? 1 : quad.window_panels;
  const double v = std::exp(-curve.integral_exp(t, t + dt, panels));
  if (!std::isfinite(v)) throw NumericalError("conditional_survival: non-finite value");
  return v;
}

std::vector<double> survival_predictions(const IntensityModel& model, const Dataset& data,
                                         double t, double dt, const QuadratureConfig& quad) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& r : data.records) out.push_back(conditional_survival(model, r, t, dt, quad));
  return out;
}

CoxSigProblem::CoxSigProblem(const Dataset& data, int depth, bool plus,
                             const QuadratureConfig& quad)
    : depth_(depth), plus_(plus), quad_(quad) {
  quad.check();
  if (data.size() == 0) throw ValidationError("CoxSigProblem: empty dataset");
  d_ = static_cast<int>(data.raw_channels()) + 1;
  q_ = sig_dim(d_, depth);
  s_ = data.static_count() + (plus ? data.raw_channels() : 0);
  table_ = TimeSuffixTable::build(d_, depth);
  recs_.reserve(data.size());
  for (const auto& r : data.records) {
    Rec rec;
    rec.sig = observation_signatures(r.path, depth);
    const std::size_t k = r.path.size();
    rec.h.resize(k);
    for (std::size_t i = 0; i + 1 < k; ++i) rec.h[i] = r.path.time(i + 1) - r.path.time(i);
    rec.h[k - 1] = r.event_time - r.path.last_time();
    const auto w = effective_statics(r, plus);
    rec.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    rec.event = r.event;
    recs_.push_back(std::move(rec));
  }
}

double CoxSigProblem::nll(const CoxSigParams& p) const { return evaluate(p, nullptr); }

std::vector<double> CoxSigProblem::feature_second_moments() const {
  std::vector<double> m(q_ + s_, 0.0);
  double total = 0.0;
  for (const Rec& r : recs_) {
    for (Eigen::Index k = 0; k < r.sig.rows(); ++k) {
      const double h = r.h[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < q_; ++i) {
        const double v = r.sig(k, static_cast<Eigen::Index>(i));
        m[i] += h * v * v;
      }
      for (std::size_t j = 0; j < s_; ++j) {
        const double v = r.w(static_cast<Eigen::Index>(j));
        m[q_ + j] += h * v * v;
      }
      total += h;
    }
  }
  if (total > 0.0)
    for (double& v : m) v /= total;
  return m;
}

double CoxSigProblem::nll_and_gradient(const CoxSigParams& p, CoxSigGradient& g) const {
  return evaluate(p, &g);
}

double CoxSigProblem::evaluate(const CoxSigParams& p, CoxSigGradient* g) const {
  if (p.alpha.size() != q_ || p.beta.size() != s_ || p.depth != depth_)
    throw ValidationError("CoxSigProblem: parameter shape mismatch");
  const int n_pow = depth_;
  Eigen::MatrixXd amat;
  Eigen::VectorXd a0;
  suffix_matrices(table_, p.alpha, amat, a0);
  const Eigen::Map<const Eigen::VectorXd> beta(p.beta.data(), static_cast<Eigen::Index>(s_));

  Eigen::MatrixXd gext;
  Eigen::VectorXd g0;
  Eigen::VectorXd gbeta;
  if (g) {
    gext.setZero(static_cast<Eigen::Index>(q_), n_pow + 1);
    g0.setZero(n_pow + 1);
    gbeta.setZero(static_cast<Eigen::Index>(s_));
  }
  const int panels = quad_.substeps;
  std::vector<double> pw(static_cast<std::size_t>(n_pow) + 1);
  Eigen::MatrixXd coef;
  Eigen::MatrixXd moments;
  double total = 0.0;
  for (std::size_t i = 0; i < recs_.size(); ++i) {
    const Rec& r = recs_[i];
    const double off = s_ ? beta.dot(r.w) : 0.0;
    coef.noalias() = r.sig * amat;
    coef.rowwise() += a0.transpose();
    const auto kk = coef.rows();
    if (g) moments.setZero(kk, n_pow + 1);
    double cum = 0.0;
    double t0 = 0.0;
    for (Eigen::Index k = 0; k < kk; ++k) {
      const double h = r.h[static_cast<std::size_t>(k)];
      const double step = h / panels;
      for (int m = 0; m <= panels; ++m) {
        const double u = step * m;
        powers(u, n_pow, pw.data());
        double v = off;
        for (int j = 0; j <= n_pow; ++j) v += coef(k, j) * pw[static_cast<std::size_t>(j)];
        if (std::abs(v) > kLogIntensityGuard) overflow(i, t0 + u, v);
        const double wl = ((m == 0 || m == panels) ? 0.5 : 1.0) * step * std::exp(v);
        cum += wl;
        if (g)
          for (int j = 0; j <= n_pow; ++j) moments(k, j) += wl * pw[static_cast<std::size_t>(j)];
      }
      t0 += h;
    }
    total += cum;
    if (r.event) {
      const Eigen::Index last = kk - 1;
      powers(r.h.back(), n_pow, pw.data());
      double v = off;
      for (int j = 0; j <= n_pow; ++j) v += coef(last, j) * pw[static_cast<std::size_t>(j)];
      if (std::abs(v) > kLogIntensityGuard) overflow(i, t0, v);
      total -= v;
      if (g)
        for (int j = 0; j <= n_pow; ++j) moments(last, j) -= pw[static_cast<std::size_t>(j)];
    }
    if (g) {
      gext.noalias() += r.sig.transpose() * moments;
      g0 += moments.colwise().sum().transpose();
      if (s_) gbeta += r.w * (cum - (r.event ? 1.0 : 0.0));
    }
  }
  const double n = static_cast<double>(recs_.size());
  if (!std::isfinite(total)) throw NumericalError("CoxSigProblem: non-finite likelihood");
  if (g) {
    g->alpha.assign(q_, 0.0);
    for (int j = 0; j <= n_pow; ++j)
      for (const auto& pr : table_.by_power[static_cast<std::size_t>(j)]) {
        const double v = pr.prefix == TimeSuffixTable::kEmptyWord
                             ? g0(j)
                             : gext(static_cast<Eigen::Index>(pr.prefix), j);
        g->alpha[pr.word] += v / n;
      }
    g->beta.assign(s_, 0.0);
    for (std::size_t b = 0; b < s_; ++b) g->beta[b] = gbeta(static_cast<Eigen::Index>(b)) / n;
  }
  return total / n;
}

CoxSigPredictor::CoxSigPredictor(const Dataset& data, int depth, bool plus)
    : depth_(depth), plus_(plus) {
  d_ = static_cast<int>(data.raw_channels()) + 1;
  table_ = TimeSuffixTable::build(d_, depth);
  for (const auto& r : data.records) {
    Rec rec;
    rec.times.assign(r.path.times().begin(), r.path.times().end());
    rec.sig = observation_signatures(r.path, depth);
    const auto w = effective_statics(r, plus);
    rec.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    recs_.push_back(std::move(rec));
  }
}

std::vector<double> CoxSigPredictor::survival(const CoxSigParams& p, double t, double dt,
                                              const QuadratureConfig& quad) const {
  quad.check();
  if (p.depth != depth_ || p.channels != d_ || p.plus != plus_)
    throw ValidationError("CoxSigPredictor: parameters do not match the cached signatures");
  if (t < 0.0 || dt < 0.0) throw ValidationError("CoxSigPredictor: t, dt must be >= 0");
  Eigen::MatrixXd amat;
  Eigen::VectorXd a0;
  suffix_matrices(table_, p.alpha, amat, a0);
  const Eigen::Map<const Eigen::VectorXd> beta(p.beta.data(), static_cast<Eigen::Index>(p.beta.size()));
  std::vector<double> out;
  out.reserve(recs_.size());
  LogIntensityCurve curve;
  curve.breaks.resize(1);
  for (const auto& r : recs_) {
    if (dt == 0.0) {
      out.push_back(1.0);
      continue;
    }
    auto it = std::upper_bound(r.times.begin(), r.times.end(), t);
    const auto k = static_cast<Eigen::Index>(it == r.times.begin() ? 0 : (it - r.times.begin()) - 1);
    curve.breaks[0] = r.times[static_cast<std::size_t>(k)];
    curve.coef = r.sig.row(k) * amat;
    curve.coef += a0.transpose();
    curve.offset = p.beta.empty() ? 0.0 : beta.dot(r.w);
    const double v = std::exp(-curve.integral_exp(t, t + dt, quad.window_panels));
    if (!std::isfinite(v)) throw NumericalError("CoxSigPredictor: non-finite survival");
    out.push_back(v);
  }
  return out;
}

CoxSigGradient nll_gradient_coxsig(const CoxSigParams& p, const Dataset& data,
                                   const QuadratureConfig& quad) {
  CoxSigProblem prob(data, p.depth, p.plus, quad);
  CoxSigGradient g;
  prob.nll_and_gradient(p, g);
  return g;
}

double ncde_nll_and_gradient(const NCDEIntensityParams& p, const Dataset& standardized,
                             std::span<const std::size_t> batch, NCDEGradient* g) {
  p.check();
  if (batch.empty()) throw ValidationError("ncde_nll_and_gradient: empty batch");
  const int pdim = p.field.latent_dim();
  const Eigen::Map<const Eigen::VectorXd> alpha(p.alpha.data(), pdim);
  if (g) {
    g->field.set_zero_like(p.field);
    g->alpha.assign(p.alpha.size(), 0.0);
    g->beta.assign(p.beta.size(), 0.0);
  }
  Eigen::VectorXd galpha = Eigen::VectorXd::Zero(pdim);
  double total = 0.0;
  std::vector<Eigen::VectorXd> gz;
  for (std::size_t idx : batch) {
    const auto& r = standardized.records.at(idx);
    if (r.statics.size() != p.beta.size())
      throw ValidationError("ncde_nll_and_gradient: beta size does not match statics");
    const Unroll u = unroll(p.field, observation_increments(r.path));
    const double off = dot(p.beta, r.statics);
    const std::size_t kk = u.z.size();
    double cum = 0.0;
    if (g) gz.assign(kk, Eigen::VectorXd::Zero(pdim));
    double last_v = 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
      const double h = k + 1 < kk ? r.path.time(k + 1) - r.path.time(k)
                                  : r.event_time - r.path.last_time();
      const double v = off + alpha.dot(u.z[k]);
      if (std::abs(v) > kLogIntensityGuard) overflow(idx, r.path.time(k), v);
      const double wl = h * std::exp(v);
      cum += wl;
      if (g) {
        gz[k] = alpha * wl;
        galpha += u.z[k] * wl;
      }
      last_v = v;
    }
    total += cum;
    if (r.event) {
      total -= last_v;
      if (g) {
        gz[kk - 1] -= alpha;
        galpha -= u.z[kk - 1];
      }
    }
    if (g) {
      bptt(p.field, u, gz, g->field);
      for (std::size_t b = 0; b < p.beta.size(); ++b)
        g->beta[b] += r.statics[b] * (cum - (r.event ? 1.0 : 0.0));
    }
  }
  const double n = static_cast<double>(batch.size());
  if (!std::isfinite(total)) throw NumericalError("ncde_nll_and_gradient: non-finite loss");
  if (g) {
    g->field *= 1.0 / n;
    for (int i = 0; i < pdim; ++i) g->alpha[static_cast<std::size_t>(i)] = galpha(i) / n;
    for (double& b : g->beta) b /= n;
  }
  return total / n;
}

}  // namespace sigsurv
