#include "sigsurv/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "sigsurv/error.hpp"

namespace sigsurv {

namespace {

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> kNodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                       0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kWeights{0.2369268850561891, 0.4786286704993665,
                                         0.5688888888888889, 0.4786286704993665,
                                         0.2369268850561891};

// Calls f(s, w) for every quadrature node of [0, T] split at `breaks`.
template <class F>
void quadrature(const std::vector<double>& breaks, double T, int panels, F&& f) {
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    const double lo = breaks[k];
    const double hi = std::min(T, k + 1 < breaks.size() ? breaks[k + 1] : T);
    if (hi <= lo) continue;
    const double h = (hi - lo) / panels;
    for (int m = 0; m < panels; ++m) {
      const double mid = lo + (m + 0.5) * h;
      for (std::size_t q = 0; q < kNodes.size(); ++q)
        f(mid + 0.5 * h * kNodes[q], 0.5 * h * kWeights[q]);
    }
  }
}

double phi(double m) { return std::expm1(m) - m; }

}  // namespace

DivergenceTriple empirical_divergences(const LogIntensityFn& truth, const IntensityModel& model,
                                       const Dataset& data, int panels) {
  if (panels < 1) throw ValidationError("empirical_divergences: panels must be >= 1");
  if (data.size() == 0) throw ValidationError("empirical_divergences: empty dataset");
  DivergenceTriple out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    const LogIntensityCurve curve = log_intensity_curve(model, r);
    double kl = 0.0, tv = 0.0, d2 = 0.0, cum_m = 0.0, cum_t = 0.0;
    quadrature(curve.breaks, r.event_time, panels, [&](double s, double w) {
      const double lm = curve(s);
      const double lt = truth(i, s);
      if (std::abs(lm) > kLogIntensityGuard || std::abs(lt) > kLogIntensityGuard)
        throw NumericalError("empirical_divergences: log-intensity out of range");
      const double m = std::exp(lm), t = std::exp(lt), gap = lm - lt;
      kl += w * (m - t - t * gap);
      tv += w * std::abs(t - m);
      d2 += w * gap * gap * t;
      cum_m += w * m;
      cum_t += w * t;
      out.max_log_gap = std::max(out.max_log_gap, std::abs(gap));
    });
    out.kl += kl;
    out.tv += tv;
    out.d2 += d2;
    out.max_cum_model = std::max(out.max_cum_model, cum_m);
    out.max_cum_truth = std::max(out.max_cum_truth, cum_t);
  }
  const double n = static_cast<double>(data.size());
  out.kl /= n;
  out.tv /= n;
  out.d2 /= n;
  // KL is a sum of nonnegative integrands; clear rounding noise only
  if (out.kl < 0.0 && out.kl > -1e-14) out.kl = 0.0;
  return out;
}

DivergenceTriple empirical_divergences(const IntensityModel& truth, const IntensityModel& model,
                                       const Dataset& data, int panels) {
  std::vector<LogIntensityCurve> curves;
  curves.reserve(data.size());
  for (const auto& r : data.records) curves.push_back(log_intensity_curve(truth, r));
  return empirical_divergences([&](std::size_t i, double s) { return curves[i](s); }, model, data,
                               panels);
}

void TheoryConstants::check() const {
  for (double v : {L_x, L_G, G0_op, B_beta2, B_W, tau, B_alpha})
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("TheoryConstants: values must be finite and >= 0");
  if (!(tau > 0.0)) throw ValidationError("TheoryConstants: tau must be positive");
}

double TheoryConstants::truth_exponent() const {
  return latent_bound(G0_op, L_G, L_x, tau);
}

double TheoryConstants::model_exponent() const { return B_alpha * std::exp(L_x * tau); }

SandwichConstants theory_constants(const TheoryConstants& k) {
  k.check();
  const double static_part = std::exp(k.B_beta2 * k.B_W);
  const double truth_sup = std::exp(k.truth_exponent());
  const double model_sup = std::exp(k.model_exponent());
  SandwichConstants c;
  // weights follow the proof: 4/3 on the model hazard, 2/3 on the truth
  c.c1 = 1.0 / (k.tau * static_part * (4.0 / 3.0 * model_sup + 2.0 / 3.0 * truth_sup));
  const double M = static_part * (truth_sup + model_sup);
  c.c2 = std::isfinite(M) ? phi(M) / M : std::numeric_limits<double>::infinity();
  return c;
}

SandwichConstants empirical_constants(const DivergenceTriple& t) {
  SandwichConstants c;
  const double denom = 4.0 / 3.0 * t.max_cum_model + 2.0 / 3.0 * t.max_cum_truth;
  c.c1 = denom > 0.0 ? 1.0 / denom : std::numeric_limits<double>::infinity();
  const double M = t.max_log_gap;
  c.c2 = M < 1e-6 ? 0.5 + M / 6.0 : phi(M) / (M * M);
  return c;
}

SandwichCheck pinsker_sandwich_check(const DivergenceTriple& t, const SandwichConstants& c) {
  SandwichCheck out;
  out.constants = c;
  const double lower = c.c1 * t.tv * t.tv;
  // an infinite constant times a zero divergence is a vacuous 0 bound
  const double upper = t.d2 == 0.0 ? 0.0 : c.c2 * t.d2;
  out.lower_slack = t.tv == 0.0 ? t.kl : t.kl - lower;
  out.upper_slack = upper - t.kl;
  const double tol = 1e-12 * (1.0 + std::abs(t.kl));
  out.pass = out.lower_slack >= -tol && out.upper_slack >= -tol;
  return out;
}

Polynomial differential_product(const Polynomial& f, const Polynomial& g) {
  return g.derivative() * f;
}

Polynomial iterated_product(const PolynomialScalarField& g, const Word& w) {
  if (w.letters.empty()) throw ValidationError("iterated_product: empty word");
  const int d = static_cast<int>(g.channels.size());
  for (int l : w.letters)
    if (l < 1 || l > d) throw ValidationError("iterated_product: letter outside the alphabet");
  Polynomial acc = g.channels[static_cast<std::size_t>(w.letters.back() - 1)];
  for (std::size_t k = w.letters.size() - 1; k-- > 0;)
    acc = differential_product(g.channels[static_cast<std::size_t>(w.letters[k] - 1)], acc);
  return acc;
}

std::vector<double> linearize_vector_field(const PolynomialScalarField& g, int depth) {
  const int d = static_cast<int>(g.channels.size());
  if (d < 1) throw ValidationError("linearize_vector_field: empty field");
  if (depth < 1 || depth > kMaxSignatureDepth)
    throw ValidationError("linearize_vector_field: depth outside [1, " +
                          std::to_string(kMaxSignatureDepth) + "]");
  std::vector<double> alpha(sig_dim(d, depth));
  for (std::size_t i = 0; i < alpha.size(); ++i)
    alpha[i] = iterated_product(g, word_at(i, d, depth))(0.0);
  return alpha;
}

PolynomialScalarField affine_scalar_field(const std::vector<double>& a,
                                          const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("affine_scalar_field: size mismatch");
  PolynomialScalarField g;
  for (std::size_t j = 0; j < a.size(); ++j) g.channels.emplace_back(std::vector<double>{b[j], a[j]});
  return g;
}

AffineScalarSolution::AffineScalarSolution(std::vector<double> a, std::vector<double> b,
                                           const EmbeddedPath& path)
    : a_(std::move(a)), b_(std::move(b)), segs_(path.segments()) {
  if (a_.size() != path.dim() || b_.size() != path.dim())
    throw ValidationError("AffineScalarSolution: field does not match the path dimension");
  double z = 0.0;
  z_start_.reserve(segs_.size() + 1);
  for (const auto& s : segs_) {
    z_start_.push_back(z);
    z = advance(z, s.increment, 1.0);
  }
  z_start_.push_back(z);
}

double AffineScalarSolution::advance(double z, std::span<const double> inc, double fraction) const {
  double A = 0.0, B = 0.0;
  for (std::size_t j = 0; j < inc.size(); ++j) {
    A += a_[j] * inc[j] * fraction;
    B += b_[j] * inc[j] * fraction;
  }
  // z' = A z + B over unit parameter time
  const double e = std::expm1(A);
  return z + e * z + (std::abs(A) < 1e-300 ? B : B * e / A);
}

double AffineScalarSolution::operator()(double t) const {
  if (segs_.empty() || t < segs_.front().start_time) return 0.0;
  auto it = std::upper_bound(segs_.begin(), segs_.end(), t,
                             [](double v, const Segment& s) { return v < s.start_time; });
  const std::size_t k = static_cast<std::size_t>(it - segs_.begin()) - 1;
  const Segment& s = segs_[k];
  double fraction = 1.0;
  if (s.kind == SegmentKind::kTimeAdvance)
    fraction = std::min(1.0, (t - s.start_time) / (s.end_time - s.start_time));
  return advance(z_start_[k], s.increment, fraction);
}

double gamma_k(const PolynomialScalarField& g, int k, double M, int grid) {
  const int d = static_cast<int>(g.channels.size());
  if (k < 1 || d < 1 || grid < 2 || M < 0.0) throw ValidationError("gamma_k: bad arguments");
  // all words of length k, built from the right: P(i w) = P(w)' G^i
  std::vector<Polynomial> level(g.channels.begin(), g.channels.end());
  for (int len = 2; len <= k; ++len) {
    std::vector<Polynomial> next;
    next.reserve(level.size() * static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
      for (const auto& p : level) next.push_back(differential_product(g.channels[static_cast<std::size_t>(i)], p));
    level = std::move(next);
  }
  double best = 0.0;
  for (const auto& p : level) {
    if (p.is_zero()) continue;
    for (int m = 0; m < grid; ++m) {
      const double h = -M + 2.0 * M * m / (grid - 1);
      best = std::max(best, std::abs(p(h)));
    }
  }
  return best;
}

double latent_bound(double G0_op, double L_G, double L_x, double t) {
  return G0_op * L_x * t * std::exp(L_G * L_x * t);
}

double truncation_bias_bound(const PolynomialScalarField& g, int depth, double L_x, double t,
                             double M, int grid) {
  const double d = static_cast<double>(g.channels.size());
  const double gamma = gamma_k(g, depth + 1, M, grid);
  if (gamma == 0.0) return 0.0;
  return std::exp((depth + 1) * std::log(d * L_x * t) - std::lgamma(depth + 2.0)) * gamma;
}

double c3_constant(int depth, double L_x, double t) {
  if (depth < 1) throw ValidationError("c3_constant: depth must be >= 1");
  const double r = L_x * t;
  double geo = 0.0, pw = 1.0;
  for (int j = 0; j <= depth - 2; ++j) {
    geo += pw;
    pw *= r;
  }
  return 2.0 * std::numbers::e * geo * L_x;
}

double factorial_decay_ratio(const EmbeddedPath& path, double t, int depth) {
  const SigVector sig = path_signature(path, t, depth);
  const double len = path.one_variation(t);
  double worst = 0.0;
  for (int k = 1; k <= depth; ++k) {
    double sq = 0.0;
    for (double v : sig.level(k)) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm == 0.0) continue;
    const double bound = std::exp(k * std::log(len) - std::lgamma(k + 1.0));
    worst = std::max(worst, norm / bound);
  }
  return worst;
}

SigVector linear_signature(const SampledPath& dense, int depth) {
  const std::size_t ch = dense.channels();
  SigVector sig(static_cast<int>(ch) + 1, depth);
  std::vector<double> inc(ch + 1);
  for (std::size_t k = 1; k < dense.size(); ++k) {
    for (std::size_t j = 0; j < ch; ++j) inc[j] = dense.value(k, j) - dense.value(k - 1, j);
    inc[ch] = dense.time(k) - dense.time(k - 1);
    sig.append_segment(inc);
  }
  return sig;
}

DiscretizationReport discretization_check(const SampledPath& dense, std::span<const double> alpha,
                                          int depth, int levels) {
  if (levels < 3) throw ValidationError("discretization_check: need at least 3 refinement levels");
  const std::size_t step_max = std::size_t{1} << levels;
  if (dense.size() <= step_max)
    throw ValidationError("discretization_check: dense path too short for the requested levels");
  const int d = static_cast<int>(dense.channels()) + 1;
  if (alpha.size() != sig_dim(d, depth))
    throw ValidationError("discretization_check: alpha does not match the signature size");
  const double horizon = dense.last_time();
  const SigVector full = linear_signature(dense, depth);
  const double L_x = total_variation(dense) / horizon;
  const double c3 = c3_constant(depth, L_x, horizon);
  double anorm = 0.0;
  for (double a : alpha) anorm += a * a;
  anorm = std::sqrt(anorm);

  DiscretizationReport rep;
  rep.bound_holds = true;
  for (int l = 1; l <= levels; ++l) {
    const SampledPath sub = observe_on_grid(dense, std::size_t{1} << l, horizon);
    double gap = horizon - sub.last_time();
    for (std::size_t k = 1; k < sub.size(); ++k) gap = std::max(gap, sub.time(k) - sub.time(k - 1));
    const SigVector coarse = path_signature(embed_fill_forward(sub, horizon), horizon, depth);
    double err = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) err += alpha[i] * (full[i] - coarse[i]);
    DiscretizationRow row{gap, std::abs(err), c3 * anorm * gap};
    rep.bound_holds = rep.bound_holds && row.error <= row.bound * (1.0 + 1e-12);
    rep.rows.push_back(row);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& r : rep.rows) {
    if (!(r.error > 0.0)) continue;
    const double x = std::log(r.mesh), y = std::log(r.error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m >= 2) rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return rep;
}

DecompositionResult likelihood_decomposition_check(const IntensityModel& truth,
                                                   const IntensityModel& model,
                                                   const std::vector<Dataset>& replicates,
                                                   int panels) {
  if (replicates.size() < 2) throw ValidationError("likelihood_decomposition_check: need >= 2 replicates");
  DecompositionResult out;
  for (const auto& data : replicates) {
    if (data.size() == 0) throw ValidationError("likelihood_decomposition_check: empty replicate");
    double total = 0.0;
    for (const auto& r : data.records) {
      const LogIntensityCurve cm = log_intensity_curve(model, r);
      const LogIntensityCurve ct = log_intensity_curve(truth, r);
      double compensator = 0.0;
      quadrature(cm.breaks, r.event_time, panels, [&](double s, double w) {
        const double lt = ct(s);
        compensator += w * std::exp(lt) * (cm(s) - lt);
      });
      // the martingale integral of log(lambda_theta / lambda_*)
      const double jump = r.event ? cm(r.event_time) - ct(r.event_time) : 0.0;
      total += compensator - jump;
    }
    out.residuals.push_back(total / static_cast<double>(data.size()));
  }
  const double n = static_cast<double>(out.residuals.size());
  double mean = 0.0;
  for (double v : out.residuals) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : out.residuals) var += (v - mean) * (v - mean);
  var /= n - 1.0;
  out.mean = mean;
  out.se = std::sqrt(var / n);
  out.replicates = out.residuals.size();
  return out;
}

}  // namespace sigsurv
