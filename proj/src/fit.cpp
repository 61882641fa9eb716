#include "sigsurv/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

#include "sigsurv/error.hpp"

namespace sigsurv {

void ElasticNetConfig::check() const {
  if (eta1 < 0.0 || eta2 < 0.0) throw ValidationError("ElasticNetConfig: eta must be >= 0");
  if (gamma < 0.0 || gamma > 1.0) throw ValidationError("ElasticNetConfig: gamma must be in [0, 1]");
  if (!(step > 0.0)) throw ValidationError("ElasticNetConfig: step must be > 0");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ValidationError("ElasticNetConfig: shrink must be in (0, 1)");
  if (growth < 1.0) throw ValidationError("ElasticNetConfig: growth must be >= 1");
  if (max_iters < 0 || max_halvings < 1) throw ValidationError("ElasticNetConfig: bad iteration limits");
  if (precondition && !squared_l2)
    throw ValidationError("ElasticNetConfig: precondition needs the squared l2 penalty");
}

std::vector<double> prox_elastic_net(std::span<const double> v, double step, double eta,
                                     double gamma, bool squared_l2) {
  if (step < 0.0 || eta < 0.0) throw ValidationError("prox_elastic_net: step, eta must be >= 0");
  const double thr = step * eta * gamma;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - thr;
    out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
  }
  const double ridge = step * eta * (1.0 - gamma);
  if (ridge == 0.0) return out;
  if (squared_l2) {
    for (double& x : out) x /= 1.0 + ridge;
  } else {
    // prox of ridge * ||.||_2 (block soft-threshold); composes with the l1
    // prox because the l1 prox preserves signs
    double norm = 0.0;
    for (double x : out) norm += x * x;
    norm = std::sqrt(norm);
    const double scale = norm > ridge ? 1.0 - ridge / norm : 0.0;
    for (double& x : out) x *= scale;
  }
  return out;
}

double elastic_net_penalty(std::span<const double> v, double eta, double gamma, bool squared_l2) {
  if (eta == 0.0) return 0.0;
  double l1 = 0.0, l2 = 0.0;
  for (double x : v) {
    l1 += std::abs(x);
    l2 += x * x;
  }
  const double ridge = squared_l2 ? 0.5 * l2 : std::sqrt(l2);
  return eta * (gamma * l1 + (1.0 - gamma) * ridge);
}

std::vector<char> time_word_mask(int channels, int depth) {
  std::vector<char> mask(sig_dim(channels, depth), 0);
  for (std::size_t i : TimeSuffixTable::build(channels, depth).time_words) mask[i] = 1;
  return mask;
}

namespace {

double penalty(const CoxSigParams& p, const ElasticNetConfig& pen) {
  return elastic_net_penalty(p.alpha, pen.eta1, pen.gamma, pen.squared_l2) +
         elastic_net_penalty(p.beta, pen.eta2, pen.gamma, pen.squared_l2);
}

// One proximal gradient step and its quadratic model, optionally in the
// diagonal metric `metric` (alpha block, then beta).
class ProxStepper {
 public:
  ProxStepper(const ElasticNetConfig& pen, std::span<const char> mask, std::vector<double> metric)
      : pen_(pen), mask_(mask), metric_(std::move(metric)) {}

  void step(const CoxSigParams& from, const CoxSigGradient& g, double step, CoxSigParams& out) const {
    if (metric_.empty()) {
      std::vector<double> va(from.alpha.size()), vb(from.beta.size());
      for (std::size_t i = 0; i < va.size(); ++i) va[i] = from.alpha[i] - step * g.alpha[i];
      for (std::size_t i = 0; i < vb.size(); ++i) vb[i] = from.beta[i] - step * g.beta[i];
      out.alpha = prox_elastic_net(va, step, pen_.eta1, pen_.gamma, pen_.squared_l2);
      out.beta = prox_elastic_net(vb, step, pen_.eta2, pen_.gamma, pen_.squared_l2);
    } else {
      const std::size_t q = from.alpha.size();
      out.alpha.resize(q);
      out.beta.resize(from.beta.size());
      for (std::size_t i = 0; i < q; ++i)
        out.alpha[i] = scalar_prox(from.alpha[i], g.alpha[i], step / metric_[i], pen_.eta1);
      for (std::size_t j = 0; j < from.beta.size(); ++j)
        out.beta[j] = scalar_prox(from.beta[j], g.beta[j], step / metric_[q + j], pen_.eta2);
    }
    if (!mask_.empty())
      for (std::size_t i = 0; i < mask_.size(); ++i)
        if (!mask_[i]) out.alpha[i] = 0.0;
  }

  // g.(y - x) + |y - x|^2_D / (2 step)
  double model(const CoxSigParams& x, const CoxSigParams& y, const CoxSigGradient& g,
               double step) const {
    double lin = 0.0, sq = 0.0;
    const std::size_t q = x.alpha.size();
    for (std::size_t i = 0; i < q; ++i) {
      const double dv = y.alpha[i] - x.alpha[i];
      lin += g.alpha[i] * dv;
      sq += dv * dv * (metric_.empty() ? 1.0 : metric_[i]);
    }
    for (std::size_t j = 0; j < x.beta.size(); ++j) {
      const double dv = y.beta[j] - x.beta[j];
      lin += g.beta[j] * dv;
      sq += dv * dv * (metric_.empty() ? 1.0 : metric_[q + j]);
    }
    return lin + sq / (2.0 * step);
  }

 private:
  double scalar_prox(double x, double g, double s, double eta) const {
    const double v = x - s * g;
    const double a = std::abs(v) - s * eta * pen_.gamma;
    const double soft = a > 0.0 ? std::copysign(a, v) : 0.0;
    return soft / (1.0 + s * eta * (1.0 - pen_.gamma));
  }

  const ElasticNetConfig& pen_;
  std::span<const char> mask_;
  std::vector<double> metric_;
};

std::vector<double> diagonal_metric(const CoxSigProblem& problem) {
  auto m = problem.feature_second_moments();
  const double top = m.empty() ? 1.0 : *std::max_element(m.begin(), m.end());
  for (double& v : m) v = top > 0.0 ? std::max(v / top, 1e-4) : 1.0;
  return m;
}

void extrapolate(const CoxSigParams& x, const CoxSigParams& prev, double w, CoxSigParams& y) {
  y = x;
  for (std::size_t i = 0; i < y.alpha.size(); ++i) y.alpha[i] += w * (x.alpha[i] - prev.alpha[i]);
  for (std::size_t j = 0; j < y.beta.size(); ++j) y.beta[j] += w * (x.beta[j] - prev.beta[j]);
}

}  // namespace

CoxSigFit fit_coxsig(const CoxSigProblem& problem, const ElasticNetConfig& pen,
                     std::span<const char> mask, const CoxSigParams* start) {
  pen.check();
  if (!mask.empty() && mask.size() != problem.alpha_size())
    throw ValidationError("fit_coxsig: mask size does not match alpha");
  CoxSigFit fit;
  CoxSigParams x = CoxSigParams::zeros(problem.channels(), problem.depth(), 0, false);
  x.beta.assign(problem.beta_size(), 0.0);
  x.plus = problem.plus();
  if (start) {
    if (start->alpha.size() != x.alpha.size() || start->beta.size() != x.beta.size())
      throw ValidationError("fit_coxsig: warm start has the wrong shape");
    x.alpha = start->alpha;
    x.beta = start->beta;
    if (!mask.empty())
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) x.alpha[i] = 0.0;
  }
  const ProxStepper prox(pen, mask, pen.precondition ? diagonal_metric(problem) : std::vector<double>{});
  CoxSigGradient grad;
  double f = problem.nll_and_gradient(x, grad);
  double obj = f + penalty(x, pen);
  if (!std::isfinite(obj)) throw NumericalError("fit_coxsig: non-finite initial objective");
  double step = pen.step;
  fit.trace.push_back({0, obj, step});

  // y: point the gradient step starts from (x itself without momentum)
  CoxSigParams y = x, z = x, prev = x;
  CoxSigGradient gy = grad, gz;
  double fy = f;
  double t = 1.0;
  for (int it = 1; it <= pen.max_iters; ++it) {
    bool accepted = false;
    double fz = 0.0, objz = 0.0;
    for (int h = 0; h <= pen.max_halvings; ++h) {
      prox.step(y, gy, step, z);
      bool ok = true;
      try {
        fz = problem.nll_and_gradient(z, gz);
      } catch (const NumericalError&) {
        ok = false;  // overshoot into the overflow region: shrink the step
      }
      if (ok) {
        objz = fz + penalty(z, pen);
        ok = std::isfinite(objz) && fz <= fy + prox.model(y, z, gy, step) + 1e-12 * std::abs(fy);
        // plain ISTA also insists on descent of the full objective
        if (!pen.accelerate) ok = ok && objz <= obj;
      }
      if (ok) {
        accepted = true;
        break;
      }
      step *= pen.shrink;
    }
    if (!accepted)
      throw NumericalError("fit_coxsig: no admissible step after " +
                           std::to_string(pen.max_halvings) + " halvings");
    step *= pen.growth;

    if (objz <= obj) {
      const double change = std::abs(obj - objz) / std::max(1.0, std::abs(obj));
      std::swap(prev, x);
      std::swap(x, z);
      std::swap(grad, gz);
      f = fz;
      obj = objz;
      fit.trace.push_back({it, obj, step / pen.growth});
      if (change < pen.rel_tol) {
        fit.converged = true;
        break;
      }
      if (pen.accelerate) {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        extrapolate(x, prev, (t - 1.0) / t_next, y);
        t = t_next;
        try {
          fy = problem.nll_and_gradient(y, gy);
          if (std::isfinite(fy)) continue;
        } catch (const NumericalError&) {
        }
      }
      y = x;
      gy = grad;
      fy = f;
      t = 1.0;
    } else {
      // momentum overshot: restart from the best point
      fit.trace.push_back({it, obj, step / pen.growth});
      y = x;
      gy = grad;
      fy = f;
      t = 1.0;
    }
  }
  fit.params = std::move(x);
  return fit;
}

CoxSigFit fit_coxsig(const Dataset& data, int depth, bool plus, const ElasticNetConfig& pen,
                     const QuadratureConfig& quad) {
  CoxSigProblem problem(data, depth, plus, quad);
  return fit_coxsig(problem, pen);
}

CoxSigFit fit_baseline_cox(const Dataset& data, const ElasticNetConfig& pen,
                           const QuadratureConfig& quad, int depth) {
  const bool plus = data.static_count() == 0;
  CoxSigProblem problem(data, depth, plus, quad);
  const auto mask = time_word_mask(problem.channels(), depth);
  return fit_coxsig(problem, pen, mask);
}

void AdamConfig::check() const {
  if (!(lr > 0.0) || epochs < 0 || batch < 1 || latent < 1)
    throw ValidationError("AdamConfig: lr, batch and latent must be positive, epochs >= 0");
}

NCDEFit init_ncde(const Dataset& data, const AdamConfig& cfg, std::uint64_t seed) {
  cfg.check();
  if (data.size() == 0) throw ValidationError("fit_ncde: empty dataset");
  NCDEFit fit;
  auto& p = fit.params;
  p.standardizer = cfg.standardize ? Standardizer::fit(data)
                                   : Standardizer::identity(data.raw_channels());
  p.field = NeuralField(cfg.latent, static_cast<int>(data.raw_channels()) + 1, cfg.hidden, seed);
  std::seed_seq seq{seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.latent));
  std::uniform_real_distribution<double> unif(-bound, bound);
  p.alpha.resize(static_cast<std::size_t>(cfg.latent));
  for (double& a : p.alpha) a = unif(rng);
  p.beta.assign(data.static_count(), 0.0);
  return fit;
}

NCDEFit fit_ncde(const Dataset& data, const AdamConfig& cfg, std::uint64_t seed) {
  NCDEFit fit = init_ncde(data, cfg, seed);
  auto& p = fit.params;
  if (cfg.epochs == 0) return fit;
  const Dataset z = p.standardizer.apply(data);
  const std::size_t nf = p.field.parameter_count();
  const std::size_t na = p.alpha.size();
  const std::size_t nb = p.beta.size();
  std::vector<double> theta = p.field.flat();
  theta.insert(theta.end(), p.alpha.begin(), p.alpha.end());
  theta.insert(theta.end(), p.beta.begin(), p.beta.end());
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
  std::seed_seq seq{seed, std::uint64_t{0xba7c}};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  NCDEGradient g;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch));
      const std::span<const std::size_t> batch(order.data() + b0, b1 - b0);
      const double loss = ncde_nll_and_gradient(p, z, batch, &g);
      total += loss * static_cast<double>(batch.size());
      std::vector<double> grad = g.field.flat();
      grad.insert(grad.end(), g.alpha.begin(), g.alpha.end());
      grad.insert(grad.end(), g.beta.begin(), g.beta.end());
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(grad[i])) throw NumericalError("fit_ncde: non-finite gradient");
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        theta[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
      }
      p.field.set_flat(std::span<const double>(theta.data(), nf));
      std::copy_n(theta.begin() + static_cast<long>(nf), na, p.alpha.begin());
      std::copy_n(theta.begin() + static_cast<long>(nf + na), nb, p.beta.begin());
    }
    const double mean = total / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw NumericalError("fit_ncde: non-finite loss");
    fit.epoch_loss.push_back(mean);
  }
  return fit;
}

CVGrid CVGrid::standard(bool decimal) {
  CVGrid g;
  const double base = decimal ? 10.0 : std::exp(1.0);
  for (int k = 0; k <= 5; ++k) g.eta1.push_back(std::pow(base, -k));
  g.eta2 = g.eta1;
  g.depths = {2, 3};
  return g;
}

void CVGrid::check() const {
  if (eta1.empty() || eta2.empty() || depths.empty())
    throw ValidationError("CVGrid: grids must be non-empty");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("CVGrid: train fraction must be in (0, 1)");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  if (n < 2) throw ValidationError("split_indices: need at least two records");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::seed_seq seq{seed, std::uint64_t{0x5b117}};
  std::mt19937_64 rng(seq);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  cut = std::clamp<std::size_t>(cut, 1, n - 1);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<long>(cut));
  std::vector<std::size_t> test(idx.begin() + static_cast<long>(cut), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

std::optional<double> mixed_metric(const MetricReport& rep) {
  double sum = 0.0;
  int used = 0;
  for (const auto& p : rep.points) {
    if (!p.c_index || !p.brier) continue;
    sum += *p.c_index - *p.brier;
    ++used;
  }
  if (used == 0) return std::nullopt;
  return sum / used;
}

namespace {

// Larger score wins; then stronger penalty; then shallower depth.
bool better(const CVEntry& a, const CVEntry& b) {
  if (!a.score) return false;
  if (!b.score) return true;
  if (*a.score != *b.score) return *a.score > *b.score;
  if (a.eta1 + a.eta2 != b.eta1 + b.eta2) return a.eta1 + a.eta2 > b.eta1 + b.eta2;
  return a.depth < b.depth;
}

}  // namespace

CVResult cross_validate(const Dataset& data, const CVGrid& grid, const CVOptions& opt,
                        std::uint64_t seed) {
  grid.check();
  const auto [tr, va] = split_indices(data.size(), grid.train_fraction, seed);
  const Dataset train = data.subset(tr);
  const Dataset valid = data.subset(va);
  const std::vector<double> times = opt.times.empty() ? default_eval_times(valid) : opt.times;
  EvaluationOptions eopt;
  eopt.quad = opt.quad;

  CVResult res;
  bool any_defined = false;
  for (int depth : grid.depths) {
    const CoxSigProblem problem(train, depth, opt.plus, opt.quad);
    const CoxSigPredictor predictor(valid, depth, opt.plus);
    std::optional<CoxSigParams> warm;
    for (std::size_t a = 0; a < grid.eta1.size(); ++a) {
      for (std::size_t bb = 0; bb < grid.eta2.size(); ++bb) {
        // serpentine order keeps consecutive warm starts close
        const std::size_t b = a % 2 == 0 ? bb : grid.eta2.size() - 1 - bb;
        CVEntry e{grid.eta1[a], grid.eta2[b], depth, std::nullopt};
        ElasticNetConfig pen = opt.pen;
        pen.eta1 = e.eta1;
        pen.eta2 = e.eta2;
        try {
          const CoxSigFit fit =
              fit_coxsig(problem, pen, {}, opt.warm_start && warm ? &*warm : nullptr);
          warm = fit.params;
          std::vector<std::vector<double>> risks;
          for (double t : times) risks.push_back(predictor.survival(fit.params, t, opt.dt, opt.quad));
          const MetricReport rep = evaluate_risks(risks, valid, times, opt.dt, eopt);
          e.score = mixed_metric(rep);
          any_defined = any_defined || e.score.has_value();
        } catch (const NumericalError&) {
          e.score = std::nullopt;
        }
        res.table.push_back(e);
      }
    }
  }
  if (!any_defined)
    throw ValidationError("cross_validate: no comparable pairs at any evaluation point");
  res.best = res.table.front();
  for (const auto& e : res.table)
    if (better(e, res.best)) res.best = e;
  ElasticNetConfig pen = opt.pen;
  pen.eta1 = res.best.eta1;
  pen.eta2 = res.best.eta2;
  res.refit = fit_coxsig(data, res.best.depth, opt.plus, pen, opt.quad);
  return res;
}

}  // namespace sigsurv
