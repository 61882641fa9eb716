#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sigsurv/intensity.hpp"
#include "sigsurv/latentcde.hpp"
#include "sigsurv/signature.hpp"

namespace sigsurv {

/// log lambda_*(s) for record i; s ranges over [0, T_i].
using LogIntensityFn = std::function<double(std::size_t, double)>;

struct DivergenceTriple {
  double kl = 0.0;
  double tv = 0.0;
  double d2 = 0.0;
  // by-products the tight sandwich constants need
  double max_cum_model = 0.0;  // max_i int_0^{T_i} lambda_theta
  double max_cum_truth = 0.0;  // max_i int_0^{T_i} lambda_*
  double max_log_gap = 0.0;    // max_i sup_s |log lambda_theta - log lambda_*|
};

/// KL_n, TV_n and D^2_n between a truth and a model on the at-risk support
/// [0, T_i] of every record; 5-point Gauss-Legendre on `panels` sub-panels
/// of every observation interval (never evaluates at a jump).
DivergenceTriple empirical_divergences(const LogIntensityFn& truth, const IntensityModel& model,
                                       const Dataset& data, int panels = 16);
DivergenceTriple empirical_divergences(const IntensityModel& truth, const IntensityModel& model,
                                       const Dataset& data, int panels = 16);

struct TheoryConstants {
  double L_x = 0.0;
  double L_G = 0.0;       // Lipschitz constant of G_*
  double G0_op = 0.0;     // ||G_*(0)||
  double B_beta2 = 0.0;
  double B_W = 0.0;
  double tau = 0.0;
  double B_alpha = 0.0;   // l1 bound on the signature coefficients of the model
  void check() const;
  /// Upper bound on |z_*| and on log lambda_* - beta.W over [0, tau].
  double truth_exponent() const;
  /// Upper bound on |alpha . S(x)| over [0, tau].
  double model_exponent() const;
};

struct SandwichConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// c1, c2 from the closed-form intensity bounds (signature case).
SandwichConstants theory_constants(const TheoryConstants& k);

/// The same inequalities with the data-dependent quantities the bounds are
/// built from: c1 = 1 / max_i (4/3 Lambda_theta + 2/3 Lambda_*), c2 =
/// Phi(M) / M^2 with M the largest log-intensity gap.
SandwichConstants empirical_constants(const DivergenceTriple& t);

struct SandwichCheck {
  bool pass = false;
  double lower_slack = 0.0;  // KL - c1 TV^2
  double upper_slack = 0.0;  // c2 D^2 - KL
  SandwichConstants constants;
};

SandwichCheck pinsker_sandwich_check(const DivergenceTriple& t, const SandwichConstants& c);

/// (f * g)(h) = g'(h) f(h) for scalar fields.
Polynomial differential_product(const Polynomial& f, const Polynomial& g);

/// G^{i1} * (G^{i2} * (... * G^{ik})) for the 1-based word.
Polynomial iterated_product(const PolynomialScalarField& g, const Word& w);

/// alpha_*,N: coefficient of word I is the iterated product at 0. The field
/// has one channel per path coordinate (time last).
std::vector<double> linearize_vector_field(const PolynomialScalarField& g, int depth);

/// Affine scalar field a_j z + b_j as polynomials.
PolynomialScalarField affine_scalar_field(const std::vector<double>& a,
                                          const std::vector<double>& b);

/// Exact solution of dz = (a z + b) . dx, z(0) = 0, along a piecewise-linear
/// embedded path.
class AffineScalarSolution {
 public:
  AffineScalarSolution(std::vector<double> a, std::vector<double> b, const EmbeddedPath& path);
  double operator()(double t) const;

 private:
  double advance(double z, std::span<const double> inc, double fraction) const;
  std::vector<double> a_, b_;
  std::vector<Segment> segs_;
  std::vector<double> z_start_;  // state at the start of each segment
};

/// max over words of length k and |h| <= M of |iterated product|; scanned
/// on `grid` points.
double gamma_k(const PolynomialScalarField& g, int k, double M, int grid = 1000);

/// sup |z| bound: ||G(0)|| L_x t exp(L_G L_x t).
double latent_bound(double G0_op, double L_G, double L_x, double t);

/// (d L_x t)^{N+1} / (N+1)! Gamma_{N+1}, Gamma scanned over |h| <= M.
double truncation_bias_bound(const PolynomialScalarField& g, int depth, double L_x, double t,
                             double M, int grid = 1000);

/// 2e (1 + r + ... + r^{N-2}) L_x with r = L_x t.
double c3_constant(int depth, double L_x, double t);

/// Largest ratio ||S_k|| k! / ||x||_{1-var}^k over levels 1..depth of the
/// signature of `path` on [0, t] (<= 1 when the decay bound holds).
double factorial_decay_ratio(const EmbeddedPath& path, double t, int depth);

/// Signature of the piecewise-linear interpolation of dense samples (time
/// channel appended).
SigVector linear_signature(const SampledPath& dense, int depth);

struct DiscretizationRow {
  double mesh = 0.0;
  double error = 0.0;
  double bound = 0.0;
};

struct DiscretizationReport {
  std::vector<DiscretizationRow> rows;
  double slope = 0.0;  // least squares of log error on log mesh (rows with error > 0)
  bool bound_holds = false;
};

/// |alpha . (S_N(x) - S_N(x^D))| for x^D the fill-forward embedding of
/// every 2^l-th dense sample, l = 1..levels.
DiscretizationReport discretization_check(const SampledPath& dense, std::span<const double> alpha,
                                          int depth, int levels);

struct DecompositionResult {
  double mean = 0.0;
  double se = 0.0;
  std::size_t replicates = 0;
  std::vector<double> residuals;
};

/// Per replicate, (l_n(theta) - l_n(*)) - KL_n(*, theta): the martingale
/// term. Both sides use the same quadrature so the identity holds up to the
/// martingale alone.
DecompositionResult likelihood_decomposition_check(const IntensityModel& truth,
                                                   const IntensityModel& model,
                                                   const std::vector<Dataset>& replicates,
                                                   int panels = 16);

}  // namespace sigsurv
