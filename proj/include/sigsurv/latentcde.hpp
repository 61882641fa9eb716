#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "sigsurv/timeseries.hpp"

namespace sigsurv {

/// Dense univariate polynomial, coefficients in ascending powers.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs);

  double operator()(double h) const;
  Polynomial derivative() const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator+(const Polynomial& o) const;
  const std::vector<double>& coefficients() const noexcept { return c_; }
  int degree() const noexcept { return c_.empty() ? -1 : static_cast<int>(c_.size()) - 1; }
  bool is_zero() const noexcept { return c_.empty(); }

 private:
  void trim();
  std::vector<double> c_;
};

/// G(z)[i][j] = sum_l A[i][j][l] z_l + b[i][j].
struct AffineField {
  int p = 1;
  int d = 1;
  std::vector<double> A;  // index (i * d + j) * p + l
  std::vector<double> b;  // index i * d + j
};

/// Scalar latent (p = 1); G(z)[0][j] = channels[j](z).
struct PolynomialScalarField {
  std::vector<Polynomial> channels;
};

/// Fully connected network R^p -> R^{p x d} with tanh on every layer.
/// Output index i * d + j maps to entry (i, j).
class NeuralField {
 public:
  NeuralField() = default;
  /// Layer sizes are [p, hidden..., p * d]; weights uniform in
  /// +-1/sqrt(fan_in).
  NeuralField(int p, int d, std::vector<int> hidden, std::uint64_t seed);

  int latent_dim() const noexcept { return p_; }
  int channels() const noexcept { return d_; }
  std::vector<int> layer_sizes() const;
  std::size_t layer_count() const noexcept { return weights_.size(); }
  std::size_t parameter_count() const;

  std::vector<Eigen::MatrixXd>& weights() noexcept { return weights_; }
  std::vector<Eigen::VectorXd>& biases() noexcept { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const noexcept { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const noexcept { return biases_; }

  std::vector<double> flat() const;
  void set_flat(std::span<const double> params);

  struct Cache {
    std::vector<Eigen::VectorXd> activations;  // input, then each layer output
  };
  Eigen::VectorXd forward(const Eigen::VectorXd& z, Cache& cache) const;
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& z) const;

  struct Gradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    void set_zero_like(const NeuralField& f);
    std::vector<double> flat() const;
    Gradient& operator+=(const Gradient& o);
    Gradient& operator*=(double s);
  };
  /// Backpropagates dL/d(output) through the cached forward pass; adds the
  /// parameter gradients to `acc` and returns dL/dz.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                           Gradient& acc) const;

 private:
  int p_ = 0;
  int d_ = 0;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

using VectorField = std::variant<AffineField, PolynomialScalarField, NeuralField>;

int latent_dim(const VectorField& g);
int channel_dim(const VectorField& g);
Eigen::MatrixXd evaluate_field(const VectorField& g, const Eigen::VectorXd& z);

inline constexpr double kLatentOverflow = 1e12;

/// z + G(z) dx.
Eigen::VectorXd resnet_step(const Eigen::VectorXd& z, const VectorField& g,
                            std::span<const double> dx);

struct LatentTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
};

/// Euler/ResNet solve of dz = G(z) dx along the embedded path, each segment
/// split into `substeps` equal pieces.
LatentTrajectory solve_controlled(const Eigen::VectorXd& z0, const VectorField& g,
                                  const EmbeddedPath& path, int substeps);

/// Time-augmented increments between consecutive observations:
/// (X(t_k) - X(t_{k-1}), t_k - t_{k-1}), k = 1..K-1.
std::vector<Eigen::VectorXd> observation_increments(const SampledPath& path);

/// Unrolled controlled ResNet on the observation grid, z_0 = 0.
struct Unroll {
  std::vector<Eigen::VectorXd> z;  // K states
  std::vector<NeuralField::Cache> caches;  // forward caches at z_0..z_{K-2}
  std::vector<Eigen::VectorXd> increments;
};
Unroll unroll(const NeuralField& field, std::vector<Eigen::VectorXd> increments);

/// Reverse-mode pass through the unrolled recursion. grad_z[k] is the direct
/// derivative of the loss w.r.t. z_k; parameter gradients are added to acc.
void bptt(const NeuralField& field, const Unroll& u, std::span<const Eigen::VectorXd> grad_z,
          NeuralField::Gradient& acc);

}  // namespace sigsurv
