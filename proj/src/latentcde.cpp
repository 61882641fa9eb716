#include "sigsurv/latentcde.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sigsurv/error.hpp"

namespace sigsurv {

Polynomial::Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) { trim(); }

void Polynomial::trim() {
  while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
}

double Polynomial::operator()(double h) const {
  double acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * h + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  if (c_.size() <= 1) return Polynomial{};
  std::vector<double> out(c_.size() - 1);
  for (std::size_t m = 1; m < c_.size(); ++m) out[m - 1] = static_cast<double>(m) * c_[m];
  return Polynomial(std::move(out));
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (c_.empty() || o.c_.empty()) return Polynomial{};
  std::vector<double> out(c_.size() + o.c_.size() - 1, 0.0);
  for (std::size_t a = 0; a < c_.size(); ++a)
    for (std::size_t b = 0; b < o.c_.size(); ++b) out[a + b] += c_[a] * o.c_[b];
  return Polynomial(std::move(out));
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  std::vector<double> out(std::max(c_.size(), o.c_.size()), 0.0);
  for (std::size_t a = 0; a < c_.size(); ++a) out[a] += c_[a];
  for (std::size_t b = 0; b < o.c_.size(); ++b) out[b] += o.c_[b];
  return Polynomial(std::move(out));
}

NeuralField::NeuralField(int p, int d, std::vector<int> hidden, std::uint64_t seed)
    : p_(p), d_(d) {
  if (p < 1 || d < 1) throw ValidationError("NeuralField: p and d must be >= 1");
  std::vector<int> sizes{p};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(p * d);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    if (in < 1 || out < 1) throw ValidationError("NeuralField: layer sizes must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    Eigen::MatrixXd w(out, in);
    Eigen::VectorXd b(out);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = unif(rng);
    for (int r = 0; r < out; ++r) b(r) = unif(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
}

std::vector<int> NeuralField::layer_sizes() const {
  std::vector<int> sizes;
  if (weights_.empty()) return sizes;
  sizes.push_back(static_cast<int>(weights_.front().cols()));
  for (const auto& w : weights_) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

std::size_t NeuralField::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

std::vector<double> NeuralField::flat() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    // row-major weights, then biases
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) out.push_back(weights_[l](r, c));
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) out.push_back(biases_[l](r));
  }
  return out;
}

void NeuralField::set_flat(std::span<const double> params) {
  if (params.size() != parameter_count())
    throw ValidationError("NeuralField::set_flat: expected " +
                          std::to_string(parameter_count()) + " values");
  std::size_t pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = params[pos++];
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l](r) = params[pos++];
  }
}

Eigen::VectorXd NeuralField::forward(const Eigen::VectorXd& z, Cache& cache) const {
  cache.activations.resize(weights_.size() + 1);
  cache.activations[0] = z;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    cache.activations[l + 1] =
        (weights_[l] * cache.activations[l] + biases_[l]).array().tanh().matrix();
  }
  return cache.activations.back();
}

Eigen::MatrixXd NeuralField::evaluate(const Eigen::VectorXd& z) const {
  Cache cache;
  const Eigen::VectorXd out = forward(z, cache);
  Eigen::MatrixXd g(p_, d_);
  for (int i = 0; i < p_; ++i)
    for (int j = 0; j < d_; ++j) g(i, j) = out(i * d_ + j);
  return g;
}

void NeuralField::Gradient::set_zero_like(const NeuralField& f) {
  weights.clear();
  biases.clear();
  for (std::size_t l = 0; l < f.weights_.size(); ++l) {
    weights.push_back(Eigen::MatrixXd::Zero(f.weights_[l].rows(), f.weights_[l].cols()));
    biases.push_back(Eigen::VectorXd::Zero(f.biases_[l].size()));
  }
}

std::vector<double> NeuralField::Gradient::flat() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights[l].cols(); ++c) out.push_back(weights[l](r, c));
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) out.push_back(biases[l](r));
  }
  return out;
}

NeuralField::Gradient& NeuralField::Gradient::operator+=(const Gradient& o) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += o.weights[l];
    biases[l] += o.biases[l];
  }
  return *this;
}

NeuralField::Gradient& NeuralField::Gradient::operator*=(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= s;
    biases[l] *= s;
  }
  return *this;
}

Eigen::VectorXd NeuralField::backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                                      Gradient& acc) const {
  Eigen::VectorXd g = grad_out;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Eigen::VectorXd& y = cache.activations[l + 1];
    const Eigen::VectorXd pre = g.array() * (1.0 - y.array().square());
    acc.weights[l].noalias() += pre * cache.activations[l].transpose();
    acc.biases[l] += pre;
    g.noalias() = weights_[l].transpose() * pre;
  }
  return g;
}

int latent_dim(const VectorField& g) {
  return std::visit(
      [](const auto& f) -> int {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AffineField>) return f.p;
        else if constexpr (std::is_same_v<T, PolynomialScalarField>) return 1;
        else return f.latent_dim();
      },
      g);
}

int channel_dim(const VectorField& g) {
  return std::visit(
      [](const auto& f) -> int {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AffineField>) return f.d;
        else if constexpr (std::is_same_v<T, PolynomialScalarField>)
          return static_cast<int>(f.channels.size());
        else return f.channels();
      },
      g);
}

Eigen::MatrixXd evaluate_field(const VectorField& g, const Eigen::VectorXd& z) {
  if (z.size() != latent_dim(g)) throw ValidationError("evaluate_field: latent size mismatch");
  return std::visit(
      [&](const auto& f) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AffineField>) {
          Eigen::MatrixXd out(f.p, f.d);
          for (int i = 0; i < f.p; ++i)
            for (int j = 0; j < f.d; ++j) {
              double v = f.b[static_cast<std::size_t>(i * f.d + j)];
              for (int l = 0; l < f.p; ++l)
                v += f.A[static_cast<std::size_t>((i * f.d + j) * f.p + l)] * z(l);
              out(i, j) = v;
            }
          return out;
        } else if constexpr (std::is_same_v<T, PolynomialScalarField>) {
          Eigen::MatrixXd out(1, static_cast<Eigen::Index>(f.channels.size()));
          for (std::size_t j = 0; j < f.channels.size(); ++j)
            out(0, static_cast<Eigen::Index>(j)) = f.channels[j](z(0));
          return out;
        } else {
          return f.evaluate(z);
        }
      },
      g);
}

Eigen::VectorXd resnet_step(const Eigen::VectorXd& z, const VectorField& g,
                            std::span<const double> dx) {
  if (static_cast<int>(dx.size()) != channel_dim(g))
    throw ValidationError("resnet_step: increment size mismatch");
  const Eigen::Map<const Eigen::VectorXd> inc(dx.data(), static_cast<Eigen::Index>(dx.size()));
  Eigen::VectorXd out = z + evaluate_field(g, z) * inc;
  if (!out.allFinite()) throw NumericalError("resnet_step: non-finite latent state");
  return out;
}

LatentTrajectory solve_controlled(const Eigen::VectorXd& z0, const VectorField& g,
                                  const EmbeddedPath& path, int substeps) {
  if (substeps < 1) throw ValidationError("solve_controlled: substeps must be >= 1");
  if (static_cast<int>(path.dim()) != channel_dim(g))
    throw ValidationError("solve_controlled: path dimension does not match vector field");
  LatentTrajectory traj;
  traj.times.push_back(0.0);
  traj.values.push_back(z0);
  Eigen::VectorXd z = z0;
  std::vector<double> piece(path.dim());
  for (const auto& seg : path.segments()) {
    for (std::size_t j = 0; j < piece.size(); ++j)
      piece[j] = seg.increment[j] / static_cast<double>(substeps);
    for (int s = 1; s <= substeps; ++s) {
      z = resnet_step(z, g, piece);
      const double t = seg.start_time + (seg.end_time - seg.start_time) * s / substeps;
      if (z.cwiseAbs().maxCoeff() > kLatentOverflow)
        throw NumericalError("solve_controlled: latent state diverged at t = " +
                             std::to_string(t));
      traj.times.push_back(t);
      traj.values.push_back(z);
    }
  }
  return traj;
}

std::vector<Eigen::VectorXd> observation_increments(const SampledPath& path) {
  std::vector<Eigen::VectorXd> incs;
  const auto d = static_cast<Eigen::Index>(path.channels());
  for (std::size_t k = 1; k < path.size(); ++k) {
    Eigen::VectorXd dx(d + 1);
    for (Eigen::Index j = 0; j < d; ++j)
      dx(j) = path.value(k, static_cast<std::size_t>(j)) -
              path.value(k - 1, static_cast<std::size_t>(j));
    dx(d) = path.time(k) - path.time(k - 1);
    incs.push_back(std::move(dx));
  }
  return incs;
}

Unroll unroll(const NeuralField& field, std::vector<Eigen::VectorXd> increments) {
  Unroll u;
  u.increments = std::move(increments);
  const int p = field.latent_dim();
  const int d = field.channels();
  u.z.reserve(u.increments.size() + 1);
  u.caches.resize(u.increments.size());
  u.z.push_back(Eigen::VectorXd::Zero(p));
  for (std::size_t k = 0; k < u.increments.size(); ++k) {
    if (u.increments[k].size() != d) throw ValidationError("unroll: increment size mismatch");
    const Eigen::VectorXd out = field.forward(u.z[k], u.caches[k]);
    Eigen::VectorXd next = u.z[k];
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < d; ++j) next(i) += out(i * d + j) * u.increments[k](j);
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kLatentOverflow)
      throw NumericalError("unroll: latent state diverged at step " + std::to_string(k + 1));
    u.z.push_back(std::move(next));
  }
  return u;
}

void bptt(const NeuralField& field, const Unroll& u, std::span<const Eigen::VectorXd> grad_z,
          NeuralField::Gradient& acc) {
  if (grad_z.size() != u.z.size()) throw ValidationError("bptt: gradient count mismatch");
  const int p = field.latent_dim();
  const int d = field.channels();
  Eigen::VectorXd adj = grad_z.back();
  Eigen::VectorXd grad_out(p * d);
  for (std::size_t k = u.increments.size(); k-- > 0;) {
    // z_{k+1} = z_k + G(z_k) dx_k
    const Eigen::VectorXd& dx = u.increments[k];
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < d; ++j) grad_out(i * d + j) = adj(i) * dx(j);
    const Eigen::VectorXd through_net = field.backward(u.caches[k], grad_out, acc);
    adj += through_net + grad_z[k];
  }
}

}  // namespace sigsurv
