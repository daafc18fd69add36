#ifndef DASMC_NETWORK_HPP
#define DASMC_NETWORK_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dasmc/rng.hpp"

namespace dasmc {

using ParamVector = Eigen::VectorXd;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { kRelu, kTanh };

/// Fully connected classifier: layer_sizes = {input, hidden..., classes}.
/// The output layer is linear; the categorical likelihood applies
/// log-softmax to its logits.
struct NetSpec {
  std::vector<int> layer_sizes;
  Activation activation = Activation::kRelu;
};

inline void validate(const NetSpec& spec) {
  if (spec.layer_sizes.size() < 2)
    throw std::invalid_argument("NetSpec: need at least input and output layers");
  for (int s : spec.layer_sizes)
    if (s < 1) throw std::invalid_argument("NetSpec: layer sizes must be >= 1");
}

inline int param_count(const NetSpec& spec) {
  validate(spec);
  int total = 0;
  for (std::size_t l = 1; l < spec.layer_sizes.size(); ++l)
    total += spec.layer_sizes[l - 1] * spec.layer_sizes[l] + spec.layer_sizes[l];
  return total;
}

/// Isotropic Gaussian prior N(0, sigma^2 I) over the flat parameter vector.
struct PriorSpec {
  double sigma = 1.0;
};

inline void validate(const PriorSpec& prior) {
  if (!(prior.sigma > 0.0)) throw std::invalid_argument("PriorSpec: sigma must be > 0");
}

namespace detail {

// theta layout per layer l: weight matrix (out x in, column-major), then bias.
inline Eigen::Map<const Eigen::MatrixXd> weight_view(const NetSpec& spec,
                                                     const ParamVector& theta,
                                                     std::size_t layer, int offset) {
  const int in = spec.layer_sizes[layer - 1];
  const int out = spec.layer_sizes[layer];
  return {theta.data() + offset, out, in};
}

inline void check_theta(const NetSpec& spec, const ParamVector& theta) {
  if (theta.size() != param_count(spec))
    throw std::invalid_argument("parameter vector length does not match NetSpec");
}

inline void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kRelu)
    z = z.cwiseMax(0.0);
  else
    z = z.array().tanh().matrix();
}

}  // namespace detail

/// Logits for a batch of inputs, one row per datapoint.
inline Eigen::MatrixXd forward_batch(const NetSpec& spec, const ParamVector& theta,
                                     const Eigen::Ref<const RowMatrixXd>& inputs) {
  detail::check_theta(spec, theta);
  if (inputs.cols() != spec.layer_sizes.front())
    throw std::invalid_argument("forward: input dimension does not match NetSpec");
  const std::size_t layers = spec.layer_sizes.size();
  Eigen::MatrixXd a;
  int offset = 0;
  for (std::size_t l = 1; l < layers; ++l) {
    const auto w = detail::weight_view(spec, theta, l, offset);
    offset += static_cast<int>(w.size());
    const auto b = theta.segment(offset, spec.layer_sizes[l]);
    offset += spec.layer_sizes[l];
    Eigen::MatrixXd z =
        (l == 1 ? (inputs * w.transpose()).eval() : (a * w.transpose()).eval());
    z.rowwise() += b.transpose();
    if (l + 1 < layers) detail::apply_activation(z, spec.activation);
    a = std::move(z);
  }
  return a;
}

inline Eigen::VectorXd forward(const NetSpec& spec, const ParamVector& theta,
                               const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Map<const RowMatrixXd> row(x.data(), 1, x.size());
  return forward_batch(spec, theta, row).row(0);
}

/// log softmax(logits)[label], max-shifted.
inline double log_softmax_at(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw std::invalid_argument("label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits[label] - lse;
}

inline double loglik_point(const NetSpec& spec, const ParamVector& theta,
                           const Eigen::Ref<const Eigen::VectorXd>& x, int label) {
  if (label < 0 || label >= spec.layer_sizes.back())
    throw std::invalid_argument("loglik_point: label out of range");
  return log_softmax_at(forward(spec, theta, x), label);
}

/// Sum of per-point categorical log-likelihoods over the batch.
inline double loglik_batch(const NetSpec& spec, const ParamVector& theta,
                           const Eigen::Ref<const RowMatrixXd>& inputs,
                           std::span<const int> labels) {
  if (inputs.rows() < 1) throw std::invalid_argument("loglik_batch: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows())
    throw std::invalid_argument("loglik_batch: labels/features count mismatch");
  const Eigen::MatrixXd logits = forward_batch(spec, theta, inputs);
  const int classes = spec.layer_sizes.back();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) throw std::invalid_argument("loglik_batch: label out of range");
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += logits(i, y) - lse;
  }
  return total;
}

/// Batch log-likelihood and its exact gradient w.r.t. theta, by reverse-mode
/// accumulation through the layers.
inline std::pair<double, Eigen::VectorXd> loglik_and_grad_batch(
    const NetSpec& spec, const ParamVector& theta,
    const Eigen::Ref<const RowMatrixXd>& inputs, std::span<const int> labels) {
  detail::check_theta(spec, theta);
  const Eigen::Index m = inputs.rows();
  if (m < 1) throw std::invalid_argument("loglik_and_grad_batch: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != m)
    throw std::invalid_argument("loglik_and_grad_batch: labels/features count mismatch");
  if (inputs.cols() != spec.layer_sizes.front())
    throw std::invalid_argument("loglik_and_grad_batch: input dimension mismatch");

  const std::size_t layers = spec.layer_sizes.size();
  const int classes = spec.layer_sizes.back();

  // Forward pass, keeping post-activation values for the backward pass.
  std::vector<Eigen::MatrixXd> acts(layers - 1);
  std::vector<int> offsets(layers);
  {
    int offset = 0;
    const Eigen::MatrixXd* below = nullptr;
    for (std::size_t l = 1; l < layers; ++l) {
      offsets[l] = offset;
      const auto w = detail::weight_view(spec, theta, l, offset);
      offset += static_cast<int>(w.size());
      const auto b = theta.segment(offset, spec.layer_sizes[l]);
      offset += spec.layer_sizes[l];
      Eigen::MatrixXd z =
          (l == 1 ? (inputs * w.transpose()).eval() : (*below * w.transpose()).eval());
      z.rowwise() += b.transpose();
      if (l + 1 < layers) detail::apply_activation(z, spec.activation);
      acts[l - 1] = std::move(z);
      below = &acts[l - 1];
    }
  }

  // Log-likelihood and output-layer residual (one-hot minus softmax).
  Eigen::MatrixXd& logits = acts.back();
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes)
      throw std::invalid_argument("loglik_and_grad_batch: label out of range");
    const double mx = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
    const double denom = e.sum();
    total += logits(i, y) - (mx + std::log(denom));
    logits.row(i) = -(e / denom).matrix();
    logits(i, y) += 1.0;
  }

  // Backward pass; logits now holds the top-layer delta.
  Eigen::VectorXd grad(theta.size());
  Eigen::MatrixXd delta = std::move(logits);
  for (int l = static_cast<int>(layers) - 1; l >= 1; --l) {
    const auto w = detail::weight_view(spec, theta, static_cast<std::size_t>(l), offsets[l]);
    const int out = spec.layer_sizes[l];
    Eigen::Map<Eigen::MatrixXd> dw(grad.data() + offsets[l], out, spec.layer_sizes[l - 1]);
    if (l == 1) {
      dw.noalias() = delta.transpose() * inputs;
    } else {
      dw.noalias() = delta.transpose() * acts[l - 2];
    }
    grad.segment(offsets[l] + static_cast<int>(w.size()), out) = delta.colwise().sum();
    if (l > 1) {
      Eigen::MatrixXd next = delta * w;
      const Eigen::MatrixXd& a = acts[l - 2];
      if (spec.activation == Activation::kRelu)
        next = next.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
      else
        next = next.cwiseProduct((1.0 - a.array().square()).matrix());
      delta = std::move(next);
    }
  }
  return {total, std::move(grad)};
}

inline double prior_logpdf(const PriorSpec& prior, const ParamVector& theta) {
  validate(prior);
  const double d = static_cast<double>(theta.size());
  constexpr double kLogTwoPi = 1.8378770664093455;
  const double var = prior.sigma * prior.sigma;
  return -0.5 * d * (kLogTwoPi + std::log(var)) - theta.squaredNorm() / (2.0 * var);
}

inline std::pair<double, Eigen::VectorXd> prior_logpdf_and_grad(const PriorSpec& prior,
                                                                const ParamVector& theta) {
  validate(prior);
  return {prior_logpdf(prior, theta), -theta / (prior.sigma * prior.sigma)};
}

inline ParamVector sample_gaussian_prior(const PriorSpec& prior, Eigen::Index dim,
                                         RngStream& rng) {
  validate(prior);
  return prior.sigma * rng.normal_vector(dim);
}

inline ParamVector sample_prior(const PriorSpec& prior, const NetSpec& spec, RngStream& rng) {
  return sample_gaussian_prior(prior, param_count(spec), rng);
}

}  // namespace dasmc

#endif  // DASMC_NETWORK_HPP
