#ifndef DASMC_TARGET_HPP
#define DASMC_TARGET_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>

#include <Eigen/Core>

#include "dasmc/dataset.hpp"
#include "dasmc/network.hpp"

namespace dasmc {

/// Linear regression likelihood targets = features * theta + N(0, noise_std^2);
/// its posterior is Gaussian in closed form, which the acceptance oracles use.
struct LinearGaussianSpec {
  Eigen::Index dim = 1;
  double noise_std = 1.0;
};

using ModelSpec = std::variant<NetSpec, LinearGaussianSpec>;

inline Eigen::Index model_param_count(const ModelSpec& model) {
  if (const auto* net = std::get_if<NetSpec>(&model)) return param_count(*net);
  return std::get<LinearGaussianSpec>(model).dim;
}

struct ValueGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

namespace detail {

inline double lingauss_loglik(const LinearGaussianSpec& m,
                              const Eigen::Ref<const RowMatrixXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& y,
                              const ParamVector& theta) {
  constexpr double kLogTwoPi = 1.8378770664093455;
  const double var = m.noise_std * m.noise_std;
  const Eigen::VectorXd resid = y - x * theta;
  return -0.5 * static_cast<double>(x.rows()) * (kLogTwoPi + std::log(var)) -
         resid.squaredNorm() / (2.0 * var);
}

inline std::pair<double, Eigen::VectorXd> lingauss_loglik_grad(
    const LinearGaussianSpec& m, const Eigen::Ref<const RowMatrixXd>& x,
    const Eigen::Ref<const Eigen::VectorXd>& y, const ParamVector& theta) {
  constexpr double kLogTwoPi = 1.8378770664093455;
  const double var = m.noise_std * m.noise_std;
  const Eigen::VectorXd resid = y - x * theta;
  const double value = -0.5 * static_cast<double>(x.rows()) * (kLogTwoPi + std::log(var)) -
                       resid.squaredNorm() / (2.0 * var);
  return {value, (x.transpose() * resid) / var};
}

}  // namespace detail

/// Sum of per-point log-likelihoods of the model over dataset rows [lo, hi).
inline double segment_loglik(const ModelSpec& model, const Dataset& d, Eigen::Index lo,
                             Eigen::Index hi, const ParamVector& theta) {
  if (hi <= lo) return 0.0;
  if (const auto* net = std::get_if<NetSpec>(&model)) {
    return loglik_batch(*net, theta, d.features.middleRows(lo, hi - lo),
                        std::span<const int>(d.labels.data() + lo, static_cast<std::size_t>(hi - lo)));
  }
  const auto& m = std::get<LinearGaussianSpec>(model);
  return detail::lingauss_loglik(m, d.features.middleRows(lo, hi - lo), d.targets.segment(lo, hi - lo),
                                 theta);
}

/// Same sum together with its gradient w.r.t. theta.
inline std::pair<double, Eigen::VectorXd> segment_loglik_grad(const ModelSpec& model,
                                                              const Dataset& d, Eigen::Index lo,
                                                              Eigen::Index hi,
                                                              const ParamVector& theta) {
  if (hi <= lo) return {0.0, Eigen::VectorXd::Zero(theta.size())};
  if (const auto* net = std::get_if<NetSpec>(&model)) {
    return loglik_and_grad_batch(
        *net, theta, d.features.middleRows(lo, hi - lo),
        std::span<const int>(d.labels.data() + lo, static_cast<std::size_t>(hi - lo)));
  }
  const auto& m = std::get<LinearGaussianSpec>(model);
  return detail::lingauss_loglik_grad(m, d.features.middleRows(lo, hi - lo),
                                      d.targets.segment(lo, hi - lo), theta);
}

enum class TargetMode { kScaled, kSda };

/// Everything needed to evaluate the (scaled or tempered) log-posterior at
/// one iteration. data == nullptr gives the prior-only target.
struct TargetContext {
  const Dataset* data = nullptr;
  SubsetWindow window;
  TargetMode mode = TargetMode::kScaled;
  double beta = 1.0;
  PriorSpec prior;
  ModelSpec model;
};

inline void validate(const TargetContext& ctx) {
  validate(ctx.prior);
  if (ctx.data == nullptr) return;
  validate(ctx.window);
  if (ctx.window.block_end < 1) throw std::invalid_argument("TargetContext: empty subset");
  if (ctx.window.block_end > ctx.data->n())
    throw std::invalid_argument("TargetContext: window exceeds dataset");
  if (ctx.mode == TargetMode::kSda && !(ctx.beta > 0.0 && ctx.beta <= 1.0))
    throw std::invalid_argument("TargetContext: sda mode needs beta in (0, 1]");
}

/// Unscaled log-likelihood of the window's prefix and block segments.
struct LoglikParts {
  double prefix = 0.0;
  double block = 0.0;
};

inline LoglikParts unscaled_loglik_parts(const Dataset& d, const SubsetWindow& w,
                                         const ModelSpec& model, const ParamVector& theta) {
  validate(w);
  if (w.block_end > d.n()) throw std::invalid_argument("unscaled_loglik_parts: window exceeds dataset");
  LoglikParts parts;
  parts.prefix = segment_loglik(model, d, 0, w.prefix_end, theta);
  parts.block = segment_loglik(model, d, w.prefix_end, w.block_end, theta);
  return parts;
}

inline double log_target(const TargetContext& ctx, const ParamVector& theta) {
  validate(ctx);
  double value = prior_logpdf(ctx.prior, theta);
  if (ctx.data == nullptr) return value;
  if (ctx.mode == TargetMode::kScaled) {
    const double scale =
        static_cast<double>(ctx.window.total_n) / static_cast<double>(ctx.window.block_end);
    value += scale * segment_loglik(ctx.model, *ctx.data, 0, ctx.window.block_end, theta);
  } else {
    value += segment_loglik(ctx.model, *ctx.data, 0, ctx.window.prefix_end, theta);
    value += ctx.beta *
             segment_loglik(ctx.model, *ctx.data, ctx.window.prefix_end, ctx.window.block_end, theta);
  }
  return value;
}

inline ValueGrad log_target_with_grad(const TargetContext& ctx, const ParamVector& theta) {
  validate(ctx);
  auto [prior_value, grad] = prior_logpdf_and_grad(ctx.prior, theta);
  double value = prior_value;
  if (ctx.data != nullptr) {
    if (ctx.mode == TargetMode::kScaled) {
      const double scale =
          static_cast<double>(ctx.window.total_n) / static_cast<double>(ctx.window.block_end);
      auto [ll, g] = segment_loglik_grad(ctx.model, *ctx.data, 0, ctx.window.block_end, theta);
      value += scale * ll;
      grad += scale * g;
    } else {
      if (ctx.window.prefix_end > 0) {
        auto [ll, g] = segment_loglik_grad(ctx.model, *ctx.data, 0, ctx.window.prefix_end, theta);
        value += ll;
        grad += g;
      }
      if (ctx.window.block_end > ctx.window.prefix_end) {
        auto [ll, g] = segment_loglik_grad(ctx.model, *ctx.data, ctx.window.prefix_end,
                                           ctx.window.block_end, theta);
        value += ctx.beta * ll;
        grad += ctx.beta * g;
      }
    }
  }
  return {value, std::move(grad)};
}

inline Eigen::VectorXd grad_log_target(const TargetContext& ctx, const ParamVector& theta) {
  return log_target_with_grad(ctx, theta).grad;
}

/// Adapter giving TargetContext the interface the kernels operate on.
struct ContextTarget {
  const TargetContext* ctx;

  Eigen::Index dim() const { return model_param_count(ctx->model); }
  double value(const ParamVector& theta) const { return log_target(*ctx, theta); }
  ValueGrad value_and_grad(const ParamVector& theta) const {
    return log_target_with_grad(*ctx, theta);
  }
};

inline ContextTarget make_target(const TargetContext& ctx) { return ContextTarget{&ctx}; }

}  // namespace dasmc

#endif  // DASMC_TARGET_HPP
