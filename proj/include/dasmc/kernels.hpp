#ifndef DASMC_KERNELS_HPP
#define DASMC_KERNELS_HPP

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>

#include "dasmc/numeric.hpp"
#include "dasmc/rng.hpp"
#include "dasmc/target.hpp"

namespace dasmc {

template <typename T>
concept GradientTarget = requires(const T& t, const Eigen::VectorXd& x) {
  { t.value_and_grad(x) } -> std::convertible_to<ValueGrad>;
};

enum class KernelKind { kHmc, kLangevin };

/// Leapfrog proposal settings. Langevin dynamics is the single-step special
/// case, so kLangevin pins leapfrog_steps to 1.
struct KernelConfig {
  double step_size = 0.0;
  int leapfrog_steps = 1;
  KernelKind kind = KernelKind::kHmc;

  static KernelConfig hmc(double step_size, int leapfrog_steps) {
    KernelConfig cfg{step_size, leapfrog_steps, KernelKind::kHmc};
    validate(cfg);
    return cfg;
  }
  static KernelConfig langevin(double step_size) {
    KernelConfig cfg{step_size, 1, KernelKind::kLangevin};
    validate(cfg);
    return cfg;
  }

  static void validate(const KernelConfig& cfg) {
    if (!(cfg.step_size > 0.0)) throw std::invalid_argument("KernelConfig: step_size must be > 0");
    if (cfg.leapfrog_steps < 1)
      throw std::invalid_argument("KernelConfig: leapfrog_steps must be >= 1");
    if (cfg.kind == KernelKind::kLangevin && cfg.leapfrog_steps != 1)
      throw std::invalid_argument("KernelConfig: langevin requires leapfrog_steps == 1");
  }
};

/// Thrown when a trajectory produces a non-finite state or gradient; carries
/// the leapfrog step at which it happened.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int step)
      : std::runtime_error("leapfrog diverged at step " + std::to_string(step)), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

namespace detail {

struct Trajectory {
  Eigen::VectorXd theta;
  Eigen::VectorXd momentum;
  double value_start = 0.0;  // log target at the initial position
  double value_end = 0.0;    // log target at the final position
};

// Half-step momentum, full-step position, half-step momentum, repeated for
// leapfrog_steps steps; the gradient at each interior position is shared
// between consecutive steps.
template <GradientTarget Target>
Trajectory integrate(const Target& target, const Eigen::VectorXd& theta0,
                     const Eigen::VectorXd& p0, const KernelConfig& cfg) {
  KernelConfig::validate(cfg);
  if (theta0.size() != p0.size())
    throw std::invalid_argument("leapfrog: position/momentum dimension mismatch");
  const double h = cfg.step_size;
  Trajectory t;
  t.theta = theta0;
  t.momentum = p0;
  ValueGrad vg = target.value_and_grad(t.theta);
  t.value_start = vg.value;
  if (!std::isfinite(vg.value) || !vg.grad.allFinite()) throw DivergenceError(0);
  for (int s = 0; s < cfg.leapfrog_steps; ++s) {
    t.momentum += 0.5 * h * vg.grad;
    t.theta += h * t.momentum;
    if (!t.theta.allFinite()) throw DivergenceError(s);
    vg = target.value_and_grad(t.theta);
    if (!std::isfinite(vg.value) || !vg.grad.allFinite()) throw DivergenceError(s);
    t.momentum += 0.5 * h * vg.grad;
    if (!t.momentum.allFinite()) throw DivergenceError(s);
  }
  t.value_end = vg.value;
  return t;
}

}  // namespace detail

/// Deterministic leapfrog integration from (theta, p0); returns the final
/// position and momentum after cfg.leapfrog_steps steps.
template <GradientTarget Target>
std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog(const Target& target,
                                                     const Eigen::VectorXd& theta,
                                                     const Eigen::VectorXd& p0,
                                                     const KernelConfig& cfg) {
  detail::Trajectory t = detail::integrate(target, theta, p0, cfg);
  return {std::move(t.theta), std::move(t.momentum)};
}

/// One kernel move: fresh momentum, leapfrog trajectory, no accept-reject.
/// A divergent trajectory is flagged rather than thrown so callers can apply
/// their own policy; the returned position is then the starting one.
struct ProposalResult {
  Eigen::VectorXd theta_new;
  Eigen::VectorXd p_initial;
  Eigen::VectorXd p_final;
  double log_target_new = 0.0;
  double log_target_old = 0.0;
  bool divergent = false;
  int divergence_step = -1;
};

template <GradientTarget Target>
ProposalResult propose(const Target& target, const Eigen::VectorXd& theta,
                       const KernelConfig& cfg, RngStream& rng) {
  ProposalResult result;
  result.p_initial = rng.normal_vector(theta.size());
  try {
    detail::Trajectory t = detail::integrate(target, theta, result.p_initial, cfg);
    result.theta_new = std::move(t.theta);
    result.p_final = std::move(t.momentum);
    result.log_target_new = t.value_end;
    result.log_target_old = t.value_start;
  } catch (const DivergenceError& err) {
    result.theta_new = theta;
    result.p_final = result.p_initial;
    result.log_target_new = std::numeric_limits<double>::quiet_NaN();
    result.log_target_old = std::numeric_limits<double>::quiet_NaN();
    result.divergent = true;
    result.divergence_step = err.step();
  }
  return result;
}

/// Log of the incremental importance weight for a forward-kernel L-kernel:
/// the proposal and L-kernel Jacobians cancel, leaving the target ratio times
/// the Gaussian momentum ratio N(-p_final)/N(p_initial). Non-finite inputs
/// yield -inf, killing the particle at the next resample.
inline double incremental_log_weight(double log_target_new, double log_target_old,
                                     const Eigen::Ref<const Eigen::VectorXd>& p_initial,
                                     const Eigen::Ref<const Eigen::VectorXd>& p_final) {
  if (p_initial.size() != p_final.size())
    throw std::invalid_argument("incremental_log_weight: momentum dimension mismatch");
  if (!std::isfinite(log_target_new) || !std::isfinite(log_target_old) ||
      !p_initial.allFinite() || !p_final.allFinite())
    return kNegInf;
  return (log_target_new - log_target_old) +
         0.5 * (p_initial.squaredNorm() - p_final.squaredNorm());
}

}  // namespace dasmc

#endif  // DASMC_KERNELS_HPP
