#ifndef DASMC_ANNEALING_HPP
#define DASMC_ANNEALING_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "dasmc/dataset.hpp"
#include "dasmc/numeric.hpp"
#include "dasmc/parallel.hpp"
#include "dasmc/smc.hpp"
#include "dasmc/target.hpp"

namespace dasmc {

enum class ScheduleKind { kConstant, kFullBatch, kCtr, kLinear, kAutomated, kSda };

/// Data-annealing schedule parameters: initial_batch is the starting subset
/// size, increment the size of each appended mini-batch, iterations the
/// sampler's iteration budget, dataset_size the full data count.
struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::kFullBatch;
  Eigen::Index initial_batch = 1;
  Eigen::Index increment = 1;
  int iterations = 1;
  Eigen::Index dataset_size = 1;
};

inline void validate(const ScheduleConfig& cfg) {
  if (cfg.initial_batch < 1 || cfg.initial_batch > cfg.dataset_size)
    throw std::invalid_argument("ScheduleConfig: need 1 <= initial_batch <= dataset_size");
  if (cfg.increment < 1 || cfg.increment > cfg.dataset_size)
    throw std::invalid_argument("ScheduleConfig: need 1 <= increment <= dataset_size");
  if (cfg.iterations < 1) throw std::invalid_argument("ScheduleConfig: iterations must be >= 1");
}

namespace detail {

inline Eigen::Index round_to_multiple_half_up(double value, Eigen::Index multiple) {
  return static_cast<Eigen::Index>(std::floor(value / static_cast<double>(multiple) + 0.5)) *
         multiple;
}

}  // namespace detail

/// Subset size used at iteration k for the five fixed schedules. The
/// two-stage schedules switch to the full batch at 0.9 * iterations; the
/// automated schedule rounds to the nearest whole mini-batch (ties up) and
/// is clamped to [initial_batch, dataset_size].
inline Eigen::Index batch_size(const ScheduleConfig& cfg, int k) {
  validate(cfg);
  if (k < 0 || k >= cfg.iterations) throw std::invalid_argument("batch_size: k out of range");
  if (cfg.kind == ScheduleKind::kSda)
    throw std::invalid_argument("batch_size: the sda schedule is state-driven");
  const double switch_point = 0.9 * static_cast<double>(cfg.iterations);
  const bool early = static_cast<double>(k) < switch_point;
  switch (cfg.kind) {
    case ScheduleKind::kConstant:
      return cfg.initial_batch;
    case ScheduleKind::kFullBatch:
      return cfg.dataset_size;
    case ScheduleKind::kCtr:
      return early ? cfg.initial_batch : cfg.dataset_size;
    case ScheduleKind::kLinear:
      return early ? std::min(cfg.increment * k + cfg.initial_batch, cfg.dataset_size)
                   : cfg.dataset_size;
    case ScheduleKind::kAutomated: {
      if (!early) return cfg.dataset_size;
      const auto slope = static_cast<Eigen::Index>(
          std::floor(static_cast<double>(cfg.dataset_size - cfg.initial_batch) / switch_point));
      const Eigen::Index raw = cfg.initial_batch + slope * k;
      const Eigen::Index rounded =
          detail::round_to_multiple_half_up(static_cast<double>(raw), cfg.increment);
      return std::clamp(rounded, cfg.initial_batch, cfg.dataset_size);
    }
    case ScheduleKind::kSda:
      break;
  }
  throw std::logic_error("batch_size: unreachable");
}

enum class SdaStage { kInitial, kAnnealed };

/// Smooth data-annealing controller state. In the initial stage the whole
/// subset is the tempered block; afterwards the prefix enters the likelihood
/// at full strength and only the newest block is tempered by beta.
struct SdaState {
  double beta = 0.1;
  double entropy_step = 1.0;  // signed entropy rate, flipped when an update would not raise beta
  double beta_reset = 0.1;
  SubsetWindow window;
  SdaStage stage = SdaStage::kInitial;
  bool terminal = false;
};

inline SdaState sda_init(const ScheduleConfig& cfg, double beta0 = 0.1,
                         double entropy_step = 1.0) {
  validate(cfg);
  if (!(beta0 > 0.0 && beta0 <= 1.0))
    throw std::invalid_argument("sda_init: beta0 must be in (0, 1]");
  SdaState state;
  state.beta = beta0;
  state.beta_reset = beta0;
  state.entropy_step = entropy_step;
  state.window = SubsetWindow{0, cfg.initial_batch, cfg.dataset_size};
  state.stage = SdaStage::kInitial;
  return state;
}

namespace detail {

inline double sda_beta_step(double beta, double& entropy_step, double denom) {
  if (denom == 0.0) return 1.0;  // particles agree on the block; nothing left to temper
  double candidate = beta - entropy_step / denom;
  if (candidate <= beta) {
    entropy_step = -entropy_step;
    candidate = beta - entropy_step / denom;
  }
  return std::min(candidate, 1.0);
}

}  // namespace detail

/// Temper-exponent update while the whole subset is one tempered block:
/// beta' = beta - step / Var(block NLL), with the sign flip and clip at 1.
inline double sda_beta_update_initial(double beta, double entropy_step, double var_block) {
  if (var_block < 0.0)
    throw std::invalid_argument("sda_beta_update_initial: variance must be >= 0");
  double step = entropy_step;
  return detail::sda_beta_step(beta, step, var_block);
}

/// Same update with denominator Var(block NLL) + Cov(prefix NLL, block NLL).
inline double sda_beta_update_annealed(double beta, double entropy_step, double var_block,
                                       double cov_prefix_block) {
  double step = entropy_step;
  return detail::sda_beta_step(beta, step, var_block + cov_prefix_block);
}

/// The weighted moment estimators driving the beta updates. All quantities
/// use unscaled negative log-likelihoods of the prefix and block segments.
struct SdaMoments {
  double mean_block = 0.0;      // E[block NLL]
  double mean_block_sq = 0.0;   // E[block NLL^2]
  double var_block = 0.0;       // Var(block NLL)
  double mean_prefix = 0.0;     // E[prefix NLL]
  double mean_prod = 0.0;       // E[prefix NLL * block NLL]
  double cov_prefix_block = 0.0;
};

inline SdaMoments sda_moments(const ParticleEnsemble& e, const Dataset& d, const ModelSpec& model,
                              const SubsetWindow& window, int num_threads = 1) {
  validate(window);
  if (window.block_end <= window.prefix_end)
    throw std::invalid_argument("sda_moments: window has no new block");
  const Eigen::Index count = e.count();
  Eigen::VectorXd prefix_nll(count), block_nll(count);
  parallel_for(count, num_threads, [&](Eigen::Index j) {
    const LoglikParts parts = unscaled_loglik_parts(d, window, model, e.thetas.col(j));
    prefix_nll[j] = -parts.prefix;
    block_nll[j] = -parts.block;
  });
  const Eigen::VectorXd w = normalize(e.log_weights);
  SdaMoments m;
  m.mean_block = weighted_mean({block_nll, w});
  m.mean_block_sq = weighted_mean({block_nll.cwiseAbs2(), w});
  m.var_block = weighted_var({block_nll, w});
  m.mean_prefix = weighted_mean({prefix_nll, w});
  m.mean_prod = weighted_mean({prefix_nll.cwiseProduct(block_nll), w});
  m.cov_prefix_block = weighted_cov(prefix_nll, block_nll, w);
  return m;
}

/// Advance the controller after an iteration: update beta from the ensemble
/// moments; when beta reaches 1, absorb the block into the prefix, append
/// the next mini-batch (clamped at the dataset size), and reset beta. Once
/// the prefix covers the whole dataset the state is terminal with beta
/// pinned at 1.
inline SdaState sda_advance(const ScheduleConfig& cfg, const SdaState& state,
                            const ParticleEnsemble& e, const Dataset& d, const ModelSpec& model,
                            int num_threads = 1) {
  validate(cfg);
  if (state.terminal) return state;
  const SdaMoments m = sda_moments(e, d, model, state.window, num_threads);
  const double denom =
      state.stage == SdaStage::kInitial ? m.var_block : m.var_block + m.cov_prefix_block;
  SdaState next = state;
  const double beta_new = detail::sda_beta_step(state.beta, next.entropy_step, denom);
  if (beta_new >= 1.0) {
    const Eigen::Index absorbed = state.window.block_end;
    if (absorbed >= cfg.dataset_size) {
      next.beta = 1.0;
      next.window = SubsetWindow{cfg.dataset_size, cfg.dataset_size, cfg.dataset_size};
      next.stage = SdaStage::kAnnealed;
      next.terminal = true;
    } else {
      next.beta = state.beta_reset;
      next.window = SubsetWindow{absorbed, std::min(absorbed + cfg.increment, cfg.dataset_size),
                                 cfg.dataset_size};
      next.stage = SdaStage::kAnnealed;
    }
  } else {
    next.beta = beta_new;
  }
  return next;
}

}  // namespace dasmc

#endif  // DASMC_ANNEALING_HPP
