#ifndef DASMC_SMC_HPP
#define DASMC_SMC_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dasmc/kernels.hpp"
#include "dasmc/numeric.hpp"
#include "dasmc/parallel.hpp"
#include "dasmc/rng.hpp"
#include "dasmc/target.hpp"

namespace dasmc {

/// Unrecoverable sampler state, e.g. every particle dead.
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sampler's entire mutable state: particle positions (one column per
/// particle), log-weights, and the iteration counter.
struct ParticleEnsemble {
  Eigen::MatrixXd thetas;       // dim x count
  Eigen::VectorXd log_weights;  // count
  int iteration = 0;

  Eigen::Index count() const { return thetas.cols(); }
  Eigen::Index dim() const { return thetas.rows(); }
};

/// One row of the per-iteration metrics trace.
struct IterRecord {
  int k = 0;
  Eigen::Index batch = 0;
  double beta = 1.0;
  double ess = 0.0;
  bool resampled = false;
  double mean_log_target = 0.0;
  double sampler_ms = 0.0;
  double test_log_pred = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  bool evaluated = false;
};

struct SmcOptions {
  int num_threads = 1;
  double resample_fraction = 0.5;  // resample when ESS < fraction * count
};

/// Exp-normalized weights; shift-invariant via logsumexp.
inline Eigen::VectorXd normalize(const Eigen::Ref<const Eigen::VectorXd>& log_weights) {
  if (log_weights.size() == 0) throw std::invalid_argument("normalize: empty weights");
  const double m = log_weights.maxCoeff();
  if (m == kNegInf) throw SamplerError("normalize: all particles dead (every log-weight is -inf)");
  Eigen::VectorXd w = (log_weights.array() - m).exp();
  w /= w.sum();
  return w;
}

/// Effective sample size 1 / sum(w^2) of normalized weights.
inline double ess(const Eigen::Ref<const Eigen::VectorXd>& normweights) {
  return 1.0 / normweights.squaredNorm();
}

/// Draw positions from the prior and weight by target/prior, which reduces
/// to the (scaled or tempered) log-likelihood at the drawn position.
inline ParticleEnsemble init_ensemble(Eigen::Index count, const TargetContext& ctx0,
                                      RngStream& rng, int num_threads = 1) {
  if (count < 2) throw std::invalid_argument("init_ensemble: need at least 2 particles");
  validate(ctx0);
  const Eigen::Index dim = model_param_count(ctx0.model);
  ParticleEnsemble e;
  e.thetas.resize(dim, count);
  e.log_weights.resize(count);
  parallel_for(count, num_threads, [&](Eigen::Index j) {
    RngStream stream = rng.fork(rng_tag::kInit, static_cast<std::uint64_t>(j));
    const Eigen::VectorXd theta = sample_gaussian_prior(ctx0.prior, dim, stream);
    e.thetas.col(j) = theta;
    e.log_weights[j] = log_target(ctx0, theta) - prior_logpdf(ctx0.prior, theta);
  });
  e.iteration = 0;
  return e;
}

/// Multinomial resampling: draw count indices proportional to weight, copy
/// the selected particles, and reset all log-weights to log(1/count).
inline ParticleEnsemble resample_multinomial(const ParticleEnsemble& e, RngStream& rng) {
  const Eigen::VectorXd w = normalize(e.log_weights);
  const std::vector<int> idx = sample_categorical(rng, w, static_cast<int>(e.count()));
  ParticleEnsemble out;
  out.thetas.resize(e.dim(), e.count());
  for (Eigen::Index j = 0; j < e.count(); ++j)
    out.thetas.col(j) = e.thetas.col(idx[static_cast<std::size_t>(j)]);
  out.log_weights = Eigen::VectorXd::Constant(e.count(), -std::log(static_cast<double>(e.count())));
  out.iteration = e.iteration;
  return out;
}

/// One SMC iteration: propose every particle under ctx, apply the
/// incremental weight, then normalize, record ESS, and resample if ESS
/// dropped below the threshold. A divergent particle keeps its position and
/// receives weight -inf.
template <GradientTarget Target>
std::pair<ParticleEnsemble, IterRecord> smc_step(const ParticleEnsemble& e, const Target& target,
                                                 const KernelConfig& cfg, RngStream& rng,
                                                 const SmcOptions& opts = {}) {
  KernelConfig::validate(cfg);
  const Eigen::Index count = e.count();
  const int k = e.iteration;

  std::vector<ProposalResult> proposals(static_cast<std::size_t>(count));
  parallel_for(count, opts.num_threads, [&](Eigen::Index j) {
    RngStream stream =
        rng.fork(rng_tag::kProposal, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j));
    proposals[static_cast<std::size_t>(j)] = propose(target, e.thetas.col(j), cfg, stream);
  });

  ParticleEnsemble next;
  next.thetas.resize(e.dim(), count);
  next.log_weights.resize(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    const ProposalResult& p = proposals[static_cast<std::size_t>(j)];
    if (p.divergent) {
      next.thetas.col(j) = e.thetas.col(j);
      next.log_weights[j] = kNegInf;
    } else {
      next.thetas.col(j) = p.theta_new;
      next.log_weights[j] =
          e.log_weights[j] +
          incremental_log_weight(p.log_target_new, p.log_target_old, p.p_initial, p.p_final);
    }
  }

  IterRecord record;
  record.k = k;
  const Eigen::VectorXd w = normalize(next.log_weights);  // throws if all particles died
  record.ess = ess(w);
  double mean_lt = 0.0;
  for (Eigen::Index j = 0; j < count; ++j) {
    if (w[j] > 0.0) mean_lt += w[j] * proposals[static_cast<std::size_t>(j)].log_target_new;
  }
  record.mean_log_target = mean_lt;

  next.iteration = k + 1;
  if (record.ess < opts.resample_fraction * static_cast<double>(count)) {
    RngStream stream = rng.fork(rng_tag::kResample, static_cast<std::uint64_t>(k));
    next = resample_multinomial(next, stream);
    next.iteration = k + 1;
    record.resampled = true;
  }
  return {std::move(next), record};
}

/// Weighted expectation of f over the ensemble.
inline double estimate(const ParticleEnsemble& e,
                       const std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>& f) {
  const Eigen::VectorXd w = normalize(e.log_weights);
  double total = 0.0;
  for (Eigen::Index j = 0; j < e.count(); ++j)
    if (w[j] > 0.0) total += w[j] * f(e.thetas.col(j));
  return total;
}

/// Weighted mean of each coordinate over the ensemble.
inline Eigen::VectorXd estimate_mean(const ParticleEnsemble& e) {
  return e.thetas * normalize(e.log_weights);
}

/// Weighted marginal variance of each coordinate over the ensemble.
inline Eigen::VectorXd estimate_marginal_variance(const ParticleEnsemble& e) {
  const Eigen::VectorXd w = normalize(e.log_weights);
  const Eigen::VectorXd mean = e.thetas * w;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(e.dim());
  for (Eigen::Index j = 0; j < e.count(); ++j) {
    if (w[j] > 0.0) var += w[j] * (e.thetas.col(j) - mean).cwiseAbs2();
  }
  return var;
}

}  // namespace dasmc

#endif  // DASMC_SMC_HPP
