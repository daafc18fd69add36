#ifndef DASMC_NUMERIC_HPP
#define DASMC_NUMERIC_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dasmc/rng.hpp"

namespace dasmc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(v_i)), max-shifted so entries near +-700 cannot overflow.
inline double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) throw std::invalid_argument("logsumexp: empty input");
  const double m = v.maxCoeff();
  if (m == kNegInf) throw std::invalid_argument("logsumexp: all entries are -inf");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) sum += std::exp(v[i] - m);
  return m + std::log(sum);
}

inline double logsumexp(const std::vector<double>& v) {
  return logsumexp(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

/// Values paired with normalized weights (each >= 0, summing to 1).
struct WeightedSample {
  Eigen::VectorXd values;
  Eigen::VectorXd weights;
};

inline void check_normalized_weights(const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (w.size() == 0) throw std::invalid_argument("weights: empty");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0)) throw std::invalid_argument("weights: entries must be >= 0");
    sum += w[i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("weights: must sum to 1");
}

inline double weighted_mean(const WeightedSample& s) {
  if (s.values.size() != s.weights.size())
    throw std::invalid_argument("weighted_mean: length mismatch");
  check_normalized_weights(s.weights);
  return s.weights.dot(s.values);
}

/// E[X^2] - E[X]^2 under the sample's weights, clamped at 0 so roundoff can
/// never produce a negative variance.
inline double weighted_var(const WeightedSample& s) {
  if (s.values.size() != s.weights.size())
    throw std::invalid_argument("weighted_var: length mismatch");
  check_normalized_weights(s.weights);
  const double mean = s.weights.dot(s.values);
  const double mean_sq = s.weights.dot(s.values.cwiseProduct(s.values));
  return std::max(0.0, mean_sq - mean * mean);
}

/// E[XY] - E[X]E[Y] under shared normalized weights.
inline double weighted_cov(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y,
                           const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (x.size() != y.size() || x.size() != w.size())
    throw std::invalid_argument("weighted_cov: length mismatch");
  check_normalized_weights(w);
  const double mean_x = w.dot(x);
  const double mean_y = w.dot(y);
  const double mean_xy = w.dot(x.cwiseProduct(y));
  return mean_xy - mean_x * mean_y;
}

/// `count` i.i.d. indices, index j drawn with probability w[j].
inline std::vector<int> sample_categorical(RngStream& rng,
                                           const Eigen::Ref<const Eigen::VectorXd>& w,
                                           int count) {
  check_normalized_weights(w);
  if (count < 1) throw std::invalid_argument("sample_categorical: count must be >= 1");
  const Eigen::Index n = w.size();
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += w[i];
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  cdf.back() = 1.0;  // guarantees every u in [0,1) lands in range
  std::vector<int> out(static_cast<std::size_t>(count));
  for (auto& idx : out) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    idx = static_cast<int>(it - cdf.begin());
  }
  return out;
}

inline Eigen::VectorXd sample_std_normal(RngStream& rng, Eigen::Index dim) {
  return rng.normal_vector(dim);
}

}  // namespace dasmc

#endif  // DASMC_NUMERIC_HPP
