// Shared helpers for the test suites: finite-difference oracles and random
// problem generators. These stay independent of the gradient code they check.
#ifndef DASMC_TESTS_TEST_UTIL_HPP
#define DASMC_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "dasmc/network.hpp"
#include "dasmc/rng.hpp"

namespace test_util {

/// Central finite differences of a scalar function, coordinate by coordinate.
inline Eigen::VectorXd central_diff_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
    double eps = 1e-5) {
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + eps;
    const double hi = f(probe);
    probe[i] = theta[i] - eps;
    const double lo = f(probe);
    probe[i] = theta[i];
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

/// Max over coordinates of |a-b| / max(|a|, |b|, floor). The floor guards
/// coordinates where both sides vanish.
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                            double floor = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline dasmc::NetSpec random_net_spec(dasmc::RngStream& rng, int max_inputs = 6,
                                      int max_hidden = 8, int max_classes = 5) {
  dasmc::NetSpec spec;
  const int inputs = 2 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(max_inputs - 1)));
  const int classes = 2 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(max_classes - 1)));
  spec.layer_sizes.push_back(inputs);
  const int hidden_layers = static_cast<int>(rng.uniform_below(3));  // 0, 1, or 2
  for (int l = 0; l < hidden_layers; ++l)
    spec.layer_sizes.push_back(2 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(max_hidden - 1))));
  spec.layer_sizes.push_back(classes);
  spec.activation = rng.uniform() < 0.5 ? dasmc::Activation::kRelu : dasmc::Activation::kTanh;
  return spec;
}

struct RandomBatch {
  dasmc::RowMatrixXd features;
  std::vector<int> labels;
};

inline RandomBatch random_batch(dasmc::RngStream& rng, const dasmc::NetSpec& spec,
                                Eigen::Index count) {
  RandomBatch batch;
  batch.features.resize(count, spec.layer_sizes.front());
  batch.labels.resize(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < batch.features.cols(); ++j) batch.features(i, j) = rng.normal();
    batch.labels[static_cast<std::size_t>(i)] = static_cast<int>(
        rng.uniform_below(static_cast<std::uint64_t>(spec.layer_sizes.back())));
  }
  return batch;
}

}  // namespace test_util

#endif  // DASMC_TESTS_TEST_UTIL_HPP
