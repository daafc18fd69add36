#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "dasmc/network.hpp"
#include "test_util.hpp"

using Catch::Approx;
using dasmc::Activation;
using dasmc::NetSpec;
using dasmc::PriorSpec;
using dasmc::RngStream;
using dasmc::RowMatrixXd;

namespace {

// Independent forward implementation: explicit per-unit loops, no Eigen
// products, used as an oracle for the batched path.
Eigen::VectorXd naive_forward(const NetSpec& spec, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& x) {
  std::vector<double> current(x.data(), x.data() + x.size());
  int offset = 0;
  for (std::size_t l = 1; l < spec.layer_sizes.size(); ++l) {
    const int in = spec.layer_sizes[l - 1];
    const int out = spec.layer_sizes[l];
    std::vector<double> next(static_cast<std::size_t>(out), 0.0);
    for (int r = 0; r < out; ++r) {
      double acc = 0.0;
      for (int c = 0; c < in; ++c) acc += theta[offset + c * out + r] * current[static_cast<std::size_t>(c)];
      acc += theta[offset + in * out + r];
      if (l + 1 < spec.layer_sizes.size())
        acc = spec.activation == Activation::kRelu ? std::max(0.0, acc) : std::tanh(acc);
      next[static_cast<std::size_t>(r)] = acc;
    }
    offset += in * out + out;
    current = std::move(next);
  }
  return Eigen::Map<Eigen::VectorXd>(current.data(), static_cast<Eigen::Index>(current.size()));
}

}  // namespace

TEST_CASE("param_count") {
  REQUIRE(dasmc::param_count({{2, 3, 2}}) == 17);
  REQUIRE(dasmc::param_count({{784, 32, 10}}) == 25450);
  REQUIRE(dasmc::param_count({{1, 1}}) == 2);
  REQUIRE_THROWS_AS(dasmc::param_count({{4}}), std::invalid_argument);
  REQUIRE_THROWS_AS(dasmc::param_count({{4, 0, 2}}), std::invalid_argument);
}

TEST_CASE("forward on fixed nets") {
  const NetSpec tiny{{1, 1}};
  Eigen::VectorXd theta(2);
  theta << 2.0, 1.0;  // weight 2, bias 1
  Eigen::VectorXd x(1);
  x << 3.0;
  REQUIRE(dasmc::forward(tiny, theta, x)[0] == Approx(7.0));

  const NetSpec spec{{3, 4, 2}};
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(dasmc::param_count(spec));
  Eigen::VectorXd input(3);
  input << 0.5, -1.0, 2.0;
  REQUIRE(dasmc::forward(spec, zeros, input).norm() == 0.0);

  Eigen::VectorXd bad(2);
  REQUIRE_THROWS_AS(dasmc::forward(spec, zeros, bad), std::invalid_argument);
}

TEST_CASE("forward matches an independent per-unit oracle") {
  RngStream rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    const NetSpec spec = test_util::random_net_spec(rng);
    const Eigen::VectorXd theta = rng.normal_vector(dasmc::param_count(spec));
    const Eigen::VectorXd x = rng.normal_vector(spec.layer_sizes.front());
    const Eigen::VectorXd got = dasmc::forward(spec, theta, x);
    const Eigen::VectorXd expect = naive_forward(spec, theta, x);
    REQUIRE((got - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("forward is permutation-equivariant in the output layer") {
  RngStream rng(55);
  const NetSpec spec{{4, 6, 3}};
  Eigen::VectorXd theta = rng.normal_vector(dasmc::param_count(spec));
  const Eigen::VectorXd x = rng.normal_vector(4);
  const Eigen::VectorXd base = dasmc::forward(spec, theta, x);

  // Swap output units 0 and 2: rows of the last weight matrix and biases.
  const int out_offset = 4 * 6 + 6;
  Eigen::VectorXd permuted = theta;
  for (int c = 0; c < 6; ++c)
    std::swap(permuted[out_offset + c * 3 + 0], permuted[out_offset + c * 3 + 2]);
  std::swap(permuted[out_offset + 6 * 3 + 0], permuted[out_offset + 6 * 3 + 2]);
  const Eigen::VectorXd swapped = dasmc::forward(spec, permuted, x);
  REQUIRE(swapped[0] == Approx(base[2]));
  REQUIRE(swapped[2] == Approx(base[0]));
  REQUIRE(swapped[1] == Approx(base[1]));
}

TEST_CASE("loglik_point") {
  const NetSpec spec{{2, 10}};
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(dasmc::param_count(spec));
  Eigen::VectorXd x(2);
  x << 0.3, -0.2;
  // All-equal logits over 10 classes.
  REQUIRE(dasmc::loglik_point(spec, zeros, x, 4) == Approx(-std::log(10.0)));
  REQUIRE_THROWS_AS(dasmc::loglik_point(spec, zeros, x, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(dasmc::loglik_point(spec, zeros, x, -1), std::invalid_argument);

  // Saturated softmax must not overflow.
  Eigen::VectorXd big(2);
  big << 1000.0, -1000.0;
  REQUIRE(dasmc::log_softmax_at(big, 0) == Approx(0.0).margin(1e-12));
  REQUIRE(std::isfinite(dasmc::log_softmax_at(big, 1)));
}

TEST_CASE("loglik_point matches naive softmax at moderate logits") {
  RngStream rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    const NetSpec spec = test_util::random_net_spec(rng);
    const Eigen::VectorXd theta = 0.5 * rng.normal_vector(dasmc::param_count(spec));
    const Eigen::VectorXd x = rng.normal_vector(spec.layer_sizes.front());
    const Eigen::VectorXd logits = dasmc::forward(spec, theta, x);
    const int label = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(logits.size())));
    const double naive = std::log(std::exp(logits[label]) / logits.array().exp().sum());
    REQUIRE(dasmc::loglik_point(spec, theta, x, label) == Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("per-point likelihoods normalize over labels") {
  RngStream rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const NetSpec spec = test_util::random_net_spec(rng);
    const Eigen::VectorXd theta = rng.normal_vector(dasmc::param_count(spec));
    const Eigen::VectorXd x = rng.normal_vector(spec.layer_sizes.front());
    double total = 0.0;
    for (int c = 0; c < spec.layer_sizes.back(); ++c)
      total += std::exp(dasmc::loglik_point(spec, theta, x, c));
    REQUIRE(total == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("batch gradient matches central finite differences") {
  RngStream rng(2025);
  for (int rep = 0; rep < 20; ++rep) {
    const NetSpec spec = test_util::random_net_spec(rng);
    const Eigen::VectorXd theta = rng.normal_vector(dasmc::param_count(spec));
    const auto batch = test_util::random_batch(rng, spec, 1 + static_cast<Eigen::Index>(rng.uniform_below(6)));
    const auto [value, grad] = dasmc::loglik_and_grad_batch(spec, theta, batch.features, batch.labels);
    const Eigen::VectorXd fd = test_util::central_diff_gradient(
        [&](const Eigen::VectorXd& t) {
          return dasmc::loglik_batch(spec, t, batch.features, batch.labels);
        },
        theta);
    REQUIRE(test_util::max_rel_error(grad, fd) < 1e-4);
    REQUIRE(value == Approx(dasmc::loglik_batch(spec, theta, batch.features, batch.labels)));
  }
}

TEST_CASE("duplicated datapoint doubles likelihood and gradient exactly") {
  RngStream rng(7);
  const NetSpec spec{{3, 5, 2}, Activation::kTanh};
  const Eigen::VectorXd theta = rng.normal_vector(dasmc::param_count(spec));
  const auto single = test_util::random_batch(rng, spec, 1);
  RowMatrixXd doubled(2, 3);
  doubled.row(0) = single.features.row(0);
  doubled.row(1) = single.features.row(0);
  const std::vector<int> labels{single.labels[0], single.labels[0]};

  const auto [v1, g1] = dasmc::loglik_and_grad_batch(spec, theta, single.features, single.labels);
  const auto [v2, g2] = dasmc::loglik_and_grad_batch(spec, theta, doubled, labels);
  REQUIRE(v2 == 2.0 * v1);
  REQUIRE((g2 - 2.0 * g1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero parameters give closed-form output bias gradient") {
  const NetSpec spec{{2, 3, 3}};
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(dasmc::param_count(spec));
  RngStream rng(13);

  // Balanced labels: count_c - batch/classes = 0 for every class.
  RowMatrixXd features(3, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) features(i, j) = rng.normal();
  const std::vector<int> balanced{0, 1, 2};
  const auto [v_bal, g_bal] = dasmc::loglik_and_grad_batch(spec, zeros, features, balanced);
  REQUIRE(v_bal == Approx(3.0 * -std::log(3.0)));
  REQUIRE(g_bal.cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-15));

  // Unbalanced labels: bias gradient for class c is count_c - batch/classes.
  const std::vector<int> unbalanced{1, 1, 2};
  const auto g_unb = dasmc::loglik_and_grad_batch(spec, zeros, features, unbalanced).second;
  const int bias_offset = 2 * 3 + 3 + 3 * 3;  // layer-1 params + output weights
  REQUIRE(g_unb[bias_offset + 0] == Approx(0.0 - 1.0).margin(1e-12));
  REQUIRE(g_unb[bias_offset + 1] == Approx(2.0 - 1.0).margin(1e-12));
  REQUIRE(g_unb[bias_offset + 2] == Approx(1.0 - 1.0).margin(1e-12));
}

TEST_CASE("empty batch is rejected") {
  const NetSpec spec{{2, 2}};
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(dasmc::param_count(spec));
  const RowMatrixXd empty(0, 2);
  REQUIRE_THROWS_AS(dasmc::loglik_and_grad_batch(spec, theta, empty, {}), std::invalid_argument);
}

TEST_CASE("prior log-density and gradient") {
  PriorSpec unit{1.0};
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  constexpr double kLogTwoPi = 1.8378770664093455;
  const auto [lp0, g0] = dasmc::prior_logpdf_and_grad(unit, origin);
  REQUIRE(lp0 == Approx(-kLogTwoPi));
  REQUIRE(g0.norm() == 0.0);

  const double sigma = 0.7;
  PriorSpec prior{sigma};
  Eigen::VectorXd at_sigma(1);
  at_sigma << sigma;
  const auto [lp, g] = dasmc::prior_logpdf_and_grad(prior, at_sigma);
  REQUIRE(lp == Approx(-0.5 * std::log(2.0 * M_PI * sigma * sigma) - 0.5));
  REQUIRE(g[0] == Approx(-1.0 / sigma));

  RngStream rng(19);
  const Eigen::VectorXd theta = rng.normal_vector(6);
  const Eigen::VectorXd fd = test_util::central_diff_gradient(
      [&](const Eigen::VectorXd& t) { return dasmc::prior_logpdf(prior, t); }, theta, 1e-6);
  const Eigen::VectorXd exact = dasmc::prior_logpdf_and_grad(prior, theta).second;
  REQUIRE(test_util::max_rel_error(exact, fd, 1e-6) < 1e-8);
}

TEST_CASE("sample_prior") {
  REQUIRE_THROWS_AS(dasmc::validate(PriorSpec{0.0}), std::invalid_argument);
  RngStream bad_rng(1);
  REQUIRE_THROWS_AS(dasmc::sample_gaussian_prior(PriorSpec{0.0}, 3, bad_rng),
                    std::invalid_argument);

  const NetSpec spec{{1, 1}};
  RngStream a(5), b(5);
  REQUIRE(dasmc::sample_prior({1.0}, spec, a) == dasmc::sample_prior({1.0}, spec, b));

  const double sigma = 2.5;
  RngStream rng(99);
  const int draws = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = dasmc::sample_gaussian_prior({sigma}, 1, rng)[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sum_sq / draws - mean * mean);
  REQUIRE(std::abs(sd - sigma) / sigma < 0.01);
}
