#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dasmc/numeric.hpp"

using Catch::Approx;
using dasmc::RngStream;
using dasmc::WeightedSample;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("logsumexp basics") {
  REQUIRE(dasmc::logsumexp(vec({0.0, 0.0})) == Approx(std::log(2.0)).epsilon(1e-12));
  // Naive evaluation underflows; shift-invariance forces this value.
  REQUIRE(dasmc::logsumexp(vec({-1000.0, -1000.0})) ==
          Approx(-1000.0 + std::log(2.0)).epsilon(1e-12));
  REQUIRE(dasmc::logsumexp(vec({3.7})) == Approx(3.7));
  REQUIRE(std::isfinite(dasmc::logsumexp(vec({700.0, 699.0}))));
  REQUIRE(dasmc::logsumexp(vec({0.0, dasmc::kNegInf})) == Approx(0.0).margin(1e-15));
}

TEST_CASE("logsumexp domain errors") {
  REQUIRE_THROWS_AS(dasmc::logsumexp(Eigen::VectorXd()), std::invalid_argument);
  REQUIRE_THROWS_AS(dasmc::logsumexp(vec({dasmc::kNegInf, dasmc::kNegInf})),
                    std::invalid_argument);
}

TEST_CASE("logsumexp shift invariance") {
  RngStream rng(11);
  for (double shift : {500.0, -500.0}) {
    Eigen::VectorXd v(20);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 10.0 * rng.normal();
    const double base = dasmc::logsumexp(v);
    const double shifted = dasmc::logsumexp((v.array() + shift).matrix());
    REQUIRE(shifted == Approx(base + shift).epsilon(1e-12));
  }
}

TEST_CASE("weighted_mean") {
  REQUIRE(dasmc::weighted_mean({vec({1, 2, 3, 4}), vec({0.25, 0.25, 0.25, 0.25})}) ==
          Approx(2.5));
  REQUIRE(dasmc::weighted_mean({vec({5, 7, 9}), vec({1, 0, 0})}) == Approx(5.0));
  REQUIRE(dasmc::weighted_mean({vec({2, 4}), vec({0.25, 0.75})}) == Approx(3.5));
  REQUIRE_THROWS_AS(dasmc::weighted_mean({vec({1, 2}), vec({1.0})}), std::invalid_argument);
}

TEST_CASE("weighted_var") {
  REQUIRE(dasmc::weighted_var({vec({3, 3, 3}), vec({0.2, 0.3, 0.5})}) == Approx(0.0).margin(1e-15));
  REQUIRE(dasmc::weighted_var({vec({0, 2}), vec({0.5, 0.5})}) == Approx(1.0));
  // Hand evaluation: E[X] = 2.1, E[X^2] = 4.9, variance = 0.49.
  REQUIRE(dasmc::weighted_var({vec({1, 2, 3}), vec({0.2, 0.5, 0.3})}) == Approx(0.49));
  REQUIRE(dasmc::weighted_var({vec({1e8, 1e8}), vec({0.5, 0.5})}) >= 0.0);
}

TEST_CASE("weighted_cov") {
  const Eigen::VectorXd x = vec({1, 2, 4});
  const Eigen::VectorXd w = vec({0.3, 0.45, 0.25});
  REQUIRE(dasmc::weighted_cov(x, x, w) ==
          Approx(dasmc::weighted_var({x, w})).margin(1e-12));
  REQUIRE(dasmc::weighted_cov(x, vec({7, 7, 7}), w) == Approx(0.0).margin(1e-12));
  // Hand evaluation of the product-moment formula.
  REQUIRE(dasmc::weighted_cov(vec({1, 2}), vec({2, 1}), vec({0.5, 0.5})) == Approx(-0.25));
  REQUIRE_THROWS_AS(dasmc::weighted_cov(vec({1, 2}), vec({1, 2, 3}), vec({0.5, 0.5})),
                    std::invalid_argument);
}

TEST_CASE("weighted_var never negative on random inputs") {
  RngStream rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::VectorXd values(10), raw(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
      values[i] = 100.0 * rng.normal();
      raw[i] = rng.uniform() + 1e-3;
    }
    Eigen::VectorXd w = raw / raw.sum();
    const double var = dasmc::weighted_var({values, w});
    REQUIRE(var >= 0.0);
    REQUIRE(dasmc::weighted_cov(values, values, w) == Approx(var).margin(1e-12));
  }
}

TEST_CASE("sample_categorical degenerate weights") {
  RngStream rng(17);
  for (int idx : dasmc::sample_categorical(rng, vec({1, 0, 0}), 5)) REQUIRE(idx == 0);
  for (int idx : dasmc::sample_categorical(rng, vec({0, 1}), 3)) REQUIRE(idx == 1);
  REQUIRE_THROWS_AS(dasmc::sample_categorical(rng, vec({0.5, 0.2}), 3), std::invalid_argument);
  REQUIRE_THROWS_AS(dasmc::sample_categorical(rng, vec({1.5, -0.5}), 3), std::invalid_argument);
}

TEST_CASE("sample_categorical uniform chi-square") {
  RngStream rng(2024);
  const int draws = 100000;
  const Eigen::VectorXd w = vec({0.25, 0.25, 0.25, 0.25});
  std::vector<int> counts(4, 0);
  for (int idx : dasmc::sample_categorical(rng, w, draws)) counts[static_cast<std::size_t>(idx)]++;
  const double expected = draws / 4.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 0.999 quantile of chi-square with 3 degrees of freedom.
  constexpr double kChi2Crit = 16.266;
  REQUIRE(chi2 < kChi2Crit);
}

TEST_CASE("sample_std_normal statistics and determinism") {
  RngStream a(9), b(9);
  REQUIRE(dasmc::sample_std_normal(a, 16) == dasmc::sample_std_normal(b, 16));

  RngStream rng(1234);
  const Eigen::Index n = 1000000;
  const Eigen::VectorXd z = dasmc::sample_std_normal(rng, n);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / static_cast<double>(n - 1);
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.01);

  RngStream c(9);
  REQUIRE_THROWS_AS(dasmc::sample_std_normal(c, 0), std::invalid_argument);
}
