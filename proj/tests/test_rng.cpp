#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsubcox/rng.hpp"

#include "oracles.hpp"

#include <cmath>

using namespace dsubcox;
namespace oracle = dsubcox::testing;

TEST_CASE("inverse_normal_cdf matches a bisection of the CDF to 1e-8") {
  for (const double p : {1e-6, 0.001, 0.025, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999, 1 - 1e-6}) {
    CHECK(std::abs(inverse_normal_cdf(p) - oracle::bisect_normal_quantile(p)) < 1e-8);
  }
  // the textbook two-sided 95% point
  CHECK(std::abs(inverse_normal_cdf(0.975) - 1.9599639845400545) < 1e-8);
  CHECK(std::abs(inverse_normal_cdf(0.5)) < 1e-9);
}

TEST_CASE("inverse_normal_cdf rejects endpoints") {
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::invalid_argument);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::invalid_argument);
  CHECK_THROWS_AS(inverse_normal_cdf(-0.5), std::invalid_argument);
}

TEST_CASE("normal_cdf round-trips the quantile") {
  for (const double x : {-3.0, -1.0, 0.0, 0.5, 2.5}) {
    CHECK(inverse_normal_cdf(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-8));
  }
}

TEST_CASE("Rng: seeded streams replay exactly") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("Rng: uniform ranges") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_pos();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("Rng: normal and exponential moments") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0, exp_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
    exp_sum += rng.exponential();
  }
  CHECK(sum / n == doctest::Approx(0.0).scale(1).epsilon(0.01));
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(exp_sum / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Rng: rejection-free integer range") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    CHECK(rng.below(7) < 7);
  }
}

TEST_CASE("derive_seed: path components matter and commute with nothing") {
  const std::uint64_t master = 1234;
  CHECK(derive_seed(master, {1, 2}) != derive_seed(master, {2, 1}));
  CHECK(derive_seed(master, {1, 2}) != derive_seed(master, {1, 3}));
  CHECK(derive_seed(master, {1}) != derive_seed(master + 1, {1}));
  CHECK(derive_seed(master, {1, 2}) == derive_seed(master, {1, 2}));
}

TEST_CASE("derive_stream: distinct paths give unrelated draws") {
  Rng a = derive_stream(99, {stream::kDataset, 0, 0});
  Rng b = derive_stream(99, {stream::kDataset, 0, 1});
  int equal = 0;
  for (int i = 0; i < 100; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}
