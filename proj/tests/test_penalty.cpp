#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fairsweep/errors.hpp"
#include "fairsweep/penalty.hpp"
#include "oracles.hpp"

using namespace fairsweep;

namespace {

struct RandomBatch {
  std::vector<double> values;
  std::vector<int> y;
  std::vector<int> groups;
};

RandomBatch random_batch(std::size_t n, int group_count, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> value_dist(-3.0, 0.0);
  RandomBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    batch.values.push_back(value_dist(gen));
    batch.y.push_back(static_cast<int>(gen() % 2));
    batch.groups.push_back(static_cast<int>(gen() % group_count));
  }
  return batch;
}

const Criterion kCriteria[] = {Criterion::demographic_parity,
                               Criterion::equalized_odds,
                               Criterion::equal_opportunity};

int criterion_code(Criterion c) {
  if (c == Criterion::demographic_parity) return 0;
  if (c == Criterion::equalized_odds) return 1;
  return 2;
}

}  // namespace

TEST_CASE("mmd_sq of identical multisets is zero") {
  const std::vector<double> sample = {0.1, -0.4, 2.0, 2.0, -1.7};
  CHECK(mmd_sq(sample, sample, 0.8) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mmd_sq closed form for unit point masses") {
  const std::vector<double> a = {0.0};
  const std::vector<double> b = {1.0};
  // 1 + 1 - 2 exp(-1/2)
  const double expected = 2.0 - 2.0 * std::exp(-0.5);
  CHECK(mmd_sq(a, b, 1.0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(expected == doctest::Approx(0.786938680574733).epsilon(1e-12));
}

TEST_CASE("mmd_sq matches the naive double loop on random samples") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(50), b(31 + trial);
    for (auto& v : a) v = dist(gen);
    for (auto& v : b) v = dist(gen);
    const double sigma = 0.3 + 0.2 * trial;
    CHECK(mmd_sq(a, b, sigma) ==
          doctest::Approx(oracles::mmd_sq_naive(a, b, sigma)).epsilon(1e-12));
  }
}

TEST_CASE("mmd_sq is symmetric and nonnegative") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(13), b(7);
    for (auto& v : a) v = dist(gen);
    for (auto& v : b) v = dist(gen);
    const double ab = mmd_sq(a, b, 0.5);
    const double ba = mmd_sq(b, a, 0.5);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("mmd_sq parameter errors") {
  const std::vector<double> a = {1.0};
  CHECK_THROWS_AS(mmd_sq(a, a, 0.0), ConfigError);
  CHECK_THROWS_AS(mmd_sq(a, a, -1.0), ConfigError);
  CHECK_THROWS_AS(mmd_sq({}, a, 1.0), ConfigError);
}

TEST_CASE("mean_diff_penalty hand-computed values") {
  SUBCASE("equal group means give zero") {
    const std::vector<std::vector<double>> groups = {{0.3, 0.3}, {0.3}};
    const std::vector<double> marginal = {0.3, 0.3, 0.3};
    CHECK(mean_diff_penalty(groups, marginal) == 0.0);
  }
  SUBCASE("two equal-size groups, means 0.2 and 0.4") {
    const std::vector<std::vector<double>> groups = {{0.1, 0.3}, {0.3, 0.5}};
    const std::vector<double> marginal = {0.1, 0.3, 0.3, 0.5};
    CHECK(mean_diff_penalty(groups, marginal) == doctest::Approx(0.02).epsilon(1e-14));
  }
  SUBCASE("single group equal to the population") {
    const std::vector<double> marginal = {0.1, 0.9, 0.4};
    const std::vector<std::vector<double>> groups = {{0.1, 0.9, 0.4}};
    CHECK(mean_diff_penalty(groups, marginal) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("empty group dropped") {
    const std::vector<std::vector<double>> groups = {{0.2}, {}};
    const std::vector<double> marginal = {0.2};
    CHECK(mean_diff_penalty(groups, marginal) == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("median heuristic bandwidth") {
  // values {0, 1, 3}: pairwise diffs {1, 3, 2}, median 2
  const std::vector<double> values = {0.0, 1.0, 3.0};
  CHECK(resolve_bandwidth(values, BandwidthPolicy::median_heuristic()) ==
        doctest::Approx(2.0).epsilon(1e-15));
  // all equal -> floored
  const std::vector<double> flat = {1.0, 1.0, 1.0};
  CHECK(resolve_bandwidth(flat, BandwidthPolicy::median_heuristic()) ==
        doctest::Approx(1e-3).epsilon(1e-15));
  // even count: midpoint of the two central diffs; {0,1,2,4} -> diffs
  // {1,2,4,1,3,2} sorted {1,1,2,2,3,4} -> (2+2)/2 = 2
  const std::vector<double> four = {0.0, 1.0, 2.0, 4.0};
  CHECK(resolve_bandwidth(four, BandwidthPolicy::median_heuristic()) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(resolve_bandwidth(values, BandwidthPolicy::fixed(0.7)) == 0.7);
  CHECK_THROWS_AS(resolve_bandwidth(values, BandwidthPolicy::fixed(0.0)), ConfigError);
}

TEST_CASE("regularizer is zero when all groups share identical multisets") {
  // two groups with the same multiset of values in each outcome stratum
  const std::vector<double> values = {-1.0, -0.5, -1.0, -0.5, -2.0, -0.1, -2.0, -0.1};
  const std::vector<int> y = {1, 1, 1, 1, 0, 0, 0, 0};
  const std::vector<int> groups = {0, 0, 1, 1, 0, 0, 1, 1};
  for (Criterion criterion : kCriteria) {
    for (Distance distance : {Distance::mmd, Distance::mean}) {
      PenaltyConfig config;
      config.criterion = criterion;
      config.distance = distance;
      config.lambda = 1.0;
      const double r = regularizer(values, y, groups, 2, config, 0.9);
      CHECK(std::abs(r) < 1e-12);
    }
  }
}

TEST_CASE("equalized odds decomposes into equal opportunity plus negative stratum") {
  const RandomBatch batch = random_batch(60, 3, 8);
  for (Distance distance : {Distance::mmd, Distance::mean}) {
    PenaltyConfig config;
    config.distance = distance;
    config.lambda = 1.0;
    config.criterion = Criterion::equalized_odds;
    const double eqodds = regularizer(batch.values, batch.y, batch.groups, 3, config, 0.7);
    config.criterion = Criterion::equal_opportunity;
    const double eqopp = regularizer(batch.values, batch.y, batch.groups, 3, config, 0.7);

    // negative stratum computed by flipping outcomes and asking for EqOpp
    std::vector<int> flipped(batch.y.size());
    for (std::size_t i = 0; i < batch.y.size(); ++i) flipped[i] = 1 - batch.y[i];
    const double negative =
        regularizer(batch.values, flipped, batch.groups, 3, config, 0.7);
    CHECK(eqodds == doctest::Approx(eqopp + negative).epsilon(1e-12));
  }
}

TEST_CASE("all six configs match the naive recomputation on random batches") {
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const RandomBatch batch = random_batch(48, 4, seed);
    for (Criterion criterion : kCriteria) {
      for (bool use_mmd : {true, false}) {
        PenaltyConfig config;
        config.criterion = criterion;
        config.distance = use_mmd ? Distance::mmd : Distance::mean;
        config.lambda = 1.0;
        const double sigma = 0.6;
        const double got =
            regularizer(batch.values, batch.y, batch.groups, 4, config, sigma);
        const double expected = oracles::regularizer_naive(
            batch.values, batch.y, batch.groups, 4, criterion_code(criterion),
            use_mmd, sigma);
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("regularizer is permutation invariant and nonnegative") {
  RandomBatch batch = random_batch(40, 3, 77);
  std::mt19937_64 gen(5);
  for (Criterion criterion : kCriteria) {
    for (Distance distance : {Distance::mmd, Distance::mean}) {
      PenaltyConfig config;
      config.criterion = criterion;
      config.distance = distance;
      config.lambda = 1.0;
      const double base = regularizer(batch.values, batch.y, batch.groups, 3, config, 0.5);
      CHECK(base >= -1e-15);

      auto shuffled = batch;
      std::vector<std::size_t> order(batch.values.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), gen);
      for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled.values[i] = batch.values[order[i]];
        shuffled.y[i] = batch.y[order[i]];
        shuffled.groups[i] = batch.groups[order[i]];
      }
      const double perm =
          regularizer(shuffled.values, shuffled.y, shuffled.groups, 3, config, 0.5);
      CHECK(perm == doctest::Approx(base).epsilon(1e-12));
    }
  }
}

TEST_CASE("cells below two records contribute zero") {
  // group 1 has a single record: DP penalty sees only group 0 vs marginal
  const std::vector<double> values = {-1.0, -0.2, -0.6, -1.4};
  const std::vector<int> y = {1, 1, 1, 1};
  const std::vector<int> groups = {0, 0, 0, 1};
  PenaltyConfig config;
  config.criterion = Criterion::demographic_parity;
  config.distance = Distance::mmd;
  config.lambda = 1.0;
  const double got = regularizer(values, y, groups, 2, config, 0.4);
  const std::vector<double> cell = {-1.0, -0.2, -0.6};
  CHECK(got == doctest::Approx(oracles::mmd_sq_naive(cell, values, 0.4)).epsilon(1e-12));

  // all cells degenerate -> zero, and no error
  const std::vector<int> tiny_groups = {0, 1, 2, 3};
  CHECK(regularizer(values, y, tiny_groups, 4, config, 0.4) == 0.0);
}

TEST_CASE("regularizer gradient matches central differences for all six configs") {
  for (std::uint64_t seed : {3ULL, 9ULL}) {
    const RandomBatch batch = random_batch(24, 3, seed);
    for (Criterion criterion : kCriteria) {
      for (Distance distance : {Distance::mmd, Distance::mean}) {
        PenaltyConfig config;
        config.criterion = criterion;
        config.distance = distance;
        config.lambda = 1.0;
        const double sigma = 0.8;

        std::vector<double> analytic(batch.values.size(), 0.0);
        regularizer_with_grad(batch.values, batch.y, batch.groups, 3, config,
                              sigma, analytic);
        const auto fd = oracles::finite_difference_gradient(
            [&](std::span<const double> v) {
              return regularizer(v, batch.y, batch.groups, 3, config, sigma);
            },
            batch.values, 1e-5);
        CHECK(oracles::max_relative_error(analytic, fd, 1e-4) < 1e-6);
      }
    }
  }
}
