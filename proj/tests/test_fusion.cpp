#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "pds/error.hpp"
#include "pds/fusion.hpp"
#include "support.hpp"

using namespace pds;

namespace {

double normal_log_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<SourceGaussian> random_sources(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> mu(-10.0, 10.0), sd(0.3, 6.0);
  std::vector<SourceGaussian> out;
  for (int m = 0; m < n; ++m) out.push_back({m, {mu(rng), mu(rng)}, Vec2(sd(rng), sd(rng))});
  return out;
}

}  // namespace

TEST_CASE("temporal_weights: normalized and recency-weighted") {
  const std::vector<double> times{0, 5, 10, 15, 20};
  const auto w = temporal_weights(times, 20.0, {KernelKind::Rbf, 6.0});
  double sum = 0.0;
  for (double v : w) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK(std::is_sorted(w.begin(), w.end()));
}

TEST_CASE("temporal_fuse: single interval and identical intervals") {
  GaussianInterval g;
  g.mean = {3.0, -2.0};
  g.variance = Vec2(4.0, 9.0);
  const std::vector<GaussianInterval> one{g};
  const std::vector<double> w1{1.0};
  const SourceGaussian z1 = temporal_fuse(one, w1);
  CHECK(z1.mean == g.mean);
  CHECK(z1.sigma.x() == doctest::Approx(2.0));
  CHECK(z1.sigma.y() == doctest::Approx(3.0));

  const int n = 20;
  const std::vector<GaussianInterval> same(n, g);
  const std::vector<double> uniform(n, 1.0 / n);
  const SourceGaussian z = temporal_fuse(same, uniform);
  CHECK(z.mean.east == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(z.sigma.x() * z.sigma.x() == doctest::Approx(4.0 / n).epsilon(1e-12));
  CHECK(z.sigma.y() * z.sigma.y() == doctest::Approx(9.0 / n).epsilon(1e-12));

  CHECK_THROWS_AS(temporal_fuse(std::span<const GaussianInterval>(), std::span<const double>()), InsufficientData);
  CHECK_THROWS_AS(temporal_fuse(one, uniform), InvalidInput);
}

TEST_CASE("temporal_fuse: Monte-Carlo oracle") {
  const std::vector<double> times{0, 1, 2, 3, 4};
  const auto w = temporal_weights(times, 4.0, {KernelKind::Rbf, 6.0});
  std::vector<GaussianInterval> iv;
  const double means[5][2] = {{0.0, 1.0}, {1.5, -0.5}, {2.2, 0.3}, {2.9, 1.4}, {4.1, -1.0}};
  const double vars[5][2] = {{0.5, 2.0}, {1.0, 0.3}, {2.5, 1.1}, {0.8, 0.9}, {3.0, 0.4}};
  for (int i = 0; i < 5; ++i) {
    GaussianInterval g;
    g.t = times[i];
    g.mean = {means[i][0], means[i][1]};
    g.variance = Vec2(vars[i][0], vars[i][1]);
    iv.push_back(g);
  }
  const SourceGaussian z = temporal_fuse(iv, w);

  std::mt19937_64 rng(101);
  std::normal_distribution<double> n01(0.0, 1.0);
  const int draws = 1000000;
  double sum[2] = {0, 0}, sq[2] = {0, 0};
  for (int d = 0; d < draws; ++d) {
    for (int axis = 0; axis < 2; ++axis) {
      double s = 0.0;
      for (int i = 0; i < 5; ++i) s += w[i] * (means[i][axis] + std::sqrt(vars[i][axis]) * n01(rng));
      sum[axis] += s;
      sq[axis] += s * s;
    }
  }
  for (int axis = 0; axis < 2; ++axis) {
    const double mean = sum[axis] / draws;
    const double var = sq[axis] / draws - mean * mean;
    const double zvar = z.sigma(axis) * z.sigma(axis);
    CHECK(std::abs(mean - z.mean.vec()(axis)) < 4.0 * std::sqrt(zvar / draws));
    CHECK(std::abs(var - zvar) < 0.05 * zvar);
  }
}

TEST_CASE("categorical_fuse: symmetric pair and single source") {
  const std::vector<SourceGaussian> pair{{0, {0.0, 0.0}, Vec2(1.0, 1.0)}, {1, {2.0, 2.0}, Vec2(1.0, 1.0)}};
  const FusedGaussian f = categorical_fuse(pair);
  CHECK(f.mean.east == doctest::Approx(1.0));
  CHECK(f.sigma.x() == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(f.sources == 2);

  const std::vector<SourceGaussian> single{{0, {3.0, 4.0}, Vec2(2.0, 0.5)}};
  const FusedGaussian s = categorical_fuse(single);
  CHECK(s.mean == single[0].mean);
  CHECK(s.sigma == single[0].sigma);
  CHECK(s.log_scale.cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(categorical_fuse(std::span<const SourceGaussian>()), InvalidInput);
  const std::vector<SourceGaussian> flat{{0, {0, 0}, Vec2(0.0, 1.0)}};
  CHECK_THROWS_AS(categorical_fuse(flat), NumericalFailure);
}

TEST_CASE("categorical_fuse: density product on a grid") {
  std::mt19937_64 rng(7);
  const auto zs = random_sources(rng, 3);
  const FusedGaussian f = categorical_fuse(zs);
  for (int axis = 0; axis < 2; ++axis) {
    const double mu = f.mean.vec()(axis), sd = f.sigma(axis);
    for (int i = -400; i <= 400; ++i) {
      const double x = mu + sd * i / 100.0;
      double product = 0.0;  // log of the pointwise product
      for (const SourceGaussian& z : zs) product += normal_log_pdf(x, z.mean.vec()(axis), z.sigma(axis));
      const double model = f.log_scale(axis) + normal_log_pdf(x, mu, sd);
      REQUIRE(std::abs(std::exp(model - product) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("log_likelihood: mode, one-sigma drop and unfused product") {
  std::mt19937_64 rng(8);
  const auto zs = random_sources(rng, 3);
  const FusedGaussian f = categorical_fuse(zs);
  const double peak = log_likelihood(f, f.mean);
  double expected = 0.0;
  for (int axis = 0; axis < 2; ++axis)
    expected += f.log_scale(axis) - std::log(f.sigma(axis) * std::sqrt(2.0 * std::numbers::pi));
  CHECK(peak == doctest::Approx(expected).epsilon(1e-12));

  const EnuPoint off{f.mean.east + f.sigma.x(), f.mean.north};
  CHECK(peak - log_likelihood(f, off) == doctest::Approx(0.5).epsilon(1e-12));

  const EnuPoint x{1.3, -4.2};
  double direct = 0.0;
  for (const SourceGaussian& z : zs)
    for (int axis = 0; axis < 2; ++axis) direct += normal_log_pdf(x.vec()(axis), z.mean.vec()(axis), z.sigma(axis));
  CHECK(std::abs(log_likelihood(f, x) - direct) < 1e-9);
}

TEST_CASE("calibrate_threshold: quantile examples") {
  std::vector<double> ranks;
  for (int i = 1; i <= 100; ++i) ranks.push_back(i);
  std::shuffle(ranks.begin(), ranks.end(), std::mt19937_64(1));
  CHECK(calibrate_threshold(ranks, 0.05) == 5.0);
  CHECK(calibrate_threshold(ranks, 0.0) < 1.0);

  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> normal(10000);
  for (double& v : normal) v = n01(rng);
  CHECK(std::abs(calibrate_threshold(normal, 0.1) - (-1.2815515655446004)) < 0.05);

  CHECK_THROWS_AS(calibrate_threshold(std::span<const double>(), 0.1), CalibrationError);
}

TEST_CASE("property: calibrated threshold respects the cap on its own sample") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> size(1, 500), tie(0, 20);
  std::uniform_real_distribution<double> cap(0.0, 0.5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(size(rng));
    for (double& v : s) v = tie(rng);  // heavy ties
    const double pfp = cap(rng);
    const double g = calibrate_threshold(s, pfp);
    const auto flagged = std::count_if(s.begin(), s.end(), [&](double v) { return v <= g; });
    REQUIRE(static_cast<double>(flagged) <= pfp * static_cast<double>(s.size()) + 1e-9);
  }
}

TEST_CASE("pooled_alarm_rate: ratio and clustered standard error") {
  const std::vector<long> alarms{2, 0, 4}, decided{10, 10, 20};
  const AlarmRate r = pooled_alarm_rate(alarms, decided);
  CHECK(r.rate == doctest::Approx(0.15));
  // Cluster residuals 0.5, -1.5, 1.0; sqrt(3.5 * 3 / 2) / 40.
  CHECK(r.se == doctest::Approx(std::sqrt(5.25) / 40.0).epsilon(1e-12));

  const std::vector<long> one{3}, ten{10};
  CHECK(pooled_alarm_rate(one, ten).se == 0.0);
  CHECK_THROWS_AS(pooled_alarm_rate(alarms, ten), InvalidInput);
}

TEST_CASE("calibrate_closed_loop: open loop when feedback is harmless, tighter otherwise") {
  std::vector<double> s;
  for (int i = 1; i <= 200; ++i) s.push_back(i);
  auto fraction_at = [&](double g) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= g; })) / s.size();
  };
  const double open = calibrate_threshold(s, 0.1);
  CHECK(calibrate_closed_loop(s, 0.1, [&](double g) { return AlarmRate{fraction_at(g), 0.0}; }) == open);

  // Feedback doubling the alarm rate with a fixed standard error.
  const double tight = calibrate_closed_loop(s, 0.1, [&](double g) { return AlarmRate{2.0 * fraction_at(g), 0.01}; });
  CHECK(2.0 * fraction_at(tight) + 0.01 <= 0.1);
  CHECK(2.0 * fraction_at(tight + 1.0) + 0.01 > 0.1);
}

TEST_CASE("alternative_position: precision weighting") {
  CHECK_FALSE(alternative_position(std::span<const SourceGaussian>()).has_value());
  const std::vector<SourceGaussian> one{{1, {2.0, 3.0}, Vec2(1.0, 1.0)}};
  CHECK(*alternative_position(one) == one[0].mean);

  const std::vector<SourceGaussian> net{{1, {0.0, 0.0}, Vec2::Constant(std::sqrt(33.0))},
                                        {2, {6.0, 0.0}, Vec2::Constant(3.0)}};
  const EnuPoint alt = *alternative_position(net);
  CHECK(alt.east == doctest::Approx((6.0 / 9.0) / (1.0 / 33.0 + 1.0 / 9.0)).epsilon(1e-12));
  CHECK(alt.east == doctest::Approx(4.714).epsilon(1e-3));
  CHECK(alt.north == 0.0);

  std::vector<SourceGaussian> with_gnss = net;
  with_gnss.push_back({0, {10.0, -5.0}, Vec2::Constant(1e-3)});
  CHECK(distance(*alternative_position(with_gnss), {10.0, -5.0}) < 1e-3);
}

TEST_CASE("property: product fusion never widens the tightest source") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto zs = random_sources(rng, 1 + trial % 4);
    const FusedGaussian f = categorical_fuse(zs);
    for (int axis = 0; axis < 2; ++axis) {
      double tightest = std::numeric_limits<double>::infinity();
      for (const SourceGaussian& z : zs) tightest = std::min(tightest, z.sigma(axis));
      REQUIRE(f.sigma(axis) <= tightest * (1.0 + 1e-15));
    }
  }
}

TEST_CASE("property: log-likelihood ignores source order") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    auto zs = random_sources(rng, 3);
    const EnuPoint x{u(rng), u(rng)};
    const double a = log_likelihood(categorical_fuse(zs), x);
    std::shuffle(zs.begin(), zs.end(), rng);
    const double b = log_likelihood(categorical_fuse(zs), x);
    REQUIRE(std::abs(a - b) < 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("property: decisions are monotone in the deviation") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), gam(-40.0, 0.0);
  for (int trial = 0; trial < 500; ++trial) {
    const FusedGaussian f = categorical_fuse(random_sources(rng, 3));
    const double gamma = gam(rng);
    const double a = ang(rng);
    const Vec2 dir(std::cos(a), std::sin(a));
    bool flagged = false;
    for (int k = 0; k <= 200; ++k) {
      const EnuPoint x = f.mean + EnuPoint::from(0.1 * k * dir);
      const bool attack = log_likelihood(f, x) <= gamma;
      REQUIRE((attack || !flagged));
      flagged = attack;
    }
  }
}
