#include "orderlab/rng.hpp"

#include "doctest.h"

#include <cmath>

using namespace orderlab;

TEST_CASE("words are pure functions of (seed, stream, index)") {
  CHECK(rng::word(7, rng::stream::noise, 42) ==
        rng::word(7, rng::stream::noise, 42));
  CHECK(rng::word(7, rng::stream::noise, 42) !=
        rng::word(8, rng::stream::noise, 42));
  CHECK(rng::word(7, rng::stream::noise, 42) !=
        rng::word(7, rng::stream::coin, 42));
  CHECK(rng::word(7, rng::stream::noise, 42) !=
        rng::word(7, rng::stream::noise, 43));
}

TEST_CASE("uniform variates live in [0, 1) and (0, 1]") {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double u = rng::uniform01(1, rng::stream::noise, i);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng::uniform_open(1, rng::stream::noise, i);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("distinct streams are empirically uncorrelated") {
  const std::size_t n = 1'000'000;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double x = rng::uniform01(5, rng::stream::noise, i);
    const double y = rng::uniform01(5, rng::stream::batch_order, i);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double mx = sx / n, my = sy / n;
  const double corr = (sxy / n - mx * my) /
                      std::sqrt((sxx / n - mx * mx) * (syy / n - my * my));
  CHECK(std::abs(corr) < 0.01);
}

TEST_CASE("gaussian transform has the right first two moments") {
  const std::size_t n = 1'000'000;
  double sum = 0, sumsq = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double z = rng::gaussian(9, rng::stream::noise, i);
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("coin flips are roughly balanced") {
  long heads = 0;
  const long n = 100000;
  for (long i = 0; i < n; ++i)
    if (rng::flip(3, rng::stream::coin, static_cast<std::uint64_t>(i)))
      ++heads;
  CHECK(std::abs(static_cast<double>(heads) / n - 0.5) < 0.01);
}
