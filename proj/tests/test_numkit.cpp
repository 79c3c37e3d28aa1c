#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "hn3d/numkit.hpp"

using namespace hn3d;

TEST(L2Normalize, ScalesAxisVector) {
  const Vec v = l2_normalize(Vec{3.0, 0.0, 0.0});
  EXPECT_EQ(v, (Vec{1.0, 0.0, 0.0}));
}

TEST(L2Normalize, Diagonal) {
  const Vec v = l2_normalize(Vec{1.0, 1.0});
  EXPECT_NEAR(v[0], 0.70710678, 1e-8);
  EXPECT_NEAR(v[1], 0.70710678, 1e-8);
}

TEST(L2Normalize, RejectsZero) {
  try {
    l2_normalize(Vec{0.0, 0.0, 0.0});
    FAIL() << "expected ZeroVector";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
}

TEST(L2Normalize, UnitNormAndIdempotent) {
  RngStream rng(7, 1);
  for (int t = 0; t < 200; ++t) {
    Vec v(1 + rng.below(40));
    for (auto& x : v) x = rng.uniform(-5.0, 5.0);
    const Vec once = l2_normalize(v);
    EXPECT_NEAR(norm(once.span()), 1.0, 1e-12);
    const Vec twice = l2_normalize(once);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(twice[i], once[i], 1e-12);
    // direction: positive multiple of the input
    EXPECT_NEAR(dot(once.span(), v.span()), norm(v.span()), 1e-9 * norm(v.span()));
  }
}

TEST(LogSumExp, SingleZero) { EXPECT_EQ(logsumexp({0.0}), 0.0); }

TEST(LogSumExp, IdenticalPair) {
  for (double a : {-3.5, 0.0, 2.25, 700.0}) EXPECT_NEAR(logsumexp({a, a}), a + std::log(2.0), 1e-12);
}

TEST(LogSumExp, LargeInputsDoNotOverflow) {
  const double got = logsumexp({1000.0, 1000.0});
  ASSERT_TRUE(std::isfinite(got));
  // exact shift: 1000 + log(exp(0) + exp(0))
  EXPECT_NEAR(got, 1000.0 + std::log1p(1.0), 1e-12);
  EXPECT_TRUE(std::isfinite(logsumexp({1e4, -1e4, 9999.0})));
}

TEST(LogSumExp, Errors) {
  try {
    logsumexp(std::span<const Real>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  EXPECT_THROW(logsumexp({1.0, std::numeric_limits<double>::quiet_NaN()}), Error);
}

TEST(LogSumExp, Bounds) {
  RngStream rng(11, 0);
  for (int t = 0; t < 500; ++t) {
    std::vector<Real> xs(1 + rng.below(30));
    for (auto& x : xs) x = rng.uniform(-50.0, 50.0);
    const double mx = *std::max_element(xs.begin(), xs.end());
    const double lse = logsumexp(xs);
    EXPECT_GE(lse, mx);
    EXPECT_LE(lse, mx + std::log(static_cast<double>(xs.size())) + 1e-12);
  }
}

TEST(RngStream, Reproducible) {
  RngStream a(42, 9), b(42, 9);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  RngStream c(42, 9), d(42, 9);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(c.uniform(), d.uniform());
    ASSERT_EQ(c.normal(), d.normal());
    ASSERT_EQ(c.below(17), d.below(17));
  }
}

TEST(RngStream, StreamsDiffer) {
  RngStream a(42, 1), b(42, 2), c(43, 1);
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
}

TEST(RngStream, MatchesReferenceXoshiro) {
  // Textbook splitmix64 seeding and xoshiro256** step, written out longhand.
  const std::uint64_t seed = 0x1234, stream = 77;
  std::uint64_t sm = seed;
  auto splitmix = [](std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t st = splitmix(sm) ^ stream;
  std::uint64_t s[4];
  for (auto& x : s) x = splitmix(st);
  auto rot = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  RngStream rng(seed, stream);
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t expect = rot(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rot(s[3], 45);
    ASSERT_EQ(rng.next_u64(), expect);
  }
  EXPECT_EQ(stream_id(1, 2), stream_id(1, 2));
  EXPECT_NE(stream_id(1, 2), stream_id(2, 1));
}

TEST(RngStream, RangesAndMoments) {
  RngStream rng(5, 5);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(3), 3u);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(RngStream, ShuffleIsPermutation) {
  RngStream rng(3, 3);
  std::vector<int> xs(50);
  std::iota(xs.begin(), xs.end(), 0);
  rng.shuffle(xs);
  std::vector<int> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Matrix, RowAccessAndEquality) {
  Matrix m{{1.0, 2.0}, {3.0, 4.0}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 2u);
  EXPECT_EQ(m(1, 0), 3.0);
  EXPECT_EQ(m.row(1)[1], 4.0);
  Matrix n = m;
  EXPECT_EQ(m, n);
  n(0, 0) = 9.0;
  EXPECT_FALSE(m == n);
}
