#include <gtest/gtest.h>

#include <array>
#include <set>
#include <vector>

#include "sparclora/random.hpp"

using namespace sparclora;

TEST(RandomStream, SameSeedAndIdRepeat) {
  auto a = seeded_stream(42, 3);
  auto b = seeded_stream(42, 3);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(RandomStream, DistinctIdsDiverge) {
  std::set<std::vector<std::uint64_t>> prefixes;
  for (std::uint64_t id = 0; id < 512; ++id) {
    auto s = seeded_stream(42, id);
    std::vector<std::uint64_t> p;
    for (int i = 0; i < 16; ++i) p.push_back(s.next());
    prefixes.insert(p);
  }
  EXPECT_EQ(prefixes.size(), 512u);

  auto x = seeded_stream(1, 0);
  auto y = seeded_stream(2, 0);
  int same = 0;
  for (int i = 0; i < 16; ++i) same += x.next() == y.next();
  EXPECT_EQ(same, 0);
}

TEST(RandomStream, UniformChiSquare) {
  auto s = seeded_stream(2024, 11);
  constexpr int kBuckets = 20;
  constexpr int kN = 100000;
  std::array<int, kBuckets> counts{};
  for (int i = 0; i < kN; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++counts[static_cast<std::size_t>(u * kBuckets)];
  }
  const double expected = static_cast<double>(kN) / kBuckets;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 19 degrees of freedom; 43.8 is the 0.999 quantile.
  EXPECT_LT(chi2, 43.8);
}

TEST(RandomStream, BelowIsUnbiasedAndInRange) {
  auto s = seeded_stream(5, 5);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) {
    const auto v = s.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(RandomStream, UniformDuration) {
  auto s = seeded_stream(9, 1);
  EXPECT_EQ(s.uniform_duration(Duration::zero()), Duration::zero());
  EXPECT_EQ(s.uniform_duration(Duration{-5}), Duration::zero());
  for (int i = 0; i < 1000; ++i) {
    const auto d = s.uniform_duration(8s);
    ASSERT_GE(d, Duration::zero());
    ASSERT_LT(d, 8s);
  }
}
