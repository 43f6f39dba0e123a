#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "s4rl/rng.hpp"

using s4rl::SeededRng;

TEST_CASE("same seed gives an identical stream") {
  SeededRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("same (seed, label) gives identical child streams") {
  SeededRng root(7);
  SeededRng c1 = root.split("policy");
  SeededRng c2 = root.split("policy");
  for (int i = 0; i < 100; ++i) REQUIRE(c1.next_u64() == c2.next_u64());
}

TEST_CASE("different labels give different streams") {
  SeededRng root(7);
  SeededRng c1 = root.split("policy");
  SeededRng c2 = root.split("critic");
  int differing = 0;
  for (int i = 0; i < 8; ++i)
    if (c1.next_u64() != c2.next_u64()) ++differing;
  REQUIRE(differing == 8);
}

TEST_CASE("split does not perturb the parent stream") {
  SeededRng a(99), b(99);
  std::vector<std::uint64_t> plain, with_split;
  for (int i = 0; i < 16; ++i) plain.push_back(a.next_u64());
  SeededRng child = b.split("side");
  (void)child.next_u64();
  for (int i = 0; i < 16; ++i) with_split.push_back(b.next_u64());
  REQUIRE(plain == with_split);
}

TEST_CASE("state round-trip resumes the stream bit-exactly") {
  SeededRng a(5);
  for (int i = 0; i < 37; ++i) (void)a.next_u64();
  auto st = a.state();
  SeededRng b = SeededRng::from_state(st);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  REQUIRE(b.seed() == 5);
}

TEST_CASE("uniform01 stays in [0,1) and has the right mean") {
  SeededRng r(11);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // 4 standard errors of the U(0,1) mean.
  REQUIRE(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal has the right first two moments") {
  SeededRng r(13);
  const int n = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  REQUIRE(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("next_below is in range and roughly uniform") {
  SeededRng r(17);
  std::array<int, 10> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[r.next_below(10)]++;
  for (int c : counts) {
    // 4.5 sigma of Binomial(n, 1/10)
    REQUIRE(std::abs(c - n / 10) < 4.5 * std::sqrt(n * 0.1 * 0.9));
  }
}

TEST_CASE("beta(0.4, 0.4) lies in (0,1), symmetric, U-shaped") {
  SeededRng r(19);
  const int n = 50000;
  double sum = 0.0;
  int edge = 0;
  for (int i = 0; i < n; ++i) {
    double l = r.beta(0.4, 0.4);
    REQUIRE(l >= 0.0);
    REQUIRE(l <= 1.0);
    sum += l;
    if (l < 0.1 || l > 0.9) ++edge;
  }
  REQUIRE(sum / n == Catch::Approx(0.5).margin(0.01));
  // Beta(0.4,0.4) has P(X<0.1) + P(X>0.9) ~ 0.50; a uniform would give 0.2.
  REQUIRE(edge > n * 2 / 5);
}
