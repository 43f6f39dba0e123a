#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "s4rl/augment.hpp"
#include "s4rl/rollout.hpp"

using namespace s4rl;

namespace {
EnvSpec pm_spec() { return PointMass2D().spec(); }
}  // namespace

TEST_CASE("identity returns the state bit-exactly") {
  SeededRng rng(1);
  Vec s = {0.5, -0.5, 0.125, 0.25};
  Vec out = augment(s, std::nullopt, Identity{}, pm_spec(), rng);
  REQUIRE(out == s);
}

TEST_CASE("kind invariants are enforced at construction") {
  REQUIRE_THROWS_AS(validate_kind(GaussianNoise{0.0}), ConfigError);
  REQUIRE_THROWS_AS(validate_kind(UniformNoise{-1e-3}), ConfigError);
  REQUIRE_THROWS_AS(validate_kind(AmplitudeScale{0.0, 1.0}), ConfigError);
  REQUIRE_THROWS_AS(validate_kind(AmplitudeScale{1.05, 1.0}), ConfigError);
  REQUIRE_THROWS_AS(validate_kind(StateSwitch{{}}), ConfigError);
  REQUIRE_THROWS_AS(validate_kind(StateSwitch{{{0, 1}, {1, 2}}}), ConfigError);
  REQUIRE_THROWS_AS(validate_kind(MixUp{0.0}), ConfigError);
}

TEST_CASE("gaussian noise with a tiny sigma stays near the state") {
  SeededRng rng(2);
  Vec s = {0.5, 0.5, 0.0, 0.0};
  Vec out = augment(s, std::nullopt, GaussianNoise{1e-12}, pm_spec(), rng);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(out[i] == Catch::Approx(s[i]).margin(1e-10));
}

TEST_CASE("mix-up endpoints recover the two states") {
  Vec s = {0.1, 0.2, 0.3, 0.4};
  Vec t = {-0.5, 0.6, -0.7, 0.8};
  REQUIRE(mixup_apply(s, t, 1.0) == s);
  REQUIRE(mixup_apply(s, t, 0.0) == t);
}

TEST_CASE("uniform noise at alpha=1e-3 moves each entry by at most 1e-3") {
  SeededRng rng(3);
  Vec s = {0.5, 0.5, 0.0, 0.0};
  for (int i = 0; i < 1000; ++i) {
    Vec out = augment(s, std::nullopt, UniformNoise{1e-3}, pm_spec(), rng);
    for (std::size_t d = 0; d < 4; ++d)
      REQUIRE(std::abs(out[d] - s[d]) <= 1e-3);
  }
}

TEST_CASE("amplitude scaling preserves signs") {
  SeededRng rng(4);
  Vec s = {0.5, 0.25, 0.125, 0.3};
  for (int i = 0; i < 500; ++i) {
    Vec out = augment(s, std::nullopt, AmplitudeScale{}, pm_spec(), rng);
    for (double v : out) REQUIRE(v > 0.0);
  }
  // Per-dimension variant keeps signs too.
  for (int i = 0; i < 500; ++i) {
    Vec out = augment(s, std::nullopt, AmplitudeScale{0.9, 1.1, true}, pm_spec(), rng);
    for (double v : out) REQUIRE(v > 0.0);
  }
}

TEST_CASE("shared-scalar amplitude scaling uses one factor for all entries") {
  SeededRng rng(5);
  Vec s = {0.5, 0.25, 0.125, 0.3};
  Vec out = augment(s, std::nullopt, AmplitudeScale{0.5, 1.5}, pm_spec(), rng);
  const double ratio = out[0] / s[0];
  for (std::size_t d = 1; d < 4; ++d)
    REQUIRE(out[d] / s[d] == Catch::Approx(ratio).epsilon(1e-12));
}

TEST_CASE("state-switch swaps exactly the sampled pair") {
  SeededRng rng(6);
  Vec s = {3, 4, 5, 6};
  // Bounds wide enough that clamping stays inactive.
  EnvSpec spec = pm_spec();
  spec.state_lo = {-10, -10, -10, -10};
  spec.state_hi = {10, 10, 10, 10};
  Vec out = augment(s, std::nullopt, StateSwitch{{{0, 1}}}, spec, rng);
  REQUIRE(out == Vec{4, 3, 5, 6});
}

TEST_CASE("state-switch applied twice with the same draw is the identity") {
  EnvSpec spec = pm_spec();
  StateSwitch kind{default_switch_groups("pointmass2d")};
  SeededRng rng(7);
  for (int i = 0; i < 100; ++i) {
    Vec s = {0.3, -0.7, 0.2, 0.9};
    SeededRng first = SeededRng::from_state(rng.state());
    Vec once = augment(s, std::nullopt, kind, spec, first);
    SeededRng second = SeededRng::from_state(rng.state());
    Vec twice = augment(once, std::nullopt, kind, spec, second);
    REQUIRE(twice == s);
    (void)rng.next_u64();
  }
}

TEST_CASE("dimension dropout zeroes exactly one coordinate") {
  SeededRng rng(8);
  EnvSpec spec;
  spec.state_dim = 3;
  spec.action_dim = 1;
  spec.state_lo = {-5, -5, -5};
  spec.state_hi = {5, 5, 5};
  spec.action_lo = {-1};
  spec.action_hi = {1};
  Vec s = {1, 2, 3};
  std::set<Vec> seen;
  for (int i = 0; i < 200; ++i) {
    Vec out = augment(s, std::nullopt, DimDropout{}, spec, rng);
    int zeros = 0;
    for (std::size_t d = 0; d < 3; ++d) {
      if (out[d] == 0.0)
        ++zeros;
      else
        REQUIRE(out[d] == s[d]);
    }
    REQUIRE(zeros == 1);
    seen.insert(out);
  }
  REQUIRE(seen == std::set<Vec>{{0, 2, 3}, {1, 0, 3}, {1, 2, 0}});
}

TEST_CASE("mix-up without a next state is an error") {
  SeededRng rng(9);
  Vec s = {0, 0, 0, 0};
  REQUIRE_THROWS_AS(augment(s, std::nullopt, MixUp{}, pm_spec(), rng),
                    ConfigError);
}

TEST_CASE("mix-up stays on the segment between the two states") {
  SeededRng rng(10);
  Vec s = {0.1, -0.4, 0.5, 0.0};
  Vec t = {0.7, 0.6, -0.5, 1.0};
  for (int i = 0; i < 1000; ++i) {
    Vec out = augment(s, std::span<const double>(t), MixUp{0.4}, pm_spec(), rng);
    for (std::size_t d = 0; d < 4; ++d) {
      REQUIRE(out[d] >= std::min(s[d], t[d]) - 1e-12);
      REQUIRE(out[d] <= std::max(s[d], t[d]) + 1e-12);
    }
  }
}

TEST_CASE("every kind is deterministic under a fixed rng state") {
  EnvSpec spec = pm_spec();
  Vec s = {0.5, -0.5, 0.25, -0.25};
  Vec t = {0.6, -0.4, 0.2, -0.2};
  std::vector<AugmentKind> kinds = {
      GaussianNoise{3e-3}, UniformNoise{1e-3}, AmplitudeScale{},
      DimDropout{}, StateSwitch{default_switch_groups("pointmass2d")},
      MixUp{0.4}, Identity{}};
  for (const auto& kind : kinds) {
    SeededRng a(11), b(11);
    Vec x = augment(s, std::span<const double>(t), kind, spec, a);
    Vec y = augment(s, std::span<const double>(t), kind, spec, b);
    REQUIRE(x == y);
  }
}

TEST_CASE("augment_batch: identity yields equal copies") {
  SeededRng rng(12);
  std::vector<Vec> states = {{0.1, 0.2, 0.3, 0.4}, {-0.1, -0.2, -0.3, -0.4}};
  auto out = augment_batch(states, {}, Identity{}, pm_spec(), rng, 2);
  REQUIRE(out.size() == 2);
  REQUIRE(out[0] == states);
  REQUIRE(out[1] == states);
}

TEST_CASE("augment_batch: two gaussian draws differ") {
  SeededRng rng(13);
  std::vector<Vec> states = {{0.5, 0.5, 0.0, 0.0}};
  auto out = augment_batch(states, {}, GaussianNoise{3e-3}, pm_spec(), rng, 2);
  REQUIRE(out[0][0] != out[1][0]);
}

TEST_CASE("empirical sigma of gaussian draws is close to 3e-3") {
  SeededRng rng(14);
  std::vector<Vec> states(1, Vec{0.5, 0.5, 0.0, 0.0});
  const int n = 10000;
  Vec sq(4, 0.0), mean(4, 0.0);
  for (int i = 0; i < n; ++i) {
    auto out = augment_batch(states, {}, GaussianNoise{3e-3}, pm_spec(), rng, 1);
    for (std::size_t d = 0; d < 4; ++d) {
      const double delta = out[0][0][d] - states[0][d];
      mean[d] += delta;
      sq[d] += delta * delta;
    }
  }
  for (std::size_t d = 0; d < 4; ++d) {
    const double sd = std::sqrt(sq[d] / n - (mean[d] / n) * (mean[d] / n));
    REQUIRE(sd >= 2.8e-3);
    REQUIRE(sd <= 3.2e-3);
  }
}

TEST_CASE("gaussian and uniform noise are zero-mean on interior states") {
  SeededRng rng(15);
  const int n = 100000;
  Vec s = {0.5, 0.5, 0.0, 0.0};
  for (const AugmentKind kind :
       {AugmentKind{GaussianNoise{3e-3}}, AugmentKind{UniformNoise{1e-3}}}) {
    Vec sum(4, 0.0);
    for (int i = 0; i < n; ++i) {
      Vec out = augment(s, std::nullopt, kind, pm_spec(), rng);
      for (std::size_t d = 0; d < 4; ++d) sum[d] += out[d] - s[d];
    }
    const double sigma =
        std::holds_alternative<GaussianNoise>(kind) ? 3e-3 : 1e-3 / std::sqrt(3.0);
    for (std::size_t d = 0; d < 4; ++d)
      REQUIRE(std::abs(sum[d] / n) < 4.0 * sigma / std::sqrt(double(n)));
  }
}

TEST_CASE("validate accepts in-bounds states and rejects epsilon violations") {
  EnvSpec spec = pm_spec();
  REQUIRE(validate(Vec{0, 0, 0, 0}, spec));
  REQUIRE(validate(Vec{2.0, -2.0, 2.0, -2.0}, spec));
  REQUIRE_FALSE(validate(Vec{2.0 + 1e-9, 0, 0, 0}, spec));
  REQUIRE_FALSE(validate(Vec{0, 0, 0, -2.0 - 1e-9}, spec));
}

TEST_CASE("augment outputs are always valid after clamping") {
  SeededRng rng(16);
  EnvSpec spec = pm_spec();
  std::vector<AugmentKind> kinds = {
      GaussianNoise{0.5}, UniformNoise{0.5}, AmplitudeScale{0.5, 2.0},
      DimDropout{}, StateSwitch{default_switch_groups("pointmass2d")},
      MixUp{0.4}, Identity{}};
  for (const auto& kind : kinds) {
    for (int i = 0; i < 1500; ++i) {
      Vec s(4), t(4);
      for (std::size_t d = 0; d < 4; ++d) {
        s[d] = rng.uniform(spec.state_lo[d], spec.state_hi[d]);
        t[d] = rng.uniform(spec.state_lo[d], spec.state_hi[d]);
      }
      Vec out = augment(s, std::span<const double>(t), kind, spec, rng);
      REQUIRE(validate(out, spec));
    }
  }
}

TEST_CASE("config strings parse and round-trip") {
  REQUIRE(std::get<GaussianNoise>(parse_kind("gauss:3e-3")).sigma == 3e-3);
  REQUIRE(std::get<UniformNoise>(parse_kind("uniform:1e-3")).alpha == 1e-3);
  auto amp = std::get<AmplitudeScale>(parse_kind("ampscale:0.98:1.02"));
  REQUIRE(amp.lo == 0.98);
  REQUIRE(amp.hi == 1.02);
  REQUIRE_FALSE(amp.per_dim);
  REQUIRE(std::get<AmplitudeScale>(parse_kind("ampscale:0.9:1.1:perdim")).per_dim);
  REQUIRE(std::holds_alternative<DimDropout>(parse_kind("dimdrop")));
  auto sw = std::get<StateSwitch>(parse_kind("switch", "pointmass2d"));
  REQUIRE(sw.groups == default_switch_groups("pointmass2d"));
  REQUIRE(std::get<MixUp>(parse_kind("mixup:0.4")).beta_alpha == 0.4);
  REQUIRE(std::holds_alternative<Identity>(parse_kind("identity")));
  REQUIRE_THROWS_AS(parse_kind("cutout"), ConfigError);
  REQUIRE_THROWS_AS(parse_kind("gauss:abc"), ConfigError);
  REQUIRE_THROWS_AS(parse_kind("switch"), ConfigError);  // no env context

  for (const char* text : {"gauss:0.003", "uniform:0.001", "ampscale:0.98:1.02",
                           "dimdrop", "mixup:0.4", "identity"}) {
    AugmentKind k = parse_kind(text);
    AugmentKind k2 = parse_kind(kind_to_string(k));
    REQUIRE(kind_to_string(k) == kind_to_string(k2));
  }
}
