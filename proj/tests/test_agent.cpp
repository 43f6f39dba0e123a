#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "s4rl/agent.hpp"
#include "s4rl/agent_io.hpp"
#include "s4rl/cql_baseline.hpp"
#include "s4rl/dataset.hpp"
#include "s4rl/rollout.hpp"

using namespace s4rl;

namespace {

AgentConfig small_config() {
  AgentConfig cfg;
  cfg.policy_hidden = {32, 32};
  cfg.critic_hidden = {32, 32};
  cfg.batch = 32;
  return cfg;
}

OfflineDataset small_dataset(std::uint64_t seed = 77, std::size_t episodes = 3) {
  auto env = make_env("pointmass2d");
  SeededRng rng(seed);
  return collect(*env, uniform_random_policy(env->spec()), episodes, rng,
                 SplitKind::Random, "uniform-random");
}

// Tiny spec/nets for finite-difference checks.
EnvSpec micro_spec() {
  EnvSpec sp;
  sp.state_dim = 1;
  sp.action_dim = 1;
  sp.state_lo = {-1.0};
  sp.state_hi = {1.0};
  sp.action_lo = {-1.0};
  sp.action_hi = {1.0};
  sp.gamma = 0.9;
  sp.max_episode_steps = 10;
  return sp;
}

BatchView micro_batch(const EnvSpec& sp, std::size_t n, SeededRng& rng) {
  BatchView b;
  for (std::size_t i = 0; i < n; ++i) {
    Vec s(sp.state_dim), a(sp.action_dim), s2(sp.state_dim);
    for (auto& v : s) v = rng.uniform(-0.9, 0.9);
    for (auto& v : a) v = rng.uniform(-0.9, 0.9);
    for (auto& v : s2) v = rng.uniform(-0.9, 0.9);
    b.s.push_back(s);
    b.a.push_back(a);
    b.s_next.push_back(s2);
    b.r.push_back(rng.uniform(0.0, 1.0));
    b.done.push_back(i % 4 == 0 ? 1 : 0);
  }
  return b;
}

}  // namespace

TEST_CASE("zero-weight policy net gives action tanh(bias)") {
  SeededRng rng(1);
  auto env = make_env("pointmass2d");
  GaussianPolicy pi(env->spec(), {8}, rng);
  auto& params = pi.net().params();
  std::fill(params.begin(), params.end(), 0.0);
  // Mean-head biases of the final layer.
  pi.net().layer_bias(1)[0] = 0.7;
  pi.net().layer_bias(1)[1] = -0.2;
  Vec a = pi.mean_action(Vec{0.3, 0.1, 0.0, 0.0});
  REQUIRE(a[0] == Catch::Approx(std::tanh(0.7)));
  REQUIRE(a[1] == Catch::Approx(std::tanh(-0.2)));
}

TEST_CASE("sampled actions stay in bounds with finite log-probs") {
  SeededRng rng(2);
  auto env = make_env("pointmass2d");
  GaussianPolicy pi(env->spec(), {16, 16}, rng);
  for (int i = 0; i < 2000; ++i) {
    Vec s = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
             rng.uniform(-2, 2)};
    PolicySample ps = pi.sample(s, rng);
    for (std::size_t d = 0; d < 2; ++d) {
      REQUIRE(ps.action[d] >= -1.0);
      REQUIRE(ps.action[d] <= 1.0);
    }
    REQUIRE(std::isfinite(ps.log_prob));
  }
}

TEST_CASE("a narrow policy puts more density at its mode than in the tail") {
  SeededRng rng(3);
  auto env = make_env("pointmass2d");
  GaussianPolicy pi(env->spec(), {8}, rng);
  Vec s = {0.1, 0.2, 0.0, 0.0};
  PolicySample at_mode = pi.sample_with_eps(s, Vec{0.0, 0.0});
  PolicySample in_tail = pi.sample_with_eps(s, Vec{4.0, -4.0});
  REQUIRE(at_mode.log_prob > in_tail.log_prob);
}

TEST_CASE("Monte-Carlo policy entropy matches the closed form within 2%") {
  SeededRng rng(4);
  auto env = make_env("pointmass2d");
  GaussianPolicy pi(env->spec(), {16}, rng);
  Vec s = {0.4, -0.3, 0.1, 0.0};
  const int n = 10000;
  double mc_entropy = 0.0;
  double jac_term = 0.0;
  Vec log_std;
  for (int i = 0; i < n; ++i) {
    PolicySample ps = pi.sample(s, rng);
    mc_entropy -= ps.log_prob / n;
    for (std::size_t d = 0; d < 2; ++d) {
      const double t = std::tanh(ps.pre_tanh[d]);
      jac_term += std::log(1.0 * (1.0 - t * t)) / n;
    }
    log_std = ps.log_std;
  }
  double gauss_entropy = 0.0;
  for (std::size_t d = 0; d < 2; ++d)
    gauss_entropy +=
        log_std[d] + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  const double closed = gauss_entropy + jac_term;
  REQUIRE(mc_entropy == Catch::Approx(closed).epsilon(0.02));
}

TEST_CASE("identity targets with count 1 match the baseline bit-for-bit") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.s4rl.kind = Identity{};
  cfg.s4rl.count = 1;
  SeededRng ia(10), ib(10);
  S4rlAgent s4rl_agent(env->spec(), cfg, ia);
  CqlBaselineAgent baseline(env->spec(), cfg, ib);

  SeededRng batch_rng(11);
  BatchView batch = BatchView::from(small_dataset(), sample_indices(small_dataset(), 16, batch_rng));
  SeededRng ra(12), rb(12);
  Vec ya = s4rl_agent.bellman_targets(batch, ra);
  Vec yb = baseline.bellman_targets(batch, rb);
  REQUIRE(ya == yb);
  // Both consumed the same stream.
  REQUIRE(ra.state() == rb.state());
}

TEST_CASE("averaging two forced-identical augmentations equals count 1") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg1 = small_config();
  cfg1.s4rl.kind = Identity{};
  cfg1.s4rl.count = 1;
  AgentConfig cfg2 = cfg1;
  cfg2.s4rl.count = 2;
  SeededRng ia(20), ib(20);
  S4rlAgent a1(env->spec(), cfg1, ia);
  S4rlAgent a2(env->spec(), cfg2, ib);

  OfflineDataset ds = small_dataset();
  SeededRng batch_rng(21);
  BatchView batch = BatchView::from(ds, sample_indices(ds, 16, batch_rng));
  SeededRng ra(22), rb(22);
  REQUIRE(a1.bellman_targets(batch, ra) == a2.bellman_targets(batch, rb));
}

TEST_CASE("terminal transitions ignore the critics entirely") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  SeededRng init(30);
  S4rlAgent agent(env->spec(), cfg, init);
  BatchView batch;
  batch.s.push_back(Vec{0.1, 0.1, 0.0, 0.0});
  batch.a.push_back(Vec{0.5, 0.5});
  batch.s_next.push_back(Vec{0.2, 0.2, 0.0, 0.0});
  batch.r.push_back(0.0);
  batch.done.push_back(1);
  SeededRng rng(31);
  Vec y = agent.bellman_targets(batch, rng);
  REQUIRE(y[0] == 0.0);
}

TEST_CASE("with the regularizer off the critic loss is the plain Bellman error") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.cql.weight = 0.0;
  cfg.s4rl.kind = Identity{};
  cfg.s4rl.count = 1;
  SeededRng init(40);
  S4rlAgent agent(env->spec(), cfg, init);
  OfflineDataset ds = small_dataset();
  SeededRng batch_rng(41);
  BatchView batch = BatchView::from(ds, sample_indices(ds, 16, batch_rng));
  SeededRng r1(42), r2(42);
  Vec y = agent.bellman_targets(batch, r1);
  auto out = agent.critic_loss_and_grad(batch, y, r1, nullptr, nullptr);

  // Straight-line recomputation.
  Vec concat;
  double want = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double d1 =
        q_eval(agent.core().critics.q1, batch.s[b], batch.a[b], concat) - y[b];
    const double d2 =
        q_eval(agent.core().critics.q2, batch.s[b], batch.a[b], concat) - y[b];
    want += (d1 * d1 + d2 * d2) / (2.0 * batch.size());
  }
  REQUIRE(out.loss == Catch::Approx(want).epsilon(1e-12));
  REQUIRE(out.cql == 0.0);
}

TEST_CASE("exhaustive proposals reduce the estimator to the exact log-sum-exp") {
  CqlProposalSet props;
  props.actions = {Vec{-0.5}, Vec{0.5}};
  props.log_weights = {0.0, 0.0};
  props.n_policy = 1;
  const double q1 = 1.37, q2 = -2.11;
  const double got = cql_logsumexp(Vec{q1, q2}, props);
  const double exact = std::log(std::exp(q1) + std::exp(q2));
  REQUIRE(std::abs(got - exact) < 1e-10);

  // Large values exercise the stable path.
  const double big = cql_logsumexp(Vec{800.0, 802.0}, props);
  REQUIRE(big == Catch::Approx(802.0 + std::log1p(std::exp(-2.0))).epsilon(1e-12));
}

TEST_CASE("critic loss decreases by half over repeated updates on a fixed batch") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.lr = 1e-3;
  cfg.cql.weight = 0.0;
  cfg.s4rl.kind = Identity{};
  cfg.s4rl.count = 1;
  SeededRng init(50);
  S4rlAgent agent(env->spec(), cfg, init);
  OfflineDataset ds = small_dataset();
  SeededRng batch_rng(51);
  BatchView batch = BatchView::from(ds, sample_indices(ds, 32, batch_rng));
  SeededRng rng(52);
  const Vec y = agent.bellman_targets(batch, rng);

  std::vector<double> g1(agent.core().critics.q1.param_count());
  std::vector<double> g2(agent.core().critics.q2.param_count());
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 100; ++it) {
    std::fill(g1.begin(), g1.end(), 0.0);
    std::fill(g2.begin(), g2.end(), 0.0);
    auto out = agent.critic_loss_and_grad(batch, y, rng, &g1, &g2);
    if (it == 0) first = out.loss;
    last = out.loss;
    adam_step(agent.core().critics.q1, g1, agent.core().opt_q1);
    adam_step(agent.core().critics.q2, g2, agent.core().opt_q2);
  }
  REQUIRE(last < 0.5 * first);
}

TEST_CASE("constant critic and zero entropy give exactly zero policy gradient") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  SeededRng init(60);
  S4rlAgent agent(env->spec(), cfg, init);
  // Constant critics: zero every parameter.
  std::fill(agent.core().critics.q1.params().begin(),
            agent.core().critics.q1.params().end(), 0.0);
  std::fill(agent.core().critics.q2.params().begin(),
            agent.core().critics.q2.params().end(), 0.0);
  agent.core().entropy.value = 0.0;

  std::vector<Vec> states = {{0.1, 0.2, 0.0, 0.0}, {-0.4, 0.3, 0.1, 0.0}};
  std::vector<double> gp(agent.core().policy.net().param_count(), 0.0);
  SeededRng rng(61);
  (void)policy_loss_and_grad(agent.core(), states, rng, &gp);
  for (double g : gp) REQUIRE(g == 0.0);
}

TEST_CASE("policy loss equals its recomputation from logged quantities") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  SeededRng init(70);
  S4rlAgent agent(env->spec(), cfg, init);
  std::vector<Vec> states;
  SeededRng srng(71);
  for (int i = 0; i < 16; ++i)
    states.push_back(Vec{srng.uniform(-1, 1), srng.uniform(-1, 1),
                         srng.uniform(-1, 1), srng.uniform(-1, 1)});
  SeededRng rng(72);
  PolicyLossOut out = policy_loss_and_grad(agent.core(), states, rng, nullptr);
  const double alpha = agent.core().alpha();
  REQUIRE(out.loss ==
          Catch::Approx(alpha * out.logp_mean - out.qmin_mean).margin(1e-12));
}

TEST_CASE("a large entropy coefficient widens the policy over training") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.entropy_coef = 5.0;
  cfg.cql.weight = 0.0;
  SeededRng init(80);
  S4rlAgent agent(env->spec(), cfg, init);
  // Start from a deliberately narrow policy.
  {
    DenseNet& net = agent.core().policy.net();
    auto bias = net.layer_bias(net.layer_count() - 1);
    for (std::size_t d = 2; d < 4; ++d) bias[d] = -3.0;
  }
  OfflineDataset ds = small_dataset();
  SeededRng rng(81);

  auto mean_log_std = [&] {
    SeededRng probe(123);
    double acc = 0.0;
    for (int i = 0; i < 20; ++i) {
      Vec s = {probe.uniform(-1, 1), probe.uniform(-1, 1), 0.0, 0.0};
      PolicySample ps = agent.core().policy.sample(s, probe);
      for (double v : ps.log_std) acc += v;
    }
    return acc / (20 * 2);
  };

  const double before = mean_log_std();
  Vec quarters;
  for (int q = 0; q < 4; ++q) {
    for (int i = 0; i < 50; ++i) (void)agent.train_step(ds, rng);
    quarters.push_back(mean_log_std());
  }
  REQUIRE(quarters[3] > before + 0.3);
  for (int q = 1; q < 4; ++q) REQUIRE(quarters[q] > quarters[q - 1] - 0.05);
}

TEST_CASE("tau = 1 copies the critics into the targets") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.tau_polyak = 1.0;
  SeededRng init(90);
  S4rlAgent agent(env->spec(), cfg, init);
  OfflineDataset ds = small_dataset();
  SeededRng rng(91);
  (void)agent.train_step(ds, rng);
  REQUIRE(agent.core().critics.target1.params() ==
          agent.core().critics.q1.params());
  REQUIRE(agent.core().critics.target2.params() ==
          agent.core().critics.q2.params());
}

TEST_CASE("tau = 0 never moves the targets") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.tau_polyak = 0.0;
  SeededRng init(100);
  S4rlAgent agent(env->spec(), cfg, init);
  const Vec t1 = agent.core().critics.target1.params();
  OfflineDataset ds = small_dataset();
  SeededRng rng(101);
  for (int i = 0; i < 5; ++i) (void)agent.train_step(ds, rng);
  REQUIRE(agent.core().critics.target1.params() == t1);
  REQUIRE(agent.core().critics.q1.params() != t1);
}

TEST_CASE("targets blend exactly as tau online plus (1-tau) previous") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.tau_polyak = 0.0;
  AgentConfig cfg2 = cfg;
  cfg2.tau_polyak = 0.3;
  SeededRng ia(110), ib(110);
  S4rlAgent frozen(env->spec(), cfg, ia);
  S4rlAgent blended(env->spec(), cfg2, ib);
  const Vec target_before = blended.core().critics.target1.params();

  OfflineDataset ds = small_dataset();
  SeededRng ra(111), rb(111);
  (void)frozen.train_step(ds, ra);
  (void)blended.train_step(ds, rb);
  // Online updates agree (the first step sees identical target nets).
  REQUIRE(frozen.core().critics.q1.params() ==
          blended.core().critics.q1.params());
  const auto& online = blended.core().critics.q1.params();
  const auto& target = blended.core().critics.target1.params();
  for (std::size_t i = 0; i < online.size(); ++i)
    REQUIRE(target[i] == 0.3 * online[i] + (1.0 - 0.3) * target_before[i]);
}

TEST_CASE("identical seeds give identical diagnostic streams") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  SeededRng ia(120), ib(120);
  S4rlAgent a(env->spec(), cfg, ia);
  S4rlAgent b(env->spec(), cfg, ib);
  OfflineDataset ds = small_dataset();
  SeededRng ra(121), rb(121);
  for (int i = 0; i < 50; ++i) {
    StepDiagnostics da = a.train_step(ds, ra);
    StepDiagnostics db = b.train_step(ds, rb);
    REQUIRE(da.critic_loss == db.critic_loss);
    REQUIRE(da.policy_loss == db.policy_loss);
    REQUIRE(da.conservative_gap == db.conservative_gap);
    REQUIRE(da.target_mean == db.target_mean);
  }
  REQUIRE(a.core().policy.net().params() == b.core().policy.net().params());
}

TEST_CASE("identity+count-1 agent walks in lockstep with the baseline") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.s4rl.kind = Identity{};
  cfg.s4rl.count = 1;
  SeededRng ia(130), ib(130);
  S4rlAgent s4rl_agent(env->spec(), cfg, ia);
  CqlBaselineAgent baseline(env->spec(), cfg, ib);
  REQUIRE(s4rl_agent.core().policy.net().params() ==
          baseline.core().policy.net().params());
  OfflineDataset ds = small_dataset();
  SeededRng ra(131), rb(131);
  for (int i = 0; i < 200; ++i) {
    StepDiagnostics da = s4rl_agent.train_step(ds, ra);
    StepDiagnostics db = baseline.train_step(ds, rb);
    REQUIRE(std::abs(da.critic_loss - db.critic_loss) <= 1e-12);
    REQUIRE(std::abs(da.bellman_term - db.bellman_term) <= 1e-12);
    REQUIRE(std::abs(da.cql_term - db.cql_term) <= 1e-12);
    REQUIRE(std::abs(da.policy_loss - db.policy_loss) <= 1e-12);
    REQUIRE(std::abs(da.conservative_gap - db.conservative_gap) <= 1e-12);
  }
  REQUIRE(s4rl_agent.core().policy.net().params() ==
          baseline.core().policy.net().params());
  REQUIRE(s4rl_agent.core().critics.q1.params() ==
          baseline.core().critics.q1.params());
}

TEST_CASE("averaged prediction equals the mean of individual evaluations") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.s4rl.kind = GaussianNoise{3e-3};
  cfg.s4rl.count = 2;
  SeededRng init(140);
  S4rlAgent agent(env->spec(), cfg, init);
  OfflineDataset ds = small_dataset();
  SeededRng batch_rng(141);
  BatchView batch = BatchView::from(ds, sample_indices(ds, 8, batch_rng));
  SeededRng rng(142);
  const Vec y = agent.bellman_targets(batch, rng);

  SeededRng replay = SeededRng::from_state(rng.state());
  CriticDebug debug;
  (void)agent.critic_loss_and_grad(batch, y, rng, nullptr, nullptr, &debug);

  // Reproduce the augmented states with the replayed stream and average the
  // critic values by hand.
  auto augmented = augment_batch(batch.s, batch.s_next, cfg.s4rl.kind,
                                 env->spec(), replay, 2);
  Vec concat;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double m1 =
        (q_eval(agent.core().critics.q1, augmented[0][b], batch.a[b], concat) +
         q_eval(agent.core().critics.q1, augmented[1][b], batch.a[b], concat)) /
        2.0;
    REQUIRE(debug.preds[0][b] == Catch::Approx(m1).epsilon(1e-14));
  }
}

TEST_CASE("conservative regularization lowers sampled-action values") {
  // Needs data whose actions are concentrated; on uniform-random data the
  // push-down over sampled actions and the push-up at the (equally uniform)
  // dataset actions cancel in distribution.
  auto env = make_env("pointmass2d");
  SeededRng drng(77);
  OfflineDataset ds = collect(*env, scripted_expert_policy(*env), 5, drng,
                              SplitKind::Custom, "scripted-expert");
  double mean_with = 0.0, mean_without = 0.0;
  int gap_positive = 0;
  for (std::uint64_t seed : {500, 501, 502, 503, 504}) {
    AgentConfig on = small_config();
    on.cql.weight = 1.0;
    on.lr = 3e-3;
    AgentConfig off = on;
    off.cql.weight = 0.0;
    SeededRng ia(seed), ib(seed);
    S4rlAgent with_cql(env->spec(), on, ia);
    S4rlAgent without_cql(env->spec(), off, ib);
    SeededRng ra(seed + 1000), rb(seed + 1000);
    StepDiagnostics last{};
    for (int i = 0; i < 100; ++i) {
      last = with_cql.critic_only_step(ds, ra);
      (void)without_cql.critic_only_step(ds, rb);
    }
    if (last.conservative_gap > 0.0) ++gap_positive;
    // Mean critic value at uniformly sampled actions.
    auto mean_q = [&](S4rlAgent& agent) {
      SeededRng probe(9999);
      Vec concat;
      double acc = 0.0;
      const int n = 200;
      for (int i = 0; i < n; ++i) {
        const Transition& t =
            ds.transitions[probe.next_below(ds.size())];
        Vec a = {probe.uniform(-1, 1), probe.uniform(-1, 1)};
        acc += q_eval(agent.core().critics.q1, t.s, a, concat);
        acc += q_eval(agent.core().critics.q2, t.s, a, concat);
      }
      return acc / (2 * n);
    };
    mean_with += mean_q(with_cql) / 5.0;
    mean_without += mean_q(without_cql) / 5.0;
  }
  REQUIRE(mean_with < mean_without);
  REQUIRE(gap_positive >= 4);
}

TEST_CASE("critic loss gradients match finite differences on a micro net") {
  const EnvSpec sp = micro_spec();
  AgentConfig cfg;
  cfg.policy_hidden = {2};
  cfg.critic_hidden = {2};
  cfg.batch = 4;
  cfg.cql.n_samples = 4;
  cfg.s4rl.kind = GaussianNoise{3e-3};
  cfg.s4rl.count = 2;
  SeededRng init(150);
  S4rlAgent agent(sp, cfg, init);
  SeededRng brng(151);
  BatchView batch = micro_batch(sp, 4, brng);
  SeededRng trng(152);
  const Vec y = agent.bellman_targets(batch, trng);
  const auto frozen = trng.state();

  std::vector<double> g1(agent.core().critics.q1.param_count(), 0.0);
  std::vector<double> g2(agent.core().critics.q2.param_count(), 0.0);
  SeededRng pass = SeededRng::from_state(frozen);
  (void)agent.critic_loss_and_grad(batch, y, pass, &g1, &g2);

  auto loss_at = [&]() {
    SeededRng r = SeededRng::from_state(frozen);
    return agent.critic_loss_and_grad(batch, y, r, nullptr, nullptr).loss;
  };
  const double h = 1e-5;
  for (int which = 0; which < 2; ++which) {
    DenseNet& net =
        which == 0 ? agent.core().critics.q1 : agent.core().critics.q2;
    const std::vector<double>& g = which == 0 ? g1 : g2;
    for (std::size_t i = 0; i < net.param_count(); ++i) {
      const double orig = net.params()[i];
      net.params()[i] = orig + h;
      const double up = loss_at();
      net.params()[i] = orig - h;
      const double dn = loss_at();
      net.params()[i] = orig;
      const double fd = (up - dn) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-3});
      REQUIRE(std::abs(fd - g[i]) <= std::max(1e-4 * denom, 1e-7));
    }
  }
}

TEST_CASE("policy loss gradients match finite differences on a micro net") {
  const EnvSpec sp = micro_spec();
  AgentConfig cfg;
  cfg.policy_hidden = {2};
  cfg.critic_hidden = {2};
  SeededRng init(160);
  S4rlAgent agent(sp, cfg, init);
  std::vector<Vec> states = {{0.3}, {-0.6}, {0.1}, {0.9}};
  SeededRng rng(161);
  const auto frozen = rng.state();

  std::vector<double> gp(agent.core().policy.net().param_count(), 0.0);
  SeededRng pass = SeededRng::from_state(frozen);
  (void)policy_loss_and_grad(agent.core(), states, pass, &gp);

  auto loss_at = [&]() {
    SeededRng r = SeededRng::from_state(frozen);
    return policy_loss_and_grad(agent.core(), states, r, nullptr).loss;
  };
  const double h = 1e-5;
  DenseNet& net = agent.core().policy.net();
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    const double orig = net.params()[i];
    net.params()[i] = orig + h;
    const double up = loss_at();
    net.params()[i] = orig - h;
    const double dn = loss_at();
    net.params()[i] = orig;
    const double fd = (up - dn) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(gp[i]), 1e-3});
    REQUIRE(std::abs(fd - gp[i]) <= std::max(1e-4 * denom, 1e-7));
  }
}

TEST_CASE("non-finite parameters halt training with step and phase") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  SeededRng init(170);
  S4rlAgent agent(env->spec(), cfg, init);
  agent.core().policy.net().params()[3] = std::nan("");
  OfflineDataset ds = small_dataset();
  SeededRng rng(171);
  try {
    (void)agent.train_step(ds, rng);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("train step 0") != std::string::npos);
    REQUIRE(msg.find("bellman targets") != std::string::npos);
  }
}

TEST_CASE("agent checkpoint resumes training bit-identically") {
  auto env = make_env("pointmass2d");
  AgentConfig cfg = small_config();
  cfg.s4rl.kind = GaussianNoise{3e-3};
  SeededRng init(180);
  S4rlAgent agent(env->spec(), cfg, init);
  OfflineDataset ds = small_dataset();
  SeededRng rng(181);
  for (int i = 0; i < 20; ++i) (void)agent.train_step(ds, rng);

  const auto path =
      std::filesystem::temp_directory_path() / "s4rl_agent_ckpt.bin";
  save_agent(agent, path, "s4rl");
  AgentCheckpoint ck = load_agent_checkpoint(path);
  REQUIRE(ck.agent_type == "s4rl");
  S4rlAgent restored = ck.restore<S4rlAgent>();
  REQUIRE(restored.core().policy.net().params() ==
          agent.core().policy.net().params());
  REQUIRE(restored.core().step == agent.core().step);

  SeededRng ra = SeededRng::from_state(rng.state());
  SeededRng rb = SeededRng::from_state(rng.state());
  for (int i = 0; i < 20; ++i) {
    StepDiagnostics da = agent.train_step(ds, ra);
    StepDiagnostics db = restored.train_step(ds, rb);
    REQUIRE(da.critic_loss == db.critic_loss);
    REQUIRE(da.policy_loss == db.policy_loss);
  }
  std::filesystem::remove(path);
}
