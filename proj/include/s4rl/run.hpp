#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <variant>

#include "s4rl/config.hpp"
#include "s4rl/dataset_io.hpp"
#include "s4rl/splits.hpp"

namespace s4rl {

inline constexpr char kRunMagic[8] = {'S', '4', 'R', 'L', 'R', 'U', 'N', '1'};

struct EvalPoint {
  std::uint64_t step = 0;
  double raw_return = 0.0;
  double norm_score = 0.0;
  double critic_loss = 0.0;
  double bellman_term = 0.0;
  double cql_term = 0.0;
  double policy_loss = 0.0;
  double conservative_gap = 0.0;
  double q_data_mean = 0.0;
  double alpha = 0.0;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  std::vector<EvalPoint> points;
  double wall_seconds = 0.0;

  double final_score() const {
    require(!points.empty(), "run produced no evaluation points");
    return points.back().norm_score;
  }
};

inline constexpr const char* kMetricsHeader =
    "step,raw_return,norm_score,critic_loss,bellman_term,cql_term,"
    "policy_loss,conservative_gap,q_data_mean,alpha";

inline std::string format_eval_point(const EvalPoint& p) {
  std::string row = std::to_string(p.step);
  for (double v : {p.raw_return, p.norm_score, p.critic_loss, p.bellman_term,
                   p.cql_term, p.policy_loss, p.conservative_gap,
                   p.q_data_mean, p.alpha})
    row += "," + format_double(v);
  return row;
}

inline EvalPoint parse_eval_point(const std::string& row) {
  std::stringstream ss(row);
  std::string tok;
  std::vector<double> vals;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  require(vals.size() == 10, "malformed metrics row: " + row);
  EvalPoint p;
  p.step = static_cast<std::uint64_t>(vals[0]);
  p.raw_return = vals[1];
  p.norm_score = vals[2];
  p.critic_loss = vals[3];
  p.bellman_term = vals[4];
  p.cql_term = vals[5];
  p.policy_loss = vals[6];
  p.conservative_gap = vals[7];
  p.q_data_mean = vals[8];
  p.alpha = vals[9];
  return p;
}

inline std::vector<EvalPoint> read_metrics_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open metrics file '" + p.string() + "'");
  std::vector<EvalPoint> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(parse_eval_point(line));
  return out;
}

// Builds (or loads from cache) the dataset a config describes. Recipes are
// cached under <dir>/datasets keyed by everything that determines content.
inline OfflineDataset build_dataset(const ExperimentConfig& cfg,
                                    const std::filesystem::path& cache_dir) {
  if (!cfg.dataset_path.empty()) {
    OfflineDataset ds = load(cfg.dataset_path);
    require(ds.env_name == cfg.env,
            "dataset '" + cfg.dataset_path + "' is for environment '" +
                ds.env_name + "', config says '" + cfg.env + "'");
    return ds;
  }
  std::filesystem::create_directories(cache_dir);
  auto env = make_env(cfg.env);
  const std::string base_name = cfg.env + "_" + split_name(cfg.split) + "_s" +
                                std::to_string(cfg.dataset_seed) + "_e" +
                                std::to_string(cfg.episodes);
  const auto base_path = cache_dir / (base_name + ".s4rlds");
  OfflineDataset ds;
  if (std::filesystem::exists(base_path)) {
    ds = load(base_path);
  } else {
    SplitOptions opt;
    opt.episodes = cfg.episodes;
    opt.sac = default_sac_options(cfg.env);
    if (cfg.sac_budget > 0) opt.sac.budget_steps = cfg.sac_budget;
    SeededRng rng(cfg.dataset_seed);
    ds = make_split(*env, cfg.split, rng, opt);
    save(ds, base_path);
  }
  if (cfg.fraction < 1.0) {
    const std::uint64_t fseed =
        cfg.fraction_seed != 0
            ? cfg.fraction_seed
            : cfg.dataset_seed ^ fnv1a64("fraction/" + format_double(cfg.fraction));
    const auto sub_path =
        cache_dir / (base_name + "_f" + format_double(cfg.fraction) + "_fs" +
                     std::to_string(fseed) +
                     (cfg.per_episode_fraction ? "_byep" : "") + ".s4rlds");
    if (std::filesystem::exists(sub_path)) return load(sub_path);
    SeededRng frng(fseed);
    OfflineDataset sub = subsample(ds, cfg.fraction, frng, cfg.per_episode_fraction);
    save(sub, sub_path);
    return sub;
  }
  return ds;
}

namespace detail {

template <typename Agent>
struct RunState {
  Agent agent;
  SeededRng train_rng;
};

// Deterministic evaluation: fixed-derived rng per (seed, step), mean action.
template <typename Agent>
double evaluate_policy(const Agent& agent, const EnvBase& env,
                       std::uint64_t seed, std::uint64_t step,
                       std::size_t episodes) {
  SeededRng eval_rng =
      SeededRng(seed).split("eval/" + std::to_string(step));
  const GaussianPolicy& pi = agent.core().policy;
  PolicyFn fn = [&pi](const EnvState& s, SeededRng&) {
    return pi.mean_action(s.x);
  };
  return mean_return(env, fn, episodes, eval_rng);
}

}  // namespace detail

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path metrics() const { return dir / "metrics.csv"; }
  std::filesystem::path checkpoint() const { return dir / "checkpoint.bin"; }
  std::filesystem::path summary() const { return dir / "run.json"; }
};

inline RunPaths run_paths(const ExperimentConfig& cfg, std::uint64_t seed) {
  return {std::filesystem::path(cfg.out) / ("seed" + std::to_string(seed))};
}

// Trains one seed, evaluating every eval_interval steps (plus step 0 and the
// final step) and persisting incrementally: a metrics row and a checkpoint
// (agent + training rng) at every evaluation boundary. A fresh call resumes
// from the last boundary if a compatible checkpoint is present; stop_after
// halts early at a boundary, leaving a resumable directory.
template <typename Agent>
RunMetrics run_seed_impl(const ExperimentConfig& cfg, const EnvBase& env,
                         const OfflineDataset& ds, const ReferenceScores& refs,
                         std::uint64_t seed,
                         std::uint64_t stop_after = ~0ull) {
  const auto t_start = std::chrono::steady_clock::now();
  const RunPaths paths = run_paths(cfg, seed);
  std::filesystem::create_directories(paths.dir);
  const std::string fingerprint = cfg.fingerprint() + "/seed" + std::to_string(seed);

  RunMetrics metrics;
  metrics.seed = seed;

  SeededRng root(seed);
  SeededRng init_rng = root.split("init");
  std::optional<detail::RunState<Agent>> state;
  std::uint64_t done_steps = 0;

  if (std::filesystem::exists(paths.checkpoint())) {
    AgentCheckpoint ck = load_agent_checkpoint(paths.checkpoint());
    if (ck.extra.value("fingerprint", "") != fingerprint)
      throw ConfigError("checkpoint in '" + paths.dir.string() +
                        "' belongs to a different run configuration");
    std::size_t pos = 0;
    Agent agent(ck.spec, ck.config, init_rng);
    core_restore(agent.core(), ck.payload, pos);
    SeededRng train_rng = rng_from_payload(ck.payload, pos);
    state.emplace(detail::RunState<Agent>{std::move(agent), train_rng});
    done_steps = ck.extra.at("trained_steps").get<std::uint64_t>();
    metrics.points = read_metrics_csv(paths.metrics());
    require(!metrics.points.empty() &&
                metrics.points.back().step == done_steps,
            "metrics file out of sync with checkpoint in '" + paths.dir.string() + "'");
  } else {
    AgentConfig acfg = cfg.agent_cfg;
    if (cfg.gamma_from_env) acfg.gamma = env.spec().gamma;
    Agent agent(env.spec(), acfg, init_rng);
    state.emplace(detail::RunState<Agent>{std::move(agent), root.split("train")});
    std::ofstream mf(paths.metrics(), std::ios::trunc);
    mf << kMetricsHeader << "\n";
  }

  auto write_checkpoint = [&](std::uint64_t trained) {
    json extra;
    extra["fingerprint"] = fingerprint;
    extra["trained_steps"] = trained;
    std::vector<unsigned char> rng_bytes;
    rng_payload(state->train_rng, rng_bytes);
    save_agent(state->agent, paths.checkpoint(), cfg.agent, extra, &rng_bytes);
  };

  auto eval_and_log = [&](std::uint64_t step, const StepDiagnostics& avg,
                          std::size_t averaged) {
    EvalPoint p;
    p.step = step;
    p.raw_return = detail::evaluate_policy(state->agent, env, seed, step,
                                           cfg.eval_episodes);
    p.norm_score = normalized_score(p.raw_return, refs);
    if (averaged > 0) {
      const double inv = 1.0 / static_cast<double>(averaged);
      p.critic_loss = avg.critic_loss * inv;
      p.bellman_term = avg.bellman_term * inv;
      p.cql_term = avg.cql_term * inv;
      p.policy_loss = avg.policy_loss * inv;
      p.conservative_gap = avg.conservative_gap * inv;
      p.q_data_mean = avg.q_data_mean * inv;
      p.alpha = avg.alpha * inv;
    }
    metrics.points.push_back(p);
    std::ofstream mf(paths.metrics(), std::ios::app);
    mf << format_eval_point(p) << "\n";
    write_checkpoint(step);
  };

  if (done_steps == 0 && metrics.points.empty()) eval_and_log(0, {}, 0);

  StepDiagnostics window{};
  std::size_t window_count = 0;
  const std::uint64_t target = std::min<std::uint64_t>(cfg.steps, stop_after);
  for (std::uint64_t step = done_steps + 1; step <= target; ++step) {
    StepDiagnostics d = state->agent.train_step(ds, state->train_rng);
    window.critic_loss += d.critic_loss;
    window.bellman_term += d.bellman_term;
    window.cql_term += d.cql_term;
    window.policy_loss += d.policy_loss;
    window.conservative_gap += d.conservative_gap;
    window.q_data_mean += d.q_data_mean;
    window.alpha += d.alpha;
    ++window_count;
    if (step % cfg.eval_interval == 0 || step == cfg.steps) {
      eval_and_log(step, window, window_count);
      window = {};
      window_count = 0;
    }
  }

  metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  json summary;
  summary["seed"] = seed;
  summary["trained_steps"] = std::min<std::uint64_t>(cfg.steps, target);
  summary["wall_seconds"] = metrics.wall_seconds;
  summary["fingerprint"] = fingerprint;
  std::ofstream sf(paths.summary(), std::ios::trunc);
  sf << summary.dump(2) << "\n";
  return metrics;
}

inline RunMetrics run_seed(const ExperimentConfig& cfg, const EnvBase& env,
                           const OfflineDataset& ds, const ReferenceScores& refs,
                           std::uint64_t seed, std::uint64_t stop_after = ~0ull) {
  if (cfg.agent == "cql-baseline")
    return run_seed_impl<CqlBaselineAgent>(cfg, env, ds, refs, seed, stop_after);
  return run_seed_impl<S4rlAgent>(cfg, env, ds, refs, seed, stop_after);
}

// Full experiment: dataset from recipe or file, then one run per seed.
inline std::vector<RunMetrics> run(const ExperimentConfig& cfg) {
  cfg.validate();
  auto env = make_env(cfg.env);
  const OfflineDataset ds =
      build_dataset(cfg, std::filesystem::path(cfg.out) / "datasets");
  require(!ds.transitions.empty() || cfg.steps == 0,
          "cannot train on an empty dataset");
  const ReferenceScores refs = reference_scores(*env);
  std::vector<RunMetrics> out;
  for (std::uint64_t seed : cfg.seeds)
    out.push_back(run_seed(cfg, *env, ds, refs, seed));
  return out;
}

}  // namespace s4rl
