#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "s4rl/agent_core.hpp"
#include "s4rl/agent_io.hpp"
#include "s4rl/dataset.hpp"

namespace s4rl {

// Full declarative description of one experiment: environment, dataset
// recipe, agent settings, budgets, seeds, output directory.
struct ExperimentConfig {
  // [experiment]
  std::string env = "pointmass2d";
  std::string dataset_path;               // explicit file; empty = use recipe
  SplitKind split = SplitKind::MediumReplay;
  std::size_t episodes = 100;             // recipe size
  std::uint64_t dataset_seed = 1001;
  double fraction = 1.0;                  // subsample of the dataset
  std::uint64_t fraction_seed = 0;        // 0 = derived from dataset_seed
  bool per_episode_fraction = false;
  std::string agent = "s4rl";             // "s4rl" or "cql-baseline"
  std::size_t steps = 100000;
  std::size_t eval_interval = 5000;
  std::size_t eval_episodes = 20;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string out = "runs/experiment";
  std::size_t sac_budget = 0;             // 0 = per-environment default

  // [agent]
  AgentConfig agent_cfg;
  bool gamma_from_env = true;

  // [sweep]
  std::vector<std::string> sweep_kinds = {
      "identity", "gauss:3e-3", "uniform:1e-3", "ampscale:0.98:1.02",
      "dimdrop", "switch", "mixup:0.4"};
  std::vector<double> sweep_fractions = {0.05, 0.10, 0.25, 1.0};
  bool sweep_include_baseline = true;
  std::vector<std::string> sweep_tasks;   // "env:split"; empty = experiment's

  void validate() const {
    require(!env.empty(), "experiment.env must be set");
    require(steps >= 0, "experiment.steps must be non-negative");
    require(eval_interval > 0, "experiment.eval_interval must be positive");
    require(eval_episodes > 0, "experiment.eval_episodes must be positive");
    require(!seeds.empty(), "experiment.seeds must list at least one seed");
    require(fraction > 0.0 && fraction <= 1.0,
            "experiment.fraction must lie in (0,1]");
    require(agent == "s4rl" || agent == "cql-baseline",
            "experiment.agent must be 's4rl' or 'cql-baseline'");
    require(!out.empty(), "experiment.out must be set");
    agent_cfg.validate();
  }

  // Stable identity of everything that shapes a run's numbers; resume
  // refuses a checkpoint whose fingerprint differs.
  std::string fingerprint() const {
    json j;
    j["env"] = env;
    j["dataset_path"] = dataset_path;
    j["split"] = split_name(split);
    j["episodes"] = episodes;
    j["dataset_seed"] = dataset_seed;
    j["fraction"] = fraction;
    j["fraction_seed"] = fraction_seed;
    j["per_episode"] = per_episode_fraction;
    j["agent"] = agent;
    j["steps"] = steps;
    j["eval_interval"] = eval_interval;
    j["eval_episodes"] = eval_episodes;
    j["sac_budget"] = sac_budget;
    j["agent_cfg"] = agent_config_to_json(agent_cfg);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out;
  is >> out;
  if (is.fail() || !is.eof())
    throw ConfigError("config field '" + key + "': cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config field '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace detail

// Flat key-value text with [sections]; '#' starts a comment. Unknown
// sections or keys are errors that name the offender.
inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section = "experiment";
  int lineno = 0;
  std::string pending_augment = "gauss:3e-3";
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": malformed section header '" + line + "'");
      section = line.substr(1, line.size() - 2);
      if (section != "experiment" && section != "agent" && section != "sweep")
        throw ConfigError("unknown config section '[" + section + "]'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    using detail::parse_bool;
    using detail::parse_number;
    if (section == "experiment") {
      if (key == "env") cfg.env = value;
      else if (key == "dataset") cfg.dataset_path = value;
      else if (key == "split") cfg.split = split_from_name(value);
      else if (key == "episodes") cfg.episodes = parse_number<std::size_t>(qual, value);
      else if (key == "dataset_seed") cfg.dataset_seed = parse_number<std::uint64_t>(qual, value);
      else if (key == "fraction") cfg.fraction = parse_number<double>(qual, value);
      else if (key == "fraction_seed") cfg.fraction_seed = parse_number<std::uint64_t>(qual, value);
      else if (key == "per_episode_fraction") cfg.per_episode_fraction = parse_bool(qual, value);
      else if (key == "agent") cfg.agent = value;
      else if (key == "steps") cfg.steps = parse_number<std::size_t>(qual, value);
      else if (key == "eval_interval") cfg.eval_interval = parse_number<std::size_t>(qual, value);
      else if (key == "eval_episodes") cfg.eval_episodes = parse_number<std::size_t>(qual, value);
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : detail::split_list(value))
          cfg.seeds.push_back(parse_number<std::uint64_t>(qual, s));
      } else if (key == "out") cfg.out = value;
      else if (key == "sac_budget") cfg.sac_budget = parse_number<std::size_t>(qual, value);
      else throw ConfigError("unknown config field 'experiment." + key + "'");
    } else if (section == "agent") {
      AgentConfig& a = cfg.agent_cfg;
      if (key == "hidden") {
        a.policy_hidden.clear();
        for (const auto& s : detail::split_list(value))
          a.policy_hidden.push_back(parse_number<std::size_t>(qual, s));
        a.critic_hidden = a.policy_hidden;
      } else if (key == "lr") a.lr = parse_number<double>(qual, value);
      else if (key == "batch") a.batch = parse_number<std::size_t>(qual, value);
      else if (key == "gamma") {
        a.gamma = parse_number<double>(qual, value);
        cfg.gamma_from_env = false;
      } else if (key == "tau") a.tau_polyak = parse_number<double>(qual, value);
      else if (key == "cql_weight") a.cql.weight = parse_number<double>(qual, value);
      else if (key == "cql_samples") a.cql.n_samples = parse_number<std::size_t>(qual, value);
      else if (key == "entropy") a.entropy_coef = parse_number<double>(qual, value);
      else if (key == "auto_entropy") a.auto_entropy = parse_bool(qual, value);
      else if (key == "augment") pending_augment = value;
      else if (key == "augment_count") a.s4rl.count = parse_number<std::size_t>(qual, value);
      else if (key == "augment_targets") a.s4rl.augment_targets = parse_bool(qual, value);
      else if (key == "augment_policy") a.s4rl.augment_policy = parse_bool(qual, value);
      else throw ConfigError("unknown config field 'agent." + key + "'");
    } else {  // sweep
      if (key == "kinds") cfg.sweep_kinds = detail::split_list(value);
      else if (key == "fractions") {
        cfg.sweep_fractions.clear();
        for (const auto& s : detail::split_list(value))
          cfg.sweep_fractions.push_back(detail::parse_number<double>(qual, s));
      } else if (key == "include_baseline") cfg.sweep_include_baseline = parse_bool(qual, value);
      else if (key == "tasks") cfg.sweep_tasks = detail::split_list(value);
      else throw ConfigError("unknown config field 'sweep." + key + "'");
    }
  }
  // Augmentation strings may need the environment for switch groups.
  cfg.agent_cfg.s4rl.kind = parse_kind(pending_augment, cfg.env);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace s4rl
