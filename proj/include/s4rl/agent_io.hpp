#pragma once

#include <filesystem>

#include "s4rl/agent.hpp"
#include "s4rl/checkpoint.hpp"
#include "s4rl/cql_baseline.hpp"

namespace s4rl {

inline constexpr char kAgentMagic[8] = {'S', '4', 'R', 'L', 'A', 'G', 'T', '1'};

inline json kind_to_json(const AugmentKind& kind) {
  json j;
  j["spec"] = kind_to_string(kind);
  if (const auto* sw = std::get_if<StateSwitch>(&kind)) j["groups"] = sw->groups;
  return j;
}

inline AugmentKind kind_from_json(const json& j) {
  AugmentKind kind = parse_kind(j.at("spec").get<std::string>(), "");
  if (auto* sw = std::get_if<StateSwitch>(&kind)) {
    sw->groups = j.at("groups").get<SwitchGroups>();
    validate_kind(kind);
  }
  return kind;
}

inline json agent_config_to_json(const AgentConfig& cfg) {
  json j;
  j["policy_hidden"] = cfg.policy_hidden;
  j["critic_hidden"] = cfg.critic_hidden;
  j["lr"] = cfg.lr;
  j["batch"] = cfg.batch;
  j["gamma"] = cfg.gamma;
  j["tau_polyak"] = cfg.tau_polyak;
  j["cql_n_samples"] = cfg.cql.n_samples;
  j["cql_weight"] = cfg.cql.weight;
  j["augment"] = kind_to_json(cfg.s4rl.kind);
  j["augment_count"] = cfg.s4rl.count;
  j["augment_targets"] = cfg.s4rl.augment_targets;
  j["augment_policy"] = cfg.s4rl.augment_policy;
  j["entropy_coef"] = cfg.entropy_coef;
  j["auto_entropy"] = cfg.auto_entropy;
  return j;
}

inline AgentConfig agent_config_from_json(const json& j) {
  AgentConfig cfg;
  j.at("policy_hidden").get_to(cfg.policy_hidden);
  j.at("critic_hidden").get_to(cfg.critic_hidden);
  j.at("lr").get_to(cfg.lr);
  j.at("batch").get_to(cfg.batch);
  j.at("gamma").get_to(cfg.gamma);
  j.at("tau_polyak").get_to(cfg.tau_polyak);
  j.at("cql_n_samples").get_to(cfg.cql.n_samples);
  j.at("cql_weight").get_to(cfg.cql.weight);
  cfg.s4rl.kind = kind_from_json(j.at("augment"));
  j.at("augment_count").get_to(cfg.s4rl.count);
  j.at("augment_targets").get_to(cfg.s4rl.augment_targets);
  j.at("augment_policy").get_to(cfg.s4rl.augment_policy);
  j.at("entropy_coef").get_to(cfg.entropy_coef);
  j.at("auto_entropy").get_to(cfg.auto_entropy);
  cfg.validate();
  return cfg;
}

inline void core_payload(const ActorCriticCore& core,
                         std::vector<unsigned char>& buf) {
  net_payload(core.policy.net(), buf);
  net_payload(core.critics.q1, buf);
  net_payload(core.critics.q2, buf);
  net_payload(core.critics.target1, buf);
  net_payload(core.critics.target2, buf);
  adam_payload(core.opt_policy, buf);
  adam_payload(core.opt_q1, buf);
  adam_payload(core.opt_q2, buf);
  put_raw(buf, core.entropy.value);
  put_raw(buf, core.entropy.log_alpha);
  put_raw(buf, core.entropy.target_entropy);
  adam_payload(core.entropy.opt, buf);
  put_raw(buf, core.step);
}

inline void core_restore(ActorCriticCore& core,
                         const std::vector<unsigned char>& buf,
                         std::size_t& pos) {
  get_doubles(buf, pos, std::span<double>(core.policy.net().params()));
  get_doubles(buf, pos, std::span<double>(core.critics.q1.params()));
  get_doubles(buf, pos, std::span<double>(core.critics.q2.params()));
  get_doubles(buf, pos, std::span<double>(core.critics.target1.params()));
  get_doubles(buf, pos, std::span<double>(core.critics.target2.params()));
  core.opt_policy = adam_from_payload(core.policy.net().param_count(), buf, pos);
  core.opt_q1 = adam_from_payload(core.critics.q1.param_count(), buf, pos);
  core.opt_q2 = adam_from_payload(core.critics.q2.param_count(), buf, pos);
  core.entropy.value = get_raw<double>(buf, pos);
  core.entropy.log_alpha = get_raw<double>(buf, pos);
  core.entropy.target_entropy = get_raw<double>(buf, pos);
  core.entropy.opt = adam_from_payload(1, buf, pos);
  core.step = get_raw<std::uint64_t>(buf, pos);
}

// Versioned composite checkpoint: policy, both critics, both targets,
// optimizer states, entropy coefficient, and the agent configuration. The
// caller may stash extra header fields (e.g. a training rng) via `extra`.
template <typename Agent>
void save_agent(const Agent& agent, const std::filesystem::path& path,
                const std::string& agent_type, json extra = json::object(),
                const std::vector<unsigned char>* extra_payload = nullptr) {
  json h;
  h["version"] = 1;
  h["agent_type"] = agent_type;
  h["config"] = agent_config_to_json(agent.config());
  h["env_spec"] = agent.core().spec;
  h["extra"] = std::move(extra);
  std::vector<unsigned char> payload;
  core_payload(agent.core(), payload);
  h["core_bytes"] = payload.size();
  if (extra_payload)
    payload.insert(payload.end(), extra_payload->begin(), extra_payload->end());
  write_container(path, kAgentMagic, h, payload);
}

struct AgentCheckpoint {
  std::string agent_type;
  AgentConfig config;
  EnvSpec spec;
  json extra;
  std::vector<unsigned char> payload;
  std::size_t core_bytes = 0;

  // Rebuilds the typed agent and restores its core in place.
  template <typename Agent>
  Agent restore() const {
    SeededRng init(0);
    Agent agent(spec, config, init);
    std::size_t pos = 0;
    core_restore(agent.core(), payload, pos);
    return agent;
  }
};

inline AgentCheckpoint load_agent_checkpoint(const std::filesystem::path& path) {
  Container c = read_container(path, kAgentMagic);
  if (c.header.value("version", 0) != 1)
    throw IoError("'" + path.string() + "': unsupported agent checkpoint version");
  AgentCheckpoint out;
  out.agent_type = c.header.at("agent_type").get<std::string>();
  out.config = agent_config_from_json(c.header.at("config"));
  out.spec = c.header.at("env_spec").get<EnvSpec>();
  out.extra = c.header.value("extra", json::object());
  out.core_bytes = c.header.value("core_bytes", std::size_t{0});
  out.payload = std::move(c.payload);
  return out;
}

}  // namespace s4rl
