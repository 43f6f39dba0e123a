#pragma once

#include <filesystem>

#include "s4rl/dataset.hpp"
#include "s4rl/io.hpp"

namespace s4rl {

inline constexpr char kDatasetMagic[8] = {'S', '4', 'R', 'L', 'D', 'S', '1', '\0'};

// Fixed-width little-endian record: s, a, s_next as f64, reward f64, done u8.
inline std::size_t dataset_record_bytes(const EnvSpec& spec) {
  return (2 * spec.state_dim + spec.action_dim + 1) * sizeof(double) + 1;
}

// On-disk layout: container framing (magic, JSON header, checksummed
// payload) where the payload is count * record_bytes. The header carries
// env name, spec, split, behavior, seeds, count, and episode boundaries.
inline void save(const OfflineDataset& ds, const std::filesystem::path& path) {
  ds.check_consistency();
  json h;
  h["version"] = 1;
  h["env"] = ds.env_name;
  h["spec"] = ds.spec;
  h["split"] = split_name(ds.split);
  h["behavior"] = ds.behavior;
  h["seed"] = ds.seed;
  h["parent_fraction"] = ds.parent_fraction;
  h["parent_seed"] = ds.parent_seed;
  h["count"] = ds.size();
  h["record_bytes"] = dataset_record_bytes(ds.spec);
  h["episode_starts"] = ds.episode_starts;

  std::vector<unsigned char> payload;
  payload.reserve(ds.size() * dataset_record_bytes(ds.spec));
  for (const Transition& t : ds.transitions) {
    put_doubles(payload, t.s);
    put_doubles(payload, t.a);
    put_raw(payload, t.r);
    put_doubles(payload, t.s_next);
    payload.push_back(t.done ? 1 : 0);
  }
  write_container(path, kDatasetMagic, h, payload);
}

inline OfflineDataset load(const std::filesystem::path& path) {
  Container c = read_container(path, kDatasetMagic);
  if (c.header.value("version", 0) != 1)
    throw IoError("'" + path.string() + "': unsupported dataset version");

  OfflineDataset ds;
  ds.env_name = c.header.at("env").get<std::string>();
  ds.spec = c.header.at("spec").get<EnvSpec>();
  ds.split = split_from_name(c.header.at("split").get<std::string>());
  ds.behavior = c.header.value("behavior", "");
  ds.seed = c.header.value("seed", std::uint64_t{0});
  ds.parent_fraction = c.header.value("parent_fraction", 1.0);
  ds.parent_seed = c.header.value("parent_seed", std::uint64_t{0});
  ds.episode_starts =
      c.header.at("episode_starts").get<std::vector<std::size_t>>();

  const std::size_t count = c.header.at("count").get<std::size_t>();
  const std::size_t rec = dataset_record_bytes(ds.spec);
  if (c.header.at("record_bytes").get<std::size_t>() != rec)
    throw IoError("'" + path.string() + "': record size does not match spec");
  if (c.payload.size() != count * rec)
    throw IoError("'" + path.string() + "': payload size does not match count");

  ds.transitions.resize(count);
  std::size_t pos = 0;
  for (Transition& t : ds.transitions) {
    t.s.resize(ds.spec.state_dim);
    t.a.resize(ds.spec.action_dim);
    t.s_next.resize(ds.spec.state_dim);
    get_doubles(c.payload, pos, std::span<double>(t.s));
    get_doubles(c.payload, pos, std::span<double>(t.a));
    t.r = get_raw<double>(c.payload, pos);
    get_doubles(c.payload, pos, std::span<double>(t.s_next));
    t.done = get_raw<unsigned char>(c.payload, pos) != 0;
  }
  ds.check_consistency();
  return ds;
}

}  // namespace s4rl
