#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "s4rl/adam.hpp"
#include "s4rl/io.hpp"
#include "s4rl/net.hpp"
#include "s4rl/rng.hpp"

namespace s4rl {

inline constexpr char kNetMagic[8] = {'S', '4', 'R', 'L', 'N', 'E', 'T', '1'};

// Header/payload encoding reused by the standalone net checkpoint and the
// composite agent checkpoint.
inline json net_header(const DenseNet& net) {
  json h;
  h["widths"] = net.widths();
  std::vector<std::string> acts;
  for (Act a : net.hidden_acts()) acts.push_back(act_name(a));
  h["activations"] = acts;
  h["param_count"] = net.param_count();
  return h;
}

inline void net_payload(const DenseNet& net, std::vector<unsigned char>& buf) {
  put_doubles(buf, net.params());
}

inline DenseNet net_from_parts(const json& h,
                               const std::vector<unsigned char>& payload,
                               std::size_t& pos) {
  std::vector<std::size_t> widths = h.at("widths").get<std::vector<std::size_t>>();
  std::vector<Act> acts;
  for (const auto& s : h.at("activations")) acts.push_back(act_from_name(s));
  SeededRng dummy(0);
  DenseNet net(widths, acts, dummy);
  get_doubles(payload, pos, std::span<double>(net.params()));
  if (!all_finite(net.params()))
    throw IoError("checkpoint holds non-finite parameters");
  return net;
}

// Versioned parameter checkpoint: layer shapes, weights, biases, writing seed.
inline void save_net(const DenseNet& net, const std::filesystem::path& path,
                     std::uint64_t writing_seed) {
  json h = net_header(net);
  h["version"] = 1;
  h["writing_seed"] = writing_seed;
  std::vector<unsigned char> payload;
  net_payload(net, payload);
  write_container(path, kNetMagic, h, payload);
}

struct LoadedNet {
  DenseNet net;
  std::uint64_t writing_seed = 0;
};

inline LoadedNet load_net(const std::filesystem::path& path) {
  Container c = read_container(path, kNetMagic);
  if (c.header.value("version", 0) != 1)
    throw IoError("'" + path.string() + "': unsupported net checkpoint version");
  std::size_t pos = 0;
  LoadedNet out{net_from_parts(c.header, c.payload, pos),
                c.header.value("writing_seed", std::uint64_t{0})};
  return out;
}

inline void adam_payload(const AdamState& s, std::vector<unsigned char>& buf) {
  put_raw(buf, s.lr);
  put_raw(buf, s.beta1);
  put_raw(buf, s.beta2);
  put_raw(buf, s.eps);
  put_raw(buf, s.t);
  put_doubles(buf, s.m);
  put_doubles(buf, s.v);
}

inline AdamState adam_from_payload(std::size_t n,
                                   const std::vector<unsigned char>& buf,
                                   std::size_t& pos) {
  AdamState s = AdamState::for_params(n);
  s.lr = get_raw<double>(buf, pos);
  s.beta1 = get_raw<double>(buf, pos);
  s.beta2 = get_raw<double>(buf, pos);
  s.eps = get_raw<double>(buf, pos);
  s.t = get_raw<std::uint64_t>(buf, pos);
  get_doubles(buf, pos, std::span<double>(s.m));
  get_doubles(buf, pos, std::span<double>(s.v));
  return s;
}

inline void rng_payload(const SeededRng& rng, std::vector<unsigned char>& buf) {
  for (std::uint64_t w : rng.state()) put_raw(buf, w);
}

inline SeededRng rng_from_payload(const std::vector<unsigned char>& buf,
                                  std::size_t& pos) {
  std::array<std::uint64_t, 5> st;
  for (auto& w : st) w = get_raw<std::uint64_t>(buf, pos);
  return SeededRng::from_state(st);
}

}  // namespace s4rl
