#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s4rl/common.hpp"

namespace s4rl {

using json = nlohmann::json;

// Container framing shared by datasets and checkpoints:
//   [8-byte magic][u64 LE header length][JSON header][payload bytes]
// The header always carries "payload_bytes" and a FNV-1a "checksum" of the
// payload, verified on read.

inline void write_container(const std::filesystem::path& path,
                            const char magic[8], json header,
                            const std::vector<unsigned char>& payload) {
  header["payload_bytes"] = payload.size();
  header["checksum"] = fnv1a64(payload.data(), payload.size());
  const std::string htext = header.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(magic, 8);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

struct Container {
  json header;
  std::vector<unsigned char> payload;
};

inline Container read_container(const std::filesystem::path& path,
                                const char magic[8]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0)
    throw IoError("'" + path.string() + "': bad magic, expected " +
                  std::string(magic, magic + 7));
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1ull << 30))
    throw IoError("'" + path.string() + "': corrupt header length");
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw IoError("'" + path.string() + "': truncated header");

  Container c;
  try {
    c.header = json::parse(htext);
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "': header parse error: " + e.what());
  }
  const std::uint64_t want = c.header.value("payload_bytes", std::uint64_t{0});
  c.payload.resize(want);
  in.read(reinterpret_cast<char*>(c.payload.data()),
          static_cast<std::streamsize>(want));
  if (static_cast<std::uint64_t>(in.gcount()) != want)
    throw IoError("'" + path.string() + "': truncated payload");
  const std::uint64_t sum = fnv1a64(c.payload.data(), c.payload.size());
  if (sum != c.header.value("checksum", std::uint64_t{0}))
    throw IoError("'" + path.string() + "': payload checksum mismatch");
  return c;
}

// Little-endian scalar append/read helpers for payload buffers.
template <typename T>
void put_raw(std::vector<unsigned char>& buf, const T& v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T get_raw(const std::vector<unsigned char>& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw IoError("payload read out of range");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline void put_doubles(std::vector<unsigned char>& buf,
                        std::span<const double> xs) {
  const auto* p = reinterpret_cast<const unsigned char*>(xs.data());
  buf.insert(buf.end(), p, p + xs.size() * sizeof(double));
}

inline void get_doubles(const std::vector<unsigned char>& buf,
                        std::size_t& pos, std::span<double> out) {
  if (pos + out.size() * sizeof(double) > buf.size())
    throw IoError("payload read out of range");
  std::memcpy(out.data(), buf.data() + pos, out.size() * sizeof(double));
  pos += out.size() * sizeof(double);
}

}  // namespace s4rl
