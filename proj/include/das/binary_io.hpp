#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "das/error.hpp"

namespace das::io {

using Bytes = std::vector<unsigned char>;

inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

inline void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }
inline void put_f32(Bytes& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for reading: " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Layout: 8-byte magic | u64 header length | UTF-8 JSON header | payload.
inline Bytes frame_container(std::string_view magic, const nlohmann::json& header, const Bytes& payload) {
  const std::string text = header.dump();
  Bytes out(magic.begin(), magic.end());
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

struct Container {
  nlohmann::json header;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;
};

inline Container open_container(std::string_view magic, const Bytes& bytes) {
  if (bytes.size() < magic.size() || std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
  if (bytes.size() < magic.size() + 8) throw FormatError("truncated header length field");
  const std::uint64_t header_len = get_u64(bytes.data() + magic.size());
  const std::size_t header_start = magic.size() + 8;
  if (header_len > bytes.size() - header_start) {
    throw FormatError("truncated header: expected " + std::to_string(header_len) + " bytes, found " +
                      std::to_string(bytes.size() - header_start));
  }
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(header_start + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }
  c.payload = bytes.data() + header_start + header_len;
  c.payload_size = bytes.size() - header_start - header_len;
  return c;
}

inline void expect_payload(const Container& c, std::size_t expected) {
  if (c.payload_size != expected) {
    throw FormatError((c.payload_size < expected ? "truncated payload: expected " : "payload size mismatch: expected ") +
                      std::to_string(expected) + " bytes, found " + std::to_string(c.payload_size));
  }
}

}  // namespace das::io
