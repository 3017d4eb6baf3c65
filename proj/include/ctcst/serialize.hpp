// Copyright 2026 The ctcst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian primitives for the corpus and checkpoint containers. Both
// formats are a length-prefixed JSON header followed by fixed-layout binary
// records, so files are self-describing and byte-stable across runs.

#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ctcst/common.hpp"

namespace ctcst::io {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

  void set_context(std::string context) { context_ = std::move(context); }
  const std::string& context() const { return context_; }

  std::uint8_t u8() {
    int c = is_.get();
    if (c == EOF) truncated("u8");
    return static_cast<std::uint8_t>(c);
  }

  std::uint32_t u32() {
    unsigned char b[4];
    read_raw(b, 4, "u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string string() {
    const std::uint32_t n = u32();
    require(n <= (1u << 20), context_ + ": implausible string length");
    std::string s(n, '\0');
    read_raw(s.data(), n, "string");
    return s;
  }

  bool at_eof() {
    is_.peek();
    return is_.eof();
  }

  [[noreturn]] void truncated(const std::string& what) {
    fail(context_ + ": file truncated while reading " + what);
  }

 private:
  void read_raw(void* dst, std::size_t n, const char* what) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) truncated(what);
  }

  std::istream& is_;
  std::string context_;
};

inline void write_header(std::ostream& os, const nlohmann::json& header) {
  const std::string text = header.dump();
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline nlohmann::json read_header(Reader& r, const std::string& expected_version) {
  const std::uint64_t len = r.u64();
  require(len <= (1u << 26), r.context() + ": implausible header length");
  std::string text(len, '\0');
  for (std::size_t i = 0; i < len; ++i) text[i] = static_cast<char>(r.u8());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(r.context() + ": malformed JSON header: " + e.what());
  }
  require(header.contains("version") && header["version"].is_string(),
          r.context() + ": missing version field");
  require(header["version"].get<std::string>() == expected_version,
          r.context() + ": version mismatch, expected " + expected_version + " got " +
              header["version"].get<std::string>());
  return header;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open for reading: " + path);
  return is;
}

}  // namespace ctcst::io
