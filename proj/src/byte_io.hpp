// SPDX-License-Identifier: Apache-2.0
// Little-endian encode/decode shared by the binary file formats.
#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "cystseg/error.hpp"

namespace cystseg::detail {

class ByteWriter {
 public:
  void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void byte(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

  void write_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot open for writing: " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw Error(Errc::io_failure, "write failed: " + path.string());
  }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  static ByteReader from_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
      throw Error(Errc::missing_file, "no such file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot open: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes), path.string());
  }

  void expect_magic(std::string_view m) {
    if (buf_.size() < m.size() || std::string_view(buf_.data(), m.size()) != m) {
      throw Error(Errc::bad_magic, "expected magic '" + std::string(m) + "' in " + name_);
    }
    pos_ = m.size();
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::uint8_t byte() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }

  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  const std::string& name() const noexcept { return name_; }

  void need(std::size_t n) const {
    if (remaining() < n) throw Error(Errc::truncated_payload, "file ends early: " + name_);
  }

 private:
  ByteReader(std::vector<char> bytes, std::string name) : buf_(std::move(bytes)), name_(std::move(name)) {}

  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::string name_;
};

}  // namespace cystseg::detail
