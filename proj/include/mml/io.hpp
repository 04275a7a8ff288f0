#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mml/tensor.hpp"

namespace mml {

/// Append-only little-endian byte buffer for the binary file formats.
struct ByteWriter {
  std::vector<std::uint8_t> bytes;

  void put_raw(const void* data, std::size_t n);
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f64(double v);
  void put_doubles(const std::vector<double>& v);
};

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes(b) {}
  void get_raw(void* out, std::size_t n);
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  double get_f64();
  void get_doubles(std::vector<double>& out, std::size_t n);
};

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes);

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace mml
