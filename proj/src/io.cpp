#include "mml/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <type_traits>

namespace mml {

namespace {
// All formats are little-endian; byte-swap on the (unlikely) big-endian host.
template <typename T>
T to_le(T v) {
  static_assert(std::is_integral_v<T>);
  if constexpr (std::endian::native == std::endian::little) return v;
  T out = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out |= ((v >> (8 * i)) & 0xff) << (8 * (sizeof(T) - 1 - i));
  return out;
}
}  // namespace

void ByteWriter::put_raw(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  bytes.insert(bytes.end(), p, p + n);
}

void ByteWriter::put_u32(std::uint32_t v) {
  v = to_le(v);
  put_raw(&v, sizeof(v));
}

void ByteWriter::put_u64(std::uint64_t v) {
  v = to_le(v);
  put_raw(&v, sizeof(v));
}

void ByteWriter::put_f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(bits);
}

void ByteWriter::put_doubles(const std::vector<double>& v) {
  for (double x : v) put_f64(x);
}

void ByteReader::get_raw(void* out, std::size_t n) {
  if (pos + n > bytes.size()) throw Error("ByteReader: truncated data");
  std::memcpy(out, bytes.data() + pos, n);
  pos += n;
}

std::uint32_t ByteReader::get_u32() {
  std::uint32_t v;
  get_raw(&v, sizeof(v));
  return to_le(v);
}

std::uint64_t ByteReader::get_u64() {
  std::uint64_t v;
  get_raw(&v, sizeof(v));
  return to_le(v);
}

double ByteReader::get_f64() {
  std::uint64_t bits = get_u64();
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void ByteReader::get_doubles(std::vector<double>& out, std::size_t n) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = get_f64();
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error("cannot open: " + path);
  std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw Error("read failed: " + path);
  return bytes;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(f)),
                std::istreambuf_iterator<char>());
  return s;
}

}  // namespace mml
