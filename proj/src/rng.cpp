#include "mml/rng.hpp"

#include <cmath>

namespace mml {

double Rng::normal() {
  // Box-Muller; draw u1 away from zero to keep log finite.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix((base >> (8 * i)) & 0xff);
  for (char c : label) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  for (int i = 0; i < 8; ++i) mix((index >> (8 * i)) & 0xff);
  return h;
}

}  // namespace mml
