#include "irsc/rng.hpp"

#include <cmath>
#include <numbers>

namespace irsc::rng {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index) {
  std::uint64_t h = splitmix64(master ^ fnv1a(label));
  return splitmix64(h ^ splitmix64(index));
}

double Stream::normal() {
  // u1 in (0,1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Stream::uniform_index(std::size_t n) {
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Stream Stream::substream(std::string_view label, std::uint64_t index) {
  return Stream(derive_seed(next_u64(), label, index));
}

}  // namespace irsc::rng
