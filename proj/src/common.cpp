#include "hgot/common.hpp"

namespace hgot {

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  // splitmix64 over the seed, then fold in the tag bytes FNV-style.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  std::uint64_t h = 0xcbf29ce484222325ULL ^ z;
  for (char c : tag) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hgot
