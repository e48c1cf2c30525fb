#include "seclr/common.hpp"

#include <fstream>
#include <vector>

namespace seclr {

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot hash missing file: " + path);
  uint64_t h = kFnvBasis;
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), std::streamsize(buffer.size()));
    h = fnv1a64(buffer.data(), size_t(in.gcount()), h);
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[size_t(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace seclr
