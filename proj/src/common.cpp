#include "fusebio/common.hpp"

#include <cstring>
#include <istream>
#include <ostream>

namespace fusebio {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff),
  };
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f32(std::ostream& os, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) throw CorruptFile("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float read_f32(std::istream& is) {
  const std::uint32_t u = read_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

void write_magic(std::ostream& os, const char magic[4]) {
  os.write(magic, 4);
}

void expect_magic(std::istream& is, const char magic[4]) {
  char b[4];
  is.read(b, 4);
  if (is.gcount() != 4 || std::memcmp(b, magic, 4) != 0) {
    throw CorruptFile(std::string("bad magic, expected ") + std::string(magic, 4));
  }
}

}  // namespace fusebio
