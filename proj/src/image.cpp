#include "fusebio/image.hpp"

#include <cctype>
#include <fstream>

#include "fusebio/common.hpp"

namespace fusebio {

GrayImage resize_nearest(const GrayImage& src, int out_w, int out_h) {
  if (src.width <= 0 || src.height <= 0) throw InvalidRange("resize of empty image");
  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    int sy = static_cast<int>((y + 0.5) * src.height / out_h);
    if (sy >= src.height) sy = src.height - 1;
    for (int x = 0; x < out_w; ++x) {
      int sx = static_cast<int>((x + 0.5) * src.width / out_w);
      if (sx >= src.width) sx = src.width - 1;
      out.at(y, x) = src.at(sy, sx);
    }
  }
  return out;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw IoError("write failed: " + path);
}

namespace {

int next_pgm_int(std::istream& is) {
  // skips whitespace and '#' comments
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = is.get();
  }
  if (c == EOF || !std::isdigit(c)) throw CorruptFile("malformed PGM header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = is.get();
  }
  return value;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char p, five;
  is.get(p);
  is.get(five);
  if (p != 'P' || five != '5') throw CorruptFile("not a binary PGM: " + path);
  const int w = next_pgm_int(is);
  const int h = next_pgm_int(is);
  const int maxval = next_pgm_int(is);
  if (w <= 0 || h <= 0 || maxval != 255) throw CorruptFile("unsupported PGM: " + path);
  GrayImage img(w, h);
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw CorruptFile("truncated PGM: " + path);
  }
  return img;
}

}  // namespace fusebio
