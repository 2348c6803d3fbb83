#include "mrfp/image_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mrfp {

namespace {

unsigned char quantize(double v) {
  const double q = std::floor(v * 255.0 + 0.5);
  return static_cast<unsigned char>(q < 0.0 ? 0.0 : (q > 255.0 ? 255.0 : q));
}

void expect_token(std::istream& is, const std::string& want, const std::string& path) {
  std::string got;
  is >> got;
  if (got != want) throw std::runtime_error("bad raster header in " + path);
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.n() != 1 || image.c() != 3)
    throw std::invalid_argument("write_ppm: expected a (1,3,H,W) image");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
  os << "P6\n" << image.w() << ' ' << image.h() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.w()) * 3);
  for (int y = 0; y < image.h(); ++y) {
    for (int x = 0; x < image.w(); ++x)
      for (int c = 0; c < 3; ++c) row[x * 3 + c] = quantize(image.at(0, c, y, x));
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("write_ppm: write failed for " + path);
}

Tensor read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_ppm: cannot open " + path);
  expect_token(is, "P6", path);
  int w = 0, h = 0, maxval = 0;
  is >> w >> h >> maxval;
  is.get();  // single whitespace after the header
  if (w < 1 || h < 1 || maxval != 255) throw std::runtime_error("read_ppm: bad header");
  Tensor img(1, 3, h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = row[x * 3 + c] / 255.0;
  }
  if (!is) throw std::runtime_error("read_ppm: truncated " + path);
  return img;
}

void write_pgm(const std::string& path, const LabelMap& mask) {
  if (mask.n != 1) throw std::invalid_argument("write_pgm: expected a (1,H,W) mask");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
  os << "P5\n" << mask.w << ' ' << mask.h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(mask.w));
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      const std::int32_t v = mask.at(0, y, x);
      if (v < 0 || v > 255) throw std::invalid_argument("write_pgm: label out of byte range");
      row[x] = static_cast<unsigned char>(v);
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

LabelMap read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_pgm: cannot open " + path);
  expect_token(is, "P5", path);
  int w = 0, h = 0, maxval = 0;
  is >> w >> h >> maxval;
  is.get();
  if (w < 1 || h < 1 || maxval != 255) throw std::runtime_error("read_pgm: bad header");
  LabelMap m(1, h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    for (int x = 0; x < w; ++x) m.at(0, y, x) = row[x];
  }
  if (!is) throw std::runtime_error("read_pgm: truncated " + path);
  return m;
}

}  // namespace mrfp
