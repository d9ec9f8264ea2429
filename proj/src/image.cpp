#include "rptm/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rptm {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  for (;;) {
    int c = in.get();
    if (c == EOF) {
      if (tok.empty()) throw FormatError("unexpected end of header");
      return tok;
    }
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      if (!tok.empty()) return tok;
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int parse_header_int(std::istream& in, const char* what) {
  std::string tok = next_token(in);
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw FormatError(std::string("non-numeric ") + what + " field: '" + tok + "'");
  long v = std::strtol(tok.c_str(), nullptr, 10);
  if (v < 0 || v > 1000000) throw FormatError(std::string("out-of-range ") + what);
  return static_cast<int>(v);
}

std::uint8_t luma(int r, int g, int b) {
  double y = 0.299 * r + 0.587 * g + 0.114 * b;
  long v = std::lround(y);
  if (v < 0) v = 0;
  if (v > 255) v = 255;
  return static_cast<std::uint8_t>(v);
}

}  // namespace

GrayImage load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path);

  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (!in || m0 != 'P' || (m1 != '2' && m1 != '3' && m1 != '5' && m1 != '6'))
    throw FormatError("unsupported magic in " + path);
  const bool color = (m1 == '3' || m1 == '6');
  const bool binary = (m1 == '5' || m1 == '6');

  int w = parse_header_int(in, "width");
  int h = parse_header_int(in, "height");
  int maxval = parse_header_int(in, "maxval");
  if (w < 1 || h < 1) throw FormatError("bad dimensions in " + path);
  if (w > kMaxImageDim || h > kMaxImageDim) throw FormatError("image exceeds 8192 px per side: " + path);
  if (maxval < 1 || maxval > 255) throw FormatError("unsupported maxval (must be 1..255) in " + path);

  const std::size_t samples = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * (color ? 3u : 1u);
  std::vector<std::uint8_t> raw(samples);
  if (binary) {
    // exactly one whitespace byte separates header from payload
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(samples));
    if (static_cast<std::size_t>(in.gcount()) != samples) throw FormatError("truncated payload in " + path);
  } else {
    for (std::size_t i = 0; i < samples; ++i) {
      int v = parse_header_int(in, "sample");
      if (v > maxval) throw FormatError("sample exceeds maxval in " + path);
      raw[i] = static_cast<std::uint8_t>(v);
    }
  }

  GrayImage img(w, h);
  if (color) {
    for (std::size_t i = 0; i < img.data.size(); ++i)
      img.data[i] = luma(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
  } else {
    img.data = std::move(raw);
  }
  return img;
}

void save_pgm(const GrayImage& img, const std::string& path) {
  if (img.width < 1 || img.height < 1 || img.data.size() != static_cast<std::size_t>(img.width) * img.height)
    throw DimensionError("invalid image passed to save_pgm");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("short write: " + path);
}

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw DimensionError("resize target must be at least 1x1");
  if (out_w > kMaxImageDim || out_h > kMaxImageDim) throw DimensionError("resize target exceeds 8192 px per side");
  GrayImage out(out_w, out_h);
  // corner-aligned sampling: output corner pixels map onto input corners
  const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
  const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    double fy = y * sy;
    int y0 = static_cast<int>(fy);
    if (y0 > img.height - 2) y0 = img.height >= 2 ? img.height - 2 : 0;
    double wy = fy - y0;
    int y1 = img.height >= 2 ? y0 + 1 : y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = x * sx;
      int x0 = static_cast<int>(fx);
      if (x0 > img.width - 2) x0 = img.width >= 2 ? img.width - 2 : 0;
      double wx = fx - x0;
      int x1 = img.width >= 2 ? x0 + 1 : x0;
      double v = (1 - wy) * ((1 - wx) * img.at(x0, y0) + wx * img.at(x1, y0)) +
                 wy * ((1 - wx) * img.at(x0, y1) + wx * img.at(x1, y1));
      long r = std::lround(v);
      if (r < 0) r = 0;
      if (r > 255) r = 255;
      out.at(x, y) = static_cast<std::uint8_t>(r);
    }
  }
  return out;
}

std::vector<GrayImage> build_pyramid(const GrayImage& img, int levels, double factor) {
  if (levels < 1) throw ConfigError("pyramid levels must be >= 1");
  if (!(factor > 1.0)) throw ConfigError("pyramid factor must be > 1");
  std::vector<GrayImage> out;
  out.push_back(img);
  for (int i = 1; i < levels; ++i) {
    double s = std::pow(factor, i);
    int w = static_cast<int>(std::floor(img.width / s));
    int h = static_cast<int>(std::floor(img.height / s));
    if (w < 8 || h < 8) break;
    out.push_back(resize_bilinear(img, w, h));
  }
  return out;
}

}  // namespace rptm
