#include "rptm/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace rptm {

namespace {

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr int kCircle[16][2] = {
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},  {2, 2},  {1, 3},
    {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

// Everything (orientation disk, descriptor patch, Harris window) fits
// inside this margin, so detection never reads out of bounds.
constexpr int kBorderMargin = 16;
constexpr int kPatchRadius = 15;

bool fast9_corner(const GrayImage& img, int x, int y, int t) {
  const int c = img.at(x, y);
  const int hi = c + t;
  const int lo = c - t;
  int bright[16], dark[16];
  for (int i = 0; i < 16; ++i) {
    int v = img.at(x + kCircle[i][0], y + kCircle[i][1]);
    bright[i] = v > hi;
    dark[i] = v < lo;
  }
  // longest circular run, checked over a doubled index range
  int run_b = 0, run_d = 0, best_b = 0, best_d = 0;
  for (int i = 0; i < 32; ++i) {
    int k = i & 15;
    run_b = bright[k] ? run_b + 1 : 0;
    run_d = dark[k] ? run_d + 1 : 0;
    best_b = std::max(best_b, run_b);
    best_d = std::max(best_d, run_d);
    if (best_b >= 9 || best_d >= 9) return true;
  }
  return false;
}

double harris_response(const GrayImage& img, int x, int y) {
  double a = 0, b = 0, c = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      int px = x + dx, py = y + dy;
      double ix = (img.at(px + 1, py - 1) + 2 * img.at(px + 1, py) + img.at(px + 1, py + 1)) -
                  (img.at(px - 1, py - 1) + 2 * img.at(px - 1, py) + img.at(px - 1, py + 1));
      double iy = (img.at(px - 1, py + 1) + 2 * img.at(px, py + 1) + img.at(px + 1, py + 1)) -
                  (img.at(px - 1, py - 1) + 2 * img.at(px, py - 1) + img.at(px + 1, py - 1));
      a += ix * ix;
      b += iy * iy;
      c += ix * iy;
    }
  }
  return (a * b - c * c) - 0.04 * (a + b) * (a + b);
}

double intensity_centroid_angle(const GrayImage& img, int x, int y) {
  double m10 = 0, m01 = 0;
  for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy) {
    for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
      if (dx * dx + dy * dy > kPatchRadius * kPatchRadius) continue;
      double v = img.at(x + dx, y + dy);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  if (m10 == 0.0 && m01 == 0.0) return 0.0;
  double a = std::atan2(m01, m10);
  if (a < 0) a += 2.0 * M_PI;
  if (a >= 2.0 * M_PI) a = 0.0;
  return a;
}

struct LevelCorner {
  int x, y;
  double response;
};

std::vector<LevelCorner> level_corners(const GrayImage& img, int threshold) {
  std::vector<LevelCorner> corners;
  if (img.width < 2 * kBorderMargin + 1 || img.height < 2 * kBorderMargin + 1) return corners;
  for (int y = kBorderMargin; y < img.height - kBorderMargin; ++y)
    for (int x = kBorderMargin; x < img.width - kBorderMargin; ++x)
      if (fast9_corner(img, x, y, threshold)) corners.push_back({x, y, harris_response(img, x, y)});

  // 3x3 non-maximum suppression; equal responses resolved toward lower (y, x)
  std::vector<double> grid(static_cast<std::size_t>(img.width) * img.height,
                           -std::numeric_limits<double>::infinity());
  for (const auto& c : corners) grid[static_cast<std::size_t>(c.y) * img.width + c.x] = c.response;
  std::vector<LevelCorner> kept;
  for (const auto& c : corners) {
    bool maximal = true;
    for (int dy = -1; dy <= 1 && maximal; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        double r = grid[static_cast<std::size_t>(c.y + dy) * img.width + (c.x + dx)];
        if (r > c.response || (r == c.response && (dy < 0 || (dy == 0 && dx < 0)))) {
          maximal = false;
          break;
        }
      }
    }
    if (maximal) kept.push_back(c);
  }
  return kept;
}

}  // namespace

const std::array<PatternPair, 256>& comparison_pairs() {
  static const std::array<PatternPair, 256> table = [] {
    std::array<PatternPair, 256> t{};
    std::mt19937 eng(0x5EED);
    auto draw = [&] { return static_cast<int>(eng() % 31u) - 15; };
    for (auto& p : t) {
      do {
        p = {draw(), draw(), draw(), draw()};
      } while (p.x1 == p.x2 && p.y1 == p.y2);
    }
    return t;
  }();
  return table;
}

void write_pair_table(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& p : comparison_pairs())
    out << p.x1 << " " << p.y1 << " " << p.x2 << " " << p.y2 << "\n";
  if (!out) throw IoError("short write: " + path);
}

std::array<PatternPair, 256> load_pair_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pair table: " + path);
  std::array<PatternPair, 256> t{};
  for (auto& p : t) {
    if (!(in >> p.x1 >> p.y1 >> p.x2 >> p.y2)) throw FormatError("truncated pair table: " + path);
    for (int v : {p.x1, p.y1, p.x2, p.y2})
      if (v < -15 || v > 15) throw FormatError("pair offset out of [-15,15]: " + path);
  }
  return t;
}

std::vector<Keypoint> detect_keypoints(const GrayImage& img, int fast_threshold, int max_features,
                                       int pyramid_levels, double pyramid_factor) {
  if (fast_threshold < 1) throw ConfigError("fast_threshold must be >= 1");
  if (max_features < 1) throw ConfigError("max_features must be >= 1");
  auto pyramid = build_pyramid(img, pyramid_levels, pyramid_factor);

  std::vector<Keypoint> all;
  for (std::size_t level = 0; level < pyramid.size(); ++level) {
    const GrayImage& li = pyramid[level];
    double scale = std::pow(pyramid_factor, static_cast<double>(level));
    for (const auto& c : level_corners(li, fast_threshold)) {
      Keypoint kp;
      kp.x = c.x * scale;
      kp.y = c.y * scale;
      kp.response = c.response;
      kp.level = static_cast<int>(level);
      kp.angle = intensity_centroid_angle(li, c.x, c.y);
      all.push_back(kp);
    }
  }
  std::sort(all.begin(), all.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.level < b.level;
  });
  if (all.size() > static_cast<std::size_t>(max_features)) all.resize(static_cast<std::size_t>(max_features));
  return all;
}

FeatureSet describe(const GrayImage& img, const std::vector<Keypoint>& kps,
                    int pyramid_levels, double pyramid_factor) {
  auto pyramid = build_pyramid(img, pyramid_levels, pyramid_factor);
  const auto& pairs = comparison_pairs();

  FeatureSet fs;
  fs.width = img.width;
  fs.height = img.height;
  for (const auto& kp : kps) {
    if (kp.level < 0 || static_cast<std::size_t>(kp.level) >= pyramid.size()) continue;
    const GrayImage& li = pyramid[static_cast<std::size_t>(kp.level)];
    double scale = std::pow(pyramid_factor, static_cast<double>(kp.level));
    int cx = static_cast<int>(std::lround(kp.x / scale));
    int cy = static_cast<int>(std::lround(kp.y / scale));
    if (cx < kBorderMargin || cy < kBorderMargin || cx > li.width - 1 - kBorderMargin ||
        cy > li.height - 1 - kBorderMargin)
      continue;  // border rule

    double ca = std::cos(kp.angle), sa = std::sin(kp.angle);
    BinaryDescriptor d;
    for (int i = 0; i < 256; ++i) {
      const auto& p = pairs[static_cast<std::size_t>(i)];
      int ax = static_cast<int>(std::lround(ca * p.x1 - sa * p.y1));
      int ay = static_cast<int>(std::lround(sa * p.x1 + ca * p.y1));
      int bx = static_cast<int>(std::lround(ca * p.x2 - sa * p.y2));
      int by = static_cast<int>(std::lround(sa * p.x2 + ca * p.y2));
      if (li.at_clamped(cx + ax, cy + ay) < li.at_clamped(cx + bx, cy + by)) d.set(i);
    }
    fs.keypoints.push_back(kp);
    fs.descriptors.push_back(d);
  }
  return fs;
}

FeatureSet extract(const GrayImage& img, const FeatureConfig& cfg) {
  if (cfg.max_features < 1) throw ConfigError("max_features must be >= 1");
  const GrayImage* src = &img;
  GrayImage resized;
  if (img.width != cfg.match_width || img.height != cfg.match_height) {
    resized = resize_bilinear(img, cfg.match_width, cfg.match_height);
    src = &resized;
  }
  auto kps = detect_keypoints(*src, cfg.fast_threshold, cfg.max_features, cfg.pyramid_levels,
                              cfg.pyramid_factor);
  return describe(*src, kps, cfg.pyramid_levels, cfg.pyramid_factor);
}

}  // namespace rptm
