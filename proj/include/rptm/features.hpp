#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rptm/image.hpp"

namespace rptm {

/// Oriented corner. Coordinates are rescaled to level-0 pixels; `level`
/// records the pyramid level the corner was found at.
struct Keypoint {
  double x = 0;
  double y = 0;
  double response = 0;  // Harris corner score
  double angle = 0;     // radians in [0, 2pi)
  int level = 0;
};

/// 256-bit binary descriptor packed into four 64-bit words.
struct BinaryDescriptor {
  std::array<std::uint64_t, 4> words{};

  bool get(int bit) const { return (words[bit >> 6] >> (bit & 63)) & 1u; }
  void set(int bit) { words[bit >> 6] |= std::uint64_t{1} << (bit & 63); }
  bool operator==(const BinaryDescriptor&) const = default;
};

/// Parallel keypoint/descriptor arrays for one image.
struct FeatureSet {
  std::vector<Keypoint> keypoints;
  std::vector<BinaryDescriptor> descriptors;
  int width = 0;   // dims of the image the coordinates live in
  int height = 0;

  std::size_t size() const { return keypoints.size(); }
  bool empty() const { return keypoints.empty(); }
};

struct FeatureConfig {
  int max_features = 10000;
  int fast_threshold = 20;
  int pyramid_levels = 4;
  double pyramid_factor = 1.2;
  int match_width = 224;   // extraction resizes to this size first
  int match_height = 224;
};

/// One intensity-comparison pair of the descriptor layout, offsets in [-15, 15].
struct PatternPair {
  int x1, y1, x2, y2;
};

/// The fixed 256-pair comparison layout (seeded, stable across builds).
const std::array<PatternPair, 256>& comparison_pairs();

/// Writes the layout as 256 lines of "x1 y1 x2 y2".
void write_pair_table(const std::string& path);
std::array<PatternPair, 256> load_pair_table(const std::string& path);

/// FAST-9 corners over all pyramid levels, Harris-scored, 3x3 NMS,
/// top max_features kept, intensity-centroid orientation assigned.
/// Output sorted by descending response, ties by (y, x, level).
std::vector<Keypoint> detect_keypoints(const GrayImage& img, int fast_threshold, int max_features,
                                       int pyramid_levels = 4, double pyramid_factor = 1.2);

/// Steered 256-bit descriptors. Keypoints closer than 16 px to the border
/// at their level are dropped; arrays stay parallel.
FeatureSet describe(const GrayImage& img, const std::vector<Keypoint>& kps,
                    int pyramid_levels = 4, double pyramid_factor = 1.2);

/// resize to cfg.match_* -> detect -> describe. Pure function of (img, cfg).
FeatureSet extract(const GrayImage& img, const FeatureConfig& cfg = {});

}  // namespace rptm
