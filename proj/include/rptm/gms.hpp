#pragma once

#include <cstdint>
#include <vector>

#include "rptm/features.hpp"

namespace rptm {

/// Nearest-neighbor candidate between two feature sets.
struct Match {
  int query_idx = 0;  // keypoint index in A
  int train_idx = 0;  // keypoint index in B
  int distance = 0;   // Hamming distance in bits
};

/// Candidates plus the per-match GMS verdict.
struct MatchSet {
  std::vector<Match> matches;
  std::vector<bool> accepted;  // parallel to matches
  int grid_size = 0;

  std::size_t accepted_count() const;
};

struct GmsConfig {
  int grid_size = 20;
  double alpha = 6.0;
  bool with_rotation = true;
  bool with_shifts = true;
};

/// popcount(a xor b); 0 iff equal, at most 256.
int hamming_distance(const BinaryDescriptor& a, const BinaryDescriptor& b);

/// For every keypoint of A, its single nearest neighbor in B by Hamming
/// distance (ties to the lowest train index). No ratio test.
std::vector<Match> match_brute_force(const FeatureSet& a, const FeatureSet& b);

/// Grid-based motion statistics verification. A match is accepted when the
/// support of its cell pair beats alpha * sqrt(n_avg) under any of the four
/// half-cell grid shifts (rotation orderings maximized per cell pair when
/// with_rotation is set).
MatchSet gms_verify(const std::vector<Match>& matches, const FeatureSet& a, const FeatureSet& b,
                    int grid_size = 20, double alpha = 6.0, bool with_rotation = true,
                    bool with_shifts = true);

/// Accepted-match count of match_brute_force -> gms_verify; 0 if either
/// input is empty.
int match_count(const FeatureSet& a, const FeatureSet& b, const GmsConfig& cfg = {});

}  // namespace rptm
