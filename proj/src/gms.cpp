#include "rptm/gms.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace rptm {

std::size_t MatchSet::accepted_count() const {
  return static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), true));
}

int hamming_distance(const BinaryDescriptor& a, const BinaryDescriptor& b) {
  int d = 0;
  for (int i = 0; i < 4; ++i)
    d += __builtin_popcountll(a.words[static_cast<std::size_t>(i)] ^ b.words[static_cast<std::size_t>(i)]);
  return d;
}

std::vector<Match> match_brute_force(const FeatureSet& a, const FeatureSet& b) {
  std::vector<Match> out;
  if (a.empty() || b.empty()) return out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    int best = 257, best_j = -1;
    for (std::size_t j = 0; j < b.size(); ++j) {
      int d = hamming_distance(a.descriptors[i], b.descriptors[j]);
      if (d < best) {  // strict: ties keep the lowest train index
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    out.push_back({static_cast<int>(i), best_j, best});
  }
  return out;
}

namespace {

// 3x3 neighborhood offsets, row-major; index 4 is the center cell.
constexpr int kNbr[9][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {0, 0},
                            {1, 0},   {-1, 1}, {0, 1},  {1, 1}};
// Ring positions of the 8 outer cells, clockwise.
constexpr int kRing[8] = {0, 1, 2, 5, 8, 7, 6, 3};

// rotation r maps neighborhood slot k of the A cell onto slot
// kRotated[r][k] of the B cell; the center stays fixed.
struct RotationTable {
  int map[8][9];
};

RotationTable make_rotations() {
  RotationTable t{};
  for (int r = 0; r < 8; ++r) {
    for (int k = 0; k < 9; ++k) t.map[r][k] = k;
    for (int i = 0; i < 8; ++i) t.map[r][kRing[i]] = kRing[(i + r) % 8];
  }
  return t;
}

// Cell index under one of the 4 half-cell grid shifts (A grid only),
// or -1 when the shifted coordinate leaves the grid.
int cell_index(double x, double y, int w, int h, int grid, int shift) {
  double gx = x * grid / w + ((shift & 1) ? 0.5 : 0.0);
  double gy = y * grid / h + ((shift & 2) ? 0.5 : 0.0);
  int cx = static_cast<int>(std::floor(gx));
  int cy = static_cast<int>(std::floor(gy));
  if (cx < 0 || cy < 0 || cx >= grid || cy >= grid) return -1;
  return cy * grid + cx;
}

}  // namespace

MatchSet gms_verify(const std::vector<Match>& matches, const FeatureSet& a, const FeatureSet& b,
                    int grid_size, double alpha, bool with_rotation, bool with_shifts) {
  if (grid_size < 1) throw ConfigError("gms grid_size must be >= 1");
  if (!(alpha > 0)) throw ConfigError("gms alpha must be > 0");

  MatchSet out;
  out.matches = matches;
  out.accepted.assign(matches.size(), false);
  out.grid_size = grid_size;
  if (matches.empty()) return out;

  static const RotationTable rot = make_rotations();
  const int g = grid_size;
  const int cells = g * g;
  const int rotations = with_rotation ? 8 : 1;
  const int shifts = with_shifts ? 4 : 1;

  std::vector<std::int64_t> match_cell(matches.size());
  std::vector<int> cell_a_count(static_cast<std::size_t>(cells));
  std::unordered_map<std::int64_t, int> pair_count;

  for (int shift = 0; shift < shifts; ++shift) {
    std::fill(cell_a_count.begin(), cell_a_count.end(), 0);
    pair_count.clear();
    for (std::size_t m = 0; m < matches.size(); ++m) {
      const auto& kq = a.keypoints[static_cast<std::size_t>(matches[m].query_idx)];
      const auto& kt = b.keypoints[static_cast<std::size_t>(matches[m].train_idx)];
      int ca = cell_index(kq.x, kq.y, a.width, a.height, g, shift);
      int cb = cell_index(kt.x, kt.y, b.width, b.height, g, 0);
      if (ca < 0 || cb < 0) {
        match_cell[m] = -1;
        continue;
      }
      match_cell[m] = static_cast<std::int64_t>(ca) * cells + cb;
      ++cell_a_count[static_cast<std::size_t>(ca)];
      ++pair_count[match_cell[m]];
    }

    std::unordered_map<std::int64_t, bool> pair_verdict;
    pair_verdict.reserve(pair_count.size());
    for (const auto& [key, n] : pair_count) {
      int ca = static_cast<int>(key / cells);
      int cb = static_cast<int>(key % cells);
      int ax = ca % g, ay = ca / g;
      int bx = cb % g, by = cb / g;

      // neighborhood cell ids (or -1 off-grid) for both endpoints
      int na[9], nb[9];
      int nbhd_total = 0;
      for (int k = 0; k < 9; ++k) {
        int x = ax + kNbr[k][0], y = ay + kNbr[k][1];
        na[k] = (x >= 0 && y >= 0 && x < g && y < g) ? y * g + x : -1;
        if (na[k] >= 0) nbhd_total += cell_a_count[static_cast<std::size_t>(na[k])];
        x = bx + kNbr[k][0];
        y = by + kNbr[k][1];
        nb[k] = (x >= 0 && y >= 0 && x < g && y < g) ? y * g + x : -1;
      }

      int support = 0;
      for (int r = 0; r < rotations; ++r) {
        int s = 0;
        for (int k = 0; k < 9; ++k) {
          int cbk = rot.map[r][k];
          if (na[k] < 0 || nb[cbk] < 0) continue;
          auto it = pair_count.find(static_cast<std::int64_t>(na[k]) * cells + nb[cbk]);
          if (it != pair_count.end()) s += it->second;
        }
        support = std::max(support, s);
      }

      double n_avg = nbhd_total / 9.0;
      pair_verdict[key] = support > alpha * std::sqrt(n_avg);
    }

    for (std::size_t m = 0; m < matches.size(); ++m) {
      if (match_cell[m] < 0 || out.accepted[m]) continue;
      if (pair_verdict[match_cell[m]]) out.accepted[m] = true;
    }
  }
  return out;
}

int match_count(const FeatureSet& a, const FeatureSet& b, const GmsConfig& cfg) {
  if (a.empty() || b.empty()) return 0;
  auto matches = match_brute_force(a, b);
  auto verified = gms_verify(matches, a, b, cfg.grid_size, cfg.alpha, cfg.with_rotation, cfg.with_shifts);
  return static_cast<int>(verified.accepted_count());
}

}  // namespace rptm
