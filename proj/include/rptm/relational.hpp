#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rptm/gms.hpp"

namespace rptm {

/// Ordered list of (image path, identity label); the row index is the
/// canonical image index used everywhere downstream.
struct DatasetManifest {
  struct Entry {
    std::string path;
    std::string id;
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries;

  static DatasetManifest load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  /// Checks path uniqueness and that every id has at least 2 instances.
  void validate() const;

  /// Dense label per image, ids numbered in first-appearance order.
  std::vector<int> label_indices() const;
  std::vector<std::string> id_names() const;

  /// 64-bit content hash over (path, id) rows; stored in derived files.
  std::uint64_t hash() const;

  std::size_t size() const { return entries.size(); }
};

enum class TauPolicy { Min, Mean, Max };

TauPolicy tau_policy_from_string(const std::string& s);
std::string to_string(TauPolicy p);

/// Per-anchor threshold over one matrix row: Mean -> arithmetic mean of the
/// nonzero entries, Max -> their maximum, Min -> the fixed constant
/// min_constant (default 10). Empty nonzero set -> nullopt.
std::optional<double> tau(std::span<const std::uint32_t> row, TauPolicy policy,
                          double min_constant = 10.0);

/// Symmetric m x m verified-match counts, zero on the diagonal and across
/// identities.
struct RelationalMatrix {
  std::uint32_t m = 0;
  std::uint64_t manifest_hash = 0;
  std::vector<std::uint32_t> counts;  // row-major, m*m

  std::uint32_t at(std::size_t i, std::size_t j) const { return counts[i * m + j]; }
  std::uint32_t& at(std::size_t i, std::size_t j) { return counts[i * m + j]; }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return {counts.data() + i * m, static_cast<std::size_t>(m)};
  }
};

/// Extracts features once per image, then fills counts[i][j] =
/// max(match_count(i->j), match_count(j->i)) for same-id pairs.
RelationalMatrix build_relational_matrix(const DatasetManifest& manifest, const FeatureConfig& fcfg,
                                         const GmsConfig& gcfg, int threads = 0);

void save_matrix(const RelationalMatrix& mx, const std::string& path);
RelationalMatrix load_matrix(const std::string& path);

}  // namespace rptm
