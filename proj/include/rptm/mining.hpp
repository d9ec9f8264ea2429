#pragma once

#include <Eigen/Core>
#include <optional>
#include <random>
#include <vector>

#include "rptm/relational.hpp"

namespace rptm {

/// Global image indices; anchor/positive share an id, the negative does not.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  bool operator==(const Triplet&) const = default;
};

/// P x K sample of image indices; embeddings are filled by the learner
/// (empty until then), parallel to indices.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<Eigen::VectorXd> embeddings;

  bool has_embeddings() const { return embeddings.size() == indices.size() && !indices.empty(); }
};

enum class PositiveSource { Relational, RandomSameId };

PositiveSource positive_source_from_string(const std::string& s);
std::string to_string(PositiveSource s);

struct MiningConfig {
  TauPolicy tau_policy = TauPolicy::Mean;
  double tau_min_matches = 10.0;  // the RPTM_min constant
  PositiveSource positive_source = PositiveSource::Relational;
};

/// 1 iff counts[i][j] strictly exceeds tau_value.
int relational_indicator(const RelationalMatrix& mx, std::size_t i, std::size_t j, double tau_value);

/// Among same-id candidates with a nonzero count, the index whose count is
/// closest to tau(row, policy); ties to the lower index; nullopt when the
/// anchor's nonzero set is empty.
std::optional<std::size_t> select_positive(const RelationalMatrix& mx, std::size_t anchor,
                                           TauPolicy policy, double tau_min = 10.0);

/// Ablation baseline: uniform same-id instance other than the anchor.
std::optional<std::size_t> select_positive_random(const std::vector<int>& labels, std::size_t anchor,
                                                  std::mt19937_64& rng);

/// Batch position of the different-id instance nearest the anchor in
/// embedding space; ties to the lower position.
std::size_t select_negative_batch_hard(const Batch& batch, const std::vector<int>& labels,
                                       std::size_t anchor_pos);

/// P distinct ids without replacement, then K instances per id (with
/// replacement only when the id has fewer than K). Deterministic in seed.
Batch sample_batch(const DatasetManifest& manifest, std::uint64_t seed, int P, int K);

/// One triplet per batch anchor: positive from the precomputed matrix over
/// the full training set, negative batch-hard. Anchors without a positive
/// are skipped.
std::vector<Triplet> mine_triplets(const Batch& batch, const std::vector<int>& labels,
                                   const RelationalMatrix& mx, TauPolicy policy,
                                   double tau_min = 10.0);

/// Same loop with random same-id positives (the non-relational baseline).
std::vector<Triplet> mine_triplets_random(const Batch& batch, const std::vector<int>& labels,
                                          std::mt19937_64& rng);

/// CSV "anchor,positive,negative" with header.
void write_triplets_csv(const std::vector<Triplet>& triplets, const std::string& path);

}  // namespace rptm
