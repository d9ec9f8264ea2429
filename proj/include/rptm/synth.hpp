#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rptm/relational.hpp"

namespace rptm {

/// Pose-grouped image dataset: poses of one id render disjoint regions of
/// that id's texture, so cross-pose pairs share no source pixels.
struct SynthSpec {
  int n_ids = 2;
  int poses_per_id = 2;
  int images_per_pose = 3;
  int image_size = 224;
  double noise_sigma = 2.0;
  std::uint64_t seed = 5;
};

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<int> pose_labels;  // parallel to manifest entries
};

/// Writes PGM images plus manifest.csv and poses.csv into out_dir.
/// Bit-reproducible from (spec, seed); per-image RNG streams, so parallel
/// generation order never changes the output.
SynthDataset generate_dataset(const SynthSpec& spec, const std::string& out_dir);

/// Gaussian clusters, one per (id, pose). Pose offsets are shared across
/// ids (same pose slot points the same way), modeling pose dominating
/// appearance.
struct ClusterSpec {
  int n_ids = 10;
  int poses_per_id = 2;
  int instances_per_pose = 10;
  int dim = 16;
  double id_scale = 4.0;
  double pose_scale = 10.0;
  double noise_sigma = 0.5;
};

struct EmbeddingSet {
  std::vector<Eigen::VectorXd> vectors;
  DatasetManifest manifest;      // pseudo-paths "vec://NNNN"
  std::vector<int> labels;       // dense id labels
  std::vector<int> pose_labels;
};

EmbeddingSet generate_embeddings(const ClusterSpec& spec, std::uint64_t seed);

/// Ground-truth-shaped relational matrix for embedding-level runs: strong
/// counts within (id, pose), mostly-zero across poses, zero across ids.
RelationalMatrix synthetic_relation_matrix(const DatasetManifest& manifest,
                                           const std::vector<int>& pose_labels, std::uint64_t seed);

/// CSV "index,pose".
void write_pose_csv(const std::vector<int>& pose_labels, const std::string& path);
std::vector<int> load_pose_csv(const std::string& path);

}  // namespace rptm
