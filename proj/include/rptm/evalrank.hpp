#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rptm/common.hpp"

namespace rptm {

/// Per-query ranked gallery with same-id flags.
struct RankingResult {
  std::size_t query_count = 0;
  std::vector<std::vector<int>> order;          // gallery indices, best first
  std::vector<std::vector<bool>> is_match;      // parallel to order
};

/// Euclidean q x g distance matrix.
Eigen::MatrixXd pairwise_distances(const std::vector<Eigen::VectorXd>& queries,
                                   const std::vector<Eigen::VectorXd>& gallery);

/// Sorts each query's gallery ascending by distance (ties to the lower
/// index) and flags same-id entries. `exclude`, when non-null, removes
/// gallery entries per query (junk hook); shape q x g.
RankingResult rank(const Eigen::MatrixXd& dists, const std::vector<std::string>& query_ids,
                   const std::vector<std::string>& gallery_ids,
                   const std::vector<std::vector<bool>>* exclude = nullptr);

/// Fraction of queries with at least one match in the top k.
double cmc(const RankingResult& result, int k);

double mean_average_precision(const RankingResult& result);

/// k-reciprocal re-ranking over the joint query+gallery distance matrix:
/// reciprocal sets R(p, k1) with half-k1 expansion, Gaussian-kernel sparse
/// encoding, local query expansion over the top k2, Jaccard distance, and
/// the blend d* = eta * d + (1 - eta) * d_J. Rows/cols 0..num_query-1 are
/// the queries; returns the revised q x g matrix.
Eigen::MatrixXd k_reciprocal_rerank(const Eigen::MatrixXd& all_dists, std::size_t num_query,
                                    int k1, int k2, double eta);

/// Binary embedding store with "index,id,split" sidecar (split is
/// "query" or "gallery").
void save_embeddings(const std::string& path, const std::string& sidecar_path,
                     const std::vector<Eigen::VectorXd>& vectors,
                     const std::vector<std::string>& ids, const std::vector<std::string>& splits);

struct EmbeddingFile {
  std::vector<Eigen::VectorXd> vectors;
  std::vector<std::string> ids;
  std::vector<std::string> splits;
};

EmbeddingFile load_embeddings(const std::string& path, const std::string& sidecar_path);

/// CSV "metric,value" rows.
void write_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path);

}  // namespace rptm
