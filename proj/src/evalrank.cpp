#include "rptm/evalrank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rptm/binio.hpp"

namespace rptm {

Eigen::MatrixXd pairwise_distances(const std::vector<Eigen::VectorXd>& queries,
                                   const std::vector<Eigen::VectorXd>& gallery) {
  Eigen::MatrixXd d(queries.size(), gallery.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      if (queries[i].size() != gallery[j].size())
        throw DimensionError("pairwise_distances: vector dimensions differ");
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (queries[i] - gallery[j]).norm();
    }
  }
  return d;
}

RankingResult rank(const Eigen::MatrixXd& dists, const std::vector<std::string>& query_ids,
                   const std::vector<std::string>& gallery_ids,
                   const std::vector<std::vector<bool>>* exclude) {
  if (static_cast<std::size_t>(dists.rows()) != query_ids.size() ||
      static_cast<std::size_t>(dists.cols()) != gallery_ids.size())
    throw DimensionError("rank: id lists do not match the distance matrix");

  RankingResult r;
  r.query_count = query_ids.size();
  r.order.resize(r.query_count);
  r.is_match.resize(r.query_count);
  for (std::size_t q = 0; q < r.query_count; ++q) {
    std::vector<int> idx;
    idx.reserve(gallery_ids.size());
    for (std::size_t g = 0; g < gallery_ids.size(); ++g) {
      if (exclude && (*exclude)[q][g]) continue;
      idx.push_back(static_cast<int>(g));
    }
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      double da = dists(static_cast<Eigen::Index>(q), a);
      double db = dists(static_cast<Eigen::Index>(q), b);
      if (da != db) return da < db;
      return a < b;
    });
    r.order[q] = idx;
    r.is_match[q].reserve(idx.size());
    for (int g : idx) r.is_match[q].push_back(gallery_ids[static_cast<std::size_t>(g)] == query_ids[q]);
  }
  return r;
}

namespace {

void require_matches(const RankingResult& result) {
  for (std::size_t q = 0; q < result.query_count; ++q)
    if (std::find(result.is_match[q].begin(), result.is_match[q].end(), true) ==
        result.is_match[q].end())
      throw ConfigError("query " + std::to_string(q) +
                        " has no gallery match; filter such queries upstream");
}

}  // namespace

double cmc(const RankingResult& result, int k) {
  if (k < 1) throw ConfigError("cmc rank must be >= 1");
  require_matches(result);
  if (result.query_count == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < result.query_count; ++q) {
    std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), result.is_match[q].size());
    for (std::size_t i = 0; i < top; ++i) {
      if (result.is_match[q][i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(result.query_count);
}

double mean_average_precision(const RankingResult& result) {
  require_matches(result);
  if (result.query_count == 0) return 0.0;
  double sum_ap = 0;
  for (std::size_t q = 0; q < result.query_count; ++q) {
    std::size_t seen = 0;
    double ap = 0;
    for (std::size_t i = 0; i < result.is_match[q].size(); ++i) {
      if (!result.is_match[q][i]) continue;
      ++seen;
      ap += static_cast<double>(seen) / static_cast<double>(i + 1);
    }
    sum_ap += ap / static_cast<double>(seen);
  }
  return sum_ap / static_cast<double>(result.query_count);
}

namespace {

// ascending-by-distance neighbor order for every point, ties to lower index
std::vector<std::vector<int>> initial_ranks(const Eigen::MatrixXd& d) {
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<std::vector<int>> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      double da = d(static_cast<Eigen::Index>(i), a);
      double db = d(static_cast<Eigen::Index>(i), b);
      if (da != db) return da < db;
      return a < b;
    });
    ranks[i] = std::move(idx);
  }
  return ranks;
}

// k-reciprocal set: j is in R(i, k) iff both appear in each other's top
// k+1 (self included).
std::vector<int> reciprocal_set(const std::vector<std::vector<int>>& ranks, int i, int k) {
  const int n = static_cast<int>(ranks.size());
  const int take = std::min(k + 1, n);
  std::vector<int> out;
  for (int a = 0; a < take; ++a) {
    int j = ranks[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
    for (int b = 0; b < take; ++b) {
      if (ranks[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] == i) {
        out.push_back(j);
        break;
      }
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd k_reciprocal_rerank(const Eigen::MatrixXd& all_dists, std::size_t num_query,
                                    int k1, int k2, double eta) {
  if (all_dists.rows() != all_dists.cols()) throw DimensionError("rerank needs a square matrix");
  const auto n = static_cast<std::size_t>(all_dists.rows());
  if (num_query == 0 || num_query >= n) throw ConfigError("rerank: bad query count");
  if (k2 < 1 || k1 < k2) throw ConfigError("rerank requires k1 >= k2 >= 1");
  if (eta < 0 || eta > 1) throw ConfigError("rerank requires eta in [0, 1]");

  auto ranks = initial_ranks(all_dists);

  // expanded reciprocal sets R*(i, k1)
  std::vector<std::vector<int>> rstar(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> r = reciprocal_set(ranks, static_cast<int>(i), k1);
    std::vector<bool> in_r(n, false);
    for (int j : r) in_r[static_cast<std::size_t>(j)] = true;
    std::vector<int> expanded = r;
    const int half = static_cast<int>(std::lround(k1 / 2.0));
    for (int j : r) {
      std::vector<int> rj = reciprocal_set(ranks, j, half);
      std::size_t common = 0;
      for (int c : rj)
        if (in_r[static_cast<std::size_t>(c)]) ++common;
      if (3 * common >= 2 * rj.size()) expanded.insert(expanded.end(), rj.begin(), rj.end());
    }
    std::sort(expanded.begin(), expanded.end());
    expanded.erase(std::unique(expanded.begin(), expanded.end()), expanded.end());
    rstar[i] = std::move(expanded);
  }

  // Gaussian-kernel sparse encoding, rows normalized to sum 1
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (int j : rstar[i]) {
      double w = std::exp(-all_dists(static_cast<Eigen::Index>(i), j));
      V(static_cast<Eigen::Index>(i), j) = w;
      sum += w;
    }
    if (sum > 0) V.row(static_cast<Eigen::Index>(i)) /= sum;
  }

  // local query expansion: average the encodings of the top-k2 neighbors
  Eigen::MatrixXd Vq = Eigen::MatrixXd::Zero(V.rows(), V.cols());
  const int take = std::min<int>(k2, static_cast<int>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < take; ++a) Vq.row(static_cast<Eigen::Index>(i)) += V.row(ranks[i][static_cast<std::size_t>(a)]);
    Vq.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(take);
  }

  const std::size_t num_gallery = n - num_query;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(num_query), static_cast<Eigen::Index>(num_gallery));
  for (std::size_t q = 0; q < num_query; ++q) {
    for (std::size_t g = 0; g < num_gallery; ++g) {
      auto gi = static_cast<Eigen::Index>(num_query + g);
      double mins = 0, maxs = 0;
      for (std::size_t j = 0; j < n; ++j) {
        double a = Vq(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j));
        double b = Vq(gi, static_cast<Eigen::Index>(j));
        mins += std::min(a, b);
        maxs += std::max(a, b);
      }
      double jaccard = maxs > 0 ? 1.0 - mins / maxs : 1.0;
      out(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(g)) =
          eta * all_dists(static_cast<Eigen::Index>(q), gi) + (1.0 - eta) * jaccard;
    }
  }
  return out;
}

void save_embeddings(const std::string& path, const std::string& sidecar_path,
                     const std::vector<Eigen::VectorXd>& vectors,
                     const std::vector<std::string>& ids, const std::vector<std::string>& splits) {
  if (vectors.size() != ids.size() || vectors.size() != splits.size())
    throw DimensionError("save_embeddings: parallel arrays differ in length");
  const std::uint32_t dim = vectors.empty() ? 0 : static_cast<std::uint32_t>(vectors[0].size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_bytes(out, "RPTMEMB", 7);
  write_u16(out, 1);
  write_u32(out, static_cast<std::uint32_t>(vectors.size()));
  write_u32(out, dim);
  for (const auto& v : vectors) {
    if (static_cast<std::uint32_t>(v.size()) != dim)
      throw DimensionError("save_embeddings: inconsistent vector dimensions");
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f32(out, static_cast<float>(v(i)));
  }
  if (!out) throw IoError("short write: " + path);

  std::ofstream side(sidecar_path);
  if (!side) throw IoError("cannot open for writing: " + sidecar_path);
  side << "index,id,split\n";
  for (std::size_t i = 0; i < ids.size(); ++i) side << i << "," << ids[i] << "," << splits[i] << "\n";
  if (!side) throw IoError("short write: " + sidecar_path);
}

EmbeddingFile load_embeddings(const std::string& path, const std::string& sidecar_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings: " + path);
  expect_magic(in, "RPTMEMB", "embedding file");
  std::uint16_t version = read_u16(in, "embedding version");
  if (version != 1) throw CorruptError("unsupported embedding version " + std::to_string(version));
  std::uint32_t count = read_u32(in, "embedding count");
  std::uint32_t dim = read_u32(in, "embedding dim");
  EmbeddingFile f;
  f.vectors.resize(count);
  for (auto& v : f.vectors) {
    v.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) v(static_cast<Eigen::Index>(i)) = read_f32(in, "embedding payload");
  }
  if (in.get() != std::ifstream::traits_type::eof()) throw CorruptError("trailing bytes in " + path);

  std::ifstream side(sidecar_path);
  if (!side) throw IoError("cannot open sidecar: " + sidecar_path);
  std::string line;
  if (!std::getline(side, line) || (line != "index,id,split" && line != "index,id,split\r"))
    throw FormatError("sidecar must start with header 'index,id,split'");
  while (std::getline(side, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto c1 = line.find(',');
    auto c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) throw FormatError("bad sidecar row: " + line);
    f.ids.push_back(line.substr(c1 + 1, c2 - c1 - 1));
    std::string split = line.substr(c2 + 1);
    if (split != "query" && split != "gallery") throw FormatError("bad split value: " + split);
    f.splits.push_back(split);
  }
  if (f.ids.size() != f.vectors.size()) throw CorruptError("sidecar row count mismatch");
  return f;
}

void write_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "metric,value\n";
  char buf[64];
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out << name << "," << buf << "\n";
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace rptm
