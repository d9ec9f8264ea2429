#include "rptm/mining.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace rptm {

PositiveSource positive_source_from_string(const std::string& s) {
  if (s == "relational") return PositiveSource::Relational;
  if (s == "random") return PositiveSource::RandomSameId;
  throw ConfigError("unknown positive source '" + s + "' (expected relational or random)");
}

std::string to_string(PositiveSource s) {
  return s == PositiveSource::Relational ? "relational" : "random";
}

int relational_indicator(const RelationalMatrix& mx, std::size_t i, std::size_t j, double tau_value) {
  if (i >= mx.m || j >= mx.m) throw IndexError("relational_indicator index out of range");
  return mx.at(i, j) > tau_value ? 1 : 0;
}

std::optional<std::size_t> select_positive(const RelationalMatrix& mx, std::size_t anchor,
                                           TauPolicy policy, double tau_min) {
  if (anchor >= mx.m) throw IndexError("select_positive anchor out of range");
  auto row = mx.row(anchor);
  auto t = tau(row, policy, tau_min);
  if (!t) return std::nullopt;
  std::optional<std::size_t> best;
  double best_gap = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] == 0) continue;  // nonzero counts imply a shared id
    double gap = std::abs(static_cast<double>(row[j]) - *t);
    if (!best || gap < best_gap) {
      best = j;
      best_gap = gap;
    }
  }
  return best;
}

std::optional<std::size_t> select_positive_random(const std::vector<int>& labels, std::size_t anchor,
                                                  std::mt19937_64& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (j != anchor && labels[j] == labels[anchor]) candidates.push_back(j);
  if (candidates.empty()) return std::nullopt;
  return candidates[uniform_below(rng, candidates.size())];
}

std::size_t select_negative_batch_hard(const Batch& batch, const std::vector<int>& labels,
                                       std::size_t anchor_pos) {
  if (!batch.has_embeddings()) throw ConfigError("batch embeddings missing");
  const int anchor_label = labels[batch.indices[anchor_pos]];
  std::optional<std::size_t> best;
  double best_dist = 0;
  for (std::size_t p = 0; p < batch.indices.size(); ++p) {
    if (labels[batch.indices[p]] == anchor_label) continue;
    double d = (batch.embeddings[anchor_pos] - batch.embeddings[p]).norm();
    if (!best || d < best_dist) {
      best = p;
      best_dist = d;
    }
  }
  if (!best) throw NoNegativeError("batch contains no instance with a different id");
  return *best;
}

Batch sample_batch(const DatasetManifest& manifest, std::uint64_t seed, int P, int K) {
  if (P < 1) throw ConfigError("P must be >= 1");
  if (K < 2) throw ConfigError("K must be >= 2");

  // instances grouped by id, ids in first-appearance order
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    auto [it, inserted] = group_of.emplace(manifest.entries[i].id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  if (groups.size() < static_cast<std::size_t>(P))
    throw ConfigError("manifest has " + std::to_string(groups.size()) + " ids, need P=" + std::to_string(P));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> id_order(groups.size());
  for (std::size_t i = 0; i < id_order.size(); ++i) id_order[i] = i;
  for (int i = 0; i < P; ++i) {  // partial Fisher-Yates
    std::size_t j = i + uniform_below(rng, id_order.size() - static_cast<std::size_t>(i));
    std::swap(id_order[static_cast<std::size_t>(i)], id_order[j]);
  }

  Batch batch;
  batch.indices.reserve(static_cast<std::size_t>(P) * static_cast<std::size_t>(K));
  for (int p = 0; p < P; ++p) {
    const auto& inst = groups[id_order[static_cast<std::size_t>(p)]];
    if (inst.size() >= static_cast<std::size_t>(K)) {
      std::vector<std::size_t> pool = inst;
      for (int k = 0; k < K; ++k) {
        std::size_t j = static_cast<std::size_t>(k) + uniform_below(rng, pool.size() - static_cast<std::size_t>(k));
        std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
        batch.indices.push_back(pool[static_cast<std::size_t>(k)]);
      }
    } else {
      for (int k = 0; k < K; ++k) batch.indices.push_back(inst[uniform_below(rng, inst.size())]);
    }
  }
  return batch;
}

std::vector<Triplet> mine_triplets(const Batch& batch, const std::vector<int>& labels,
                                   const RelationalMatrix& mx, TauPolicy policy, double tau_min) {
  if (!batch.has_embeddings()) throw ConfigError("batch embeddings missing");
  std::vector<Triplet> out;
  out.reserve(batch.indices.size());
  for (std::size_t p = 0; p < batch.indices.size(); ++p) {
    std::size_t anchor = batch.indices[p];
    auto positive = select_positive(mx, anchor, policy, tau_min);
    if (!positive) continue;
    std::size_t neg_pos = select_negative_batch_hard(batch, labels, p);
    out.push_back({anchor, *positive, batch.indices[neg_pos]});
  }
  return out;
}

std::vector<Triplet> mine_triplets_random(const Batch& batch, const std::vector<int>& labels,
                                          std::mt19937_64& rng) {
  if (!batch.has_embeddings()) throw ConfigError("batch embeddings missing");
  std::vector<Triplet> out;
  out.reserve(batch.indices.size());
  for (std::size_t p = 0; p < batch.indices.size(); ++p) {
    std::size_t anchor = batch.indices[p];
    auto positive = select_positive_random(labels, anchor, rng);
    if (!positive) continue;
    std::size_t neg_pos = select_negative_batch_hard(batch, labels, p);
    out.push_back({anchor, *positive, batch.indices[neg_pos]});
  }
  return out;
}

void write_triplets_csv(const std::vector<Triplet>& triplets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "anchor,positive,negative\n";
  for (const auto& t : triplets) out << t.anchor << "," << t.positive << "," << t.negative << "\n";
  if (!out) throw IoError("short write: " + path);
}

}  // namespace rptm
