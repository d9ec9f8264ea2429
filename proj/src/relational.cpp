#include "rptm/relational.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "rptm/binio.hpp"

namespace rptm {

namespace {
std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}
}  // namespace

DatasetManifest DatasetManifest::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "path,id")
    throw FormatError("manifest must start with header 'path,id': " + path);
  DatasetManifest m;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto comma = line.rfind(',');  // ids carry no commas; paths may
    if (comma == std::string::npos || comma == 0 || comma + 1 == line.size())
      throw FormatError("bad manifest row " + std::to_string(lineno) + " in " + path);
    m.entries.push_back({line.substr(0, comma), line.substr(comma + 1)});
  }
  return m;
}

void DatasetManifest::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "path,id\n";
  for (const auto& e : entries) out << e.path << "," << e.id << "\n";
  if (!out) throw IoError("short write: " + path);
}

void DatasetManifest::validate() const {
  std::set<std::string> paths;
  std::map<std::string, int> per_id;
  for (const auto& e : entries) {
    if (!paths.insert(e.path).second) throw ConfigError("duplicate path in manifest: " + e.path);
    ++per_id[e.id];
  }
  for (const auto& [id, n] : per_id)
    if (n < 2) throw ConfigError("id '" + id + "' has fewer than 2 instances");
}

std::vector<int> DatasetManifest::label_indices() const {
  std::vector<int> labels;
  labels.reserve(entries.size());
  std::map<std::string, int> seen;
  for (const auto& e : entries) {
    auto [it, inserted] = seen.emplace(e.id, static_cast<int>(seen.size()));
    labels.push_back(it->second);
  }
  return labels;
}

std::vector<std::string> DatasetManifest::id_names() const {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& e : entries)
    if (seen.insert(e.id).second) names.push_back(e.id);
  return names;
}

std::uint64_t DatasetManifest::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& e : entries) {
    h = fnv1a64(e.path, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(e.id, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

TauPolicy tau_policy_from_string(const std::string& s) {
  if (s == "min") return TauPolicy::Min;
  if (s == "mean") return TauPolicy::Mean;
  if (s == "max") return TauPolicy::Max;
  throw ConfigError("unknown tau policy '" + s + "' (expected min, mean or max)");
}

std::string to_string(TauPolicy p) {
  switch (p) {
    case TauPolicy::Min: return "min";
    case TauPolicy::Mean: return "mean";
    case TauPolicy::Max: return "max";
  }
  return "mean";
}

std::optional<double> tau(std::span<const std::uint32_t> row, TauPolicy policy, double min_constant) {
  std::uint64_t sum = 0;
  std::uint32_t maxv = 0;
  std::size_t nonzero = 0;
  for (std::uint32_t v : row) {
    if (v == 0) continue;
    ++nonzero;
    sum += v;
    maxv = std::max(maxv, v);
  }
  if (nonzero == 0) return std::nullopt;
  switch (policy) {
    case TauPolicy::Min: return min_constant;
    case TauPolicy::Mean: return static_cast<double>(sum) / static_cast<double>(nonzero);
    case TauPolicy::Max: return static_cast<double>(maxv);
  }
  return std::nullopt;
}

RelationalMatrix build_relational_matrix(const DatasetManifest& manifest, const FeatureConfig& fcfg,
                                         const GmsConfig& gcfg, int threads) {
  manifest.validate();
  const std::size_t m = manifest.size();

  // extract each image exactly once
  std::vector<FeatureSet> features(m);
  std::vector<std::string> errors(m);
  parallel_for(m, threads, [&](std::size_t i) {
    try {
      features[i] = extract(load_image(manifest.entries[i].path), fcfg);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < m; ++i)
    if (!errors[i].empty())
      throw IoError("image " + std::to_string(i) + " (" + manifest.entries[i].path + "): " + errors[i]);

  RelationalMatrix mx;
  mx.m = static_cast<std::uint32_t>(m);
  mx.manifest_hash = manifest.hash();
  mx.counts.assign(m * m, 0);

  auto labels = manifest.label_indices();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (labels[i] == labels[j]) pairs.emplace_back(i, j);

  // each task owns the disjoint (i,j)/(j,i) slots
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    auto [i, j] = pairs[p];
    int c = std::max(match_count(features[i], features[j], gcfg),
                     match_count(features[j], features[i], gcfg));
    mx.at(i, j) = static_cast<std::uint32_t>(c);
    mx.at(j, i) = static_cast<std::uint32_t>(c);
  });
  return mx;
}

void save_matrix(const RelationalMatrix& mx, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_bytes(out, "RPTM", 4);
  write_u16(out, 1);
  write_u32(out, mx.m);
  write_u64(out, mx.manifest_hash);
  for (std::uint32_t v : mx.counts) write_u32(out, v);
  if (!out) throw IoError("short write: " + path);
}

RelationalMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open matrix: " + path);
  expect_magic(in, "RPTM", "matrix file");
  std::uint16_t version = read_u16(in, "matrix version");
  if (version != 1) throw CorruptError("unsupported matrix version " + std::to_string(version));
  RelationalMatrix mx;
  mx.m = read_u32(in, "matrix size");
  mx.manifest_hash = read_u64(in, "manifest hash");
  const std::size_t n = static_cast<std::size_t>(mx.m) * mx.m;
  mx.counts.resize(n);
  for (std::size_t i = 0; i < n; ++i) mx.counts[i] = read_u32(in, "matrix payload");
  if (in.get() != std::ifstream::traits_type::eof()) throw CorruptError("trailing bytes in " + path);
  for (std::size_t i = 0; i < mx.m; ++i) {
    if (mx.at(i, i) != 0) throw CorruptError("nonzero diagonal in " + path);
    for (std::size_t j = i + 1; j < mx.m; ++j)
      if (mx.at(i, j) != mx.at(j, i)) throw CorruptError("asymmetric counts in " + path);
  }
  return mx;
}

}  // namespace rptm
