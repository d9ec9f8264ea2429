#include "rptm/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace rptm {

namespace {

constexpr int kTilePad = 16;  // gutter so jittered sampling stays inside one pose tile

struct Homography {
  Eigen::Matrix3d h;

  // maps output pixel -> source position
  std::pair<double, double> apply(double x, double y) const {
    Eigen::Vector3d p = h * Eigen::Vector3d(x, y, 1.0);
    return {p(0) / p(2), p(1) / p(2)};
  }
};

// 4-point homography: output corners -> source quad
Homography solve_homography(const std::array<std::pair<double, double>, 4>& from,
                            const std::array<std::pair<double, double>, 4>& to) {
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    double x = from[static_cast<std::size_t>(i)].first, y = from[static_cast<std::size_t>(i)].second;
    double u = to[static_cast<std::size_t>(i)].first, v = to[static_cast<std::size_t>(i)].second;
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  Eigen::Matrix<double, 8, 1> h = a.colPivHouseholderQr().solve(b);
  Homography out;
  out.h << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return out;
}

// Blocky noise plus random rectangles: high-contrast corners everywhere,
// stable under the small perspective jitter.
GrayImage make_texture(int width, int height, std::mt19937_64& rng) {
  GrayImage tex(width, height);
  const int block = 7;
  const int bw = (width + block - 1) / block;
  const int bh = (height + block - 1) / block;
  std::vector<std::uint8_t> blocks(static_cast<std::size_t>(bw) * bh);
  for (auto& v : blocks) v = static_cast<std::uint8_t>(uniform_below(rng, 256));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      tex.at(x, y) = blocks[static_cast<std::size_t>(y / block) * bw + static_cast<std::size_t>(x / block)];

  const int rects = (width * height) / 1500;
  for (int r = 0; r < rects; ++r) {
    int rw = 6 + static_cast<int>(uniform_below(rng, 19));
    int rh = 6 + static_cast<int>(uniform_below(rng, 19));
    int rx = static_cast<int>(uniform_below(rng, static_cast<std::size_t>(std::max(1, width - rw))));
    int ry = static_cast<int>(uniform_below(rng, static_cast<std::size_t>(std::max(1, height - rh))));
    auto v = static_cast<std::uint8_t>(uniform_below(rng, 256));
    for (int y = ry; y < ry + rh; ++y)
      for (int x = rx; x < rx + rw; ++x) tex.at(x, y) = v;
  }
  return tex;
}

double sample_bilinear_clamped(const GrayImage& img, double x, double y, int x_lo, int y_lo,
                               int x_hi, int y_hi) {
  x = std::clamp(x, static_cast<double>(x_lo), static_cast<double>(x_hi));
  y = std::clamp(y, static_cast<double>(y_lo), static_cast<double>(y_hi));
  int x0 = std::min(static_cast<int>(x), x_hi - 1);
  int y0 = std::min(static_cast<int>(y), y_hi - 1);
  x0 = std::max(x0, x_lo);
  y0 = std::max(y0, y_lo);
  double wx = x - x0, wy = y - y0;
  return (1 - wy) * ((1 - wx) * img.at(x0, y0) + wx * img.at(x0 + 1, y0)) +
         wy * ((1 - wx) * img.at(x0, y0 + 1) + wx * img.at(x0 + 1, y0 + 1));
}

}  // namespace

SynthDataset generate_dataset(const SynthSpec& spec, const std::string& out_dir) {
  if (spec.n_ids < 1 || spec.poses_per_id < 1 || spec.images_per_pose < 1 || spec.image_size < 32)
    throw ConfigError("bad synth spec (counts >= 1, image_size >= 32)");
  if (spec.noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  const int s = spec.image_size;
  const int tile = s + 2 * kTilePad;
  const double jitter = 0.03 * s;

  SynthDataset ds;
  std::size_t image_index = 0;
  for (int id = 0; id < spec.n_ids; ++id) {
    std::mt19937_64 tex_rng(mix_seed(spec.seed, 0x7E47, static_cast<std::uint64_t>(id)));
    GrayImage texture = make_texture(tile * spec.poses_per_id, tile, tex_rng);

    for (int pose = 0; pose < spec.poses_per_id; ++pose) {
      const int tx0 = pose * tile;  // this pose's tile; sampling never leaves it
      const std::array<std::pair<double, double>, 4> out_corners = {
          {{0, 0}, {s - 1.0, 0}, {s - 1.0, s - 1.0}, {0, s - 1.0}}};
      const std::array<std::pair<double, double>, 4> region_corners = {
          {{tx0 + kTilePad + 0.0, kTilePad + 0.0},
           {tx0 + kTilePad + s - 1.0, kTilePad + 0.0},
           {tx0 + kTilePad + s - 1.0, kTilePad + s - 1.0},
           {tx0 + kTilePad + 0.0, kTilePad + s - 1.0}}};

      for (int k = 0; k < spec.images_per_pose; ++k, ++image_index) {
        std::mt19937_64 rng(mix_seed(spec.seed, 0x1347, image_index));
        std::array<std::pair<double, double>, 4> quad = region_corners;
        for (auto& c : quad) {
          c.first += (2.0 * uniform_real01(rng) - 1.0) * jitter;
          c.second += (2.0 * uniform_real01(rng) - 1.0) * jitter;
        }
        Homography h = solve_homography(out_corners, quad);

        GrayImage img(s, s);
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            auto [sx, sy] = h.apply(x, y);
            double v = sample_bilinear_clamped(texture, sx, sy, tx0, 0, tx0 + tile - 1, tile - 1);
            if (spec.noise_sigma > 0) v += normal_draw(rng, 0.0, spec.noise_sigma);
            long r = std::lround(v);
            img.at(x, y) = static_cast<std::uint8_t>(std::clamp(r, 0l, 255l));
          }
        }

        char name[64];
        std::snprintf(name, sizeof(name), "id%02d_pose%02d_img%02d.pgm", id, pose, k);
        std::string path = (fs::path(out_dir) / name).string();
        save_pgm(img, path);
        char idname[16];
        std::snprintf(idname, sizeof(idname), "id%02d", id);
        ds.manifest.entries.push_back({path, idname});
        ds.pose_labels.push_back(pose);
      }
    }
  }
  ds.manifest.save_csv((fs::path(out_dir) / "manifest.csv").string());
  write_pose_csv(ds.pose_labels, (fs::path(out_dir) / "poses.csv").string());
  return ds;
}

EmbeddingSet generate_embeddings(const ClusterSpec& spec, std::uint64_t seed) {
  if (spec.n_ids < 1 || spec.poses_per_id < 1 || spec.instances_per_pose < 1 || spec.dim < 1)
    throw ConfigError("bad cluster spec");

  auto unit_direction = [&](std::mt19937_64& rng) {
    Eigen::VectorXd v(spec.dim);
    for (int i = 0; i < spec.dim; ++i) v(i) = normal_draw(rng);
    double n = v.norm();
    return n > 0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd(Eigen::VectorXd::Unit(spec.dim, 0));
  };

  std::mt19937_64 pose_rng(mix_seed(seed, 0xBEA7));
  std::vector<Eigen::VectorXd> pose_dirs;
  for (int p = 0; p < spec.poses_per_id; ++p)
    pose_dirs.push_back(spec.pose_scale * unit_direction(pose_rng));

  EmbeddingSet out;
  std::size_t index = 0;
  for (int id = 0; id < spec.n_ids; ++id) {
    std::mt19937_64 id_rng(mix_seed(seed, 0x1D5, static_cast<std::uint64_t>(id)));
    Eigen::VectorXd id_dir = spec.id_scale * unit_direction(id_rng);
    for (int pose = 0; pose < spec.poses_per_id; ++pose) {
      Eigen::VectorXd center = id_dir + pose_dirs[static_cast<std::size_t>(pose)];
      for (int k = 0; k < spec.instances_per_pose; ++k, ++index) {
        std::mt19937_64 rng(mix_seed(seed, 0x9A3, index));
        Eigen::VectorXd v = center;
        for (int i = 0; i < spec.dim; ++i) v(i) += normal_draw(rng, 0.0, spec.noise_sigma);
        out.vectors.push_back(std::move(v));
        char path[32], idname[16];
        std::snprintf(path, sizeof(path), "vec://%05zu", index);
        std::snprintf(idname, sizeof(idname), "id%03d", id);
        out.manifest.entries.push_back({path, idname});
        out.labels.push_back(id);
        out.pose_labels.push_back(pose);
      }
    }
  }
  return out;
}

RelationalMatrix synthetic_relation_matrix(const DatasetManifest& manifest,
                                           const std::vector<int>& pose_labels, std::uint64_t seed) {
  if (manifest.size() != pose_labels.size())
    throw DimensionError("pose labels must parallel the manifest");
  const std::size_t m = manifest.size();
  auto labels = manifest.label_indices();

  RelationalMatrix mx;
  mx.m = static_cast<std::uint32_t>(m);
  mx.manifest_hash = manifest.hash();
  mx.counts.assign(m * m, 0);
  std::mt19937_64 rng(mix_seed(seed, 0x3137));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (labels[i] != labels[j]) continue;
      std::uint32_t c;
      if (pose_labels[i] == pose_labels[j]) {
        c = 30 + static_cast<std::uint32_t>(uniform_below(rng, 31));  // strong within-pose
      } else {
        // occasional spurious low count, usually zero
        c = uniform_below(rng, 10) == 0 ? 1 + static_cast<std::uint32_t>(uniform_below(rng, 5)) : 0;
      }
      mx.at(i, j) = c;
      mx.at(j, i) = c;
    }
  }
  return mx;
}

void write_pose_csv(const std::vector<int>& pose_labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "index,pose\n";
  for (std::size_t i = 0; i < pose_labels.size(); ++i) out << i << "," << pose_labels[i] << "\n";
  if (!out) throw IoError("short write: " + path);
}

std::vector<int> load_pose_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose csv: " + path);
  std::string line;
  if (!std::getline(in, line) || (line != "index,pose" && line != "index,pose\r"))
    throw FormatError("pose csv must start with header 'index,pose'");
  std::vector<int> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("bad pose row: " + line);
    out.push_back(std::stoi(line.substr(comma + 1)));
  }
  return out;
}

}  // namespace rptm
