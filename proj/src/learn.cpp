#include "rptm/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rptm/binio.hpp"

namespace rptm {

namespace {

void fill_uniform(Eigen::MatrixXd& w, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      w(r, c) = (2.0 * uniform_real01(rng) - 1.0) * s;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

EmbeddingModel EmbeddingModel::init(const ModelDims& dims, std::uint64_t seed) {
  if (dims.input < 1 || dims.hidden < 1 || dims.embed < 1 || dims.classes < 1)
    throw ConfigError("model dimensions must all be >= 1");
  EmbeddingModel m;
  m.W1.resize(dims.hidden, dims.input);
  m.W2.resize(dims.embed, dims.hidden);
  m.Wc.resize(dims.classes, dims.embed);
  m.b1 = Eigen::VectorXd::Zero(dims.hidden);
  m.b2 = Eigen::VectorXd::Zero(dims.embed);
  m.bc = Eigen::VectorXd::Zero(dims.classes);
  std::mt19937_64 rng(seed);
  fill_uniform(m.W1, rng);
  fill_uniform(m.W2, rng);
  fill_uniform(m.Wc, rng);
  return m;
}

ModelDims EmbeddingModel::dims() const {
  return {static_cast<int>(W1.cols()), static_cast<int>(W1.rows()), static_cast<int>(W2.rows()),
          static_cast<int>(Wc.rows())};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(const EmbeddingModel& model,
                                                    const Eigen::VectorXd& x) {
  if (x.size() != model.W1.cols()) throw DimensionError("forward: input dimension mismatch");
  Eigen::VectorXd hidden = (model.W1 * x + model.b1).cwiseMax(0.0);
  Eigen::VectorXd embedding = model.W2 * hidden + model.b2;
  Eigen::VectorXd logits = model.Wc * embedding + model.bc;
  return {std::move(embedding), std::move(logits)};
}

double triplet_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_p,
                    const Eigen::VectorXd& e_n, double margin) {
  if (e_a.size() != e_p.size() || e_a.size() != e_n.size())
    throw DimensionError("triplet_loss: embedding dimensions differ");
  double d_ap = (e_a - e_p).norm();
  double d_an = (e_a - e_n).norm();
  return std::max(0.0, d_ap - d_an + margin);
}

double cross_entropy(const Eigen::VectorXd& logits, int label) {
  if (label < 0 || label >= logits.size()) throw IndexError("cross_entropy: label out of range");
  double mx = logits.maxCoeff();
  double lse = std::log((logits.array() - mx).exp().sum()) + mx;
  return lse - logits(label);
}

int ForwardBatch::position_of(std::size_t global_index) const {
  for (std::size_t p = 0; p < indices.size(); ++p)
    if (indices[p] == global_index) return static_cast<int>(p);
  return -1;
}

Gradients Gradients::zeros(const ModelDims& dims) {
  Gradients g;
  g.W1 = Eigen::MatrixXd::Zero(dims.hidden, dims.input);
  g.W2 = Eigen::MatrixXd::Zero(dims.embed, dims.hidden);
  g.Wc = Eigen::MatrixXd::Zero(dims.classes, dims.embed);
  g.b1 = Eigen::VectorXd::Zero(dims.hidden);
  g.b2 = Eigen::VectorXd::Zero(dims.embed);
  g.bc = Eigen::VectorXd::Zero(dims.classes);
  return g;
}

ForwardBatch forward_batch(const EmbeddingModel& model,
                           const std::vector<Eigen::VectorXd>& position_inputs,
                           const std::vector<int>& position_labels,
                           const std::vector<std::size_t>& batch_indices, std::size_t batch_prefix) {
  if (position_inputs.size() != batch_indices.size() || position_labels.size() != batch_indices.size())
    throw DimensionError("forward_batch: per-position arrays must parallel the indices");
  ForwardBatch fb;
  fb.indices = batch_indices;
  fb.batch_size = batch_prefix;
  fb.labels = position_labels;
  const std::size_t n = batch_indices.size();
  fb.inputs = position_inputs;
  fb.hidden_pre.resize(n);
  fb.hidden.resize(n);
  fb.embeddings.resize(n);
  fb.logits.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    if (fb.inputs[p].size() != model.W1.cols()) throw DimensionError("forward_batch: input dim mismatch");
    fb.hidden_pre[p] = model.W1 * fb.inputs[p] + model.b1;
    fb.hidden[p] = fb.hidden_pre[p].cwiseMax(0.0);
    fb.embeddings[p] = model.W2 * fb.hidden[p] + model.b2;
    fb.logits[p] = model.Wc * fb.embeddings[p] + model.bc;
  }
  return fb;
}

namespace {

int require_position(const ForwardBatch& fb, std::size_t global_index, const char* role) {
  int p = fb.position_of(global_index);
  if (p < 0) throw IndexError(std::string("triplet ") + role + " not present in forward batch");
  return p;
}

}  // namespace

LossReport combined_loss(const ForwardBatch& fb, const std::vector<Triplet>& triplets,
                         const TrainConfig& cfg) {
  LossReport rep;
  for (const auto& t : triplets) {
    int a = require_position(fb, t.anchor, "anchor");
    int p = require_position(fb, t.positive, "positive");
    int n = require_position(fb, t.negative, "negative");
    double l = triplet_loss(fb.embeddings[static_cast<std::size_t>(a)],
                            fb.embeddings[static_cast<std::size_t>(p)],
                            fb.embeddings[static_cast<std::size_t>(n)], cfg.margin);
    rep.e_tri += l;
    if (l > 0) ++rep.active_triplets;
  }
  for (std::size_t p = 0; p < fb.batch_size; ++p)
    rep.e_ent += cross_entropy(fb.logits[p], fb.labels[p]);
  rep.total = cfg.lambda_ent * rep.e_ent + cfg.lambda_tri * rep.e_tri;
  return rep;
}

Gradients backward(const EmbeddingModel& model, const ForwardBatch& fb,
                   const std::vector<Triplet>& triplets, const TrainConfig& cfg) {
  const std::size_t n = fb.indices.size();
  Gradients g = Gradients::zeros(model.dims());

  std::vector<Eigen::VectorXd> g_emb(n, Eigen::VectorXd::Zero(model.W2.rows()));
  std::vector<Eigen::VectorXd> g_logit(n, Eigen::VectorXd::Zero(model.Wc.rows()));

  for (std::size_t p = 0; p < fb.batch_size; ++p)
    g_logit[p] = cfg.lambda_ent * (softmax(fb.logits[p]) -
                                   Eigen::VectorXd::Unit(model.Wc.rows(), fb.labels[p]));

  for (const auto& t : triplets) {
    auto a = static_cast<std::size_t>(require_position(fb, t.anchor, "anchor"));
    auto p = static_cast<std::size_t>(require_position(fb, t.positive, "positive"));
    auto nn = static_cast<std::size_t>(require_position(fb, t.negative, "negative"));
    Eigen::VectorXd dap = fb.embeddings[a] - fb.embeddings[p];
    Eigen::VectorXd dan = fb.embeddings[a] - fb.embeddings[nn];
    double nap = dap.norm(), nan_ = dan.norm();
    if (!(nap - nan_ + cfg.margin > 0)) continue;  // hinge inactive (subgradient 0 at boundary)
    Eigen::VectorXd u_ap = nap > 0 ? Eigen::VectorXd(dap / nap)
                                   : Eigen::VectorXd(Eigen::VectorXd::Zero(dap.size()));
    Eigen::VectorXd u_an = nan_ > 0 ? Eigen::VectorXd(dan / nan_)
                                    : Eigen::VectorXd(Eigen::VectorXd::Zero(dan.size()));
    g_emb[a] += cfg.lambda_tri * (u_ap - u_an);
    g_emb[p] -= cfg.lambda_tri * u_ap;
    g_emb[nn] += cfg.lambda_tri * u_an;
  }

  for (std::size_t p = 0; p < n; ++p) {
    g.Wc.noalias() += g_logit[p] * fb.embeddings[p].transpose();
    g.bc += g_logit[p];
    Eigen::VectorXd ge = g_emb[p] + model.Wc.transpose() * g_logit[p];
    g.W2.noalias() += ge * fb.hidden[p].transpose();
    g.b2 += ge;
    Eigen::VectorXd gz = (model.W2.transpose() * ge).array() *
                         (fb.hidden_pre[p].array() > 0.0).cast<double>();
    g.W1.noalias() += gz * fb.inputs[p].transpose();
    g.b1 += gz;
  }
  return g;
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  return cfg.initial_lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_step_epochs);
}

namespace {

void step_weight(Eigen::MatrixXd& p, const Eigen::MatrixXd& g, Eigen::MatrixXd& v, double lr,
                 double momentum, double weight_decay) {
  if (p.rows() != g.rows() || p.cols() != g.cols()) throw DimensionError("sgd_step: shape mismatch");
  v = momentum * v + g + weight_decay * p;
  p -= lr * v;
}

void step_bias(Eigen::VectorXd& p, const Eigen::VectorXd& g, Eigen::VectorXd& v, double lr,
               double momentum) {
  if (p.size() != g.size()) throw DimensionError("sgd_step: shape mismatch");
  v = momentum * v + g;  // no decay on biases
  p -= lr * v;
}

}  // namespace

void sgd_step(EmbeddingModel& model, const Gradients& grads, Gradients& velocity, double lr,
              double momentum, double weight_decay) {
  step_weight(model.W1, grads.W1, velocity.W1, lr, momentum, weight_decay);
  step_weight(model.W2, grads.W2, velocity.W2, lr, momentum, weight_decay);
  step_weight(model.Wc, grads.Wc, velocity.Wc, lr, momentum, weight_decay);
  step_bias(model.b1, grads.b1, velocity.b1, lr, momentum);
  step_bias(model.b2, grads.b2, velocity.b2, lr, momentum);
  step_bias(model.bc, grads.bc, velocity.bc, lr, momentum);
}

Eigen::VectorXd pooled_grid_descriptor(const GrayImage& img, int grid, int pool_size) {
  if (grid < 1 || pool_size < grid) throw ConfigError("bad pooled descriptor geometry");
  const GrayImage* src = &img;
  GrayImage resized;
  if (img.width != pool_size || img.height != pool_size) {
    resized = resize_bilinear(img, pool_size, pool_size);
    src = &resized;
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid) * grid);
  Eigen::VectorXd area = Eigen::VectorXd::Zero(v.size());
  for (int y = 0; y < pool_size; ++y) {
    int cy = std::min(grid - 1, y * grid / pool_size);
    for (int x = 0; x < pool_size; ++x) {
      int cx = std::min(grid - 1, x * grid / pool_size);
      v(cy * grid + cx) += src->at(x, y);
      area(cy * grid + cx) += 1.0;
    }
  }
  return (v.array() / area.array() / 255.0).matrix();
}

Eigen::VectorXd flip_descriptor_grid(const Eigen::VectorXd& v, int grid) {
  if (v.size() != static_cast<Eigen::Index>(grid) * grid)
    throw DimensionError("flip_descriptor_grid: vector is not a grid x grid layout");
  Eigen::VectorXd out(v.size());
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c) out(r * grid + c) = v(r * grid + (grid - 1 - c));
  return out;
}

TrainingData training_data_from_images(const DatasetManifest& manifest, const FeatureConfig& fcfg,
                                       int grid, int threads) {
  TrainingData data;
  data.labels = manifest.label_indices();
  data.id_names = manifest.id_names();
  data.manifest_hash = manifest.hash();
  data.inputs.resize(manifest.size());
  std::vector<std::string> errors(manifest.size());
  parallel_for(manifest.size(), threads, [&](std::size_t i) {
    try {
      data.inputs[i] = pooled_grid_descriptor(load_image(manifest.entries[i].path), grid,
                                              fcfg.match_width);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (!errors[i].empty())
      throw IoError("image " + std::to_string(i) + " (" + manifest.entries[i].path + "): " + errors[i]);
  return data;
}

TrainingData training_data_from_vectors(const std::vector<Eigen::VectorXd>& vectors,
                                        const DatasetManifest& manifest) {
  if (vectors.size() != manifest.size())
    throw DimensionError("vector count does not match manifest size");
  TrainingData data;
  data.inputs = vectors;
  data.labels = manifest.label_indices();
  data.id_names = manifest.id_names();
  data.manifest_hash = manifest.hash();
  return data;
}

TrainResult train(const TrainingData& data, const DatasetManifest& manifest,
                  const RelationalMatrix& mx, const TrainConfig& cfg, const MiningConfig& mining) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.initial_lr > 0)) throw ConfigError("initial_lr must be > 0");
  if (cfg.margin < 0) throw ConfigError("margin must be >= 0");
  if (data.inputs.empty()) throw ConfigError("no training inputs");
  if (data.inputs.size() != mx.m) throw DimensionError("matrix size does not match training data");
  if (data.manifest_hash != mx.manifest_hash)
    throw HashMismatchError("relational matrix was built from a different manifest");

  const std::size_t m = data.inputs.size();
  ModelDims dims{static_cast<int>(data.inputs[0].size()), cfg.hidden_dim, cfg.embed_dim,
                 static_cast<int>(data.id_names.size())};
  EmbeddingModel model = EmbeddingModel::init(dims, mix_seed(cfg.seed, 0xA110));
  Gradients velocity = Gradients::zeros(dims);

  const int B = cfg.batch_size();
  const std::size_t batches = std::max<std::size_t>(1, (m + static_cast<std::size_t>(B) - 1) /
                                                           static_cast<std::size_t>(B));
  const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dims.input))));
  const bool can_flip = cfg.augment_flip && grid * grid == dims.input;

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    LossReport epoch_loss;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::uint64_t batch_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1,
                                                b + 1);
      Batch batch = sample_batch(manifest, batch_seed, cfg.ids_per_batch, cfg.instances_per_id);

      // gather (optionally flipped) inputs for the sampled positions
      std::vector<Eigen::VectorXd> pos_inputs;
      pos_inputs.reserve(batch.indices.size());
      std::mt19937_64 flip_rng(mix_seed(batch_seed, 0xF11));
      for (std::size_t p = 0; p < batch.indices.size(); ++p) {
        const Eigen::VectorXd& base = data.inputs[batch.indices[p]];
        if (can_flip && (flip_rng() & 1u))
          pos_inputs.push_back(flip_descriptor_grid(base, grid));
        else
          pos_inputs.push_back(base);
      }

      batch.embeddings.clear();
      batch.embeddings.reserve(batch.indices.size());
      for (const auto& x : pos_inputs) batch.embeddings.push_back(forward(model, x).first);

      std::vector<Triplet> triplets;
      if (mining.positive_source == PositiveSource::Relational) {
        triplets = mine_triplets(batch, data.labels, mx, mining.tau_policy, mining.tau_min_matches);
      } else {
        std::mt19937_64 pos_rng(mix_seed(batch_seed, 0x9051));
        triplets = mine_triplets_random(batch, data.labels, pos_rng);
      }

      // extend with out-of-batch positives, first appearance order
      std::vector<std::size_t> extended = batch.indices;
      std::vector<int> pos_labels;
      pos_labels.reserve(extended.size());
      for (std::size_t idx : batch.indices) pos_labels.push_back(data.labels[idx]);
      for (const auto& t : triplets) {
        if (std::find(extended.begin(), extended.end(), t.positive) == extended.end()) {
          extended.push_back(t.positive);
          pos_inputs.push_back(data.inputs[t.positive]);
          pos_labels.push_back(data.labels[t.positive]);
        }
      }

      ForwardBatch fb = forward_batch(model, pos_inputs, pos_labels, extended, batch.indices.size());
      LossReport rep = combined_loss(fb, triplets, cfg);
      Gradients grads = backward(model, fb, triplets, cfg);
      sgd_step(model, grads, velocity, lr, cfg.momentum, cfg.weight_decay);

      epoch_loss.e_tri += rep.e_tri;
      epoch_loss.e_ent += rep.e_ent;
      epoch_loss.active_triplets += rep.active_triplets;
    }
    epoch_loss.total = cfg.lambda_ent * epoch_loss.e_ent + cfg.lambda_tri * epoch_loss.e_tri;
    result.history.push_back({epoch, epoch_loss, lr});
  }
  result.model = std::move(model);
  return result;
}

void save_checkpoint(const EmbeddingModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  ModelDims d = model.dims();
  write_bytes(out, "RPTMMODL", 8);
  write_u16(out, 1);
  write_u32(out, static_cast<std::uint32_t>(d.input));
  write_u32(out, static_cast<std::uint32_t>(d.hidden));
  write_u32(out, static_cast<std::uint32_t>(d.embed));
  write_u32(out, static_cast<std::uint32_t>(d.classes));
  auto put_matrix = [&](const Eigen::MatrixXd& mtx) {
    for (Eigen::Index r = 0; r < mtx.rows(); ++r)
      for (Eigen::Index c = 0; c < mtx.cols(); ++c) write_f64(out, mtx(r, c));
  };
  auto put_vector = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(out, v(i));
  };
  put_matrix(model.W1);
  put_vector(model.b1);
  put_matrix(model.W2);
  put_vector(model.b2);
  put_matrix(model.Wc);
  put_vector(model.bc);
  if (!out) throw IoError("short write: " + path);
}

EmbeddingModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  expect_magic(in, "RPTMMODL", "checkpoint");
  std::uint16_t version = read_u16(in, "checkpoint version");
  if (version != 1) throw CorruptError("unsupported checkpoint version " + std::to_string(version));
  ModelDims d;
  d.input = static_cast<int>(read_u32(in, "input dim"));
  d.hidden = static_cast<int>(read_u32(in, "hidden dim"));
  d.embed = static_cast<int>(read_u32(in, "embed dim"));
  d.classes = static_cast<int>(read_u32(in, "class count"));
  if (d.input < 1 || d.hidden < 1 || d.embed < 1 || d.classes < 1)
    throw CorruptError("bad dimensions in checkpoint " + path);
  EmbeddingModel m;
  m.W1.resize(d.hidden, d.input);
  m.W2.resize(d.embed, d.hidden);
  m.Wc.resize(d.classes, d.embed);
  m.b1.resize(d.hidden);
  m.b2.resize(d.embed);
  m.bc.resize(d.classes);
  auto get_matrix = [&](Eigen::MatrixXd& mtx) {
    for (Eigen::Index r = 0; r < mtx.rows(); ++r)
      for (Eigen::Index c = 0; c < mtx.cols(); ++c) mtx(r, c) = read_f64(in, "checkpoint payload");
  };
  auto get_vector = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = read_f64(in, "checkpoint payload");
  };
  get_matrix(m.W1);
  get_vector(m.b1);
  get_matrix(m.W2);
  get_vector(m.b2);
  get_matrix(m.Wc);
  get_vector(m.bc);
  if (in.get() != std::ifstream::traits_type::eof()) throw CorruptError("trailing bytes in " + path);
  for (const auto* mtx : {&m.W1, &m.W2, &m.Wc})
    if (!mtx->allFinite()) throw CorruptError("non-finite parameters in " + path);
  for (const auto* v : {&m.b1, &m.b2, &m.bc})
    if (!v->allFinite()) throw CorruptError("non-finite parameters in " + path);
  return m;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "epoch,e_tri,e_ent,total,active_triplets,lr\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%ld,%.17g\n", h.epoch, h.loss.e_tri,
                  h.loss.e_ent, h.loss.total, h.loss.active_triplets, h.lr);
    out << buf;
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace rptm
