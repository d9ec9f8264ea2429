#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "rptm/mining.hpp"

namespace rptm {

struct ModelDims {
  int input = 64;
  int hidden = 32;
  int embed = 16;
  int classes = 0;
};

/// Two-layer embedding map plus a linear classifier head:
///   embedding = W2 relu(W1 x + b1) + b2,  logits = Wc embedding + bc.
struct EmbeddingModel {
  Eigen::MatrixXd W1, W2, Wc;
  Eigen::VectorXd b1, b2, bc;

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static EmbeddingModel init(const ModelDims& dims, std::uint64_t seed);
  ModelDims dims() const;
};

/// (embedding, logits) for one input vector.
std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(const EmbeddingModel& model,
                                                    const Eigen::VectorXd& x);

/// max(0, d_ap - d_an + margin) with Euclidean distances.
double triplet_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_p,
                    const Eigen::VectorXd& e_n, double margin);

/// -log softmax(logits)[label], max-subtracted for stability.
double cross_entropy(const Eigen::VectorXd& logits, int label);

struct LossReport {
  double e_tri = 0;
  double e_ent = 0;
  double total = 0;  // lambda_ent * e_ent + lambda_tri * e_tri
  long active_triplets = 0;
};

struct TrainConfig {
  double initial_lr = 0.005;
  double lr_decay_factor = 0.1;
  int lr_step_epochs = 20;
  int epochs = 80;
  int ids_per_batch = 6;      // P
  int instances_per_id = 4;   // K
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double margin = 0.3;
  double lambda_tri = 2.0;
  double lambda_ent = 0.5;
  int hidden_dim = 32;
  int embed_dim = 16;
  bool augment_flip = false;
  std::uint64_t seed = 0;

  int batch_size() const { return ids_per_batch * instances_per_id; }
};

/// Per-sample activations for one (possibly extended) batch. The first
/// batch_size entries are the sampled batch; out-of-batch positives follow.
struct ForwardBatch {
  std::vector<std::size_t> indices;
  std::size_t batch_size = 0;
  std::vector<Eigen::VectorXd> inputs, hidden_pre, hidden, embeddings, logits;
  std::vector<int> labels;

  /// Position of a global image index within this batch; -1 if absent.
  int position_of(std::size_t global_index) const;
};

/// Gradient (or velocity) storage with the model's shapes.
struct Gradients {
  Eigen::MatrixXd W1, W2, Wc;
  Eigen::VectorXd b1, b2, bc;

  static Gradients zeros(const ModelDims& dims);
};

/// position_inputs/position_labels are parallel to batch_indices (one entry
/// per batch slot, so augmented inputs stay local to the batch).
ForwardBatch forward_batch(const EmbeddingModel& model,
                           const std::vector<Eigen::VectorXd>& position_inputs,
                           const std::vector<int>& position_labels,
                           const std::vector<std::size_t>& batch_indices, std::size_t batch_prefix);

/// e_tri sums triplet hinges, e_ent sums cross-entropy over the batch
/// prefix, total per the LossReport identity.
LossReport combined_loss(const ForwardBatch& fb, const std::vector<Triplet>& triplets,
                         const TrainConfig& cfg);

/// Exact analytic gradient of combined_loss's total w.r.t. every parameter.
Gradients backward(const EmbeddingModel& model, const ForwardBatch& fb,
                   const std::vector<Triplet>& triplets, const TrainConfig& cfg);

/// initial_lr * lr_decay_factor^(floor(epoch / lr_step_epochs)).
double lr_at_epoch(const TrainConfig& cfg, int epoch);

/// v <- momentum v + g + weight_decay p;  p <- p - lr v. Biases skip decay.
void sgd_step(EmbeddingModel& model, const Gradients& grads, Gradients& velocity, double lr,
              double momentum, double weight_decay);

/// Inputs to the learner: one vector and one dense label per image.
struct TrainingData {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> labels;
  std::vector<std::string> id_names;
  std::uint64_t manifest_hash = 0;
};

/// Default image front end: 8x8 mean-pooled intensity grid of the
/// match-size image, scaled to [0, 1]; 64 dims.
Eigen::VectorXd pooled_grid_descriptor(const GrayImage& img, int grid = 8, int pool_size = 224);

/// Mirrors the pooled grid left-right (the one permitted augmentation).
Eigen::VectorXd flip_descriptor_grid(const Eigen::VectorXd& v, int grid = 8);

TrainingData training_data_from_images(const DatasetManifest& manifest, const FeatureConfig& fcfg,
                                       int grid = 8, int threads = 0);
TrainingData training_data_from_vectors(const std::vector<Eigen::VectorXd>& vectors,
                                        const DatasetManifest& manifest);

struct EpochStats {
  int epoch = 0;
  LossReport loss;
  double lr = 0;
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<EpochStats> history;
};

/// sample -> forward -> mine -> loss -> backward -> step, epochs times.
/// Deterministic for a fixed seed.
TrainResult train(const TrainingData& data, const DatasetManifest& manifest,
                  const RelationalMatrix& mx, const TrainConfig& cfg,
                  const MiningConfig& mining = {});

void save_checkpoint(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_checkpoint(const std::string& path);

/// CSV "epoch,e_tri,e_ent,total,active_triplets,lr".
void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace rptm
