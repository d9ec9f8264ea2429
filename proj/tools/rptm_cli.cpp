// Pipeline driver: synth -> matrix -> mine/train -> eval.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "rptm/config.hpp"
#include "rptm/evalrank.hpp"
#include "rptm/learn.hpp"
#include "rptm/synth.hpp"

namespace {

using namespace rptm;

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synth spec: " + path);
  nlohmann::json j;
  try {
    std::ostringstream buf;
    buf << in.rdbuf();
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth spec is not valid JSON: ") + e.what());
  }
  SynthSpec spec;
  static const std::set<std::string> known = {"n_ids",      "poses_per_id", "images_per_pose",
                                              "image_size", "noise_sigma",  "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown synth spec key '" + key + "'");
  if (j.contains("n_ids")) spec.n_ids = j["n_ids"].get<int>();
  if (j.contains("poses_per_id")) spec.poses_per_id = j["poses_per_id"].get<int>();
  if (j.contains("images_per_pose")) spec.images_per_pose = j["images_per_pose"].get<int>();
  if (j.contains("image_size")) spec.image_size = j["image_size"].get<int>();
  if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<double>();
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  return spec;
}

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return RunConfig::load(path);
}

struct SplitFile {
  std::vector<std::size_t> query, gallery;
};

// "index,id,split" rows against a loaded manifest
SplitFile load_split_csv(const std::string& path, const DatasetManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split csv: " + path);
  std::string line;
  if (!std::getline(in, line) || (line != "index,id,split" && line != "index,id,split\r"))
    throw FormatError("split csv must start with header 'index,id,split'");
  SplitFile out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto c1 = line.find(',');
    auto c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) throw FormatError("bad split row: " + line);
    std::size_t index = std::stoul(line.substr(0, c1));
    std::string id = line.substr(c1 + 1, c2 - c1 - 1);
    std::string split = line.substr(c2 + 1);
    if (index >= manifest.size()) throw FormatError("split row index out of range: " + line);
    if (manifest.entries[index].id != id)
      throw FormatError("split row id mismatch at index " + std::to_string(index));
    if (split == "query")
      out.query.push_back(index);
    else if (split == "gallery")
      out.gallery.push_back(index);
    else
      throw FormatError("bad split value: " + split);
  }
  if (out.query.empty() || out.gallery.empty())
    throw FormatError("split csv needs at least one query and one gallery row");
  return out;
}

int run_synth(const std::string& spec_path, const std::string& out_dir) {
  SynthSpec spec = load_synth_spec(spec_path);
  SynthDataset ds = generate_dataset(spec, out_dir);
  std::printf("wrote %zu images under %s\n", ds.manifest.size(), out_dir.c_str());
  return 0;
}

int run_matrix(const std::string& manifest_path, const std::string& out_path,
               const std::string& config_path, int threads) {
  RunConfig cfg = load_config_or_default(config_path);
  if (threads > 0) cfg.threads = threads;
  auto manifest = DatasetManifest::load_csv(manifest_path);
  auto mx = build_relational_matrix(manifest, cfg.feature, cfg.gms, cfg.threads);
  save_matrix(mx, out_path);
  std::printf("wrote %ux%u relational matrix to %s\n", mx.m, mx.m, out_path.c_str());
  return 0;
}

int run_mine(const std::string& manifest_path, const std::string& matrix_path,
             const std::string& policy_name, const std::string& out_path,
             const std::string& config_path, const std::string& checkpoint_path,
             const std::string& triplets_path, std::uint64_t seed) {
  RunConfig cfg = load_config_or_default(config_path);
  auto manifest = DatasetManifest::load_csv(manifest_path);
  auto mx = load_matrix(matrix_path);
  if (mx.manifest_hash != manifest.hash())
    throw HashMismatchError("matrix was built from a different manifest");
  TauPolicy policy = tau_policy_from_string(policy_name);

  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open for writing: " + out_path);
  out << "anchor,positive,count,tau\n";
  char buf[64];
  for (std::size_t a = 0; a < mx.m; ++a) {
    auto t = tau(mx.row(a), policy, cfg.mining.tau_min_matches);
    auto p = select_positive(mx, a, policy, cfg.mining.tau_min_matches);
    if (!t || !p) continue;  // anchor has no related instance
    std::snprintf(buf, sizeof(buf), "%.17g", *t);
    out << a << "," << *p << "," << mx.at(a, *p) << "," << buf << "\n";
  }
  if (!out) throw IoError("short write: " + out_path);
  std::printf("wrote positive choices to %s\n", out_path.c_str());

  if (!triplets_path.empty()) {
    if (checkpoint_path.empty())
      throw ConfigError("--triplets requires --checkpoint for batch-hard negatives");
    EmbeddingModel model = load_checkpoint(checkpoint_path);
    TrainingData data = training_data_from_images(manifest, cfg.feature, 8, cfg.threads);
    Batch batch = sample_batch(manifest, seed, cfg.train.ids_per_batch, cfg.train.instances_per_id);
    for (std::size_t idx : batch.indices)
      batch.embeddings.push_back(forward(model, data.inputs[idx]).first);
    auto triplets = mine_triplets(batch, data.labels, mx, policy, cfg.mining.tau_min_matches);
    write_triplets_csv(triplets, triplets_path);
    std::printf("wrote %zu triplets to %s\n", triplets.size(), triplets_path.c_str());
  }
  return 0;
}

int run_train(const std::string& manifest_path, const std::string& matrix_path,
              const std::string& config_path, const std::string& out_path,
              const std::string& history_path, int threads) {
  RunConfig cfg = load_config_or_default(config_path);
  if (threads > 0) cfg.threads = threads;
  auto manifest = DatasetManifest::load_csv(manifest_path);
  manifest.validate();
  auto mx = load_matrix(matrix_path);
  TrainingData data = training_data_from_images(manifest, cfg.feature, 8, cfg.threads);
  TrainResult result = train(data, manifest, mx, cfg.train, cfg.mining);
  save_checkpoint(result.model, out_path);
  if (!history_path.empty()) write_history_csv(result.history, history_path);
  std::printf("trained %d epochs; checkpoint %s\n", cfg.train.epochs, out_path.c_str());
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& split_path, const std::string& out_path,
             const std::string& config_path, bool rerank_flag, std::optional<int> k1,
             std::optional<int> k2, std::optional<double> eta, const std::string& emb_out,
             int threads) {
  RunConfig cfg = load_config_or_default(config_path);
  if (threads > 0) cfg.threads = threads;
  if (rerank_flag) cfg.eval.rerank = true;
  if (k1) cfg.eval.k1 = *k1;
  if (k2) cfg.eval.k2 = *k2;
  if (eta) cfg.eval.eta = *eta;
  if (cfg.eval.k2 < 1 || cfg.eval.k1 < cfg.eval.k2) throw ConfigError("eval requires k1 >= k2 >= 1");
  if (cfg.eval.eta < 0 || cfg.eval.eta > 1) throw ConfigError("eval.eta must lie in [0, 1]");

  auto manifest = DatasetManifest::load_csv(manifest_path);
  auto split = load_split_csv(split_path, manifest);
  EmbeddingModel model = load_checkpoint(checkpoint_path);
  TrainingData data = training_data_from_images(manifest, cfg.feature, 8, cfg.threads);
  if (model.W1.cols() != data.inputs[0].size())
    throw HashMismatchError("checkpoint input dimension does not match the manifest's descriptors");

  std::vector<Eigen::VectorXd> emb(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) emb[i] = forward(model, data.inputs[i]).first;

  if (!emb_out.empty()) {
    std::vector<std::string> ids, splits(manifest.size(), "gallery");
    for (const auto& e : manifest.entries) ids.push_back(e.id);
    for (std::size_t q : split.query) splits[q] = "query";
    save_embeddings(emb_out, emb_out + ".csv", emb, ids, splits);
  }

  std::vector<Eigen::VectorXd> qv, gv;
  std::vector<std::string> qids, gids;
  for (std::size_t i : split.query) {
    qv.push_back(emb[i]);
    qids.push_back(manifest.entries[i].id);
  }
  for (std::size_t i : split.gallery) {
    gv.push_back(emb[i]);
    gids.push_back(manifest.entries[i].id);
  }

  Eigen::MatrixXd dists;
  if (cfg.eval.rerank) {
    std::vector<Eigen::VectorXd> joint = qv;
    joint.insert(joint.end(), gv.begin(), gv.end());
    Eigen::MatrixXd all = pairwise_distances(joint, joint);
    dists = k_reciprocal_rerank(all, qv.size(), cfg.eval.k1, cfg.eval.k2, cfg.eval.eta);
  } else {
    dists = pairwise_distances(qv, gv);
  }

  RankingResult result = rank(dists, qids, gids);
  std::vector<std::pair<std::string, double>> rows = {
      {"mAP", mean_average_precision(result)},
      {"cmc@1", cmc(result, 1)},
      {"cmc@5", cmc(result, 5)},
      {"cmc@10", cmc(result, 10)},
  };
  write_metrics_csv(rows, out_path);
  for (const auto& [name, value] : rows) std::printf("%s = %.4f\n", name.c_str(), value);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relation-preserving triplet mining pipeline"};
  app.require_subcommand(0, 1);

  std::string default_config_path;
  app.add_option("--default-config", default_config_path,
                 "Write the default configuration JSON to this path and exit");

  std::string spec_path, out_path, manifest_path, matrix_path, config_path, history_path;
  std::string policy_name = "mean", checkpoint_path, triplets_path, split_path, emb_out;
  int threads = 0;
  std::uint64_t mine_seed = 0;
  bool rerank_flag = false;
  std::optional<int> k1, k2;
  std::optional<double> eta;

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic pose-grouped dataset");
  synth_cmd->add_option("--spec", spec_path, "Synth spec JSON")->required();
  synth_cmd->add_option("--out", out_path, "Output directory")->required();

  auto* matrix_cmd = app.add_subcommand("matrix", "Build the relational matrix");
  matrix_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required();
  matrix_cmd->add_option("--out", out_path, "Output matrix file")->required();
  matrix_cmd->add_option("--config", config_path, "RunConfig JSON");
  matrix_cmd->add_option("--threads", threads, "Worker cap (default: RPTM_THREADS or cores)");

  auto* mine_cmd = app.add_subcommand("mine", "Dump per-anchor positive choices");
  mine_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required();
  mine_cmd->add_option("--matrix", matrix_path, "Relational matrix file")->required();
  mine_cmd->add_option("--policy", policy_name, "Tau policy: min, mean or max")
      ->check(CLI::IsMember({"min", "mean", "max"}))
      ->required();
  mine_cmd->add_option("--out", out_path, "Output CSV")->required();
  mine_cmd->add_option("--config", config_path, "RunConfig JSON");
  mine_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint for --triplets negatives");
  mine_cmd->add_option("--triplets", triplets_path, "Also dump one batch of full triplets here");
  mine_cmd->add_option("--seed", mine_seed, "Batch seed for --triplets");

  auto* train_cmd = app.add_subcommand("train", "Train the embedding model");
  train_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required();
  train_cmd->add_option("--matrix", matrix_path, "Relational matrix file")->required();
  train_cmd->add_option("--config", config_path, "RunConfig JSON")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint output")->required();
  train_cmd->add_option("--history", history_path, "Loss history CSV");
  train_cmd->add_option("--threads", threads, "Worker cap for batch preparation");

  auto* eval_cmd = app.add_subcommand("eval", "Rank and score a trained model");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  eval_cmd->add_option("--manifest", manifest_path, "Manifest CSV")->required();
  eval_cmd->add_option("--split", split_path, "Split CSV (index,id,split)")->required();
  eval_cmd->add_option("--out", out_path, "Metrics CSV")->required();
  eval_cmd->add_option("--config", config_path, "RunConfig JSON");
  eval_cmd->add_flag("--rerank", rerank_flag, "Apply k-reciprocal re-ranking");
  eval_cmd->add_option("--k1", k1, "Re-ranking k1");
  eval_cmd->add_option("--k2", k2, "Re-ranking k2");
  eval_cmd->add_option("--eta", eta, "Re-ranking blend weight");
  eval_cmd->add_option("--emb-out", emb_out, "Also write embeddings (binary + sidecar CSV)");
  eval_cmd->add_option("--threads", threads, "Worker cap for descriptor extraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // --help exits 0
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (!default_config_path.empty()) {
      RunConfig{}.save(default_config_path);
      std::printf("wrote default config to %s\n", default_config_path.c_str());
      return 0;
    }
    if (synth_cmd->parsed()) return run_synth(spec_path, out_path);
    if (matrix_cmd->parsed()) return run_matrix(manifest_path, out_path, config_path, threads);
    if (mine_cmd->parsed())
      return run_mine(manifest_path, matrix_path, policy_name, out_path, config_path,
                      checkpoint_path, triplets_path, mine_seed);
    if (train_cmd->parsed())
      return run_train(manifest_path, matrix_path, config_path, out_path, history_path, threads);
    if (eval_cmd->parsed())
      return run_eval(checkpoint_path, manifest_path, split_path, out_path, config_path,
                      rerank_flag, k1, k2, eta, emb_out, threads);
    std::cerr << "usage error: no subcommand given (see --help)\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
