#include "rptm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rptm {

namespace {

using Json = nlohmann::ordered_json;

// strict object reader: every key must be consumed
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string name) : obj_(j), name_(std::move(name)) {
    if (!obj_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& into) {
    if (auto it = obj_.find(key); it != obj_.end()) {
      try {
        into = it->template get<T>();
      } catch (const Json::exception&) {
        throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
      }
      seen_.insert(key);
    }
  }

  void get(const char* key, std::string& into) { get<std::string>(key, into); }

  ~ObjectReader() = default;

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key))
        throw ConfigError("unknown config key '" + name_ + "." + key + "'");
  }

 private:
  const Json& obj_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

std::string RunConfig::to_json() const {
  Json j;
  j["threads"] = threads;
  j["feature"] = {{"max_features", feature.max_features},
                  {"fast_threshold", feature.fast_threshold},
                  {"pyramid_levels", feature.pyramid_levels},
                  {"pyramid_factor", feature.pyramid_factor},
                  {"match_width", feature.match_width},
                  {"match_height", feature.match_height}};
  j["gms"] = {{"grid_size", gms.grid_size},
              {"alpha", gms.alpha},
              {"with_rotation", gms.with_rotation},
              {"with_shifts", gms.with_shifts}};
  j["mining"] = {{"tau_policy", to_string(mining.tau_policy)},
                 {"tau_min_matches", mining.tau_min_matches},
                 {"positive_source", to_string(mining.positive_source)}};
  j["train"] = {{"initial_lr", train.initial_lr},
                {"lr_decay_factor", train.lr_decay_factor},
                {"lr_step_epochs", train.lr_step_epochs},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size()},
                {"ids_per_batch", train.ids_per_batch},
                {"instances_per_id", train.instances_per_id},
                {"momentum", train.momentum},
                {"weight_decay", train.weight_decay},
                {"margin", train.margin},
                {"lambda_tri", train.lambda_tri},
                {"lambda_ent", train.lambda_ent},
                {"hidden_dim", train.hidden_dim},
                {"embed_dim", train.embed_dim},
                {"augment_flip", train.augment_flip},
                {"seed", train.seed}};
  j["eval"] = {{"rerank", eval.rerank}, {"k1", eval.k1}, {"k2", eval.k2}, {"eta", eval.eta}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");

  RunConfig cfg;
  std::set<std::string> seen;
  ObjectReader root(j, "config");
  root.get("threads", cfg.threads);

  if (auto it = j.find("feature"); it != j.end()) {
    ObjectReader r(*it, "feature");
    r.get("max_features", cfg.feature.max_features);
    r.get("fast_threshold", cfg.feature.fast_threshold);
    r.get("pyramid_levels", cfg.feature.pyramid_levels);
    r.get("pyramid_factor", cfg.feature.pyramid_factor);
    r.get("match_width", cfg.feature.match_width);
    r.get("match_height", cfg.feature.match_height);
    r.finish();
  }
  if (auto it = j.find("gms"); it != j.end()) {
    ObjectReader r(*it, "gms");
    r.get("grid_size", cfg.gms.grid_size);
    r.get("alpha", cfg.gms.alpha);
    r.get("with_rotation", cfg.gms.with_rotation);
    r.get("with_shifts", cfg.gms.with_shifts);
    r.finish();
  }
  if (auto it = j.find("mining"); it != j.end()) {
    ObjectReader r(*it, "mining");
    std::string policy = to_string(cfg.mining.tau_policy);
    std::string source = to_string(cfg.mining.positive_source);
    r.get("tau_policy", policy);
    r.get("tau_min_matches", cfg.mining.tau_min_matches);
    r.get("positive_source", source);
    r.finish();
    cfg.mining.tau_policy = tau_policy_from_string(policy);
    cfg.mining.positive_source = positive_source_from_string(source);
  }
  int batch_size = -1;
  if (auto it = j.find("train"); it != j.end()) {
    ObjectReader r(*it, "train");
    r.get("initial_lr", cfg.train.initial_lr);
    r.get("lr_decay_factor", cfg.train.lr_decay_factor);
    r.get("lr_step_epochs", cfg.train.lr_step_epochs);
    r.get("epochs", cfg.train.epochs);
    r.get("batch_size", batch_size);
    r.get("ids_per_batch", cfg.train.ids_per_batch);
    r.get("instances_per_id", cfg.train.instances_per_id);
    r.get("momentum", cfg.train.momentum);
    r.get("weight_decay", cfg.train.weight_decay);
    r.get("margin", cfg.train.margin);
    r.get("lambda_tri", cfg.train.lambda_tri);
    r.get("lambda_ent", cfg.train.lambda_ent);
    r.get("hidden_dim", cfg.train.hidden_dim);
    r.get("embed_dim", cfg.train.embed_dim);
    r.get("augment_flip", cfg.train.augment_flip);
    r.get("seed", cfg.train.seed);
    r.finish();
  }
  if (auto it = j.find("eval"); it != j.end()) {
    ObjectReader r(*it, "eval");
    r.get("rerank", cfg.eval.rerank);
    r.get("k1", cfg.eval.k1);
    r.get("k2", cfg.eval.k2);
    r.get("eta", cfg.eval.eta);
    r.finish();
  }
  // consume section keys at the root
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known = {"threads", "feature", "gms", "mining", "train", "eval"};
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  if (batch_size >= 0 && batch_size != cfg.train.batch_size())
    throw ConfigError("train.batch_size (" + std::to_string(batch_size) +
                      ") must equal ids_per_batch * instances_per_id (" +
                      std::to_string(cfg.train.batch_size()) + ")");
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << to_json();
  if (!out) throw IoError("short write: " + path);
}

void RunConfig::validate() const {
  if (feature.max_features < 1) throw ConfigError("feature.max_features must be >= 1");
  if (feature.fast_threshold < 1) throw ConfigError("feature.fast_threshold must be >= 1");
  if (feature.pyramid_levels < 1) throw ConfigError("feature.pyramid_levels must be >= 1");
  if (!(feature.pyramid_factor > 1.0)) throw ConfigError("feature.pyramid_factor must be > 1");
  if (feature.match_width < 32 || feature.match_height < 32)
    throw ConfigError("feature.match size must be >= 32");
  if (gms.grid_size < 1) throw ConfigError("gms.grid_size must be >= 1");
  if (!(gms.alpha > 0)) throw ConfigError("gms.alpha must be > 0");
  if (mining.tau_min_matches < 0) throw ConfigError("mining.tau_min_matches must be >= 0");
  if (!(train.initial_lr > 0)) throw ConfigError("train.initial_lr must be > 0");
  if (train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (train.margin < 0) throw ConfigError("train.margin must be >= 0");
  if (train.lr_step_epochs < 1) throw ConfigError("train.lr_step_epochs must be >= 1");
  if (train.ids_per_batch < 1 || train.instances_per_id < 2)
    throw ConfigError("train batch needs ids_per_batch >= 1 and instances_per_id >= 2");
  if (train.hidden_dim < 1 || train.embed_dim < 1) throw ConfigError("model dims must be >= 1");
  if (eval.k2 < 1 || eval.k1 < eval.k2) throw ConfigError("eval requires k1 >= k2 >= 1");
  if (eval.eta < 0 || eval.eta > 1) throw ConfigError("eval.eta must lie in [0, 1]");
}

}  // namespace rptm
