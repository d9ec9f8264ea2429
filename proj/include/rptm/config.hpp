#pragma once

#include <string>

#include "rptm/features.hpp"
#include "rptm/gms.hpp"
#include "rptm/learn.hpp"

namespace rptm {

struct EvalConfig {
  bool rerank = false;
  int k1 = 60;
  int k2 = 15;
  double eta = 0.2;
};

/// Every knob of the pipeline in one strict JSON document; unknown keys
/// are configuration errors.
struct RunConfig {
  int threads = 0;  // 0: RPTM_THREADS env, else hardware
  FeatureConfig feature;
  GmsConfig gms;
  MiningConfig mining;
  TrainConfig train;
  EvalConfig eval;

  std::string to_json() const;  // pretty-printed, stable key order
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  void validate() const;
};

}  // namespace rptm
