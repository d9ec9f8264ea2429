#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rptm/config.hpp"
#include "rptm/evalrank.hpp"
#include "rptm/learn.hpp"
#include "rptm/synth.hpp"

namespace py = pybind11;
using namespace rptm;

namespace {

GrayImage image_from_numpy(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D uint8 array");
  GrayImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.data.data(), a.data(), img.data.size());
  return img;
}

py::array_t<std::uint8_t> image_to_numpy(const GrayImage& img) {
  py::array_t<std::uint8_t> a({img.height, img.width});
  std::memcpy(a.mutable_data(), img.data.data(), img.data.size());
  return a;
}

py::array_t<std::uint32_t> matrix_counts(const RelationalMatrix& mx) {
  py::array_t<std::uint32_t> a({static_cast<int>(mx.m), static_cast<int>(mx.m)});
  std::memcpy(a.mutable_data(), mx.counts.data(), mx.counts.size() * sizeof(std::uint32_t));
  return a;
}

DatasetManifest manifest_from_rows(const std::vector<std::pair<std::string, std::string>>& rows) {
  DatasetManifest m;
  for (const auto& [path, id] : rows) m.entries.push_back({path, id});
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Feature-match-guided triplet mining: native core";

  py::register_exception<IoError>(m, "IoError");
  py::register_exception<FormatError>(m, "FormatError");
  py::register_exception<DimensionError>(m, "DimensionError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<CorruptError>(m, "CorruptError");
  py::register_exception<HashMismatchError>(m, "HashMismatchError");

  py::class_<GrayImage>(m, "GrayImage")
      .def(py::init(&image_from_numpy), py::arg("array"))
      .def_readonly("width", &GrayImage::width)
      .def_readonly("height", &GrayImage::height)
      .def("to_numpy", &image_to_numpy);

  m.def("load_image", &load_image, py::arg("path"));
  m.def("save_pgm", &save_pgm, py::arg("image"), py::arg("path"));
  m.def("resize_bilinear", &resize_bilinear, py::arg("image"), py::arg("out_w"), py::arg("out_h"));

  py::class_<FeatureConfig>(m, "FeatureConfig")
      .def(py::init<>())
      .def_readwrite("max_features", &FeatureConfig::max_features)
      .def_readwrite("fast_threshold", &FeatureConfig::fast_threshold)
      .def_readwrite("pyramid_levels", &FeatureConfig::pyramid_levels)
      .def_readwrite("pyramid_factor", &FeatureConfig::pyramid_factor)
      .def_readwrite("match_width", &FeatureConfig::match_width)
      .def_readwrite("match_height", &FeatureConfig::match_height);

  py::class_<GmsConfig>(m, "GmsConfig")
      .def(py::init<>())
      .def_readwrite("grid_size", &GmsConfig::grid_size)
      .def_readwrite("alpha", &GmsConfig::alpha)
      .def_readwrite("with_rotation", &GmsConfig::with_rotation)
      .def_readwrite("with_shifts", &GmsConfig::with_shifts);

  py::class_<FeatureSet>(m, "FeatureSet")
      .def("__len__", &FeatureSet::size)
      .def_property_readonly("keypoints", [](const FeatureSet& fs) {
        py::array_t<double> a({static_cast<int>(fs.size()), 5});
        auto r = a.mutable_unchecked<2>();
        for (std::size_t i = 0; i < fs.size(); ++i) {
          const auto& k = fs.keypoints[i];
          r(static_cast<py::ssize_t>(i), 0) = k.x;
          r(static_cast<py::ssize_t>(i), 1) = k.y;
          r(static_cast<py::ssize_t>(i), 2) = k.response;
          r(static_cast<py::ssize_t>(i), 3) = k.angle;
          r(static_cast<py::ssize_t>(i), 4) = k.level;
        }
        return a;
      });

  m.def("extract", &extract, py::arg("image"), py::arg("config") = FeatureConfig{});
  m.def("match_count", &match_count, py::arg("a"), py::arg("b"), py::arg("config") = GmsConfig{});

  py::class_<DatasetManifest>(m, "DatasetManifest")
      .def(py::init(&manifest_from_rows), py::arg("rows"))
      .def_static("load_csv", &DatasetManifest::load_csv)
      .def("save_csv", &DatasetManifest::save_csv)
      .def("__len__", &DatasetManifest::size)
      .def("labels", &DatasetManifest::label_indices)
      .def("ids", &DatasetManifest::id_names)
      .def("hash", &DatasetManifest::hash)
      .def("rows", [](const DatasetManifest& m_) {
        std::vector<std::pair<std::string, std::string>> rows;
        for (const auto& e : m_.entries) rows.emplace_back(e.path, e.id);
        return rows;
      });

  py::class_<RelationalMatrix>(m, "RelationalMatrix")
      .def_readonly("m", &RelationalMatrix::m)
      .def_readonly("manifest_hash", &RelationalMatrix::manifest_hash)
      .def("counts", &matrix_counts);

  m.def("build_relational_matrix", &build_relational_matrix, py::arg("manifest"),
        py::arg("feature_config") = FeatureConfig{}, py::arg("gms_config") = GmsConfig{},
        py::arg("threads") = 0);
  m.def("save_matrix", &save_matrix);
  m.def("load_matrix", &load_matrix);

  m.def("tau", [](const std::vector<std::uint32_t>& row, const std::string& policy, double tau_min) {
    return tau(row, tau_policy_from_string(policy), tau_min);
  }, py::arg("row"), py::arg("policy"), py::arg("tau_min") = 10.0);
  m.def("select_positive", [](const RelationalMatrix& mx, std::size_t anchor,
                              const std::string& policy, double tau_min) {
    return select_positive(mx, anchor, tau_policy_from_string(policy), tau_min);
  }, py::arg("matrix"), py::arg("anchor"), py::arg("policy") = "mean", py::arg("tau_min") = 10.0);

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("n_ids", &SynthSpec::n_ids)
      .def_readwrite("poses_per_id", &SynthSpec::poses_per_id)
      .def_readwrite("images_per_pose", &SynthSpec::images_per_pose)
      .def_readwrite("image_size", &SynthSpec::image_size)
      .def_readwrite("noise_sigma", &SynthSpec::noise_sigma)
      .def_readwrite("seed", &SynthSpec::seed);

  py::class_<SynthDataset>(m, "SynthDataset")
      .def_readonly("manifest", &SynthDataset::manifest)
      .def_readonly("pose_labels", &SynthDataset::pose_labels);

  m.def("generate_dataset", &generate_dataset, py::arg("spec"), py::arg("out_dir"));

  py::class_<ClusterSpec>(m, "ClusterSpec")
      .def(py::init<>())
      .def_readwrite("n_ids", &ClusterSpec::n_ids)
      .def_readwrite("poses_per_id", &ClusterSpec::poses_per_id)
      .def_readwrite("instances_per_pose", &ClusterSpec::instances_per_pose)
      .def_readwrite("dim", &ClusterSpec::dim)
      .def_readwrite("id_scale", &ClusterSpec::id_scale)
      .def_readwrite("pose_scale", &ClusterSpec::pose_scale)
      .def_readwrite("noise_sigma", &ClusterSpec::noise_sigma);

  py::class_<EmbeddingSet>(m, "EmbeddingSet")
      .def_readonly("vectors", &EmbeddingSet::vectors)
      .def_readonly("manifest", &EmbeddingSet::manifest)
      .def_readonly("labels", &EmbeddingSet::labels)
      .def_readonly("pose_labels", &EmbeddingSet::pose_labels);

  m.def("generate_embeddings", &generate_embeddings, py::arg("spec"), py::arg("seed"));
  m.def("synthetic_relation_matrix", &synthetic_relation_matrix, py::arg("manifest"),
        py::arg("pose_labels"), py::arg("seed"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("initial_lr", &TrainConfig::initial_lr)
      .def_readwrite("lr_decay_factor", &TrainConfig::lr_decay_factor)
      .def_readwrite("lr_step_epochs", &TrainConfig::lr_step_epochs)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("ids_per_batch", &TrainConfig::ids_per_batch)
      .def_readwrite("instances_per_id", &TrainConfig::instances_per_id)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("margin", &TrainConfig::margin)
      .def_readwrite("lambda_tri", &TrainConfig::lambda_tri)
      .def_readwrite("lambda_ent", &TrainConfig::lambda_ent)
      .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
      .def_readwrite("embed_dim", &TrainConfig::embed_dim)
      .def_readwrite("augment_flip", &TrainConfig::augment_flip)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<MiningConfig>(m, "MiningConfig")
      .def(py::init<>())
      .def_property("tau_policy",
                    [](const MiningConfig& c) { return to_string(c.tau_policy); },
                    [](MiningConfig& c, const std::string& s) { c.tau_policy = tau_policy_from_string(s); })
      .def_readwrite("tau_min_matches", &MiningConfig::tau_min_matches)
      .def_property("positive_source",
                    [](const MiningConfig& c) { return to_string(c.positive_source); },
                    [](MiningConfig& c, const std::string& s) {
                      c.positive_source = positive_source_from_string(s);
                    });

  py::class_<EmbeddingModel>(m, "EmbeddingModel")
      .def("embed", [](const EmbeddingModel& model, const Eigen::VectorXd& x) {
        return forward(model, x).first;
      })
      .def("logits", [](const EmbeddingModel& model, const Eigen::VectorXd& x) {
        return forward(model, x).second;
      });

  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);

  py::class_<LossReport>(m, "LossReport")
      .def_readonly("e_tri", &LossReport::e_tri)
      .def_readonly("e_ent", &LossReport::e_ent)
      .def_readonly("total", &LossReport::total)
      .def_readonly("active_triplets", &LossReport::active_triplets);

  py::class_<EpochStats>(m, "EpochStats")
      .def_readonly("epoch", &EpochStats::epoch)
      .def_readonly("loss", &EpochStats::loss)
      .def_readonly("lr", &EpochStats::lr);

  m.def("train_vectors",
        [](const std::vector<Eigen::VectorXd>& vectors, const DatasetManifest& manifest,
           const RelationalMatrix& mx, const TrainConfig& cfg, const MiningConfig& mining) {
          TrainingData data = training_data_from_vectors(vectors, manifest);
          TrainResult r = train(data, manifest, mx, cfg, mining);
          return py::make_tuple(r.model, r.history);
        },
        py::arg("vectors"), py::arg("manifest"), py::arg("matrix"),
        py::arg("config") = TrainConfig{}, py::arg("mining") = MiningConfig{});

  m.def("triplet_loss", &triplet_loss, py::arg("e_a"), py::arg("e_p"), py::arg("e_n"),
        py::arg("margin") = 0.3);
  m.def("cross_entropy", &cross_entropy, py::arg("logits"), py::arg("label"));
  m.def("lr_at_epoch", &lr_at_epoch, py::arg("config"), py::arg("epoch"));
  m.def("pooled_grid_descriptor", &pooled_grid_descriptor, py::arg("image"), py::arg("grid") = 8,
        py::arg("pool_size") = 224);

  m.def("pairwise_distances", &pairwise_distances, py::arg("queries"), py::arg("gallery"));
  m.def("compute_metrics",
        [](const Eigen::MatrixXd& dists, const std::vector<std::string>& query_ids,
           const std::vector<std::string>& gallery_ids) {
          RankingResult r = rank(dists, query_ids, gallery_ids);
          py::dict d;
          d["mAP"] = mean_average_precision(r);
          d["cmc@1"] = cmc(r, 1);
          d["cmc@5"] = cmc(r, 5);
          d["cmc@10"] = cmc(r, 10);
          return d;
        },
        py::arg("dists"), py::arg("query_ids"), py::arg("gallery_ids"));
  m.def("k_reciprocal_rerank", &k_reciprocal_rerank, py::arg("all_dists"), py::arg("num_query"),
        py::arg("k1") = 60, py::arg("k2") = 15, py::arg("eta") = 0.2);

  m.def("default_config_json", [] { return RunConfig{}.to_json(); });

#ifdef RPTM_VERSION
  m.attr("__version__") = RPTM_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
