#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "matk/attacks.hpp"
#include "matk/dataset.hpp"
#include "matk/defense.hpp"
#include "matk/embedder.hpp"
#include "matk/eval.hpp"
#include "matk/metrics.hpp"
#include "matk/util.hpp"

namespace py = pybind11;
using namespace matk;

namespace {

Tensor tensor_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  std::vector<int> shape;
  for (py::ssize_t i = 0; i < arr.ndim(); ++i)
    shape.push_back(static_cast<int>(arr.shape(i)));
  std::vector<float> data(arr.data(), arr.data() + arr.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<float> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (int d : t.shape()) shape.push_back(d);
  py::array_t<float> arr(shape);
  std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
  return arr;
}

std::vector<ModelParams> model_list(const py::object& models) {
  std::vector<ModelParams> out;
  if (py::isinstance<ModelParams>(models)) {
    out.push_back(models.cast<ModelParams>());
  } else {
    for (const auto& m : models.cast<py::list>()) out.push_back(m.cast<ModelParams>());
  }
  return out;
}

py::dict report_dict(const EvalReport& report) {
  py::dict rank;
  for (const auto& [k, v] : report.rank) rank[py::int_(k)] = v;
  py::dict out;
  out["protocol"] = protocol_name(report.protocol);
  out["mAP"] = report.mAP;
  out["rank"] = rank;
  out["num_probes_evaluated"] = report.num_probes_evaluated;
  return out;
}

}  // namespace

PYBIND11_MODULE(matk, m) {
  m.doc() = "metric attack toolkit: embedder training, FGSM-family metric attacks, "
            "re-identification evaluation and metric-preserving defense";

  py::register_exception<Error>(m, "MatkError");

  py::enum_<Split>(m, "Split")
      .value("train", Split::kTrain)
      .value("probe", Split::kProbe)
      .value("gallery", Split::kGallery);

  py::class_<ImageRecord>(m, "ImageRecord")
      .def(py::init([](py::array_t<float, py::array::c_style | py::array::forcecast> pixels,
                       int identity, int camera) {
             ImageRecord rec;
             rec.pixels = tensor_from_array(std::move(pixels));
             if (rec.pixels.rank() != 3) throw Error("pixels must be an HxWxC array");
             rec.identity = identity;
             rec.camera = camera;
             return rec;
           }),
           py::arg("pixels"), py::arg("identity") = 0, py::arg("camera") = 0)
      .def_property_readonly("pixels",
                             [](const ImageRecord& r) { return array_from_tensor(r.pixels); })
      .def_readwrite("identity", &ImageRecord::identity)
      .def_readwrite("camera", &ImageRecord::camera)
      .def_readwrite("source_path", &ImageRecord::source_path)
      .def("__repr__", [](const ImageRecord& r) {
        return "<ImageRecord identity=" + std::to_string(r.identity) + " camera=" +
               std::to_string(r.camera) + " shape=" + r.pixels.shape_str() + ">";
      });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("train", &Dataset::train)
      .def_readonly("probe", &Dataset::probe)
      .def_readonly("gallery", &Dataset::gallery)
      .def_readonly("height", &Dataset::height)
      .def_readonly("width", &Dataset::width)
      .def_readonly("channels", &Dataset::channels);

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init())
      .def_readwrite("num_train_ids", &SynthSpec::num_train_ids)
      .def_readwrite("num_test_ids", &SynthSpec::num_test_ids)
      .def_readwrite("images_per_id_per_camera", &SynthSpec::images_per_id_per_camera)
      .def_readwrite("num_cameras", &SynthSpec::num_cameras)
      .def_readwrite("height", &SynthSpec::height)
      .def_readwrite("width", &SynthSpec::width)
      .def_readwrite("channels", &SynthSpec::channels)
      .def_readwrite("seed", &SynthSpec::seed);

  m.def("synth_generate", &synth_generate, py::arg("spec"));
  m.def(
      "load_dataset_dir", [](const std::string& root) { return load_dataset_dir(root); },
      py::arg("root"));
  m.def(
      "write_dataset_dir",
      [](const Dataset& ds, const std::string& root) { write_dataset_dir(ds, root); },
      py::arg("dataset"), py::arg("root"));

  py::class_<EmbedderConfig>(m, "EmbedderConfig")
      .def(py::init())
      .def_readwrite("height", &EmbedderConfig::height)
      .def_readwrite("width", &EmbedderConfig::width)
      .def_readwrite("channels", &EmbedderConfig::channels)
      .def_readwrite("hidden_sizes", &EmbedderConfig::hidden_sizes)
      .def_readwrite("feature_dim", &EmbedderConfig::feature_dim)
      .def_readwrite("num_classes", &EmbedderConfig::num_classes);

  py::class_<TrainHyper>(m, "TrainHyper")
      .def(py::init())
      .def_readwrite("learning_rate", &TrainHyper::learning_rate)
      .def_readwrite("epochs", &TrainHyper::epochs)
      .def_readwrite("batch_size", &TrainHyper::batch_size)
      .def_readwrite("margin", &TrainHyper::margin)
      .def_readwrite("pk_p", &TrainHyper::pk_p)
      .def_readwrite("pk_k", &TrainHyper::pk_k)
      .def_readwrite("seed", &TrainHyper::seed);

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly("config", [](const ModelParams& p) { return p.config; })
      .def_readonly("seed", &ModelParams::seed)
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });

  m.def("init_model", &init_model, py::arg("config"), py::arg("seed"));
  m.def(
      "extract_features",
      [](const ModelParams& model, const std::vector<ImageRecord>& images) {
        return array_from_tensor(extract_features(model, images));
      },
      py::arg("model"), py::arg("images"));
  m.def(
      "train_cross_entropy",
      [](const ModelParams& model, const std::vector<ImageRecord>& train,
         const TrainHyper& hyper) {
        TrainResult r = train_cross_entropy(model, train, hyper);
        return py::make_tuple(r.model, r.epoch_loss);
      },
      py::arg("model"), py::arg("train_set"), py::arg("hyper"));
  m.def(
      "train_triplet",
      [](const ModelParams& model, const std::vector<ImageRecord>& train,
         const TrainHyper& hyper) {
        TrainResult r = train_triplet(model, train, hyper);
        return py::make_tuple(r.model, r.epoch_loss);
      },
      py::arg("model"), py::arg("train_set"), py::arg("hyper"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  py::class_<MetricSpec>(m, "MetricSpec");
  m.def("euclidean", &MetricSpec::euclidean);
  m.def(
      "mahalanobis",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> mat) {
        return MetricSpec::mahalanobis(tensor_from_array(std::move(mat)));
      },
      py::arg("matrix"));
  m.def(
      "project_psd",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> mat, double tol) {
        return array_from_tensor(project_psd(tensor_from_array(std::move(mat)), tol));
      },
      py::arg("matrix"), py::arg("tol") = 0.0);
  m.def(
      "distance",
      [](const MetricSpec& metric,
         py::array_t<float, py::array::c_style | py::array::forcecast> p,
         py::array_t<float, py::array::c_style | py::array::forcecast> x) {
        return metric_distance(metric, tensor_from_array(std::move(p)),
                               tensor_from_array(std::move(x)));
      },
      py::arg("metric"), py::arg("p"), py::arg("x"));
  m.def(
      "pairwise_distances",
      [](const MetricSpec& metric,
         py::array_t<float, py::array::c_style | py::array::forcecast> p,
         py::array_t<float, py::array::c_style | py::array::forcecast> x) {
        return array_from_tensor(pairwise_distances(metric, tensor_from_array(std::move(p)),
                                                    tensor_from_array(std::move(x))));
      },
      py::arg("metric"), py::arg("probe_features"), py::arg("gallery_features"));

  py::enum_<AttackMethod>(m, "AttackMethod")
      .value("fgsm", AttackMethod::kFgsm)
      .value("i_fgsm", AttackMethod::kIFgsm)
      .value("mi_fgsm", AttackMethod::kMiFgsm);

  py::class_<AttackConfig>(m, "AttackConfig")
      .def(py::init())
      .def_readwrite("method", &AttackConfig::method)
      .def_readwrite("epsilon", &AttackConfig::epsilon)
      .def_readwrite("alpha", &AttackConfig::alpha)
      .def_readwrite("mu", &AttackConfig::mu)
      .def_readwrite("iters", &AttackConfig::iters)
      .def_readwrite("seed", &AttackConfig::seed)
      .def_property(
          "targeted",
          [](const AttackConfig& c) { return c.mode == AttackMode::kTargeted; },
          [](AttackConfig& c, bool t) {
            c.mode = t ? AttackMode::kTargeted : AttackMode::kNonTargeted;
          })
      .def_property(
          "target_identity",
          [](const AttackConfig& c) { return c.target_policy.identity; },
          [](AttackConfig& c, int id) {
            c.target_policy.kind =
                id >= 0 ? TargetPolicy::kFixedIdentity : TargetPolicy::kRandomOther;
            c.target_policy.identity = id;
          })
      .def("resolved_iters", &AttackConfig::resolved_iters);

  py::class_<AdversarialExample>(m, "AdversarialExample")
      .def_property_readonly(
          "adversarial", [](const AdversarialExample& e) { return array_from_tensor(e.adversarial); })
      .def_property_readonly("original", [](const AdversarialExample& e) { return e.original; })
      .def_readonly("loss_before", &AdversarialExample::loss_before)
      .def_readonly("loss_after", &AdversarialExample::loss_after)
      .def_readonly("attacked", &AdversarialExample::attacked)
      .def_readonly("target_identity", &AdversarialExample::target_identity);

  m.def("default_iters", &default_iters, py::arg("epsilon"));
  m.def(
      "clip_eps",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> adv,
         py::array_t<float, py::array::c_style | py::array::forcecast> orig, float eps) {
        return array_from_tensor(
            clip_eps(tensor_from_array(std::move(adv)), tensor_from_array(std::move(orig)), eps));
      },
      py::arg("x_adv"), py::arg("x_orig"), py::arg("epsilon"));
  m.def(
      "attack_gallery",
      [](const py::object& models, const MetricSpec& metric,
         const std::vector<ImageRecord>& probe_set, const std::vector<ImageRecord>& gallery_set,
         const AttackConfig& config) {
        return attack_gallery(std::span<const ModelParams>(model_list(models)), metric,
                              probe_set, gallery_set, config);
      },
      py::arg("models"), py::arg("metric"), py::arg("probe_set"), py::arg("gallery_set"),
      py::arg("config"));
  m.def(
      "export_adversarial_gallery",
      [](const std::vector<AdversarialExample>& examples, const std::string& out_dir) {
        return export_adversarial_gallery(examples, out_dir);
      },
      py::arg("examples"), py::arg("out_dir"));

  m.def(
      "generate_adv_training_set",
      [](const ModelParams& model, const std::vector<ImageRecord>& train,
         const AttackConfig& cfg, const MetricSpec& metric) {
        return generate_adv_training_set(model, train, cfg, metric);
      },
      py::arg("model"), py::arg("train_set"), py::arg("attack_config"),
      py::arg("metric") = MetricSpec::euclidean());
  m.def(
      "train_metric_preserving",
      [](const ModelParams& clean, const AttackConfig& attack_cfg, const MetricSpec& metric,
         const TrainHyper& retrain, const std::vector<ImageRecord>& train) {
        DefensePlan plan{clean, attack_cfg, metric, retrain};
        TrainResult r = train_metric_preserving(plan, train);
        return py::make_tuple(r.model, r.epoch_loss);
      },
      py::arg("clean_model"), py::arg("attack_config"), py::arg("metric"),
      py::arg("retrain_hyper"), py::arg("train_set"));

  py::enum_<Protocol>(m, "Protocol")
      .value("cross_camera", Protocol::kCrossCamera)
      .value("all", Protocol::kAll);

  m.def(
      "evaluate",
      [](const ModelParams& model, const MetricSpec& metric,
         const std::vector<ImageRecord>& probe, const std::vector<ImageRecord>& gallery,
         const std::vector<int>& ks, Protocol protocol) {
        Tensor pf = extract_features(model, probe);
        Tensor gf = extract_features(model, gallery);
        Tensor dist = pairwise_distances(metric, pf, gf);
        return report_dict(evaluate(dist, identities(probe), identities(gallery),
                                    cameras(probe), cameras(gallery), ks, protocol));
      },
      py::arg("model"), py::arg("metric"), py::arg("probe"), py::arg("gallery"),
      py::arg("ks") = std::vector<int>{1, 5, 10}, py::arg("protocol") = Protocol::kCrossCamera);
  m.def(
      "mean_average_precision",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> dist,
         const std::vector<int>& plabels, const std::vector<int>& glabels,
         const std::vector<int>& pcams, const std::vector<int>& gcams, Protocol protocol) {
        return mean_average_precision(tensor_from_array(std::move(dist)), plabels, glabels,
                                      pcams, gcams, protocol);
      },
      py::arg("dist"), py::arg("probe_labels"), py::arg("gallery_labels"),
      py::arg("probe_cams"), py::arg("gallery_cams"),
      py::arg("protocol") = Protocol::kCrossCamera);
  m.def(
      "cmc",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> dist,
         const std::vector<int>& plabels, const std::vector<int>& glabels,
         const std::vector<int>& pcams, const std::vector<int>& gcams,
         const std::vector<int>& ks, Protocol protocol) {
        return cmc(tensor_from_array(std::move(dist)), plabels, glabels, pcams, gcams, ks,
                   protocol);
      },
      py::arg("dist"), py::arg("probe_labels"), py::arg("gallery_labels"),
      py::arg("probe_cams"), py::arg("gallery_cams"), py::arg("ks"),
      py::arg("protocol") = Protocol::kCrossCamera);
  m.def("set_max_threads", &set_max_threads, py::arg("n"));
}
