#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xmodal/data.hpp"
#include "xmodal/experiments.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/model_io.hpp"
#include "xmodal/nn.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/trainer.hpp"

namespace py = pybind11;
using namespace xmodal;

PYBIND11_MODULE(_core, m) {
  m.doc() = "cross-modal distillation core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // --- network ---
  py::class_<MlpNetwork>(m, "MlpNetwork")
      .def(py::init<std::vector<int>, std::uint64_t>(), py::arg("dims"), py::arg("seed"))
      .def_static("zeros", &MlpNetwork::zeros, py::arg("dims"))
      .def_property_readonly("layer_dims", &MlpNetwork::layer_dims)
      .def_property_readonly("input_dim", &MlpNetwork::input_dim)
      .def_property_readonly("num_classes", &MlpNetwork::num_classes)
      .def_property_readonly("num_parameters", &MlpNetwork::num_parameters)
      .def("forward", &MlpNetwork::forward, py::arg("input"));

  m.def("bitwise_equal", &bitwise_equal);
  m.def("softened_softmax", &softened_softmax, py::arg("logits"), py::arg("tau"));
  m.def("log_softened_softmax", &log_softened_softmax, py::arg("logits"), py::arg("tau"));
  m.def("shannon_entropy", &shannon_entropy);
  m.def("argmax_lowest", &argmax_lowest);
  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("stream"));
  m.def("save_model", &save_model, py::arg("path"), py::arg("net"));
  m.def("load_model", &load_model, py::arg("path"));

  // --- losses ---
  py::enum_<PeerKind>(m, "PeerKind")
      .value("KL", PeerKind::kKL)
      .value("CE", PeerKind::kCrossEntropyHard);

  py::class_<LossKind>(m, "LossKind")
      .def_static("kl", &LossKind::kl, py::arg("tau"))
      .def_static("ce_hard", &LossKind::ce_hard)
      .def_static("mutual", &LossKind::mutual, py::arg("peer"), py::arg("tau"))
      .def_readwrite("tau", &LossKind::tau)
      .def_readwrite("reverse_kl", &LossKind::reverse_kl)
      .def_readwrite("tau_squared", &LossKind::tau_squared)
      .def_property_readonly("name", &LossKind::name);

  m.def("kl_loss", &kl_loss, py::arg("p_student"), py::arg("p_teacher"));
  m.def("ce_hard_loss", &ce_hard_loss, py::arg("p_student"), py::arg("p_teacher"));
  m.def("mutual_loss", &mutual_loss, py::arg("k"), py::arg("p_all"), py::arg("logits_all"),
        py::arg("p_teacher"), py::arg("tau"), py::arg("peer_kind"));
  m.def("ce_hard_grad", &ce_hard_grad, py::arg("student_logits"), py::arg("teacher_label"));
  m.def("kl_grad", &kl_grad, py::arg("student_logits"), py::arg("target_tau"), py::arg("tau"),
        py::arg("reverse_kl") = false, py::arg("tau_squared") = false);

  // --- data ---
  py::class_<PairedSample>(m, "PairedSample")
      .def(py::init<>())
      .def_readwrite("a", &PairedSample::a)
      .def_readwrite("b", &PairedSample::b)
      .def_readwrite("label", &PairedSample::label)
      .def_readwrite("subject", &PairedSample::subject);

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_readwrite("num_classes", &GenConfig::num_classes)
      .def_readwrite("num_subjects", &GenConfig::num_subjects)
      .def_readwrite("samples_per_subject_per_class", &GenConfig::samples_per_subject_per_class)
      .def_readwrite("dim_a", &GenConfig::dim_a)
      .def_readwrite("dim_b", &GenConfig::dim_b)
      .def_readwrite("noise_sigma", &GenConfig::noise_sigma)
      .def_readwrite("subject_sigma", &GenConfig::subject_sigma)
      .def_readwrite("seed", &GenConfig::seed);

  py::class_<DatasetSplit>(m, "DatasetSplit")
      .def_readonly("num_classes", &DatasetSplit::num_classes)
      .def_readonly("num_subjects", &DatasetSplit::num_subjects)
      .def_readonly("dim_a", &DatasetSplit::dim_a)
      .def_readonly("dim_b", &DatasetSplit::dim_b)
      .def_readonly("teacher_train", &DatasetSplit::teacher_train)
      .def_readonly("student_train", &DatasetSplit::student_train)
      .def_readonly("test", &DatasetSplit::test);

  m.def("generate", &generate, py::arg("config"));
  m.def("inject_label_noise", &inject_label_noise, py::arg("labels"), py::arg("fraction"),
        py::arg("num_classes"), py::arg("seed"));
  m.def("modality_a", &modality_a);
  m.def("modality_b", &modality_b);
  m.def("labels_of", &labels_of);
  m.def("save_dataset", &save_dataset, py::arg("dir"), py::arg("split"));
  m.def("load_dataset", &load_dataset, py::arg("dir"));

  py::class_<TeacherCache>(m, "TeacherCache")
      .def_property_readonly("size", &TeacherCache::size)
      .def("logits", &TeacherCache::logits, py::arg("i"))
      .def("probs", &TeacherCache::probs, py::arg("i"))
      .def("probs_at", &TeacherCache::probs_at, py::arg("i"), py::arg("tau"))
      .def("hard_label", &TeacherCache::hard_label, py::arg("i"));

  m.def("cache_teacher_predictions", &cache_teacher_predictions, py::arg("teacher"),
        py::arg("samples"));

  // --- training ---
  py::class_<TrainHyper>(m, "TrainHyper")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainHyper::epochs)
      .def_readwrite("batch_size", &TrainHyper::batch_size)
      .def_readwrite("learning_rate", &TrainHyper::learning_rate)
      .def_readwrite("seed", &TrainHyper::seed);

  py::enum_<CombineMode>(m, "CombineMode")
      .value("AVERAGE", CombineMode::kAverage)
      .value("MAX", CombineMode::kMax);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("mean_loss", &EpochRecord::mean_loss)
      .def_readonly("teacher_term", &EpochRecord::teacher_term)
      .def_readonly("peer_term", &EpochRecord::peer_term)
      .def_readonly("train_accuracy", &EpochRecord::train_accuracy);

  py::class_<DistillConfig>(m, "DistillConfig")
      .def(py::init<>())
      .def_readwrite("loss", &DistillConfig::loss)
      .def_readwrite("num_students", &DistillConfig::num_students)
      .def_readwrite("combine", &DistillConfig::combine)
      .def_readwrite("hyper", &DistillConfig::hyper);

  py::class_<TrainedEnsemble>(m, "TrainedEnsemble")
      .def_readonly("students", &TrainedEnsemble::students)
      .def_readonly("history", &TrainedEnsemble::history);

  m.def(
      "train_supervised",
      [](MlpNetwork& net, const std::vector<Vec>& inputs, const std::vector<int>& labels,
         const TrainHyper& hyper) { return train_supervised(net, inputs, labels, hyper); },
      py::arg("net"), py::arg("inputs"), py::arg("labels"), py::arg("hyper"));
  m.def(
      "distill_single",
      [](MlpNetwork& student, const std::vector<Vec>& inputs, const TeacherCache& teacher,
         const LossKind& loss, const TrainHyper& hyper) {
        return distill_single(student, inputs, teacher, loss, hyper);
      },
      py::arg("student"), py::arg("inputs"), py::arg("teacher"), py::arg("loss"),
      py::arg("hyper"));
  m.def("mutual_distill", &mutual_distill, py::arg("student_dims"), py::arg("inputs"),
        py::arg("teacher"), py::arg("config"));
  m.def("ensemble_predict", &ensemble_predict, py::arg("students"), py::arg("input"),
        py::arg("mode"));
  m.def("evaluate", &evaluate, py::arg("net"), py::arg("inputs"), py::arg("labels"));
  m.def("evaluate_ensemble", &evaluate_ensemble, py::arg("students"), py::arg("mode"),
        py::arg("inputs"), py::arg("labels"));
}
