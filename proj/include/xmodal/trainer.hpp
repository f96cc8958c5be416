#pragma once

#include <functional>
#include <vector>

#include "xmodal/data.hpp"
#include "xmodal/losses.hpp"

namespace xmodal {

struct TrainHyper {
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class CombineMode { kAverage, kMax };

std::string combine_mode_name(CombineMode mode);

struct DistillConfig {
  LossKind loss = LossKind::ce_hard();
  int num_students = 1;
  CombineMode combine = CombineMode::kAverage;
  TrainHyper hyper;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double teacher_term = 0.0;     // teacher-facing part of mean_loss
  double peer_term = 0.0;        // mutual part; identically 0 without peers
  double train_accuracy = 0.0;   // running accuracy against the supervision labels
};
using TrainHistory = std::vector<EpochRecord>;

// Called after every completed epoch with the network state at that point.
using EpochObserver = std::function<void(int epoch, const MlpNetwork& net)>;

// Mini-batch SGD on softmax cross-entropy against the given labels. The
// shuffle schedule is a fixed function of hyper.seed.
TrainHistory train_supervised(MlpNetwork& net, const std::vector<Vec>& inputs,
                              const std::vector<int>& labels, const TrainHyper& hyper,
                              const EpochObserver& observer = {});

// Trains one student against the frozen teacher cache with the selected loss
// (KL at the loss's tau, or hard CE). Backpropagates into the student only.
TrainHistory distill_single(MlpNetwork& student, const std::vector<Vec>& inputs,
                            const TeacherCache& teacher, const LossKind& loss,
                            const TrainHyper& hyper, const EpochObserver& observer = {});

struct TrainedEnsemble {
  std::vector<MlpNetwork> students;
  DistillConfig config;
  std::vector<TrainHistory> history;  // one per student
};

// Joint training of config.num_students students, each minimizing hard CE
// against the teacher plus the mean softened peer term. Per mini-batch, all
// students are forwarded with their current parameters, every gradient is
// computed against those frozen peer predictions, and all students step
// simultaneously. Student k is initialized from derive_seed(hyper.seed, k).
TrainedEnsemble mutual_distill(const std::vector<int>& student_dims,
                               const std::vector<Vec>& inputs, const TeacherCache& teacher,
                               const DistillConfig& config);

// Same loop with explicit initial students; `mutual` toggles the peer term
// (off reproduces the ensemble-without-mutual baseline: independent students
// sharing the data order).
TrainedEnsemble train_ensemble(std::vector<MlpNetwork> students, const std::vector<Vec>& inputs,
                               const TeacherCache& teacher, const DistillConfig& config,
                               bool mutual);

// average: element-wise mean of the students' tau = 1 softmaxes.
// max: element-wise maximum, renormalized to sum 1.
ProbVector ensemble_predict(const std::vector<MlpNetwork>& students, const Vec& input,
                            CombineMode mode);

// Fraction of samples whose predicted argmax (lowest index on ties) equals
// the label.
double evaluate(const MlpNetwork& net, const std::vector<Vec>& inputs,
                const std::vector<int>& labels);
double evaluate_ensemble(const std::vector<MlpNetwork>& students, CombineMode mode,
                         const std::vector<Vec>& inputs, const std::vector<int>& labels);

}  // namespace xmodal
