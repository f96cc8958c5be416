#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/nn.hpp"

namespace xmodal {

// One labeled event observed through both modalities.
struct PairedSample {
  Vec a;  // modality A features (the teacher's input)
  Vec b;  // modality B features (the students' input)
  int label = 0;
  int subject = 0;
};

struct GenConfig {
  int num_classes = 10;
  int num_subjects = 12;
  int samples_per_subject_per_class = 30;
  int dim_a = 16;
  int dim_b = 16;
  double noise_sigma = 0.5;
  double subject_sigma = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

// Cross-subject partition: the three splits draw from pairwise disjoint
// subject sets. Subjects are assigned in thirds - first third teacher-train,
// second third student-train, remainder test.
struct DatasetSplit {
  int num_classes = 0;
  int num_subjects = 0;
  int dim_a = 0;
  int dim_b = 0;
  std::vector<PairedSample> teacher_train;
  std::vector<PairedSample> student_train;
  std::vector<PairedSample> test;
};

// Synthesizes a paired two-modality classification dataset. Per class,
// modality A and modality B get independent prototypes (uniform in [-1, 1]);
// per subject, each modality gets a Gaussian offset. A-samples are
// prototype + offset + noise; B-samples are tanh(prototype + offset) + noise,
// so the modalities share only the latent class and subject.
DatasetSplit generate(const GenConfig& config);

// Replaces exactly round(fraction * N) labels, chosen uniformly without
// replacement, with a uniformly random wrong label.
std::vector<int> inject_label_noise(const std::vector<int>& labels, double fraction,
                                    int num_classes, std::uint64_t seed);

// Frozen teacher predictions over a sample list. Stores raw logits; softmax
// views at any temperature are derived on demand.
class TeacherCache {
 public:
  TeacherCache() = default;
  explicit TeacherCache(std::vector<LogitVector> logits);

  int size() const { return static_cast<int>(logits_.size()); }
  const LogitVector& logits(int i) const { return logits_[i]; }
  ProbVector probs(int i) const;                  // tau = 1
  ProbVector probs_at(int i, double tau) const;
  int hard_label(int i) const { return hard_labels_[i]; }

 private:
  std::vector<LogitVector> logits_;
  std::vector<int> hard_labels_;
};

TeacherCache cache_teacher_predictions(const MlpNetwork& teacher,
                                       const std::vector<PairedSample>& samples);

// Feature/label views consumed by the trainer.
std::vector<Vec> modality_a(const std::vector<PairedSample>& samples);
std::vector<Vec> modality_b(const std::vector<PairedSample>& samples);
std::vector<int> labels_of(const std::vector<PairedSample>& samples);

// Split files are line-oriented text: header "C S D_a D_b", then one line
// per sample "subject label a_1 .. a_Da b_1 .. b_Db", 9 significant digits.
void save_split_file(const std::string& path, const DatasetSplit& meta,
                     const std::vector<PairedSample>& samples);
std::vector<PairedSample> load_split_file(const std::string& path, DatasetSplit& meta);

// Writes/reads teacher_train.txt, student_train.txt, test.txt under dir.
void save_dataset(const std::string& dir, const DatasetSplit& split);
DatasetSplit load_dataset(const std::string& dir);

}  // namespace xmodal
