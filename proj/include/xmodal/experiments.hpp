#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/data.hpp"
#include "xmodal/trainer.hpp"

namespace xmodal {

// One result line of an experiment sweep. Serialized to results.csv in this
// column order; wall_time_s is last so determinism checks can strip it.
struct ReportRow {
  std::string experiment_id;
  std::string fingerprint;  // stable hash of the resolved configuration
  std::uint64_t seed = 0;
  std::string regime;
  int num_students = 1;
  double tau = 1.0;
  std::string loss_kind;
  std::string combine_mode = "-";
  double noise_fraction = 0.0;
  double teacher_acc = 0.0;  // on student-train, constant per frozen teacher
  double test_accuracy = 0.0;
  double wall_time_s = 0.0;
};

std::string csv_header();
std::string csv_line(const ReportRow& row);

// Canonical (sorted-config) row order, independent of execution schedule.
void sort_rows(std::vector<ReportRow>& rows);

void write_results_csv(const std::string& path, std::vector<ReportRow> rows);
std::vector<ReportRow> read_results_csv(const std::string& path);

std::uint64_t fnv1a64(const std::string& text);
std::string fingerprint_hex(const std::string& canonical);

// Everything a sweep needs besides its own grid: dataset parameters, network
// widths, and the two training regimes' hyper-parameters. The seed fields of
// `student` are ignored by sweeps (per-row seeds come from the seed list).
struct ExperimentSetup {
  GenConfig gen;
  std::vector<int> hidden = {32, 32};
  TrainHyper student;
  TrainHyper teacher;
  double mutual_tau = 10.0;
  PeerKind peer_kind = PeerKind::kKL;
};

std::string canonical_setup_string(const ExperimentSetup& setup);

// Dataset plus frozen teacher plus its cached student-train predictions;
// shared by every row of a sweep.
struct PreparedExperiment {
  ExperimentSetup setup;
  DatasetSplit data;
  std::vector<Vec> student_b;
  std::vector<Vec> test_b;
  std::vector<int> student_labels;
  std::vector<int> test_labels;
  MlpNetwork teacher = MlpNetwork::zeros({1, 2});
  double teacher_acc = 0.0;       // modality A accuracy on student-train
  double teacher_test_acc = 0.0;  // modality A accuracy on test
  TeacherCache cache;
};

// Generates (or adopts) the dataset, trains (or adopts) the teacher on
// teacher-train modality A, and freezes its student-train predictions.
PreparedExperiment prepare_experiment(const ExperimentSetup& setup);
PreparedExperiment prepare_experiment(const ExperimentSetup& setup, DatasetSplit data);
PreparedExperiment prepare_experiment(const ExperimentSetup& setup, DatasetSplit data,
                                      MlpNetwork teacher);

// Supervised students on modality B with noisy true labels.
std::vector<ReportRow> sweep_noise(const PreparedExperiment& prep,
                                   const std::vector<double>& fractions,
                                   const std::vector<std::uint64_t>& seeds);

// Single-student KL distillation over a temperature grid.
std::vector<ReportRow> sweep_temperature(const PreparedExperiment& prep,
                                         const std::vector<double>& taus,
                                         const std::vector<std::uint64_t>& seeds);

// Single student, independent ensembles, and mutual learning over the
// student-count grid, evaluated under both combination modes.
std::vector<ReportRow> sweep_students(const PreparedExperiment& prep, const std::vector<int>& ks,
                                      const std::vector<std::uint64_t>& seeds);

// Full supervision, KL across the tau grid, hard CE, CE+mutual with K = 2
// and 3, and the CE-peer ablation, on shared seeds.
std::vector<ReportRow> compare_losses(const PreparedExperiment& prep,
                                      const std::vector<double>& kl_taus,
                                      const std::vector<std::uint64_t>& seeds);

// Mean / sample standard deviation of test accuracy per configuration group.
struct SummaryRow {
  std::string experiment_id;
  std::string regime;
  std::string loss_kind;
  int num_students = 1;
  double tau = 1.0;
  std::string combine_mode;
  double noise_fraction = 0.0;
  int n = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows);
std::string render_summary(const std::vector<SummaryRow>& rows);

// Loss-comparison summary ordered full supervision, KL (best tau), CE,
// CE+mutual, ablation; average combination.
std::string render_loss_comparison(const std::vector<ReportRow>& rows);

}  // namespace xmodal
