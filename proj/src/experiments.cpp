#include "xmodal/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <type_traits>

#include "xmodal/rng.hpp"

namespace xmodal {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string fmt_acc(double v) { return fmt("%.6f", v); }
std::string fmt_g(double v) { return fmt("%.6g", v); }

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::vector<int> student_dims(const PreparedExperiment& prep) {
  std::vector<int> dims;
  dims.push_back(prep.data.dim_b);
  dims.insert(dims.end(), prep.setup.hidden.begin(), prep.setup.hidden.end());
  dims.push_back(prep.data.num_classes);
  return dims;
}

TrainHyper student_hyper(const PreparedExperiment& prep, std::uint64_t seed) {
  TrainHyper h = prep.setup.student;
  h.seed = seed;
  return h;
}

ReportRow base_row(const PreparedExperiment& prep, std::string experiment_id,
                   std::string fingerprint, std::uint64_t seed) {
  ReportRow row;
  row.experiment_id = std::move(experiment_id);
  row.fingerprint = std::move(fingerprint);
  row.seed = seed;
  row.teacher_acc = prep.teacher_acc;
  return row;
}

// Single-network training runs shared by several sweeps. Initialization uses
// stream 0 of the row seed so the first member of any ensemble with the same
// seed starts from identical parameters.
double run_supervised_b(const PreparedExperiment& prep, const std::vector<int>& labels,
                        std::uint64_t seed) {
  MlpNetwork net(student_dims(prep), derive_seed(seed, 0));
  train_supervised(net, prep.student_b, labels, student_hyper(prep, seed));
  return evaluate(net, prep.test_b, prep.test_labels);
}

double run_distill_single(const PreparedExperiment& prep, const LossKind& loss,
                          std::uint64_t seed) {
  MlpNetwork net(student_dims(prep), derive_seed(seed, 0));
  distill_single(net, prep.student_b, prep.cache, loss, student_hyper(prep, seed));
  return evaluate(net, prep.test_b, prep.test_labels);
}

TrainedEnsemble run_ensemble(const PreparedExperiment& prep, int k, PeerKind peer, bool mutual,
                             std::uint64_t seed) {
  DistillConfig cfg;
  cfg.loss = LossKind::mutual(peer, prep.setup.mutual_tau);
  cfg.num_students = k;
  cfg.hyper = student_hyper(prep, seed);
  std::vector<MlpNetwork> students;
  students.reserve(k);
  for (int i = 0; i < k; ++i)
    students.emplace_back(student_dims(prep), derive_seed(seed, i));
  return train_ensemble(std::move(students), prep.student_b, prep.cache, cfg, mutual);
}

std::string seeds_key(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::uint64_t s : seeds) {
    if (!out.empty()) out += '/';
    out += std::to_string(s);
  }
  return out;
}

template <typename T>
std::string grid_key(const std::vector<T>& values) {
  std::string out;
  for (const T& v : values) {
    if (!out.empty()) out += '/';
    if constexpr (std::is_same_v<T, double>)
      out += fmt_g(v);
    else
      out += std::to_string(v);
  }
  return out;
}

void check_seeds(const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("seed list is empty");
}

}  // namespace

std::string csv_header() {
  return "experiment_id,fingerprint,seed,regime,num_students,tau,loss_kind,combine_mode,"
         "noise_fraction,teacher_acc_on_student_train,test_accuracy,wall_time_s";
}

std::string csv_line(const ReportRow& row) {
  std::string out;
  out += row.experiment_id;
  out += ',';
  out += row.fingerprint;
  out += ',';
  out += std::to_string(row.seed);
  out += ',';
  out += row.regime;
  out += ',';
  out += std::to_string(row.num_students);
  out += ',';
  out += fmt_g(row.tau);
  out += ',';
  out += row.loss_kind;
  out += ',';
  out += row.combine_mode;
  out += ',';
  out += fmt_g(row.noise_fraction);
  out += ',';
  out += fmt_acc(row.teacher_acc);
  out += ',';
  out += fmt_acc(row.test_accuracy);
  out += ',';
  out += fmt("%.3f", row.wall_time_s);
  return out;
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.experiment_id, a.regime, a.num_students, a.tau, a.loss_kind, a.combine_mode,
                    a.noise_fraction, a.seed) < std::tie(b.experiment_id, b.regime, b.num_students,
                                                         b.tau, b.loss_kind, b.combine_mode,
                                                         b.noise_fraction, b.seed);
  });
}

void write_results_csv(const std::string& path, std::vector<ReportRow> rows) {
  sort_rows(rows);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open results file for writing: " + path);
  out << csv_header() << '\n';
  for (const ReportRow& row : rows) out << csv_line(row) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ReportRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("results file is empty: " + path);
  if (line != csv_header()) throw IoError("unexpected results header in " + path);

  std::vector<ReportRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    if (fields.size() != 12)
      throw IoError("results line " + std::to_string(lineno) + " has " +
                    std::to_string(fields.size()) + " fields, expected 12");
    try {
      ReportRow row;
      row.experiment_id = fields[0];
      row.fingerprint = fields[1];
      row.seed = std::stoull(fields[2]);
      row.regime = fields[3];
      row.num_students = std::stoi(fields[4]);
      row.tau = std::stod(fields[5]);
      row.loss_kind = fields[6];
      row.combine_mode = fields[7];
      row.noise_fraction = std::stod(fields[8]);
      row.teacher_acc = std::stod(fields[9]);
      row.test_accuracy = std::stod(fields[10]);
      row.wall_time_s = std::stod(fields[11]);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw IoError("results line " + std::to_string(lineno) + " has a malformed field");
    }
  }
  return rows;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fingerprint_hex(const std::string& canonical) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

std::string canonical_setup_string(const ExperimentSetup& setup) {
  std::string s;
  s += "C=" + std::to_string(setup.gen.num_classes);
  s += ";S=" + std::to_string(setup.gen.num_subjects);
  s += ";reps=" + std::to_string(setup.gen.samples_per_subject_per_class);
  s += ";Da=" + std::to_string(setup.gen.dim_a);
  s += ";Db=" + std::to_string(setup.gen.dim_b);
  s += ";noise_sigma=" + fmt_g(setup.gen.noise_sigma);
  s += ";subject_sigma=" + fmt_g(setup.gen.subject_sigma);
  s += ";data_seed=" + std::to_string(setup.gen.seed);
  s += ";hidden=" + grid_key(setup.hidden);
  s += ";student_epochs=" + std::to_string(setup.student.epochs);
  s += ";student_bs=" + std::to_string(setup.student.batch_size);
  s += ";student_lr=" + fmt_g(setup.student.learning_rate);
  s += ";teacher_epochs=" + std::to_string(setup.teacher.epochs);
  s += ";teacher_bs=" + std::to_string(setup.teacher.batch_size);
  s += ";teacher_lr=" + fmt_g(setup.teacher.learning_rate);
  s += ";teacher_seed=" + std::to_string(setup.teacher.seed);
  s += ";mutual_tau=" + fmt_g(setup.mutual_tau);
  s += ";peer=";
  s += (setup.peer_kind == PeerKind::kKL ? "kl" : "ce");
  return s;
}

PreparedExperiment prepare_experiment(const ExperimentSetup& setup) {
  return prepare_experiment(setup, generate(setup.gen));
}

PreparedExperiment prepare_experiment(const ExperimentSetup& setup, DatasetSplit data) {
  std::vector<int> dims;
  dims.push_back(data.dim_a);
  dims.insert(dims.end(), setup.hidden.begin(), setup.hidden.end());
  dims.push_back(data.num_classes);
  MlpNetwork teacher(dims, derive_seed(setup.teacher.seed, 0));
  train_supervised(teacher, modality_a(data.teacher_train), labels_of(data.teacher_train),
                   setup.teacher);
  return prepare_experiment(setup, std::move(data), std::move(teacher));
}

PreparedExperiment prepare_experiment(const ExperimentSetup& setup, DatasetSplit data,
                                      MlpNetwork teacher) {
  if (teacher.input_dim() != data.dim_a)
    throw ConfigError("teacher input dim does not match modality A");
  if (teacher.num_classes() != data.num_classes)
    throw ConfigError("teacher class count does not match the dataset");
  if (data.student_train.empty() || data.test.empty())
    throw ConfigError("dataset is missing student-train or test samples");

  PreparedExperiment prep;
  prep.setup = setup;
  prep.student_b = modality_b(data.student_train);
  prep.test_b = modality_b(data.test);
  prep.student_labels = labels_of(data.student_train);
  prep.test_labels = labels_of(data.test);
  prep.teacher_acc =
      evaluate(teacher, modality_a(data.student_train), prep.student_labels);
  prep.teacher_test_acc = evaluate(teacher, modality_a(data.test), prep.test_labels);
  prep.cache = cache_teacher_predictions(teacher, data.student_train);
  prep.teacher = std::move(teacher);
  prep.data = std::move(data);
  return prep;
}

std::vector<ReportRow> sweep_noise(const PreparedExperiment& prep,
                                   const std::vector<double>& fractions,
                                   const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  if (fractions.empty()) throw ConfigError("noise fraction list is empty");
  for (double f : fractions) {
    if (f < 0.0 || f > 1.0) throw ConfigError("noise fraction outside [0,1]: " + fmt_g(f));
  }
  const std::string fp = fingerprint_hex(canonical_setup_string(prep.setup) +
                                         ";experiment=noise_sweep;fractions=" +
                                         grid_key(fractions) + ";seeds=" + seeds_key(seeds));

  std::vector<ReportRow> rows;
  for (double fraction : fractions) {
    for (std::uint64_t seed : seeds) {
      const double t0 = now_seconds();
      // Noise positions are a prefix chain across fractions at the same seed,
      // so higher fractions corrupt a superset of the same labels.
      const std::vector<int> noisy = inject_label_noise(
          prep.student_labels, fraction, prep.data.num_classes, derive_seed(seed, 101));
      const double acc = run_supervised_b(prep, noisy, seed);

      ReportRow row = base_row(prep, "noise_sweep", fp, seed);
      row.regime = "supervised";
      row.loss_kind = "ce";
      row.noise_fraction = fraction;
      row.test_accuracy = acc;
      row.wall_time_s = now_seconds() - t0;
      rows.push_back(std::move(row));
    }
  }
  sort_rows(rows);
  return rows;
}

std::vector<ReportRow> sweep_temperature(const PreparedExperiment& prep,
                                         const std::vector<double>& taus,
                                         const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  if (taus.empty()) throw ConfigError("temperature list is empty");
  for (double tau : taus) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive: " + fmt_g(tau));
  }
  const std::string fp = fingerprint_hex(canonical_setup_string(prep.setup) +
                                         ";experiment=temperature_sweep;taus=" + grid_key(taus) +
                                         ";seeds=" + seeds_key(seeds));

  std::vector<ReportRow> rows;
  for (double tau : taus) {
    for (std::uint64_t seed : seeds) {
      const double t0 = now_seconds();
      const double acc = run_distill_single(prep, LossKind::kl(tau), seed);

      ReportRow row = base_row(prep, "temperature_sweep", fp, seed);
      row.regime = "distill";
      row.loss_kind = "kl";
      row.tau = tau;
      row.test_accuracy = acc;
      row.wall_time_s = now_seconds() - t0;
      rows.push_back(std::move(row));
    }
  }
  sort_rows(rows);
  return rows;
}

std::vector<ReportRow> sweep_students(const PreparedExperiment& prep, const std::vector<int>& ks,
                                      const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  if (ks.empty()) throw ConfigError("student count list is empty");
  for (int k : ks) {
    if (k < 1) throw ConfigError("student count must be >= 1");
  }
  const std::string fp = fingerprint_hex(canonical_setup_string(prep.setup) +
                                         ";experiment=student_sweep;ks=" + grid_key(ks) +
                                         ";seeds=" + seeds_key(seeds));

  const auto both_modes = [&](const TrainedEnsemble& ens, ReportRow row, double elapsed,
                              std::vector<ReportRow>& rows) {
    for (CombineMode mode : {CombineMode::kAverage, CombineMode::kMax}) {
      row.combine_mode = combine_mode_name(mode);
      row.test_accuracy =
          evaluate_ensemble(ens.students, mode, prep.test_b, prep.test_labels);
      row.wall_time_s = elapsed;
      rows.push_back(row);
    }
  };

  std::vector<ReportRow> rows;
  for (int k : ks) {
    for (std::uint64_t seed : seeds) {
      if (k == 1) {
        const double t0 = now_seconds();
        const double acc = run_distill_single(prep, LossKind::ce_hard(), seed);
        const double elapsed = now_seconds() - t0;
        ReportRow row = base_row(prep, "student_sweep", fp, seed);
        row.regime = "single";
        row.loss_kind = "ce";
        row.test_accuracy = acc;
        row.wall_time_s = elapsed;
        for (const char* mode : {"average", "max"}) {
          row.combine_mode = mode;
          rows.push_back(row);
        }
        continue;
      }

      double t0 = now_seconds();
      TrainedEnsemble indep = run_ensemble(prep, k, prep.setup.peer_kind, false, seed);
      ReportRow row = base_row(prep, "student_sweep", fp, seed);
      row.regime = "independent";
      row.num_students = k;
      row.loss_kind = "ce";
      both_modes(indep, row, now_seconds() - t0, rows);

      t0 = now_seconds();
      TrainedEnsemble mut = run_ensemble(prep, k, prep.setup.peer_kind, true, seed);
      row = base_row(prep, "student_sweep", fp, seed);
      row.regime = "mutual";
      row.num_students = k;
      row.tau = prep.setup.mutual_tau;
      row.loss_kind = mut.config.loss.name();
      both_modes(mut, row, now_seconds() - t0, rows);
    }
  }
  sort_rows(rows);
  return rows;
}

std::vector<ReportRow> compare_losses(const PreparedExperiment& prep,
                                      const std::vector<double>& kl_taus,
                                      const std::vector<std::uint64_t>& seeds) {
  check_seeds(seeds);
  if (kl_taus.empty()) throw ConfigError("temperature list is empty");
  for (double tau : kl_taus) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive: " + fmt_g(tau));
  }
  const std::string fp = fingerprint_hex(canonical_setup_string(prep.setup) +
                                         ";experiment=loss_comparison;taus=" + grid_key(kl_taus) +
                                         ";seeds=" + seeds_key(seeds));

  std::vector<ReportRow> rows;
  for (std::uint64_t seed : seeds) {
    double t0 = now_seconds();
    double acc = run_supervised_b(prep, prep.student_labels, seed);
    ReportRow row = base_row(prep, "loss_comparison", fp, seed);
    row.regime = "supervised";
    row.loss_kind = "ce";
    row.test_accuracy = acc;
    row.wall_time_s = now_seconds() - t0;
    rows.push_back(row);

    for (double tau : kl_taus) {
      t0 = now_seconds();
      acc = run_distill_single(prep, LossKind::kl(tau), seed);
      row = base_row(prep, "loss_comparison", fp, seed);
      row.regime = "distill";
      row.loss_kind = "kl";
      row.tau = tau;
      row.test_accuracy = acc;
      row.wall_time_s = now_seconds() - t0;
      rows.push_back(row);
    }

    t0 = now_seconds();
    acc = run_distill_single(prep, LossKind::ce_hard(), seed);
    row = base_row(prep, "loss_comparison", fp, seed);
    row.regime = "distill";
    row.loss_kind = "ce";
    row.test_accuracy = acc;
    row.wall_time_s = now_seconds() - t0;
    rows.push_back(row);

    const auto mutual_rows = [&](int k, PeerKind peer) {
      const double start = now_seconds();
      TrainedEnsemble ens = run_ensemble(prep, k, peer, true, seed);
      const double elapsed = now_seconds() - start;
      for (CombineMode mode : {CombineMode::kAverage, CombineMode::kMax}) {
        ReportRow r = base_row(prep, "loss_comparison", fp, seed);
        r.regime = "mutual";
        r.num_students = k;
        r.tau = prep.setup.mutual_tau;
        r.loss_kind = ens.config.loss.name();
        r.combine_mode = combine_mode_name(mode);
        r.test_accuracy = evaluate_ensemble(ens.students, mode, prep.test_b, prep.test_labels);
        r.wall_time_s = elapsed;
        rows.push_back(r);
      }
    };
    mutual_rows(2, PeerKind::kKL);
    mutual_rows(3, PeerKind::kKL);
    mutual_rows(2, PeerKind::kCrossEntropyHard);
  }
  sort_rows(rows);
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::string, int, double, std::string, double>;
  std::map<Key, std::vector<double>> groups;
  for (const ReportRow& row : rows) {
    groups[{row.experiment_id, row.regime, row.loss_kind, row.num_students, row.tau,
            row.combine_mode, row.noise_fraction}]
        .push_back(row.test_accuracy);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, accs] : groups) {
    SummaryRow s;
    s.experiment_id = std::get<0>(key);
    s.regime = std::get<1>(key);
    s.loss_kind = std::get<2>(key);
    s.num_students = std::get<3>(key);
    s.tau = std::get<4>(key);
    s.combine_mode = std::get<5>(key);
    s.noise_fraction = std::get<6>(key);
    s.n = static_cast<int>(accs.size());
    double sum = 0.0;
    for (double a : accs) sum += a;
    s.mean_acc = sum / s.n;
    if (s.n > 1) {
      double sq = 0.0;
      for (double a : accs) sq += (a - s.mean_acc) * (a - s.mean_acc);
      s.std_acc = std::sqrt(sq / (s.n - 1));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_summary(const std::vector<SummaryRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-18s %-12s %-10s %3s %8s %-8s %6s %4s %9s %9s\n",
                "experiment", "regime", "loss", "K", "tau", "combine", "noise", "n", "mean_acc",
                "std_acc");
  out += buf;
  for (const SummaryRow& s : rows) {
    std::snprintf(buf, sizeof(buf), "%-18s %-12s %-10s %3d %8s %-8s %6s %4d %9.4f %9.4f\n",
                  s.experiment_id.c_str(), s.regime.c_str(), s.loss_kind.c_str(), s.num_students,
                  fmt_g(s.tau).c_str(), s.combine_mode.c_str(), fmt_g(s.noise_fraction).c_str(),
                  s.n, s.mean_acc, s.std_acc);
    out += buf;
  }
  return out;
}

std::string render_loss_comparison(const std::vector<ReportRow>& rows) {
  std::vector<ReportRow> mine;
  for (const ReportRow& row : rows) {
    if (row.experiment_id == "loss_comparison") mine.push_back(row);
  }
  const std::vector<SummaryRow> summary = summarize(mine);

  const auto find = [&](const std::string& regime, const std::string& loss, int k,
                        const std::string& combine, double tau) -> const SummaryRow* {
    for (const SummaryRow& s : summary) {
      if (s.regime == regime && s.loss_kind == loss && s.num_students == k &&
          s.combine_mode == combine && (tau <= 0.0 || s.tau == tau))
        return &s;
    }
    return nullptr;
  };

  // Best KL temperature by mean accuracy, lowest tau on ties.
  const SummaryRow* best_kl = nullptr;
  for (const SummaryRow& s : summary) {
    if (s.regime != "distill" || s.loss_kind != "kl") continue;
    if (!best_kl || s.mean_acc > best_kl->mean_acc ||
        (s.mean_acc == best_kl->mean_acc && s.tau < best_kl->tau))
      best_kl = &s;
  }

  struct Line {
    std::string label;
    const SummaryRow* s;
  };
  std::vector<Line> lines;
  lines.push_back({"full supervision", find("supervised", "ce", 1, "-", 0)});
  if (best_kl) lines.push_back({"kl distillation (tau=" + fmt_g(best_kl->tau) + ")", best_kl});
  lines.push_back({"ce distillation", find("distill", "ce", 1, "-", 0)});
  lines.push_back({"ce + mutual, K=2", find("mutual", "mutual_kl", 2, "average", 0)});
  lines.push_back({"ce + mutual, K=3", find("mutual", "mutual_kl", 3, "average", 0)});
  lines.push_back({"ce + mutual (ce peers), K=2", find("mutual", "mutual_ce", 2, "average", 0)});

  std::string out = "loss comparison, test accuracy (average combination for ensembles)\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-30s %4s %9s %9s\n", "method", "n", "mean_acc", "std_acc");
  out += buf;
  for (const Line& line : lines) {
    if (!line.s) continue;
    std::snprintf(buf, sizeof(buf), "%-30s %4d %9.4f %9.4f\n", line.label.c_str(), line.s->n,
                  line.s->mean_acc, line.s->std_acc);
    out += buf;
  }
  return out;
}

}  // namespace xmodal
