#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xmodal/config.hpp"
#include "xmodal/experiments.hpp"
#include "xmodal/model_io.hpp"

namespace {

using namespace xmodal;

const std::vector<std::string> kKnownKeys = {
    "classes",       "subjects",      "samples_per_subject_per_class",
    "dim_a",         "dim_b",         "noise_sigma",
    "subject_sigma", "data_seed",     "hidden",
    "epochs",        "batch_size",    "learning_rate",
    "teacher_epochs", "teacher_batch_size", "teacher_learning_rate",
    "teacher_seed",  "mutual_tau",    "peer",
    "seeds",         "fractions",     "taus",
    "students",      "dataset_dir",   "teacher_model",
};

struct Opts {
  std::string config;
  std::string out = "out";
  std::string seeds;
  std::string dataset;
  std::string teacher;
  std::string fractions;
  std::string taus;
  std::string students;
  std::string results;
  bool quiet = false;
};

KvConfig load_config(const Opts& o) {
  KvConfig cfg;
  if (!o.config.empty()) cfg = KvConfig::parse_file(o.config);
  if (!o.seeds.empty()) cfg.set("seeds", o.seeds);
  if (!o.dataset.empty()) cfg.set("dataset_dir", o.dataset);
  if (!o.teacher.empty()) cfg.set("teacher_model", o.teacher);
  if (!o.fractions.empty()) cfg.set("fractions", o.fractions);
  if (!o.taus.empty()) cfg.set("taus", o.taus);
  if (!o.students.empty()) cfg.set("students", o.students);
  cfg.require_known(kKnownKeys);
  return cfg;
}

ExperimentSetup setup_from(const KvConfig& cfg) {
  ExperimentSetup s;
  s.gen.num_classes = cfg.get_int("classes", s.gen.num_classes);
  s.gen.num_subjects = cfg.get_int("subjects", s.gen.num_subjects);
  s.gen.samples_per_subject_per_class =
      cfg.get_int("samples_per_subject_per_class", s.gen.samples_per_subject_per_class);
  s.gen.dim_a = cfg.get_int("dim_a", s.gen.dim_a);
  s.gen.dim_b = cfg.get_int("dim_b", s.gen.dim_b);
  s.gen.noise_sigma = cfg.get_double("noise_sigma", s.gen.noise_sigma);
  s.gen.subject_sigma = cfg.get_double("subject_sigma", s.gen.subject_sigma);
  s.gen.seed = cfg.get_u64("data_seed", s.gen.seed);
  s.gen.validate();

  s.hidden = cfg.get_int_list("hidden", s.hidden);
  for (int h : s.hidden) {
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
  }

  s.student.epochs = cfg.get_int("epochs", s.student.epochs);
  s.student.batch_size = cfg.get_int("batch_size", s.student.batch_size);
  s.student.learning_rate = cfg.get_double("learning_rate", s.student.learning_rate);
  s.student.validate();

  s.teacher.epochs = cfg.get_int("teacher_epochs", s.teacher.epochs);
  s.teacher.batch_size = cfg.get_int("teacher_batch_size", s.teacher.batch_size);
  s.teacher.learning_rate = cfg.get_double("teacher_learning_rate", s.teacher.learning_rate);
  s.teacher.seed = cfg.get_u64("teacher_seed", s.teacher.seed);
  s.teacher.validate();

  s.mutual_tau = cfg.get_double("mutual_tau", s.mutual_tau);
  if (!(s.mutual_tau > 0.0)) throw ConfigError("mutual_tau must be positive");
  const std::string peer = cfg.get_string("peer", "kl");
  if (peer == "kl")
    s.peer_kind = PeerKind::kKL;
  else if (peer == "ce")
    s.peer_kind = PeerKind::kCrossEntropyHard;
  else
    throw ConfigError("peer must be 'kl' or 'ce', got: " + peer);
  return s;
}

std::vector<std::uint64_t> seeds_from(const KvConfig& cfg) {
  const std::vector<std::uint64_t> seeds = cfg.get_u64_list("seeds", {1, 2, 3, 4, 5});
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

// Dataset and teacher either come from files named in the config or are
// produced in-process; config validation happens before either path.
PreparedExperiment prepare_from(const KvConfig& cfg, const ExperimentSetup& setup) {
  DatasetSplit data;
  if (cfg.has("dataset_dir"))
    data = load_dataset(cfg.get_string("dataset_dir", ""));
  else
    data = generate(setup.gen);
  if (cfg.has("teacher_model")) {
    MlpNetwork teacher = load_model(cfg.get_string("teacher_model", ""));
    return prepare_experiment(setup, std::move(data), std::move(teacher));
  }
  return prepare_experiment(setup, std::move(data));
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory: " + out);
}

void write_report(const Opts& o, const std::vector<ReportRow>& rows, const std::string& extra) {
  ensure_out_dir(o.out);
  const std::string csv_path = o.out + "/results.csv";
  const std::string summary_path = o.out + "/summary.txt";
  write_results_csv(csv_path, rows);
  std::string summary = render_summary(summarize(rows));
  if (!extra.empty()) summary += "\n" + extra;
  std::ofstream sf(summary_path);
  if (!sf) throw IoError("cannot open summary file for writing: " + summary_path);
  sf << summary;
  if (!sf) throw IoError("write failed: " + summary_path);
  if (!o.quiet) {
    std::cout << "wrote " << csv_path << " (" << rows.size() << " rows)\n";
    std::cout << "wrote " << summary_path << "\n" << summary;
  }
}

int cmd_gen_data(const Opts& o) {
  const KvConfig cfg = load_config(o);
  const ExperimentSetup setup = setup_from(cfg);
  const DatasetSplit split = generate(setup.gen);
  ensure_out_dir(o.out);
  save_dataset(o.out, split);
  if (!o.quiet) {
    std::cout << "teacher_train: " << split.teacher_train.size() << " samples\n";
    std::cout << "student_train: " << split.student_train.size() << " samples\n";
    std::cout << "test: " << split.test.size() << " samples\n";
    std::cout << "wrote " << o.out << "/{teacher_train,student_train,test}.txt\n";
  }
  return 0;
}

int cmd_train_teacher(const Opts& o) {
  const KvConfig cfg = load_config(o);
  const ExperimentSetup setup = setup_from(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  const PreparedExperiment prep = prepare_from(cfg, setup);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ensure_out_dir(o.out);
  const std::string model_path = o.out + "/teacher_model.txt";
  save_model(model_path, prep.teacher);

  ReportRow row;
  row.experiment_id = "teacher";
  row.fingerprint = fingerprint_hex(canonical_setup_string(setup) + ";experiment=teacher");
  row.seed = setup.teacher.seed;
  row.regime = "teacher";
  row.loss_kind = "ce";
  row.teacher_acc = prep.teacher_acc;
  row.test_accuracy = prep.teacher_test_acc;
  row.wall_time_s = elapsed;

  if (!o.quiet) {
    std::cout << "teacher accuracy: student-train " << prep.teacher_acc << ", test "
              << prep.teacher_test_acc << "\n";
    std::cout << "wrote " << model_path << "\n";
  }
  write_report(o, {row}, "");
  return 0;
}

int cmd_sweep_noise(const Opts& o) {
  const KvConfig cfg = load_config(o);
  const ExperimentSetup setup = setup_from(cfg);
  const auto seeds = seeds_from(cfg);
  const auto fractions = cfg.get_double_list("fractions", {0.0, 0.1, 0.25, 0.5});
  for (double f : fractions) {
    if (f < 0.0 || f > 1.0) throw ConfigError("noise fraction outside [0,1]");
  }
  const PreparedExperiment prep = prepare_from(cfg, setup);
  write_report(o, sweep_noise(prep, fractions, seeds), "");
  return 0;
}

int cmd_sweep_temperature(const Opts& o) {
  const KvConfig cfg = load_config(o);
  const ExperimentSetup setup = setup_from(cfg);
  const auto seeds = seeds_from(cfg);
  const auto taus = cfg.get_double_list("taus", {1, 2, 5, 10, 20, 50});
  for (double tau : taus) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  }
  const PreparedExperiment prep = prepare_from(cfg, setup);
  write_report(o, sweep_temperature(prep, taus, seeds), "");
  return 0;
}

int cmd_sweep_students(const Opts& o) {
  const KvConfig cfg = load_config(o);
  const ExperimentSetup setup = setup_from(cfg);
  const auto seeds = seeds_from(cfg);
  const auto ks = cfg.get_int_list("students", {1, 2, 3});
  for (int k : ks) {
    if (k < 1) throw ConfigError("student counts must be >= 1");
  }
  const PreparedExperiment prep = prepare_from(cfg, setup);
  write_report(o, sweep_students(prep, ks, seeds), "");
  return 0;
}

int cmd_compare_losses(const Opts& o) {
  const KvConfig cfg = load_config(o);
  const ExperimentSetup setup = setup_from(cfg);
  const auto seeds = seeds_from(cfg);
  const auto taus = cfg.get_double_list("taus", {1, 2, 5, 10, 20, 50});
  for (double tau : taus) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  }
  const PreparedExperiment prep = prepare_from(cfg, setup);
  const std::vector<ReportRow> rows = compare_losses(prep, taus, seeds);
  write_report(o, rows, render_loss_comparison(rows));
  return 0;
}

int cmd_report(const Opts& o) {
  const std::string path = o.results.empty() ? o.out + "/results.csv" : o.results;
  const std::vector<ReportRow> rows = read_results_csv(path);
  std::string extra;
  for (const ReportRow& row : rows) {
    if (row.experiment_id == "loss_comparison") {
      extra = render_loss_comparison(rows);
      break;
    }
  }
  ensure_out_dir(o.out);
  const std::string summary_path = o.out + "/summary.txt";
  std::string summary = render_summary(summarize(rows));
  if (!extra.empty()) summary += "\n" + extra;
  std::ofstream sf(summary_path);
  if (!sf) throw IoError("cannot open summary file for writing: " + summary_path);
  sf << summary;
  if (!sf) throw IoError("write failed: " + summary_path);
  if (!o.quiet) std::cout << "wrote " << summary_path << "\n" << summary;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal distillation experiment runner"};
  app.require_subcommand(1);

  Opts o;
  int (*handler)(const Opts&) = nullptr;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "flat 'key = value' config file");
    sub->add_option("--out", o.out, "output directory (default: out)");
    sub->add_flag("--quiet", o.quiet, "suppress progress output");
  };
  const auto add_seeds = [&](CLI::App* sub) {
    sub->add_option("--seeds", o.seeds, "comma-separated seed list");
  };
  const auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--dataset", o.dataset, "directory with generated split files");
    sub->add_option("--teacher", o.teacher, "pre-trained teacher model file");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the paired-modality dataset files");
  add_common(gen);
  gen->callback([&] { handler = cmd_gen_data; });

  CLI::App* teach = app.add_subcommand("train-teacher", "train and save the modality-A teacher");
  add_common(teach);
  add_inputs(teach);
  teach->callback([&] { handler = cmd_train_teacher; });

  CLI::App* noise = app.add_subcommand("sweep-noise", "supervised training under label noise");
  add_common(noise);
  add_seeds(noise);
  add_inputs(noise);
  noise->add_option("--fractions", o.fractions, "comma-separated noise fractions");
  noise->callback([&] { handler = cmd_sweep_noise; });

  CLI::App* temp = app.add_subcommand("sweep-temperature", "KL distillation over a tau grid");
  add_common(temp);
  add_seeds(temp);
  add_inputs(temp);
  temp->add_option("--taus", o.taus, "comma-separated softmax temperatures");
  temp->callback([&] { handler = cmd_sweep_temperature; });

  CLI::App* studs = app.add_subcommand("sweep-students", "ensembles and mutual learning over K");
  add_common(studs);
  add_seeds(studs);
  add_inputs(studs);
  studs->add_option("--students", o.students, "comma-separated student counts");
  studs->callback([&] { handler = cmd_sweep_students; });

  CLI::App* losses = app.add_subcommand("compare-losses", "all training regimes on shared seeds");
  add_common(losses);
  add_seeds(losses);
  add_inputs(losses);
  losses->add_option("--taus", o.taus, "comma-separated softmax temperatures for the KL rows");
  losses->callback([&] { handler = cmd_compare_losses; });

  CLI::App* rep = app.add_subcommand("report", "re-render summary.txt from an existing results.csv");
  add_common(rep);
  rep->add_option("--results", o.results, "results.csv to summarize (default: <out>/results.csv)");
  rep->callback([&] { handler = cmd_report; });

  try {
    app.parse(argc, argv);
    return handler(o);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
