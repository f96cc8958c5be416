#include "xmodal/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "xmodal/rng.hpp"

namespace xmodal {

namespace {

std::string format_g9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

std::vector<Vec> draw_prototypes(Rng& rng, int count, int dim) {
  std::vector<Vec> protos(count, Vec(dim));
  for (auto& p : protos) {
    for (double& x : p) x = rng.uniform(-1.0, 1.0);
  }
  return protos;
}

std::vector<Vec> draw_offsets(Rng& rng, int count, int dim, double sigma) {
  std::vector<Vec> offs(count, Vec(dim));
  for (auto& o : offs) {
    for (double& x : o) x = rng.normal(0.0, sigma);
  }
  return offs;
}

}  // namespace

void GenConfig::validate() const {
  if (num_classes < 2) throw ConfigError("GenConfig: num_classes must be >= 2");
  if (num_subjects < 3) throw ConfigError("GenConfig: num_subjects must be >= 3 (one per split)");
  if (samples_per_subject_per_class <= 0)
    throw ConfigError("GenConfig: samples_per_subject_per_class must be positive");
  if (dim_a <= 0 || dim_b <= 0) throw ConfigError("GenConfig: feature dims must be positive");
  if (noise_sigma < 0.0 || subject_sigma < 0.0) throw ConfigError("GenConfig: sigmas must be >= 0");
}

DatasetSplit generate(const GenConfig& config) {
  config.validate();
  Rng rng(config.seed);

  const auto proto_a = draw_prototypes(rng, config.num_classes, config.dim_a);
  const auto proto_b = draw_prototypes(rng, config.num_classes, config.dim_b);
  const auto off_a = draw_offsets(rng, config.num_subjects, config.dim_a, config.subject_sigma);
  const auto off_b = draw_offsets(rng, config.num_subjects, config.dim_b, config.subject_sigma);

  DatasetSplit split;
  split.num_classes = config.num_classes;
  split.num_subjects = config.num_subjects;
  split.dim_a = config.dim_a;
  split.dim_b = config.dim_b;

  const int group = config.num_subjects / 3;
  for (int s = 0; s < config.num_subjects; ++s) {
    auto& dest = s < group            ? split.teacher_train
                 : s < 2 * group      ? split.student_train
                                      : split.test;
    for (int c = 0; c < config.num_classes; ++c) {
      for (int rep = 0; rep < config.samples_per_subject_per_class; ++rep) {
        PairedSample sample;
        sample.label = c;
        sample.subject = s;
        sample.a.resize(config.dim_a);
        sample.b.resize(config.dim_b);
        for (int d = 0; d < config.dim_a; ++d)
          sample.a[d] = proto_a[c][d] + off_a[s][d] + rng.normal(0.0, config.noise_sigma);
        for (int d = 0; d < config.dim_b; ++d)
          sample.b[d] = std::tanh(proto_b[c][d] + off_b[s][d]) + rng.normal(0.0, config.noise_sigma);
        dest.push_back(std::move(sample));
      }
    }
  }
  return split;
}

std::vector<int> inject_label_noise(const std::vector<int>& labels, double fraction,
                                    int num_classes, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("inject_label_noise: fraction must be in [0, 1]");
  if (num_classes < 2) throw ConfigError("inject_label_noise: need at least 2 classes");
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw ConfigError("inject_label_noise: label out of range");
  }

  const auto n = static_cast<std::int64_t>(labels.size());
  const auto flips = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<int> out = labels;
  if (flips == 0) return out;

  Rng rng(seed);
  std::vector<std::int64_t> idx(labels.size());
  for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
  for (std::int64_t i = 0; i < flips; ++i) {
    const auto j = rng.uniform_int(i, n - 1);
    std::swap(idx[i], idx[j]);
  }
  for (std::int64_t i = 0; i < flips; ++i) {
    const int old = out[idx[i]];
    // uniform over the C-1 wrong labels
    const auto r = static_cast<int>(rng.uniform_int(0, num_classes - 2));
    out[idx[i]] = r >= old ? r + 1 : r;
  }
  return out;
}

TeacherCache::TeacherCache(std::vector<LogitVector> logits) : logits_(std::move(logits)) {
  hard_labels_.reserve(logits_.size());
  for (const auto& z : logits_) hard_labels_.push_back(argmax_lowest(z));
}

ProbVector TeacherCache::probs(int i) const { return softened_softmax(logits_[i], 1.0); }

ProbVector TeacherCache::probs_at(int i, double tau) const {
  return softened_softmax(logits_[i], tau);
}

TeacherCache cache_teacher_predictions(const MlpNetwork& teacher,
                                       const std::vector<PairedSample>& samples) {
  std::vector<LogitVector> logits;
  logits.reserve(samples.size());
  for (const auto& sample : samples) {
    if (static_cast<int>(sample.a.size()) != teacher.input_dim())
      throw ShapeError("cache_teacher_predictions: modality A dim != teacher input dim");
    logits.push_back(teacher.forward(sample.a));
  }
  return TeacherCache(std::move(logits));
}

std::vector<Vec> modality_a(const std::vector<PairedSample>& samples) {
  std::vector<Vec> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.a);
  return out;
}

std::vector<Vec> modality_b(const std::vector<PairedSample>& samples) {
  std::vector<Vec> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.b);
  return out;
}

std::vector<int> labels_of(const std::vector<PairedSample>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

void save_split_file(const std::string& path, const DatasetSplit& meta,
                     const std::vector<PairedSample>& samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << meta.num_classes << ' ' << meta.num_subjects << ' ' << meta.dim_a << ' ' << meta.dim_b
      << '\n';
  for (const auto& s : samples) {
    out << s.subject << ' ' << s.label;
    for (double x : s.a) out << ' ' << format_g9(x);
    for (double x : s.b) out << ' ' << format_g9(x);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<PairedSample> load_split_file(const std::string& path, DatasetSplit& meta) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty split file: " + path);
  {
    std::istringstream header(line);
    if (!(header >> meta.num_classes >> meta.num_subjects >> meta.dim_a >> meta.dim_b))
      throw IoError("bad header in " + path);
  }
  std::vector<PairedSample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    PairedSample s;
    if (!(ls >> s.subject >> s.label)) throw IoError("bad sample line in " + path);
    if (s.label < 0 || s.label >= meta.num_classes || s.subject < 0 ||
        s.subject >= meta.num_subjects)
      throw IoError("label/subject out of range in " + path);
    s.a.resize(meta.dim_a);
    s.b.resize(meta.dim_b);
    for (double& x : s.a) {
      if (!(ls >> x)) throw IoError("truncated sample line in " + path);
    }
    for (double& x : s.b) {
      if (!(ls >> x)) throw IoError("truncated sample line in " + path);
    }
    double extra;
    if (ls >> extra) throw IoError("trailing values on sample line in " + path);
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_dataset(const std::string& dir, const DatasetSplit& split) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);
  save_split_file(dir + "/teacher_train.txt", split, split.teacher_train);
  save_split_file(dir + "/student_train.txt", split, split.student_train);
  save_split_file(dir + "/test.txt", split, split.test);
}

DatasetSplit load_dataset(const std::string& dir) {
  DatasetSplit split;
  DatasetSplit m1, m2, m3;
  split.teacher_train = load_split_file(dir + "/teacher_train.txt", m1);
  split.student_train = load_split_file(dir + "/student_train.txt", m2);
  split.test = load_split_file(dir + "/test.txt", m3);
  if (m1.num_classes != m2.num_classes || m1.num_classes != m3.num_classes ||
      m1.dim_a != m2.dim_a || m1.dim_a != m3.dim_a || m1.dim_b != m2.dim_b ||
      m1.dim_b != m3.dim_b || m1.num_subjects != m2.num_subjects ||
      m1.num_subjects != m3.num_subjects)
    throw IoError("split headers disagree under " + dir);
  split.num_classes = m1.num_classes;
  split.num_subjects = m1.num_subjects;
  split.dim_a = m1.dim_a;
  split.dim_b = m1.dim_b;

  std::set<int> seen;
  auto check_disjoint = [&seen](const std::vector<PairedSample>& samples) {
    std::set<int> own;
    for (const auto& s : samples) own.insert(s.subject);
    for (int subj : own) {
      if (!seen.insert(subj).second)
        throw IoError("subject appears in more than one split: " + std::to_string(subj));
    }
  };
  check_disjoint(split.teacher_train);
  check_disjoint(split.student_train);
  check_disjoint(split.test);
  return split;
}

}  // namespace xmodal
