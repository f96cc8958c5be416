#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "xmodal/data.hpp"
#include "xmodal/nn.hpp"

using namespace xmodal;
namespace fs = std::filesystem;

namespace {

GenConfig tiny_config() {
  GenConfig cfg;
  cfg.num_classes = 4;
  cfg.num_subjects = 6;
  cfg.samples_per_subject_per_class = 5;
  cfg.dim_a = 3;
  cfg.dim_b = 3;
  cfg.seed = 42;
  return cfg;
}

bool samples_equal(const std::vector<PairedSample>& x, const std::vector<PairedSample>& y) {
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].label != y[i].label || x[i].subject != y[i].subject) return false;
    if (x[i].a != y[i].a || x[i].b != y[i].b) return false;
  }
  return true;
}

std::set<int> subjects_of(const std::vector<PairedSample>& samples) {
  std::set<int> s;
  for (const auto& x : samples) s.insert(x.subject);
  return s;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("xmodal_data_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generate is deterministic for a fixed seed") {
  const GenConfig cfg = tiny_config();
  const DatasetSplit d1 = generate(cfg);
  const DatasetSplit d2 = generate(cfg);
  CHECK(samples_equal(d1.teacher_train, d2.teacher_train));
  CHECK(samples_equal(d1.student_train, d2.student_train));
  CHECK(samples_equal(d1.test, d2.test));

  GenConfig other = cfg;
  other.seed = 43;
  CHECK_FALSE(samples_equal(generate(other).teacher_train, d1.teacher_train));
}

TEST_CASE("generate assigns each subject to exactly one split") {
  const DatasetSplit d = generate(tiny_config());
  const auto s_teacher = subjects_of(d.teacher_train);
  const auto s_student = subjects_of(d.student_train);
  const auto s_test = subjects_of(d.test);

  std::set<int> all;
  all.insert(s_teacher.begin(), s_teacher.end());
  all.insert(s_student.begin(), s_student.end());
  all.insert(s_test.begin(), s_test.end());
  CHECK(static_cast<int>(all.size()) == d.num_subjects);
  CHECK(s_teacher.size() + s_student.size() + s_test.size() == all.size());
  CHECK(s_teacher.size() == 2);
  CHECK(s_student.size() == 2);
  CHECK(s_test.size() == 2);
}

TEST_CASE("generate balances classes within every split") {
  const GenConfig cfg = tiny_config();
  const DatasetSplit d = generate(cfg);
  for (const auto* split : {&d.teacher_train, &d.student_train, &d.test}) {
    CHECK(static_cast<int>(split->size()) ==
          2 * cfg.num_classes * cfg.samples_per_subject_per_class);
    std::map<int, int> per_class;
    for (const auto& s : *split) per_class[s.label] += 1;
    CHECK(static_cast<int>(per_class.size()) == cfg.num_classes);
    for (const auto& [label, n] : per_class) {
      CHECK(label >= 0);
      CHECK(label < cfg.num_classes);
      CHECK(n == 2 * cfg.samples_per_subject_per_class);
    }
  }
}

TEST_CASE("generate with zero sigmas collapses each class to its prototype") {
  GenConfig cfg = tiny_config();
  cfg.noise_sigma = 0.0;
  cfg.subject_sigma = 0.0;
  const DatasetSplit d = generate(cfg);

  std::map<int, const PairedSample*> rep;
  auto visit = [&rep](const std::vector<PairedSample>& split) {
    for (const auto& s : split) {
      auto [it, fresh] = rep.emplace(s.label, &s);
      if (!fresh) {
        CHECK(s.a == it->second->a);  // exact: noise terms are identically zero
        CHECK(s.b == it->second->b);
      }
      for (double x : s.b) CHECK(std::abs(x) <= 1.0);
    }
  };
  visit(d.teacher_train);
  visit(d.student_train);
  visit(d.test);
  CHECK(static_cast<int>(rep.size()) == cfg.num_classes);
}

TEST_CASE("generate rejects degenerate configurations") {
  auto broken = [](auto&& tweak) {
    GenConfig cfg = tiny_config();
    tweak(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(generate(broken([](GenConfig& c) { c.num_classes = 1; })), ConfigError);
  CHECK_THROWS_AS(generate(broken([](GenConfig& c) { c.num_subjects = 2; })), ConfigError);
  CHECK_THROWS_AS(generate(broken([](GenConfig& c) { c.samples_per_subject_per_class = 0; })),
                  ConfigError);
  CHECK_THROWS_AS(generate(broken([](GenConfig& c) { c.dim_a = 0; })), ConfigError);
  CHECK_THROWS_AS(generate(broken([](GenConfig& c) { c.noise_sigma = -0.1; })), ConfigError);
}

TEST_CASE("inject_label_noise changes exactly the rounded count of labels") {
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[i] = i % 10;

  const auto noisy = inject_label_noise(labels, 0.14, 10, 7);
  int changed = 0;
  for (int i = 0; i < 100; ++i) {
    if (noisy[i] != labels[i]) ++changed;
    CHECK(noisy[i] >= 0);
    CHECK(noisy[i] < 10);
  }
  CHECK(changed == 14);
}

TEST_CASE("inject_label_noise at fraction one replaces every label") {
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[i] = i % 10;
  const auto noisy = inject_label_noise(labels, 1.0, 10, 7);
  for (int i = 0; i < 100; ++i) CHECK(noisy[i] != labels[i]);
}

TEST_CASE("inject_label_noise at fraction zero is the identity") {
  const std::vector<int> labels = {0, 1, 2, 3, 2, 1, 0};
  CHECK(inject_label_noise(labels, 0.0, 4, 9) == labels);
}

TEST_CASE("inject_label_noise rounds the flip count to nearest") {
  std::vector<int> labels(10, 0);
  auto count = [&labels](double f) {
    const auto noisy = inject_label_noise(labels, f, 3, 5);
    int c = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) c += noisy[i] != labels[i];
    return c;
  };
  CHECK(count(0.14) == 1);
  CHECK(count(0.15) == 2);  // half rounds away from zero
  CHECK(count(0.26) == 3);
}

TEST_CASE("inject_label_noise corrupts nested index sets as the fraction grows") {
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) labels[i] = i % 6;
  const std::uint64_t seed = 77;

  auto changed_set = [&](double f) {
    const auto noisy = inject_label_noise(labels, f, 6, seed);
    std::set<int> s;
    for (int i = 0; i < 200; ++i) {
      if (noisy[i] != labels[i]) s.insert(i);
    }
    return s;
  };
  const auto s10 = changed_set(0.10);
  const auto s25 = changed_set(0.25);
  const auto s50 = changed_set(0.50);
  CHECK(s10.size() == 20);
  CHECK(s25.size() == 50);
  CHECK(s50.size() == 100);
  CHECK(std::includes(s25.begin(), s25.end(), s10.begin(), s10.end()));
  CHECK(std::includes(s50.begin(), s50.end(), s25.begin(), s25.end()));
}

TEST_CASE("inject_label_noise is deterministic in the seed") {
  std::vector<int> labels(50);
  for (int i = 0; i < 50; ++i) labels[i] = i % 5;
  CHECK(inject_label_noise(labels, 0.3, 5, 123) == inject_label_noise(labels, 0.3, 5, 123));
  CHECK(inject_label_noise(labels, 0.3, 5, 123) != inject_label_noise(labels, 0.3, 5, 124));
}

TEST_CASE("inject_label_noise validates fraction, classes and labels") {
  const std::vector<int> labels = {0, 1};
  CHECK_THROWS_AS(inject_label_noise(labels, -0.1, 2, 1), ConfigError);
  CHECK_THROWS_AS(inject_label_noise(labels, 1.1, 2, 1), ConfigError);
  CHECK_THROWS_AS(inject_label_noise(labels, 0.5, 1, 1), ConfigError);
  CHECK_THROWS_AS(inject_label_noise({0, 2}, 0.5, 2, 1), ConfigError);
}

TEST_CASE("teacher cache stores forward logits and derived quantities") {
  const GenConfig cfg = tiny_config();
  const DatasetSplit d = generate(cfg);
  const MlpNetwork teacher({cfg.dim_a, 5, cfg.num_classes}, 11);
  const TeacherCache cache = cache_teacher_predictions(teacher, d.student_train);

  REQUIRE(cache.size() == static_cast<int>(d.student_train.size()));
  for (int i = 0; i < cache.size(); ++i) {
    const LogitVector z = teacher.forward(d.student_train[i].a);
    CHECK(cache.logits(i) == z);
    CHECK(cache.probs(i) == softened_softmax(z, 1.0));
    CHECK(cache.probs_at(i, 5.0) == softened_softmax(z, 5.0));
    CHECK(cache.hard_label(i) == oracle::first_argmax(z));
  }
}

TEST_CASE("teacher cache of an all-zero network predicts uniformly") {
  const GenConfig cfg = tiny_config();
  const DatasetSplit d = generate(cfg);
  const MlpNetwork zero = MlpNetwork::zeros({cfg.dim_a, cfg.num_classes});
  const TeacherCache cache = cache_teacher_predictions(zero, d.test);
  const double u = 1.0 / cfg.num_classes;
  for (int i = 0; i < cache.size(); ++i) {
    for (double p : cache.probs(i)) CHECK(p == doctest::Approx(u).epsilon(1e-12));
    CHECK(cache.hard_label(i) == 0);  // ties resolve to the lowest index
  }
}

TEST_CASE("teacher cache rejects inputs that do not fit the network") {
  const DatasetSplit d = generate(tiny_config());
  const MlpNetwork teacher({7, 4}, 3);  // wrong input width
  CHECK_THROWS_AS(cache_teacher_predictions(teacher, d.test), ShapeError);
}

TEST_CASE("modality projections preserve order and content") {
  const DatasetSplit d = generate(tiny_config());
  const auto a = modality_a(d.test);
  const auto b = modality_b(d.test);
  const auto y = labels_of(d.test);
  REQUIRE(a.size() == d.test.size());
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    CHECK(a[i] == d.test[i].a);
    CHECK(b[i] == d.test[i].b);
    CHECK(y[i] == d.test[i].label);
  }
}

TEST_CASE("dataset round trip preserves structure and values") {
  const fs::path dir = fresh_dir("roundtrip");
  const DatasetSplit d = generate(tiny_config());
  save_dataset(dir.string(), d);
  const DatasetSplit r = load_dataset(dir.string());

  CHECK(r.num_classes == d.num_classes);
  CHECK(r.num_subjects == d.num_subjects);
  CHECK(r.dim_a == d.dim_a);
  CHECK(r.dim_b == d.dim_b);
  REQUIRE(r.student_train.size() == d.student_train.size());
  for (std::size_t i = 0; i < d.student_train.size(); ++i) {
    CHECK(r.student_train[i].label == d.student_train[i].label);
    CHECK(r.student_train[i].subject == d.student_train[i].subject);
    for (std::size_t j = 0; j < d.student_train[i].a.size(); ++j) {
      // text format keeps 9 significant digits
      CHECK(r.student_train[i].a[j] ==
            doctest::Approx(d.student_train[i].a[j]).epsilon(1e-8));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("saving a loaded dataset reproduces the files byte for byte") {
  const fs::path dir1 = fresh_dir("stable1");
  const fs::path dir2 = fresh_dir("stable2");
  save_dataset(dir1.string(), generate(tiny_config()));
  save_dataset(dir2.string(), load_dataset(dir1.string()));
  for (const char* name : {"teacher_train.txt", "student_train.txt", "test.txt"}) {
    CHECK(slurp(dir1 / name) == slurp(dir2 / name));
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("dataset loading reports malformed files") {
  const fs::path dir = fresh_dir("broken");
  const DatasetSplit d = generate(tiny_config());

  SUBCASE("missing directory") {
    CHECK_THROWS_AS(load_dataset((dir / "nope").string()), IoError);
  }
  SUBCASE("missing split file") {
    save_dataset(dir.string(), d);
    fs::remove(dir / "test.txt");
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
  }
  SUBCASE("corrupt header") {
    save_dataset(dir.string(), d);
    std::ofstream(dir / "test.txt") << "not a header\n";
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
  }
  SUBCASE("truncated sample line") {
    save_dataset(dir.string(), d);
    std::ofstream(dir / "test.txt") << "4 6 3 3\n4 0 0.1 0.2\n";
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
  }
  SUBCASE("trailing values on a sample line") {
    save_dataset(dir.string(), d);
    std::ofstream(dir / "test.txt") << "4 6 3 3\n4 0 1 2 3 4 5 6 7\n";
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
  }
  SUBCASE("label out of range") {
    save_dataset(dir.string(), d);
    std::ofstream(dir / "test.txt") << "4 6 3 3\n4 9 1 2 3 4 5 6\n";
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
  }
  SUBCASE("disagreeing headers across splits") {
    save_dataset(dir.string(), d);
    DatasetSplit other = d;
    other.num_classes = 5;
    save_split_file((dir / "test.txt").string(), other, d.test);
    CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
  }
  fs::remove_all(dir);
}
