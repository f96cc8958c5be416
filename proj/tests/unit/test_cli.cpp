#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* exe = std::getenv("XMODAL_CLI_PATH");
  REQUIRE_MESSAGE(exe != nullptr, "XMODAL_CLI_PATH must point at the xmodal binary");
  return exe;
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + cli_path() + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("xmodal_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_tiny_config(const fs::path& dir) {
  const fs::path path = dir / "tiny.cfg";
  std::ofstream out(path);
  out << "classes = 3\n"
         "subjects = 3\n"
         "samples_per_subject_per_class = 4\n"
         "dim_a = 4\n"
         "dim_b = 4\n"
         "data_seed = 7\n"
         "hidden = 6\n"
         "epochs = 2\n"
         "batch_size = 4\n"
         "learning_rate = 0.1\n"
         "teacher_epochs = 2\n"
         "teacher_batch_size = 4\n"
         "teacher_learning_rate = 0.1\n"
         "teacher_seed = 3\n"
         "seeds = 1,2\n"
         "fractions = 0,0.5\n"
         "taus = 1,5\n"
         "students = 1,2\n";
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// results.csv minus the wall-time column (the only nondeterministic field)
std::string strip_last_field(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    out += line.substr(0, comma);
    out += '\n';
  }
  return out;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("") == 1);                       // a subcommand is required
  CHECK(run_cli("no-such-command") == 1);
  CHECK(run_cli("sweep-noise --bogus-flag") == 1);
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("a missing config file exits with the io code") {
  CHECK(run_cli("gen-data --config /nonexistent/xmodal.cfg") == 2);
}

TEST_CASE("unknown config keys exit with the config code") {
  const fs::path dir = fresh_dir("badkey");
  const fs::path cfg = dir / "bad.cfg";
  std::ofstream(cfg) << "classes = 3\nturbo_mode = yes\n";
  CHECK(run_cli("gen-data --config " + q(cfg) + " --out " + q(dir / "out")) == 1);
  fs::remove_all(dir);
}

TEST_CASE("invalid grid values exit with the config code") {
  const fs::path dir = fresh_dir("badgrid");
  const fs::path cfg = write_tiny_config(dir);
  CHECK(run_cli("sweep-temperature --config " + q(cfg) + " --taus 0 --out " +
                q(dir / "out") + " --quiet") == 1);
  CHECK(run_cli("sweep-noise --config " + q(cfg) + " --fractions 1.5 --out " +
                q(dir / "out") + " --quiet") == 1);
  fs::remove_all(dir);
}

TEST_CASE("gen-data writes deterministic split files") {
  const fs::path dir = fresh_dir("gendata");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path out1 = dir / "d1";
  const fs::path out2 = dir / "d2";

  REQUIRE(run_cli("gen-data --config " + q(cfg) + " --out " + q(out1) + " --quiet") == 0);
  REQUIRE(run_cli("gen-data --config " + q(cfg) + " --out " + q(out2) + " --quiet") == 0);

  for (const char* name : {"teacher_train.txt", "student_train.txt", "test.txt"}) {
    CHECK(fs::exists(out1 / name));
    CHECK(slurp(out1 / name) == slurp(out2 / name));
  }
  fs::remove_all(dir);
}

TEST_CASE("sweep results are identical across reruns except for wall time") {
  const fs::path dir = fresh_dir("rerun");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path out1 = dir / "r1";
  const fs::path out2 = dir / "r2";

  REQUIRE(run_cli("sweep-noise --config " + q(cfg) + " --out " + q(out1) + " --quiet") == 0);
  REQUIRE(run_cli("sweep-noise --config " + q(cfg) + " --out " + q(out2) + " --quiet") == 0);

  REQUIRE(fs::exists(out1 / "results.csv"));
  REQUIRE(fs::exists(out1 / "summary.txt"));
  CHECK(strip_last_field(slurp(out1 / "results.csv")) ==
        strip_last_field(slurp(out2 / "results.csv")));
  CHECK(slurp(out1 / "summary.txt") == slurp(out2 / "summary.txt"));

  const std::string csv = slurp(out1 / "results.csv");
  CHECK(csv.rfind("experiment_id,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("seed overrides change the rows") {
  const fs::path dir = fresh_dir("seeds");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path out1 = dir / "s1";
  const fs::path out2 = dir / "s2";
  REQUIRE(run_cli("sweep-noise --config " + q(cfg) + " --seeds 1 --out " + q(out1) +
                  " --quiet") == 0);
  REQUIRE(run_cli("sweep-noise --config " + q(cfg) + " --seeds 9 --out " + q(out2) +
                  " --quiet") == 0);
  CHECK(strip_last_field(slurp(out1 / "results.csv")) !=
        strip_last_field(slurp(out2 / "results.csv")));
  fs::remove_all(dir);
}

TEST_CASE("a saved dataset and teacher feed the sweeps") {
  const fs::path dir = fresh_dir("pipeline");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path data = dir / "data";
  const fs::path tout = dir / "teacher";
  const fs::path sout = dir / "sweep";

  REQUIRE(run_cli("gen-data --config " + q(cfg) + " --out " + q(data) + " --quiet") == 0);
  REQUIRE(run_cli("train-teacher --config " + q(cfg) + " --dataset " + q(data) + " --out " +
                  q(tout) + " --quiet") == 0);
  REQUIRE(fs::exists(tout / "teacher_model.txt"));
  REQUIRE(fs::exists(tout / "results.csv"));

  REQUIRE(run_cli("sweep-temperature --config " + q(cfg) + " --dataset " + q(data) +
                  " --teacher " + q(tout / "teacher_model.txt") + " --out " + q(sout) +
                  " --quiet") == 0);
  CHECK(fs::exists(sout / "results.csv"));

  // rerunning on the same artifacts is reproducible
  const fs::path sout2 = dir / "sweep2";
  REQUIRE(run_cli("sweep-temperature --config " + q(cfg) + " --dataset " + q(data) +
                  " --teacher " + q(tout / "teacher_model.txt") + " --out " + q(sout2) +
                  " --quiet") == 0);
  CHECK(strip_last_field(slurp(sout / "results.csv")) ==
        strip_last_field(slurp(sout2 / "results.csv")));
  fs::remove_all(dir);
}

TEST_CASE("a missing dataset directory exits with the io code") {
  const fs::path dir = fresh_dir("missingdata");
  const fs::path cfg = write_tiny_config(dir);
  CHECK(run_cli("sweep-noise --config " + q(cfg) + " --dataset " + q(dir / "absent") +
                " --out " + q(dir / "out") + " --quiet") == 2);
  fs::remove_all(dir);
}

TEST_CASE("report rebuilds the summary from an existing results file") {
  const fs::path dir = fresh_dir("report");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path out = dir / "out";

  REQUIRE(run_cli("compare-losses --config " + q(cfg) + " --taus 1 --seeds 1 --out " + q(out) +
                  " --quiet") == 0);
  const std::string original = slurp(out / "summary.txt");
  CHECK(original.find("loss comparison") != std::string::npos);

  fs::remove(out / "summary.txt");
  REQUIRE(run_cli("report --out " + q(out) + " --quiet") == 0);
  CHECK(slurp(out / "summary.txt") == original);

  CHECK(run_cli("report --results " + q(dir / "nope.csv") + " --out " + q(out) + " --quiet") ==
        2);
  fs::remove_all(dir);
}
