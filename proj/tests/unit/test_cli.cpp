#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string("'") + TDD_CLI_PATH + "' " + args + " 2>/dev/null";
  Outcome o;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) o.out.append(buf, n);
  const int status = pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

struct Workspace {
  fs::path dir = fs::temp_directory_path() / "tdd_test_cli";
  fs::path config = dir / "data" / "config.ini";

  Workspace() {
    fs::remove_all(dir);
    const Outcome gen =
        run("gen-synthetic --n 500 --simulate-labels 160 --corpus-seed 3 --out " + q(dir / "data"));
    REQUIRE(gen.code == 0);
    std::ofstream(config, std::ios::app) << "[eval]\nbootstrap_replicates = 40\ncv_folds = 3\n"
                                         << "[prevalence]\nreplicates = 40\n"
                                         << "[cbow]\nepochs = 2\n[docvec]\nepochs = 2\n";
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string with_config() const { return "--config " + q(config) + " "; }
};

const Workspace& workspace() {
  static const Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("run-all --bogus-flag").code == 1);
  CHECK(run("train").code == 1);  // no corpus configured
  CHECK(run("serve --listen nonsense --corpus /dev/null").code == 1);
  CHECK(run("--help").code == 0);
}

TEST_CASE("data errors exit with 2") {
  CHECK(run("ingest --corpus /nonexistent/tickets.jsonl").code == 2);
  const auto& w = workspace();
  CHECK(run(w.with_config() + "evaluate --predictions /nonexistent.csv --out " + q(w.dir / "e")).code == 2);
  CHECK(run(w.with_config() + "dump-trees --model " + q(w.dir / "data" / "corpus.jsonl")).code == 2);
}

TEST_CASE("generated workspace") {
  const auto& w = workspace();
  for (const char* f : {"corpus.jsonl", "truth.csv", "pretrained.txt", "labels.jsonl", "config.ini"}) {
    CHECK_MESSAGE(fs::exists(w.dir / "data" / f), f);
  }
  std::ifstream labels(w.dir / "data" / "labels.jsonl");
  std::size_t n = 0;
  for (std::string line; std::getline(labels, line);) n += !line.empty();
  CHECK(n == 160);
}

TEST_CASE("run-all twice writes byte-identical artifacts") {
  const auto& w = workspace();
  const fs::path a = w.dir / "run_a", b = w.dir / "run_b";
  REQUIRE(run(w.with_config() + "run-all --out " + q(a)).code == 0);
  REQUIRE(run(w.with_config() + "run-all --out " + q(b)).code == 0);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path other = b / entry.path().filename();
    REQUIRE_MESSAGE(fs::exists(other), entry.path().filename().string());
    CHECK_MESSAGE(slurp(entry.path()) == slurp(other), entry.path().filename().string());
    ++compared;
  }
  CHECK(compared >= 12);
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  CHECK(report.contains("holdout"));
  CHECK(report.contains("prevalence"));
}

TEST_CASE("individual subcommands chain together") {
  const auto& w = workspace();
  const fs::path out = w.dir / "steps";
  const std::string base = w.with_config() + "--out " + q(out) + " ";
  REQUIRE(run(base + "featurize").code == 0);
  REQUIRE(fs::exists(out / "features.csv"));
  const std::string feats = "--features " + q(out / "features.csv");
  REQUIRE(run(base + "train " + feats).code == 0);
  REQUIRE(run(base + "predict --model " + q(out / "model.json") + " " + feats).code == 0);
  const auto eval = run(base + "evaluate --predictions " + q(out / "predictions.csv"));
  REQUIRE(eval.code == 0);
  CHECK(nlohmann::json::parse(eval.out).contains("unweighted"));
  REQUIRE(run(base + "curves --predictions " + q(out / "predictions.csv")).code == 0);
  CHECK(fs::exists(out / "curves.csv"));
  const auto prev = run(base + "prevalence " + feats);
  REQUIRE(prev.code == 0);
  CHECK(nlohmann::json::parse(prev.out).contains("corrected_rate"));
  const auto trees = run("dump-trees --model " + q(out / "model.json"));
  REQUIRE(trees.code == 0);
  CHECK(trees.out.rfind("base_score", 0) == 0);

  const auto next = run(base + "sample-next --n 7 --model " + q(out / "model.json") + " " + feats);
  REQUIRE(next.code == 0);
  CHECK(std::count(next.out.begin(), next.out.end(), '\n') == 7);
  CHECK(run(base + "sample-next --n 7 --model " + q(out / "model.json") + " " + feats).out == next.out);
  CHECK(run(base + "sample-next --n 0").code == 1);
}
