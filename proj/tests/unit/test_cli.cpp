#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mock_server.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = CJSCORE_SOURCE_DIR;
const std::string kCli = CJSCORE_CLI_PATH;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cjscore_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

int run(const std::string& args, const std::string& err_path = "/dev/null") {
  const std::string cmd = "\"" + kCli + "\" " + args + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string essay_text(int i) { return "Essay " + std::to_string(i) + " about waiting in line."; }

// Twelve essays, essay i of planted quality i. Both raters give the
// coarse score of i/11.
void write_dataset(const std::string& path) {
  const int planted[12] = {0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3};
  std::ofstream out(path);
  out << "essay_id\tessay_set\tessay\trater1_trait1\trater2_trait1\trater1_trait2\trater2_trait2\t"
         "rater1_trait3\trater2_trait3\trater1_trait4\trater2_trait4\n";
  for (int i = 0; i < 12; ++i) {
    out << 100 + i << "\t7\t" << essay_text(i) << "\t" << planted[i] << "\t" << planted[i]
        << "\t1\t1\t1\t1\t1\t1\n";
  }
}

std::map<std::string, double> planted_quality() {
  std::map<std::string, double> q;
  for (int i = 0; i < 12; ++i) q[essay_text(i)] = i;
  return q;
}

}  // namespace

TEST_CASE("sample is deterministic and matches the fixture") {
  TempDir dir("sample");
  const std::string data = (kRoot / "data/fixtures/set7_synthetic.tsv").string();
  const std::string args = "sample --dataset " + data + " --trait trait1 --per-label 5 --seed 1 --out ";
  REQUIRE(run(args + dir / "a.csv") == 0);
  REQUIRE(run(args + dir / "b.csv") == 0);
  const std::string a = slurp(dir / "a.csv");
  CHECK(a == slurp(dir / "b.csv"));
  CHECK(count_lines(a) == 36);
  CHECK(a.rfind("essay_id,trait,label,seed\n", 0) == 0);
  CHECK(a.find("\n20002,trait1,") != std::string::npos);

  REQUIRE(run("sample --dataset " + data + " --trait trait1 --per-label 5 --seed 2 --out " + dir / "c.csv") == 0);
  CHECK(slurp(dir / "c.csv") != a);
}

TEST_CASE("bad input exits nonzero") {
  TempDir dir("bad");
  CHECK(run("sample --dataset " + dir / "missing.tsv" + " --trait trait1") == 1);
  CHECK(run("sample --trait trait1") != 0);
  CHECK(run("no-such-command") != 0);
  CHECK(run("") != 0);

  std::ofstream(dir / "broken.tsv") << "essay_id\tessay_set\tessay\n1\t7\n";
  CHECK(run("sample --dataset " + dir / "broken.tsv" + " --trait trait1") == 1);
  const std::string err = dir / "err.txt";
  CHECK(run("sample --dataset " + dir / "broken.tsv" + " --trait trait1", err) == 1);
  CHECK(slurp(err).find("error:") != std::string::npos);
}

TEST_CASE("judge, estimate, score, evaluate against a mock backend") {
  TempDir dir("chain");
  write_dataset(dir / "data.tsv");
  const std::string data = "--dataset " + dir / "data.tsv";
  REQUIRE(run("sample " + data + " --trait trait1 --per-label 4 --seed 3 --out " + dir / "sample.csv") == 0);
  CHECK(count_lines(slurp(dir / "sample.csv")) == 13);

  cjtest::MockServer server(cjtest::planted_order_judge(planted_quality()));
  const std::string backend = " --endpoint " + server.endpoint() + " --model mock --rpm 0";
  const std::string judge = "judge " + data + " --sample " + dir / "sample.csv" + " --rubric " +
                            (kRoot / "data/rubrics/set7_trait1_B.json").string() + backend;

  REQUIRE(run(judge + " --store " + dir / "store.jsonl" + " --workers 4") == 0);
  CHECK(server.calls() == 66);
  CHECK(count_lines(slurp(dir / "store.jsonl")) == 66);
  const std::string store_bytes = slurp(dir / "store.jsonl");

  server.reset_calls();
  REQUIRE(run(judge + " --store " + dir / "store.jsonl" + " --workers 2") == 0);
  CHECK(server.calls() == 0);
  CHECK(slurp(dir / "store.jsonl") == store_bytes);

  server.reset_calls();
  REQUIRE(run(judge + " --store " + dir / "both.jsonl" + " --both-orders") == 0);
  CHECK(server.calls() == 132);
  CHECK(count_lines(slurp(dir / "both.jsonl")) == 132);

  REQUIRE(run("estimate --store " + dir / "store.jsonl" + " --sample " + dir / "sample.csv" + " --out " +
              dir / "est.json") == 0);
  REQUIRE(run("score " + data + " --estimates " + dir / "est.json" + " --scale coarse --out " + dir / "scores.csv") ==
          0);
  const std::string scores = slurp(dir / "scores.csv");
  CHECK(count_lines(scores) == 13);
  CHECK(scores.find("\n100,trait1,CJ,B,") != std::string::npos);

  const std::string eval = "evaluate " + data + " --scores " + dir / "scores.csv" + " --summary-csv ";
  REQUIRE(run(eval + dir / "sum1.csv" + " --out " + dir / "r1.md") == 0);
  REQUIRE(run(eval + dir / "sum2.csv" + " --out " + dir / "r2.md") == 0);
  CHECK(slurp(dir / "r1.md") == slurp(dir / "r2.md"));
  CHECK(slurp(dir / "sum1.csv") == slurp(dir / "sum2.csv"));
  const std::string summary = slurp(dir / "sum1.csv");
  CHECK(summary.find("CJ,B,") != std::string::npos);
  CHECK(summary.find("CJ,B,mock,trait1,1,1,0,0\n") != std::string::npos);
}

TEST_CASE("exit codes for unavailable and rejected backends") {
  TempDir dir("codes");
  write_dataset(dir / "data.tsv");
  const std::string data = "--dataset " + dir / "data.tsv";
  REQUIRE(run("sample " + data + " --trait trait1 --per-label 1 --seed 1 --out " + dir / "sample.csv") == 0);
  const std::string judge = "judge " + data + " --sample " + dir / "sample.csv" + " --rubric " +
                            (kRoot / "data/rubrics/set7_trait1_B.json").string() + " --model mock --max-attempts 1";

  cjtest::MockServer down([](const nlohmann::json&, int) { return cjtest::MockReply{503, ""}; });
  CHECK(run(judge + " --endpoint " + down.endpoint() + " --store " + dir / "s1.jsonl") == 3);

  cjtest::MockServer denied([](const nlohmann::json&, int) { return cjtest::MockReply{401, ""}; });
  const std::string err = dir / "err.txt";
  CHECK(run(judge + " --endpoint " + denied.endpoint() + " --store " + dir / "s2.jsonl", err) == 4);
  CHECK(slurp(err).find("error:") != std::string::npos);

  // No endpoint anywhere.
  CHECK(run("judge " + data + " --sample " + dir / "sample.csv" + " --rubric " +
            (kRoot / "data/rubrics/set7_trait1_B.json").string() + " --store " + dir / "s3.jsonl") == 1);
}

TEST_CASE("simulate writes a report") {
  TempDir dir("sim");
  REQUIRE(run("simulate --n 12 --mode argmax --rounds 1 --json " + dir / "sim.json" + " --out " + dir / "sim.md") ==
          0);
  const std::string md = slurp(dir / "sim.md");
  CHECK(md.find("| comparisons | 66 |") != std::string::npos);
  CHECK(md.find("| Spearman rho | 1.0000 |") != std::string::npos);
  CHECK(slurp(dir / "sim.json").find("\"spearman\"") != std::string::npos);
}
