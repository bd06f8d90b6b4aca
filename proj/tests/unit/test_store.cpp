#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <thread>

#include "cjscore/config.hpp"
#include "cjscore/error.hpp"
#include "cjscore/store.hpp"

using namespace cjscore;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

JudgmentRecord judgment(std::uint64_t hash, std::string a = "1", std::string b = "2", int replicate = 0) {
  JudgmentRecord r;
  r.essay_a = std::move(a);
  r.essay_b = std::move(b);
  r.trait_id = "trait1";
  r.verdict = JudgmentVerdict::a;
  r.raw_response = "Essay A";
  r.prompt_hash = hash;
  r.backend_id = "sim";
  r.timestamp = "2024-01-01T00:00:00Z";
  r.attempt_count = 1;
  r.replicate = replicate;
  return r;
}

RubricScoreRecord rubric(std::uint64_t hash) {
  RubricScoreRecord r;
  r.essay_id = "1";
  r.trait_id = "trait1";
  r.score = Score::from_int(2);
  r.prompt_hash = hash;
  r.backend_id = "sim";
  return r;
}

}  // namespace

TEST_CASE("append and reload") {
  TempDir dir("cjscore_store_rt");
  const auto path = dir.path / "sub" / "store.jsonl";
  {
    auto store = JudgmentStore::open(path);
    CHECK(store.append(judgment(1)));
    CHECK(store.append(rubric(1)));
    CHECK(store.append(judgment(1, "1", "2", 1)));
    CHECK_FALSE(store.append(judgment(1)));
    CHECK(store.warnings().size() == 1);
    CHECK(store.size() == 3);
  }
  auto again = JudgmentStore::load(path);
  CHECK(again.judgments().size() == 2);
  CHECK(again.rubric_scores().size() == 1);
  CHECK(again.find_judgment({1, "sim", 1})->replicate == 1);
  CHECK_FALSE(again.find_judgment({1, "other", 0}).has_value());
  CHECK(again.find_rubric_score({1, "sim", 0})->score == Score::from_int(2));
  CHECK(again.judgments()[0] == judgment(1));
  CHECK_THROWS_AS(JudgmentStore::load(dir.path / "missing.jsonl"), StoreError);
  CHECK(JudgmentStore::load(dir.path / "missing.jsonl", true).size() == 0);
}

TEST_CASE("ten thousand appends") {
  TempDir dir("cjscore_store_10k");
  const auto path = dir.path / "s.jsonl";
  {
    auto store = JudgmentStore::open(path);
    for (std::uint64_t i = 0; i < 10000; ++i) store.append(judgment(i));
  }
  auto again = JudgmentStore::load(path);
  CHECK(again.judgments().size() == 10000);
  CHECK(again.warnings().empty());
}

TEST_CASE("torn last line is dropped, corrupt middle line is an error") {
  TempDir dir("cjscore_store_torn");
  const auto path = dir.path / "s.jsonl";
  {
    auto store = JudgmentStore::open(path);
    store.append(judgment(1));
    store.append(judgment(2));
  }
  const std::string good = read_file(path);
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << R"({"schema":1,"kind":"cj","essay_a":"1","ess)";
  }
  {
    auto store = JudgmentStore::open(path);
    CHECK(store.judgments().size() == 2);
    CHECK(store.warnings().size() == 1);
    CHECK(read_file(path) == good);
    store.append(judgment(3));
  }
  CHECK(JudgmentStore::load(path).judgments().size() == 3);

  write_file(path, good.substr(0, good.find('\n') + 1) + "not json\n" + good.substr(good.find('\n') + 1));
  CHECK_THROWS_AS(JudgmentStore::load(path), StoreError);

  // a complete final record without newline is kept and terminated
  write_file(path, good.substr(0, good.size() - 1));
  {
    auto store = JudgmentStore::open(path);
    CHECK(store.judgments().size() == 2);
    store.append(judgment(5));
  }
  CHECK(JudgmentStore::load(path).judgments().size() == 3);
}

TEST_CASE("duplicates in the file keep the first record") {
  TempDir dir("cjscore_store_dup");
  const auto path = dir.path / "s.jsonl";
  auto first = judgment(9);
  auto second = judgment(9);
  second.verdict = JudgmentVerdict::b;
  write_file(path, to_json(first).dump() + "\n" + to_json(second).dump() + "\n");
  auto store = JudgmentStore::load(path);
  CHECK(store.judgments().size() == 1);
  CHECK(store.judgments()[0].verdict == JudgmentVerdict::a);
  CHECK(store.warnings().size() == 1);
}

TEST_CASE("concurrent appends") {
  TempDir dir("cjscore_store_mt");
  const auto path = dir.path / "s.jsonl";
  {
    auto store = JudgmentStore::open(path);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&store, t] {
        for (int i = 0; i < 250; ++i) store.append(judgment(static_cast<std::uint64_t>(t * 1000 + i)));
      });
    }
    for (auto& th : threads) th.join();
  }
  auto again = JudgmentStore::load(path);
  CHECK(again.judgments().size() == 2000);
  CHECK(again.warnings().empty());
}

TEST_CASE("digest ignores order, timestamps and attempt counts") {
  auto a = JudgmentStore::in_memory();
  auto b = JudgmentStore::in_memory();
  a.append(judgment(1));
  a.append(judgment(2, "3", "4"));
  a.append(rubric(7));
  auto late = judgment(2, "3", "4");
  late.timestamp = "2030-01-01T00:00:00Z";
  late.attempt_count = 4;
  b.append(rubric(7));
  b.append(late);
  b.append(judgment(1));
  CHECK(a.content_digest() == b.content_digest());
  b.append(judgment(3));
  CHECK(a.content_digest() != b.content_digest());
  CHECK(JudgmentStore::in_memory().content_digest().size() == 16);
}
