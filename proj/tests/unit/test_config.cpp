#include "doctest.h"

#include <filesystem>

#include "cjscore/config.hpp"
#include "cjscore/error.hpp"

using namespace cjscore;

TEST_CASE("key value parsing") {
  const auto cfg = KeyValueConfig::parse("# comment\nmodel = gpt\n\nrpm=60\nmodel = other  \n");
  CHECK(cfg.get("model") == "other");
  CHECK(cfg.get("rpm") == "60");
  CHECK_FALSE(cfg.get("missing").has_value());
  CHECK(cfg.get_or("missing", "x") == "x");
  CHECK_THROWS(KeyValueConfig::parse("novalue\n"));
}

TEST_CASE("files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cjscore_config_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.cfg";
  write_file(path, "endpoint = http://x\n");
  CHECK(read_file(path) == "endpoint = http://x\n");
  CHECK(KeyValueConfig::load(path).get("endpoint") == "http://x");
  CHECK_THROWS(read_file(dir / "missing.cfg"));
  std::filesystem::remove_all(dir);
}
