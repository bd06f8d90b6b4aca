#include "cjscore/records.hpp"

#include <chrono>
#include <ctime>

#include "cjscore/error.hpp"
#include "cjscore/prompts.hpp"

namespace cjscore {

std::string_view to_string(JudgmentVerdict v) {
  switch (v) {
    case JudgmentVerdict::a: return "A";
    case JudgmentVerdict::b: return "B";
    case JudgmentVerdict::tie: return "tie";
    case JudgmentVerdict::failure: return "failure";
  }
  return "failure";
}

JudgmentVerdict parse_judgment_verdict(std::string_view text) {
  if (text == "A") return JudgmentVerdict::a;
  if (text == "B") return JudgmentVerdict::b;
  if (text == "tie") return JudgmentVerdict::tie;
  if (text == "failure") return JudgmentVerdict::failure;
  throw StoreError("unknown verdict '" + std::string(text) + "'");
}

std::optional<std::string> JudgmentRecord::winner() const {
  if (verdict == JudgmentVerdict::a) return essay_a;
  if (verdict == JudgmentVerdict::b) return essay_b;
  return std::nullopt;
}

std::optional<std::string> JudgmentRecord::loser() const {
  if (verdict == JudgmentVerdict::a) return essay_b;
  if (verdict == JudgmentVerdict::b) return essay_a;
  return std::nullopt;
}

nlohmann::json to_json(const JudgmentRecord& r) {
  return nlohmann::json{
      {"schema", kRecordSchemaVersion},
      {"kind", "cj"},
      {"essay_a", r.essay_a},
      {"essay_b", r.essay_b},
      {"trait_id", r.trait_id},
      {"verdict", to_string(r.verdict)},
      {"raw_response", r.raw_response},
      {"prompt_hash", hash_hex(r.prompt_hash)},
      {"backend_id", r.backend_id},
      {"rubric_type", to_string(r.rubric_type)},
      {"timestamp", r.timestamp},
      {"attempt_count", r.attempt_count},
      {"replicate", r.replicate},
  };
}

nlohmann::json to_json(const RubricScoreRecord& r) {
  return nlohmann::json{
      {"schema", kRecordSchemaVersion},
      {"kind", "rubric"},
      {"essay_id", r.essay_id},
      {"trait_id", r.trait_id},
      {"score", r.score ? nlohmann::json(r.score->str()) : nlohmann::json(nullptr)},
      {"explanation", r.explanation},
      {"raw_response", r.raw_response},
      {"prompt_hash", hash_hex(r.prompt_hash)},
      {"backend_id", r.backend_id},
      {"rubric_type", to_string(r.rubric_type)},
      {"timestamp", r.timestamp},
      {"attempt_count", r.attempt_count},
  };
}

namespace {

void check_schema(const nlohmann::json& j, std::string_view kind) {
  if (!j.contains("schema")) throw StoreError("record without schema version");
  const int v = j.at("schema").get<int>();
  if (v != kRecordSchemaVersion) {
    throw StoreError("unsupported record schema version " + std::to_string(v));
  }
  if (j.at("kind").get<std::string>() != kind) {
    throw StoreError("expected a '" + std::string(kind) + "' record");
  }
}

}  // namespace

JudgmentRecord judgment_from_json(const nlohmann::json& j) {
  try {
    check_schema(j, "cj");
    JudgmentRecord r;
    r.essay_a = j.at("essay_a").get<std::string>();
    r.essay_b = j.at("essay_b").get<std::string>();
    r.trait_id = j.at("trait_id").get<std::string>();
    r.verdict = parse_judgment_verdict(j.at("verdict").get<std::string>());
    r.raw_response = j.at("raw_response").get<std::string>();
    r.prompt_hash = parse_hash_hex(j.at("prompt_hash").get<std::string>());
    r.backend_id = j.at("backend_id").get<std::string>();
    r.rubric_type = parse_rubric_type(j.at("rubric_type").get<std::string>());
    r.timestamp = j.at("timestamp").get<std::string>();
    r.attempt_count = j.at("attempt_count").get<int>();
    r.replicate = j.value("replicate", 0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(std::string("malformed judgment record: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw StoreError(std::string("malformed judgment record: ") + e.what());
  }
}

RubricScoreRecord rubric_score_from_json(const nlohmann::json& j) {
  try {
    check_schema(j, "rubric");
    RubricScoreRecord r;
    r.essay_id = j.at("essay_id").get<std::string>();
    r.trait_id = j.at("trait_id").get<std::string>();
    if (!j.at("score").is_null()) r.score = Score::parse(j.at("score").get<std::string>());
    r.explanation = j.at("explanation").get<std::string>();
    r.raw_response = j.at("raw_response").get<std::string>();
    r.prompt_hash = parse_hash_hex(j.at("prompt_hash").get<std::string>());
    r.backend_id = j.at("backend_id").get<std::string>();
    r.rubric_type = parse_rubric_type(j.at("rubric_type").get<std::string>());
    r.timestamp = j.at("timestamp").get<std::string>();
    r.attempt_count = j.at("attempt_count").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(std::string("malformed rubric record: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw StoreError(std::string("malformed rubric record: ") + e.what());
  }
}

std::uint64_t parse_hash_hex(std::string_view hex) {
  if (hex.empty() || hex.size() > 16) throw StoreError("bad hash '" + std::string(hex) + "'");
  std::uint64_t v = 0;
  for (char c : hex) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
    else throw StoreError("bad hash '" + std::string(hex) + "'");
  }
  return v;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string model_of(std::string_view backend_id) {
  return std::string(backend_id.substr(0, backend_id.find('@')));
}

}  // namespace cjscore
