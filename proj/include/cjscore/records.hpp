#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "cjscore/core.hpp"
#include "json.hpp"

namespace cjscore {

inline constexpr int kRecordSchemaVersion = 1;

enum class JudgmentVerdict { a, b, tie, failure };

std::string_view to_string(JudgmentVerdict v);  // "A", "B", "tie", "failure"
JudgmentVerdict parse_judgment_verdict(std::string_view text);

// Store identity of one model call. `replicate` separates deliberate repeat
// judgments of an identical prompt.
struct RecordKey {
  std::uint64_t prompt_hash = 0;
  std::string backend_id;
  int replicate = 0;

  auto operator<=>(const RecordKey&) const = default;
};

// One pairwise comparison. `essay_a` is the essay shown as "Essay A".
struct JudgmentRecord {
  std::string essay_a;
  std::string essay_b;
  std::string trait_id;
  JudgmentVerdict verdict = JudgmentVerdict::failure;
  std::string raw_response;
  std::uint64_t prompt_hash = 0;
  std::string backend_id;
  RubricType rubric_type = RubricType::basic;
  std::string timestamp;
  int attempt_count = 0;
  int replicate = 0;

  RecordKey key() const { return {prompt_hash, backend_id, replicate}; }
  // Empty for ties and failures.
  std::optional<std::string> winner() const;
  std::optional<std::string> loser() const;
  bool operator==(const JudgmentRecord&) const = default;
};

struct RubricScoreRecord {
  std::string essay_id;
  std::string trait_id;
  std::optional<Score> score;  // empty: failure
  std::string explanation;
  std::string raw_response;
  std::uint64_t prompt_hash = 0;
  std::string backend_id;
  RubricType rubric_type = RubricType::basic;
  std::string timestamp;
  int attempt_count = 0;

  RecordKey key() const { return {prompt_hash, backend_id, 0}; }
  bool failed() const { return !score.has_value(); }
  bool operator==(const RubricScoreRecord&) const = default;
};

nlohmann::json to_json(const JudgmentRecord& r);
nlohmann::json to_json(const RubricScoreRecord& r);
// Throws StoreError on missing or mistyped fields.
JudgmentRecord judgment_from_json(const nlohmann::json& j);
RubricScoreRecord rubric_score_from_json(const nlohmann::json& j);

std::uint64_t parse_hash_hex(std::string_view hex);

// UTC, second resolution: 2024-05-01T12:00:00Z
std::string utc_timestamp();

// Model tag of a backend id ("model@endpoint" -> "model").
std::string model_of(std::string_view backend_id);

}  // namespace cjscore
