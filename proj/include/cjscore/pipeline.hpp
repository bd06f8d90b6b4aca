#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cjscore/btm.hpp"
#include "cjscore/config.hpp"
#include "cjscore/core.hpp"
#include "cjscore/ingest.hpp"
#include "cjscore/judge.hpp"
#include "cjscore/metrics.hpp"
#include "cjscore/scaling.hpp"
#include "cjscore/store.hpp"
#include "json.hpp"

namespace cjscore {

// ---- settings -------------------------------------------------------------

// Resolves options as CLI flag > environment > config file > default and
// remembers where each value came from.
class Settings {
 public:
  explicit Settings(KeyValueConfig file = {}) : file_(std::move(file)) {}

  // `echo` false keeps the value out of report headers (runtime knobs such
  // as worker counts that must not change report bytes). Secrets are echoed
  // as "<set>".
  std::string resolve(const std::string& key, const std::optional<std::string>& cli, const char* env,
                      std::string fallback, bool echo = true, bool secret = false);

  // key -> "value (source)" for every echoed key, in resolution order.
  std::vector<std::pair<std::string, std::string>> echo() const;

 private:
  struct Entry {
    std::string key;
    std::string value;
    std::string source;
    bool echo;
    bool secret;
  };
  KeyValueConfig file_;
  std::vector<Entry> entries_;
};

// ---- CSV ------------------------------------------------------------------

std::string csv_field(std::string_view value);
// Parses RFC 4180-style CSV (quoted fields, doubled quotes). Blank lines are
// skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// ---- rubric files -----------------------------------------------------------

// JSON file holding the rubric of every trait of one essay set:
//   {"schema": 1, "set_id": 7, "task": "...",
//    "traits": [{"trait_id": "trait1", "criteria_name": "Ideas",
//                "rubric_type": "B", "scale": [0, 1, 2, 3],
//                "descriptors": {"3": "...", ...},
//                "elaborated": "...", "provenance": {...}}]}
struct RubricBook {
  int set_id = 0;
  std::string task;
  std::vector<RubricTrait> traits;
  std::map<std::string, nlohmann::json> provenance;  // trait -> elaboration provenance

  const RubricTrait& trait(std::string_view trait_id) const;
  RubricTrait& trait(std::string_view trait_id);
};

nlohmann::json to_json(const RubricBook& book);
RubricBook rubric_book_from_json(const nlohmann::json& j);
RubricBook load_rubric_book(const std::filesystem::path& path);
void save_rubric_book(const std::filesystem::path& path, const RubricBook& book);

// ---- samples ----------------------------------------------------------------

struct SampleFile {
  std::string trait_id;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, Score>> rows;  // essay id, rater-mean label

  std::vector<std::string> ids() const;
};

SampleFile make_sample(const Dataset& dataset, const SampleSpec& spec);
// Header: essay_id,trait,label,seed
std::string sample_to_csv(const SampleFile& sample);
SampleFile sample_from_csv(std::string_view text, std::string_view source = "<memory>");
SampleFile load_sample(const std::filesystem::path& path);
// Throws InvalidArgument for ids missing from the dataset.
std::vector<Essay> sample_essays(const Dataset& dataset, const SampleFile& sample);

// ---- estimation -------------------------------------------------------------

struct EstimateGroup {
  std::string trait_id;
  std::string backend_id;
  RubricType rubric_type = RubricType::basic;
  int judgments = 0;
  int failures = 0;
  int ties = 0;
  BTEstimate estimate;
};

struct EstimateSet {
  std::string store_digest;
  std::optional<std::uint64_t> seed;
  BTOptions options;
  std::vector<EstimateGroup> groups;  // sorted by (trait, backend, rubric type)
};

// One fit per (trait, backend, rubric type). With a sample, only judgments
// of its trait between two of its essays are used, and the sample seed is
// carried along.
EstimateSet estimate_store(const JudgmentStore& store, const BTOptions& options,
                           const std::optional<SampleFile>& sample = std::nullopt);
nlohmann::json to_json(const EstimateSet& set);
EstimateSet estimate_set_from_json(const nlohmann::json& j);

// ---- score tables -------------------------------------------------------------

// Strategy labels: "R" rubric scoring, "CJ" comparative judgment on the
// coarse scale, "CJ_F" on the fine scale.
struct ScoreRow {
  std::string essay_id;
  std::string trait_id;
  std::string strategy;
  RubricType rubric_type = RubricType::basic;
  std::string model;
  ScaleKind scale = ScaleKind::coarse;
  std::uint64_t seed = 0;
  std::optional<Score> score;  // empty: scoring failed
  std::optional<double> p;     // normalized quality, CJ only
  std::string store_digest;
};

// Every essay of every group, once per requested scale kind. Degenerate
// spreads give every essay the scale midpoint.
std::vector<ScoreRow> score_estimates(const EstimateSet& set, const Dataset& dataset,
                                      std::span<const ScaleKind> kinds, Normalization normalization);
std::vector<ScoreRow> rubric_score_rows(std::span<const RubricScoreRecord> records, std::uint64_t seed,
                                        std::string_view store_digest);

// Header: essay_id,trait,strategy,rubric_type,model,scale,seed,score,p,store_digest
std::string scores_to_csv(std::span<const ScoreRow> rows);
std::vector<ScoreRow> scores_from_csv(std::string_view text, std::string_view source = "<memory>");

// ---- elaboration ----------------------------------------------------------------

// Texts of up to `per_level` essays per agreed score, drawn from essays whose
// two raters gave the same score and that are not in `exclude`.
std::map<Score, std::vector<std::string>> elaboration_examples(const Dataset& dataset, std::string_view trait_id,
                                                               std::span<const std::string> exclude,
                                                               std::size_t per_level, std::uint64_t seed);

// ---- evaluation ---------------------------------------------------------------

struct ConditionKey {
  std::string strategy;
  std::string rubric_type;
  std::string model;
  auto operator<=>(const ConditionKey&) const = default;
  std::string label() const;  // "CJ/B/gpt-4"
};

// QWK of one condition on one trait for one seed.
struct EvalCell {
  ConditionKey condition;
  std::string trait_id;
  std::uint64_t seed = 0;
  int n = 0;
  int failures = 0;
  double qwk_rater1 = 0.0;
  double qwk_rater2 = 0.0;
  double qwk_mean = 0.0;
  double qwk_label = 0.0;  // against the rater mean snapped to the scale
};

struct Summary {
  double mean = 0.0;
  double sd_pooled = 0.0;    // over every (seed, rater) value
  double sd_unpooled = 0.0;  // over per-seed rater means
  int count = 0;             // seeds
};

struct ConditionSummary {
  ConditionKey condition;
  std::map<std::string, Summary> per_trait;
  Summary total;  // mean of trait means; SDs over all values
};

struct ConditionTest {
  ConditionKey a;
  ConditionKey b;
  std::string test;  // "wilcoxon" or "mann-whitney"
  std::optional<TestResult> result;
  std::string note;
};

struct EvaluationReport {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::string> traits;
  std::vector<EvalCell> cells;
  std::vector<ConditionSummary> conditions;
  std::vector<ConditionTest> tests;
};

// QWK of every (condition, trait, seed) against both raters. With
// `include_human` a "R/B/Human" condition compares rater 1 with rater 2 on
// the same essays. Paired conditions are compared with the Wilcoxon test
// over matching (trait, seed, rater) units; CJ against CJ_F of the same
// rubric type and model with the Mann-Whitney test.
EvaluationReport evaluate_scores(const Dataset& dataset, std::span<const ScoreRow> rows, bool include_human = true);

std::string report_markdown(const EvaluationReport& report);
// Per-(condition, trait, seed) rows.
std::string report_cells_csv(const EvaluationReport& report);
// Per-(condition, trait) summaries, trait "Total" included.
std::string report_summary_csv(const EvaluationReport& report);

// ---- simulation -----------------------------------------------------------------

// "linspace:LO:HI" (needs n) or an explicit comma list.
std::vector<double> parse_lambda_spec(std::string_view spec, int n);

struct SimulationSpec {
  int n = 30;
  std::string lambda_spec = "linspace:-2:2";
  int rounds = 5;
  std::uint64_t seed = 1;
  SimulationMode mode = SimulationMode::sample;
  ScoreScale scale = ScoreScale::integer_range(0, 3);
  BTOptions bt;
  int workers = 1;
};

struct SimulationRow {
  std::string essay_id;
  double true_lambda = 0.0;
  double fitted_lambda = 0.0;
  Score planted;
  Score recovered;
};

struct SimulationReport {
  SimulationSpec spec;
  int comparisons = 0;
  bool converged = false;
  int iterations = 0;
  double spearman = 0.0;
  double qwk = 0.0;
  double max_abs_error = 0.0;  // fitted vs centred true lambda
  std::vector<SimulationRow> rows;
};

SimulationReport run_simulation(const SimulationSpec& spec);
nlohmann::json to_json(const SimulationReport& report);
std::string simulation_markdown(const SimulationReport& report);

// Hex FNV-1a digest of a file's bytes, for report provenance.
std::string file_digest(const std::filesystem::path& path);

}  // namespace cjscore
