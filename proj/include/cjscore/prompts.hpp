#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cjscore/core.hpp"

namespace cjscore {

enum class TemplateId {
  rubric_score_basic,
  rubric_score_elaborated,
  cj_compare,
  elaborate_egd,
  elaborate_ese,
};

inline constexpr std::array<TemplateId, 5> kAllTemplates = {
    TemplateId::rubric_score_basic, TemplateId::rubric_score_elaborated, TemplateId::cj_compare,
    TemplateId::elaborate_egd, TemplateId::elaborate_ese};

// "rubric-score-B", "rubric-score-elab", "cj-compare", "elaborate-EGD", "elaborate-ESE"
std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view text);

struct PromptText {
  std::string body;
  TemplateId template_id = TemplateId::cj_compare;
  std::uint64_t content_hash = 0;  // FNV-1a of body

  // Sidecar metadata, never sent to a remote model. Essay ids in display
  // order ("Essay A" first for comparisons).
  std::vector<std::string> essay_ids;
  std::string trait_id;
  // Round of a deliberately repeated judgment; not part of the body or hash.
  int replicate = 0;

  std::string hash_hex() const;
};

std::string hash_hex(std::uint64_t hash);

// Template bodies use {placeholder} fields; unknown braces are literal text.
class TemplateSet {
 public:
  static const TemplateSet& builtin();
  // Built-in templates with any `<template-id>.txt` in `dir` replacing them.
  static TemplateSet with_overrides(const std::filesystem::path& dir);

  const std::string& get(TemplateId id) const;
  void set(TemplateId id, std::string body);

 private:
  std::map<TemplateId, std::string> bodies_;
};

// Single pass; substituted values are never rescanned.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& fields);

PromptText build_rubric_scoring_prompt(const RubricTrait& rubric, const Essay& essay,
                                       std::string_view task,
                                       const TemplateSet& templates = TemplateSet::builtin());

struct CjPromptOptions {
  // false: the criteria block carries only the criteria name.
  bool include_descriptors = true;
};

PromptText build_cj_prompt(const RubricTrait& rubric, const Essay& essay_a, const Essay& essay_b,
                           std::string_view task, const CjPromptOptions& options = {},
                           const TemplateSet& templates = TemplateSet::builtin());

enum class ElaborationKind { egd, ese };

std::string_view to_string(ElaborationKind kind);
ElaborationKind parse_elaboration_kind(std::string_view text);

inline constexpr std::size_t kMaxExamplesPerLevel = 3;

// At most kMaxExamplesPerLevel examples are used per score level.
PromptText build_elaboration_prompt(ElaborationKind kind, const RubricTrait& rubric,
                                    const std::map<Score, std::vector<std::string>>& examples,
                                    std::string_view task,
                                    const TemplateSet& templates = TemplateSet::builtin());

// "- Score 3:\n\n//Essay1: ...", highest score first.
std::string format_examples(const std::map<Score, std::vector<std::string>>& examples,
                            std::size_t max_per_level);

struct ScoreResponse {
  Score score;
  std::string explanation;
};

// Throws ParseFailure when no score can be found and OutOfScale when the
// score is not a member of `scale`.
ScoreResponse parse_score_response(std::string_view text, const ScoreScale& scale);

enum class Verdict { a, b };

enum class CjResponseClass { a, b, tie, unparsable };

std::string_view canonical_verdict(Verdict v);  // "Essay A" / "Essay B"

CjResponseClass classify_cj_response(std::string_view text);
// Throws TieResponse or ParseFailure.
Verdict parse_cj_response(std::string_view text);

}  // namespace cjscore
