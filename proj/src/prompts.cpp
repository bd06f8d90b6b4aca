#include "cjscore/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "cjscore/config.hpp"
#include "cjscore/error.hpp"
#include "cjscore/rng.hpp"

namespace cjscore {

namespace {

constexpr std::string_view kRubricScoreBasic =
    "Q. Please score student writing according to the criteria given in the '{criteria_name}' "
    "aspect.\n"
    "\n"
    "//Criteria: {criteria}\n"
    "\n"
    "//Answer format: {'score_explanation': [content], 'score': [number]} score = {score_list} "
    "Please answer only in the above dictionary format.\n"
    "\n"
    "//Prompt: {essay_prompt}\n"
    "\n"
    "//Essay: {essay_content}";

constexpr std::string_view kRubricScoreElaborated =
    "Q. Please score student writing according to the scoring examples and criteria given in "
    "the '{criteria_name}' aspect.\n"
    "\n"
    "//Scoring examples: {examples}\n"
    "\n"
    "//Criteria: {criteria}\n"
    "\n"
    "//Answer format: {'score_explanation': [content], 'score': [number]} score = {score_list} "
    "Please answer only in the above dictionary format.\n"
    "\n"
    "//Prompt: {essay_prompt}\n"
    "\n"
    "//Essay: {essay_content}";

// Both essay labels carry the "//" marker.
constexpr std::string_view kCjCompare =
    "Q. You're a writing assessment expert. Compare two essays (Essay A, Essay B) based on the "
    "criteria below and choose which one did better. Please answer without explanation. (e.g., "
    "Essay A or Essay B)\n"
    "\n"
    "//Criteria:\n"
    "\n"
    "{criteria_name}\n"
    "\n"
    "{criteria}\n"
    "\n"
    "//Prompt:\n"
    "\n"
    "{essay_prompt}\n"
    "\n"
    "//Essay A: {essayA_content}\n"
    "\n"
    "//Essay B: {essayB_content}";

constexpr std::string_view kElaborateHead =
    "Below are representative essay examples for each score on the \"{criteria_name}\" aspect "
    "of the essay grading scale. Use the essay examples to elaborate on existing descriptors. ";

constexpr std::string_view kElaborateEgdInstruction =
    "Create specific descriptors for each score, but write them as generalised statements.";

constexpr std::string_view kElaborateEseInstruction =
    "Elaborate descriptors for each score, with specific examples.";

constexpr std::string_view kElaborateTail =
    "\n"
    "\n"
    "//Grading scale: {scale_to_elaborate}\n"
    "\n"
    "//Example essay:\n"
    "\n"
    "{examples}\n"
    "\n"
    "//Writing task: {essay_prompt}";

// Stands in for a dropped criteria block until rendering is finished.
constexpr std::string_view kDroppedCriteria = "\x01\x02dropped-criteria\x02\x01";

PromptText finish(std::string body, TemplateId id, std::vector<std::string> essay_ids,
                  std::string trait_id) {
  PromptText p;
  p.content_hash = fnv1a64(body);
  p.body = std::move(body);
  p.template_id = id;
  p.essay_ids = std::move(essay_ids);
  p.trait_id = std::move(trait_id);
  return p;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Reads a decimal number at `pos`; empty when none.
std::string_view read_number(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
  const std::size_t digits_start = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == digits_start) return {};
  if (i + 1 < s.size() && s[i] == '.' && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  }
  return s.substr(pos, i - pos);
}

std::size_t skip(std::string_view s, std::size_t i, std::string_view chars) {
  while (i < s.size() && (is_space(s[i]) || chars.find(s[i]) != std::string_view::npos)) ++i;
  return i;
}

std::optional<std::string_view> find_score_value(std::string_view text) {
  const std::string low = lower(text);
  std::size_t from = 0;
  while (true) {
    const auto hit = low.find("score", from);
    if (hit == std::string::npos) return std::nullopt;
    from = hit + 5;
    if (hit > 0 && (is_alnum(low[hit - 1]) || low[hit - 1] == '_')) continue;
    std::size_t i = hit + 5;
    if (i < low.size() && (is_alnum(low[i]) || low[i] == '_')) continue;
    i = skip(low, i, "'\"");
    if (i < low.size() && (low[i] == ':' || low[i] == '=')) {
      ++i;
    } else if (low.compare(i, 3, "is ") == 0) {
      i += 3;
    } else if (low.compare(i, 3, "of ") == 0) {
      i += 3;
    } else {
      continue;
    }
    i = skip(low, i, "['\"");
    auto num = read_number(text, i);
    if (!num.empty()) return num;
  }
}

std::string find_explanation(std::string_view text) {
  const std::string low = lower(text);
  const auto hit = low.find("score_explanation");
  if (hit == std::string::npos) return {};
  std::size_t i = skip(low, hit + 17, "'\"");
  if (i >= low.size() || low[i] != ':') return {};
  i = skip(low, i + 1, "[");
  if (i >= text.size()) return {};
  const char q = text[i];
  if (q == '\'' || q == '"') {
    // closing quote is one followed by a dictionary delimiter
    std::string out;
    for (std::size_t k = i + 1; k < text.size(); ++k) {
      if (text[k] == '\\' && k + 1 < text.size()) {
        out += text[++k];
        continue;
      }
      if (text[k] == q) {
        std::size_t n = k + 1;
        while (n < text.size() && is_space(text[n])) ++n;
        if (n >= text.size() || text[n] == ',' || text[n] == '}' || text[n] == ']') return out;
      }
      out += text[k];
    }
    return out;
  }
  const auto end = text.find_first_of(",}", i);
  std::string_view raw = text.substr(i, end == std::string_view::npos ? std::string_view::npos : end - i);
  while (!raw.empty() && (is_space(raw.back()) || raw.back() == ']')) raw.remove_suffix(1);
  return std::string(raw);
}

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::rubric_score_basic: return "rubric-score-B";
    case TemplateId::rubric_score_elaborated: return "rubric-score-elab";
    case TemplateId::cj_compare: return "cj-compare";
    case TemplateId::elaborate_egd: return "elaborate-EGD";
    case TemplateId::elaborate_ese: return "elaborate-ESE";
  }
  return "cj-compare";
}

TemplateId parse_template_id(std::string_view text) {
  for (TemplateId id : kAllTemplates) {
    if (to_string(id) == text) return id;
  }
  throw InvalidArgument("unknown template id '" + std::string(text) + "'");
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string PromptText::hash_hex() const { return cjscore::hash_hex(content_hash); }

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    TemplateSet s;
    s.bodies_[TemplateId::rubric_score_basic] = std::string(kRubricScoreBasic);
    s.bodies_[TemplateId::rubric_score_elaborated] = std::string(kRubricScoreElaborated);
    s.bodies_[TemplateId::cj_compare] = std::string(kCjCompare);
    s.bodies_[TemplateId::elaborate_egd] =
        std::string(kElaborateHead) + std::string(kElaborateEgdInstruction) + std::string(kElaborateTail);
    s.bodies_[TemplateId::elaborate_ese] =
        std::string(kElaborateHead) + std::string(kElaborateEseInstruction) + std::string(kElaborateTail);
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::with_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InvalidArgument("template directory '" + dir.string() + "' does not exist");
  }
  TemplateSet s = builtin();
  for (TemplateId id : kAllTemplates) {
    const auto file = dir / (std::string(to_string(id)) + ".txt");
    if (std::filesystem::exists(file)) {
      std::string body = read_file(file);
      while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
      s.set(id, std::move(body));
    }
  }
  return s;
}

const std::string& TemplateSet::get(TemplateId id) const { return bodies_.at(id); }

void TemplateSet::set(TemplateId id, std::string body) { bodies_[id] = std::move(body); }

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& fields) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = fields.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != fields.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string format_examples(const std::map<Score, std::vector<std::string>>& examples,
                            std::size_t max_per_level) {
  std::string out;
  for (auto it = examples.rbegin(); it != examples.rend(); ++it) {
    if (it->second.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += "- Score " + it->first.str() + ":";
    const std::size_t n = std::min(max_per_level, it->second.size());
    for (std::size_t k = 0; k < n; ++k) {
      out += "\n\n//Essay" + std::to_string(k + 1) + ": " + it->second[k];
    }
  }
  return out;
}

PromptText build_rubric_scoring_prompt(const RubricTrait& rubric, const Essay& essay,
                                       std::string_view task, const TemplateSet& templates) {
  rubric.validate();
  if (essay.text.empty()) {
    throw InvalidArgument("essay '" + essay.essay_id + "' has no text");
  }
  const bool elaborated = rubric.rubric_type != RubricType::basic;
  const TemplateId id = elaborated ? TemplateId::rubric_score_elaborated : TemplateId::rubric_score_basic;
  std::map<std::string, std::string> fields{
      {"criteria_name", rubric.criteria_name},
      {"criteria", rubric.criteria_text()},
      {"score_list", rubric.scale.bracketed()},
      {"essay_prompt", std::string(task)},
      {"essay_content", essay.text},
  };
  if (elaborated) fields["examples"] = format_examples(rubric.examples, SIZE_MAX);
  return finish(render_template(templates.get(id), fields), id, {essay.essay_id}, rubric.trait_id);
}

PromptText build_cj_prompt(const RubricTrait& rubric, const Essay& essay_a, const Essay& essay_b,
                           std::string_view task, const CjPromptOptions& options,
                           const TemplateSet& templates) {
  if (essay_a.essay_id == essay_b.essay_id) {
    throw InvalidArgument("cannot compare essay '" + essay_a.essay_id + "' with itself");
  }
  if (options.include_descriptors) rubric.validate();
  std::map<std::string, std::string> fields{
      {"criteria_name", rubric.criteria_name},
      {"criteria", options.include_descriptors ? rubric.criteria_text() : std::string(kDroppedCriteria)},
      {"essay_prompt", std::string(task)},
      {"essayA_content", essay_a.text},
      {"essayB_content", essay_b.text},
  };
  std::string body = render_template(templates.get(TemplateId::cj_compare), fields);
  if (!options.include_descriptors) {
    // drop the placeholder together with the blank line that introduced it
    for (auto pos = body.find(kDroppedCriteria); pos != std::string::npos;
         pos = body.find(kDroppedCriteria)) {
      std::size_t start = pos;
      if (start >= 2 && body.compare(start - 2, 2, "\n\n") == 0) start -= 2;
      body.erase(start, pos + kDroppedCriteria.size() - start);
    }
  }
  return finish(std::move(body), TemplateId::cj_compare, {essay_a.essay_id, essay_b.essay_id},
                rubric.trait_id);
}

std::string_view to_string(ElaborationKind kind) { return kind == ElaborationKind::egd ? "EGD" : "ESE"; }

ElaborationKind parse_elaboration_kind(std::string_view text) {
  if (text == "EGD" || text == "egd") return ElaborationKind::egd;
  if (text == "ESE" || text == "ese") return ElaborationKind::ese;
  throw InvalidArgument("unknown elaboration kind '" + std::string(text) + "' (expected EGD|ESE)");
}

PromptText build_elaboration_prompt(ElaborationKind kind, const RubricTrait& rubric,
                                    const std::map<Score, std::vector<std::string>>& examples,
                                    std::string_view task, const TemplateSet& templates) {
  const bool any = std::any_of(examples.begin(), examples.end(),
                               [](const auto& kv) { return !kv.second.empty(); });
  if (!any) throw InvalidArgument("elaboration needs at least one example essay");
  const TemplateId id = kind == ElaborationKind::egd ? TemplateId::elaborate_egd : TemplateId::elaborate_ese;
  std::map<std::string, std::string> fields{
      {"criteria_name", rubric.criteria_name},
      {"scale_to_elaborate", rubric.descriptor_text()},
      {"examples", format_examples(examples, kMaxExamplesPerLevel)},
      {"essay_prompt", std::string(task)},
  };
  return finish(render_template(templates.get(id), fields), id, {}, rubric.trait_id);
}

ScoreResponse parse_score_response(std::string_view text, const ScoreScale& scale) {
  auto value = find_score_value(text);
  if (!value) {
    // bare number answer, e.g. "2" or "[2]"
    std::size_t b = 0, e = text.size();
    auto junk = [](char c) { return is_space(c) || std::string_view("[](){}'\".").find(c) != std::string_view::npos; };
    while (b < e && junk(text[b])) ++b;
    while (e > b && junk(text[e - 1])) --e;
    auto num = read_number(text, b);
    if (!num.empty() && b + num.size() == e) value = num;
  }
  if (!value) throw ParseFailure("no score found in response");
  const Score s = Score::parse(*value);
  if (!scale.contains(s)) {
    throw OutOfScale("score " + s.str() + " is not on scale " + scale.bracketed());
  }
  return ScoreResponse{s, find_explanation(text)};
}

std::string_view canonical_verdict(Verdict v) { return v == Verdict::a ? "Essay A" : "Essay B"; }

CjResponseClass classify_cj_response(std::string_view text) {
  const std::string low = lower(text);
  bool saw_a = false;
  bool saw_b = false;
  for (auto pos = low.find("essay"); pos != std::string::npos; pos = low.find("essay", pos + 5)) {
    if (pos > 0 && is_alnum(low[pos - 1])) continue;
    std::size_t i = pos + 5;
    while (i < low.size() && (is_space(low[i]) || low[i] == '(' || low[i] == '"' || low[i] == '\'')) ++i;
    if (i >= low.size() || (low[i] != 'a' && low[i] != 'b')) continue;
    if (i + 1 < low.size() && is_alnum(low[i + 1])) continue;
    (low[i] == 'a' ? saw_a : saw_b) = true;
  }

  static const std::set<std::string, std::less<>> kStrongTie = {"tie", "tied", "equal", "equally",
                                                                "identical", "draw", "neither"};
  static const std::set<std::string, std::less<>> kWeakTie = {"both", "same"};
  bool strong = false;
  bool weak = false;
  for (std::size_t i = 0; i < low.size();) {
    if (!std::isalpha(static_cast<unsigned char>(low[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < low.size() && std::isalpha(static_cast<unsigned char>(low[j]))) ++j;
    const std::string_view word(low.data() + i, j - i);
    strong = strong || kStrongTie.contains(word);
    weak = weak || kWeakTie.contains(word);
    i = j;
  }

  if (strong) return CjResponseClass::tie;
  if (saw_a != saw_b) return saw_a ? CjResponseClass::a : CjResponseClass::b;
  if (weak) return CjResponseClass::tie;
  if (saw_a && saw_b) return CjResponseClass::unparsable;

  // bare letter answer, e.g. "B" or "Answer: A."
  std::size_t e = low.size();
  while (e > 0 && (is_space(low[e - 1]) || std::string_view(".!)\"'*]").find(low[e - 1]) != std::string_view::npos)) --e;
  if (e > 0 && (low[e - 1] == 'a' || low[e - 1] == 'b') && (e == 1 || !is_alnum(low[e - 2]))) {
    return low[e - 1] == 'a' ? CjResponseClass::a : CjResponseClass::b;
  }
  return CjResponseClass::unparsable;
}

Verdict parse_cj_response(std::string_view text) {
  switch (classify_cj_response(text)) {
    case CjResponseClass::a: return Verdict::a;
    case CjResponseClass::b: return Verdict::b;
    case CjResponseClass::tie: throw TieResponse("response declares a tie");
    case CjResponseClass::unparsable: break;
  }
  throw ParseFailure("response names neither or both essays");
}

}  // namespace cjscore
