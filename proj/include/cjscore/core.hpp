#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cjscore {

// Exact two-decimal fixed-point score. Rater means and fine-scale labels are
// compared by value, so they are never held as binary floating point.
class Score {
 public:
  constexpr Score() = default;

  static constexpr Score from_centi(std::int64_t centi) { return Score(centi); }
  static constexpr Score from_int(std::int64_t whole) { return Score(whole * 100); }
  // Rounds to the nearest hundredth, halves away from zero.
  static Score from_double(double value);
  // Accepts "3", "-1", "2.5", "2.33". More than two decimals are rounded.
  static Score parse(std::string_view text);

  constexpr std::int64_t centi() const { return centi_; }
  constexpr double value() const { return static_cast<double>(centi_) / 100.0; }
  constexpr bool is_integer() const { return centi_ % 100 == 0; }

  // Shortest exact form: "2", "2.5", "2.33".
  std::string str() const;

  constexpr auto operator<=>(const Score&) const = default;

 private:
  constexpr explicit Score(std::int64_t centi) : centi_(centi) {}
  std::int64_t centi_ = 0;
};

// Mean of two scores rounded to two decimals (half away from zero).
Score mean_of(Score a, Score b);

enum class ScaleKind { coarse, fine };

std::string_view to_string(ScaleKind kind);
ScaleKind parse_scale_kind(std::string_view text);

// Ordered finite set of permissible scores.
class ScoreScale {
 public:
  ScoreScale() = default;
  // Throws InvalidArgument unless `values` is nonempty and strictly increasing.
  ScoreScale(std::vector<Score> values, ScaleKind kind);

  static ScoreScale coarse_for_set(int set_id);
  // Integer scale [lo, hi].
  static ScoreScale integer_range(int lo, int hi);
  // Comma separated list, e.g. "0,1,2,3".
  static ScoreScale parse(std::string_view text, ScaleKind kind);

  std::span<const Score> values() const { return values_; }
  ScaleKind kind() const { return kind_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  Score min() const { return values_.front(); }
  Score max() const { return values_.back(); }
  bool contains(Score s) const;
  std::optional<std::size_t> index_of(Score s) const;

  // "[0, 1, 2, 3]"
  std::string bracketed() const;

  bool operator==(const ScoreScale&) const = default;

 private:
  std::vector<Score> values_;
  ScaleKind kind_ = ScaleKind::coarse;
};

struct RaterPair {
  Score rater1;
  Score rater2;

  Score mean() const { return mean_of(rater1, rater2); }
  bool agree() const { return rater1 == rater2; }
  bool operator==(const RaterPair&) const = default;
};

struct Essay {
  std::string essay_id;
  int set_id = 0;
  std::string text;
  std::map<std::string, RaterPair> rater_scores;  // trait_id -> raters

  const RaterPair* scores_for(std::string_view trait_id) const;
};

struct Dataset {
  int set_id = 0;
  std::vector<Essay> essays;
  std::vector<std::string> traits;
  std::string prompt_text;
  ScoreScale scale;  // native coarse scale

  const Essay* find(std::string_view essay_id) const;
  bool has_trait(std::string_view trait_id) const;
};

struct TraitLabel {
  std::string essay_id;
  std::string trait_id;
  Score label;
};

// Rater-mean label of `essay` on `trait_id`; nullopt when the trait is unscored.
std::optional<TraitLabel> trait_label(const Essay& essay, std::string_view trait_id);

enum class RubricType { basic, egd, ese };

std::string_view to_string(RubricType type);  // "B", "EGD", "ESE"
RubricType parse_rubric_type(std::string_view text);

struct RubricTrait {
  std::string trait_id;
  std::string criteria_name;
  RubricType rubric_type = RubricType::basic;
  ScoreScale scale;
  std::map<Score, std::string> descriptors;
  std::map<Score, std::vector<std::string>> examples;
  // Model-generated rubric text, stored verbatim. Replaces the descriptor
  // block in prompts when present.
  std::optional<std::string> elaborated;

  // Throws InvalidArgument when the descriptors miss a scale value.
  void validate() const;
  // Descriptor block, highest score first ("Score 3: ...").
  std::string descriptor_text() const;
  // What prompts show as the criteria: the elaborated text when present.
  std::string criteria_text() const;
};

// Natural ordering for essay ids: all-digit ids compare numerically, anything
// else lexicographically after them.
bool essay_id_less(std::string_view a, std::string_view b);

// Sorted unique rater-mean labels for `trait_id` across `essays`.
ScoreScale build_fine_scale(std::span<const Essay> essays, std::string_view trait_id);

// Nearest member of `scale`; exact ties go to the lower value.
Score nearest_scale_value(Score x, const ScoreScale& scale);
// Floating-point variant. Distances within 1e-9 of a hundredth count as ties.
Score nearest_scale_value(double x, const ScoreScale& scale);

}  // namespace cjscore
