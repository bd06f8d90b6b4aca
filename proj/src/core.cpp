#include "cjscore/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <set>

#include "cjscore/error.hpp"

namespace cjscore {

namespace {

std::int64_t round_half_away(std::int64_t numerator, std::int64_t denominator) {
  // denominator > 0
  const std::int64_t q = numerator / denominator;
  const std::int64_t r = numerator % denominator;
  if (2 * std::llabs(r) >= denominator) return q + (numerator < 0 ? -1 : 1);
  return q;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

Score Score::from_double(double value) {
  if (!std::isfinite(value)) throw InvalidArgument("score must be finite");
  return Score(static_cast<std::int64_t>(std::llround(value * 100.0)));
}

Score Score::parse(std::string_view text) {
  const std::string_view original = text;
  text = trim(text);
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if ((whole.empty() && frac.empty()) || (!whole.empty() && !all_digits(whole)) ||
      (dot != std::string_view::npos && !frac.empty() && !all_digits(frac)) ||
      (dot != std::string_view::npos && whole.empty() && frac.empty())) {
    throw InvalidArgument("not a score: '" + std::string(original) + "'");
  }
  if (whole.size() > 15) throw InvalidArgument("score out of range: '" + std::string(original) + "'");

  std::int64_t units = 0;
  if (!whole.empty()) std::from_chars(whole.data(), whole.data() + whole.size(), units);
  // Keep three fractional digits so the hundredth can be rounded.
  std::int64_t milli = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    milli = milli * 10 + (i < frac.size() ? frac[i] - '0' : 0);
  }
  std::int64_t total_milli = units * 1000 + milli;
  std::int64_t centi = total_milli / 10;
  const std::int64_t last = total_milli % 10;
  if (last >= 5) ++centi;  // magnitude rounding, so halves go away from zero
  return Score(negative ? -centi : centi);
}

std::string Score::str() const {
  const std::int64_t mag = std::llabs(centi_);
  std::string out = centi_ < 0 ? "-" : "";
  out += std::to_string(mag / 100);
  const std::int64_t frac = mag % 100;
  if (frac != 0) {
    out += '.';
    out += static_cast<char>('0' + frac / 10);
    if (frac % 10 != 0) out += static_cast<char>('0' + frac % 10);
  }
  return out;
}

Score mean_of(Score a, Score b) {
  return Score::from_centi(round_half_away(a.centi() + b.centi(), 2));
}

std::string_view to_string(ScaleKind kind) { return kind == ScaleKind::coarse ? "coarse" : "fine"; }

ScaleKind parse_scale_kind(std::string_view text) {
  if (text == "coarse") return ScaleKind::coarse;
  if (text == "fine") return ScaleKind::fine;
  throw InvalidArgument("unknown scale kind '" + std::string(text) + "' (expected coarse|fine)");
}

ScoreScale::ScoreScale(std::vector<Score> values, ScaleKind kind)
    : values_(std::move(values)), kind_(kind) {
  if (values_.empty()) throw InvalidArgument("score scale must have at least one value");
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (!(values_[i - 1] < values_[i])) {
      throw InvalidArgument("score scale values must be strictly increasing");
    }
  }
}

ScoreScale ScoreScale::coarse_for_set(int set_id) {
  switch (set_id) {
    case 7: return integer_range(0, 3);
    case 8: return integer_range(1, 6);
    default:
      throw InvalidArgument("no built-in scale for essay set " + std::to_string(set_id));
  }
}

ScoreScale ScoreScale::integer_range(int lo, int hi) {
  if (lo > hi) throw InvalidArgument("empty integer range");
  std::vector<Score> v;
  for (int s = lo; s <= hi; ++s) v.push_back(Score::from_int(s));
  return ScoreScale(std::move(v), ScaleKind::coarse);
}

ScoreScale ScoreScale::parse(std::string_view text, ScaleKind kind) {
  std::vector<Score> v;
  while (!text.empty()) {
    const auto comma = text.find(',');
    v.push_back(Score::parse(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return ScoreScale(std::move(v), kind);
}

bool ScoreScale::contains(Score s) const { return index_of(s).has_value(); }

std::optional<std::size_t> ScoreScale::index_of(Score s) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), s);
  if (it == values_.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - values_.begin());
}

std::string ScoreScale::bracketed() const {
  std::string out = "[";
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i) out += ", ";
    out += values_[i].str();
  }
  out += ']';
  return out;
}

const RaterPair* Essay::scores_for(std::string_view trait_id) const {
  auto it = rater_scores.find(std::string(trait_id));
  return it == rater_scores.end() ? nullptr : &it->second;
}

const Essay* Dataset::find(std::string_view essay_id) const {
  for (const auto& e : essays) {
    if (e.essay_id == essay_id) return &e;
  }
  return nullptr;
}

bool Dataset::has_trait(std::string_view trait_id) const {
  return std::find(traits.begin(), traits.end(), trait_id) != traits.end();
}

std::optional<TraitLabel> trait_label(const Essay& essay, std::string_view trait_id) {
  const RaterPair* pair = essay.scores_for(trait_id);
  if (!pair) return std::nullopt;
  return TraitLabel{essay.essay_id, std::string(trait_id), pair->mean()};
}

std::string_view to_string(RubricType type) {
  switch (type) {
    case RubricType::basic: return "B";
    case RubricType::egd: return "EGD";
    case RubricType::ese: return "ESE";
  }
  return "B";
}

RubricType parse_rubric_type(std::string_view text) {
  if (text == "B" || text == "b") return RubricType::basic;
  if (text == "EGD" || text == "egd") return RubricType::egd;
  if (text == "ESE" || text == "ese") return RubricType::ese;
  throw InvalidArgument("unknown rubric type '" + std::string(text) + "' (expected B|EGD|ESE)");
}

void RubricTrait::validate() const {
  if (scale.empty()) throw InvalidArgument("rubric '" + trait_id + "' has no score scale");
  for (Score s : scale.values()) {
    auto it = descriptors.find(s);
    if (it == descriptors.end() || it->second.empty()) {
      throw InvalidArgument("rubric '" + trait_id + "' has no descriptor for score " + s.str());
    }
  }
}

std::string RubricTrait::descriptor_text() const {
  std::string out;
  for (auto it = descriptors.rbegin(); it != descriptors.rend(); ++it) {
    if (!out.empty()) out += '\n';
    out += "Score " + it->first.str() + ": " + it->second;
  }
  return out;
}

std::string RubricTrait::criteria_text() const {
  return elaborated ? *elaborated : descriptor_text();
}

bool essay_id_less(std::string_view a, std::string_view b) {
  const bool da = all_digits(a);
  const bool db = all_digits(b);
  if (da && db) {
    auto strip = [](std::string_view s) {
      while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
      return s;
    };
    const auto sa = strip(a);
    const auto sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return a < b;
  }
  if (da != db) return da;
  return a < b;
}

ScoreScale build_fine_scale(std::span<const Essay> essays, std::string_view trait_id) {
  std::set<Score> labels;
  for (const auto& e : essays) {
    if (auto label = trait_label(e, trait_id)) labels.insert(label->label);
  }
  if (labels.empty()) {
    throw InvalidArgument("no labeled essays for trait '" + std::string(trait_id) + "'");
  }
  return ScoreScale(std::vector<Score>(labels.begin(), labels.end()), ScaleKind::fine);
}

Score nearest_scale_value(Score x, const ScoreScale& scale) {
  const auto values = scale.values();
  auto it = std::lower_bound(values.begin(), values.end(), x);
  if (it == values.begin()) return *it;
  if (it == values.end()) return values.back();
  const Score above = *it;
  const Score below = *(it - 1);
  // lower wins on equal distance
  return (x.centi() - below.centi()) <= (above.centi() - x.centi()) ? below : above;
}

Score nearest_scale_value(double x, const ScoreScale& scale) {
  if (std::isnan(x)) throw InvalidArgument("cannot round NaN onto a scale");
  const auto values = scale.values();
  const double xc = x * 100.0;
  Score best = values.front();
  double best_dist = std::abs(xc - static_cast<double>(best.centi()));
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = std::abs(xc - static_cast<double>(values[i].centi()));
    if (d < best_dist - 1e-9) {
      best = values[i];
      best_dist = d;
    }
  }
  return best;
}

}  // namespace cjscore
