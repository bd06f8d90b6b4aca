#include "cjscore/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cjscore/error.hpp"

namespace cjscore {

std::string_view to_string(Normalization n) { return n == Normalization::minmax ? "minmax" : "rank"; }

Normalization parse_normalization(std::string_view text) {
  if (text == "minmax") return Normalization::minmax;
  if (text == "rank") return Normalization::rank;
  throw InvalidArgument("unknown normalization '" + std::string(text) + "' (expected minmax|rank)");
}

std::map<std::string, double> normalize_minmax(const std::map<std::string, double>& lambda) {
  if (lambda.empty()) throw DegenerateSpread("no estimates to normalize");
  auto [lo, hi] = std::minmax_element(lambda.begin(), lambda.end(),
                                      [](const auto& a, const auto& b) { return a.second < b.second; });
  const double min = lo->second;
  const double max = hi->second;
  if (!(max > min)) throw DegenerateSpread("all quality estimates are equal");
  std::map<std::string, double> out;
  for (const auto& [id, v] : lambda) {
    out[id] = v == min ? 0.0 : v == max ? 1.0 : std::clamp((v - min) / (max - min), 0.0, 1.0);
  }
  return out;
}

std::map<std::string, double> normalize_rank(const std::map<std::string, double>& lambda) {
  if (lambda.empty()) throw DegenerateSpread("no estimates to normalize");
  std::vector<std::pair<double, std::string>> sorted;
  for (const auto& [id, v] : lambda) sorted.emplace_back(v, id);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front().first == sorted.back().first) throw DegenerateSpread("all quality estimates are equal");
  const double n = static_cast<double>(sorted.size());
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double avg_rank0 = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0;
    for (std::size_t k = i; k < j; ++k) out[sorted[k].second] = avg_rank0 / (n - 1.0);
    i = j;
  }
  return out;
}

std::map<std::string, double> normalize(const std::map<std::string, double>& lambda, Normalization how) {
  return how == Normalization::minmax ? normalize_minmax(lambda) : normalize_rank(lambda);
}

Score transform_to_scale(double p, const ScoreScale& scale) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in [0, 1]");
  if (scale.empty()) throw InvalidArgument("empty score scale");
  if (p == 0.0) return scale.min();
  if (p == 1.0) return scale.max();
  const double lo = scale.min().value();
  const double hi = scale.max().value();
  return nearest_scale_value(p * (hi - lo) + lo, scale);
}

Score midpoint_score(const ScoreScale& scale) {
  return nearest_scale_value(Score::from_centi((scale.min().centi() + scale.max().centi()) / 2), scale);
}

}  // namespace cjscore
