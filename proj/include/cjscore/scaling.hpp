#pragma once

#include <map>
#include <string>
#include <string_view>

#include "cjscore/core.hpp"

namespace cjscore {

// Maps fitted latent qualities onto a rubric's score scale.

enum class Normalization { minmax, rank };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view text);

// p = (lambda - min) / (max - min). Throws DegenerateSpread when fewer than
// two distinct values are present.
std::map<std::string, double> normalize_minmax(const std::map<std::string, double>& lambda);

// p = (average rank - 1) / (n - 1). Same error contract as normalize_minmax.
std::map<std::string, double> normalize_rank(const std::map<std::string, double>& lambda);

std::map<std::string, double> normalize(const std::map<std::string, double>& lambda, Normalization how);

// x = p * (max - min) + min, then the nearest scale member (ties low).
// Throws InvalidArgument unless 0 <= p <= 1.
Score transform_to_scale(double p, const ScoreScale& scale);

// Score given to every essay when the spread is degenerate.
Score midpoint_score(const ScoreScale& scale);

}  // namespace cjscore
