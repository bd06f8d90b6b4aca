#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "cjscore/core.hpp"

namespace cjscore {

// Quadratic weighted kappa over the ordinal indices of `scale`. Every scale
// value is a category even when unused, so kappas are comparable across runs.
// Returns 1 when both raters give one identical constant score.
// Throws InvalidArgument on length mismatch, fewer than 2 items, a scale with
// fewer than 2 values, or entries off the scale.
double qwk(std::span<const Score> a, std::span<const Score> b, const ScoreScale& scale);

// Same statistic from category indices in [0, categories).
double qwk_indices(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t categories);

struct RaterAgreement {
  double qwk_rater1 = 0.0;
  double qwk_rater2 = 0.0;
  double mean = 0.0;
};

// Rater scores are first snapped onto `scale` (a no-op on their native scale).
RaterAgreement mean_qwk_vs_raters(std::span<const Score> predicted, std::span<const Score> rater1,
                                  std::span<const Score> rater2, const ScoreScale& scale);

enum class TestMethod { exact, normal_approximation };

std::string_view to_string(TestMethod m);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;  // two-sided
  TestMethod method = TestMethod::exact;
  int n_effective = 0;
};

inline constexpr int kWilcoxonExactMaxN = 12;
inline constexpr int kMannWhitneyExactMaxN = 14;  // n_x + n_y

// W = min(W+, W-) over nonzero differences with average ranks for tied |d|.
// Exact p by enumerating all 2^n sign patterns when n <= 12, else normal
// approximation with tie and continuity corrections. p is
// min(1, 2 * min(P(T <= W), P(T >= W))) under the null distribution.
// Throws InvalidArgument on length mismatch or when every difference is 0.
TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

// U = min(U_x, U_y) with average ranks for ties. Exact p by enumerating all
// C(n, n_x) group assignments when n_x + n_y <= 14, else tie-corrected normal
// approximation with continuity correction. Same two-sided convention.
TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks. Throws InvalidArgument for length
// mismatch, fewer than 3 items, or a constant input.
double spearman_rho(std::span<const double> x, std::span<const double> y);

// 1-based average ranks.
std::vector<double> average_ranks(std::span<const double> values);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1); 0 for fewer than 2 values.
double stddev(std::span<const double> values);

}  // namespace cjscore
