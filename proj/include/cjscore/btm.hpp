#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cjscore/records.hpp"
#include "json.hpp"

namespace cjscore {

// Bradley-Terry fitting by minorization-maximization.
//
// Each sweep applies Hunter's simultaneous update
//
//   gamma_i <- W_i / sum_j N_ij / (gamma_i + gamma_j)
//
// where W_i is item i's (pseudo-count augmented) win total and N_ij the
// comparison count of pair (i, j), then recentres lambda = log gamma to sum
// zero. The update maximizes a surrogate that minorizes the log-likelihood,
// so the likelihood never decreases and no Hessian is needed. Convergence is
// linear, which is ample at the scale of a single trait's essay set.

struct BTOptions {
  int max_iter = 200;
  double tolerance = 1e-8;  // on max |delta lambda| per sweep
  bool ignore_ties = true;  // false: a tie is half a win each way
  // Fractional wins added both ways to every compared pair. Keeps lambda
  // finite when an essay wins or loses all its comparisons. 0 = raw MLE.
  double pseudo_count = 0.1;
};

struct WinLoss {
  int wins = 0;
  int losses = 0;
  int ties = 0;
  bool operator==(const WinLoss&) const = default;
};

struct BTEstimate {
  std::map<std::string, double> lambda;  // sums to zero
  bool converged = false;
  int iterations_used = 0;
  double log_likelihood = 0.0;  // of the augmented win matrix
  std::map<std::string, WinLoss> comparison_counts;
  // Log-likelihood before the first sweep and after each sweep.
  std::vector<double> log_likelihood_trace;
};

// Outcome of one comparison between `first` and `second`.
struct Comparison {
  std::string first;
  std::string second;
  enum class Outcome { first_wins, second_wins, tie } outcome = Outcome::first_wins;
};

// exp(a - b) / (1 + exp(a - b)) without overflow.
double predict_prob(double lambda_a, double lambda_b);

// Failure records are always dropped; ties follow options.ignore_ties.
// Throws InvalidArgument with no usable comparisons, DisconnectedGraph when
// the compared essays split into groups never compared with each other, and
// SeparationError when pseudo_count is 0 and some group of essays never
// loses (or never wins) against the rest.
BTEstimate fit_bradley_terry(std::span<const JudgmentRecord> judgments, const BTOptions& options = {});
BTEstimate fit_bradley_terry(std::span<const Comparison> comparisons, const BTOptions& options = {});

nlohmann::json to_json(const BTEstimate& estimate);
BTEstimate estimate_from_json(const nlohmann::json& j);

}  // namespace cjscore
