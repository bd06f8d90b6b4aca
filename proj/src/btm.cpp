#include "cjscore/btm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cjscore/error.hpp"

namespace cjscore {

namespace {

// log(sigmoid(x))
double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct Problem {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> wins;  // wins[i][j]: i over j, augmented
  std::vector<std::vector<double>> raw;   // comparisons actually observed
};

double log_likelihood(const Problem& p, const std::vector<double>& lambda) {
  double ll = 0.0;
  const std::size_t n = p.ids.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && p.wins[i][j] > 0) ll += p.wins[i][j] * log_sigmoid(lambda[i] - lambda[j]);
    }
  }
  return ll;
}

// Nodes reachable from 0 following edges i->j where wins[i][j] > 0 (or the
// reverse direction when `reverse`).
std::vector<bool> reach(const Problem& p, bool reverse) {
  const std::size_t n = p.ids.size();
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      const double w = reverse ? p.wins[j][i] : p.wins[i][j];
      if (!seen[j] && w > 0) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

void center(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

}  // namespace

double predict_prob(double lambda_a, double lambda_b) {
  const double d = lambda_a - lambda_b;
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

BTEstimate fit_bradley_terry(std::span<const JudgmentRecord> judgments, const BTOptions& options) {
  std::vector<Comparison> comparisons;
  comparisons.reserve(judgments.size());
  for (const auto& r : judgments) {
    switch (r.verdict) {
      case JudgmentVerdict::a:
        comparisons.push_back({r.essay_a, r.essay_b, Comparison::Outcome::first_wins});
        break;
      case JudgmentVerdict::b:
        comparisons.push_back({r.essay_a, r.essay_b, Comparison::Outcome::second_wins});
        break;
      case JudgmentVerdict::tie:
        comparisons.push_back({r.essay_a, r.essay_b, Comparison::Outcome::tie});
        break;
      case JudgmentVerdict::failure:
        break;
    }
  }
  return fit_bradley_terry(std::span<const Comparison>(comparisons), options);
}

BTEstimate fit_bradley_terry(std::span<const Comparison> comparisons, const BTOptions& options) {
  if (options.max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  if (!(options.pseudo_count >= 0) || !std::isfinite(options.pseudo_count)) {
    throw InvalidArgument("pseudo_count must be a finite nonnegative number");
  }

  std::vector<const Comparison*> usable;
  for (const auto& c : comparisons) {
    if (c.first == c.second) throw InvalidArgument("comparison of essay '" + c.first + "' with itself");
    if (c.outcome == Comparison::Outcome::tie && options.ignore_ties) continue;
    usable.push_back(&c);
  }
  if (usable.empty()) throw InvalidArgument("no usable comparisons to fit");

  Problem p;
  for (const auto* c : usable) {
    p.ids.push_back(c->first);
    p.ids.push_back(c->second);
  }
  std::sort(p.ids.begin(), p.ids.end(), [](const auto& a, const auto& b) { return essay_id_less(a, b); });
  p.ids.erase(std::unique(p.ids.begin(), p.ids.end()), p.ids.end());
  const std::size_t n = p.ids.size();
  auto index = [&](const std::string& id) {
    return static_cast<std::size_t>(
        std::lower_bound(p.ids.begin(), p.ids.end(), id,
                         [](const auto& a, const auto& b) { return essay_id_less(a, b); }) -
        p.ids.begin());
  };

  BTEstimate est;
  for (const auto& id : p.ids) est.comparison_counts[id] = {};
  p.wins.assign(n, std::vector<double>(n, 0.0));
  p.raw.assign(n, std::vector<double>(n, 0.0));
  for (const auto* c : usable) {
    const std::size_t i = index(c->first);
    const std::size_t j = index(c->second);
    p.raw[i][j] += 1;
    p.raw[j][i] += 1;
    switch (c->outcome) {
      case Comparison::Outcome::first_wins:
        p.wins[i][j] += 1;
        ++est.comparison_counts[c->first].wins;
        ++est.comparison_counts[c->second].losses;
        break;
      case Comparison::Outcome::second_wins:
        p.wins[j][i] += 1;
        ++est.comparison_counts[c->second].wins;
        ++est.comparison_counts[c->first].losses;
        break;
      case Comparison::Outcome::tie:
        p.wins[i][j] += 0.5;
        p.wins[j][i] += 0.5;
        ++est.comparison_counts[c->first].ties;
        ++est.comparison_counts[c->second].ties;
        break;
    }
  }

  // connectivity of the undirected comparison graph
  {
    Problem undirected{p.ids, p.raw, p.raw};
    const auto seen = reach(undirected, false);
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      const std::size_t lost = static_cast<std::size_t>(std::find(seen.begin(), seen.end(), false) - seen.begin());
      throw DisconnectedGraph("comparison graph is disconnected: '" + p.ids[0] + "' and '" +
                              p.ids[lost] + "' are never linked by comparisons");
    }
  }

  if (options.pseudo_count > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && p.raw[i][j] > 0) p.wins[i][j] += options.pseudo_count;
      }
    }
  } else {
    const auto fwd = reach(p, false);
    const auto back = reach(p, true);
    for (std::size_t i = 0; i < n; ++i) {
      if (!fwd[i] || !back[i]) {
        std::string culprit;
        for (const auto& [id, wl] : est.comparison_counts) {
          if ((wl.losses == 0 && wl.ties == 0) || (wl.wins == 0 && wl.ties == 0)) {
            culprit = " (e.g. '" + id + "' " + (wl.losses == 0 ? "never lost" : "never won") + ")";
            break;
          }
        }
        throw SeparationError(
            "maximum likelihood estimate does not exist: some essays win or lose all their "
            "comparisons against the rest" + culprit + "; use a positive pseudo count");
      }
    }
  }

  std::vector<double> total_wins(n, 0.0);
  std::vector<std::vector<double>> games(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      total_wins[i] += p.wins[i][j];
      games[i][j] = p.wins[i][j] + p.wins[j][i];
    }
  }

  std::vector<double> lambda(n, 0.0);
  std::vector<double> next(n, 0.0);
  std::vector<double> gamma(n, 0.0);
  est.log_likelihood_trace.push_back(log_likelihood(p, lambda));
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const double top = *std::max_element(lambda.begin(), lambda.end());
    for (std::size_t i = 0; i < n; ++i) gamma[i] = std::exp(lambda[i] - top);
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && games[i][j] > 0) denom += games[i][j] / (gamma[i] + gamma[j]);
      }
      next[i] = std::log(total_wins[i] / denom);
    }
    center(next);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - lambda[i]));
    lambda.swap(next);
    est.log_likelihood_trace.push_back(log_likelihood(p, lambda));
    est.iterations_used = iter;
    if (delta < options.tolerance) {
      est.converged = true;
      break;
    }
  }

  for (std::size_t i = 0; i < n; ++i) est.lambda[p.ids[i]] = lambda[i];
  est.log_likelihood = est.log_likelihood_trace.back();
  return est;
}

nlohmann::json to_json(const BTEstimate& e) {
  nlohmann::json lambda = nlohmann::json::object();
  for (const auto& [id, v] : e.lambda) lambda[id] = v;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [id, wl] : e.comparison_counts) {
    counts[id] = {{"wins", wl.wins}, {"losses", wl.losses}, {"ties", wl.ties}};
  }
  return nlohmann::json{{"lambda", std::move(lambda)},
                        {"converged", e.converged},
                        {"iterations_used", e.iterations_used},
                        {"log_likelihood", e.log_likelihood},
                        {"comparison_counts", std::move(counts)}};
}

BTEstimate estimate_from_json(const nlohmann::json& j) {
  try {
    BTEstimate e;
    for (const auto& [id, v] : j.at("lambda").items()) e.lambda[id] = v.get<double>();
    e.converged = j.at("converged").get<bool>();
    e.iterations_used = j.at("iterations_used").get<int>();
    e.log_likelihood = j.at("log_likelihood").get<double>();
    for (const auto& [id, c] : j.at("comparison_counts").items()) {
      e.comparison_counts[id] = {c.at("wins").get<int>(), c.at("losses").get<int>(), c.at("ties").get<int>()};
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("malformed estimate JSON: ") + ex.what());
  }
}

}  // namespace cjscore
