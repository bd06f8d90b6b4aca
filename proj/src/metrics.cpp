#include "cjscore/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "cjscore/error.hpp"

namespace cjscore {

namespace {

std::vector<std::size_t> to_indices(std::span<const Score> v, const ScoreScale& scale, const char* which) {
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (Score s : v) {
    auto idx = scale.index_of(s);
    if (!idx) {
      throw InvalidArgument(std::string(which) + " score " + s.str() + " is not on scale " + scale.bracketed());
    }
    out.push_back(*idx);
  }
  return out;
}

double two_sided_from_counts(std::uint64_t le, std::uint64_t ge, std::uint64_t total) {
  const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
  return std::min(1.0, 2.0 * tail);
}

double normal_two_sided(double deviation, double variance) {
  if (!(variance > 0)) return 1.0;
  const double z = std::max(0.0, (std::abs(deviation) - 0.5) / std::sqrt(variance));
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

// Sum of t^3 - t over groups of equal values.
double tie_term(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    const double t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

}  // namespace

double qwk_indices(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t categories) {
  if (a.size() != b.size()) throw InvalidArgument("qwk: rating vectors differ in length");
  if (a.size() < 2) throw InvalidArgument("qwk: need at least 2 ratings");
  if (categories < 2) throw InvalidArgument("qwk: need at least 2 categories");
  const std::size_t c = categories;
  std::vector<double> observed(c * c, 0.0);
  std::vector<double> hist_a(c, 0.0);
  std::vector<double> hist_b(c, 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] >= c || b[k] >= c) throw InvalidArgument("qwk: category index out of range");
    observed[a[k] * c + b[k]] += 1.0;
    hist_a[a[k]] += 1.0;
    hist_b[b[k]] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  const double span = static_cast<double>(c - 1);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d / (span * span);
      num += w * observed[i * c + j];
      den += w * hist_a[i] * hist_b[j] / n;
    }
  }
  if (den == 0.0) return 1.0;
  return 1.0 - num / den;
}

double qwk(std::span<const Score> a, std::span<const Score> b, const ScoreScale& scale) {
  if (a.size() != b.size()) throw InvalidArgument("qwk: rating vectors differ in length");
  const auto ia = to_indices(a, scale, "first");
  const auto ib = to_indices(b, scale, "second");
  return qwk_indices(ia, ib, scale.size());
}

RaterAgreement mean_qwk_vs_raters(std::span<const Score> predicted, std::span<const Score> rater1,
                                  std::span<const Score> rater2, const ScoreScale& scale) {
  if (predicted.size() != rater1.size() || predicted.size() != rater2.size()) {
    throw InvalidArgument("mean_qwk_vs_raters: vectors differ in length");
  }
  auto snap = [&](std::span<const Score> v) {
    std::vector<Score> out;
    out.reserve(v.size());
    for (Score s : v) out.push_back(nearest_scale_value(s, scale));
    return out;
  };
  const auto r1 = snap(rater1);
  const auto r2 = snap(rater2);
  RaterAgreement out;
  out.qwk_rater1 = qwk(predicted, r1, scale);
  out.qwk_rater2 = qwk(predicted, r2, scale);
  out.mean = (out.qwk_rater1 + out.qwk_rater2) / 2.0;
  return out;
}

std::string_view to_string(TestMethod m) { return m == TestMethod::exact ? "exact" : "normal-approximation"; }

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("wilcoxon: paired samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw InvalidArgument("wilcoxon: degenerate paired sample (all differences are zero)");

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
  const auto ranks = average_ranks(magnitudes);
  const std::size_t n = diffs.size();

  double t_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0) t_plus += ranks[i];
  }
  const double total = static_cast<double>(n) * static_cast<double>(n + 1) / 2.0;

  TestResult r;
  r.statistic = std::min(t_plus, total - t_plus);
  r.n_effective = static_cast<int>(n);
  if (n <= static_cast<std::size_t>(kWilcoxonExactMaxN)) {
    // doubled ranks are integers, so comparisons below are exact
    std::vector<std::int64_t> twice(n);
    for (std::size_t i = 0; i < n; ++i) twice[i] = std::llround(2.0 * ranks[i]);
    const std::int64_t observed = std::llround(2.0 * t_plus);
    std::uint64_t le = 0, ge = 0;
    const std::uint64_t patterns = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      std::int64_t t = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1U) t += twice[i];
      }
      le += t <= observed;
      ge += t >= observed;
    }
    r.method = TestMethod::exact;
    r.p_value = two_sided_from_counts(le, ge, patterns);
  } else {
    const double nn = static_cast<double>(n);
    const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term(magnitudes) / 48.0;
    r.method = TestMethod::normal_approximation;
    r.p_value = normal_two_sided(t_plus - total / 2.0, var);
  }
  return r;
}

TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw InvalidArgument("mann_whitney_u: both samples must be nonempty");
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = average_ranks(pooled);
  const std::size_t nx = x.size();
  const std::size_t ny = y.size();
  const std::size_t n = nx + ny;

  double rank_sum_x = 0.0;
  for (std::size_t i = 0; i < nx; ++i) rank_sum_x += ranks[i];
  const double u_x = rank_sum_x - static_cast<double>(nx) * static_cast<double>(nx + 1) / 2.0;
  const double u_y = static_cast<double>(nx) * static_cast<double>(ny) - u_x;

  TestResult r;
  r.statistic = std::min(u_x, u_y);
  r.n_effective = static_cast<int>(n);
  if (n <= static_cast<std::size_t>(kMannWhitneyExactMaxN)) {
    std::vector<std::int64_t> twice(n);
    for (std::size_t i = 0; i < n; ++i) twice[i] = std::llround(2.0 * ranks[i]);
    const std::int64_t observed = std::llround(2.0 * rank_sum_x);
    std::uint64_t le = 0, ge = 0, total = 0;
    const std::uint64_t patterns = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != nx) continue;
      std::int64_t s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1U) s += twice[i];
      }
      ++total;
      le += s <= observed;
      ge += s >= observed;
    }
    r.method = TestMethod::exact;
    r.p_value = two_sided_from_counts(le, ge, total);
  } else {
    const double nxd = static_cast<double>(nx);
    const double nyd = static_cast<double>(ny);
    const double nd = static_cast<double>(n);
    const double var = nxd * nyd / 12.0 * ((nd + 1.0) - tie_term(pooled) / (nd * (nd - 1.0)));
    r.method = TestMethod::normal_approximation;
    r.p_value = normal_two_sided(u_x - nxd * nyd / 2.0, var);
  }
  return r;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman_rho: inputs differ in length");
  if (x.size() < 3) throw InvalidArgument("spearman_rho: need at least 3 pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("spearman_rho: constant input");
  return sxy / std::sqrt(sxx * syy);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace cjscore
