// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cjscore/btm.hpp"
#include "cjscore/error.hpp"
#include "cjscore/ingest.hpp"
#include "cjscore/judge.hpp"
#include "cjscore/metrics.hpp"
#include "cjscore/pairing.hpp"
#include "cjscore/pipeline.hpp"
#include "cjscore/scaling.hpp"
#include "cjscore/store.hpp"
#include "mock_server.hpp"

using namespace cjscore;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = CJSCORE_SOURCE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- oracles ----

double qwk_oracle(const std::vector<int>& a, const std::vector<int>& b, int k) {
  std::vector<std::vector<double>> o(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) o[a[i]][b[i]] += 1;
  std::vector<double> ra(k, 0.0), cb(k, 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      ra[i] += o[i][j];
      cb[j] += o[i][j];
    }
  }
  const double n = static_cast<double>(a.size());
  double num = 0, den = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double w = double((i - j) * (i - j)) / double((k - 1) * (k - 1));
      num += w * o[i][j];
      den += w * ra[i] * cb[j] / n;
    }
  }
  return den == 0 ? 1.0 : 1.0 - num / den;
}

std::vector<double> avg_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double below = 0, equal = 0;
    for (double w : v) {
      below += w < v[i];
      equal += w == v[i];
    }
    r[i] = below + (equal + 1) / 2;
  }
  return r;
}

double two_sided(double le, double ge, double total) { return std::min(1.0, 2 * std::min(le, ge) / total); }

double wilcoxon_enum(const std::vector<double>& d) {
  std::vector<double> mags;
  for (double x : d) mags.push_back(std::abs(x));
  const auto r = avg_ranks(mags);
  double obs = 0;
  for (std::size_t i = 0; i < d.size(); ++i) obs += d[i] > 0 ? r[i] : 0;
  double le = 0, ge = 0, total = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d.size()); ++mask) {
    double t = 0;
    for (std::size_t i = 0; i < d.size(); ++i) t += (mask >> i & 1) ? r[i] : 0;
    le += t <= obs + 1e-9;
    ge += t >= obs - 1e-9;
    total += 1;
  }
  return two_sided(le, ge, total);
}

double mann_whitney_enum(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> pooled = x;
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto r = avg_ranks(pooled);
  double obs = 0;
  for (std::size_t i = 0; i < x.size(); ++i) obs += r[i];
  std::vector<int> pick(pooled.size(), 0);
  std::fill(pick.end() - static_cast<long>(x.size()), pick.end(), 1);
  double le = 0, ge = 0, total = 0;
  do {
    double s = 0;
    for (std::size_t i = 0; i < pick.size(); ++i) s += pick[i] ? r[i] : 0;
    le += s <= obs + 1e-9;
    ge += s >= obs - 1e-9;
    total += 1;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return two_sided(le, ge, total);
}

ScoreScale fine_set8() {
  std::vector<Score> v;
  for (double x : {1.0, 1.5, 2.0, 2.3, 2.5, 2.7, 3.0, 3.3, 3.5, 3.7, 4.0, 4.3, 4.5, 4.7, 5.0, 5.5, 6.0})
    v.push_back(Score::from_double(x));
  return ScoreScale(std::move(v), ScaleKind::fine);
}

// ---- criteria ----

Outcome c1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  o.require(predict_prob(0.0, 0.0) == 0.5, "P(0,0) != 0.5");
  o.require(std::abs(predict_prob(std::log(3.0), 0.0) - 0.75) < 1e-12, "P(ln3,0) off");
  o.require(seconds_since(t0) < 1.0, "slower than 1 s");
  o.detail = o.pass ? "P(ln3,0)=" + fmt("%.15f", predict_prob(std::log(3.0), 0.0)) : o.detail;
  return o;
}

Outcome c2() {
  Outcome o;
  std::vector<Comparison> cs = {{"a", "b", Comparison::Outcome::first_wins},
                                {"a", "b", Comparison::Outcome::first_wins},
                                {"b", "a", Comparison::Outcome::second_wins},
                                {"b", "a", Comparison::Outcome::first_wins}};
  BTOptions opt;
  opt.pseudo_count = 0.0;
  opt.tolerance = 1e-12;
  const auto e = fit_bradley_terry(std::span<const Comparison>(cs), opt);
  const double gap = e.lambda.at("a") - e.lambda.at("b");
  o.require(std::abs(gap - std::log(3.0)) < 1e-6, "gap " + fmt("%.9f", gap));
  if (o.pass) o.detail = "gap=" + fmt("%.9f", gap);
  return o;
}

Outcome c3() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const int n = 30;
  std::map<std::string, double> truth;
  std::vector<Essay> essays;
  for (int i = 0; i < n; ++i) {
    Essay e;
    e.essay_id = "e" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1);
    e.text = "Essay " + e.essay_id + ".";
    truth[e.essay_id] = -2.0 + 4.0 * i / (n - 1);
    essays.push_back(e);
  }
  RubricTrait rubric;
  rubric.trait_id = "t";
  rubric.criteria_name = "Quality";
  rubric.scale = ScoreScale::integer_range(0, 3);
  for (Score s : rubric.scale.values()) rubric.descriptors[s] = "Level " + s.str() + ".";
  auto backend = simulated_backend(truth, 11, SimulationMode::sample);
  DispatchOptions opt;
  opt.rounds = 5;
  opt.seed = 11;
  const auto schedule = round_robin_pairs(essay_ids(essays), rubric.trait_id);
  const auto run = judge_schedule(*backend, rubric, essays, schedule, nullptr, opt);
  const auto est = fit_bradley_terry(std::span<const JudgmentRecord>(run.records));
  std::vector<double> xs, ys;
  for (const auto& [id, l] : truth) {
    xs.push_back(l);
    ys.push_back(est.lambda.at(id));
  }
  const double rho = spearman_rho(xs, ys);
  bool monotone = true;
  for (std::size_t i = 1; i < est.log_likelihood_trace.size(); ++i) {
    monotone = monotone && est.log_likelihood_trace[i] >= est.log_likelihood_trace[i - 1] - 1e-9;
  }
  const double secs = seconds_since(t0);
  o.require(run.records.size() == 435u * 5, "expected 2175 judgments");
  o.require(rho >= 0.95, "rho " + fmt("%.4f", rho));
  o.require(monotone, "log-likelihood decreased");
  o.require(est.converged, "no convergence");
  o.require(secs < 5.0, "took " + fmt("%.2f", secs) + " s");
  if (o.pass) {
    o.detail = "rho=" + fmt("%.4f", rho) + " sweeps=" + std::to_string(est.iterations_used) + " " + fmt("%.2f", secs) +
               " s";
  }
  return o;
}

Outcome c4() {
  Outcome o;
  using O = Comparison::Outcome;
  std::vector<Comparison> cs = {{"top", "b", O::first_wins}, {"top", "c", O::first_wins}, {"d", "top", O::second_wins},
                                {"b", "c", O::first_wins},   {"c", "d", O::first_wins},   {"d", "b", O::first_wins},
                                {"b", "c", O::second_wins}};
  BTOptions strict;
  strict.pseudo_count = 0.0;
  bool threw = false;
  try {
    fit_bradley_terry(std::span<const Comparison>(cs), strict);
  } catch (const SeparationError&) {
    threw = true;
  }
  o.require(threw, "no error at pseudo count 0");
  const auto e = fit_bradley_terry(std::span<const Comparison>(cs));
  bool finite = true;
  for (const auto& [id, l] : e.lambda) finite = finite && std::isfinite(l);
  o.require(finite, "non-finite lambda");
  o.require(e.converged && e.iterations_used <= 200, "did not converge within 200 sweeps");
  if (o.pass) o.detail = "separation error at 0; converged in " + std::to_string(e.iterations_used) + " sweeps at 0.1";
  return o;
}

Outcome c5() {
  Outcome o;
  const auto scale = ScoreScale::integer_range(0, 3);
  std::vector<Score> same;
  for (int v : {0, 1, 2, 3, 3, 1, 0, 2}) same.push_back(Score::from_int(v));
  o.require(qwk(same, same, scale) == 1.0, "perfect agreement != 1.0");

  std::mt19937_64 gen(20240501);
  double worst = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const int k = std::uniform_int_distribution<int>(2, 6)(gen);
    const int n = std::uniform_int_distribution<int>(2, 20)(gen);
    std::uniform_int_distribution<int> cat(0, k - 1);
    std::vector<int> ia(n), ib(n);
    std::vector<Score> sa, sb;
    for (int i = 0; i < n; ++i) {
      ia[i] = cat(gen);
      ib[i] = cat(gen);
      sa.push_back(Score::from_int(ia[i]));
      sb.push_back(Score::from_int(ib[i]));
    }
    worst = std::max(worst, std::abs(qwk(sa, sb, ScoreScale::integer_range(0, k - 1)) - qwk_oracle(ia, ib, k)));
  }
  o.require(worst < 1e-12, "max deviation " + fmt("%.3g", worst));
  if (o.pass) o.detail = std::to_string(trials) + " instances, max deviation " + fmt("%.3g", worst);
  return o;
}

Outcome c6() {
  Outcome o;
  const auto coarse = ScoreScale::integer_range(0, 3);
  const auto fine = fine_set8();
  for (const auto* s : {&coarse, &fine}) {
    o.require(transform_to_scale(0.0, *s) == s->min(), "p=0 is not the minimum");
    o.require(transform_to_scale(1.0, *s) == s->max(), "p=1 is not the maximum");
  }
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    double a = u(gen), b = u(gen);
    if (a > b) std::swap(a, b);
    violations += transform_to_scale(b, fine) < transform_to_scale(a, fine);
    violations += transform_to_scale(b, coarse) < transform_to_scale(a, coarse);
  }
  o.require(violations == 0, std::to_string(violations) + " monotonicity violations");
  const Score mid = transform_to_scale(0.26, fine);
  o.require(mid == Score::from_double(2.3), "p=0.26 gave " + mid.str());
  if (o.pass) o.detail = "10000 draws monotone, p=0.26 -> " + mid.str();
  return o;
}

Outcome c7() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(9001);
  double worst_w = 0, worst_u = 0;
  int nw = 0, nu = 0;
  while (nw < 100) {
    const int n = std::uniform_int_distribution<int>(1, 10)(gen);
    std::uniform_int_distribution<int> v(0, 6);
    std::vector<double> x(n), y(n), d;
    for (int i = 0; i < n; ++i) {
      x[i] = v(gen);
      y[i] = v(gen);
      if (x[i] != y[i]) d.push_back(x[i] - y[i]);
    }
    if (d.empty()) continue;
    const auto r = wilcoxon_signed_rank(x, y);
    o.require(r.method == TestMethod::exact, "wilcoxon not exact at n=" + std::to_string(n));
    worst_w = std::max(worst_w, std::abs(r.p_value - wilcoxon_enum(d)));
    ++nw;
  }
  while (nu < 100) {
    const int nx = std::uniform_int_distribution<int>(1, 6)(gen);
    const int ny = std::uniform_int_distribution<int>(1, 12 - nx)(gen);
    std::uniform_int_distribution<int> v(0, 5);
    std::vector<double> x(nx), y(ny);
    for (auto& a : x) a = v(gen);
    for (auto& a : y) a = v(gen) + 0.5 * (v(gen) % 2);
    const auto r = mann_whitney_u(x, y);
    o.require(r.method == TestMethod::exact, "mann-whitney not exact");
    worst_u = std::max(worst_u, std::abs(r.p_value - mann_whitney_enum(x, y)));
    ++nu;
  }
  const double secs = seconds_since(t0);
  o.require(worst_w < 1e-12, "wilcoxon deviation " + fmt("%.3g", worst_w));
  o.require(worst_u < 1e-12, "mann-whitney deviation " + fmt("%.3g", worst_u));
  o.require(secs < 10.0, "took " + fmt("%.2f", secs) + " s");
  if (o.pass) {
    o.detail = "100+100 instances, max deviation " + fmt("%.3g", std::max(worst_w, worst_u)) + ", " +
               fmt("%.2f", secs) + " s";
  }
  return o;
}

// Twelve essays of planted quality 0..11 with both raters giving the coarse
// score of quality/11.
struct PlantedFixture {
  Dataset dataset;
  std::map<std::string, double> quality_by_text;
  std::map<std::string, int> quality_by_id;

  PlantedFixture() {
    dataset.set_id = 7;
    dataset.traits = {"trait1"};
    dataset.scale = ScoreScale::integer_range(0, 3);
    for (int i = 0; i < 12; ++i) {
      Essay e;
      e.essay_id = std::to_string(300 + i);
      e.set_id = 7;
      e.text = "Planted essay " + std::to_string(i) + " on patience.";
      const Score s = transform_to_scale(i / 11.0, dataset.scale);
      e.rater_scores["trait1"] = {s, s};
      quality_by_text[e.text] = i;
      quality_by_id[e.essay_id] = i;
      dataset.essays.push_back(e);
    }
  }
};

struct ChainResult {
  int calls = 0;
  std::string report;
  EstimateSet estimates;
  EvaluationReport evaluation;
};

ChainResult run_chain(const PlantedFixture& fx, cjtest::MockServer& server, const fs::path& store_path,
                      bool with_fine) {
  server.reset_calls();
  const RubricBook book = load_rubric_book(kRoot / "data/rubrics/set7_trait1_B.json");
  const RubricTrait& rubric = book.trait("trait1");
  SampleFile sample;
  sample.trait_id = "trait1";
  sample.seed = 5;
  for (const auto& e : fx.dataset.essays) sample.rows.emplace_back(e.essay_id, e.rater_scores.at("trait1").mean());
  const auto essays = sample_essays(fx.dataset, sample);

  LlmBackendConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "mock";
  auto backend = llm_backend(cfg);
  auto store = JudgmentStore::open(store_path);
  DispatchOptions opt;
  opt.workers = 4;
  opt.seed = sample.seed;
  opt.judge.task = book.task;
  const auto schedule = round_robin_pairs(essay_ids(essays), rubric.trait_id);
  judge_schedule(*backend, rubric, essays, schedule, &store, opt);

  ChainResult out;
  out.calls = server.calls();
  const auto reloaded = JudgmentStore::load(store_path);
  out.estimates = estimate_store(reloaded, BTOptions{}, sample);
  std::vector<ScaleKind> kinds = {ScaleKind::coarse};
  if (with_fine) kinds.push_back(ScaleKind::fine);
  const auto rows = score_estimates(out.estimates, fx.dataset, kinds, Normalization::minmax);
  out.evaluation = evaluate_scores(fx.dataset, rows, true);
  out.evaluation.header = {{"store digest", reloaded.content_digest()}, {"sample seed", "5"}};
  out.report = report_markdown(out.evaluation) + report_cells_csv(out.evaluation);
  return out;
}

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("cjscore_acceptance_" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

Outcome c8() {
  Outcome o;
  Scratch scratch;
  const PlantedFixture fx;
  cjtest::MockServer server(cjtest::planted_order_judge(fx.quality_by_text));
  const fs::path store = scratch.dir / "judgments.jsonl";
  const auto first = run_chain(fx, server, store, false);
  o.require(first.calls == 66, "first run made " + std::to_string(first.calls) + " calls");
  o.require(first.estimates.groups.size() == 1, "expected one estimate group");
  if (!first.estimates.groups.empty()) {
    const auto& lambda = first.estimates.groups[0].estimate.lambda;
    std::vector<std::pair<double, int>> order;
    for (const auto& [id, l] : lambda) order.emplace_back(l, fx.quality_by_id.at(id));
    std::sort(order.begin(), order.end());
    bool exact = order.size() == 12;
    for (std::size_t i = 0; exact && i < order.size(); ++i) {
      exact = order[i].second == static_cast<int>(i) && (i == 0 || order[i].first > order[i - 1].first);
    }
    o.require(exact, "planted ranking not recovered");
  }
  double cj_qwk = -2;
  for (const auto& c : first.evaluation.cells) {
    if (c.condition.strategy == "CJ") cj_qwk = c.qwk_rater1;
  }
  o.require(cj_qwk == 1.0, "coarse QWK " + fmt("%.6f", cj_qwk));

  const auto second = run_chain(fx, server, store, false);
  o.require(second.calls == 0, "rerun made " + std::to_string(second.calls) + " calls");
  o.require(second.report == first.report, "rerun report differs");
  if (o.pass) o.detail = "66 calls, ranking exact, QWK 1, rerun 0 calls and identical report";
  return o;
}

Outcome c9() {
  Outcome o;
  const std::vector<std::string> expected = {
      "20002", "20003", "20004", "20005", "20007", "20010", "20011", "20014", "20015", "20016", "20017", "20018",
      "20019", "20020", "20023", "20025", "20026", "20029", "20031", "20032", "20034", "20035", "20036", "20037",
      "20039", "20041", "20042", "20045", "20046", "20047", "20049", "20051", "20052", "20053", "20054"};
  const auto ds = load_dataset(kRoot / "data/fixtures/set7_synthetic.tsv",
                               ColumnMapping::load(kRoot / "data/mappings/asap_set7.cfg"), 7);
  const SampleSpec spec{"trait1", 5, 1};
  auto a = make_sample(ds, spec).ids();
  auto b = make_sample(ds, spec).ids();
  o.require(a.size() == 35, "got " + std::to_string(a.size()) + " ids");
  o.require(a == b, "not deterministic");
  std::sort(a.begin(), a.end());
  o.require(a == expected, "ids differ from the frozen sample");
  if (o.pass) o.detail = "35 ids, repeatable, equal to the frozen list";
  return o;
}

// No live API here: checks that the report has the table layout (conditions
// by traits with a Total column, mean and SD cells, condition tests).
Outcome c10() {
  Outcome o;
  Scratch scratch;
  const PlantedFixture fx;
  cjtest::MockServer server(cjtest::planted_order_judge(fx.quality_by_text));
  const auto r = run_chain(fx, server, scratch.dir / "judgments.jsonl", true);
  const std::string& md = r.report;
  o.require(md.find("| Strategy | Rubric Type | Model | Total | trait1 |") != std::string::npos, "no table header");
  o.require(md.find("| R | B | Human |") != std::string::npos, "no human row");
  o.require(md.find("| CJ | B | mock |") != std::string::npos, "no CJ row");
  o.require(md.find("| CJ_F | B | mock |") != std::string::npos, "no CJ_F row");
  o.require(md.find("## Condition tests") != std::string::npos, "no condition tests");
  if (o.pass) o.detail = "report layout only; figures need the live-API runbook";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 predict_prob values", c1},
      {"2 two-essay closed form", c2},
      {"3 simulated recovery n=30", c3},
      {"4 undefeated essay and pseudo count", c4},
      {"5 qwk oracle", c5},
      {"6 scale transform", c6},
      {"7 exact tests vs enumeration", c7},
      {"8 mock judge end to end", c8},
      {"9 stratified sample of 35", c9},
      {"10 report layout", c10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << (o.detail.empty() ? "" : "  (" + o.detail + ")")
              << "\n";
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
