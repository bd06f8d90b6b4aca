#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cjscore/btm.hpp"
#include "cjscore/error.hpp"
#include "cjscore/ingest.hpp"
#include "cjscore/metrics.hpp"
#include "cjscore/pairing.hpp"
#include "cjscore/pipeline.hpp"
#include "cjscore/prompts.hpp"
#include "cjscore/scaling.hpp"
#include "cjscore/store.hpp"

namespace py = pybind11;
using namespace cjscore;

namespace {

ScoreScale to_scale(const std::vector<double>& values, ScaleKind kind = ScaleKind::coarse) {
  std::vector<Score> s;
  for (double v : values) s.push_back(Score::from_double(v));
  return ScoreScale(std::move(s), kind);
}

std::vector<Score> to_scores(const std::vector<double>& values) {
  std::vector<Score> s;
  for (double v : values) s.push_back(Score::from_double(v));
  return s;
}

py::dict test_result(const TestResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["method"] = std::string(to_string(r.method));
  d["n_effective"] = r.n_effective;
  return d;
}

Comparison::Outcome parse_outcome(const std::string& s) {
  if (s == "first") return Comparison::Outcome::first_wins;
  if (s == "second") return Comparison::Outcome::second_wins;
  if (s == "tie") return Comparison::Outcome::tie;
  throw InvalidArgument("outcome must be 'first', 'second' or 'tie', got '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Comparative-judgment essay scoring engine";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<IngestError>(m, "IngestError", base.ptr());
  py::register_exception<ParseFailure>(m, "ParseFailure", base.ptr());
  py::register_exception<OutOfScale>(m, "OutOfScale", base.ptr());
  py::register_exception<TieResponse>(m, "TieResponse", base.ptr());
  py::register_exception<BackendUnavailable>(m, "BackendUnavailable", base.ptr());
  py::register_exception<AuthError>(m, "AuthError", base.ptr());
  py::register_exception<DisconnectedGraph>(m, "DisconnectedGraph", base.ptr());
  py::register_exception<SeparationError>(m, "SeparationError", base.ptr());
  py::register_exception<DegenerateSpread>(m, "DegenerateSpread", base.ptr());
  py::register_exception<StoreError>(m, "StoreError", base.ptr());

  m.def("predict_prob", &predict_prob, py::arg("lambda_a"), py::arg("lambda_b"));

  m.def(
      "fit_bradley_terry",
      [](const std::vector<std::tuple<std::string, std::string, std::string>>& comparisons, int max_iter,
         double tolerance, bool ignore_ties, double pseudo_count) {
        std::vector<Comparison> cs;
        for (const auto& [a, b, o] : comparisons) cs.push_back({a, b, parse_outcome(o)});
        BTOptions opt;
        opt.max_iter = max_iter;
        opt.tolerance = tolerance;
        opt.ignore_ties = ignore_ties;
        opt.pseudo_count = pseudo_count;
        py::gil_scoped_release release;
        return fit_bradley_terry(std::span<const Comparison>(cs), opt);
      },
      py::arg("comparisons"), py::arg("max_iter") = 200, py::arg("tolerance") = 1e-8, py::arg("ignore_ties") = true,
      py::arg("pseudo_count") = 0.1,
      "Fit from (first, second, outcome) triples; outcome is 'first', 'second' or 'tie'.");

  py::class_<BTEstimate>(m, "BTEstimate")
      .def_readonly("lambda_", &BTEstimate::lambda)
      .def_readonly("converged", &BTEstimate::converged)
      .def_readonly("iterations_used", &BTEstimate::iterations_used)
      .def_readonly("log_likelihood", &BTEstimate::log_likelihood)
      .def_readonly("log_likelihood_trace", &BTEstimate::log_likelihood_trace)
      .def("__repr__", [](const BTEstimate& e) {
        return "<BTEstimate n=" + std::to_string(e.lambda.size()) + " converged=" + (e.converged ? "True" : "False") +
               " iterations=" + std::to_string(e.iterations_used) + ">";
      });

  m.def("normalize_minmax", &normalize_minmax, py::arg("lambda_"));
  m.def("normalize_rank", &normalize_rank, py::arg("lambda_"));
  m.def(
      "transform_to_scale",
      [](double p, const std::vector<double>& scale) { return transform_to_scale(p, to_scale(scale)).value(); },
      py::arg("p"), py::arg("scale"));
  m.def(
      "nearest_scale_value",
      [](double x, const std::vector<double>& scale) { return nearest_scale_value(x, to_scale(scale)).value(); },
      py::arg("x"), py::arg("scale"));

  m.def(
      "qwk",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& scale) {
        return qwk(to_scores(a), to_scores(b), to_scale(scale));
      },
      py::arg("a"), py::arg("b"), py::arg("scale"));
  m.def(
      "wilcoxon_signed_rank",
      [](const std::vector<double>& x, const std::vector<double>& y) { return test_result(wilcoxon_signed_rank(x, y)); },
      py::arg("x"), py::arg("y"));
  m.def(
      "mann_whitney_u",
      [](const std::vector<double>& x, const std::vector<double>& y) { return test_result(mann_whitney_u(x, y)); },
      py::arg("x"), py::arg("y"));
  m.def(
      "spearman_rho", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman_rho(x, y); },
      py::arg("x"), py::arg("y"));

  m.def(
      "round_robin_pairs",
      [](const std::vector<std::string>& ids) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& p : round_robin_pairs(ids).pairs) out.emplace_back(p.first, p.second);
        return out;
      },
      py::arg("ids"));
  m.def(
      "random_k_pairs",
      [](const std::vector<std::string>& ids, int k, std::uint64_t seed) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& p : random_k_pairs(ids, k, seed).pairs) out.emplace_back(p.first, p.second);
        return out;
      },
      py::arg("ids"), py::arg("k"), py::arg("seed"));

  m.def(
      "build_cj_prompt",
      [](const std::string& criteria_name, const std::map<double, std::string>& descriptors,
         const std::string& essay_a, const std::string& essay_b, const std::string& task) {
        RubricTrait r;
        r.trait_id = "trait";
        r.criteria_name = criteria_name;
        std::vector<double> values;
        for (const auto& [s, text] : descriptors) {
          values.push_back(s);
          r.descriptors[Score::from_double(s)] = text;
        }
        r.scale = to_scale(values);
        Essay a{"A", 0, essay_a, {}};
        Essay b{"B", 0, essay_b, {}};
        return build_cj_prompt(r, a, b, task).body;
      },
      py::arg("criteria_name"), py::arg("descriptors"), py::arg("essay_a"), py::arg("essay_b"), py::arg("task"));
  m.def(
      "parse_score_response",
      [](const std::string& text, const std::vector<double>& scale) {
        const auto r = parse_score_response(text, to_scale(scale));
        return std::make_pair(r.score.value(), r.explanation);
      },
      py::arg("text"), py::arg("scale"));
  m.def(
      "classify_cj_response",
      [](const std::string& text) {
        switch (classify_cj_response(text)) {
          case CjResponseClass::a: return "A";
          case CjResponseClass::b: return "B";
          case CjResponseClass::tie: return "tie";
          default: return "unparsable";
        }
      },
      py::arg("text"));

  m.def(
      "stratified_sample",
      [](const std::string& path, int set_id, const std::string& trait, std::size_t per_label, std::uint64_t seed,
         const std::string& mapping) {
        const auto cm = mapping.empty() ? ColumnMapping::asap(set_id) : ColumnMapping::load(mapping);
        const Dataset ds = load_dataset(path, cm, set_id);
        std::vector<std::pair<std::string, double>> out;
        for (const auto& [id, label] : make_sample(ds, {trait, per_label, seed}).rows) out.emplace_back(id, label.value());
        return out;
      },
      py::arg("path"), py::arg("set_id"), py::arg("trait"), py::arg("per_label") = 5, py::arg("seed") = 1,
      py::arg("mapping") = "", "(essay_id, label) pairs of a stratified sample.");

  m.def(
      "_run_simulation_json",
      [](int n, const std::string& lambda_spec, int rounds, std::uint64_t seed, const std::string& mode,
         const std::vector<double>& scale, double pseudo_count, int workers) {
        SimulationSpec spec;
        spec.n = n;
        spec.lambda_spec = lambda_spec;
        spec.rounds = rounds;
        spec.seed = seed;
        spec.mode = parse_simulation_mode(mode);
        spec.scale = to_scale(scale);
        spec.bt.pseudo_count = pseudo_count;
        spec.workers = workers;
        py::gil_scoped_release release;
        return to_json(run_simulation(spec)).dump();
      },
      py::arg("n"), py::arg("lambda_spec"), py::arg("rounds"), py::arg("seed"), py::arg("mode"), py::arg("scale"),
      py::arg("pseudo_count"), py::arg("workers"));

  m.def(
      "store_summary",
      [](const std::string& path) {
        const auto store = JudgmentStore::load(path);
        py::dict d;
        d["judgments"] = store.judgments().size();
        d["rubric_scores"] = store.rubric_scores().size();
        d["digest"] = store.content_digest();
        d["warnings"] = store.warnings();
        return d;
      },
      py::arg("path"));
}
