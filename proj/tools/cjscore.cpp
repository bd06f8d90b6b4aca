#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cjscore/error.hpp"
#include "cjscore/pipeline.hpp"

using namespace cjscore;

namespace {

struct DataArgs {
  std::string dataset;
  std::string mapping;
  int set_id = 7;

  void add(CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "TSV export or dataset JSON dump")->required();
    cmd->add_option("--mapping", mapping, "column mapping file (default: ASAP column names)");
    cmd->add_option("--set", set_id, "essay set id")->capture_default_str();
  }

  Dataset load() const {
    std::optional<ColumnMapping> m;
    if (!mapping.empty()) {
      m = ColumnMapping::load(mapping);
    } else if (!dataset.ends_with(".json")) {
      m = ColumnMapping::asap(set_id);
    }
    return load_dataset(dataset, m, set_id);
  }
};

// Flags left unset fall through to env, then the config file, then defaults.
struct BackendArgs {
  std::optional<std::string> endpoint, model, rpm, workers, max_attempts, max_tokens, timeout, parse_retries;

  void add(CLI::App* cmd) {
    cmd->add_option("--endpoint", endpoint, "chat-completions URL [env CJSCORE_ENDPOINT]");
    cmd->add_option("--model", model, "model name [env CJSCORE_MODEL]");
    cmd->add_option("--rpm", rpm, "requests-per-minute ceiling, 0 = none [env CJSCORE_RPM]");
    cmd->add_option("--workers", workers, "parallel calls [env CJSCORE_WORKERS]");
    cmd->add_option("--max-attempts", max_attempts, "transport tries per call");
    cmd->add_option("--max-tokens", max_tokens, "output token cap");
    cmd->add_option("--timeout", timeout, "seconds per request");
    cmd->add_option("--parse-retries", parse_retries, "re-asks after an unparsable answer");
  }

  struct Resolved {
    LlmBackendConfig llm;
    int workers = 1;
    int parse_retries = 2;
  };

  Resolved resolve(Settings& s) const {
    Resolved r;
    r.llm.endpoint = s.resolve("endpoint", endpoint, "CJSCORE_ENDPOINT", "");
    r.llm.model = s.resolve("model", model, "CJSCORE_MODEL", "");
    r.llm.auth_token = s.resolve("api_token", std::nullopt, "CJSCORE_API_TOKEN", "", true, true);
    r.llm.requests_per_minute = std::stod(s.resolve("rpm", rpm, "CJSCORE_RPM", "0", false));
    r.workers = std::stoi(s.resolve("workers", workers, "CJSCORE_WORKERS", "1", false));
    r.llm.retry.max_attempts = std::stoi(s.resolve("max_attempts", max_attempts, nullptr, "5", false));
    r.llm.decode.max_tokens = std::stoi(s.resolve("max_tokens", max_tokens, nullptr, "512"));
    r.llm.timeout = std::chrono::seconds(std::stoi(s.resolve("timeout", timeout, nullptr, "120", false)));
    r.parse_retries = std::stoi(s.resolve("parse_retries", parse_retries, nullptr, "2"));
    if (r.llm.endpoint.empty()) throw InvalidArgument("no endpoint configured (--endpoint, CJSCORE_ENDPOINT or config)");
    if (r.llm.model.empty()) throw InvalidArgument("no model configured (--model, CJSCORE_MODEL or config)");
    if (r.workers < 1) throw InvalidArgument("workers must be at least 1");
    return r;
  }
};

Settings settings_from(const std::string& config_path) {
  return Settings(config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path));
}

void print_config(const Settings& s) {
  for (const auto& [k, v] : s.echo()) std::cerr << "  " << k << " = " << v << "\n";
}

void print_stats(const char* what, const DispatchStats& st) {
  std::cerr << what << ": " << st.tasks << " tasks, " << st.backend_calls << " backend calls, " << st.cache_hits
            << " from store, " << st.failures << " unparsable, " << st.ties << " ties, " << st.unavailable
            << " unavailable\n";
}

std::string task_text(const RubricBook& book, const Dataset& dataset) {
  return book.task.empty() ? dataset.prompt_text : book.task;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

int exit_for(const DispatchStats& st) { return st.unavailable > 0 ? 3 : 0; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Essay scoring by LLM comparative judgment and rubric prompting"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value settings file");
  int exit_code = 0;

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "stratified sample of essay ids for one trait");
  DataArgs sample_data;
  sample_data.add(sample_cmd);
  SampleSpec sample_spec;
  std::string sample_out;
  sample_cmd->add_option("--trait", sample_spec.trait_id)->required();
  sample_cmd->add_option("--per-label", sample_spec.per_label_count)->capture_default_str();
  sample_cmd->add_option("--seed", sample_spec.seed)->capture_default_str();
  sample_cmd->add_option("--out", sample_out, "CSV path (default stdout)");
  sample_cmd->callback([&] {
    const Dataset ds = sample_data.load();
    const SampleFile s = make_sample(ds, sample_spec);
    write_output(sample_out, sample_to_csv(s));
    std::cerr << "sampled " << s.rows.size() << " essays for " << s.trait_id << " (seed " << s.seed << ")\n";
  });

  // judge
  auto* judge_cmd = app.add_subcommand("judge", "pairwise comparative judgments into a store");
  DataArgs judge_data;
  judge_data.add(judge_cmd);
  BackendArgs judge_backend;
  judge_backend.add(judge_cmd);
  std::string judge_sample, judge_rubric, judge_store, judge_strategy = "round-robin";
  std::optional<std::uint64_t> judge_seed;
  int judge_k = 0, judge_rounds = 1;
  bool judge_both = false, judge_no_desc = false;
  judge_cmd->add_option("--sample", judge_sample)->required();
  judge_cmd->add_option("--rubric", judge_rubric)->required();
  judge_cmd->add_option("--store", judge_store)->required();
  judge_cmd->add_option("--strategy", judge_strategy, "round-robin | random-k")->capture_default_str();
  judge_cmd->add_option("--k", judge_k, "comparisons per essay for random-k");
  judge_cmd->add_option("--seed", judge_seed, "position/pairing seed (default: sample seed)");
  judge_cmd->add_option("--rounds", judge_rounds, "repeat judgments per pair")->capture_default_str();
  judge_cmd->add_flag("--both-orders", judge_both, "judge every pair in both positions");
  judge_cmd->add_flag("--no-descriptors", judge_no_desc, "criteria block carries only the criteria name");
  judge_cmd->callback([&] {
    Settings settings = settings_from(config_path);
    const auto be = judge_backend.resolve(settings);
    const Dataset ds = judge_data.load();
    const SampleFile sample = load_sample(judge_sample);
    const RubricBook book = load_rubric_book(judge_rubric);
    const RubricTrait& rubric = book.trait(sample.trait_id);
    const auto essays = sample_essays(ds, sample);
    const auto ids = essay_ids(essays);
    const std::uint64_t seed = judge_seed.value_or(sample.seed);
    const auto schedule = make_schedule(ids, parse_pair_strategy(judge_strategy), judge_k, seed, rubric.trait_id);
    auto store = JudgmentStore::open(judge_store);
    auto backend = llm_backend(be.llm);
    DispatchOptions opt;
    opt.workers = be.workers;
    opt.rounds = judge_rounds;
    opt.both_orders = judge_both;
    opt.seed = seed;
    opt.judge.parse_retries = be.parse_retries;
    opt.judge.task = task_text(book, ds);
    opt.judge.cj.include_descriptors = !judge_no_desc;
    opt.progress = [](int done, int total) {
      if (done == total || done % 50 == 0) std::cerr << "  " << done << "/" << total << "\n";
    };
    std::cerr << "judging " << schedule.pairs.size() << " pairs of " << ids.size() << " essays with "
              << backend->backend_id() << "\n";
    print_config(settings);
    const auto run = judge_schedule(*backend, rubric, essays, schedule, &store, opt);
    print_stats("judge", run.stats);
    for (const auto& w : store.warnings()) std::cerr << "warning: " << w << "\n";
    exit_code = exit_for(run.stats);
  });

  // estimate
  auto* est_cmd = app.add_subcommand("estimate", "fit Bradley-Terry qualities per trait");
  std::string est_store, est_sample, est_out;
  BTOptions bt;
  bool keep_ties = false;
  est_cmd->add_option("--store", est_store)->required();
  est_cmd->add_option("--sample", est_sample, "restrict to this sample and record its seed");
  est_cmd->add_option("--out", est_out, "JSON path (default stdout)");
  est_cmd->add_option("--pseudo-count", bt.pseudo_count)->capture_default_str();
  est_cmd->add_option("--max-iter", bt.max_iter)->capture_default_str();
  est_cmd->add_option("--tolerance", bt.tolerance)->capture_default_str();
  est_cmd->add_flag("--keep-ties", keep_ties, "count ties as half a win each way");
  est_cmd->callback([&] {
    bt.ignore_ties = !keep_ties;
    const auto store = JudgmentStore::load(est_store);
    std::optional<SampleFile> sample;
    if (!est_sample.empty()) sample = load_sample(est_sample);
    const EstimateSet set = estimate_store(store, bt, sample);
    for (const auto& g : set.groups) {
      std::cerr << g.trait_id << " / " << g.backend_id << " / " << to_string(g.rubric_type) << ": " << g.judgments
                << " judgments, " << g.failures << " failures, "
                << (g.estimate.converged ? "converged" : "NOT converged") << " after "
                << g.estimate.iterations_used << " sweeps\n";
    }
    write_output(est_out, to_json(set).dump(2) + "\n");
  });

  // score
  auto* score_cmd = app.add_subcommand("score", "map fitted qualities onto score scales");
  DataArgs score_data;
  score_data.add(score_cmd);
  std::string score_est, score_scale = "both", score_norm = "minmax", score_out;
  score_cmd->add_option("--estimates", score_est)->required();
  score_cmd->add_option("--scale", score_scale, "coarse | fine | both")->capture_default_str();
  score_cmd->add_option("--normalization", score_norm, "minmax | rank")->capture_default_str();
  score_cmd->add_option("--out", score_out, "CSV path (default stdout)");
  score_cmd->callback([&] {
    const Dataset ds = score_data.load();
    const auto set = estimate_set_from_json(nlohmann::json::parse(read_file(score_est)));
    std::vector<ScaleKind> kinds;
    if (score_scale == "both") {
      kinds = {ScaleKind::coarse, ScaleKind::fine};
    } else {
      kinds = {parse_scale_kind(score_scale)};
    }
    const auto rows = score_estimates(set, ds, kinds, parse_normalization(score_norm));
    write_output(score_out, scores_to_csv(rows));
  });

  // score-rubric
  auto* rubric_cmd = app.add_subcommand("score-rubric", "direct rubric scoring of a sample");
  DataArgs rubric_data;
  rubric_data.add(rubric_cmd);
  BackendArgs rubric_backend;
  rubric_backend.add(rubric_cmd);
  std::string rs_sample, rs_rubric, rs_store, rs_out, rs_type;
  rubric_cmd->add_option("--sample", rs_sample)->required();
  rubric_cmd->add_option("--rubric", rs_rubric)->required();
  rubric_cmd->add_option("--store", rs_store)->required();
  rubric_cmd->add_option("--rubric-type", rs_type, "expected rubric type B | EGD | ESE");
  rubric_cmd->add_option("--out", rs_out, "CSV path (default stdout)");
  rubric_cmd->callback([&] {
    Settings settings = settings_from(config_path);
    const auto be = rubric_backend.resolve(settings);
    const Dataset ds = rubric_data.load();
    const SampleFile sample = load_sample(rs_sample);
    const RubricBook book = load_rubric_book(rs_rubric);
    const RubricTrait& rubric = book.trait(sample.trait_id);
    if (!rs_type.empty() && parse_rubric_type(rs_type) != rubric.rubric_type) {
      throw InvalidArgument("rubric file holds a " + std::string(to_string(rubric.rubric_type)) +
                            " rubric for " + rubric.trait_id + ", not " + rs_type);
    }
    const auto essays = sample_essays(ds, sample);
    auto store = JudgmentStore::open(rs_store);
    auto backend = llm_backend(be.llm);
    DispatchOptions opt;
    opt.workers = be.workers;
    opt.judge.parse_retries = be.parse_retries;
    opt.judge.task = task_text(book, ds);
    print_config(settings);
    const auto run = score_essays(*backend, rubric, essays, &store, opt);
    print_stats("score-rubric", run.stats);
    write_output(rs_out, scores_to_csv(rubric_score_rows(run.records, sample.seed, store.content_digest())));
    exit_code = exit_for(run.stats);
  });

  // elaborate
  auto* elab_cmd = app.add_subcommand("elaborate", "generate an elaborated rubric from example essays");
  DataArgs elab_data;
  elab_data.add(elab_cmd);
  BackendArgs elab_backend;
  elab_backend.add(elab_cmd);
  std::string el_rubric, el_trait, el_kind, el_exclude, el_out;
  std::size_t el_per_level = kMaxExamplesPerLevel;
  std::uint64_t el_seed = 1;
  elab_cmd->add_option("--rubric", el_rubric)->required();
  elab_cmd->add_option("--trait", el_trait)->required();
  elab_cmd->add_option("--kind", el_kind, "EGD | ESE")->required();
  elab_cmd->add_option("--exclude-sample", el_exclude, "sample CSV whose essays may not serve as examples");
  elab_cmd->add_option("--per-level", el_per_level, "examples per score level (at most 3)")->capture_default_str();
  elab_cmd->add_option("--seed", el_seed)->capture_default_str();
  elab_cmd->add_option("--out", el_out)->required();
  elab_cmd->callback([&] {
    Settings settings = settings_from(config_path);
    const auto be = elab_backend.resolve(settings);
    if (el_per_level < 1 || el_per_level > kMaxExamplesPerLevel) {
      throw InvalidArgument("--per-level must be between 1 and 3");
    }
    const Dataset ds = elab_data.load();
    RubricBook book = load_rubric_book(el_rubric);
    RubricTrait& rubric = book.trait(el_trait);
    std::vector<std::string> exclude;
    if (!el_exclude.empty()) exclude = load_sample(el_exclude).ids();
    const auto examples = elaboration_examples(ds, el_trait, exclude, el_per_level, el_seed);
    const ElaborationKind kind = parse_elaboration_kind(el_kind);
    const PromptText prompt = build_elaboration_prompt(kind, rubric, examples, task_text(book, ds));
    auto backend = llm_backend(be.llm);
    const Completion c = backend->complete(prompt);
    rubric.elaborated = c.text;
    rubric.rubric_type = kind == ElaborationKind::egd ? RubricType::egd : RubricType::ese;
    std::size_t n_examples = 0;
    for (const auto& [s, v] : examples) n_examples += v.size();
    book.provenance[el_trait] = {{"backend_id", backend->backend_id()},
                                 {"prompt_hash", prompt.hash_hex()},
                                 {"examples", n_examples},
                                 {"seed", el_seed},
                                 {"generated_at", utc_timestamp()}};
    save_rubric_book(el_out, book);
    std::cerr << "elaborated " << el_trait << " (" << to_string(rubric.rubric_type) << ") from " << n_examples
              << " examples\n";
  });

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "QWK report with condition tests");
  DataArgs eval_data;
  eval_data.add(eval_cmd);
  std::vector<std::string> eval_scores;
  std::string eval_md, eval_csv, eval_summary;
  bool no_human = false;
  eval_cmd->add_option("--scores", eval_scores, "scores CSV files")->required();
  eval_cmd->add_option("--out", eval_md, "Markdown report (default stdout)");
  eval_cmd->add_option("--csv", eval_csv, "per-seed QWK CSV");
  eval_cmd->add_option("--summary-csv", eval_summary, "per-condition summary CSV");
  eval_cmd->add_flag("--no-human", no_human, "omit the rater-vs-rater row");
  eval_cmd->callback([&] {
    const Dataset ds = eval_data.load();
    std::vector<ScoreRow> rows;
    std::vector<std::pair<std::string, std::string>> header;
    header.emplace_back("dataset", eval_data.dataset + " (" + file_digest(eval_data.dataset) + ")");
    header.emplace_back("essay set", std::to_string(ds.set_id));
    std::set<std::string> store_digests;
    for (const auto& path : eval_scores) {
      auto part = scores_from_csv(read_file(path), path);
      header.emplace_back("scores", path + " (" + file_digest(path) + ")");
      for (auto& r : part) {
        if (!r.store_digest.empty()) store_digests.insert(r.store_digest);
        rows.push_back(std::move(r));
      }
    }
    for (const auto& d : store_digests) header.emplace_back("store digest", d);
    EvaluationReport report = evaluate_scores(ds, rows, !no_human);
    report.header = header;
    write_output(eval_md, report_markdown(report));
    if (!eval_csv.empty()) write_file(eval_csv, report_cells_csv(report));
    if (!eval_summary.empty()) write_file(eval_summary, report_summary_csv(report));
  });

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "recover planted qualities from a simulated judge");
  SimulationSpec sim;
  std::string sim_scale = "0,1,2,3", sim_mode = "sample", sim_json, sim_md;
  sim_cmd->add_option("--n", sim.n)->capture_default_str();
  sim_cmd->add_option("--lambda", sim.lambda_spec, "linspace:LO:HI or a comma list")->capture_default_str();
  sim_cmd->add_option("--rounds", sim.rounds)->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
  sim_cmd->add_option("--mode", sim_mode, "sample | argmax")->capture_default_str();
  sim_cmd->add_option("--scale", sim_scale)->capture_default_str();
  sim_cmd->add_option("--pseudo-count", sim.bt.pseudo_count)->capture_default_str();
  sim_cmd->add_option("--workers", sim.workers)->capture_default_str();
  sim_cmd->add_option("--json", sim_json, "JSON report path");
  sim_cmd->add_option("--out", sim_md, "Markdown report (default stdout)");
  sim_cmd->callback([&] {
    sim.mode = parse_simulation_mode(sim_mode);
    sim.scale = ScoreScale::parse(sim_scale, ScaleKind::coarse);
    if (!sim.lambda_spec.starts_with("linspace:")) sim.n = 0;
    const auto report = run_simulation(sim);
    if (!sim_json.empty()) write_file(sim_json, to_json(report).dump(2) + "\n");
    write_output(sim_md, simulation_markdown(report));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const AuthError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
