#include "cjscore/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "cjscore/error.hpp"
#include "cjscore/rng.hpp"

namespace cjscore {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_double(double v) { return fmt("%.10g", v); }

std::uint64_t parse_u64(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(std::string(what) + ": not an unsigned integer: '" + text + "'");
  }
}

bool id_less(const std::string& a, const std::string& b) { return essay_id_less(a, b); }

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                std::initializer_list<const char*> required,
                                                std::string_view source) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
  for (const char* name : required) {
    if (!idx.contains(name)) throw InvalidArgument(std::string(source) + ": missing column '" + name + "'");
  }
  return idx;
}

}  // namespace

// ---- settings ---------------------------------------------------------------

std::string Settings::resolve(const std::string& key, const std::optional<std::string>& cli, const char* env,
                              std::string fallback, bool echo, bool secret) {
  Entry e{key, std::move(fallback), "default", echo, secret};
  if (cli) {
    e.value = *cli;
    e.source = "cli";
  } else if (const char* v = env ? std::getenv(env) : nullptr; v && *v) {
    e.value = v;
    e.source = std::string("env ") + env;
  } else if (auto f = file_.get(key)) {
    e.value = *f;
    e.source = "config";
  }
  entries_.push_back(e);
  return e.value;
}

std::vector<std::pair<std::string, std::string>> Settings::echo() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries_) {
    if (!e.echo) continue;
    const std::string shown = e.secret ? (e.value.empty() ? "<unset>" : "<set>") : e.value;
    out.emplace_back(e.key, shown + " (" + e.source + ")");
  }
  return out;
}

// ---- CSV ------------------------------------------------------------------

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  auto end_row = [&] {
    if (any || !field.empty() || !row.empty()) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      end_row();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw InvalidArgument("CSV ends inside a quoted field");
  end_row();
  return rows;
}

// ---- rubric files -----------------------------------------------------------

const RubricTrait& RubricBook::trait(std::string_view trait_id) const {
  for (const auto& t : traits) {
    if (t.trait_id == trait_id) return t;
  }
  throw InvalidArgument("rubric has no trait '" + std::string(trait_id) + "'");
}

RubricTrait& RubricBook::trait(std::string_view trait_id) {
  return const_cast<RubricTrait&>(std::as_const(*this).trait(trait_id));
}

nlohmann::json to_json(const RubricBook& book) {
  nlohmann::json traits = nlohmann::json::array();
  for (const auto& t : book.traits) {
    nlohmann::json scale = nlohmann::json::array();
    for (Score s : t.scale.values()) {
      if (s.is_integer()) {
        scale.push_back(s.centi() / 100);
      } else {
        scale.push_back(s.value());
      }
    }
    nlohmann::json descriptors = nlohmann::json::object();
    for (const auto& [s, text] : t.descriptors) descriptors[s.str()] = text;
    nlohmann::json jt = {{"trait_id", t.trait_id},
                         {"criteria_name", t.criteria_name},
                         {"rubric_type", std::string(to_string(t.rubric_type))},
                         {"scale", std::move(scale)},
                         {"descriptors", std::move(descriptors)}};
    if (t.elaborated) jt["elaborated"] = *t.elaborated;
    if (auto it = book.provenance.find(t.trait_id); it != book.provenance.end()) jt["provenance"] = it->second;
    traits.push_back(std::move(jt));
  }
  return {{"schema", 1}, {"set_id", book.set_id}, {"task", book.task}, {"traits", std::move(traits)}};
}

RubricBook rubric_book_from_json(const nlohmann::json& j) {
  try {
    RubricBook book;
    book.set_id = j.value("set_id", 0);
    book.task = j.value("task", std::string());
    for (const auto& jt : j.at("traits")) {
      RubricTrait t;
      t.trait_id = jt.at("trait_id").get<std::string>();
      t.criteria_name = jt.at("criteria_name").get<std::string>();
      t.rubric_type = parse_rubric_type(jt.value("rubric_type", std::string("B")));
      std::vector<Score> values;
      for (const auto& v : jt.at("scale")) values.push_back(Score::from_double(v.get<double>()));
      t.scale = ScoreScale(std::move(values), ScaleKind::coarse);
      for (const auto& [k, v] : jt.at("descriptors").items()) t.descriptors[Score::parse(k)] = v.get<std::string>();
      if (jt.contains("elaborated")) t.elaborated = jt.at("elaborated").get<std::string>();
      if (jt.contains("provenance")) book.provenance[t.trait_id] = jt.at("provenance");
      t.validate();
      book.traits.push_back(std::move(t));
    }
    if (book.traits.empty()) throw InvalidArgument("rubric file defines no traits");
    return book;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed rubric file: ") + e.what());
  }
}

RubricBook load_rubric_book(const std::filesystem::path& path) {
  try {
    return rubric_book_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void save_rubric_book(const std::filesystem::path& path, const RubricBook& book) {
  write_file(path, to_json(book).dump(2) + "\n");
}

// ---- samples ----------------------------------------------------------------

std::vector<std::string> SampleFile::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, label] : rows) out.push_back(id);
  return out;
}

SampleFile make_sample(const Dataset& dataset, const SampleSpec& spec) {
  SampleFile out;
  out.trait_id = spec.trait_id;
  out.seed = spec.seed;
  for (const auto& e : stratified_sample(dataset, spec)) {
    out.rows.emplace_back(e.essay_id, trait_label(e, spec.trait_id)->label);
  }
  return out;
}

std::string sample_to_csv(const SampleFile& sample) {
  std::string out = "essay_id,trait,label,seed\n";
  for (const auto& [id, label] : sample.rows) {
    out += csv_field(id) + "," + csv_field(sample.trait_id) + "," + label.str() + "," +
           std::to_string(sample.seed) + "\n";
  }
  return out;
}

SampleFile sample_from_csv(std::string_view text, std::string_view source) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw InvalidArgument(std::string(source) + ": empty sample file");
  const auto idx = header_index(rows[0], {"essay_id", "trait", "label", "seed"}, source);
  SampleFile out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = std::string(source) + ":" + std::to_string(r + 1);
    if (row.size() < rows[0].size()) throw InvalidArgument(where + ": short row");
    const std::string& trait = row[idx.at("trait")];
    const std::uint64_t seed = parse_u64(row[idx.at("seed")], where);
    if (r == 1) {
      out.trait_id = trait;
      out.seed = seed;
    } else if (trait != out.trait_id || seed != out.seed) {
      throw InvalidArgument(where + ": sample mixes traits or seeds");
    }
    out.rows.emplace_back(row[idx.at("essay_id")], Score::parse(row[idx.at("label")]));
  }
  if (out.rows.empty()) throw InvalidArgument(std::string(source) + ": sample has no essays");
  return out;
}

SampleFile load_sample(const std::filesystem::path& path) { return sample_from_csv(read_file(path), path.string()); }

std::vector<Essay> sample_essays(const Dataset& dataset, const SampleFile& sample) {
  std::vector<Essay> out;
  for (const auto& [id, label] : sample.rows) {
    const Essay* e = dataset.find(id);
    if (!e) throw InvalidArgument("sampled essay '" + id + "' is not in the dataset");
    out.push_back(*e);
  }
  return out;
}

// ---- estimation -------------------------------------------------------------

EstimateSet estimate_store(const JudgmentStore& store, const BTOptions& options,
                           const std::optional<SampleFile>& sample) {
  std::set<std::string> members;
  if (sample) {
    for (const auto& id : sample->ids()) members.insert(id);
  }
  using GroupKey = std::tuple<std::string, std::string, RubricType>;
  std::map<GroupKey, std::vector<JudgmentRecord>> groups;
  for (auto& r : store.judgments()) {
    if (sample && (r.trait_id != sample->trait_id || !members.contains(r.essay_a) || !members.contains(r.essay_b))) {
      continue;
    }
    groups[{r.trait_id, r.backend_id, r.rubric_type}].push_back(std::move(r));
  }
  if (groups.empty()) throw InvalidArgument("store holds no matching judgments");

  EstimateSet out;
  out.store_digest = store.content_digest();
  if (sample) out.seed = sample->seed;
  out.options = options;
  for (const auto& [key, records] : groups) {
    EstimateGroup g;
    std::tie(g.trait_id, g.backend_id, g.rubric_type) = key;
    g.judgments = static_cast<int>(records.size());
    for (const auto& r : records) {
      g.failures += r.verdict == JudgmentVerdict::failure;
      g.ties += r.verdict == JudgmentVerdict::tie;
    }
    g.estimate = fit_bradley_terry(std::span<const JudgmentRecord>(records), options);
    out.groups.push_back(std::move(g));
  }
  return out;
}

nlohmann::json to_json(const EstimateSet& set) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : set.groups) {
    groups.push_back({{"trait", g.trait_id},
                      {"backend_id", g.backend_id},
                      {"model", model_of(g.backend_id)},
                      {"rubric_type", std::string(to_string(g.rubric_type))},
                      {"judgments", g.judgments},
                      {"failures", g.failures},
                      {"ties", g.ties},
                      {"estimate", to_json(g.estimate)}});
  }
  nlohmann::json j = {{"schema", 1},
                      {"store_digest", set.store_digest},
                      {"options",
                       {{"max_iter", set.options.max_iter},
                        {"tolerance", set.options.tolerance},
                        {"ignore_ties", set.options.ignore_ties},
                        {"pseudo_count", set.options.pseudo_count}}},
                      {"groups", std::move(groups)}};
  j["seed"] = set.seed ? nlohmann::json(*set.seed) : nlohmann::json(nullptr);
  return j;
}

EstimateSet estimate_set_from_json(const nlohmann::json& j) {
  try {
    EstimateSet out;
    out.store_digest = j.at("store_digest").get<std::string>();
    if (!j.at("seed").is_null()) out.seed = j.at("seed").get<std::uint64_t>();
    const auto& o = j.at("options");
    out.options.max_iter = o.at("max_iter").get<int>();
    out.options.tolerance = o.at("tolerance").get<double>();
    out.options.ignore_ties = o.at("ignore_ties").get<bool>();
    out.options.pseudo_count = o.at("pseudo_count").get<double>();
    for (const auto& jg : j.at("groups")) {
      EstimateGroup g;
      g.trait_id = jg.at("trait").get<std::string>();
      g.backend_id = jg.at("backend_id").get<std::string>();
      g.rubric_type = parse_rubric_type(jg.at("rubric_type").get<std::string>());
      g.judgments = jg.at("judgments").get<int>();
      g.failures = jg.at("failures").get<int>();
      g.ties = jg.at("ties").get<int>();
      g.estimate = estimate_from_json(jg.at("estimate"));
      out.groups.push_back(std::move(g));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed estimates file: ") + e.what());
  }
}

// ---- score tables -------------------------------------------------------------

std::vector<ScoreRow> score_estimates(const EstimateSet& set, const Dataset& dataset,
                                      std::span<const ScaleKind> kinds, Normalization normalization) {
  std::vector<ScoreRow> out;
  for (const auto& g : set.groups) {
    std::optional<std::map<std::string, double>> p;
    try {
      p = normalize(g.estimate.lambda, normalization);
    } catch (const DegenerateSpread&) {
    }
    std::vector<std::string> ids;
    for (const auto& [id, l] : g.estimate.lambda) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), id_less);
    for (ScaleKind kind : kinds) {
      const ScoreScale scale =
          kind == ScaleKind::coarse ? dataset.scale : build_fine_scale(dataset.essays, g.trait_id);
      for (const auto& id : ids) {
        ScoreRow row;
        row.essay_id = id;
        row.trait_id = g.trait_id;
        row.strategy = kind == ScaleKind::coarse ? "CJ" : "CJ_F";
        row.rubric_type = g.rubric_type;
        row.model = model_of(g.backend_id);
        row.scale = kind;
        row.seed = set.seed.value_or(0);
        row.store_digest = set.store_digest;
        if (p) {
          row.p = p->at(id);
          row.score = transform_to_scale(*row.p, scale);
        } else {
          row.score = midpoint_score(scale);
        }
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

std::vector<ScoreRow> rubric_score_rows(std::span<const RubricScoreRecord> records, std::uint64_t seed,
                                        std::string_view store_digest) {
  std::vector<ScoreRow> out;
  for (const auto& r : records) {
    ScoreRow row;
    row.essay_id = r.essay_id;
    row.trait_id = r.trait_id;
    row.strategy = "R";
    row.rubric_type = r.rubric_type;
    row.model = model_of(r.backend_id);
    row.scale = ScaleKind::coarse;
    row.seed = seed;
    row.score = r.score;
    row.store_digest = std::string(store_digest);
    out.push_back(std::move(row));
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tie(a.trait_id, a.model) < std::tie(b.trait_id, b.model) ||
           (std::tie(a.trait_id, a.model) == std::tie(b.trait_id, b.model) && id_less(a.essay_id, b.essay_id));
  });
  return out;
}

std::string scores_to_csv(std::span<const ScoreRow> rows) {
  std::string out = "essay_id,trait,strategy,rubric_type,model,scale,seed,score,p,store_digest\n";
  for (const auto& r : rows) {
    out += csv_field(r.essay_id) + "," + csv_field(r.trait_id) + "," + r.strategy + "," +
           std::string(to_string(r.rubric_type)) + "," + csv_field(r.model) + "," +
           std::string(to_string(r.scale)) + "," + std::to_string(r.seed) + "," +
           (r.score ? r.score->str() : "") + "," + (r.p ? fmt_double(*r.p) : "") + "," + r.store_digest + "\n";
  }
  return out;
}

std::vector<ScoreRow> scores_from_csv(std::string_view text, std::string_view source) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw InvalidArgument(std::string(source) + ": empty scores file");
  const auto idx = header_index(
      rows[0], {"essay_id", "trait", "strategy", "rubric_type", "model", "scale", "seed", "score"}, source);
  std::vector<ScoreRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = std::string(source) + ":" + std::to_string(r + 1);
    if (row.size() < rows[0].size()) throw InvalidArgument(where + ": short row");
    ScoreRow s;
    s.essay_id = row[idx.at("essay_id")];
    s.trait_id = row[idx.at("trait")];
    s.strategy = row[idx.at("strategy")];
    s.rubric_type = parse_rubric_type(row[idx.at("rubric_type")]);
    s.model = row[idx.at("model")];
    s.scale = parse_scale_kind(row[idx.at("scale")]);
    s.seed = parse_u64(row[idx.at("seed")], where);
    if (const auto& v = row[idx.at("score")]; !v.empty()) s.score = Score::parse(v);
    if (idx.contains("p") && !row[idx.at("p")].empty()) s.p = std::stod(row[idx.at("p")]);
    if (idx.contains("store_digest")) s.store_digest = row[idx.at("store_digest")];
    out.push_back(std::move(s));
  }
  return out;
}

// ---- elaboration ----------------------------------------------------------------

std::map<Score, std::vector<std::string>> elaboration_examples(const Dataset& dataset, std::string_view trait_id,
                                                               std::span<const std::string> exclude,
                                                               std::size_t per_level, std::uint64_t seed) {
  const std::set<std::string> skip(exclude.begin(), exclude.end());
  std::map<Score, std::vector<const Essay*>> pool;
  for (const auto& e : dataset.essays) {
    if (skip.contains(e.essay_id)) continue;
    const RaterPair* rp = e.scores_for(trait_id);
    if (rp && rp->agree()) pool[rp->rater1].push_back(&e);
  }
  std::map<Score, std::vector<std::string>> out;
  for (auto& [score, members] : pool) {
    std::sort(members.begin(), members.end(),
              [](const Essay* a, const Essay* b) { return essay_id_less(a->essay_id, b->essay_id); });
    CounterRng rng(derive_key(seed, {"elaborate", trait_id, score.str()}));
    auto picks = sample_indices(members.size(), per_level, rng);
    std::sort(picks.begin(), picks.end());
    for (std::size_t i : picks) out[score].push_back(members[i]->text);
  }
  return out;
}

// ---- evaluation ---------------------------------------------------------------

std::string ConditionKey::label() const { return strategy + "/" + rubric_type + "/" + model; }

namespace {

struct Unit {
  std::string trait;
  std::uint64_t seed;
  int rater;
  auto operator<=>(const Unit&) const = default;
};

Summary summarize(const std::vector<const EvalCell*>& cells) {
  Summary s;
  std::vector<double> pooled;
  std::vector<double> means;
  for (const auto* c : cells) {
    pooled.push_back(c->qwk_rater1);
    pooled.push_back(c->qwk_rater2);
    means.push_back(c->qwk_mean);
  }
  s.mean = mean(means);
  s.sd_pooled = stddev(pooled);
  s.sd_unpooled = stddev(means);
  s.count = static_cast<int>(cells.size());
  return s;
}

}  // namespace

EvaluationReport evaluate_scores(const Dataset& dataset, std::span<const ScoreRow> rows, bool include_human) {
  if (rows.empty()) throw InvalidArgument("no score rows to evaluate");
  EvaluationReport report;

  using CellKey = std::tuple<ConditionKey, std::string, std::uint64_t, ScaleKind>;
  std::map<CellKey, std::vector<const ScoreRow*>> groups;
  std::map<std::pair<std::string, std::uint64_t>, std::set<std::string>> essays_by_trait_seed;
  for (const auto& r : rows) {
    if (!dataset.has_trait(r.trait_id)) throw InvalidArgument("scores mention unknown trait '" + r.trait_id + "'");
    ConditionKey key{r.strategy, std::string(to_string(r.rubric_type)), r.model};
    groups[{key, r.trait_id, r.seed, r.scale}].push_back(&r);
    essays_by_trait_seed[{r.trait_id, r.seed}].insert(r.essay_id);
  }
  std::map<std::string, ScoreScale> fine_scales;
  auto scale_for = [&](ScaleKind kind, const std::string& trait) -> const ScoreScale& {
    if (kind == ScaleKind::coarse) return dataset.scale;
    auto it = fine_scales.find(trait);
    if (it == fine_scales.end()) it = fine_scales.emplace(trait, build_fine_scale(dataset.essays, trait)).first;
    return it->second;
  };

  for (const auto& [key, members] : groups) {
    const auto& [cond, trait, seed, kind] = key;
    const ScoreScale& scale = scale_for(kind, trait);
    std::vector<Score> pred, r1, r2, label;
    std::set<std::string> seen;
    EvalCell cell;
    cell.condition = cond;
    cell.trait_id = trait;
    cell.seed = seed;
    for (const auto* r : members) {
      if (!seen.insert(r->essay_id).second) {
        throw InvalidArgument("duplicate score for essay '" + r->essay_id + "' in condition " + cond.label());
      }
      if (!r->score) {
        ++cell.failures;
        continue;
      }
      const Essay* e = dataset.find(r->essay_id);
      if (!e) throw InvalidArgument("scored essay '" + r->essay_id + "' is not in the dataset");
      const RaterPair* rp = e->scores_for(trait);
      if (!rp) throw InvalidArgument("essay '" + r->essay_id + "' has no rater scores for " + trait);
      if (!scale.contains(*r->score)) {
        throw InvalidArgument("score " + r->score->str() + " of essay '" + r->essay_id + "' is not on scale " +
                              scale.bracketed());
      }
      pred.push_back(*r->score);
      r1.push_back(rp->rater1);
      r2.push_back(rp->rater2);
      label.push_back(nearest_scale_value(rp->mean(), scale));
    }
    cell.n = static_cast<int>(pred.size());
    const auto agreement = mean_qwk_vs_raters(pred, r1, r2, scale);
    cell.qwk_rater1 = agreement.qwk_rater1;
    cell.qwk_rater2 = agreement.qwk_rater2;
    cell.qwk_mean = agreement.mean;
    cell.qwk_label = qwk(pred, label, scale);
    report.cells.push_back(cell);
  }

  if (include_human) {
    const ConditionKey human{"R", "B", "Human"};
    for (const auto& [ts, ids] : essays_by_trait_seed) {
      std::vector<Score> r1, r2;
      for (const auto& id : ids) {
        const Essay* e = dataset.find(id);
        if (!e) throw InvalidArgument("scored essay '" + id + "' is not in the dataset");
        const RaterPair* rp = e->scores_for(ts.first);
        r1.push_back(rp->rater1);
        r2.push_back(rp->rater2);
      }
      EvalCell cell;
      cell.condition = human;
      cell.trait_id = ts.first;
      cell.seed = ts.second;
      cell.n = static_cast<int>(r1.size());
      cell.qwk_rater1 = cell.qwk_rater2 = cell.qwk_mean = cell.qwk_label = qwk(r1, r2, dataset.scale);
      report.cells.push_back(cell);
    }
  }

  std::set<std::string> used_traits;
  for (const auto& c : report.cells) used_traits.insert(c.trait_id);
  for (const auto& t : dataset.traits) {
    if (used_traits.contains(t)) report.traits.push_back(t);
  }

  // Human first, then the usual R, CJ, CJ_F ordering.
  auto rank = [](const ConditionKey& k) {
    if (k.model == "Human") return 0;
    if (k.strategy == "R") return 1;
    if (k.strategy == "CJ") return 2;
    if (k.strategy == "CJ_F") return 3;
    return 4;
  };
  std::sort(report.cells.begin(), report.cells.end(), [&](const EvalCell& a, const EvalCell& b) {
    const auto ka = std::make_tuple(rank(a.condition), a.condition, a.trait_id, a.seed);
    const auto kb = std::make_tuple(rank(b.condition), b.condition, b.trait_id, b.seed);
    return ka < kb;
  });

  std::vector<ConditionKey> conditions;
  for (const auto& c : report.cells) {
    if (conditions.empty() || !(conditions.back() == c.condition)) conditions.push_back(c.condition);
  }
  std::map<ConditionKey, std::map<Unit, double>> units;
  for (const auto& cond : conditions) {
    ConditionSummary cs;
    cs.condition = cond;
    std::vector<const EvalCell*> all;
    std::vector<double> trait_means;
    for (const auto& trait : report.traits) {
      std::vector<const EvalCell*> cells;
      for (const auto& c : report.cells) {
        if (c.condition == cond && c.trait_id == trait) cells.push_back(&c);
      }
      if (cells.empty()) continue;
      cs.per_trait[trait] = summarize(cells);
      trait_means.push_back(cs.per_trait[trait].mean);
      all.insert(all.end(), cells.begin(), cells.end());
      for (const auto* c : cells) {
        units[cond][{trait, c->seed, 1}] = c->qwk_rater1;
        units[cond][{trait, c->seed, 2}] = c->qwk_rater2;
      }
    }
    cs.total = summarize(all);
    cs.total.mean = mean(trait_means);
    std::set<std::uint64_t> seeds;
    for (const auto* c : all) seeds.insert(c->seed);
    cs.total.count = static_cast<int>(seeds.size());
    report.conditions.push_back(std::move(cs));
  }

  for (std::size_t i = 0; i < conditions.size(); ++i) {
    for (std::size_t j = i + 1; j < conditions.size(); ++j) {
      const auto& a = conditions[i];
      const auto& b = conditions[j];
      if (a.model == "Human" || b.model == "Human") continue;
      ConditionTest t;
      t.a = a;
      t.b = b;
      const bool fine_pair = a.rubric_type == b.rubric_type && a.model == b.model &&
                             ((a.strategy == "CJ" && b.strategy == "CJ_F") || (a.strategy == "CJ_F" && b.strategy == "CJ"));
      try {
        if (fine_pair) {
          t.test = "mann-whitney";
          std::vector<double> x, y;
          for (const auto& [u, v] : units[a]) x.push_back(v);
          for (const auto& [u, v] : units[b]) y.push_back(v);
          t.result = mann_whitney_u(x, y);
        } else {
          t.test = "wilcoxon";
          std::vector<double> x, y;
          for (const auto& [u, v] : units[a]) {
            auto it = units[b].find(u);
            if (it == units[b].end()) continue;
            x.push_back(v);
            y.push_back(it->second);
          }
          if (x.empty()) {
            t.note = "no paired (trait, seed, rater) units";
          } else {
            t.result = wilcoxon_signed_rank(x, y);
          }
        }
      } catch (const InvalidArgument& e) {
        t.note = e.what();
      }
      report.tests.push_back(std::move(t));
    }
  }
  return report;
}

namespace {

std::string cell_text(const Summary& s) { return fmt("%.3f", s.mean) + " (±" + fmt("%.3f", s.sd_pooled) + ")"; }

}  // namespace

std::string report_markdown(const EvaluationReport& report) {
  std::ostringstream out;
  out << "# QWK report\n\n";
  if (!report.header.empty()) {
    out << "| Setting | Value |\n|---|---|\n";
    for (const auto& [k, v] : report.header) out << "| " << k << " | " << v << " |\n";
    out << "\n";
  }
  out << "QWK against each rater, averaged over the two raters; mean (±SD) over seeds and raters.\n\n";
  out << "| Strategy | Rubric Type | Model | Total |";
  for (const auto& t : report.traits) out << " " << t << " |";
  out << "\n|---|---|---|---|";
  for (std::size_t i = 0; i < report.traits.size(); ++i) out << "---|";
  out << "\n";
  for (const auto& cs : report.conditions) {
    out << "| " << cs.condition.strategy << " | " << cs.condition.rubric_type << " | " << cs.condition.model
        << " | " << cell_text(cs.total) << " |";
    for (const auto& t : report.traits) {
      auto it = cs.per_trait.find(t);
      out << " " << (it == cs.per_trait.end() ? std::string("-") : cell_text(it->second)) << " |";
    }
    out << "\n";
  }
  if (!report.tests.empty()) {
    out << "\n## Condition tests\n\n";
    out << "| Condition A | Condition B | Test | n | Statistic | p-value | Method |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& t : report.tests) {
      out << "| " << t.a.label() << " | " << t.b.label() << " | " << t.test << " | ";
      if (t.result) {
        out << t.result->n_effective << " | " << fmt("%.1f", t.result->statistic) << " | "
            << fmt("%.4g", t.result->p_value) << " | " << to_string(t.result->method) << " |\n";
      } else {
        out << "- | - | - | " << t.note << " |\n";
      }
    }
  }
  return out.str();
}

std::string report_cells_csv(const EvaluationReport& report) {
  std::string out = "strategy,rubric_type,model,trait,seed,n,failures,qwk_rater1,qwk_rater2,qwk_mean,qwk_label\n";
  for (const auto& c : report.cells) {
    out += c.condition.strategy + "," + c.condition.rubric_type + "," + csv_field(c.condition.model) + "," +
           csv_field(c.trait_id) + "," + std::to_string(c.seed) + "," + std::to_string(c.n) + "," +
           std::to_string(c.failures) + "," + fmt_double(c.qwk_rater1) + "," + fmt_double(c.qwk_rater2) + "," +
           fmt_double(c.qwk_mean) + "," + fmt_double(c.qwk_label) + "\n";
  }
  return out;
}

std::string report_summary_csv(const EvaluationReport& report) {
  std::string out = "strategy,rubric_type,model,trait,seeds,mean,sd_pooled,sd_unpooled\n";
  auto line = [&](const ConditionKey& k, const std::string& trait, const Summary& s) {
    out += k.strategy + "," + k.rubric_type + "," + csv_field(k.model) + "," + csv_field(trait) + "," +
           std::to_string(s.count) + "," + fmt_double(s.mean) + "," + fmt_double(s.sd_pooled) + "," +
           fmt_double(s.sd_unpooled) + "\n";
  };
  for (const auto& cs : report.conditions) {
    line(cs.condition, "Total", cs.total);
    for (const auto& t : report.traits) {
      if (auto it = cs.per_trait.find(t); it != cs.per_trait.end()) line(cs.condition, t, it->second);
    }
  }
  return out;
}

// ---- simulation -----------------------------------------------------------------

std::vector<double> parse_lambda_spec(std::string_view spec, int n) {
  std::vector<double> out;
  if (spec.rfind("linspace:", 0) == 0) {
    const std::string rest(spec.substr(9));
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw InvalidArgument("lambda spec must be linspace:LO:HI");
    double lo = 0, hi = 0;
    try {
      lo = std::stod(rest.substr(0, colon));
      hi = std::stod(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("lambda spec bounds are not numbers: '" + std::string(spec) + "'");
    }
    if (n < 2) throw InvalidArgument("linspace needs n >= 2");
    for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
    return out;
  }
  std::stringstream ss{std::string(spec)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("bad lambda value '" + item + "'");
    }
  }
  if (out.size() < 2) throw InvalidArgument("lambda spec needs at least two values");
  if (n > 0 && static_cast<int>(out.size()) != n) {
    throw InvalidArgument("lambda spec has " + std::to_string(out.size()) + " values but n is " + std::to_string(n));
  }
  return out;
}

SimulationReport run_simulation(const SimulationSpec& spec) {
  const auto truth = parse_lambda_spec(spec.lambda_spec, spec.n);
  const int n = static_cast<int>(truth.size());
  const int width = static_cast<int>(std::to_string(n).size());

  std::vector<Essay> essays;
  std::map<std::string, double> planted;
  for (int i = 0; i < n; ++i) {
    std::string num = std::to_string(i + 1);
    Essay e;
    e.essay_id = "sim" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    e.text = "Simulated essay " + e.essay_id + ".";
    planted[e.essay_id] = truth[static_cast<std::size_t>(i)];
    essays.push_back(std::move(e));
  }

  RubricTrait rubric;
  rubric.trait_id = "sim";
  rubric.criteria_name = "Overall quality";
  rubric.scale = spec.scale;
  for (Score s : spec.scale.values()) rubric.descriptors[s] = "Quality level " + s.str() + ".";

  auto backend = simulated_backend(planted, spec.seed, spec.mode);
  const auto ids = essay_ids(essays);
  const auto schedule = round_robin_pairs(ids, rubric.trait_id);
  DispatchOptions dispatch;
  dispatch.workers = spec.workers;
  dispatch.rounds = spec.rounds;
  dispatch.seed = spec.seed;
  const auto run = judge_schedule(*backend, rubric, essays, schedule, nullptr, dispatch);
  const auto est = fit_bradley_terry(std::span<const JudgmentRecord>(run.records), spec.bt);

  SimulationReport report;
  report.spec = spec;
  report.comparisons = static_cast<int>(run.records.size());
  report.converged = est.converged;
  report.iterations = est.iterations_used;

  const double truth_mean = mean(truth);
  const auto p_true = normalize_minmax(planted);
  std::map<std::string, double> fitted_lambda;
  for (const auto& id : ids) fitted_lambda[id] = est.lambda.count(id) ? est.lambda.at(id) : 0.0;
  std::optional<std::map<std::string, double>> p_fit;
  try {
    p_fit = normalize_minmax(fitted_lambda);
  } catch (const DegenerateSpread&) {
  }
  std::vector<double> xs, ys;
  std::vector<Score> a, b;
  for (const auto& id : ids) {
    SimulationRow row;
    row.essay_id = id;
    row.true_lambda = planted.at(id);
    row.fitted_lambda = fitted_lambda.at(id);
    row.planted = transform_to_scale(p_true.at(id), spec.scale);
    row.recovered = p_fit ? transform_to_scale(p_fit->at(id), spec.scale) : midpoint_score(spec.scale);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(row.fitted_lambda - (row.true_lambda - truth_mean)));
    xs.push_back(row.true_lambda);
    ys.push_back(row.fitted_lambda);
    a.push_back(row.planted);
    b.push_back(row.recovered);
    report.rows.push_back(row);
  }
  report.spearman = spearman_rho(xs, ys);
  report.qwk = qwk(a, b, spec.scale);
  return report;
}

nlohmann::json to_json(const SimulationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"essay_id", row.essay_id},
                    {"true_lambda", row.true_lambda},
                    {"fitted_lambda", row.fitted_lambda},
                    {"planted", row.planted.str()},
                    {"recovered", row.recovered.str()}});
  }
  return {{"n", r.rows.size()},
          {"lambda_spec", r.spec.lambda_spec},
          {"rounds", r.spec.rounds},
          {"seed", r.spec.seed},
          {"mode", std::string(to_string(r.spec.mode))},
          {"scale", r.spec.scale.bracketed()},
          {"pseudo_count", r.spec.bt.pseudo_count},
          {"comparisons", r.comparisons},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"spearman", r.spearman},
          {"qwk", r.qwk},
          {"max_abs_error", r.max_abs_error},
          {"essays", std::move(rows)}};
}

std::string simulation_markdown(const SimulationReport& r) {
  std::ostringstream out;
  out << "# Simulation recovery report\n\n";
  out << "| Setting | Value |\n|---|---|\n";
  out << "| n | " << r.rows.size() << " |\n";
  out << "| lambda | " << r.spec.lambda_spec << " |\n";
  out << "| rounds | " << r.spec.rounds << " |\n";
  out << "| seed | " << r.spec.seed << " |\n";
  out << "| mode | " << to_string(r.spec.mode) << " |\n";
  out << "| scale | " << r.spec.scale.bracketed() << " |\n";
  out << "| pseudo count | " << fmt_double(r.spec.bt.pseudo_count) << " |\n\n";
  out << "| Metric | Value |\n|---|---|\n";
  out << "| comparisons | " << r.comparisons << " |\n";
  out << "| converged | " << (r.converged ? "yes" : "no") << " (" << r.iterations << " sweeps) |\n";
  out << "| Spearman rho | " << fmt("%.4f", r.spearman) << " |\n";
  out << "| QWK planted vs recovered | " << fmt("%.4f", r.qwk) << " |\n";
  out << "| max abs lambda error | " << fmt("%.4f", r.max_abs_error) << " |\n";
  return out.str();
}

std::string file_digest(const std::filesystem::path& path) { return hash_hex(fnv1a64(read_file(path))); }

}  // namespace cjscore
