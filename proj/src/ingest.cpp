#include "cjscore/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <unordered_set>

#include "cjscore/error.hpp"
#include "cjscore/rng.hpp"

namespace cjscore {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string unquote(std::string_view field) {
  if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
    field = field.substr(1, field.size() - 2);
    std::string out;
    for (std::size_t i = 0; i < field.size(); ++i) {
      out += field[i];
      if (field[i] == '"' && i + 1 < field.size() && field[i + 1] == '"') ++i;
    }
    return out;
  }
  return std::string(field);
}

std::string_view trim_ws(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string row_context(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no);
}

}  // namespace

ColumnMapping ColumnMapping::from_config(const KeyValueConfig& cfg,
                                         const std::filesystem::path& base_dir) {
  ColumnMapping m;
  m.traits.clear();
  std::map<std::string, std::size_t> trait_pos;
  for (const auto& [key, value] : cfg.entries()) {
    if (key == "essay_id") {
      m.essay_id = value;
    } else if (key == "set_id") {
      m.set_id = value;
    } else if (key == "text") {
      m.text = value;
    } else if (key == "scale") {
      m.scale = ScoreScale::parse(value, ScaleKind::coarse);
    } else if (key == "prompt_text") {
      m.prompt_text = value;
    } else if (key == "prompt_file") {
      std::filesystem::path p(value);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      m.prompt_text = read_file(p);
      while (!m.prompt_text.empty() &&
             (m.prompt_text.back() == '\n' || m.prompt_text.back() == '\r')) {
        m.prompt_text.pop_back();
      }
    } else if (key.rfind("trait.", 0) == 0) {
      const auto last_dot = key.rfind('.');
      if (last_dot <= 6) throw InvalidArgument("bad mapping key '" + key + "'");
      const std::string trait_id = key.substr(6, last_dot - 6);
      const std::string field = key.substr(last_dot + 1);
      auto [it, inserted] = trait_pos.try_emplace(trait_id, m.traits.size());
      if (inserted) m.traits.push_back(TraitColumns{trait_id, "", ""});
      auto& tc = m.traits[it->second];
      if (field == "rater1") {
        tc.rater1 = value;
      } else if (field == "rater2") {
        tc.rater2 = value;
      } else {
        throw InvalidArgument("bad mapping key '" + key + "' (expected rater1|rater2)");
      }
    } else {
      throw InvalidArgument("unknown mapping key '" + key + "'");
    }
  }
  for (const auto& tc : m.traits) {
    if (tc.rater1.empty() || tc.rater2.empty()) {
      throw InvalidArgument("mapping for trait '" + tc.trait_id + "' needs rater1 and rater2 columns");
    }
  }
  if (m.traits.empty()) throw InvalidArgument("mapping names no traits");
  return m;
}

ColumnMapping ColumnMapping::load(const std::filesystem::path& path) {
  return from_config(KeyValueConfig::load(path), path.parent_path());
}

ColumnMapping ColumnMapping::asap(int set_id) {
  int n_traits = 0;
  if (set_id == 7) n_traits = 4;
  else if (set_id == 8) n_traits = 6;
  else throw InvalidArgument("ASAP trait scores exist only for sets 7 and 8");
  ColumnMapping m;
  for (int t = 1; t <= n_traits; ++t) {
    const std::string n = std::to_string(t);
    m.traits.push_back({"trait" + n, "rater1_trait" + n, "rater2_trait" + n});
  }
  return m;
}

std::string sanitize_utf8(std::string_view bytes) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      out += static_cast<char>(c);
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    }
    bool ok = len != 0 && i + len <= bytes.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (ok) {
      // overlong forms, surrogates, beyond U+10FFFF
      static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      if (cp < kMin[len] || (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) ok = false;
    }
    if (ok) {
      out.append(bytes.substr(i, len));
      i += len;
    } else {
      out += kReplacement;
      ++i;
    }
  }
  return out;
}

Dataset parse_dataset_text(std::string_view tsv, const ColumnMapping& mapping, int set_id,
                           std::string_view source) {
  Dataset ds;
  ds.set_id = set_id;
  ds.scale = mapping.scale ? *mapping.scale : ScoreScale::coarse_for_set(set_id);
  ds.prompt_text = mapping.prompt_text;
  for (const auto& tc : mapping.traits) ds.traits.push_back(tc.trait_id);

  const std::string text = sanitize_utf8(tsv);
  std::string_view rest = text;
  if (rest.substr(0, 3) == "\xEF\xBB\xBF") rest.remove_prefix(3);

  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::map<std::string, std::size_t> col;
  std::size_t id_col = 0, set_col = 0, text_col = 0;
  std::vector<std::pair<std::size_t, std::size_t>> trait_cols;
  std::unordered_set<std::string> seen_ids;

  auto column = [&](const std::string& name) -> std::size_t {
    auto it = col.find(name);
    if (it == col.end()) {
      throw IngestError(std::string(source) + ": column not found: '" + name + "'");
    }
    return it->second;
  };

  while (!rest.empty()) {
    ++line_no;
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest.remove_prefix(nl == std::string_view::npos ? rest.size() : nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (header.empty()) {
      if (trim_ws(line).empty()) continue;
      for (auto f : split_tabs(line)) header.push_back(unquote(trim_ws(f)));
      for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
      id_col = column(mapping.essay_id);
      set_col = column(mapping.set_id);
      text_col = column(mapping.text);
      for (const auto& tc : mapping.traits) {
        trait_cols.emplace_back(column(tc.rater1), column(tc.rater2));
      }
      continue;
    }
    if (trim_ws(line).empty()) continue;

    const auto fields = split_tabs(line);
    if (fields.size() < header.size()) {
      // ASAP leaves trailing optional columns empty; only the mapped ones matter
      const std::size_t needed = std::max({id_col, set_col, text_col}) + 1;
      std::size_t max_trait = 0;
      for (auto [a, b] : trait_cols) max_trait = std::max({max_trait, a + 1, b + 1});
      if (fields.size() < std::max(needed, max_trait)) {
        throw IngestError(row_context(source, line_no) + ": malformed row, expected " +
                          std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()));
      }
    }

    const std::string set_cell(trim_ws(fields[set_col]));
    int row_set = 0;
    auto [p, ec] = std::from_chars(set_cell.data(), set_cell.data() + set_cell.size(), row_set);
    if (ec != std::errc{} || p != set_cell.data() + set_cell.size()) {
      throw IngestError(row_context(source, line_no) + ": unparsable set id '" + set_cell + "'");
    }
    if (row_set != set_id) continue;

    Essay e;
    e.essay_id = std::string(trim_ws(fields[id_col]));
    if (e.essay_id.empty()) throw IngestError(row_context(source, line_no) + ": empty essay id");
    if (!seen_ids.insert(e.essay_id).second) {
      throw IngestError(row_context(source, line_no) + ": duplicate essay id '" + e.essay_id + "'");
    }
    e.set_id = row_set;
    e.text = unquote(trim_ws(fields[text_col]));

    for (std::size_t t = 0; t < mapping.traits.size(); ++t) {
      const auto& tc = mapping.traits[t];
      auto parse_cell = [&](std::size_t c, const std::string& name) {
        const std::string cell(trim_ws(fields[c]));
        Score s;
        try {
          s = Score::parse(cell);
        } catch (const InvalidArgument&) {
          throw IngestError(row_context(source, line_no) + ": essay " + e.essay_id +
                            ": unparsable score '" + cell + "' in column '" + name + "'");
        }
        if (!ds.scale.contains(s)) {
          throw IngestError(row_context(source, line_no) + ": essay " + e.essay_id + ": score " +
                            s.str() + " in column '" + name + "' is outside scale " +
                            ds.scale.bracketed());
        }
        return s;
      };
      e.rater_scores[tc.trait_id] = RaterPair{parse_cell(trait_cols[t].first, tc.rater1),
                                              parse_cell(trait_cols[t].second, tc.rater2)};
    }
    ds.essays.push_back(std::move(e));
  }
  if (header.empty()) throw IngestError(std::string(source) + ": missing header row");
  return ds;
}

Dataset parse_dataset(const std::filesystem::path& path, const ColumnMapping& mapping, int set_id) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const InvalidArgument& e) {
    throw IngestError(e.what());
  }
  return parse_dataset_text(bytes, mapping, set_id, path.string());
}

nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["schema"] = 1;
  j["set_id"] = ds.set_id;
  j["traits"] = ds.traits;
  j["prompt_text"] = ds.prompt_text;
  std::vector<std::string> scale;
  for (Score s : ds.scale.values()) scale.push_back(s.str());
  j["scale"] = scale;
  auto& essays = j["essays"] = nlohmann::json::array();
  for (const auto& e : ds.essays) {
    nlohmann::json je;
    je["essay_id"] = e.essay_id;
    je["text"] = e.text;
    auto& rs = je["rater_scores"] = nlohmann::json::object();
    for (const auto& [trait, pair] : e.rater_scores) {
      rs[trait] = {pair.rater1.str(), pair.rater2.str()};
    }
    essays.push_back(std::move(je));
  }
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  try {
    Dataset ds;
    ds.set_id = j.at("set_id").get<int>();
    ds.traits = j.at("traits").get<std::vector<std::string>>();
    ds.prompt_text = j.value("prompt_text", "");
    std::vector<Score> scale;
    for (const auto& s : j.at("scale")) scale.push_back(Score::parse(s.get<std::string>()));
    ds.scale = ScoreScale(std::move(scale), ScaleKind::coarse);
    for (const auto& je : j.at("essays")) {
      Essay e;
      e.essay_id = je.at("essay_id").get<std::string>();
      e.set_id = ds.set_id;
      e.text = je.at("text").get<std::string>();
      for (const auto& [trait, pair] : je.at("rater_scores").items()) {
        e.rater_scores[trait] = RaterPair{Score::parse(pair.at(0).get<std::string>()),
                                          Score::parse(pair.at(1).get<std::string>())};
      }
      ds.essays.push_back(std::move(e));
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(std::string("malformed dataset JSON: ") + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& path, const std::optional<ColumnMapping>& mapping,
                     int set_id) {
  if (path.extension() == ".json") {
    Dataset ds;
    try {
      ds = dataset_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw IngestError(path.string() + ": " + e.what());
    }
    if (ds.set_id != set_id) {
      throw IngestError(path.string() + ": dataset is set " + std::to_string(ds.set_id) +
                        ", requested set " + std::to_string(set_id));
    }
    return ds;
  }
  if (!mapping) throw IngestError("a column mapping is required to parse '" + path.string() + "'");
  return parse_dataset(path, *mapping, set_id);
}

std::vector<Essay> stratified_sample(const Dataset& dataset, const SampleSpec& spec) {
  if (spec.per_label_count < 1) throw InvalidArgument("per_label_count must be at least 1");
  if (!dataset.has_trait(spec.trait_id)) {
    throw InvalidArgument("trait '" + spec.trait_id + "' not present in dataset");
  }
  std::map<Score, std::vector<const Essay*>> groups;
  for (const auto& e : dataset.essays) {
    if (auto label = trait_label(e, spec.trait_id)) groups[label->label].push_back(&e);
  }
  std::vector<Essay> out;
  for (auto& [label, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const Essay* a, const Essay* b) { return essay_id_less(a->essay_id, b->essay_id); });
    CounterRng rng(derive_key(spec.seed, {"stratified", spec.trait_id, label.str()}));
    for (std::size_t idx : sample_indices(members.size(), spec.per_label_count, rng)) {
      out.push_back(*members[idx]);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Essay& a, const Essay& b) { return essay_id_less(a.essay_id, b.essay_id); });
  return out;
}

}  // namespace cjscore
