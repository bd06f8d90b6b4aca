#include "cjscore/store.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "cjscore/config.hpp"
#include "cjscore/error.hpp"
#include "cjscore/prompts.hpp"
#include "cjscore/rng.hpp"

namespace cjscore {

struct JudgmentStore::Impl {
  std::filesystem::path path;
  bool persistent = false;
  mutable std::mutex mu;
  std::ofstream out;
  std::vector<JudgmentRecord> judgments;
  std::vector<RubricScoreRecord> rubric_scores;
  std::map<RecordKey, std::size_t> judgment_index;
  std::map<RecordKey, std::size_t> rubric_index;
  std::vector<std::string> warnings;

  void ingest_line(const std::string& line, std::size_t line_no) {
    const auto j = nlohmann::json::parse(line);  // may throw parse_error
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "cj") {
      add(judgment_from_json(j), line_no);
    } else if (kind == "rubric") {
      add(rubric_score_from_json(j), line_no);
    } else {
      throw StoreError("unknown record kind '" + kind + "'");
    }
  }

  template <typename Record>
  bool add(const Record& r, std::size_t line_no) {
    auto& index = index_for(r);
    auto& records = records_for(r);
    if (index.contains(r.key())) {
      warnings.push_back(where(line_no) + "duplicate record for prompt " + hash_hex(r.prompt_hash) +
                         " / " + r.backend_id + " ignored");
      return false;
    }
    index.emplace(r.key(), records.size());
    records.push_back(r);
    return true;
  }

  std::string where(std::size_t line_no) const {
    if (line_no == 0) return "";
    return path.string() + ":" + std::to_string(line_no) + ": ";
  }

  std::map<RecordKey, std::size_t>& index_for(const JudgmentRecord&) { return judgment_index; }
  std::map<RecordKey, std::size_t>& index_for(const RubricScoreRecord&) { return rubric_index; }
  std::vector<JudgmentRecord>& records_for(const JudgmentRecord&) { return judgments; }
  std::vector<RubricScoreRecord>& records_for(const RubricScoreRecord&) { return rubric_scores; }

  void open_for_append() {
    if (!persistent || out.is_open()) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out.open(path, std::ios::binary | std::ios::app);
    if (!out) throw StoreError("cannot open store '" + path.string() + "' for append");
  }

  template <typename Record>
  bool append(const Record& r) {
    std::lock_guard lock(mu);
    if (!add(r, 0)) return false;
    if (persistent) {
      open_for_append();
      out << to_json(r).dump() << '\n';
      out.flush();
      if (!out) throw StoreError("write failed for store '" + path.string() + "'");
    }
    return true;
  }
};

namespace {

std::unique_ptr<JudgmentStore::Impl> load_impl(const std::filesystem::path& path, bool create,
                                               bool allow_missing) {
  auto impl = std::make_unique<JudgmentStore::Impl>();
  impl->path = path;
  impl->persistent = true;
  if (!std::filesystem::exists(path)) {
    if (!create && !allow_missing) throw StoreError("store '" + path.string() + "' does not exist");
    if (create) impl->open_for_append();
    return impl;
  }
  const std::string content = read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t keep_bytes = content.size();
  while (pos < content.size()) {
    ++line_no;
    const auto nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
    const std::size_t line_start = pos;
    pos = terminated ? nl + 1 : content.size();
    if (line.empty() || line == "\r") continue;
    try {
      impl->ingest_line(line, line_no);
    } catch (const std::exception& e) {
      if (!terminated) {
        impl->warnings.push_back(path.string() + ":" + std::to_string(line_no) +
                                 ": dropped truncated trailing record");
        keep_bytes = line_start;
        break;
      }
      throw StoreError(path.string() + ":" + std::to_string(line_no) + ": corrupt record: " + e.what());
    }
    if (!terminated) {
      // complete record without its newline; terminate it before appending
      std::ofstream fix(path, std::ios::binary | std::ios::app);
      fix << '\n';
    }
  }
  if (keep_bytes < content.size()) std::filesystem::resize_file(path, keep_bytes);
  return impl;
}

}  // namespace

JudgmentStore::JudgmentStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
JudgmentStore::JudgmentStore(JudgmentStore&&) noexcept = default;
JudgmentStore& JudgmentStore::operator=(JudgmentStore&&) noexcept = default;
JudgmentStore::~JudgmentStore() = default;

JudgmentStore JudgmentStore::open(const std::filesystem::path& path) {
  return JudgmentStore(load_impl(path, true, false));
}

JudgmentStore JudgmentStore::load(const std::filesystem::path& path, bool allow_missing) {
  return JudgmentStore(load_impl(path, false, allow_missing));
}

JudgmentStore JudgmentStore::in_memory() { return JudgmentStore(std::make_unique<Impl>()); }

bool JudgmentStore::append(const JudgmentRecord& record) { return impl_->append(record); }
bool JudgmentStore::append(const RubricScoreRecord& record) { return impl_->append(record); }

std::optional<JudgmentRecord> JudgmentStore::find_judgment(const RecordKey& key) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->judgment_index.find(key);
  if (it == impl_->judgment_index.end()) return std::nullopt;
  return impl_->judgments[it->second];
}

std::optional<RubricScoreRecord> JudgmentStore::find_rubric_score(const RecordKey& key) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->rubric_index.find(key);
  if (it == impl_->rubric_index.end()) return std::nullopt;
  return impl_->rubric_scores[it->second];
}

std::vector<JudgmentRecord> JudgmentStore::judgments() const {
  std::lock_guard lock(impl_->mu);
  return impl_->judgments;
}

std::vector<RubricScoreRecord> JudgmentStore::rubric_scores() const {
  std::lock_guard lock(impl_->mu);
  return impl_->rubric_scores;
}

std::size_t JudgmentStore::size() const {
  std::lock_guard lock(impl_->mu);
  return impl_->judgments.size() + impl_->rubric_scores.size();
}

std::vector<std::string> JudgmentStore::warnings() const {
  std::lock_guard lock(impl_->mu);
  return impl_->warnings;
}

std::string JudgmentStore::content_digest() const {
  std::lock_guard lock(impl_->mu);
  std::vector<std::string> lines;
  lines.reserve(impl_->judgments.size() + impl_->rubric_scores.size());
  auto canonical = [](nlohmann::json j) {
    j.erase("timestamp");
    j.erase("attempt_count");
    return j.dump();
  };
  for (const auto& r : impl_->judgments) lines.push_back(canonical(to_json(r)));
  for (const auto& r : impl_->rubric_scores) lines.push_back(canonical(to_json(r)));
  std::sort(lines.begin(), lines.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& l : lines) {
    h = fnv1a64(l, h);
    h = fnv1a64("\n", h);
  }
  return hash_hex(h);
}

const std::filesystem::path& JudgmentStore::path() const { return impl_->path; }

}  // namespace cjscore
