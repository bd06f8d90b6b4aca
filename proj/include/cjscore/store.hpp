#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cjscore/records.hpp"

namespace cjscore {

// Append-only JSONL log of judgments and rubric scores, indexed by
// RecordKey. One line per record, flushed on append. Thread-safe: appends
// are serialized, lookups take the same lock.
//
// Loading tolerates a torn final line (it is dropped and truncated away);
// any other unreadable line is treated as corruption.
class JudgmentStore {
 public:
  // Loads `path`, creating an empty file when it does not exist.
  static JudgmentStore open(const std::filesystem::path& path);
  // Loads an existing file without creating one. Throws StoreError when the
  // file is missing unless `allow_missing` (then the store is empty and
  // read-only until first append creates the file).
  static JudgmentStore load(const std::filesystem::path& path, bool allow_missing = false);
  static JudgmentStore in_memory();

  JudgmentStore(JudgmentStore&&) noexcept;
  JudgmentStore& operator=(JudgmentStore&&) noexcept;
  ~JudgmentStore();

  // False (and a warning) when the key is already present.
  bool append(const JudgmentRecord& record);
  bool append(const RubricScoreRecord& record);

  std::optional<JudgmentRecord> find_judgment(const RecordKey& key) const;
  std::optional<RubricScoreRecord> find_rubric_score(const RecordKey& key) const;

  // In append order.
  std::vector<JudgmentRecord> judgments() const;
  std::vector<RubricScoreRecord> rubric_scores() const;
  std::size_t size() const;

  // Load and duplicate-append warnings, oldest first.
  std::vector<std::string> warnings() const;

  // Digest over the record set with timestamps and attempt counts removed,
  // independent of append order. Hex string.
  std::string content_digest() const;

  const std::filesystem::path& path() const;

 struct Impl;

 private:
  explicit JudgmentStore(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace cjscore
