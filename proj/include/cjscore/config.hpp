#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cjscore {

// Flat `key = value` file. '#' starts a comment line; later keys override
// earlier ones; insertion order is preserved.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view source = "<memory>");
  static KeyValueConfig load(const std::filesystem::path& path);

  std::optional<std::string> get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string_view fallback) const;
  void set(std::string key, std::string value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string read_file(const std::filesystem::path& path);
// Writes via a sibling temp file and rename.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cjscore
