#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cjscore/config.hpp"
#include "cjscore/core.hpp"
#include "json.hpp"

namespace cjscore {

struct TraitColumns {
  std::string trait_id;
  std::string rater1;
  std::string rater2;
};

// Logical field -> TSV column name.
//
// Config keys: essay_id, set_id, text, trait.<id>.rater1, trait.<id>.rater2,
// and optionally scale ("0,1,2,3"), prompt_text, prompt_file. Traits keep
// the order their keys first appear in.
struct ColumnMapping {
  std::string essay_id = "essay_id";
  std::string set_id = "essay_set";
  std::string text = "essay";
  std::vector<TraitColumns> traits;
  std::optional<ScoreScale> scale;  // defaults to the set's built-in scale
  std::string prompt_text;

  static ColumnMapping from_config(const KeyValueConfig& cfg,
                                   const std::filesystem::path& base_dir = {});
  static ColumnMapping load(const std::filesystem::path& path);
  // Column names of the public ASAP training export (rater1_trait1, ...).
  static ColumnMapping asap(int set_id);
};

// Invalid UTF-8 sequences become U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

Dataset parse_dataset_text(std::string_view tsv, const ColumnMapping& mapping, int set_id,
                           std::string_view source = "<memory>");
Dataset parse_dataset(const std::filesystem::path& path, const ColumnMapping& mapping,
                      int set_id);

nlohmann::json dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const nlohmann::json& j);

// `path` ending in .json is read as a dataset dump; anything else is parsed
// as TSV with `mapping` (required then).
Dataset load_dataset(const std::filesystem::path& path, const std::optional<ColumnMapping>& mapping,
                     int set_id);

struct SampleSpec {
  std::string trait_id;
  std::size_t per_label_count = 5;
  std::uint64_t seed = 1;
};

// Groups essays by rater-mean label and draws min(per_label_count, group
// size) from each group without replacement. Result is sorted by essay id.
std::vector<Essay> stratified_sample(const Dataset& dataset, const SampleSpec& spec);

}  // namespace cjscore
