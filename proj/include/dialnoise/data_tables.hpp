#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dialnoise {

/// Surface-form families for one slot kind. Each group lists equivalent
/// spellings; generators derive spellings from canonical values (time and
/// date only).
struct VariantTable {
  std::vector<std::vector<std::string>> groups;
  std::vector<std::string> generators;

  bool empty() const { return groups.empty() && generators.empty(); }
};

using VariantTables = std::map<std::string, VariantTable>;

struct AsrConfusion {
  std::string phrase;
  std::vector<std::string> replacements;
};

struct DataTables {
  VariantTables variants;
  std::vector<AsrConfusion> asr_confusions;
  std::map<char, std::string> keyboard_neighbors;
  std::vector<std::string> unnatural_phrases;
  std::vector<std::string> generic_phrases;
};

/// $DIALNOISE_DATA_DIR when set, otherwise the data/ directory of the source
/// tree this build came from.
std::filesystem::path data_dir();

VariantTables load_variant_tables(const std::filesystem::path& path);
std::vector<AsrConfusion> load_asr_confusions(const std::filesystem::path& path);
std::map<char, std::string> load_keyboard(const std::filesystem::path& path);
std::vector<std::string> load_phrases(const std::filesystem::path& path);

/// Loads every table from `dir` using the shipped file names.
DataTables load_data_tables(const std::filesystem::path& dir = data_dir());

}  // namespace dialnoise
