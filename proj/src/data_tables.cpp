#include "dialnoise/data_tables.hpp"

#include <cstdlib>
#include <fstream>

#include "dialnoise/corpus.hpp"
#include "dialnoise/error.hpp"

namespace dialnoise {

namespace {

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data table " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("DIALNOISE_DATA_DIR"); env && *env) return env;
  return DIALNOISE_DEFAULT_DATA_DIR;
}

VariantTables load_variant_tables(const std::filesystem::path& path) {
  const Json j = read_json(path);
  VariantTables out;
  try {
    for (const auto& [kind, body] : j.items()) {
      VariantTable table;
      if (body.contains("groups"))
        table.groups = body["groups"].get<std::vector<std::vector<std::string>>>();
      if (body.contains("generators")) table.generators = body["generators"].get<std::vector<std::string>>();
      for (const auto& g : table.groups)
        if (g.size() < 2) throw SchemaError(path.string() + ": variant group in '" + kind + "' has < 2 forms");
      out[kind] = std::move(table);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<AsrConfusion> load_asr_confusions(const std::filesystem::path& path) {
  const Json j = read_json(path);
  std::vector<AsrConfusion> out;
  try {
    for (const auto& row : j.at("confusions"))
      out.push_back({row.at("phrase").get<std::string>(),
                     row.at("replacements").get<std::vector<std::string>>()});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return out;
}

std::map<char, std::string> load_keyboard(const std::filesystem::path& path) {
  const Json j = read_json(path);
  std::map<char, std::string> out;
  try {
    for (const auto& [key, neighbors] : j.at("neighbors").items()) {
      if (key.size() != 1) throw SchemaError(path.string() + ": keys must be single characters");
      out[key[0]] = neighbors.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<std::string> load_phrases(const std::filesystem::path& path) {
  const Json j = read_json(path);
  try {
    return j.at("phrases").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

DataTables load_data_tables(const std::filesystem::path& dir) {
  DataTables t;
  t.variants = load_variant_tables(dir / "variant_tables.json");
  t.asr_confusions = load_asr_confusions(dir / "asr_confusions.json");
  t.keyboard_neighbors = load_keyboard(dir / "keyboard_qwerty.json");
  t.unnatural_phrases = load_phrases(dir / "unnatural_phrases.json");
  t.generic_phrases = load_phrases(dir / "generic_phrases.json");
  return t;
}

}  // namespace dialnoise
