#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dashreport/pipeline.hpp"
#include "dashreport/video.hpp"

namespace dashreport {

// --- TOML subset ------------------------------------------------------------
//
// Tables ([a] and dotted [a.b]), key = value pairs, '#' comments. Values:
// basic strings with \" \\ \n \t escapes, integers, floats, booleans, and
// arrays of those (arrays may span lines). No inline tables, no dates.

struct TomlValue;
using TomlArray = std::vector<TomlValue>;

struct TomlValue {
  std::variant<std::string, std::int64_t, double, bool, TomlArray> value;
  int line = 0;
};

using TomlTable = std::map<std::string, TomlValue>;

struct TomlDocument {
  std::map<std::string, TomlTable> tables;  // "" is the root table
};

// Throws ConfigError with the line number on malformed input or a
// redefined key.
TomlDocument parse_toml(std::string_view text);

// --- experiment config ------------------------------------------------------

struct ExperimentConfig {
  std::string name;
  PipelineRunConfig run;
  std::optional<DecoderCommand> decoder;
  std::string source_text;  // verbatim config, echoed into manifests
  std::filesystem::path source_path;
};

// Builds a config from the document. Relative paths (prompt directory and
// overrides) resolve against `base_dir`. Unknown tables or keys are errors.
// Throws ConfigError; a missing prompt file is named in the message.
ExperimentConfig config_from_toml(const TomlDocument& doc,
                                  const std::filesystem::path& base_dir);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

nlohmann::ordered_json run_config_to_json(const PipelineRunConfig& cfg);

}  // namespace dashreport
