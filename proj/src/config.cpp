#include "dashreport/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "dashreport/error.hpp"

namespace dashreport {

// --- TOML subset parser -----------------------------------------------------

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : s_(text) {}

  TomlDocument run() {
    TomlDocument doc;
    doc.tables[""];
    std::string table;
    std::set<std::string> headers;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        auto end = s_.find(']', pos_);
        if (end == std::string_view::npos) fail("unterminated table header");
        table = trim(s_.substr(pos_, end - pos_));
        pos_ = end + 1;
        if (table.empty()) fail("empty table name");
        for (char c : table) {
          if (!bare_key_char(c) && c != '.') fail("invalid table name '" + table + "'");
        }
        if (!headers.insert(table).second) fail("table [" + table + "] defined twice");
        doc.tables[table];
        end_of_line();
        continue;
      }
      auto key = parse_key();
      skip_spaces();
      if (eof() || peek() != '=') fail("expected '=' after key '" + key + "'");
      ++pos_;
      skip_spaces();
      const int key_line = line_;
      TomlValue v = parse_value();
      v.line = key_line;
      auto& t = doc.tables[table];
      if (!t.emplace(key, std::move(v)).second) fail("key '" + key + "' defined twice");
      end_of_line();
    }
    return doc;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  static bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  static std::string trim(std::string_view v) {
    auto b = v.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = v.find_last_not_of(" \t");
    return std::string(v.substr(b, e - b + 1));
  }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }

  // Whitespace, comments and newlines.
  void skip_blank_lines() {
    for (;;) {
      skip_spaces();
      skip_comment();
      if (eof()) return;
      if (peek() == '\r') {
        ++pos_;
        continue;
      }
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (!eof() && peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
    ++pos_;
    ++line_;
  }

  std::string parse_key() {
    if (peek() == '"') return parse_string();
    auto start = pos_;
    while (!eof() && bare_key_char(peek())) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string parse_string() {
    ++pos_;  // opening quote
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated string");
      char e = s_[pos_++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }

  TomlValue parse_value() {
    if (eof()) fail("missing value");
    TomlValue v;
    v.line = line_;
    char c = peek();
    if (c == '"') {
      v.value = parse_string();
    } else if (c == '[') {
      v.value = parse_array();
    } else if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      v.value = true;
    } else if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      v.value = false;
    } else {
      v.value = parse_number();
    }
    return v;
  }

  TomlArray parse_array() {
    ++pos_;  // '['
    TomlArray out;
    for (;;) {
      skip_blank_lines();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(parse_value());
      skip_blank_lines();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  std::variant<std::string, std::int64_t, double, bool, TomlArray> parse_number() {
    auto start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                      peek() == '+' || peek() == '-' || peek() == '.' ||
                      peek() == '_')) {
      ++pos_;
    }
    std::string token;
    for (char c : s_.substr(start, pos_ - start)) {
      if (c != '_') token += c;
    }
    if (token.empty()) fail("expected a value");
    const char* first = token.data() + (token[0] == '+' ? 1 : 0);
    const char* last = token.data() + token.size();
    if (token.find_first_of(".eE") == std::string::npos) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(first, last, i);
      if (ec == std::errc() && p == last) return i;
    } else {
      double d = 0;
      auto [p, ec] = std::from_chars(first, last, d);
      if (ec == std::errc() && p == last) return d;
    }
    fail("invalid value '" + token + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

TomlDocument parse_toml(std::string_view text) { return TomlParser(text).run(); }

// --- experiment config ------------------------------------------------------

namespace {

[[noreturn]] void bad(const std::string& table, const std::string& key,
                      const TomlValue& v, const std::string& what) {
  throw ConfigError("config line " + std::to_string(v.line) + ": [" + table +
                    "] " + key + ": " + what);
}

std::string get_string(const std::string& table, const std::string& key,
                       const TomlValue& v) {
  if (auto* s = std::get_if<std::string>(&v.value)) return *s;
  bad(table, key, v, "expected a string");
}

std::int64_t get_int(const std::string& table, const std::string& key,
                     const TomlValue& v) {
  if (auto* i = std::get_if<std::int64_t>(&v.value)) return *i;
  bad(table, key, v, "expected an integer");
}

double get_number(const std::string& table, const std::string& key,
                  const TomlValue& v) {
  if (auto* d = std::get_if<double>(&v.value)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v.value)) return static_cast<double>(*i);
  bad(table, key, v, "expected a number");
}

bool get_bool(const std::string& table, const std::string& key,
              const TomlValue& v) {
  if (auto* b = std::get_if<bool>(&v.value)) return *b;
  bad(table, key, v, "expected true or false");
}

std::vector<std::int64_t> get_int_array(const std::string& table,
                                        const std::string& key,
                                        const TomlValue& v) {
  auto* a = std::get_if<TomlArray>(&v.value);
  if (a == nullptr) bad(table, key, v, "expected an array of integers");
  std::vector<std::int64_t> out;
  for (const auto& e : *a) out.push_back(get_int(table, key, e));
  return out;
}

std::vector<std::string> get_string_array(const std::string& table,
                                          const std::string& key,
                                          const TomlValue& v) {
  auto* a = std::get_if<TomlArray>(&v.value);
  if (a == nullptr) bad(table, key, v, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *a) out.push_back(get_string(table, key, e));
  return out;
}

int to_int(const std::string& table, const std::string& key, const TomlValue& v,
           std::int64_t lo, std::int64_t hi) {
  auto i = get_int(table, key, v);
  if (i < lo || i > hi) {
    bad(table, key, v, "must lie in [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
  }
  return static_cast<int>(i);
}

// Applies endpoint keys; returns the model list ("models" or "model").
std::vector<std::string> apply_endpoint(const std::string& table,
                                        const TomlTable& t, EndpointConfig& e,
                                        bool allow_models) {
  std::vector<std::string> models;
  for (const auto& [key, v] : t) {
    if (key == "base_url") {
      e.base_url = get_string(table, key, v);
    } else if (key == "api_key_env") {
      e.api_key_env = get_string(table, key, v);
    } else if (key == "model") {
      models = {get_string(table, key, v)};
    } else if (key == "models" && allow_models) {
      models = get_string_array(table, key, v);
      if (models.empty()) bad(table, key, v, "must name at least one model");
    } else if (key == "temperature") {
      e.decoding.temperature = get_number(table, key, v);
    } else if (key == "max_output_tokens") {
      e.decoding.max_output_tokens = to_int(table, key, v, 1, 1 << 20);
    } else if (key == "max_attempts") {
      e.retry.max_attempts = to_int(table, key, v, 1, 100);
    } else if (key == "backoff_ms") {
      e.retry.backoff_base = std::chrono::milliseconds(to_int(table, key, v, 0, 600000));
    } else if (key == "timeout_ms") {
      e.timeout = std::chrono::milliseconds(to_int(table, key, v, 1, 3600000));
    } else if (key == "max_concurrency") {
      e.max_concurrency = to_int(table, key, v, 1, 1024);
    } else {
      bad(table, key, v, "unknown key");
    }
  }
  if (!models.empty()) e.model_name = models.front();
  e.validate();
  return models;
}

}  // namespace

ExperimentConfig config_from_toml(const TomlDocument& doc,
                                  const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.run = default_run_config();
  auto& run = cfg.run;
  std::filesystem::path prompts_dir;
  std::map<std::string, std::filesystem::path> prompt_overrides;
  std::optional<std::vector<std::int64_t>> grid_k, grid_t;

  for (const auto& [table, entries] : doc.tables) {
    if (table.empty()) {
      for (const auto& [key, v] : entries) {
        if (key != "name") bad("", key, v, "unknown key");
        cfg.name = get_string("", key, v);
      }
    } else if (table == "run") {
      for (const auto& [key, v] : entries) {
        if (key == "name") {
          cfg.name = get_string(table, key, v);
        } else if (key == "stage1_k") {
          run.stage1_k = to_int(table, key, v, 1, 1 << 20);
        } else if (key == "max_parallel_requests") {
          run.max_parallel_requests = to_int(table, key, v, 1, 1024);
        } else if (key == "stage3_gaze") {
          run.stage3_gaze = get_bool(table, key, v);
        } else if (key == "prompts_dir") {
          prompts_dir = base_dir / get_string(table, key, v);
          if (!std::filesystem::is_directory(prompts_dir)) {
            bad(table, key, v, "prompt directory not found: " + prompts_dir.string());
          }
        } else {
          bad(table, key, v, "unknown key");
        }
      }
    } else if (table == "stage3") {
      for (const auto& [key, v] : entries) {
        if (key == "k") {
          grid_k = get_int_array(table, key, v);
        } else if (key == "t") {
          grid_t = get_int_array(table, key, v);
        } else {
          bad(table, key, v, "unknown key");
        }
      }
    } else if (table == "prompts") {
      for (const auto& [key, v] : entries) {
        auto path = base_dir / get_string(table, key, v);
        if (!std::filesystem::is_regular_file(path)) {
          throw ConfigError("prompt file not found: " + path.string());
        }
        prompt_overrides[key] = path;
      }
    } else if (table == "decoder") {
      for (const auto& [key, v] : entries) {
        if (key != "command") bad(table, key, v, "unknown key");
        cfg.decoder = DecoderCommand::from_string(get_string(table, key, v));
      }
    } else if (table == "endpoint") {
      if (!entries.empty()) {
        throw ConfigError("config: [endpoint] takes no keys; use [endpoint.<stage>]");
      }
    } else if (table == "endpoint.stage1") {
      apply_endpoint(table, entries, run.stage1, false);
    } else if (table == "endpoint.stage2") {
      apply_endpoint(table, entries, run.stage2, false);
    } else if (table == "endpoint.ensemble") {
      apply_endpoint(table, entries, run.ensemble, false);
    } else if (table == "endpoint.stage3") {
      EndpointConfig shared = run.stage3.front();
      auto models = apply_endpoint(table, entries, shared, true);
      if (models.empty()) {
        for (auto& e : run.stage3) models.push_back(e.model_name);
      }
      run.stage3.clear();
      for (const auto& m : models) {
        EndpointConfig e = shared;
        e.model_name = m;
        run.stage3.push_back(e);
      }
    } else {
      throw ConfigError("config: unknown table [" + table + "]");
    }
  }

  if (grid_k || grid_t) {
    std::vector<std::int64_t> ks, ts;
    if (grid_k) {
      ks = *grid_k;
    } else {
      for (const auto& g : default_stage3_grid()) {
        if (std::find(ks.begin(), ks.end(), g.k) == ks.end()) ks.push_back(g.k);
      }
    }
    if (grid_t) {
      ts = *grid_t;
    } else {
      for (const auto& g : default_stage3_grid()) {
        if (std::find(ts.begin(), ts.end(), g.t) == ts.end()) ts.push_back(g.t);
      }
    }
    run.grid.clear();
    for (auto k : ks) {
      for (auto t : ts) {
        if (k < 1 || k > (1 << 20) || t < 0 || t > (1 << 20)) {
          throw ConfigError("config: [stage3] k must be >= 1 and t >= 0");
        }
        run.grid.push_back({static_cast<int>(k), static_cast<int>(t)});
      }
    }
  }

  run.prompts = StagePrompts::load(prompts_dir, prompt_overrides);
  run.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto text = ss.str();
  auto cfg = config_from_toml(parse_toml(text), path.parent_path());
  cfg.source_text = std::move(text);
  cfg.source_path = path;
  return cfg;
}

namespace {

nlohmann::ordered_json endpoint_to_json(const EndpointConfig& e) {
  return {{"model", e.model_name},
          {"base_url", e.base_url},
          {"api_key_env", e.api_key_env},
          {"temperature", e.decoding.temperature},
          {"max_output_tokens", e.decoding.max_output_tokens},
          {"max_attempts", e.retry.max_attempts},
          {"backoff_ms", e.retry.backoff_base.count()},
          {"timeout_ms", e.timeout.count()},
          {"max_concurrency", e.max_concurrency}};
}

}  // namespace

nlohmann::ordered_json run_config_to_json(const PipelineRunConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["stage1_k"] = cfg.stage1_k;
  auto grid = nlohmann::ordered_json::array();
  for (const auto& g : cfg.grid) grid.push_back({{"k", g.k}, {"t", g.t}});
  doc["grid"] = std::move(grid);
  doc["stage1"] = endpoint_to_json(cfg.stage1);
  doc["stage2"] = endpoint_to_json(cfg.stage2);
  auto s3 = nlohmann::ordered_json::array();
  for (const auto& e : cfg.stage3) s3.push_back(endpoint_to_json(e));
  doc["stage3"] = std::move(s3);
  doc["ensemble"] = endpoint_to_json(cfg.ensemble);
  doc["stage3_gaze"] = cfg.stage3_gaze;
  doc["max_parallel_requests"] = cfg.max_parallel_requests;
  return doc;
}

}  // namespace dashreport
