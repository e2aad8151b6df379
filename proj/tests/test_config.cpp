#include <doctest.h>

#include "dashreport/config.hpp"
#include "dashreport/error.hpp"
#include "support.hpp"

using namespace dashreport;

namespace {

ExperimentConfig from_text(const std::string& text,
                           const std::filesystem::path& base = ".") {
  return config_from_toml(parse_toml(text), base);
}

std::string error_of(const std::string& text, const std::filesystem::path& base = ".") {
  try {
    from_text(text, base);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("toml values") {
  auto doc = parse_toml(R"(
# comment
title = "a \"quoted\" \\ line\n"   # trailing comment
[t]
i = -42
f = 0.75
e = 1e3
b = false
arr = [1, 2,
       3]
strs = ["x", "y#z"]
)");
  CHECK(std::get<std::string>(doc.tables.at("").at("title").value) == "a \"quoted\" \\ line\n");
  const auto& t = doc.tables.at("t");
  CHECK(std::get<std::int64_t>(t.at("i").value) == -42);
  CHECK(std::get<double>(t.at("f").value) == 0.75);
  CHECK(std::get<double>(t.at("e").value) == 1000.0);
  CHECK(std::get<bool>(t.at("b").value) == false);
  CHECK(std::get<TomlArray>(t.at("arr").value).size() == 3);
  CHECK(std::get<std::string>(std::get<TomlArray>(t.at("strs").value)[1].value) == "y#z");
  CHECK(t.at("i").line == 5);
}

TEST_CASE("toml errors carry the line") {
  auto line_of = [](const std::string& text) {
    try {
      parse_toml(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(line_of("a = 1\na = 2\n").find("line 2") != std::string::npos);
  CHECK(line_of("[x]\n[x]\n").find("line 2") != std::string::npos);
  CHECK(line_of("a = \"open\n").find("line 1") != std::string::npos);
  CHECK(line_of("\n\nnovalue\n").find("line 3") != std::string::npos);
  CHECK(line_of("a = [1, 2\n").find("config line") != std::string::npos);
}

TEST_CASE("the fixture config loads") {
  auto cfg = load_experiment_config(testing::fixtures() / "config.toml");
  CHECK(cfg.name == "fixture");
  CHECK(cfg.run.stage1_k == 10);
  CHECK(cfg.run.max_parallel_requests == 2);
  REQUIRE(cfg.run.grid.size() == 4);
  CHECK(cfg.run.grid[1] == SamplingConfig{2, 2});
  CHECK(cfg.run.grid[2] == SamplingConfig{6, 1});
  REQUIRE(cfg.run.stage3.size() == 2);
  CHECK(cfg.run.stage3[1].model_name == "Qwen3-VL-235B-A22B-Thinking");
  CHECK(cfg.run.stage3[1].decoding.temperature == 0.7);
  CHECK(cfg.run.stage2.model_name == "GPT-OSS-120B");
  CHECK(cfg.source_text.find("[stage3]") != std::string::npos);
  CHECK(expand_grid(cfg.run).size() == 8);
}

TEST_CASE("defaults apply when tables are absent") {
  auto cfg = from_text("");
  CHECK(cfg.run.grid == default_stage3_grid());
  CHECK(cfg.run.stage1_k == kDefaultStage1Interval);
  CHECK_FALSE(cfg.decoder.has_value());
  auto only_k = from_text("[stage3]\nk = [3]\n");
  CHECK(only_k.run.grid.size() == 3);
  CHECK(only_k.run.grid[0] == SamplingConfig{3, 6});
}

TEST_CASE("endpoint settings") {
  auto cfg = from_text(R"(
[endpoint.stage1]
base_url = "https://api.example.test/v1"
api_key_env = "MY_KEY"
model = "captioner"
max_attempts = 5
backoff_ms = 10
timeout_ms = 2000
max_concurrency = 3
max_output_tokens = 512

[decoder]
command = "python3 \"/opt/my decoder.py\""
)");
  const auto& e = cfg.run.stage1;
  CHECK(e.base_url == "https://api.example.test/v1");
  CHECK(e.api_key_env == "MY_KEY");
  CHECK(e.model_name == "captioner");
  CHECK(e.retry.max_attempts == 5);
  CHECK(e.retry.backoff_base.count() == 10);
  CHECK(e.timeout.count() == 2000);
  CHECK(e.max_concurrency == 3);
  CHECK(e.decoding.max_output_tokens == 512);
  REQUIRE(cfg.decoder.has_value());
  CHECK(cfg.decoder->argv.back() == "/opt/my decoder.py");
}

TEST_CASE("configuration errors") {
  CHECK(error_of("[stage3]\nk = []\n").find("grid") != std::string::npos);
  CHECK(error_of("[stage3]\nk = [0]\n") != "");
  CHECK(error_of("[stage3]\nt = [-1]\n") != "");
  CHECK(error_of("[run]\nstage1_k = 0\n").find("line 2") != std::string::npos);
  CHECK(error_of("[run]\nspeed = 1\n").find("unknown key") != std::string::npos);
  CHECK(error_of("[mystery]\n").find("unknown table") != std::string::npos);
  CHECK(error_of("[endpoint.stage1]\nmax_attempts = 0\n") != "");
  CHECK(error_of("[endpoint.stage1]\nmodels = [\"a\"]\n").find("unknown key") != std::string::npos);
  CHECK(error_of("[endpoint.stage3]\nmodels = []\n") != "");
  CHECK(error_of("[run]\nstage1_k = \"ten\"\n").find("integer") != std::string::npos);
}

TEST_CASE("prompt files resolve against the config directory") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "prompts");
  testing::write_file(dir / "prompts/stage2_system.txt", "Locate the incident.");
  testing::write_file(dir / "ens.txt", "Merge {{candidate_count}} reports for {{video_id}}:\n{{candidates}}");
  auto cfg = from_text("[run]\nprompts_dir = \"prompts\"\n[prompts]\nensemble_user = \"ens.txt\"\n",
                       dir.path());
  CHECK(cfg.run.prompts.stage2_system.text == "Locate the incident.");
  CHECK(cfg.run.prompts.ensemble_user.text.rfind("Merge", 0) == 0);

  auto msg = error_of("[prompts]\nstage1_user = \"missing_prompt.txt\"\n", dir.path());
  CHECK(msg.find("missing_prompt.txt") != std::string::npos);
  CHECK(error_of("[run]\nprompts_dir = \"nowhere\"\n", dir.path()).find("nowhere") !=
        std::string::npos);
}

TEST_CASE("resolved config names key variables, never key values") {
  ::setenv("DASHREPORT_CFG_KEY", "sk-secret-123", 1);
  auto cfg = from_text("[endpoint.stage2]\napi_key_env = \"DASHREPORT_CFG_KEY\"\n");
  auto text = run_config_to_json(cfg.run).dump();
  ::unsetenv("DASHREPORT_CFG_KEY");
  CHECK(text.find("DASHREPORT_CFG_KEY") != std::string::npos);
  CHECK(text.find("sk-secret-123") == std::string::npos);
}

}  // TEST_SUITE
