#include <doctest.h>

#include "dashreport/error.hpp"
#include "dashreport/prompts.hpp"
#include "support.hpp"

using namespace dashreport;

TEST_SUITE("prompts") {

TEST_CASE("placeholders are listed in order of first appearance") {
  CHECK(template_placeholders("{{b}} and {{a}} then {{b}}") ==
        std::vector<std::string>{"b", "a"});
  CHECK(template_placeholders("no braces").empty());
}

TEST_CASE("render substitutes every placeholder") {
  PromptTemplate t{"t", "Video {{video_id}} frame {{frame_index}}.", {"video_id", "frame_index"}};
  CHECK_NOTHROW(t.validate());
  CHECK(t.render({{"video_id", "v1"}, {"frame_index", "9"}}) == "Video v1 frame 9.");
  CHECK_THROWS_AS(t.render({{"video_id", "v1"}}), ConfigError);
  // Substituted values are not re-expanded.
  CHECK(t.render({{"video_id", "{{frame_index}}"}, {"frame_index", "9"}}) ==
        "Video {{frame_index}} frame 9.");
}

TEST_CASE("declared and used variables must agree") {
  PromptTemplate missing{"t", "only {{a}}", {"a", "b"}};
  CHECK_THROWS_AS(missing.validate(), ConfigError);
  PromptTemplate extra{"t", "{{a}} {{z}}", {"a"}};
  CHECK_THROWS_AS(extra.validate(), ConfigError);
}

TEST_CASE("defaults validate") {
  CHECK_NOTHROW(StagePrompts::defaults().validate());
}

TEST_CASE("directory files replace defaults; overrides must exist") {
  testing::TempDir dir;
  testing::write_file(dir / "stage2_system.txt", "Find the frame.");
  testing::write_file(dir / "custom.txt", "Frame {{frame_index}} of {{video_id}}; {{gaze_note}}");
  auto p = StagePrompts::load(dir.path(), {{"stage1_user", dir / "custom.txt"}});
  CHECK(p.stage2_system.text == "Find the frame.");
  CHECK(p.stage1_user.text.rfind("Frame {{frame_index}}", 0) == 0);
  CHECK(p.stage3_user.text == StagePrompts::defaults().stage3_user.text);

  try {
    StagePrompts::load(dir.path(), {{"stage1_user", dir / "absent.txt"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("absent.txt") != std::string::npos);
  }
  CHECK_THROWS_AS(StagePrompts::load(dir.path(), {{"stage9", dir / "custom.txt"}}),
                  ConfigError);
  testing::write_file(dir / "stage2_user.txt", "{{video_id}} only");
  CHECK_THROWS_AS(StagePrompts::load(dir.path()), ConfigError);
}

}  // TEST_SUITE
