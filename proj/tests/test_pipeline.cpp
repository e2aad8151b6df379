#include <doctest.h>

#include <random>

#include "dashreport/error.hpp"
#include "dashreport/pipeline.hpp"
#include "support.hpp"

using namespace dashreport;
using Frames = std::vector<FrameIndex>;

namespace {

std::string caption_doc(const std::string& caption,
                        std::vector<std::pair<std::string, std::string>> hazards = {}) {
  nlohmann::json h = nlohmann::json::array();
  for (auto& [c, d] : hazards) h.push_back({{"category", c}, {"description", d}});
  return nlohmann::json{{"caption", caption}, {"hazards", h}}.dump();
}

std::string report_doc(const std::string& event, int severity,
                       std::optional<FrameIndex> tti = std::nullopt) {
  nlohmann::json d = {{"event_type", event},
                      {"crash_severity", severity},
                      {"ego_involved", true},
                      {"entity_counts",
                       {{"vehicles", 2}, {"pedestrians", 0},
                        {"cyclists_or_scooters", 0}, {"animals", 1}}},
                      {"caption_before", "A dog approaches the road."},
                      {"caption_after", "The car brakes."}};
  if (tti) d["time_to_incident_frames"] = *tti;
  return d.dump();
}

// Records every request before delegating.
class Recorder : public ChatBackend {
 public:
  explicit Recorder(std::shared_ptr<ScriptedBackend> inner) : inner_(std::move(inner)) {}
  ChatResponse complete(const EndpointConfig& e, const ChatRequest& r) override {
    {
      std::lock_guard lock(mu_);
      requests.push_back(r);
    }
    return inner_->complete(e, r);
  }
  std::vector<ChatRequest> requests;

 private:
  std::shared_ptr<ScriptedBackend> inner_;
  std::mutex mu_;
};

EndpointConfig endpoint(const std::string& model) {
  EndpointConfig e;
  e.base_url = "http://scripted";
  e.model_name = model;
  return e;
}

PipelineRunConfig small_config(std::vector<SamplingConfig> grid) {
  auto cfg = default_run_config();
  cfg.stage3 = {endpoint("model")};
  cfg.grid = std::move(grid);
  return cfg;
}

struct Harness {
  std::shared_ptr<ScriptedBackend> script = std::make_shared<ScriptedBackend>();
  std::shared_ptr<Recorder> recorder = std::make_shared<Recorder>(script);
  ModelGateway gateway{recorder};
  StagePrompts prompts = StagePrompts::defaults();
  StageContext ctx{gateway, prompts, {}, 2};
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("stage 1 captions every reference frame") {
  Harness h;
  auto video = testing::synthetic_video("v1", 30);
  h.script->add({"stage1", "v1", 9, 0, ""}, caption_doc("first"));
  h.script->add({"stage1", "v1", 19, 0, ""}, "```json\n" + caption_doc("second", {{"animal", "dog"}}) + "\n```");
  h.script->add({"stage1", "v1", 29, 0, ""}, caption_doc("third"));
  auto obs = stage1_caption_frames(h.ctx, video, 10, endpoint("cap"));
  REQUIRE(obs.size() == 3);
  CHECK(obs[0].frame_index == 9);
  CHECK(obs[1].frame_index == 19);
  CHECK(obs[2].frame_index == 29);
  CHECK(obs[0].caption == "first");
  CHECK(obs[1].caption == "second");
  CHECK(obs[2].caption == "third");
  REQUIRE(obs[1].hazards.size() == 1);
  CHECK(obs[1].hazards[0].category == HazardCategory::Animal);
  // One image per request.
  for (const auto& r : h.recorder->requests) {
    int images = 0;
    for (const auto& p : r.user_parts) images += std::holds_alternative<ImagePart>(p);
    CHECK(images == 1);
  }
}

TEST_CASE("stage 1: a malformed response yields the sentinel caption") {
  Harness h;
  auto video = testing::synthetic_video("v1", 30);
  h.script->add({"stage1", "v1", 9, 0, ""}, caption_doc("first"));
  h.script->add({"stage1", "v1", 19, 0, ""}, "I see a road.");
  h.script->add({"stage1", "v1", 29, 0, ""}, caption_doc("third"));
  auto obs = stage1_caption_frames(h.ctx, video, 10, endpoint("cap"));
  REQUIRE(obs.size() == 3);
  CHECK(obs[0].caption == "first");
  CHECK(obs[1].caption == kCaptionUnavailable);
  CHECK(obs[1].hazards.empty());
  CHECK(obs[2].caption == "third");
}

TEST_CASE("stage 1: all frames failing is a stage error") {
  Harness h;
  auto video = testing::synthetic_video("v1", 20);
  h.script->add({"stage1", "v1", 9, 0, ""}, "nothing");
  h.script->add_transport_failure({"stage1", "v1", 19, 0, ""});
  CHECK_THROWS_AS(stage1_caption_frames(h.ctx, video, 10, endpoint("cap")), StageError);
}

TEST_CASE("stage 1: 5-frame video gives one observation at frame 4") {
  Harness h;
  auto video = testing::synthetic_video("v1", 5);
  h.script->add({"stage1", "v1", 4, 0, ""}, caption_doc("only"));
  auto obs = stage1_caption_frames(h.ctx, video, 10, endpoint("cap"));
  REQUIRE(obs.size() == 1);
  CHECK(obs[0].frame_index == 4);
}

TEST_CASE("stage 1 stacks the gaze heatmap when one exists") {
  Harness h;
  testing::TempDir gaze;
  std::filesystem::create_directories(gaze / "v1");
  Image hm(4, 3);
  hm.pixels.assign(hm.pixels.size(), 200);
  auto png = encode_png(hm);
  testing::write_file(gaze / "v1/9.png", std::string(png.begin(), png.end()));
  h.ctx.gaze_dir = gaze.path();
  auto video = testing::synthetic_video("v1", 20);
  h.script->add({"stage1", "v1", 9, 0, ""}, caption_doc("a"));
  h.script->add({"stage1", "v1", 19, 0, ""}, caption_doc("b"));
  stage1_caption_frames(h.ctx, video, 10, endpoint("cap"));
  for (const auto& r : h.recorder->requests) {
    const auto& img = std::get<ImagePart>(r.user_parts.back());
    auto decoded = decode_png(img.bytes);
    CHECK(decoded.height == (*r.key.anchor == 9 ? 12 : 6));
  }
}

TEST_CASE("observation rendering") {
  std::vector<FrameObservation> obs = {
      {9, "a car", {}},
      {19, "a dog", {{HazardCategory::Animal, "dog"}, {HazardCategory::Vehicle, "car"}}}};
  CHECK(render_observations(obs) ==
        "1. frame=9 | caption=a car | hazards=\n"
        "2. frame=19 | caption=a dog | hazards=animal:dog;vehicle:car\n");
}

TEST_CASE("stage 2 examples") {
  std::vector<FrameObservation> obs = {
      {9, "a", {}},
      {19, "b", {{HazardCategory::Animal, "x"}, {HazardCategory::Vehicle, "y"}}},
      {29, "c", {{HazardCategory::Pedestrian, "z"}}}};
  {
    Harness h;
    h.script->add({"stage2", "v", std::nullopt, 0, ""}, R"({"incident_frame": 120})");
    auto d = stage2_detect_incident(h.ctx, "v", obs, 300, endpoint("det"));
    CHECK(d.incident_frame == 120);
    CHECK(d.source == DetectionSource::Model);
  }
  {
    Harness h;
    h.script->add({"stage2", "v", std::nullopt, 0, ""}, R"({"incident_frame": 9999})");
    auto d = stage2_detect_incident(h.ctx, "v", obs, 300, endpoint("det"));
    CHECK(d.incident_frame == 299);
    CHECK(d.source == DetectionSource::Model);
  }
  {
    Harness h;
    h.script->add({"stage2", "v", std::nullopt, 0, ""}, "The incident is unclear.");
    auto d = stage2_detect_incident(h.ctx, "v", obs, 300, endpoint("det"));
    CHECK(d.incident_frame == 19);
    CHECK(d.source == DetectionSource::Fallback);
  }
  {
    Harness h;
    h.script->add_transport_failure({"stage2", "v", std::nullopt, 0, ""});
    CHECK_THROWS_AS(stage2_detect_incident(h.ctx, "v", obs, 300, endpoint("det")),
                    StageError);
  }
}

TEST_CASE("fallback detection ties and empty hazards") {
  std::vector<FrameObservation> none = {{9, "", {}}, {19, "", {}}, {29, "", {}}, {39, "", {}}};
  CHECK(fallback_detection(none).incident_frame == 19);
  std::vector<FrameObservation> tie = {{9, "", {}},
                                       {19, "", {{HazardCategory::Animal, ""}}},
                                       {29, "", {{HazardCategory::Animal, ""}}}};
  CHECK(fallback_detection(tie).incident_frame == 19);
}

TEST_CASE("stage 2 result stays inside the video for any answer") {
  std::mt19937_64 rng(23);
  std::vector<std::string> answers = {
      R"({"incident_frame": -5})", R"({"incident_frame": 1e300})",
      R"({"incident_frame": -1e300})", R"({"incident_frame": 18446744073709551615})",
      R"({"incident_frame": 12.7})", R"({"incident_frame": "12"})",
      R"({"incident_frame": null})", "", "}{", R"({"incident_frame": [3]})"};
  for (int i = 0; i < 200; ++i) {
    answers.push_back(R"({"incident_frame": )" + std::to_string(std::int64_t(rng())) + "}");
  }
  std::vector<FrameObservation> obs = {{0, "a", {}}, {4, "b", {}}};
  for (FrameIndex n : {1, 5, 300}) {
    for (const auto& a : answers) {
      Harness h;
      h.script->add({"stage2", "v", std::nullopt, 0, ""}, a);
      auto d = stage2_detect_incident(h.ctx, "v", obs, n, endpoint("det"));
      CHECK(d.incident_frame >= 0);
      CHECK(d.incident_frame < n);
    }
  }
}

TEST_CASE("stage 3 report with provenance and frames in temporal order") {
  Harness h;
  auto video = testing::synthetic_video("v", 300);
  h.script->add({"stage3", "v", 100, 0, "(model,k=10,t=2)"}, report_doc("accident", 3, 40));
  GridPoint p{endpoint("model"), {10, 2}};
  auto r = stage3_generate_report(h.ctx, video, 100, p);
  CHECK(r.provenance == "(model,k=10,t=2)");
  CHECK(r.time_to_incident_frames == 40);
  CHECK(validate_report(r).empty());
  REQUIRE(h.recorder->requests.size() == 1);
  Frames order;
  for (const auto& part : h.recorder->requests[0].user_parts) {
    if (auto* t = std::get_if<TextPart>(&part); t && t->text.rfind("frame ", 0) == 0) {
      order.push_back(std::stoll(t->text.substr(6)));
    }
  }
  CHECK(order == Frames{80, 90, 100, 110, 120});
}

TEST_CASE("stage 3 defaults and corrections") {
  Harness h;
  auto video = testing::synthetic_video("v", 300);
  GridPoint p{endpoint("model"), {10, 2}};
  h.script->add({"stage3", "v", 100, 0, ""}, report_doc("hazard", 2));
  CHECK(stage3_generate_report(h.ctx, video, 100, p).time_to_incident_frames == 100);

  Harness h2;
  h2.script->add({"stage3", "v", 100, 0, ""}, report_doc("no_incident", 3));
  auto r = stage3_generate_report(h2.ctx, video, 100, p);
  CHECK(r.crash_severity == 0);
  CHECK_FALSE(r.time_to_incident_frames.has_value());
  CHECK(validate_report(r).empty());

  std::vector<std::string> corrections;
  auto doc = nlohmann::json::parse(report_doc("no_incident", 3, 50));
  auto fixed = report_from_model_output(doc, "v", "p", 100, corrections);
  CHECK(fixed.crash_severity == 0);
  CHECK_FALSE(fixed.time_to_incident_frames.has_value());
  CHECK(corrections.size() >= 2);
  doc = nlohmann::json::parse(report_doc("accident", 9));
  corrections.clear();
  CHECK(report_from_model_output(doc, "v", "p", 1, corrections).crash_severity == 4);
  CHECK(corrections.size() == 1);
}

TEST_CASE("stage 3 re-prompts once, then fails") {
  auto video = testing::synthetic_video("v", 50);
  GridPoint p{endpoint("model"), {2, 1}};
  {
    Harness h;
    h.script->add({"stage3", "v", 10, 0, ""}, "no json here");
    h.script->add({"stage3", "v", 10, 1, ""}, report_doc("hazard", 1, 3));
    auto r = stage3_generate_report(h.ctx, video, 10, p);
    CHECK(r.time_to_incident_frames == 3);
    CHECK(h.recorder->requests.size() == 2);
  }
  {
    Harness h;
    h.script->add({"stage3", "v", 10, 0, ""}, "no json here");
    h.script->add({"stage3", "v", 10, 1, ""}, "still none");
    CHECK_THROWS_AS(stage3_generate_report(h.ctx, video, 10, p), StageError);
  }
  Harness h;
  CHECK_THROWS_AS(stage3_generate_report(h.ctx, video, 50, p), InvalidInputError);
}

TEST_CASE("run_pipeline composes the stages") {
  auto video = testing::synthetic_video("v", 30);
  auto cfg = small_config({{10, 1}, {2, 1}});
  Harness h;
  for (FrameIndex f : {9, 19, 29}) h.script->add({"stage1", "v", f, 0, ""}, caption_doc("c"));
  h.script->add({"stage2", "v", std::nullopt, 0, ""}, R"({"incident_frame": 15})");
  h.script->add({"stage3", "v", 15, 0, ""}, report_doc("hazard", 1, 4));
  auto r = run_pipeline(h.gateway, video, cfg);
  REQUIRE(r.candidates.size() == 2);
  CHECK(r.candidates[0].provenance == "(model,k=10,t=1)");
  CHECK(r.candidates[1].provenance == "(model,k=2,t=1)");
  CHECK(r.failures.empty());
  CHECK(r.model_calls == 3 + 1 + 2);
  CHECK(h.gateway.call_count("v") == 6);
}

TEST_CASE("run_pipeline isolates a failing grid point") {
  auto video = testing::synthetic_video("v", 30);
  auto cfg = small_config({{10, 1}, {2, 1}});
  Harness h;
  for (FrameIndex f : {9, 19, 29}) h.script->add({"stage1", "v", f, 0, ""}, caption_doc("c"));
  h.script->add({"stage2", "v", std::nullopt, 0, ""}, R"({"incident_frame": 15})");
  h.script->add({"stage3", "v", 15, 0, "(model,k=10,t=1)"}, report_doc("hazard", 1));
  h.script->add({"stage3", "v", 15, 0, "(model,k=2,t=1)"}, "garbage");
  h.script->add({"stage3", "v", 15, 1, "(model,k=2,t=1)"}, "garbage again");
  auto r = run_pipeline(h.gateway, video, cfg);
  REQUIRE(r.candidates.size() == 1);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].provenance == "(model,k=2,t=1)");
  CHECK(r.model_calls == 3 + 1 + 2 + 1);
}

TEST_CASE("run_pipeline propagates stage 2 failure") {
  auto video = testing::synthetic_video("v", 30);
  Harness h;
  for (FrameIndex f : {9, 19, 29}) h.script->add({"stage1", "v", f, 0, ""}, caption_doc("c"));
  h.script->add_transport_failure({"stage2", "v", std::nullopt, 0, ""});
  CHECK_THROWS_AS(run_pipeline(h.gateway, video, small_config({{2, 1}})), StageError);
}

TEST_CASE("grid configuration") {
  CHECK_THROWS_AS(small_config({}).validate(), ConfigError);
  CHECK_THROWS_AS(small_config({{0, 1}}).validate(), ConfigError);
  auto cfg = small_config({{2, 1}});
  cfg.stage3.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  auto grid = default_stage3_grid();
  CHECK(grid.size() == 12);
  cfg = small_config(grid);
  cfg.stage3 = {endpoint("a"), endpoint("b")};
  auto points = expand_grid(cfg);
  REQUIRE(points.size() == 24);
  CHECK(points[0].provenance() == "(a,k=2,t=6)");
  CHECK(points[12].provenance() == "(b,k=2,t=6)");
}

TEST_CASE("run_pipeline is deterministic") {
  auto run = [] {
    auto video = testing::synthetic_video("v", 60);
    Harness h;
    for (FrameIndex f : {9, 19, 29, 39, 49, 59}) {
      h.script->add({"stage1", "v", f, 0, ""}, caption_doc("c" + std::to_string(f)));
    }
    h.script->add({"stage2", "v", std::nullopt, 0, ""}, R"({"incident_frame": 33})");
    h.script->add({"stage3", "v", 33, 0, ""}, report_doc("accident", 2));
    auto cfg = small_config({{2, 1}, {6, 2}, {11, 1}});
    cfg.max_parallel_requests = 4;
    std::string out;
    for (const auto& c : run_pipeline(h.gateway, video, cfg).candidates) {
      out += serialize_report(c) + "\n";
    }
    return out;
  };
  auto first = run();
  for (int i = 0; i < 5; ++i) CHECK(run() == first);
}

}  // TEST_SUITE
