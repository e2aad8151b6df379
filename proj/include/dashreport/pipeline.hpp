#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dashreport/gateway.hpp"
#include "dashreport/prompts.hpp"
#include "dashreport/report.hpp"
#include "dashreport/video.hpp"

namespace dashreport {

inline constexpr const char* kCaptionUnavailable = "[caption unavailable]";

inline constexpr int kDefaultStage1Interval = 10;

// Stage-3 sampling grid: k in {2, 6, 11, 12} x t in {6, 8, 10}.
std::vector<SamplingConfig> default_stage3_grid();

struct PipelineRunConfig {
  int stage1_k = kDefaultStage1Interval;
  std::vector<SamplingConfig> grid = default_stage3_grid();
  EndpointConfig stage1;
  EndpointConfig stage2;
  std::vector<EndpointConfig> stage3;  // one candidate family per model
  EndpointConfig ensemble;
  StagePrompts prompts = StagePrompts::defaults();
  bool stage3_gaze = false;  // stack gaze heatmaps under stage-3 frames too
  int max_parallel_requests = 4;  // per video, across frames / grid points

  // Throws ConfigError (empty grid, bad k/t, no stage-3 model, ...).
  void validate() const;
};

PipelineRunConfig default_run_config();

// One stage-3 configuration: a model and a sampling setting.
struct GridPoint {
  EndpointConfig endpoint;
  SamplingConfig sampling;

  // "(<model>,k=<k>,t=<t>)"
  std::string provenance() const;
};

// Models outermost, then sampling settings in grid order.
std::vector<GridPoint> expand_grid(const PipelineRunConfig& cfg);

struct StageContext {
  ModelGateway& gateway;
  const StagePrompts& prompts;
  std::filesystem::path gaze_dir;
  int max_parallel_requests = 4;
};

// Stage 1: caption every reference frame (gaze-stacked when a heatmap
// exists). Frames whose request or parse fails get kCaptionUnavailable and
// no hazards; throws StageError only if every frame fails.
std::vector<FrameObservation> stage1_caption_frames(
    StageContext& ctx, const VideoMeta& video, int k,
    const EndpointConfig& endpoint);

// Numbered list, one line per observation:
//   1. frame=<idx> | caption=<text> | hazards=<category:description;...>
std::string render_observations(const std::vector<FrameObservation>& obs);

// Frame with the most hazards (earliest on ties); the middle observation
// when no observation has any.
DetectionResult fallback_detection(const std::vector<FrameObservation>& obs);

// Clamps any numeric model answer into [0, frame_count).
FrameIndex clamp_frame(const nlohmann::json& value, FrameIndex frame_count);

// Stage 2: locate the incident frame. The result always lies within the
// video. Throws StageError when the model cannot be reached.
DetectionResult stage2_detect_incident(
    StageContext& ctx, const std::string& video_id,
    const std::vector<FrameObservation>& observations, FrameIndex frame_count,
    const EndpointConfig& endpoint);

// Converts a schema-valid model document into a report and enforces the
// report invariants (severity range, no_incident consistency, default
// time-to-incident). Each correction is appended to `corrections`.
IncidentReport report_from_model_output(const nlohmann::json& doc,
                                        const std::string& video_id,
                                        std::string provenance,
                                        std::optional<FrameIndex> default_tti,
                                        std::vector<std::string>& corrections);

// Stage 3: one candidate report for one grid point. One stricter re-prompt
// on unparseable output, then StageError.
IncidentReport stage3_generate_report(StageContext& ctx, const VideoMeta& video,
                                      FrameIndex incident_frame,
                                      const GridPoint& point,
                                      bool stack_gaze = false);

struct GridFailure {
  std::string provenance;
  std::string error;
};

struct PipelineResult {
  std::string video_id;
  FrameIndex frame_count = 0;
  double fps = kNominalFps;
  std::vector<FrameIndex> reference_frames;
  std::vector<FrameObservation> observations;
  DetectionResult detection;
  std::vector<IncidentReport> candidates;  // grid order
  std::vector<GridFailure> failures;
  std::size_t model_calls = 0;
};

// Stage 1 once, stage 2 once, stage 3 once per grid point. Stage-1/2
// failures propagate; stage-3 failures are recorded per grid point.
PipelineResult run_pipeline(ModelGateway& gateway, const VideoMeta& video,
                            const PipelineRunConfig& cfg,
                            const std::filesystem::path& gaze_dir = {});

nlohmann::ordered_json observation_to_json(const FrameObservation& obs);

}  // namespace dashreport
