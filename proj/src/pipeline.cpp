#include "dashreport/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "dashreport/error.hpp"
#include "dashreport/parallel.hpp"

namespace dashreport {

std::vector<SamplingConfig> default_stage3_grid() {
  std::vector<SamplingConfig> grid;
  for (int k : {2, 6, 11, 12}) {
    for (int t : {6, 8, 10}) grid.push_back({k, t});
  }
  return grid;
}

void PipelineRunConfig::validate() const {
  if (stage1_k < 1) throw ConfigError("stage1 k must be >= 1");
  if (grid.empty()) throw ConfigError("stage3 grid is empty");
  for (const auto& g : grid) {
    if (g.k < 1 || g.t < 0) {
      throw ConfigError("stage3 grid entry (k=" + std::to_string(g.k) +
                        ",t=" + std::to_string(g.t) + ") is invalid");
    }
  }
  if (stage3.empty()) throw ConfigError("no stage3 model configured");
  if (max_parallel_requests < 1) {
    throw ConfigError("max_parallel_requests must be >= 1");
  }
  stage1.validate();
  stage2.validate();
  for (const auto& e : stage3) e.validate();
  ensemble.validate();
  prompts.validate();
}

PipelineRunConfig default_run_config() {
  PipelineRunConfig cfg;
  cfg.stage1.model_name = "GLM-4.5V";
  cfg.stage2.model_name = "GPT-OSS-120B";
  EndpointConfig glm;
  glm.model_name = "GLM-4.5V";
  glm.decoding.temperature = 0.7;
  EndpointConfig qwen = glm;
  qwen.model_name = "Qwen3-VL-235B-A22B-Thinking";
  cfg.stage3 = {glm, qwen};
  cfg.ensemble.model_name = "Qwen3-Next-80B-A3B-Instruct";
  return cfg;
}

std::string GridPoint::provenance() const {
  return "(" + endpoint.model_name + ",k=" + std::to_string(sampling.k) +
         ",t=" + std::to_string(sampling.t) + ")";
}

std::vector<GridPoint> expand_grid(const PipelineRunConfig& cfg) {
  std::vector<GridPoint> points;
  for (const auto& endpoint : cfg.stage3) {
    for (const auto& s : cfg.grid) points.push_back({endpoint, s});
  }
  return points;
}

namespace {

ChatRequest make_request(const EndpointConfig& endpoint, std::string system,
                         RequestKey key) {
  ChatRequest req;
  req.model_name = endpoint.model_name;
  req.system_prompt = std::move(system);
  req.decoding = endpoint.decoding;
  req.timeout = endpoint.timeout;
  req.key = std::move(key);
  return req;
}

std::string join_indices(const std::vector<FrameIndex>& frames) {
  std::string out;
  for (auto f : frames) {
    if (!out.empty()) out += ", ";
    out += std::to_string(f);
  }
  return out;
}

std::optional<Image> try_load_heatmap(const std::filesystem::path& gaze_dir,
                                      const std::string& video_id,
                                      FrameIndex frame) {
  try {
    return load_gaze_heatmap(gaze_dir, video_id, frame);
  } catch (const Error& e) {
    spdlog::warn("{} frame {}: unreadable gaze heatmap, using raw frame: {}",
                 video_id, frame, e.what());
    return std::nullopt;
  }
}

FrameObservation parse_observation(FrameIndex frame, const nlohmann::json& doc) {
  FrameObservation obs;
  obs.frame_index = frame;
  obs.caption = doc.at("caption").get<std::string>();
  if (doc.contains("hazards") && doc["hazards"].is_array()) {
    for (const auto& h : doc["hazards"]) {
      obs.hazards.push_back(
          {*parse_hazard_category(h.at("category").get<std::string>()),
           h.at("description").get<std::string>()});
    }
  }
  return obs;
}

}  // namespace

std::vector<FrameObservation> stage1_caption_frames(
    StageContext& ctx, const VideoMeta& video, int k,
    const EndpointConfig& endpoint) {
  auto frames = sample_reference_frames(video, k);
  auto images = video.frame_source->extract_frames(frames);

  std::vector<FrameObservation> observations(frames.size());
  std::vector<char> failed(frames.size(), 0);
  parallel_for(frames.size(), ctx.max_parallel_requests, [&](std::size_t n) {
    const FrameIndex frame = frames[n];
    auto heatmap = try_load_heatmap(ctx.gaze_dir, video.video_id, frame);
    auto composed = compose_gaze_frame(frame, images[n], heatmap);

    auto req = make_request(endpoint, ctx.prompts.stage1_system.render({}),
                            {"stage1", video.video_id, frame, 0, {}});
    req.user_parts.push_back(TextPart{ctx.prompts.stage1_user.render(
        {{"video_id", video.video_id},
         {"frame_index", std::to_string(frame)},
         {"gaze_note",
          composed.has_gaze
              ? " The lower half of the image is the driver's gaze heatmap "
                "for the upper half."
              : ""}})});
    req.user_parts.push_back(ImagePart{encode_png(composed.image), "image/png"});

    try {
      auto response = ctx.gateway.complete(endpoint, req);
      auto doc = extract_structured(response.text, OutputSchema::FrameCaption);
      observations[n] = parse_observation(frame, doc);
    } catch (const ExtractionError& e) {
      spdlog::warn("stage1 {} frame {}: {}", video.video_id, frame, e.what());
      failed[n] = 1;
    } catch (const TransportError& e) {
      spdlog::warn("stage1 {} frame {}: {}", video.video_id, frame, e.what());
      failed[n] = 1;
    } catch (const ProviderError& e) {
      spdlog::warn("stage1 {} frame {}: {}", video.video_id, frame, e.what());
      failed[n] = 1;
    }
    if (failed[n]) observations[n] = {frame, kCaptionUnavailable, {}};
  });

  if (std::all_of(failed.begin(), failed.end(), [](char f) { return f != 0; })) {
    throw StageError("stage1 " + video.video_id + ": all " +
                     std::to_string(frames.size()) + " frames failed");
  }
  return observations;
}

std::string render_observations(const std::vector<FrameObservation>& obs) {
  std::string out;
  for (std::size_t n = 0; n < obs.size(); ++n) {
    std::string hazards;
    for (const auto& h : obs[n].hazards) {
      if (!hazards.empty()) hazards += ';';
      hazards += std::string(to_string(h.category)) + ":" + h.description;
    }
    out += std::to_string(n + 1) + ". frame=" +
           std::to_string(obs[n].frame_index) + " | caption=" + obs[n].caption +
           " | hazards=" + hazards + "\n";
  }
  return out;
}

DetectionResult fallback_detection(const std::vector<FrameObservation>& obs) {
  if (obs.empty()) throw InvalidInputError("fallback_detection: no observations");
  std::size_t best = 0;
  for (std::size_t n = 1; n < obs.size(); ++n) {
    if (obs[n].hazards.size() > obs[best].hazards.size()) best = n;
  }
  if (obs[best].hazards.empty()) {
    const auto& mid = obs[(obs.size() - 1) / 2];
    return {mid.frame_index, "no hazards reported; middle reference frame",
            DetectionSource::Fallback};
  }
  return {obs[best].frame_index,
          "reference frame with the most hazards (" +
              std::to_string(obs[best].hazards.size()) + ")",
          DetectionSource::Fallback};
}

FrameIndex clamp_frame(const nlohmann::json& value, FrameIndex frame_count) {
  const FrameIndex last = frame_count - 1;
  if (value.is_number_unsigned()) {
    auto v = value.get<std::uint64_t>();
    return v > static_cast<std::uint64_t>(last) ? last
                                                : static_cast<FrameIndex>(v);
  }
  if (value.is_number_integer()) {
    return std::clamp<FrameIndex>(value.get<std::int64_t>(), 0, last);
  }
  double v = value.get<double>();
  if (std::isnan(v)) return 0;
  v = std::clamp(v, 0.0, static_cast<double>(last));
  return std::clamp<FrameIndex>(std::llround(v), 0, last);
}

DetectionResult stage2_detect_incident(
    StageContext& ctx, const std::string& video_id,
    const std::vector<FrameObservation>& observations, FrameIndex frame_count,
    const EndpointConfig& endpoint) {
  if (observations.empty()) {
    throw InvalidInputError("stage2: no observations for " + video_id);
  }
  if (frame_count < 1) throw InvalidInputError("stage2: empty video " + video_id);

  auto req = make_request(endpoint, ctx.prompts.stage2_system.render({}),
                          {"stage2", video_id, std::nullopt, 0, {}});
  req.user_parts.push_back(TextPart{ctx.prompts.stage2_user.render(
      {{"video_id", video_id},
       {"frame_count", std::to_string(frame_count)},
       {"observations", render_observations(observations)}})});

  ChatResponse response;
  try {
    response = ctx.gateway.complete(endpoint, req);
  } catch (const TransportError& e) {
    throw StageError("stage2 " + video_id + ": " + e.what());
  } catch (const ProviderError& e) {
    throw StageError("stage2 " + video_id + ": " + e.what());
  }

  DetectionResult result;
  try {
    auto doc = extract_structured(response.text, OutputSchema::IncidentFrame);
    result.incident_frame = clamp_frame(doc["incident_frame"], frame_count);
    result.source = DetectionSource::Model;
    if (doc.contains("rationale") && doc["rationale"].is_string()) {
      result.rationale = doc["rationale"].get<std::string>();
    }
  } catch (const ExtractionError& e) {
    spdlog::warn("stage2 {}: {}; using fallback", video_id, e.what());
    result = fallback_detection(observations);
  }
  result.incident_frame = std::clamp<FrameIndex>(result.incident_frame, 0,
                                                 frame_count - 1);
  return result;
}

IncidentReport report_from_model_output(const nlohmann::json& doc,
                                        const std::string& video_id,
                                        std::string provenance,
                                        std::optional<FrameIndex> default_tti,
                                        std::vector<std::string>& corrections) {
  IncidentReport r;
  r.video_id = video_id;
  r.provenance = std::move(provenance);
  r.event_type = *parse_event_type(doc.at("event_type").get<std::string>());
  r.ego_involved = doc.at("ego_involved").get<bool>();
  r.caption_before = doc.at("caption_before").get<std::string>();
  r.caption_after = doc.at("caption_after").get<std::string>();

  auto severity = doc.at("crash_severity").get<std::int64_t>();
  if (severity < 0 || severity > kMaxSeverity) {
    corrections.push_back("crash_severity " + std::to_string(severity) +
                          " clamped to 0.." + std::to_string(kMaxSeverity));
    severity = std::clamp<std::int64_t>(severity, 0, kMaxSeverity);
  }
  r.crash_severity = static_cast<int>(severity);

  r.entity_counts = zero_entity_counts();
  const auto& counts = doc.at("entity_counts");
  for (auto kind : kEntityKinds) {
    auto it = counts.find(std::string(to_string(kind)));
    if (it == counts.end()) {
      corrections.push_back("entity_counts." + std::string(to_string(kind)) +
                            " missing, set to 0");
      continue;
    }
    auto v = it->get<std::int64_t>();
    if (v < 0) {
      corrections.push_back("entity_counts." + std::string(to_string(kind)) +
                            " negative, set to 0");
      v = 0;
    }
    r.entity_counts[kind] = v;
  }

  auto tti = doc.find("time_to_incident_frames");
  if (tti != doc.end() && !tti->is_null()) {
    r.time_to_incident_frames = std::max<std::int64_t>(0, tti->get<std::int64_t>());
  } else if (r.event_type != EventType::NoIncident) {
    r.time_to_incident_frames = default_tti;
  }

  if (r.event_type == EventType::NoIncident) {
    for (const auto& v : validate_report(r)) {
      corrections.push_back("violation: " + v);
    }
    if (r.crash_severity != 0) {
      corrections.push_back("no_incident with severity " +
                            std::to_string(r.crash_severity) + " set to 0");
      r.crash_severity = 0;
    }
    if (r.time_to_incident_frames) {
      corrections.push_back("no_incident time_to_incident_frames removed");
      r.time_to_incident_frames.reset();
    }
  }
  return r;
}

IncidentReport stage3_generate_report(StageContext& ctx, const VideoMeta& video,
                                      FrameIndex incident_frame,
                                      const GridPoint& point, bool stack_gaze) {
  if (incident_frame < 0 || incident_frame >= video.frame_count) {
    throw InvalidInputError("stage3: incident frame " +
                            std::to_string(incident_frame) + " outside video " +
                            video.video_id);
  }
  auto frames = frame_set(incident_frame, point.sampling, video.frame_count);
  auto images = video.frame_source->extract_frames(frames);
  const auto provenance = point.provenance();

  std::vector<UserPart> parts;
  parts.push_back(TextPart{ctx.prompts.stage3_user.render(
      {{"video_id", video.video_id},
       {"incident_frame", std::to_string(incident_frame)},
       {"frame_indices", join_indices(frames)},
       {"k", std::to_string(point.sampling.k)},
       {"t", std::to_string(point.sampling.t)}})});
  for (std::size_t n = 0; n < frames.size(); ++n) {
    Image image = images[n];
    if (stack_gaze) {
      auto heatmap = try_load_heatmap(ctx.gaze_dir, video.video_id, frames[n]);
      image = compose_gaze_frame(frames[n], image, heatmap).image;
    }
    parts.push_back(TextPart{"frame " + std::to_string(frames[n]) + ":"});
    parts.push_back(ImagePart{encode_png(image), "image/png"});
  }

  for (int ordinal = 0; ordinal < 2; ++ordinal) {
    auto req = make_request(
        point.endpoint, ctx.prompts.stage3_system.render({}),
        {"stage3", video.video_id, incident_frame, ordinal, provenance});
    req.user_parts = parts;
    if (ordinal > 0) {
      req.user_parts.push_back(TextPart{ctx.prompts.stage3_retry.render({})});
    }
    ChatResponse response;
    try {
      response = ctx.gateway.complete(point.endpoint, req);
    } catch (const TransportError& e) {
      throw StageError("stage3 " + provenance + ": " + e.what());
    } catch (const ProviderError& e) {
      throw StageError("stage3 " + provenance + ": " + e.what());
    }
    try {
      auto doc = extract_structured(response.text, OutputSchema::Report);
      std::vector<std::string> corrections;
      auto report = report_from_model_output(doc, video.video_id, provenance,
                                             incident_frame, corrections);
      for (const auto& c : corrections) {
        spdlog::info("stage3 {} {}: {}", video.video_id, provenance, c);
      }
      return report;
    } catch (const ExtractionError& e) {
      spdlog::warn("stage3 {} {} attempt {}: {}", video.video_id, provenance,
                   ordinal + 1, e.what());
    }
  }
  throw StageError("stage3 " + provenance +
                   ": unparseable output after re-prompt");
}

PipelineResult run_pipeline(ModelGateway& gateway, const VideoMeta& video,
                            const PipelineRunConfig& cfg,
                            const std::filesystem::path& gaze_dir) {
  cfg.validate();
  if (video.frame_count < 1) {
    throw InvalidInputError("video " + video.video_id + " has no frames");
  }
  VideoMeta cached = video;
  cached.frame_source = std::make_shared<CachedFrameSource>(video.frame_source);

  StageContext ctx{gateway, cfg.prompts, gaze_dir, cfg.max_parallel_requests};
  PipelineResult result;
  result.video_id = video.video_id;
  result.frame_count = video.frame_count;
  result.fps = video.fps;
  result.reference_frames = sample_reference_frames(video, cfg.stage1_k);
  result.observations = stage1_caption_frames(ctx, cached, cfg.stage1_k, cfg.stage1);
  result.detection = stage2_detect_incident(ctx, video.video_id,
                                            result.observations,
                                            video.frame_count, cfg.stage2);

  const auto points = expand_grid(cfg);
  std::set<FrameIndex> needed;
  for (const auto& p : points) {
    for (auto f : frame_set(result.detection.incident_frame, p.sampling,
                            video.frame_count)) {
      needed.insert(f);
    }
  }
  std::vector<FrameIndex> prefetch(needed.begin(), needed.end());
  cached.frame_source->extract_frames(prefetch);

  std::vector<std::optional<IncidentReport>> reports(points.size());
  std::vector<std::string> errors(points.size());
  parallel_for(points.size(), cfg.max_parallel_requests, [&](std::size_t n) {
    try {
      reports[n] = stage3_generate_report(ctx, cached,
                                          result.detection.incident_frame,
                                          points[n], cfg.stage3_gaze);
    } catch (const StageError& e) {
      errors[n] = e.what();
    }
  });
  for (std::size_t n = 0; n < points.size(); ++n) {
    if (reports[n]) {
      result.candidates.push_back(std::move(*reports[n]));
    } else {
      result.failures.push_back({points[n].provenance(), errors[n]});
    }
  }
  result.model_calls = gateway.call_count(video.video_id);
  return result;
}

nlohmann::ordered_json observation_to_json(const FrameObservation& obs) {
  nlohmann::ordered_json doc;
  doc["frame_index"] = obs.frame_index;
  doc["caption"] = obs.caption;
  auto hazards = nlohmann::ordered_json::array();
  for (const auto& h : obs.hazards) {
    hazards.push_back({{"category", to_string(h.category)},
                       {"description", h.description}});
  }
  doc["hazards"] = std::move(hazards);
  return doc;
}

}  // namespace dashreport
