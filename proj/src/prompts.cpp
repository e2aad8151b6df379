#include "dashreport/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dashreport/error.hpp"

namespace dashreport {

std::vector<std::string> template_placeholders(const std::string& text) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string::npos) {
    auto end = text.find("}}", pos + 2);
    if (end == std::string::npos) break;
    auto name = text.substr(pos + 2, end - pos - 2);
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      names.push_back(name);
    }
    pos = end + 2;
  }
  return names;
}

void PromptTemplate::validate() const {
  auto used = template_placeholders(text);
  for (const auto& v : variables) {
    if (std::find(used.begin(), used.end(), v) == used.end()) {
      throw ConfigError("prompt " + name + ": declared variable {{" + v +
                        "}} does not appear in the template");
    }
  }
  for (const auto& u : used) {
    if (std::find(variables.begin(), variables.end(), u) == variables.end()) {
      throw ConfigError("prompt " + name + ": unknown placeholder {{" + u +
                        "}}");
    }
  }
}

std::string PromptTemplate::render(
    const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find("{{", pos);
    if (open == std::string::npos) {
      out.append(text, pos);
      break;
    }
    auto close = text.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(text, pos);
      break;
    }
    out.append(text, pos, open - pos);
    auto name = text.substr(open + 2, close - open - 2);
    auto it = values.find(name);
    if (it == values.end()) {
      throw ConfigError("prompt " + this->name + ": no value for {{" + name +
                        "}}");
    }
    out += it->second;
    pos = close + 2;
  }
  return out;
}

namespace {

constexpr const char* kStage1System =
    "You are an expert analyst of dashcam footage. You describe a single "
    "video frame precisely and list every object that could be involved in "
    "a traffic incident.";

constexpr const char* kStage1User =
    "Video {{video_id}}, frame {{frame_index}}.{{gaze_note}}\n"
    "Describe what is happening around the ego vehicle in this frame in one "
    "or two sentences, then list incident-related objects.\n"
    "Answer with a single JSON object:\n"
    "{\"caption\": \"...\", \"hazards\": [{\"category\": \"vehicle|pedestrian|"
    "cyclist_or_scooter|animal|debris_or_other\", \"description\": \"...\"}]}";

constexpr const char* kStage2System =
    "You are an expert in traffic incident analysis. From per-frame captions "
    "of a dashcam video you locate the frame where the situation becomes "
    "hazardous.";

constexpr const char* kStage2User =
    "Video {{video_id}} has {{frame_count}} frames (0-based). Captions of "
    "reference frames:\n{{observations}}\n"
    "Which frame index marks the onset of the incident? Answer with a single "
    "JSON object: {\"incident_frame\": <integer>, \"rationale\": \"...\"}";

constexpr const char* kStage3System =
    "You are an expert traffic incident investigator writing structured "
    "incident reports from dashcam frames.";

constexpr const char* kStage3User =
    "Video {{video_id}}. The incident is anchored at frame "
    "{{incident_frame}}. The following frames ({{frame_indices}}; interval "
    "{{k}}, offset {{t}}) are given in temporal order.\n"
    "Write an incident report as a single JSON object with fields: "
    "event_type (hazard|accident|no_incident), crash_severity (0-4, 0 = no "
    "danger), ego_involved (true|false), entity_counts {vehicles, "
    "pedestrians, cyclists_or_scooters, animals}, time_to_incident_frames "
    "(frame index of incident onset or null), caption_before (what happens "
    "before the incident), caption_after (cause and outcome of the "
    "incident).";

constexpr const char* kStage3Retry =
    "Your previous answer could not be parsed. Reply with exactly one JSON "
    "object with the fields listed above and nothing else.";

constexpr const char* kEnsembleSystem =
    "You consolidate several candidate incident reports about the same "
    "dashcam video into one accurate, fluent report.";

constexpr const char* kEnsembleUser =
    "Video {{video_id}}. {{candidate_count}} candidate reports follow, one "
    "JSON object per line:\n{{candidates}}\n"
    "Rewrite them into a single coherent report. Keep facts the candidates "
    "agree on. Answer with one JSON object using the same fields.";

constexpr const char* kEnsembleRetry =
    "Your previous answer could not be parsed. Reply with exactly one JSON "
    "object with the report fields and nothing else.";

PromptTemplate make(std::string name, std::string text,
                    std::vector<std::string> vars) {
  return {std::move(name), std::move(text), std::move(vars)};
}

std::vector<PromptTemplate*> all(StagePrompts& p) {
  return {&p.stage1_system, &p.stage1_user,     &p.stage2_system,
          &p.stage2_user,   &p.stage3_system,   &p.stage3_user,
          &p.stage3_retry,  &p.ensemble_system, &p.ensemble_user,
          &p.ensemble_retry};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("prompt file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void StagePrompts::validate() const {
  for (auto* t : all(const_cast<StagePrompts&>(*this))) t->validate();
}

StagePrompts StagePrompts::defaults() {
  StagePrompts p;
  p.stage1_system = make("stage1_system", kStage1System, {});
  p.stage1_user =
      make("stage1_user", kStage1User, {"video_id", "frame_index", "gaze_note"});
  p.stage2_system = make("stage2_system", kStage2System, {});
  p.stage2_user = make("stage2_user", kStage2User,
                       {"video_id", "frame_count", "observations"});
  p.stage3_system = make("stage3_system", kStage3System, {});
  p.stage3_user = make("stage3_user", kStage3User,
                       {"video_id", "incident_frame", "frame_indices", "k", "t"});
  p.stage3_retry = make("stage3_retry", kStage3Retry, {});
  p.ensemble_system = make("ensemble_system", kEnsembleSystem, {});
  p.ensemble_user = make("ensemble_user", kEnsembleUser,
                         {"video_id", "candidate_count", "candidates"});
  p.ensemble_retry = make("ensemble_retry", kEnsembleRetry, {});
  return p;
}

StagePrompts StagePrompts::load(
    const std::filesystem::path& dir,
    const std::map<std::string, std::filesystem::path>& overrides) {
  StagePrompts p = defaults();
  auto templates = all(p);
  for (const auto& [key, path] : overrides) {
    auto it = std::find_if(templates.begin(), templates.end(),
                           [&](PromptTemplate* t) { return t->name == key; });
    if (it == templates.end()) {
      throw ConfigError("unknown prompt template '" + key + "'");
    }
  }
  for (auto* t : templates) {
    auto ov = overrides.find(t->name);
    if (ov != overrides.end()) {
      t->text = read_text(ov->second);
    } else if (!dir.empty()) {
      auto path = dir / (t->name + ".txt");
      std::error_code ec;
      if (std::filesystem::is_regular_file(path, ec)) t->text = read_text(path);
    }
  }
  p.validate();
  return p;
}

}  // namespace dashreport
