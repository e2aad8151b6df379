#include "dashreport/report.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "dashreport/error.hpp"

namespace dashreport {

namespace {

constexpr std::array<std::string_view, 9> kReportFields = {
    "video_id",         "event_type",   "crash_severity",
    "ego_involved",     "entity_counts", "time_to_incident_frames",
    "caption_before",   "caption_after", "provenance"};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

const nlohmann::json& require(const nlohmann::json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) {
    throw ParseError(std::string(field) + ": missing required field", field);
  }
  return *it;
}

std::string require_string(const nlohmann::json& doc, const char* field) {
  const auto& v = require(doc, field);
  if (!v.is_string()) {
    throw ParseError(std::string(field) + ": expected a string", field);
  }
  return v.get<std::string>();
}

std::int64_t require_integer(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number_integer()) {
    throw ParseError(field + ": expected an integer", field);
  }
  return v.get<std::int64_t>();
}

}  // namespace

std::string_view to_string(EventType e) {
  switch (e) {
    case EventType::Hazard:
      return "hazard";
    case EventType::Accident:
      return "accident";
    case EventType::NoIncident:
      return "no_incident";
  }
  return "no_incident";
}

std::string_view to_string(EntityKind e) {
  switch (e) {
    case EntityKind::Vehicle:
      return "vehicles";
    case EntityKind::Pedestrian:
      return "pedestrians";
    case EntityKind::CyclistOrScooter:
      return "cyclists_or_scooters";
    case EntityKind::Animal:
      return "animals";
  }
  return "vehicles";
}

std::string_view to_string(HazardCategory c) {
  switch (c) {
    case HazardCategory::Vehicle:
      return "vehicle";
    case HazardCategory::Pedestrian:
      return "pedestrian";
    case HazardCategory::CyclistOrScooter:
      return "cyclist_or_scooter";
    case HazardCategory::Animal:
      return "animal";
    case HazardCategory::DebrisOrOther:
      return "debris_or_other";
  }
  return "debris_or_other";
}

std::string_view to_string(DetectionSource s) {
  return s == DetectionSource::Model ? "model" : "fallback";
}

std::optional<EventType> parse_event_type(std::string_view s) {
  for (auto e : {EventType::Hazard, EventType::Accident, EventType::NoIncident}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  for (auto k : kEntityKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<HazardCategory> parse_hazard_category(std::string_view s) {
  for (auto c : {HazardCategory::Vehicle, HazardCategory::Pedestrian,
                 HazardCategory::CyclistOrScooter, HazardCategory::Animal,
                 HazardCategory::DebrisOrOther}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

EntityCounts zero_entity_counts() {
  EntityCounts counts;
  for (auto k : kEntityKinds) counts[k] = 0;
  return counts;
}

std::vector<std::string> validate_report(const IncidentReport& report) {
  std::vector<std::string> violations;
  if (report.crash_severity < 0 || report.crash_severity > kMaxSeverity) {
    violations.push_back("crash_severity: " +
                         std::to_string(report.crash_severity) +
                         " outside 0.." + std::to_string(kMaxSeverity));
  }
  if (report.event_type == EventType::NoIncident) {
    if (report.time_to_incident_frames.has_value()) {
      violations.push_back(
          "time_to_incident_frames: must be absent when event_type is "
          "no_incident");
    }
    if (report.crash_severity != 0) {
      violations.push_back(
          "crash_severity: must be 0 when event_type is no_incident");
    }
  } else {
    if (is_blank(report.caption_before)) {
      violations.push_back("caption_before: empty");
    }
    if (is_blank(report.caption_after)) {
      violations.push_back("caption_after: empty");
    }
  }
  if (report.time_to_incident_frames && *report.time_to_incident_frames < 0) {
    violations.push_back("time_to_incident_frames: negative");
  }
  bool counts_ok = report.entity_counts.size() == kEntityKinds.size();
  for (auto k : kEntityKinds) {
    auto it = report.entity_counts.find(k);
    if (it == report.entity_counts.end()) {
      counts_ok = false;
    } else if (it->second < 0) {
      counts_ok = false;
    }
  }
  if (!counts_ok) {
    std::string missing;
    for (auto k : kEntityKinds) {
      if (!report.entity_counts.contains(k)) {
        missing += missing.empty() ? "" : ",";
        missing += to_string(k);
      }
    }
    violations.push_back(
        "entity_counts: " +
        (missing.empty() ? std::string("negative count")
                         : "missing keys " + missing));
  }
  return violations;
}

void validate_sampling(const SamplingConfig& cfg) {
  if (cfg.k < 1) {
    throw InvalidInputError("sampling: k must be >= 1, got " +
                            std::to_string(cfg.k));
  }
  if (cfg.t < 0) {
    throw InvalidInputError("sampling: t must be >= 0, got " +
                            std::to_string(cfg.t));
  }
}

nlohmann::ordered_json report_to_json(const IncidentReport& report) {
  nlohmann::ordered_json doc;
  doc["video_id"] = report.video_id;
  doc["event_type"] = to_string(report.event_type);
  doc["crash_severity"] = report.crash_severity;
  doc["ego_involved"] = report.ego_involved;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (auto k : kEntityKinds) {
    auto it = report.entity_counts.find(k);
    if (it != report.entity_counts.end()) counts[to_string(k)] = it->second;
  }
  doc["entity_counts"] = std::move(counts);
  if (report.time_to_incident_frames) {
    doc["time_to_incident_frames"] = *report.time_to_incident_frames;
  } else {
    doc["time_to_incident_frames"] = nullptr;
  }
  doc["caption_before"] = report.caption_before;
  doc["caption_after"] = report.caption_after;
  doc["provenance"] = report.provenance;
  return doc;
}

std::string serialize_report(const IncidentReport& report) {
  return report_to_json(report).dump();
}

ParsedReport report_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw ParseError("report: expected a JSON object", "");
  }
  ParsedReport out;
  IncidentReport& r = out.report;

  for (const auto& [key, value] : doc.items()) {
    if (std::find(kReportFields.begin(), kReportFields.end(), key) ==
        kReportFields.end()) {
      out.warnings.push_back("ignored unknown field '" + key + "'");
    }
  }

  r.video_id = require_string(doc, "video_id");

  auto event = require_string(doc, "event_type");
  auto parsed_event = parse_event_type(event);
  if (!parsed_event) {
    throw ParseError("event_type: unknown value '" + event +
                         "' (expected hazard, accident or no_incident)",
                     "event_type");
  }
  r.event_type = *parsed_event;

  auto severity = require_integer(require(doc, "crash_severity"), "crash_severity");
  if (severity < INT32_MIN || severity > INT32_MAX) {
    throw ParseError("crash_severity: out of integer range", "crash_severity");
  }
  r.crash_severity = static_cast<int>(severity);

  const auto& ego = require(doc, "ego_involved");
  if (!ego.is_boolean()) {
    throw ParseError("ego_involved: expected a boolean", "ego_involved");
  }
  r.ego_involved = ego.get<bool>();

  const auto& counts = require(doc, "entity_counts");
  if (!counts.is_object()) {
    throw ParseError("entity_counts: expected an object", "entity_counts");
  }
  r.entity_counts.clear();
  for (const auto& [key, value] : counts.items()) {
    auto kind = parse_entity_kind(key);
    if (!kind) {
      out.warnings.push_back("ignored unknown entity_counts key '" + key + "'");
      continue;
    }
    r.entity_counts[*kind] = require_integer(value, "entity_counts." + key);
  }

  auto tti = doc.find("time_to_incident_frames");
  if (tti != doc.end() && !tti->is_null()) {
    r.time_to_incident_frames =
        require_integer(*tti, "time_to_incident_frames");
  }

  r.caption_before = require_string(doc, "caption_before");
  r.caption_after = require_string(doc, "caption_after");

  auto prov = doc.find("provenance");
  if (prov != doc.end() && !prov->is_null()) {
    if (!prov->is_string()) {
      throw ParseError("provenance: expected a string", "provenance");
    }
    r.provenance = prov->get<std::string>();
  }
  return out;
}

ParsedReport parse_report(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document.begin(), document.end());
  } catch (const nlohmann::json::parse_error& e) {
    int line = line_of_offset(document, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("line " + std::to_string(line) + ": " + e.what(), "",
                     line);
  }
  auto parsed = report_from_json(doc);
  for (const auto& w : parsed.warnings) {
    spdlog::warn("report {}: {}", parsed.report.video_id, w);
  }
  return parsed;
}

std::optional<double> time_to_incident_seconds(const IncidentReport& report,
                                               double fps) {
  if (!report.time_to_incident_frames || fps <= 0.0) return std::nullopt;
  return static_cast<double>(*report.time_to_incident_frames) / fps;
}

}  // namespace dashreport
