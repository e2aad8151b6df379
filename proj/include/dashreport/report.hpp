#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dashreport {

using FrameIndex = std::int64_t;

inline constexpr int kMaxSeverity = 4;
inline constexpr double kNominalFps = 30.0;

enum class EventType { Hazard, Accident, NoIncident };

enum class EntityKind { Vehicle, Pedestrian, CyclistOrScooter, Animal };

inline constexpr std::array<EntityKind, 4> kEntityKinds = {
    EntityKind::Vehicle, EntityKind::Pedestrian, EntityKind::CyclistOrScooter,
    EntityKind::Animal};

enum class HazardCategory {
  Vehicle,
  Pedestrian,
  CyclistOrScooter,
  Animal,
  DebrisOrOther
};

std::string_view to_string(EventType e);
std::string_view to_string(EntityKind e);
std::string_view to_string(HazardCategory c);
std::optional<EventType> parse_event_type(std::string_view s);
std::optional<EntityKind> parse_entity_kind(std::string_view s);
std::optional<HazardCategory> parse_hazard_category(std::string_view s);

using EntityCounts = std::map<EntityKind, std::int64_t>;

EntityCounts zero_entity_counts();

struct IncidentReport {
  std::string video_id;
  EventType event_type = EventType::NoIncident;
  int crash_severity = 0;
  bool ego_involved = false;
  EntityCounts entity_counts = zero_entity_counts();
  std::optional<FrameIndex> time_to_incident_frames;
  std::string caption_before;
  std::string caption_after;
  // Identifies the generating configuration. Never shown to evaluators.
  std::string provenance;

  bool operator==(const IncidentReport&) const = default;
};

struct HazardNote {
  HazardCategory category = HazardCategory::DebrisOrOther;
  std::string description;

  bool operator==(const HazardNote&) const = default;
};

struct FrameObservation {
  FrameIndex frame_index = 0;
  std::string caption;
  std::vector<HazardNote> hazards;

  bool operator==(const FrameObservation&) const = default;
};

struct SamplingConfig {
  int k = 1;  // frame interval
  int t = 0;  // start/end offset, in multiples of k

  bool operator==(const SamplingConfig&) const = default;
};

enum class DetectionSource { Model, Fallback };

struct DetectionResult {
  FrameIndex incident_frame = 0;
  std::string rationale;
  DetectionSource source = DetectionSource::Model;
};

std::string_view to_string(DetectionSource s);

// Every invariant violation of `report`, each message starting with the
// offending field name. Empty when the report is well-formed.
std::vector<std::string> validate_report(const IncidentReport& report);

// Throws InvalidInputError unless k >= 1 and t >= 0.
void validate_sampling(const SamplingConfig& cfg);

nlohmann::ordered_json report_to_json(const IncidentReport& report);

// Canonical single-line document. Field order is fixed.
std::string serialize_report(const IncidentReport& report);

struct ParsedReport {
  IncidentReport report;
  std::vector<std::string> warnings;  // e.g. ignored unknown fields
};

// Throws ParseError naming the first malformed field (or the line of the
// first syntax error).
ParsedReport parse_report(std::string_view document);
ParsedReport report_from_json(const nlohmann::json& doc);

// Time-to-incident converted at the export boundary.
std::optional<double> time_to_incident_seconds(const IncidentReport& report,
                                               double fps);

}  // namespace dashreport
