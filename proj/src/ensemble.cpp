#include "dashreport/ensemble.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "dashreport/error.hpp"
#include "dashreport/pipeline.hpp"

namespace dashreport {

namespace {

void sort_by_provenance(std::vector<IncidentReport>& candidates) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const IncidentReport& a, const IncidentReport& b) {
                     return a.provenance < b.provenance;
                   });
}

// Value held by more than half of the candidates, if any.
template <typename T, typename Get>
std::optional<T> strict_majority(const std::vector<IncidentReport>& cands,
                                 Get get) {
  for (const auto& c : cands) {
    auto value = get(c);
    auto n = std::count_if(cands.begin(), cands.end(),
                           [&](const IncidentReport& o) { return get(o) == value; });
    if (2 * static_cast<std::size_t>(n) > cands.size()) return value;
  }
  return std::nullopt;
}

template <typename T, typename Get>
std::optional<T> unanimous(const std::vector<IncidentReport>& cands, Get get) {
  auto value = get(cands.front());
  for (const auto& c : cands) {
    if (!(get(c) == value)) return std::nullopt;
  }
  return value;
}

std::string describe(EventType e) { return std::string(to_string(e)); }
std::string describe(bool b) { return b ? "true" : "false"; }
std::string describe(int v) { return std::to_string(v); }
std::string describe(const std::optional<FrameIndex>& v) {
  return v ? std::to_string(*v) : "null";
}

template <typename T>
void force(T& field, const T& value, const char* name,
           std::vector<std::string>& overrides) {
  if (field == value) return;
  overrides.push_back(std::string(name) + ": model said " + describe(field) +
                      ", candidates say " + describe(value));
  field = value;
}

void enforce_candidates(IncidentReport& r,
                        const std::vector<IncidentReport>& cands,
                        std::vector<std::string>& overrides) {
  if (auto ev = strict_majority<EventType>(
          cands, [](const IncidentReport& c) { return c.event_type; })) {
    force(r.event_type, *ev, "event_type", overrides);
  }
  if (auto ego = strict_majority<bool>(
          cands, [](const IncidentReport& c) { return c.ego_involved; })) {
    force(r.ego_involved, *ego, "ego_involved", overrides);
  }
  if (auto sev = unanimous<int>(
          cands, [](const IncidentReport& c) { return c.crash_severity; })) {
    force(r.crash_severity, *sev, "crash_severity", overrides);
  }
  if (auto tti = unanimous<std::optional<FrameIndex>>(
          cands,
          [](const IncidentReport& c) { return c.time_to_incident_frames; })) {
    force(r.time_to_incident_frames, *tti, "time_to_incident_frames", overrides);
  }

  for (auto kind : kEntityKinds) {
    std::int64_t max_count = 0;
    for (const auto& c : cands) {
      auto it = c.entity_counts.find(kind);
      if (it != c.entity_counts.end()) max_count = std::max(max_count, it->second);
    }
    auto& value = r.entity_counts[kind];
    auto same = unanimous<std::int64_t>(cands, [kind](const IncidentReport& c) {
      auto it = c.entity_counts.find(kind);
      return it == c.entity_counts.end() ? std::int64_t{0} : it->second;
    });
    if (same && value != *same) {
      overrides.push_back("entity_counts." + std::string(to_string(kind)) +
                          ": model said " + std::to_string(value) +
                          ", candidates say " + std::to_string(*same));
      value = *same;
    } else if (value > max_count) {
      overrides.push_back("entity_counts." + std::string(to_string(kind)) +
                          ": " + std::to_string(value) +
                          " clamped to candidate maximum " +
                          std::to_string(max_count));
      value = max_count;
    }
  }

  if (r.event_type == EventType::NoIncident) {
    r.crash_severity = 0;
    r.time_to_incident_frames.reset();
  } else if (!r.time_to_incident_frames) {
    for (const auto& c : cands) {
      if (c.time_to_incident_frames) {
        r.time_to_incident_frames = c.time_to_incident_frames;
        break;
      }
    }
  }
}

}  // namespace

IncidentReport fallback_candidate(std::vector<IncidentReport> candidates) {
  if (candidates.empty()) {
    throw InvalidInputError("fallback_candidate: no candidates");
  }
  sort_by_provenance(candidates);

  // Plurality event type; the earliest-seen value wins ties.
  EventType mode = candidates.front().event_type;
  std::ptrdiff_t best = 0;
  for (const auto& c : candidates) {
    auto n = std::count_if(candidates.begin(), candidates.end(),
                           [&](const IncidentReport& o) {
                             return o.event_type == c.event_type;
                           });
    if (n > best) {
      best = n;
      mode = c.event_type;
    }
  }

  std::vector<int> severities;
  for (const auto& c : candidates) severities.push_back(c.crash_severity);
  std::sort(severities.begin(), severities.end());
  const int median = severities[(severities.size() - 1) / 2];

  for (const auto& c : candidates) {
    if (c.event_type == mode && c.crash_severity == median) return c;
  }
  for (const auto& c : candidates) {
    if (c.event_type == mode) return c;
  }
  return candidates.front();
}

EnsembleOutcome ensemble(ModelGateway& gateway, const EnsembleInput& input,
                         const StagePrompts& prompts) {
  if (input.candidates.empty()) {
    throw InvalidInputError("ensemble " + input.video_id + ": no candidates");
  }
  for (const auto& c : input.candidates) {
    if (c.video_id != input.video_id) {
      throw InvalidInputError("ensemble " + input.video_id +
                              ": candidate for video " + c.video_id);
    }
  }
  EnsembleOutcome outcome;
  if (input.candidates.size() == 1) {
    outcome.report = input.candidates.front();
    return outcome;
  }

  auto candidates = input.candidates;
  sort_by_provenance(candidates);
  std::string listing;
  for (const auto& c : candidates) listing += serialize_report(c) + "\n";

  const std::string provenance =
      "ensemble(" + std::to_string(candidates.size()) + " candidates)";
  for (int ordinal = 0; ordinal < 2; ++ordinal) {
    ChatRequest req;
    req.model_name = input.endpoint.model_name;
    req.system_prompt = prompts.ensemble_system.render({});
    req.decoding = input.endpoint.decoding;
    req.timeout = input.endpoint.timeout;
    req.key = {"ensemble", input.video_id, std::nullopt, ordinal, {}};
    req.user_parts.push_back(TextPart{prompts.ensemble_user.render(
        {{"video_id", input.video_id},
         {"candidate_count", std::to_string(candidates.size())},
         {"candidates", listing}})});
    if (ordinal > 0) {
      req.user_parts.push_back(TextPart{prompts.ensemble_retry.render({})});
    }

    outcome.model_called = true;
    ChatResponse response;
    try {
      response = gateway.complete(input.endpoint, req);
    } catch (const TransportError& e) {
      spdlog::warn("ensemble {}: {}; using fallback candidate", input.video_id,
                   e.what());
      break;
    } catch (const ProviderError& e) {
      spdlog::warn("ensemble {}: {}; using fallback candidate", input.video_id,
                   e.what());
      break;
    }
    try {
      auto doc = extract_structured(response.text, OutputSchema::Report);
      std::vector<std::string> corrections;
      outcome.report = report_from_model_output(doc, input.video_id, provenance,
                                                std::nullopt, corrections);
      enforce_candidates(outcome.report, candidates, outcome.overrides);
      for (const auto& o : outcome.overrides) {
        spdlog::info("ensemble {} override: {}", input.video_id, o);
      }
      return outcome;
    } catch (const ExtractionError& e) {
      spdlog::warn("ensemble {} attempt {}: {}", input.video_id, ordinal + 1,
                   e.what());
    }
  }

  outcome.fallback = true;
  outcome.report = fallback_candidate(candidates);
  return outcome;
}

}  // namespace dashreport
