#pragma once

#include <string>
#include <vector>

#include "dashreport/gateway.hpp"
#include "dashreport/prompts.hpp"
#include "dashreport/report.hpp"

namespace dashreport {

inline constexpr const char* kDefaultEnsembleModel = "Qwen3-Next-80B-A3B-Instruct";

struct EnsembleInput {
  std::string video_id;
  std::vector<IncidentReport> candidates;  // >= 1, all for video_id
  EndpointConfig endpoint;
};

struct EnsembleOutcome {
  IncidentReport report;
  bool model_called = false;
  bool fallback = false;
  std::vector<std::string> overrides;  // structured fields forced back
};

// Rewrites the candidates into one report with a text-only model. The model
// owns the prose; event_type and ego_involved follow a strict candidate
// majority, fields on which all candidates agree are kept, and entity
// counts never exceed the per-category candidate maximum.
EnsembleOutcome ensemble(ModelGateway& gateway, const EnsembleInput& input,
                         const StagePrompts& prompts);

// Candidate matching the majority event type and median severity; earliest
// provenance wins ties.
IncidentReport fallback_candidate(std::vector<IncidentReport> candidates);

}  // namespace dashreport
