#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dashreport {

// Plain text with `{{name}}` placeholders.
struct PromptTemplate {
  std::string name;
  std::string text;
  std::vector<std::string> variables;  // declared variables

  // Throws ConfigError if a declared variable is missing from the text or
  // the text uses an undeclared one.
  void validate() const;
  std::string render(const std::map<std::string, std::string>& values) const;
};

// Placeholder names used in `text`, in order of first appearance.
std::vector<std::string> template_placeholders(const std::string& text);

struct StagePrompts {
  PromptTemplate stage1_system;
  PromptTemplate stage1_user;  // video_id, frame_index, gaze_note
  PromptTemplate stage2_system;
  PromptTemplate stage2_user;  // video_id, frame_count, observations
  PromptTemplate stage3_system;
  PromptTemplate stage3_user;  // video_id, incident_frame, frame_indices, k, t
  PromptTemplate stage3_retry;
  PromptTemplate ensemble_system;
  PromptTemplate ensemble_user;  // video_id, candidate_count, candidates
  PromptTemplate ensemble_retry;

  void validate() const;

  static StagePrompts defaults();
  // Reads `<key>.txt` files from `dir` for each template present; templates
  // without a file keep their default text. `overrides` maps template key to
  // an explicit path and must exist.
  static StagePrompts load(const std::filesystem::path& dir,
                           const std::map<std::string, std::filesystem::path>&
                               overrides = {});
};

}  // namespace dashreport
