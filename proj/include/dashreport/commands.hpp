#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dashreport {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // some inputs failed; see stderr
inline constexpr int kExitUsage = 2;    // config / usage / startup error

struct PipelineOptions {
  std::filesystem::path config;
  std::filesystem::path videos;  // directory of video files
  std::filesystem::path out;
  std::filesystem::path gaze_dir;
  std::filesystem::path scripted;  // fixture dir; empty = HTTP endpoints
  int parallel = 4;                // videos processed concurrently
};

// Writes <out>/candidates/<video_id>.jsonl per video and <out>/manifest.json.
int cmd_pipeline(const PipelineOptions& opts, std::ostream& out, std::ostream& err);

struct EnsembleOptions {
  std::filesystem::path manifest;
  std::filesystem::path out;       // submission .jsonl; CSV written beside it
  std::filesystem::path scripted;  // overrides the manifest's fixture dir
  int parallel = 4;
};

int cmd_ensemble(const EnsembleOptions& opts, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
  std::filesystem::path submission;
  std::filesystem::path references;
  std::filesystem::path spice;  // optional sidecar
  std::filesystem::path out;    // optional metrics JSON
  std::string name;             // leaderboard row name; default file stem
};

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err);

struct ServeOptions {
  std::filesystem::path store;
  std::vector<std::filesystem::path> runs;  // exactly two run files
  std::filesystem::path roster;
  std::filesystem::path ui_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::uint64_t seed = 0;
};

// Blocks until SIGTERM or SIGINT, then returns kExitOk. Prints
// "listening on <host>:<port>" once the socket is bound.
int cmd_serve(const ServeOptions& opts, std::ostream& out, std::ostream& err);

// RFC 4180 field quoting.
std::string csv_field(const std::string& value);

}  // namespace dashreport
