// Helpers shared by the unit and acceptance tests.
#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dashreport/report.hpp"
#include "dashreport/video.hpp"

namespace testing {

std::filesystem::path fixtures();
std::filesystem::path cli_path();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dashreport");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

// In-memory video: frame i is a solid color derived from i.
class SyntheticSource : public dashreport::FrameSource {
 public:
  SyntheticSource(dashreport::FrameIndex frame_count, int width = 8, int height = 6,
                  std::set<dashreport::FrameIndex> broken = {});

  std::vector<dashreport::Image> extract_frames(
      std::span<const dashreport::FrameIndex> indices) override;

  int batches() const { return batches_; }

 private:
  dashreport::FrameIndex frame_count_;
  int width_, height_;
  std::set<dashreport::FrameIndex> broken_;
  int batches_ = 0;
};

dashreport::VideoMeta synthetic_video(const std::string& id,
                                      dashreport::FrameIndex frame_count,
                                      std::set<dashreport::FrameIndex> broken = {});

dashreport::IncidentReport sample_report(const std::string& video_id = "v1");

// A child process with captured stdout (and stderr when merged); killed on
// destruction if running.
class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& argv, bool merge_stderr = false);
  ~ChildProcess();

  // Reads stdout until a line containing `needle` appears; returns the line
  // or "" on EOF.
  std::string wait_for_line(const std::string& needle);
  void signal(int sig);
  int wait();  // exit code, or 128 + signal

 private:
  int pid_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  bool reaped_ = false;
  int status_ = 0;
};

}  // namespace testing
