#include "support.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dashreport/error.hpp"

extern char** environ;

namespace testing {

namespace fs = std::filesystem;

fs::path fixtures() { return DASHREPORT_FIXTURES; }
fs::path cli_path() { return DASHREPORT_CLI; }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) +
           "-" + std::to_string(rd() % 100000));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

SyntheticSource::SyntheticSource(dashreport::FrameIndex frame_count, int width,
                                 int height, std::set<dashreport::FrameIndex> broken)
    : frame_count_(frame_count), width_(width), height_(height), broken_(std::move(broken)) {}

std::vector<dashreport::Image> SyntheticSource::extract_frames(
    std::span<const dashreport::FrameIndex> indices) {
  ++batches_;
  std::vector<dashreport::Image> out;
  for (auto i : indices) {
    if (i < 0 || i >= frame_count_) {
      throw dashreport::InvalidInputError("frame " + std::to_string(i) + " out of range");
    }
    if (broken_.contains(i)) {
      throw dashreport::IoError("frame " + std::to_string(i) + " cannot be decoded");
    }
    dashreport::Image img(width_, height_);
    for (std::size_t p = 0; p < img.pixels.size(); p += 3) {
      img.pixels[p] = static_cast<std::uint8_t>(i * 7);
      img.pixels[p + 1] = static_cast<std::uint8_t>(i * 13);
      img.pixels[p + 2] = static_cast<std::uint8_t>(255 - i);
    }
    out.push_back(std::move(img));
  }
  return out;
}

dashreport::VideoMeta synthetic_video(const std::string& id,
                                      dashreport::FrameIndex frame_count,
                                      std::set<dashreport::FrameIndex> broken) {
  dashreport::VideoMeta meta;
  meta.video_id = id;
  meta.frame_count = frame_count;
  meta.frame_source = std::make_shared<SyntheticSource>(frame_count, 8, 6, std::move(broken));
  return meta;
}

dashreport::IncidentReport sample_report(const std::string& video_id) {
  dashreport::IncidentReport r;
  r.video_id = video_id;
  r.event_type = dashreport::EventType::Accident;
  r.crash_severity = 3;
  r.ego_involved = true;
  r.entity_counts[dashreport::EntityKind::Vehicle] = 2;
  r.entity_counts[dashreport::EntityKind::Pedestrian] = 1;
  r.time_to_incident_frames = 45;
  r.caption_before = "A car drifts into the ego lane.";
  r.caption_after = "The car hits the ego vehicle's front bumper.";
  r.provenance = "(GLM-4.5V,k=6,t=8)";
  return r;
}

ChildProcess::ChildProcess(const std::vector<std::string>& argv, bool merge_stderr) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], 1);
  if (merge_stderr) posix_spawn_file_actions_adddup2(&actions, fds[1], 2);
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  int rc = posix_spawn(&pid_, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw std::runtime_error("spawn failed: " + argv[0]);
  }
  out_fd_ = fds[0];
}

ChildProcess::~ChildProcess() {
  if (!reaped_ && pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  if (out_fd_ >= 0) ::close(out_fd_);
}

std::string ChildProcess::wait_for_line(const std::string& needle) {
  for (;;) {
    std::size_t nl;
    while ((nl = buffer_.find('\n')) != std::string::npos) {
      auto line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (line.find(needle) != std::string::npos) return line;
    }
    char buf[4096];
    auto n = ::read(out_fd_, buf, sizeof buf);
    if (n <= 0) return {};
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

void ChildProcess::signal(int sig) { ::kill(pid_, sig); }

int ChildProcess::wait() {
  if (!reaped_) {
    ::waitpid(pid_, &status_, 0);
    reaped_ = true;
  }
  if (WIFEXITED(status_)) return WEXITSTATUS(status_);
  return 128 + WTERMSIG(status_);
}

}  // namespace testing
