#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dashreport/image.hpp"
#include "dashreport/report.hpp"

namespace dashreport {

// Anything that can hand out decoded frames by index.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  // One image per index, in request order. Throws InvalidInputError for an
  // index past the end and IoError when decoding fails.
  virtual std::vector<Image> extract_frames(
      std::span<const FrameIndex> indices) = 0;
};

struct VideoMeta {
  std::string video_id;
  FrameIndex frame_count = 0;
  double fps = kNominalFps;
  std::shared_ptr<FrameSource> frame_source;
};

struct ComposedFrame {
  FrameIndex frame_index = 0;
  Image image;
  bool has_gaze = false;
};

// Last frame of each consecutive k-frame segment (0-based), including a
// trailing partial segment.
std::vector<FrameIndex> sample_reference_frames(FrameIndex frame_count, int k);
std::vector<FrameIndex> sample_reference_frames(const VideoMeta& meta, int k);

// {i + m*k : -t <= m <= t} restricted to [0, frame_count), ascending.
// Out-of-range members are dropped, never clamped.
std::vector<FrameIndex> frame_set(FrameIndex i, int k, int t,
                                  FrameIndex frame_count);
std::vector<FrameIndex> frame_set(FrameIndex i, const SamplingConfig& cfg,
                                  FrameIndex frame_count);

// Stacks the heatmap (resampled to the frame size) under the frame.
ComposedFrame compose_gaze_frame(FrameIndex frame_index, const Image& frame,
                                 const std::optional<Image>& heatmap);

// `<gaze_dir>/<video_id>/<frame_index>.png`, or nullopt when the file is
// absent.
std::optional<Image> load_gaze_heatmap(const std::filesystem::path& gaze_dir,
                                       const std::string& video_id,
                                       FrameIndex frame_index);

// External decoder command line, e.g. {"python3", "frame_decoder.py"}.
// Protocol:
//   <cmd> probe <video>              -> JSON {frame_count, fps, width, height}
//   <cmd> extract <video> <i,j,...>  -> concatenated binary PPM on stdout
struct DecoderCommand {
  std::vector<std::string> argv;

  // Whitespace-separated words; double quotes group words with spaces.
  static DecoderCommand from_string(const std::string& command_line);
  static DecoderCommand default_command();
};

struct ProbeResult {
  FrameIndex frame_count = 0;
  double fps = kNominalFps;
  int width = 0;
  int height = 0;
};

ProbeResult probe_video(const std::filesystem::path& video,
                        const DecoderCommand& decoder);

std::vector<Image> extract_frames(const std::filesystem::path& video,
                                  std::span<const FrameIndex> indices,
                                  const DecoderCommand& decoder);

// Frame source backed by the external decoder.
class DecodedVideo : public FrameSource {
 public:
  DecodedVideo(std::filesystem::path path, DecoderCommand decoder,
               FrameIndex frame_count);

  std::vector<Image> extract_frames(
      std::span<const FrameIndex> indices) override;

 private:
  std::filesystem::path path_;
  DecoderCommand decoder_;
  FrameIndex frame_count_;
};

// Probes `path` and returns metadata with a decoder-backed frame source.
// video_id is the file stem.
VideoMeta open_video(const std::filesystem::path& path,
                     const DecoderCommand& decoder);

// Memoizing wrapper; misses are fetched in one batch per call.
class CachedFrameSource : public FrameSource {
 public:
  explicit CachedFrameSource(std::shared_ptr<FrameSource> inner);

  std::vector<Image> extract_frames(
      std::span<const FrameIndex> indices) override;

 private:
  std::shared_ptr<FrameSource> inner_;
  std::mutex mutex_;
  std::map<FrameIndex, Image> cache_;
};

}  // namespace dashreport
