#include "dashreport/video.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dashreport/error.hpp"
#include "subprocess.hpp"

#ifndef DASHREPORT_DECODER_SCRIPT
#define DASHREPORT_DECODER_SCRIPT "frame_decoder.py"
#endif

namespace dashreport {

std::vector<FrameIndex> sample_reference_frames(FrameIndex frame_count, int k) {
  if (frame_count <= 0) {
    throw InvalidInputError("sample_reference_frames: frame_count must be >= 1");
  }
  if (k < 1) {
    throw InvalidInputError("sample_reference_frames: k must be >= 1");
  }
  std::vector<FrameIndex> frames;
  frames.reserve(static_cast<std::size_t>((frame_count + k - 1) / k));
  for (FrameIndex last = k - 1; last < frame_count; last += k) {
    frames.push_back(last);
  }
  if (frames.empty() || frames.back() != frame_count - 1) {
    frames.push_back(frame_count - 1);
  }
  return frames;
}

std::vector<FrameIndex> sample_reference_frames(const VideoMeta& meta, int k) {
  return sample_reference_frames(meta.frame_count, k);
}

std::vector<FrameIndex> frame_set(FrameIndex i, int k, int t,
                                  FrameIndex frame_count) {
  validate_sampling({k, t});
  if (i < 0 || i >= frame_count) {
    throw InvalidInputError("frame_set: anchor " + std::to_string(i) +
                            " outside [0, " + std::to_string(frame_count) +
                            ")");
  }
  std::vector<FrameIndex> frames;
  frames.reserve(static_cast<std::size_t>(2 * t + 1));
  for (FrameIndex m = -t; m <= t; ++m) {
    FrameIndex f = i + m * k;
    if (f >= 0 && f < frame_count) frames.push_back(f);
  }
  return frames;
}

std::vector<FrameIndex> frame_set(FrameIndex i, const SamplingConfig& cfg,
                                  FrameIndex frame_count) {
  return frame_set(i, cfg.k, cfg.t, frame_count);
}

ComposedFrame compose_gaze_frame(FrameIndex frame_index, const Image& frame,
                                 const std::optional<Image>& heatmap) {
  if (frame.empty()) {
    throw InvalidInputError("compose_gaze_frame: empty frame");
  }
  if (!heatmap) return {frame_index, frame, false};
  if (heatmap->empty()) {
    throw InvalidInputError("compose_gaze_frame: zero-dimension heatmap");
  }
  Image resized = resize_bilinear(*heatmap, frame.width, frame.height);
  return {frame_index, stack_vertical(frame, resized), true};
}

std::optional<Image> load_gaze_heatmap(const std::filesystem::path& gaze_dir,
                                       const std::string& video_id,
                                       FrameIndex frame_index) {
  if (gaze_dir.empty()) return std::nullopt;
  auto path = gaze_dir / video_id / (std::to_string(frame_index) + ".png");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  return read_png_file(path);
}

DecoderCommand DecoderCommand::from_string(const std::string& command_line) {
  DecoderCommand cmd;
  std::istringstream in(command_line);
  std::string word;
  while (in >> std::quoted(word)) cmd.argv.push_back(word);
  if (cmd.argv.empty()) throw ConfigError("decoder command is empty");
  return cmd;
}

DecoderCommand DecoderCommand::default_command() {
  return {{"python3", DASHREPORT_DECODER_SCRIPT}};
}

namespace {

std::vector<std::string> with_args(const DecoderCommand& decoder,
                                   std::initializer_list<std::string> extra) {
  auto argv = decoder.argv;
  argv.insert(argv.end(), extra.begin(), extra.end());
  return argv;
}

std::string trim_diagnostics(const std::string& err) {
  constexpr std::size_t kMax = 2000;
  if (err.size() <= kMax) return err;
  return "..." + err.substr(err.size() - kMax);
}

}  // namespace

ProbeResult probe_video(const std::filesystem::path& video,
                        const DecoderCommand& decoder) {
  auto result = detail::run_process(with_args(decoder, {"probe", video.string()}));
  if (result.exit_code != 0) {
    throw IoError("decoder probe failed for " + video.string() + " (exit " +
                  std::to_string(result.exit_code) +
                  "): " + trim_diagnostics(result.err));
  }
  try {
    auto doc = nlohmann::json::parse(result.out.begin(), result.out.end());
    ProbeResult probe;
    probe.frame_count = doc.at("frame_count").get<FrameIndex>();
    probe.fps = doc.value("fps", kNominalFps);
    probe.width = doc.value("width", 0);
    probe.height = doc.value("height", 0);
    if (probe.frame_count < 1) {
      throw IoError("decoder reported no frames for " + video.string());
    }
    if (!(probe.fps > 0)) probe.fps = kNominalFps;
    return probe;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("decoder probe output unreadable for " + video.string() +
                  ": " + e.what());
  }
}

std::vector<Image> extract_frames(const std::filesystem::path& video,
                                  std::span<const FrameIndex> indices,
                                  const DecoderCommand& decoder) {
  if (indices.empty()) return {};
  std::string list;
  for (auto i : indices) {
    if (i < 0) {
      throw InvalidInputError("extract_frames: negative index " +
                              std::to_string(i));
    }
    if (!list.empty()) list += ',';
    list += std::to_string(i);
  }
  auto result =
      detail::run_process(with_args(decoder, {"extract", video.string(), list}));
  if (result.exit_code == 3) {
    throw InvalidInputError("extract_frames: " + trim_diagnostics(result.err));
  }
  if (result.exit_code != 0) {
    throw IoError("decoder failed for " + video.string() + " (exit " +
                  std::to_string(result.exit_code) +
                  "): " + trim_diagnostics(result.err));
  }
  std::vector<Image> frames;
  frames.reserve(indices.size());
  std::size_t offset = 0;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    frames.push_back(read_ppm(result.out, offset));
  }
  return frames;
}

DecodedVideo::DecodedVideo(std::filesystem::path path, DecoderCommand decoder,
                           FrameIndex frame_count)
    : path_(std::move(path)),
      decoder_(std::move(decoder)),
      frame_count_(frame_count) {}

std::vector<Image> DecodedVideo::extract_frames(
    std::span<const FrameIndex> indices) {
  for (auto i : indices) {
    if (i < 0 || i >= frame_count_) {
      throw InvalidInputError("extract_frames: index " + std::to_string(i) +
                              " outside a " + std::to_string(frame_count_) +
                              "-frame video");
    }
  }
  return dashreport::extract_frames(path_, indices, decoder_);
}

VideoMeta open_video(const std::filesystem::path& path,
                     const DecoderCommand& decoder) {
  auto probe = probe_video(path, decoder);
  VideoMeta meta;
  meta.video_id = path.stem().string();
  meta.frame_count = probe.frame_count;
  meta.fps = probe.fps;
  meta.frame_source =
      std::make_shared<DecodedVideo>(path, decoder, probe.frame_count);
  return meta;
}

CachedFrameSource::CachedFrameSource(std::shared_ptr<FrameSource> inner)
    : inner_(std::move(inner)) {}

std::vector<Image> CachedFrameSource::extract_frames(
    std::span<const FrameIndex> indices) {
  std::lock_guard lock(mutex_);
  std::vector<FrameIndex> missing;
  for (auto i : indices) {
    if (!cache_.contains(i) &&
        std::find(missing.begin(), missing.end(), i) == missing.end()) {
      missing.push_back(i);
    }
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    auto fetched = inner_->extract_frames(missing);
    for (std::size_t n = 0; n < missing.size(); ++n) {
      cache_.emplace(missing[n], std::move(fetched[n]));
    }
  }
  std::vector<Image> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(cache_.at(i));
  return out;
}

}  // namespace dashreport
