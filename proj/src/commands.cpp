#include "dashreport/commands.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "dashreport/config.hpp"
#include "dashreport/ensemble.hpp"
#include "dashreport/error.hpp"
#include "dashreport/metrics.hpp"
#include "dashreport/parallel.hpp"
#include "dashreport/pipeline.hpp"
#include "dashreport/scoring.hpp"

namespace dashreport {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

long long elapsed_ms(Clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - since)
      .count();
}

std::shared_ptr<ChatBackend> make_backend(const fs::path& scripted) {
  if (!scripted.empty()) return ScriptedBackend::load(scripted);
  return std::make_shared<HttpChatBackend>();
}

bool is_video_file(const fs::path& p) {
  static const std::set<std::string> kExtensions = {".avi", ".mp4", ".mkv",
                                                    ".mov", ".webm"};
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return kExtensions.contains(ext);
}

std::vector<fs::path> list_videos(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("video directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_video_file(entry.path())) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<IncidentReport> read_reports(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<IncidentReport> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_report(line).report);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                           e.what(),
                       e.field(), line_no);
    }
  }
  return out;
}

}  // namespace

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// --- pipeline ---------------------------------------------------------------

int cmd_pipeline(const PipelineOptions& opts, std::ostream& out, std::ostream& err) {
  const auto started = Clock::now();
  ExperimentConfig cfg;
  std::shared_ptr<ChatBackend> backend;
  std::vector<fs::path> videos;
  try {
    cfg = load_experiment_config(opts.config);
    backend = make_backend(opts.scripted);
    videos = list_videos(opts.videos);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (videos.empty()) {
    err << "error: no video files in " << opts.videos.string() << '\n';
    return kExitUsage;
  }
  if (opts.parallel < 1) {
    err << "error: --parallel must be >= 1\n";
    return kExitUsage;
  }
  const auto decoder = cfg.decoder.value_or(DecoderCommand::default_command());

  ModelGateway gateway(backend);
  struct VideoOutcome {
    std::string video_id;
    fs::path path;
    std::optional<PipelineResult> result;
    std::string error;
    long long wall_ms = 0;
  };
  std::vector<VideoOutcome> outcomes(videos.size());
  fs::create_directories(opts.out / "candidates");

  parallel_for(videos.size(), opts.parallel, [&](std::size_t i) {
    auto& o = outcomes[i];
    o.path = videos[i];
    o.video_id = videos[i].stem().string();
    const auto t0 = Clock::now();
    try {
      auto meta = open_video(videos[i], decoder);
      auto result = run_pipeline(gateway, meta, cfg.run, opts.gaze_dir);
      if (result.candidates.empty()) {
        throw StageError("every stage-3 configuration failed");
      }
      std::string lines;
      for (const auto& c : result.candidates) lines += serialize_report(c) + "\n";
      write_file(opts.out / "candidates" / (o.video_id + ".jsonl"), lines);
      o.result = std::move(result);
    } catch (const std::exception& e) {
      o.error = e.what();
      spdlog::error("video {}: {}", o.video_id, o.error);
    }
    o.wall_ms = elapsed_ms(t0);
  });

  nlohmann::ordered_json manifest;
  manifest["config"] = {{"path", fs::absolute(opts.config).string()},
                        {"name", cfg.name},
                        {"text", cfg.source_text},
                        {"resolved", run_config_to_json(cfg.run)}};
  manifest["inputs"] = {
      {"videos", fs::absolute(opts.videos).string()},
      {"gaze_dir", opts.gaze_dir.empty() ? "" : fs::absolute(opts.gaze_dir).string()},
      {"scripted", opts.scripted.empty() ? "" : fs::absolute(opts.scripted).string()},
      {"parallel", opts.parallel}};
  auto entries = nlohmann::ordered_json::array();
  auto failures = nlohmann::ordered_json::array();
  auto timings = nlohmann::ordered_json::object();
  for (const auto& o : outcomes) {
    timings[o.video_id] = o.wall_ms;
    if (!o.result) {
      failures.push_back({{"video_id", o.video_id},
                          {"path", fs::absolute(o.path).string()},
                          {"error", o.error}});
      continue;
    }
    const auto& r = *o.result;
    auto grid_failures = nlohmann::ordered_json::array();
    for (const auto& f : r.failures) {
      grid_failures.push_back({{"provenance", f.provenance}, {"error", f.error}});
    }
    entries.push_back(
        {{"video_id", r.video_id},
         {"path", fs::absolute(o.path).string()},
         {"frame_count", r.frame_count},
         {"fps", r.fps},
         {"reference_frames", r.reference_frames.size()},
         {"incident_frame", r.detection.incident_frame},
         {"detection_source", to_string(r.detection.source)},
         {"candidates", "candidates/" + r.video_id + ".jsonl"},
         {"candidate_count", r.candidates.size()},
         {"grid_failures", std::move(grid_failures)},
         {"model_calls", r.model_calls}});
  }
  timings["total"] = elapsed_ms(started);
  manifest["videos"] = std::move(entries);
  manifest["failures"] = failures;
  manifest["timings_ms"] = std::move(timings);
  try {
    write_file(opts.out / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  out << "processed " << (videos.size() - failures.size()) << "/" << videos.size()
      << " videos; manifest " << (opts.out / "manifest.json").string() << '\n';
  if (!failures.empty()) {
    for (const auto& f : failures) {
      err << "failed: " << f["video_id"].get<std::string>() << ": "
          << f["error"].get<std::string>() << '\n';
    }
    return kExitFailure;
  }
  return kExitOk;
}

// --- ensemble ---------------------------------------------------------------

int cmd_ensemble(const EnsembleOptions& opts, std::ostream& out, std::ostream& err) {
  nlohmann::json manifest;
  ExperimentConfig cfg;
  std::shared_ptr<ChatBackend> backend;
  try {
    manifest = nlohmann::json::parse(read_file(opts.manifest));
    const auto& c = manifest.at("config");
    fs::path config_path = c.at("path").get<std::string>();
    cfg = config_from_toml(parse_toml(c.at("text").get<std::string>()),
                           config_path.parent_path());
    auto scripted = opts.scripted;
    if (scripted.empty()) {
      scripted = manifest.at("inputs").value("scripted", std::string());
    }
    backend = make_backend(scripted);
  } catch (const nlohmann::json::exception& e) {
    err << "error: manifest " << opts.manifest.string() << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const auto& videos = manifest["videos"];
  if (!videos.is_array() || videos.empty()) {
    err << "error: manifest lists no videos\n";
    return kExitUsage;
  }

  const auto base = opts.manifest.parent_path();
  ModelGateway gateway(backend);
  struct Final {
    std::string video_id;
    double fps = kNominalFps;
    std::optional<IncidentReport> report;
    std::string error;
  };
  std::vector<Final> finals(videos.size());
  parallel_for(videos.size(), opts.parallel, [&](std::size_t i) {
    auto& f = finals[i];
    try {
      const auto& v = videos[i];
      f.video_id = v.at("video_id").get<std::string>();
      f.fps = v.value("fps", kNominalFps);
      auto candidates = read_reports(base / v.at("candidates").get<std::string>());
      if (candidates.empty()) throw StageError("no candidates");
      EnsembleInput input{f.video_id, std::move(candidates), cfg.run.ensemble};
      auto outcome = ensemble(gateway, input, cfg.run.prompts);
      f.report = std::move(outcome.report);
    } catch (const std::exception& e) {
      f.error = e.what();
      spdlog::error("ensemble {}: {}", f.video_id, f.error);
    }
  });
  std::sort(finals.begin(), finals.end(),
            [](const Final& a, const Final& b) { return a.video_id < b.video_id; });

  std::string jsonl;
  std::ostringstream csv;
  csv << "video_id,event_type,crash_severity,ego_involved";
  for (auto kind : kEntityKinds) csv << ',' << to_string(kind);
  csv << ",time_to_incident_frames,time_to_incident_seconds,caption_before,"
         "caption_after\n";
  std::vector<std::string> failed;
  for (const auto& f : finals) {
    if (!f.report) {
      failed.push_back(f.video_id + ": " + f.error);
      continue;
    }
    const auto& r = *f.report;
    jsonl += serialize_report(r) + "\n";
    csv << csv_field(r.video_id) << ',' << to_string(r.event_type) << ','
        << r.crash_severity << ',' << (r.ego_involved ? "true" : "false");
    for (auto kind : kEntityKinds) {
      auto it = r.entity_counts.find(kind);
      csv << ',' << (it == r.entity_counts.end() ? 0 : it->second);
    }
    csv << ',';
    if (r.time_to_incident_frames) csv << *r.time_to_incident_frames;
    csv << ',';
    if (auto secs = time_to_incident_seconds(r, f.fps)) {
      csv << std::fixed << std::setprecision(3) << *secs << std::defaultfloat;
    }
    csv << ',' << csv_field(r.caption_before) << ',' << csv_field(r.caption_after)
        << '\n';
  }
  auto csv_path = opts.out;
  csv_path.replace_extension(".csv");
  try {
    write_file(opts.out, jsonl);
    write_file(csv_path, csv.str());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  out << "wrote " << (finals.size() - failed.size()) << " reports to "
      << opts.out.string() << " and " << csv_path.string() << '\n';
  if (!failed.empty()) {
    for (const auto& f : failed) err << "failed: " << f << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

// --- evaluate ---------------------------------------------------------------

namespace {

std::string fmt4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<IncidentReport> submission, references;
  std::optional<SpiceSidecar> sidecar;
  try {
    submission = read_reports(opts.submission);
    references = read_reports(opts.references);
    if (!opts.spice.empty()) sidecar = load_spice_sidecar(opts.spice);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::map<std::string, const IncidentReport*> submitted;
  for (const auto& r : submission) {
    if (!submitted.emplace(r.video_id, &r).second) {
      err << "error: duplicate video_id in submission: " << r.video_id << '\n';
      return kExitFailure;
    }
  }
  std::map<std::string, std::vector<const IncidentReport*>> refs;
  for (const auto& r : references) refs[r.video_id].push_back(&r);

  std::vector<std::string> orphans;
  for (const auto& [vid, _] : submitted) {
    if (!refs.contains(vid)) orphans.push_back(vid + " (no reference)");
  }
  for (const auto& [vid, _] : refs) {
    if (!submitted.contains(vid)) orphans.push_back(vid + " (not submitted)");
  }
  if (!orphans.empty()) {
    err << "error: video ids do not match:\n";
    for (const auto& o : orphans) err << "  " << o << '\n';
    return kExitFailure;
  }
  if (submitted.empty()) {
    err << "error: empty submission\n";
    return kExitFailure;
  }

  auto build = [&](auto&& text) {
    Corpus c;
    for (const auto& [vid, cand] : submitted) {
      CorpusItem item{vid, text(*cand), {}};
      for (const auto* r : refs[vid]) item.references.push_back(text(*r));
      c.items.push_back(std::move(item));
    }
    return c;
  };
  const std::vector<std::pair<std::string, Corpus>> corpora = {
      {"before", build([](const IncidentReport& r) { return r.caption_before; })},
      {"after", build([](const IncidentReport& r) { return r.caption_after; })},
      {"combined", build([](const IncidentReport& r) {
         return r.caption_before + " " + r.caption_after;
       })}};

  nlohmann::ordered_json doc;
  doc["items"] = submitted.size();
  auto corpus_json = nlohmann::ordered_json::object();
  out << std::left << std::setw(10) << "corpus" << std::setw(10) << "cider_d"
      << "meteor\n";
  double combined_cider = 0, combined_meteor = 0;
  for (const auto& [name, corpus] : corpora) {
    auto c = cider_d(corpus);
    auto m = meteor(corpus);
    out << std::setw(10) << name << std::setw(10) << fmt4(c.corpus) << fmt4(m.corpus)
        << '\n';
    corpus_json[name] = {{"cider_d", metric_scores_to_json(c)},
                         {"meteor", metric_scores_to_json(m)}};
    if (name == "combined") {
      combined_cider = c.corpus;
      combined_meteor = m.corpus;
    }
  }
  doc["corpora"] = std::move(corpus_json);

  std::optional<double> spice;
  if (sidecar) {
    double sum = 0;
    std::vector<std::string> missing;
    for (const auto& [vid, _] : submitted) {
      auto it = sidecar->per_item.find(vid);
      if (it == sidecar->per_item.end()) {
        missing.push_back(vid);
      } else {
        sum += it->second;
      }
    }
    if (missing.empty()) spice = sum / static_cast<double>(submitted.size());
    for (const auto& m : missing) err << "warning: no SPICE value for " << m << '\n';
    const auto& ov = sidecar->corpus_overrides;
    if (auto it = ov.find("spice"); it != ov.end()) spice = it->second;
    if (auto it = ov.find("meteor"); it != ov.end()) combined_meteor = it->second;
    if (auto it = ov.find("cider_d"); it != ov.end()) combined_cider = it->second;
  }

  const auto name = opts.name.empty() ? opts.submission.stem().string() : opts.name;
  nlohmann::ordered_json row;
  row["name"] = name;
  row["spice"] = spice ? nlohmann::ordered_json(*spice) : nlohmann::ordered_json();
  row["meteor"] = combined_meteor;
  row["cider_d"] = combined_cider;
  out << "leaderboard " << name << " spice=" << (spice ? fmt4(*spice) : "n/a")
      << " meteor=" << fmt4(combined_meteor) << " cider_d=" << fmt4(combined_cider);
  try {
    auto final = final_score(spice, combined_meteor, combined_cider);
    row["final_score"] = final;
    out << " final_score=" << fmt4(final) << '\n';
  } catch (const UndefinedScoreError&) {
    row["final_score"] = "n/a";
    out << " final_score=n/a\n";
  }
  doc["leaderboard_row"] = std::move(row);

  if (!opts.out.empty()) {
    try {
      write_file(opts.out, doc.dump(2) + "\n");
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitOk;
}

// --- serve ------------------------------------------------------------------

int cmd_serve(const ServeOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.runs.size() != 2) {
    err << "error: serve takes exactly two run files\n";
    return kExitUsage;
  }
  std::unique_ptr<ScoringService> service;
  std::unique_ptr<ScoringServer> server;
  int port = 0;
  try {
    auto roster = Roster::load(opts.roster);
    std::vector<MethodRun> runs;
    for (const auto& p : opts.runs) runs.push_back(load_method_run(p));
    service = std::make_unique<ScoringService>(opts.store);
    if (service->session_ids().empty()) {
      auto s = service->create_session(runs, roster.evaluator_ids(), opts.seed);
      out << "created session " << s.session_id << " with " << s.pairs.size()
          << " pairs\n";
      for (const auto& [run_id, vids] : s.excluded) {
        err << "warning: run " << run_id << " has videos missing from the other run:";
        for (const auto& v : vids) err << ' ' << v;
        err << '\n';
      }
    } else {
      out << "resuming " << service->session_ids().size() << " session(s)\n";
    }
    server = std::make_unique<ScoringServer>(*service, std::move(roster), std::move(runs));
    port = server->bind({opts.host, opts.port, opts.ui_dir});
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGTERM);
  sigaddset(&stop_signals, SIGINT);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &stop_signals, &previous);

  std::thread listener([&] { server->listen(); });
  server->wait_until_ready();
  out << "listening on " << opts.host << ":" << port << std::endl;
  int sig = 0;
  sigwait(&stop_signals, &sig);
  server->stop();
  listener.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  out << "stopped on signal " << sig << std::endl;
  return kExitOk;
}

}  // namespace dashreport
