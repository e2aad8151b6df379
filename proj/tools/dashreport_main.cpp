// dashreport: pipeline, ensemble, evaluate and serve entry points.

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dashreport/commands.hpp"

int main(int argc, char** argv) {
  using namespace dashreport;

  CLI::App app{"Dashcam incident report generation and evaluation"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  PipelineOptions pipeline;
  auto* pipe = app.add_subcommand("pipeline", "Generate candidate reports per video");
  pipe->add_option("--config", pipeline.config, "Experiment config (TOML)")->required();
  pipe->add_option("--videos", pipeline.videos, "Directory of videos")->required();
  pipe->add_option("--out", pipeline.out, "Output directory")->required();
  pipe->add_option("--gaze-dir", pipeline.gaze_dir, "Gaze heatmaps: <dir>/<video>/<frame>.png");
  pipe->add_option("--scripted", pipeline.scripted, "Scripted response fixture directory");
  pipe->add_option("--parallel", pipeline.parallel, "Videos processed concurrently")
      ->check(CLI::PositiveNumber);

  EnsembleOptions ens;
  auto* ensemble = app.add_subcommand("ensemble", "Merge candidates into final reports");
  ensemble->add_option("--manifest", ens.manifest, "manifest.json from pipeline")->required();
  ensemble->add_option("--out", ens.out, "Submission .jsonl (CSV written beside it)")->required();
  ensemble->add_option("--scripted", ens.scripted, "Scripted response fixture directory");
  ensemble->add_option("--parallel", ens.parallel, "Videos processed concurrently")
      ->check(CLI::PositiveNumber);

  EvaluateOptions eval;
  auto* evaluate = app.add_subcommand("evaluate", "Score a submission against references");
  evaluate->add_option("--submission", eval.submission, "Submission .jsonl")->required();
  evaluate->add_option("--references", eval.references, "Reference reports .jsonl")->required();
  evaluate->add_option("--spice", eval.spice, "SPICE sidecar JSON");
  evaluate->add_option("--out", eval.out, "Write metric details as JSON");
  evaluate->add_option("--name", eval.name, "Leaderboard row name");

  ServeOptions serve_opts;
  std::vector<std::string> run_files;
  auto* serve = app.add_subcommand("serve", "Blind A/B scoring service");
  serve->add_option("--out", serve_opts.store, "Vote store directory")->required();
  serve->add_option("--roster", serve_opts.roster, "Roster JSON with tokens")->required();
  serve->add_option("--port", serve_opts.port, "Port (0 picks a free one)");
  serve->add_option("--host", serve_opts.host, "Bind address");
  serve->add_option("--seed", serve_opts.seed, "Presentation-order seed");
  serve->add_option("--ui", serve_opts.ui_dir, "Static UI bundle directory");
  serve->add_option("runs", run_files, "Two run files (.jsonl)")->expected(2)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("dashreport"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  if (*pipe) return cmd_pipeline(pipeline, std::cout, std::cerr);
  if (*ensemble) return cmd_ensemble(ens, std::cout, std::cerr);
  if (*evaluate) return cmd_evaluate(eval, std::cout, std::cerr);
  for (const auto& f : run_files) serve_opts.runs.emplace_back(f);
  return cmd_serve(serve_opts, std::cout, std::cerr);
}
