#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dashreport/report.hpp"

namespace dashreport {

struct MethodRun {
  std::string run_id;
  std::string label;  // evaluator-hidden
  std::map<std::string, IncidentReport> reports;  // by video_id
};

// One report per line; run_id defaults to the file stem. Duplicate video ids
// throw InvalidInputError.
MethodRun load_method_run(const std::filesystem::path& path,
                          std::string run_id = {}, std::string label = {});

// Plain-text rendering shown to evaluators. Omits provenance.
std::string render_report_text(const IncidentReport& report);

// On-screen choice: A is the left panel, B the right one.
enum class ScreenChoice { A, B, Tie };
// Run-space choice: A is the session's first run, B its second.
enum class RunChoice { A, B, Tie };

std::string_view to_string(ScreenChoice c);
std::string_view to_string(RunChoice c);
std::optional<ScreenChoice> parse_screen_choice(std::string_view s);
std::optional<RunChoice> parse_run_choice(std::string_view s);

// True when the session's first run is shown on the left for this
// (pair, evaluator).
bool first_run_on_left(std::uint64_t seed, int pair_id,
                       const std::string& evaluator_id);

RunChoice translate_choice(ScreenChoice on_screen, bool first_on_left);

struct PairPlan {
  int pair_id = 0;  // 1-based, by video_id
  std::string video_id;
};

struct Session {
  std::string session_id;
  std::vector<MethodRun> runs;  // exactly two
  std::vector<std::string> evaluators;
  std::uint64_t seed = 0;
  std::vector<PairPlan> pairs;
  std::map<std::string, std::vector<std::string>> excluded;  // run_id -> videos

  const PairPlan* find_pair(int pair_id) const;
  bool has_evaluator(const std::string& evaluator_id) const;
};

// Pairs the shared videos of two runs. Throws SessionError on anything but
// two distinct runs, an empty roster, or no shared video.
Session plan_session(std::string session_id, std::vector<MethodRun> runs,
                     std::vector<std::string> evaluators, std::uint64_t seed);

struct PairAssignment {
  int pair_id = 0;
  std::string left_text;
  std::string right_text;
  int done = 0;
  int total = 0;
};

struct VoteRecord {
  std::string session_id;
  int pair_id = 0;
  std::string evaluator_id;
  RunChoice choice = RunChoice::Tie;
  ScreenChoice screen_choice = ScreenChoice::Tie;
  bool first_on_left = true;
  std::string timestamp;  // ISO-8601 UTC
};

nlohmann::ordered_json vote_to_json(const VoteRecord& v);
VoteRecord vote_from_json(const nlohmann::json& doc);

enum class PairOutcome { A, B, Tie, NoVotes };

struct PairResult {
  int pair_id = 0;
  std::string video_id;
  int votes_a = 0;
  int votes_b = 0;
  int ties = 0;
  PairOutcome outcome = PairOutcome::NoVotes;
};

struct MethodStanding {
  std::string run_id;
  std::string label;
  int wins = 0;
  int rank = 0;
};

struct AggregateResult {
  std::vector<PairResult> pairs;
  std::vector<MethodStanding> ranking;  // by wins, descending
  int decided = 0;
  double sign_test_p = 1.0;
  bool significant = false;  // p < 0.05
};

// Strict majority over the votes of each pair (a tie vote counts towards
// the total), wins over decided pairs, two-sided sign test.
AggregateResult aggregate(const Session& session,
                          const std::vector<VoteRecord>& votes);

// Two-sided exact binomial test with p = 1/2.
double sign_test_p_value(int wins_a, int wins_b);

nlohmann::ordered_json aggregate_to_json(const Session& session,
                                         const AggregateResult& result);

// Sessions and votes persisted as append-only JSON lines under one
// directory (sessions.jsonl, votes.jsonl). Writes are serialized and
// fsynced; reads work on immutable snapshots.
class ScoringService {
 public:
  explicit ScoringService(std::filesystem::path store_dir);

  Session create_session(std::vector<MethodRun> runs,
                         std::vector<std::string> evaluators,
                         std::uint64_t seed);

  // nullopt once every pair has a vote from this evaluator. Throws
  // NotFoundError (session) or AuthError (evaluator not in roster).
  std::optional<PairAssignment> next_pair(const std::string& session_id,
                                          const std::string& evaluator_id) const;

  VoteRecord submit_vote(const std::string& session_id,
                         const std::string& evaluator_id, int pair_id,
                         ScreenChoice on_screen);

  AggregateResult results(const std::string& session_id) const;

  std::vector<std::string> session_ids() const;
  Session session(const std::string& session_id) const;
  std::vector<VoteRecord> votes(const std::string& session_id) const;

  // Per-evaluator tally of on-screen choices.
  std::map<std::string, int> evaluator_tally(const std::string& session_id,
                                             const std::string& evaluator_id) const;

  int voted_count(const std::string& session_id,
                  const std::string& evaluator_id) const;

 private:
  struct State {
    std::map<std::string, std::shared_ptr<const Session>> sessions;
    std::vector<std::string> order;
    // session -> (pair, evaluator) -> vote
    std::map<std::string, std::map<std::pair<int, std::string>, VoteRecord>> votes;
  };

  std::shared_ptr<const State> snapshot() const;
  void publish(std::shared_ptr<const State> next);
  void append_line(const std::filesystem::path& file, const std::string& line);
  void reload();

  std::filesystem::path dir_;
  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const State> state_;
  std::mutex write_mu_;
};

// Evaluator tokens plus the admin token, read from a JSON roster file:
//   {"admin_token": "...", "evaluators": {"<evaluator_id>": "<token>"}}
struct Roster {
  std::string admin_token;
  std::map<std::string, std::string> evaluator_tokens;

  static Roster load(const std::filesystem::path& path);
  static Roster from_json(const nlohmann::json& doc);
  std::vector<std::string> evaluator_ids() const;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path ui_dir;  // served at / when non-empty
};

// HTTP JSON API over a ScoringService:
//   POST /sessions                          admin
//   GET  /sessions/{s}/next?evaluator=...   evaluator
//   POST /sessions/{s}/votes                evaluator
//   GET  /sessions/{s}/results              admin
// Bearer tokens come from the roster. Runs are referenced by run_id.
class ScoringServer {
 public:
  ScoringServer(ScoringService& service, Roster roster,
                std::vector<MethodRun> runs);
  ~ScoringServer();

  ScoringServer(const ScoringServer&) = delete;
  ScoringServer& operator=(const ScoringServer&) = delete;

  // Binds host:port (port 0 picks a free one). Throws IoError when the port
  // is unavailable. Returns the bound port.
  int bind(const ServerOptions& options);
  // Blocks until stop().
  void listen();
  // Returns once listen() is accepting connections on another thread.
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dashreport
