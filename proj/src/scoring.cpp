#include "dashreport/scoring.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dashreport/error.hpp"

namespace dashreport {

// --- runs and rendering -----------------------------------------------------

MethodRun load_method_run(const std::filesystem::path& path, std::string run_id,
                          std::string label) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run file " + path.string());
  MethodRun run;
  run.run_id = run_id.empty() ? path.stem().string() : std::move(run_id);
  run.label = label.empty() ? run.run_id : std::move(label);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    IncidentReport report;
    try {
      report = parse_report(line).report;
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                           e.what(),
                       e.field(), line_no);
    }
    auto vid = report.video_id;
    if (!run.reports.emplace(vid, std::move(report)).second) {
      throw InvalidInputError(path.string() + ": duplicate video_id " + vid);
    }
  }
  return run;
}

std::string render_report_text(const IncidentReport& r) {
  std::ostringstream out;
  out << "Event: " << to_string(r.event_type) << '\n';
  out << "Severity: " << r.crash_severity << " / " << kMaxSeverity << '\n';
  out << "Ego vehicle involved: " << (r.ego_involved ? "yes" : "no") << '\n';
  out << "Entities:";
  bool first = true;
  for (auto kind : kEntityKinds) {
    auto it = r.entity_counts.find(kind);
    out << (first ? " " : ", ") << to_string(kind) << ' '
        << (it == r.entity_counts.end() ? 0 : it->second);
    first = false;
  }
  out << '\n';
  out << "Time to incident: ";
  if (r.time_to_incident_frames) {
    out << *r.time_to_incident_frames << " frames";
  } else {
    out << "n/a";
  }
  out << '\n';
  out << "Before: " << r.caption_before << '\n';
  out << "After: " << r.caption_after << '\n';
  return out.str();
}

// --- choices and orientation ------------------------------------------------

std::string_view to_string(ScreenChoice c) {
  switch (c) {
    case ScreenChoice::A: return "A";
    case ScreenChoice::B: return "B";
    case ScreenChoice::Tie: return "Tie";
  }
  return "Tie";
}

std::string_view to_string(RunChoice c) {
  switch (c) {
    case RunChoice::A: return "A";
    case RunChoice::B: return "B";
    case RunChoice::Tie: return "Tie";
  }
  return "Tie";
}

std::optional<ScreenChoice> parse_screen_choice(std::string_view s) {
  if (s == "A") return ScreenChoice::A;
  if (s == "B") return ScreenChoice::B;
  if (s == "Tie") return ScreenChoice::Tie;
  return std::nullopt;
}

std::optional<RunChoice> parse_run_choice(std::string_view s) {
  if (s == "A") return RunChoice::A;
  if (s == "B") return RunChoice::B;
  if (s == "Tie") return RunChoice::Tie;
  return std::nullopt;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

bool first_run_on_left(std::uint64_t seed, int pair_id,
                       const std::string& evaluator_id) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(pair_id));
  h = splitmix64(h ^ fnv1a(evaluator_id));
  return (h >> 63) == 0;
}

RunChoice translate_choice(ScreenChoice on_screen, bool first_on_left) {
  switch (on_screen) {
    case ScreenChoice::Tie:
      return RunChoice::Tie;
    case ScreenChoice::A:
      return first_on_left ? RunChoice::A : RunChoice::B;
    case ScreenChoice::B:
      return first_on_left ? RunChoice::B : RunChoice::A;
  }
  return RunChoice::Tie;
}

// --- sessions -----------------------------------------------------------------

const PairPlan* Session::find_pair(int pair_id) const {
  if (pair_id < 1 || pair_id > static_cast<int>(pairs.size())) return nullptr;
  return &pairs[static_cast<std::size_t>(pair_id - 1)];
}

bool Session::has_evaluator(const std::string& evaluator_id) const {
  return std::find(evaluators.begin(), evaluators.end(), evaluator_id) !=
         evaluators.end();
}

Session plan_session(std::string session_id, std::vector<MethodRun> runs,
                     std::vector<std::string> evaluators, std::uint64_t seed) {
  if (runs.size() != 2) {
    throw SessionError("a session compares exactly two runs, got " +
                       std::to_string(runs.size()));
  }
  if (runs[0].run_id == runs[1].run_id) {
    throw SessionError("both runs have run_id " + runs[0].run_id);
  }
  if (evaluators.empty()) throw SessionError("evaluator roster is empty");
  std::set<std::string> unique(evaluators.begin(), evaluators.end());
  if (unique.size() != evaluators.size()) {
    throw SessionError("evaluator roster has duplicates");
  }

  Session s;
  s.session_id = std::move(session_id);
  s.seed = seed;
  s.evaluators = std::move(evaluators);
  for (int side = 0; side < 2; ++side) {
    const auto& mine = runs[side].reports;
    const auto& other = runs[1 - side].reports;
    for (const auto& [vid, _] : mine) {
      if (!other.contains(vid)) s.excluded[runs[side].run_id].push_back(vid);
    }
  }
  for (const auto& [vid, _] : runs[0].reports) {
    if (runs[1].reports.contains(vid)) {
      s.pairs.push_back({static_cast<int>(s.pairs.size()) + 1, vid});
    }
  }
  if (s.pairs.empty()) {
    throw SessionError("runs " + runs[0].run_id + " and " + runs[1].run_id +
                       " share no video");
  }
  s.runs = std::move(runs);
  return s;
}

// --- votes ------------------------------------------------------------------

nlohmann::ordered_json vote_to_json(const VoteRecord& v) {
  nlohmann::ordered_json doc;
  doc["session_id"] = v.session_id;
  doc["pair_id"] = v.pair_id;
  doc["evaluator_id"] = v.evaluator_id;
  doc["choice"] = to_string(v.choice);
  doc["screen_choice"] = to_string(v.screen_choice);
  doc["orientation"] = v.first_on_left ? "A_left" : "B_left";
  doc["timestamp"] = v.timestamp;
  return doc;
}

VoteRecord vote_from_json(const nlohmann::json& doc) {
  VoteRecord v;
  v.session_id = doc.at("session_id").get<std::string>();
  v.pair_id = doc.at("pair_id").get<int>();
  v.evaluator_id = doc.at("evaluator_id").get<std::string>();
  auto choice = parse_run_choice(doc.at("choice").get<std::string>());
  auto screen = parse_screen_choice(doc.at("screen_choice").get<std::string>());
  if (!choice || !screen) throw ParseError("vote: bad choice value", "choice");
  v.choice = *choice;
  v.screen_choice = *screen;
  auto orientation = doc.at("orientation").get<std::string>();
  if (orientation != "A_left" && orientation != "B_left") {
    throw ParseError("vote: bad orientation " + orientation, "orientation");
  }
  v.first_on_left = orientation == "A_left";
  v.timestamp = doc.value("timestamp", "");
  return v;
}

// --- aggregation ------------------------------------------------------------

double sign_test_p_value(int wins_a, int wins_b) {
  const int n = wins_a + wins_b;
  if (n == 0) return 1.0;
  const int low = std::min(wins_a, wins_b);
  double tail = 0.0;
  for (int i = 0; i <= low; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                     std::lgamma(n - i + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

AggregateResult aggregate(const Session& session,
                          const std::vector<VoteRecord>& votes) {
  AggregateResult out;
  for (const auto& p : session.pairs) out.pairs.push_back({p.pair_id, p.video_id});
  for (const auto& v : votes) {
    if (v.session_id != session.session_id) continue;
    auto* pair = session.find_pair(v.pair_id);
    if (pair == nullptr) continue;
    auto& r = out.pairs[static_cast<std::size_t>(v.pair_id - 1)];
    switch (v.choice) {
      case RunChoice::A: ++r.votes_a; break;
      case RunChoice::B: ++r.votes_b; break;
      case RunChoice::Tie: ++r.ties; break;
    }
  }
  int wins_a = 0, wins_b = 0;
  for (auto& r : out.pairs) {
    const int total = r.votes_a + r.votes_b + r.ties;
    if (total == 0) {
      r.outcome = PairOutcome::NoVotes;
    } else if (2 * r.votes_a > total) {
      r.outcome = PairOutcome::A;
      ++wins_a;
    } else if (2 * r.votes_b > total) {
      r.outcome = PairOutcome::B;
      ++wins_b;
    } else {
      r.outcome = PairOutcome::Tie;
    }
  }
  out.decided = wins_a + wins_b;
  out.ranking = {{session.runs[0].run_id, session.runs[0].label, wins_a, 0},
                 {session.runs[1].run_id, session.runs[1].label, wins_b, 0}};
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [](const auto& a, const auto& b) { return a.wins > b.wins; });
  out.ranking[0].rank = 1;
  out.ranking[1].rank = out.ranking[1].wins == out.ranking[0].wins ? 1 : 2;
  out.sign_test_p = sign_test_p_value(wins_a, wins_b);
  out.significant = out.sign_test_p < 0.05;
  return out;
}

namespace {

std::string_view outcome_name(PairOutcome o) {
  switch (o) {
    case PairOutcome::A: return "A";
    case PairOutcome::B: return "B";
    case PairOutcome::Tie: return "Tie";
    case PairOutcome::NoVotes: return "no_votes";
  }
  return "no_votes";
}

}  // namespace

nlohmann::ordered_json aggregate_to_json(const Session& session,
                                         const AggregateResult& result) {
  nlohmann::ordered_json doc;
  doc["session_id"] = session.session_id;
  doc["runs"] = {{{"choice", "A"}, {"run_id", session.runs[0].run_id},
                  {"label", session.runs[0].label}},
                 {{"choice", "B"}, {"run_id", session.runs[1].run_id},
                  {"label", session.runs[1].label}}};
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : result.pairs) {
    std::string winner;
    if (p.outcome == PairOutcome::A) winner = session.runs[0].run_id;
    if (p.outcome == PairOutcome::B) winner = session.runs[1].run_id;
    pairs.push_back({{"pair_id", p.pair_id},
                     {"video_id", p.video_id},
                     {"votes_a", p.votes_a},
                     {"votes_b", p.votes_b},
                     {"ties", p.ties},
                     {"outcome", outcome_name(p.outcome)},
                     {"winner", winner.empty() ? nlohmann::ordered_json()
                                               : nlohmann::ordered_json(winner)}});
  }
  doc["pairs"] = std::move(pairs);
  auto ranking = nlohmann::ordered_json::array();
  for (const auto& m : result.ranking) {
    ranking.push_back({{"rank", m.rank},
                       {"run_id", m.run_id},
                       {"label", m.label},
                       {"wins", m.wins}});
  }
  doc["ranking"] = std::move(ranking);
  doc["decided_pairs"] = result.decided;
  doc["sign_test_p"] = result.sign_test_p;
  doc["significant"] = result.significant;
  doc["note"] = result.significant ? "" : "no significant difference";
  return doc;
}

// --- persistence ------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  auto secs = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

nlohmann::ordered_json session_to_json(const Session& s) {
  nlohmann::ordered_json doc;
  doc["session_id"] = s.session_id;
  doc["seed"] = s.seed;
  doc["evaluators"] = s.evaluators;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : s.runs) {
    auto reports = nlohmann::ordered_json::array();
    for (const auto& [_, rep] : r.reports) reports.push_back(report_to_json(rep));
    runs.push_back({{"run_id", r.run_id}, {"label", r.label}, {"reports", reports}});
  }
  doc["runs"] = std::move(runs);
  return doc;
}

Session session_from_json(const nlohmann::json& doc) {
  std::vector<MethodRun> runs;
  for (const auto& r : doc.at("runs")) {
    MethodRun run;
    run.run_id = r.at("run_id").get<std::string>();
    run.label = r.at("label").get<std::string>();
    for (const auto& rep : r.at("reports")) {
      auto parsed = report_from_json(rep).report;
      auto vid = parsed.video_id;
      run.reports.emplace(vid, std::move(parsed));
    }
    runs.push_back(std::move(run));
  }
  return plan_session(doc.at("session_id").get<std::string>(), std::move(runs),
                      doc.at("evaluators").get<std::vector<std::string>>(),
                      doc.at("seed").get<std::uint64_t>());
}

// Reads JSON lines. An unterminated, unparseable final line is the residue
// of an interrupted append: it is dropped and the file truncated to the last
// complete line.
std::vector<nlohmann::json> read_log(const std::filesystem::path& file) {
  std::vector<nlohmann::json> docs;
  if (!std::filesystem::exists(file)) return docs;
  std::ifstream in(file, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    auto line = content.substr(pos, terminated ? nl - pos : std::string::npos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      try {
        docs.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        if (terminated) {
          throw ParseError(file.string() + ":" + std::to_string(line_no) +
                               ": " + e.what(),
                           "", line_no);
        }
        spdlog::warn("{}: dropping truncated final line", file.string());
        std::filesystem::resize_file(file, pos);
        break;
      }
    }
    if (!terminated) {
      // Complete JSON without its newline: terminate it so the next append
      // starts on a fresh line.
      std::ofstream(file, std::ios::binary | std::ios::app) << '\n';
      break;
    }
    pos = nl + 1;
  }
  return docs;
}

}  // namespace

ScoringService::ScoringService(std::filesystem::path store_dir)
    : dir_(std::move(store_dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create vote store " + dir_.string() + ": " + ec.message());
  reload();
}

void ScoringService::reload() {
  auto state = std::make_shared<State>();
  for (const auto& doc : read_log(dir_ / "sessions.jsonl")) {
    auto s = std::make_shared<const Session>(session_from_json(doc));
    if (state->sessions.contains(s->session_id)) {
      throw ParseError("sessions.jsonl: duplicate session " + s->session_id,
                       "session_id");
    }
    state->order.push_back(s->session_id);
    state->votes[s->session_id];
    state->sessions.emplace(s->session_id, std::move(s));
  }
  for (const auto& doc : read_log(dir_ / "votes.jsonl")) {
    auto v = vote_from_json(doc);
    auto it = state->sessions.find(v.session_id);
    if (it == state->sessions.end() || !it->second->find_pair(v.pair_id)) {
      spdlog::warn("votes.jsonl: ignoring vote for unknown session/pair {}/{}",
                   v.session_id, v.pair_id);
      continue;
    }
    auto& by_key = state->votes[v.session_id];
    auto key = std::make_pair(v.pair_id, v.evaluator_id);
    if (!by_key.emplace(key, v).second) {
      spdlog::warn("votes.jsonl: ignoring duplicate vote {}/{}/{}", v.session_id,
                   v.pair_id, v.evaluator_id);
    }
  }
  publish(std::move(state));
}

std::shared_ptr<const ScoringService::State> ScoringService::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return state_;
}

void ScoringService::publish(std::shared_ptr<const State> next) {
  std::lock_guard lock(snapshot_mu_);
  state_ = std::move(next);
}

void ScoringService::append_line(const std::filesystem::path& file,
                                 const std::string& line) {
  int fd = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open " + file.string() + ": " + std::strerror(errno));
  std::string data = line + "\n";
  std::size_t written = 0;
  while (written < data.size()) {
    auto n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      throw IoError("write to " + file.string() + " failed: " + std::strerror(err));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    int err = errno;
    ::close(fd);
    throw IoError("fsync of " + file.string() + " failed: " + std::strerror(err));
  }
  ::close(fd);
}

Session ScoringService::create_session(std::vector<MethodRun> runs,
                                       std::vector<std::string> evaluators,
                                       std::uint64_t seed) {
  std::lock_guard lock(write_mu_);
  auto current = snapshot();
  auto id = "s" + std::to_string(current->order.size() + 1);
  auto session = plan_session(id, std::move(runs), std::move(evaluators), seed);
  for (const auto& [run_id, videos] : session.excluded) {
    std::string list;
    for (const auto& v : videos) list += (list.empty() ? "" : ",") + v;
    spdlog::warn("session {}: excluded videos only in run {}: {}", id, run_id, list);
  }
  append_line(dir_ / "sessions.jsonl", session_to_json(session).dump());
  auto next = std::make_shared<State>(*current);
  next->order.push_back(id);
  next->votes[id];
  next->sessions.emplace(id, std::make_shared<const Session>(session));
  publish(std::move(next));
  return session;
}

namespace {

const Session& find_session(const auto& state, const std::string& id) {
  auto it = state.sessions.find(id);
  if (it == state.sessions.end()) throw NotFoundError("unknown session " + id);
  return *it->second;
}

}  // namespace

std::optional<PairAssignment> ScoringService::next_pair(
    const std::string& session_id, const std::string& evaluator_id) const {
  auto state = snapshot();
  const auto& s = find_session(*state, session_id);
  if (!s.has_evaluator(evaluator_id)) {
    throw AuthError("evaluator " + evaluator_id + " is not in the roster of " +
                    session_id);
  }
  const auto& votes = state->votes.at(session_id);
  int done = 0;
  const PairPlan* next = nullptr;
  for (const auto& p : s.pairs) {
    if (votes.contains({p.pair_id, evaluator_id})) {
      ++done;
    } else if (next == nullptr) {
      next = &p;
    }
  }
  if (next == nullptr) return std::nullopt;
  PairAssignment a;
  a.pair_id = next->pair_id;
  a.done = done;
  a.total = static_cast<int>(s.pairs.size());
  auto text_a = render_report_text(s.runs[0].reports.at(next->video_id));
  auto text_b = render_report_text(s.runs[1].reports.at(next->video_id));
  if (first_run_on_left(s.seed, next->pair_id, evaluator_id)) {
    a.left_text = std::move(text_a);
    a.right_text = std::move(text_b);
  } else {
    a.left_text = std::move(text_b);
    a.right_text = std::move(text_a);
  }
  return a;
}

VoteRecord ScoringService::submit_vote(const std::string& session_id,
                                       const std::string& evaluator_id,
                                       int pair_id, ScreenChoice on_screen) {
  std::lock_guard lock(write_mu_);
  auto current = snapshot();
  const auto& s = find_session(*current, session_id);
  if (!s.has_evaluator(evaluator_id)) {
    throw AuthError("evaluator " + evaluator_id + " is not in the roster of " +
                    session_id);
  }
  if (s.find_pair(pair_id) == nullptr) {
    throw NotFoundError("unknown pair " + std::to_string(pair_id) + " in " +
                        session_id);
  }
  const auto key = std::make_pair(pair_id, evaluator_id);
  if (current->votes.at(session_id).contains(key)) {
    throw ConflictError("evaluator " + evaluator_id + " already voted on pair " +
                        std::to_string(pair_id));
  }
  VoteRecord v;
  v.session_id = session_id;
  v.pair_id = pair_id;
  v.evaluator_id = evaluator_id;
  v.screen_choice = on_screen;
  v.first_on_left = first_run_on_left(s.seed, pair_id, evaluator_id);
  v.choice = translate_choice(on_screen, v.first_on_left);
  v.timestamp = utc_timestamp();
  append_line(dir_ / "votes.jsonl", vote_to_json(v).dump());
  auto next = std::make_shared<State>(*current);
  next->votes[session_id].emplace(key, v);
  publish(std::move(next));
  return v;
}

AggregateResult ScoringService::results(const std::string& session_id) const {
  auto state = snapshot();
  const auto& s = find_session(*state, session_id);
  std::vector<VoteRecord> votes;
  for (const auto& [_, v] : state->votes.at(session_id)) votes.push_back(v);
  return aggregate(s, votes);
}

std::vector<std::string> ScoringService::session_ids() const {
  return snapshot()->order;
}

Session ScoringService::session(const std::string& session_id) const {
  auto state = snapshot();
  return find_session(*state, session_id);
}

std::vector<VoteRecord> ScoringService::votes(const std::string& session_id) const {
  auto state = snapshot();
  find_session(*state, session_id);
  std::vector<VoteRecord> out;
  for (const auto& [_, v] : state->votes.at(session_id)) out.push_back(v);
  return out;
}

std::map<std::string, int> ScoringService::evaluator_tally(
    const std::string& session_id, const std::string& evaluator_id) const {
  std::map<std::string, int> tally{{"A", 0}, {"B", 0}, {"Tie", 0}};
  for (const auto& v : votes(session_id)) {
    if (v.evaluator_id == evaluator_id) ++tally[std::string(to_string(v.screen_choice))];
  }
  return tally;
}

int ScoringService::voted_count(const std::string& session_id,
                                const std::string& evaluator_id) const {
  int n = 0;
  for (const auto& v : votes(session_id)) n += v.evaluator_id == evaluator_id;
  return n;
}

// --- roster -------------------------------------------------------------------

Roster Roster::from_json(const nlohmann::json& doc) {
  Roster r;
  try {
    r.admin_token = doc.at("admin_token").get<std::string>();
    r.evaluator_tokens =
        doc.at("evaluators").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("roster: ") + e.what());
  }
  if (r.admin_token.empty()) throw ConfigError("roster: admin_token is empty");
  std::set<std::string> tokens{r.admin_token};
  for (const auto& [id, tok] : r.evaluator_tokens) {
    if (tok.empty() || !tokens.insert(tok).second) {
      throw ConfigError("roster: token of " + id + " is empty or reused");
    }
  }
  return r;
}

Roster Roster::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open roster " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("roster " + path.string() + ": " + e.what());
  }
}

std::vector<std::string> Roster::evaluator_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : evaluator_tokens) ids.push_back(id);
  return ids;
}

}  // namespace dashreport
