#include "dashreport/gateway.hpp"

#include <fstream>

#include <spdlog/spdlog.h>

#include "dashreport/error.hpp"

namespace dashreport {

std::string RequestKey::to_string() const {
  std::string s = stage + "/" + video_id + "/" +
                  (anchor ? std::to_string(*anchor) : std::string("-")) + "/" +
                  std::to_string(ordinal);
  if (!variant.empty()) s += "/" + variant;
  return s;
}

void EndpointConfig::validate() const {
  if (retry.max_attempts < 1) {
    throw ConfigError("endpoint " + model_name + ": max_attempts must be >= 1");
  }
  if (max_concurrency < 1) {
    throw ConfigError("endpoint " + model_name +
                      ": max_concurrency must be >= 1");
  }
  if (decoding.temperature < 0) {
    throw ConfigError("endpoint " + model_name +
                      ": temperature must be non-negative");
  }
  if (decoding.max_output_tokens < 1) {
    throw ConfigError("endpoint " + model_name +
                      ": max_output_tokens must be positive");
  }
}

// --- scripted backend -------------------------------------------------------

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(
    const std::filesystem::path& dir) {
  auto backend = std::make_shared<ScriptedBackend>();
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw ConfigError("scripted fixture directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("scripted fixture " + file.string() + ": " + e.what());
    }
    try {
      if (doc.is_array()) {
        for (const auto& entry : doc) backend->add_entry(entry);
      } else {
        backend->add_entry(doc);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("scripted fixture " + file.string() + ": " + e.what());
    }
  }
  return backend;
}

void ScriptedBackend::add_entry(const nlohmann::json& entry) {
  RequestKey key;
  key.stage = entry.at("stage").get<std::string>();
  key.video_id = entry.at("video").get<std::string>();
  if (entry.contains("frame") && !entry["frame"].is_null()) {
    key.anchor = entry["frame"].get<FrameIndex>();
  }
  key.ordinal = entry.value("ordinal", 0);
  key.variant = entry.value("variant", std::string());
  if (entry.value("error", std::string()) == "transport") {
    add_transport_failure(key);
    return;
  }
  if (entry.contains("text")) {
    add(key, entry["text"].get<std::string>());
  } else {
    add(key, entry.at("response").dump());
  }
}

void ScriptedBackend::add(const RequestKey& key, std::string text) {
  std::lock_guard lock(mutex_);
  entries_[key.to_string()] = Scripted{std::move(text), false};
}

void ScriptedBackend::add_transport_failure(const RequestKey& key) {
  std::lock_guard lock(mutex_);
  entries_[key.to_string()] = Scripted{{}, true};
}

std::size_t ScriptedBackend::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

ChatResponse ScriptedBackend::complete(const EndpointConfig& endpoint,
                                       const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(request.key.to_string());
  if (it == entries_.end() && !request.key.variant.empty()) {
    RequestKey generic = request.key;
    generic.variant.clear();
    it = entries_.find(generic.to_string());
  }
  if (it == entries_.end()) {
    throw ScriptMissError("no scripted response for " +
                          request.key.to_string());
  }
  if (it->second.transport_failure) {
    throw TransportError("scripted transport failure for " +
                             request.key.to_string(),
                         endpoint.retry.max_attempts);
  }
  return ChatResponse{it->second.text, FinishReason::Stop,
                      std::chrono::milliseconds(0), 1};
}

// --- limiter / gateway ------------------------------------------------------

ConcurrencyLimiter::ConcurrencyLimiter(int ceiling)
    : ceiling_(std::max(1, ceiling)) {}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return in_flight_ < ceiling_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

int ConcurrencyLimiter::in_flight() const {
  std::lock_guard lock(mutex_);
  return in_flight_;
}

int ConcurrencyLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

ModelGateway::ModelGateway(std::shared_ptr<ChatBackend> backend)
    : backend_(std::move(backend)) {}

namespace {

std::string limiter_key(const EndpointConfig& endpoint) {
  return endpoint.base_url + "|" + endpoint.model_name;
}

}  // namespace

ConcurrencyLimiter& ModelGateway::limiter_for(const EndpointConfig& endpoint) {
  std::lock_guard lock(mutex_);
  auto& slot = limiters_[limiter_key(endpoint)];
  if (!slot) slot = std::make_unique<ConcurrencyLimiter>(endpoint.max_concurrency);
  return *slot;
}

ChatResponse ModelGateway::complete(const EndpointConfig& endpoint,
                                    const ChatRequest& request) {
  if (request.user_parts.empty()) {
    throw InvalidInputError("chat request needs at least one user part");
  }
  auto& limiter = limiter_for(endpoint);
  limiter.acquire();
  struct Release {
    ConcurrencyLimiter& l;
    ~Release() { l.release(); }
  } release{limiter};

  CallRecord record{request.key, request.model_name, false};
  try {
    auto response = backend_->complete(endpoint, request);
    record.ok = true;
    std::lock_guard lock(mutex_);
    calls_.push_back(std::move(record));
    return response;
  } catch (...) {
    std::lock_guard lock(mutex_);
    calls_.push_back(std::move(record));
    throw;
  }
}

std::vector<CallRecord> ModelGateway::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t ModelGateway::call_count(const std::string& video_id) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(calls_.begin(), calls_.end(), [&](const CallRecord& c) {
        return c.key.video_id == video_id;
      }));
}

int ModelGateway::peak_in_flight(const EndpointConfig& endpoint) const {
  std::lock_guard lock(mutex_);
  auto it = limiters_.find(limiter_key(endpoint));
  return it == limiters_.end() ? 0 : it->second->peak();
}

// --- structured output ------------------------------------------------------

std::optional<OutputSchema> parse_schema_id(std::string_view id) {
  if (id == "stage1" || id == "frame_caption") return OutputSchema::FrameCaption;
  if (id == "stage2" || id == "incident_frame") return OutputSchema::IncidentFrame;
  if (id == "stage3" || id == "report" || id == "ensemble") {
    return OutputSchema::Report;
  }
  return std::nullopt;
}

namespace {

bool non_empty_string(const nlohmann::json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end() || !it->is_string()) return false;
  const auto& s = it->get_ref<const std::string&>();
  return s.find_first_not_of(" \t\r\n") != std::string::npos;
}

std::string check_frame_caption(const nlohmann::json& doc) {
  if (!non_empty_string(doc, "caption")) return "caption: missing or empty";
  auto hazards = doc.find("hazards");
  if (hazards == doc.end() || hazards->is_null()) return {};
  if (!hazards->is_array()) return "hazards: expected an array";
  for (const auto& h : *hazards) {
    if (!h.is_object()) return "hazards: entries must be objects";
    auto cat = h.find("category");
    if (cat == h.end() || !cat->is_string() ||
        !parse_hazard_category(cat->get<std::string>())) {
      return "hazards.category: missing or unknown";
    }
    if (!non_empty_string(h, "description")) {
      return "hazards.description: missing or empty";
    }
  }
  return {};
}

std::string check_incident_frame(const nlohmann::json& doc) {
  auto it = doc.find("incident_frame");
  if (it == doc.end()) return "incident_frame: missing";
  if (!it->is_number()) return "incident_frame: expected a number";
  return {};
}

std::string check_report(const nlohmann::json& doc) {
  auto ev = doc.find("event_type");
  if (ev == doc.end() || !ev->is_string() ||
      !parse_event_type(ev->get<std::string>())) {
    return "event_type: missing or unknown";
  }
  auto sev = doc.find("crash_severity");
  if (sev == doc.end() || !sev->is_number_integer()) {
    return "crash_severity: expected an integer";
  }
  auto ego = doc.find("ego_involved");
  if (ego == doc.end() || !ego->is_boolean()) {
    return "ego_involved: expected a boolean";
  }
  auto counts = doc.find("entity_counts");
  if (counts == doc.end() || !counts->is_object()) {
    return "entity_counts: expected an object";
  }
  for (const auto& [key, value] : counts->items()) {
    if (parse_entity_kind(key) && !value.is_number_integer()) {
      return "entity_counts." + key + ": expected an integer";
    }
  }
  auto tti = doc.find("time_to_incident_frames");
  if (tti != doc.end() && !tti->is_null() && !tti->is_number_integer()) {
    return "time_to_incident_frames: expected an integer or null";
  }
  for (const char* field : {"caption_before", "caption_after"}) {
    auto it = doc.find(field);
    if (it == doc.end() || !it->is_string()) {
      return std::string(field) + ": expected a string";
    }
  }
  if (ev->get<std::string>() != "no_incident") {
    if (!non_empty_string(doc, "caption_before")) return "caption_before: empty";
    if (!non_empty_string(doc, "caption_after")) return "caption_after: empty";
  }
  return {};
}

// End of the balanced object starting at `start` ('{'), string-aware;
// npos when unbalanced.
std::size_t object_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::string check_schema(const nlohmann::json& doc, OutputSchema schema) {
  if (!doc.is_object()) return "expected a JSON object";
  switch (schema) {
    case OutputSchema::FrameCaption:
      return check_frame_caption(doc);
    case OutputSchema::IncidentFrame:
      return check_incident_frame(doc);
    case OutputSchema::Report:
      return check_report(doc);
  }
  return "unknown schema";
}

nlohmann::json extract_structured(std::string_view text, OutputSchema schema) {
  std::string first_problem;
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
       pos = text.find('{', pos + 1)) {
    auto end = object_end(text, pos);
    if (end == std::string_view::npos) continue;
    auto candidate = text.substr(pos, end - pos);
    nlohmann::json doc = nlohmann::json::parse(candidate, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    auto problem = check_schema(doc, schema);
    if (problem.empty()) return doc;
    if (first_problem.empty()) first_problem = problem;
  }
  throw ExtractionError(first_problem.empty()
                            ? std::string("no JSON object found in model output")
                            : "model output does not match schema: " +
                                  first_problem,
                        std::string(text));
}

}  // namespace dashreport
