#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dashreport/report.hpp"

namespace dashreport {

struct TextPart {
  std::string text;
};

struct ImagePart {
  std::vector<std::uint8_t> bytes;
  std::string media_type = "image/png";
};

using UserPart = std::variant<TextPart, ImagePart>;

struct DecodingSettings {
  double temperature = 0.0;
  int max_output_tokens = 2048;
};

// Identifies a request for the scripted backend and for call accounting.
// Ignored by the HTTP backend.
struct RequestKey {
  std::string stage;
  std::string video_id;
  std::optional<FrameIndex> anchor;
  int ordinal = 0;      // 0 = first attempt, 1 = re-prompt
  std::string variant;  // e.g. the stage-3 grid point

  std::string to_string() const;
  bool operator==(const RequestKey&) const = default;
};

struct ChatRequest {
  std::string model_name;
  std::string system_prompt;
  std::vector<UserPart> user_parts;
  DecodingSettings decoding;
  std::chrono::milliseconds timeout{120000};
  RequestKey key;
};

enum class FinishReason { Stop, Length, Error };

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
  std::chrono::milliseconds latency{0};
  int attempts = 1;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
};

struct EndpointConfig {
  std::string base_url;
  std::string api_key_env;  // name of the environment variable
  std::string model_name;
  RetryPolicy retry;
  DecodingSettings decoding;
  std::chrono::milliseconds timeout{120000};
  int max_concurrency = 4;

  void validate() const;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const EndpointConfig& endpoint,
                                const ChatRequest& request) = 0;
};

// Chat-completions over HTTP(S). Retries connection failures, 429 and 5xx
// with exponential backoff; other non-2xx statuses raise ProviderError
// immediately.
class HttpChatBackend : public ChatBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpChatBackend();
  explicit HttpChatBackend(Sleeper sleeper);

  ChatResponse complete(const EndpointConfig& endpoint,
                        const ChatRequest& request) override;

 private:
  Sleeper sleep_;
};

// Request body in the chat-completions shape (messages array, images as
// data URLs).
nlohmann::json build_chat_body(const ChatRequest& request);
ChatResponse parse_chat_response(const nlohmann::json& body);

// Deterministic fixture-driven backend. Entries are loaded from every
// *.json file in a directory; each file holds one entry object or an array:
//   {"stage": "stage1", "video": "v1", "frame": 9, "ordinal": 0,
//    "variant": "...", "text": "..."}
// `response` (any JSON) may replace `text`; `error: "transport"` simulates an
// unreachable endpoint. Unknown keys raise ScriptMissError.
class ScriptedBackend : public ChatBackend {
 public:
  ScriptedBackend() = default;

  static std::shared_ptr<ScriptedBackend> load(
      const std::filesystem::path& dir);

  void add(const RequestKey& key, std::string text);
  void add_transport_failure(const RequestKey& key);
  void add_entry(const nlohmann::json& entry);

  ChatResponse complete(const EndpointConfig& endpoint,
                        const ChatRequest& request) override;

  std::size_t size() const;

 private:
  struct Scripted {
    std::string text;
    bool transport_failure = false;
  };
  mutable std::mutex mutex_;
  std::map<std::string, Scripted> entries_;
};

struct CallRecord {
  RequestKey key;
  std::string model_name;
  bool ok = false;
};

// Per-endpoint ceiling on in-flight requests.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int ceiling);
  void acquire();
  void release();
  int in_flight() const;
  int peak() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int ceiling_;
  int in_flight_ = 0;
  int peak_ = 0;
};

// Front door for all model traffic: applies the per-endpoint limiter and
// keeps a call log.
class ModelGateway {
 public:
  explicit ModelGateway(std::shared_ptr<ChatBackend> backend);

  ChatResponse complete(const EndpointConfig& endpoint,
                        const ChatRequest& request);

  std::vector<CallRecord> calls() const;
  std::size_t call_count(const std::string& video_id) const;
  int peak_in_flight(const EndpointConfig& endpoint) const;

 private:
  ConcurrencyLimiter& limiter_for(const EndpointConfig& endpoint);

  std::shared_ptr<ChatBackend> backend_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<ConcurrencyLimiter>> limiters_;
  std::vector<CallRecord> calls_;
};

enum class OutputSchema { FrameCaption, IncidentFrame, Report };

std::optional<OutputSchema> parse_schema_id(std::string_view id);

// Finds the first JSON object embedded in `text` (code fences and prose
// tolerated) that satisfies `schema`. Throws ExtractionError otherwise.
nlohmann::json extract_structured(std::string_view text, OutputSchema schema);

// Empty when `doc` satisfies `schema`, else the first problem found.
std::string check_schema(const nlohmann::json& doc, OutputSchema schema);

}  // namespace dashreport
