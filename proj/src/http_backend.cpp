#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

#include "dashreport/error.hpp"
#include "dashreport/gateway.hpp"
#include "dashreport/image.hpp"

namespace dashreport {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

SplitUrl split_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint base_url lacks a scheme: " + base_url);
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path_start);
    out.path = base_url.substr(path_start);
  }
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

std::string error_message(const std::string& body) {
  try {
    auto doc = nlohmann::json::parse(body);
    if (doc.contains("error")) {
      const auto& err = doc["error"];
      if (err.is_object() && err.contains("message") &&
          err["message"].is_string()) {
        return err["message"].get<std::string>();
      }
      if (err.is_string()) return err.get<std::string>();
    }
    if (doc.contains("message") && doc["message"].is_string()) {
      return doc["message"].get<std::string>();
    }
  } catch (const nlohmann::json::exception&) {
  }
  return body.substr(0, 500);
}

bool is_transient(int status) { return status == 429 || status >= 500; }

}  // namespace

nlohmann::json build_chat_body(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  nlohmann::json content = nlohmann::json::array();
  for (const auto& part : request.user_parts) {
    if (const auto* text = std::get_if<TextPart>(&part)) {
      content.push_back({{"type", "text"}, {"text", text->text}});
    } else {
      const auto& image = std::get<ImagePart>(part);
      std::string url =
          "data:" + image.media_type + ";base64," + base64_encode(image.bytes);
      content.push_back(
          {{"type", "image_url"}, {"image_url", {{"url", std::move(url)}}}});
    }
  }
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  return {{"model", request.model_name},
          {"messages", std::move(messages)},
          {"temperature", request.decoding.temperature},
          {"max_tokens", request.decoding.max_output_tokens}};
}

ChatResponse parse_chat_response(const nlohmann::json& body) {
  ChatResponse out;
  const auto& choices = body.at("choices");
  if (!choices.is_array() || choices.empty()) {
    throw ProviderError(200, "response has no choices");
  }
  const auto& choice = choices.at(0);
  const auto& message = choice.at("message");
  auto content = message.find("content");
  if (content != message.end() && content->is_string()) {
    out.text = content->get<std::string>();
  } else if (content != message.end() && content->is_array()) {
    for (const auto& part : *content) {
      if (part.value("type", "") == "text") {
        out.text += part.value("text", "");
      }
    }
  }
  auto reason = choice.value("finish_reason", std::string("stop"));
  if (reason == "stop") {
    out.finish_reason = FinishReason::Stop;
  } else if (reason == "length") {
    out.finish_reason = FinishReason::Length;
  } else {
    out.finish_reason = FinishReason::Error;
  }
  if (out.finish_reason == FinishReason::Stop &&
      (content == message.end() || content->is_null())) {
    out.finish_reason = FinishReason::Error;
  }
  return out;
}

HttpChatBackend::HttpChatBackend()
    : sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

HttpChatBackend::HttpChatBackend(Sleeper sleeper) : sleep_(std::move(sleeper)) {}

ChatResponse HttpChatBackend::complete(const EndpointConfig& endpoint,
                                       const ChatRequest& request) {
  endpoint.validate();
  auto url = split_url(endpoint.base_url);
  const std::string path = url.path + "/chat/completions";

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    } else {
      spdlog::warn("environment variable {} is not set; sending no API key",
                   endpoint.api_key_env);
    }
  }
  const std::string body = build_chat_body(request).dump();

  httplib::Client client(url.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  client.set_connection_timeout(std::max<std::int64_t>(1, secs.count()), 0);
  client.set_read_timeout(std::max<std::int64_t>(1, secs.count()), 0);
  client.set_write_timeout(std::max<std::int64_t>(1, secs.count()), 0);

  std::string last_error;
  const auto started = std::chrono::steady_clock::now();
  for (int attempt = 1; attempt <= endpoint.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      sleep_(endpoint.retry.backoff_base * (1 << std::min(attempt - 2, 16)));
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      spdlog::warn("{} attempt {}/{}: {}", request.key.to_string(), attempt,
                   endpoint.retry.max_attempts, last_error);
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(res->status,
                            std::string("unparseable response body: ") + e.what());
      }
      ChatResponse out;
      try {
        out = parse_chat_response(doc);
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(res->status,
                            std::string("unexpected response shape: ") + e.what());
      }
      out.attempts = attempt;
      out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      return out;
    }
    if (!is_transient(res->status)) {
      throw ProviderError(res->status, error_message(res->body));
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " +
                 error_message(res->body);
    spdlog::warn("{} attempt {}/{}: {}", request.key.to_string(), attempt,
                 endpoint.retry.max_attempts, last_error);
  }
  throw TransportError("gave up after " +
                           std::to_string(endpoint.retry.max_attempts) +
                           " attempts: " + last_error,
                       endpoint.retry.max_attempts);
}

}  // namespace dashreport
