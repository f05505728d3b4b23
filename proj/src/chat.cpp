#include "erm/chat.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "erm/errors.hpp"

namespace erm {

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

}  // namespace

std::string ChatModel::chat(const std::vector<ChatMessage>& messages) {
  std::string joined;
  for (const auto& m : messages) {
    if (!joined.empty()) joined += "\n\n";
    joined += m.content;
  }
  return complete(joined);
}

std::optional<ChatConfig> ChatConfig::from_env() {
  ChatConfig cfg;
  cfg.endpoint = env_or_empty("ERM_ENDPOINT");
  cfg.model = env_or_empty("ERM_MODEL");
  cfg.api_key = env_or_empty("ERM_API_KEY");
  if (cfg.endpoint.empty() || cfg.model.empty()) return std::nullopt;
  return cfg;
}

HttpChatModel::HttpChatModel(ChatConfig cfg) : cfg_(std::move(cfg)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(cfg_.endpoint, m, url)) throw InvalidParameter("bad chat endpoint URL '" + cfg_.endpoint + "'");
  base_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
}

std::string HttpChatModel::complete(const std::string& prompt) { return chat({{"user", prompt}}); }

std::string HttpChatModel::chat(const std::vector<ChatMessage>& messages) {
  auto msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body{{"model", cfg_.model}, {"temperature", 0.0}, {"messages", msgs}};
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
    httplib::Client client(base_);
    auto secs = static_cast<time_t>(cfg_.timeout_s);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw SourceFailure("chat endpoint returned HTTP " + std::to_string(res->status));
    try {
      auto doc = nlohmann::json::parse(res->body);
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw SourceFailure(std::string("unexpected chat response: ") + e.what());
    }
  }
  throw SourceFailure("chat endpoint unreachable after retries: " + last_error);
}

}  // namespace erm
