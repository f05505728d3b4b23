#pragma once

#include <optional>
#include <string>
#include <vector>

namespace erm {

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;
};

/// A text-in, text-out language model.
class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  /// Multi-turn call. The default joins the turns into a single prompt.
  virtual std::string chat(const std::vector<ChatMessage>& messages);
  virtual std::string id() const = 0;
};

struct ChatConfig {
  /// Full URL of a chat-completions endpoint, e.g.
  /// https://api.example.com/v1/chat/completions
  std::string endpoint;
  std::string model;
  std::string api_key;
  double timeout_s = 60.0;
  int max_retries = 2;

  /// Reads ERM_ENDPOINT, ERM_MODEL and ERM_API_KEY. nullopt unless the
  /// endpoint and model are both set.
  static std::optional<ChatConfig> from_env();
};

/// Chat-completions client. Greedy decoding (temperature 0) on every call.
class HttpChatModel : public ChatModel {
 public:
  explicit HttpChatModel(ChatConfig cfg);
  /// Throws SourceFailure once retries are exhausted.
  std::string complete(const std::string& prompt) override;
  std::string chat(const std::vector<ChatMessage>& messages) override;
  std::string id() const override { return cfg_.model; }

 private:
  ChatConfig cfg_;
  std::string base_;
  std::string path_;
};

}  // namespace erm
