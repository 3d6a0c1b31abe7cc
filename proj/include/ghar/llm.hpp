#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ghar {

struct ChatMessage {
  std::string role;
  std::string content;
};

/// One completion call. `template_tag` names the prompt template that
/// produced `messages`; `vars` carries the template inputs so scripted
/// providers can echo them.
struct LlmRequest {
  std::string template_tag;
  int step = 0;
  std::string task;
  std::vector<ChatMessage> messages;
  bool logprobs = true;
  std::map<std::string, std::string> vars;
};

struct LlmResponse {
  std::string content;
  std::optional<double> log_prob;      // mean token log-prob of the content
  std::optional<double> ref_log_prob;  // same text under the reference policy
  std::optional<double> value;         // critic estimate for the calling state
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string name() const = 0;
  // True when complete() never blocks on the network.
  virtual bool local() const = 0;
  virtual LlmResponse complete(const LlmRequest& request) const = 0;
};

struct MockRule {
  std::optional<std::string> template_tag;
  std::optional<int> step;
  std::optional<std::string> task;
  std::optional<std::string> contains;  // substring of the last message
  std::string response;
  double log_prob = 0.0;
  std::optional<double> ref_log_prob;  // defaults to log_prob
  double value = 0.0;
};

/// Scripted provider: rules are tried top-down, first match wins. The
/// response may reference "{{name}}" placeholders taken from request.vars.
/// A request that matches no rule is a provider error.
class MockLlmProvider final : public LlmProvider {
 public:
  explicit MockLlmProvider(std::vector<MockRule> rules);

  static MockLlmProvider from_jsonl(std::string_view text);
  static MockLlmProvider from_file(const std::string& path);
  // Rag on the first step, terminate on the second, answer with the first label.
  static MockLlmProvider default_script();

  std::string name() const override { return "mock"; }
  bool local() const override { return true; }
  LlmResponse complete(const LlmRequest& request) const override;

  const std::vector<MockRule>& rules() const { return rules_; }

 private:
  std::vector<MockRule> rules_;
};

/// OpenAI-compatible chat completions endpoint.
class HttpLlmProvider final : public LlmProvider {
 public:
  HttpLlmProvider(std::string url, std::string model, std::string api_key = {},
                  int timeout_seconds = 120);

  std::string name() const override { return "http:" + model_; }
  bool local() const override { return false; }
  LlmResponse complete(const LlmRequest& request) const override;

 private:
  std::string url_;
  std::string model_;
  std::string api_key_;
  int timeout_seconds_;
};

}  // namespace ghar
