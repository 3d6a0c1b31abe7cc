#include "ghar/llm.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ghar/error.hpp"
#include "http_util.hpp"
#include "strings.hpp"

namespace ghar {

MockLlmProvider::MockLlmProvider(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

MockLlmProvider MockLlmProvider::from_jsonl(std::string_view text) {
  std::vector<MockRule> rules;
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;
    try {
      auto j = nlohmann::json::parse(line);
      MockRule rule;
      if (j.contains("match")) {
        const auto& m = j.at("match");
        if (m.contains("template_tag")) rule.template_tag = m.at("template_tag").get<std::string>();
        if (m.contains("step")) rule.step = m.at("step").get<int>();
        if (m.contains("task")) rule.task = m.at("task").get<std::string>();
        if (m.contains("contains")) rule.contains = m.at("contains").get<std::string>();
      }
      rule.response = j.at("response").get<std::string>();
      rule.log_prob = j.value("log_prob", 0.0);
      if (j.contains("ref_log_prob")) rule.ref_log_prob = j.at("ref_log_prob").get<double>();
      rule.value = j.value("value", 0.0);
      rules.push_back(std::move(rule));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("mock script line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return MockLlmProvider(std::move(rules));
}

MockLlmProvider MockLlmProvider::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open mock script '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

MockLlmProvider MockLlmProvider::default_script() {
  std::vector<MockRule> rules;
  auto add = [&](std::optional<std::string> tag, std::optional<int> step, std::string response,
                 double lp, double value) {
    MockRule r;
    r.template_tag = std::move(tag);
    r.step = step;
    r.response = std::move(response);
    r.log_prob = lp;
    r.value = value;
    rules.push_back(std::move(r));
  };
  add("generate", std::nullopt,
      "Which findings in this record matter most?\n"
      "What does the knowledge graph say about these codes?\n"
      "How do the recorded treatments relate to the outcome?",
      -0.9, 0.0);
  add("decide", 1, "ROUTE: RAG; IDS: 0; CONTROL: CONTINUE", -0.4, 1.0);
  add("decide", std::nullopt, "ROUTE: LLM; CONTROL: TERMINATE", -0.3, 0.8);
  add("rag", std::nullopt, "Relevant evidence: {{evidence}}", -1.1, 0.0);
  add("llm", std::nullopt, "From prior knowledge: {{query}}", -1.0, 0.0);
  add("sub", std::nullopt, "What additional evidence bears on: {{query}}", -0.7, 0.0);
  add("final", std::nullopt, "<answer>{{first_label}}</answer>", -0.2, 0.0);
  return MockLlmProvider(std::move(rules));
}

LlmResponse MockLlmProvider::complete(const LlmRequest& request) const {
  std::string_view last = request.messages.empty() ? std::string_view{} : request.messages.back().content;
  for (const auto& rule : rules_) {
    if (rule.template_tag && *rule.template_tag != request.template_tag) continue;
    if (rule.step && *rule.step != request.step) continue;
    if (rule.task && *rule.task != request.task) continue;
    if (rule.contains && last.find(*rule.contains) == std::string_view::npos) continue;

    LlmResponse out;
    out.content = rule.response;
    for (const auto& [key, val] : request.vars) {
      detail::replace_all(out.content, "{{" + key + "}}", val);
    }
    out.log_prob = rule.log_prob;
    out.ref_log_prob = rule.ref_log_prob.value_or(rule.log_prob);
    out.value = rule.value;
    return out;
  }
  throw Error(ErrorCode::kProvider, "mock script has no rule for template '" + request.template_tag +
                                        "' at step " + std::to_string(request.step));
}

HttpLlmProvider::HttpLlmProvider(std::string url, std::string model, std::string api_key,
                                 int timeout_seconds)
    : url_(std::move(url)), model_(std::move(model)), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
  detail::split_url(url_);
}

LlmResponse HttpLlmProvider::complete(const LlmRequest& request) const {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body = {{"model", model_}, {"messages", messages}, {"logprobs", request.logprobs}};
  auto reply = detail::post_json(url_, body, api_key_, timeout_seconds_);

  LlmResponse out;
  try {
    const auto& choice = reply.at("choices").at(0);
    out.content = choice.at("message").at("content").get<std::string>();
    if (request.logprobs && choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      const auto& tokens = choice["logprobs"]["content"];
      if (!tokens.empty()) {
        double sum = 0.0;
        for (const auto& t : tokens) sum += t.at("logprob").get<double>();
        out.log_prob = sum / static_cast<double>(tokens.size());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProvider, std::string("malformed chat completion reply: ") + e.what());
  }
  return out;
}

}  // namespace ghar
