#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "ghar/kg_store.hpp"
#include "ghar/tasks.hpp"

// Prompt templates. Each renderer returns the user message for one LLM call;
// the tag constants double as the template_tag seen by providers.
namespace ghar::prompts {

inline constexpr std::string_view kGenerate = "generate";
inline constexpr std::string_view kDecide = "decide";
inline constexpr std::string_view kLlm = "llm";
inline constexpr std::string_view kRag = "rag";
inline constexpr std::string_view kSub = "sub";
inline constexpr std::string_view kFinal = "final";

std::string system_message();

/// Patient query: task description, label space, per-visit codes (with KG
/// names when `kg` knows the code), and the answer-format instruction.
std::string render_query(const TaskSpec& task, const PatientRecord& patient, const KnowledgeGraph* kg);

std::string answer_format_instruction(const TaskSpec& task);

std::string render_generate(std::string_view query, std::size_t k);
std::string render_decide(std::string_view sub_query, std::string_view history,
                          const MetaPathCatalog& catalog, std::size_t max_meta_paths);
std::string render_llm(std::string_view sub_query, std::string_view history);
std::string render_rag(std::string_view sub_query, std::string_view history, std::string_view evidence);
std::string render_sub(std::string_view sub_query, std::string_view history);
std::string render_final(std::string_view query, std::string_view history, const TaskSpec& task);

inline constexpr std::string_view kNoEvidence = "no external evidence";

}  // namespace ghar::prompts
