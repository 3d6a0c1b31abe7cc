#include "ghar/prompts.hpp"

#include <sstream>

namespace ghar::prompts {

namespace {

void render_codes(std::ostringstream& os, std::string_view heading,
                  const std::vector<std::string>& codes, const KnowledgeGraph* kg) {
  os << "  " << heading << ": ";
  if (codes.empty()) {
    os << "none\n";
    return;
  }
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (i) os << "; ";
    os << codes[i];
    if (kg) {
      if (const Node* n = kg->find(codes[i]); n && !n->name.empty()) os << " (" << n->name << ")";
    }
  }
  os << '\n';
}

std::string_view or_none(std::string_view history) {
  return history.empty() ? std::string_view("(none)") : history;
}

}  // namespace

std::string system_message() {
  return "You are a clinical reasoning assistant. Follow the requested output format exactly.";
}

std::string answer_format_instruction(const TaskSpec& task) {
  std::ostringstream os;
  os << "Answer with exactly one of the labels [";
  for (std::size_t i = 0; i < task.label_space.size(); ++i) {
    if (i) os << ", ";
    os << task.label_space[i];
  }
  os << "] wrapped as <answer>label</answer>.";
  return os.str();
}

std::string render_query(const TaskSpec& task, const PatientRecord& patient, const KnowledgeGraph* kg) {
  std::ostringstream os;
  os << "Task: " << task.description << '\n';
  os << "Patient " << patient.patient_id << " has " << patient.visits.size()
     << (patient.visits.size() == 1 ? " visit" : " visits") << ".\n";
  for (std::size_t i = 0; i < patient.visits.size(); ++i) {
    const Visit& v = patient.visits[i];
    os << "Visit " << (i + 1) << ":\n";
    render_codes(os, "Diagnoses", v.diagnoses, kg);
    render_codes(os, "Procedures", v.procedures, kg);
    render_codes(os, "Medications", v.medications, kg);
  }
  os << answer_format_instruction(task);
  return os.str();
}

std::string render_generate(std::string_view query, std::size_t k) {
  std::ostringstream os;
  os << "Rewrite the following clinical prediction query into " << k
     << " distinct sub-queries that each examine a different aspect of the patient. "
        "Output one sub-query per line and nothing else.\n\n"
     << "Query:\n" << query;
  return os.str();
}

std::string render_decide(std::string_view sub_query, std::string_view history,
                          const MetaPathCatalog& catalog, std::size_t max_meta_paths) {
  std::ostringstream os;
  os << "Decide how to answer the current sub-query.\n"
     << "Use LLM if your own medical knowledge suffices; use RAG to consult the knowledge graph.\n"
     << "For RAG, pick at most " << max_meta_paths << " meta-path IDs from the list below.\n"
     << "Then decide whether the accumulated reasoning is enough to give the final answer "
        "(TERMINATE) or whether a deeper sub-query is needed (CONTINUE).\n\n"
     << "Meta-paths:\n";
  for (const auto& mp : catalog.paths()) os << "  " << mp.index << ": " << mp.to_string() << '\n';
  os << "\nReasoning history:\n" << or_none(history) << "\n\n"
     << "Current sub-query:\n" << sub_query << "\n\n"
     << "Reply on one line as: ROUTE: <LLM|RAG>; IDS: <comma-separated IDs, RAG only>; "
        "CONTROL: <TERMINATE|CONTINUE>";
  return os.str();
}

std::string render_llm(std::string_view sub_query, std::string_view history) {
  std::ostringstream os;
  os << "Answer the sub-query from your own medical knowledge in a few sentences.\n\n"
     << "Reasoning history:\n" << or_none(history) << "\n\n"
     << "Sub-query:\n" << sub_query;
  return os.str();
}

std::string render_rag(std::string_view sub_query, std::string_view history, std::string_view evidence) {
  std::ostringstream os;
  os << "Summarize the retrieved knowledge-graph evidence into a short answer to the sub-query. "
        "Only use facts supported by the evidence.\n\n"
     << "Reasoning history:\n" << or_none(history) << "\n\n"
     << "Sub-query:\n" << sub_query << "\n\n"
     << "Evidence:\n" << (evidence.empty() ? std::string("(") + std::string(kNoEvidence) + ")" : std::string(evidence));
  return os.str();
}

std::string render_sub(std::string_view sub_query, std::string_view history) {
  std::ostringstream os;
  os << "The reasoning so far does not yet settle the question. Write one new, more specific "
        "sub-query that fills the most important remaining knowledge gap. Output only the sub-query.\n\n"
     << "Reasoning history:\n" << or_none(history) << "\n\n"
     << "Last sub-query:\n" << sub_query;
  return os.str();
}

std::string render_final(std::string_view query, std::string_view history, const TaskSpec& task) {
  std::ostringstream os;
  os << query << "\n\n"
     << "Reasoning history:\n" << or_none(history) << "\n\n"
     << "Using the patient record and the reasoning history, give the final prediction. "
     << answer_format_instruction(task);
  return os.str();
}

}  // namespace ghar::prompts
