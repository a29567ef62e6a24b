#ifndef TRIPMEM_EDITING_HPP
#define TRIPMEM_EDITING_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tripmem/harness.hpp"
#include "tripmem/memory_store.hpp"
#include "tripmem/retrieval.hpp"

namespace tripmem {

struct EditCase {
  std::string prompt;
  std::string edit_answer;
  std::string generalization_prompt;
  std::string locality_prompt;
  std::string locality_expected;
};

/// Tab-separated, one case per line: prompt, edit answer, generalization
/// prompt, locality prompt, locality expected answer.
std::vector<EditCase> load_edit_cases(const std::string& path);
void save_edit_cases(std::span<const EditCase> cases, const std::string& path);

/// Write-scan input for one edit: the question with the answer appended via
/// the fixed " It is or they are " connective, no pretext.
WriteScanInput format_edit_input(const EditCase& edit);

struct EditCaseIngestion {
  std::size_t triples_extracted = 0;
  std::size_t replacements = 0;
  bool empty_extraction = false;
  std::string error;  // generator failure, processing continued
};

struct IngestionReport {
  std::vector<EditCaseIngestion> cases;
  std::size_t total_triples = 0;
  std::size_t total_replacements = 0;
  std::size_t empty_extractions = 0;
  std::size_t failed_cases = 0;

  std::string to_text() const;
};

/// Pushes each edit through the write decoder and applies the extracted
/// triples with replacement semantics. Generator failures are recorded per
/// case and processing continues.
IngestionReport apply_edits(std::span<const EditCase> cases, TokenGenerator& generator,
                            MemoryStore& store, const DecodeWriteOptions& options = {});

struct EditScores {
  double reliability = 0.0;
  double generalization = 0.0;
  double locality = 0.0;
  double average = 0.0;  // mean of the three

  static EditScores of(double reliability, double generalization, double locality);
};

// Failure classes: the edit never reached the store, retrieval missed it, or
// it was retrieved but the answer ignored it.
enum class EditFailure { none, write_miss, read_miss, use_miss };

struct EditCaseEvaluation {
  std::string answer;                 // normalized answer on the edit prompt
  std::string generalization_answer;
  std::string locality_answer;
  bool reliable = false;
  bool generalized = false;
  bool local = false;
  EditFailure failure = EditFailure::none;  // diagnosis when !reliable
};

struct EditEvalReport {
  EditScores scores;
  std::vector<EditCaseEvaluation> cases;

  std::string to_text() const;
};

/// Few-shot QA prompt shape: question/answer exemplars, the last of which
/// carries a full memory-read call before its answer.
struct QaPromptConfig {
  struct Exemplar {
    std::string question;
    std::string answer;
    std::string call_text;  // full call span, empty for plain exemplars
  };
  std::vector<Exemplar> exemplars;

  static QaPromptConfig defaults();
  std::string render(std::string_view question) const;
};

/// Answer matching form: lowercase, punctuation stripped, leading articles
/// dropped, whitespace collapsed.
std::string normalize_answer(std::string_view answer);

/// Answer text of a decoded QA continuation: everything after the last
/// completed call span, stripped of a leading "A:" marker.
std::string extract_answer(std::string_view generated);

/// Runs every case's three prompts through the read pipeline with a forced
/// memory read after the question, and scores normalized exact match.
/// Never mutates the store.
EditEvalReport evaluate_edits(std::span<const EditCase> cases, TokenGenerator& generator,
                              const QueryEngine& engine, const RetrievalThresholds& thresholds,
                              const QaPromptConfig& prompt_config = QaPromptConfig::defaults());

}  // namespace tripmem

#endif  // TRIPMEM_EDITING_HPP
