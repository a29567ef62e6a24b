#ifndef TRIPMEM_DATAGEN_HPP
#define TRIPMEM_DATAGEN_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "tripmem/protocol.hpp"
#include "tripmem/retrieval.hpp"

namespace tripmem {

struct EntityMention {
  std::string entity_name;
  std::size_t sentence_index = 0;
  std::size_t begin = 0;  // [begin, end) within the sentence
  std::size_t end = 0;
  bool is_full_mention = true;  // false for pronouns and other short forms
  std::size_t position_idx = 0;  // document-level character offset (computed)
};

struct DocumentTriple {
  std::string subject;
  std::string relation;
  std::string object;
  std::vector<std::size_t> evidence_sentences;
};

/// Entity/relation annotated document. The document text is the sentences
/// joined with single spaces; mention offsets refer to that text.
struct AnnotatedDocument {
  std::string id;
  std::vector<std::string> sentences;
  std::vector<EntityMention> mentions;
  std::vector<DocumentTriple> triples;

  std::string document_text() const;
  /// Character offset of each sentence within document_text().
  std::vector<std::size_t> sentence_offsets() const;
  /// Fills position_idx from (sentence_index, begin) and checks bounds and
  /// per-entity position monotonicity. Throws ConfigError on bad data.
  void finalize();
  /// Mentions sorted by position_idx (stable).
  std::vector<const EntityMention*> mentions_in_order() const;
};

/// Loads a corpus file: {"documents": [{"id", "sentences", "mentions":
/// [{"entity", "sentence", "begin", "end", "full"}], "triples": [{"subject",
/// "relation", "object", "evidence"}]}]}.
std::vector<AnnotatedDocument> load_corpus(const std::string& path);

/// One write-scan finetuning example. The loss applies to target_text only.
struct WriteExample {
  std::string input_text;   // serialized scan input, no loss
  std::string target_text;  // serialized write call, loss applied

  bool operator==(const WriteExample&) const = default;
};

/// One memory-read finetuning example. The loss never applies to
/// results_text; it applies to pretext only for the document's first read.
struct ReadExample {
  std::string pretext;           // document text up to the read, ending with `(\{`
  std::string call_text;         // `MEM_READ(...)-->`
  std::string results_text;      // `name,name\})`
  std::string posttext;          // up to the next read or the document end
  bool loss_on_pretext = false;
  bool loss_on_call = true;
  bool loss_on_results = false;
  bool loss_on_posttext = true;

  // Structured form of the call, for inspection and round trips.
  std::vector<MemoryQuery> queries;
  std::vector<std::string> result_names;
  std::string target_entity;
  std::size_t read_position = 0;

  bool operator==(const ReadExample&) const = default;
};

using TrainingRecord = std::variant<WriteExample, ReadExample>;

/// Removes the protocol's reserved substrings from a name; names that vanish
/// entirely become "_".
std::string sanitize_name(std::string_view name);

/// Log of names the sanitizer changed, original to sanitized, deduplicated.
class SanitizationLog {
 public:
  std::string apply(std::string_view name);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::unordered_set<std::string> recorded_;
};

/// One example per sentence. A triple is included for sentence i iff one
/// participant has a full mention in sentence i and the other a full mention
/// in sentences 0..i; sentences with no qualifying triple get an empty write
/// call. Each triple appears at most once per example.
std::vector<WriteExample> generate_write_examples(const AnnotatedDocument& document,
                                                  SanitizationLog* log = nullptr);

enum class SeenScope {
  corpus,    // seen-sets persist across documents
  document,  // seen-sets reset per document
};

/// Memory-read example generation. Scans entity mentions in order; for each
/// target mention it queries the memory for the target's not-yet-seen triples
/// whose other entity has already appeared, keeps the three queries with the
/// smallest result sets (ties in construction order), places the read right
/// before the target mention and substitutes {target} when the merged results
/// are empty. Seen-sets persist across generate() calls under
/// SeenScope::corpus.
class ReadExampleGenerator {
 public:
  ReadExampleGenerator(const QueryEngine& engine, RetrievalThresholds thresholds,
                       SeenScope scope = SeenScope::corpus);

  std::vector<ReadExample> generate(const AnnotatedDocument& document);

  const SanitizationLog& sanitization_log() const { return log_; }
  std::size_t seen_triple_count() const { return seen_triples_.size(); }
  std::size_t seen_entity_count() const { return seen_entities_.size(); }

  static constexpr std::size_t kMaxQueriesPerRead = 3;

 private:
  const QueryEngine& engine_;
  RetrievalThresholds thresholds_;
  SeenScope scope_;
  std::unordered_set<std::string> seen_triples_;   // normalized s|r|o keys
  std::unordered_set<std::string> seen_entities_;  // normalized names
  SanitizationLog log_;
};

/// Line-delimited export: a header record, then one JSON record per example.
/// import(export(x)) == x.
void export_examples(const std::vector<TrainingRecord>& records, const std::string& path);
std::vector<TrainingRecord> import_examples(const std::string& path);

}  // namespace tripmem

#endif  // TRIPMEM_DATAGEN_HPP
