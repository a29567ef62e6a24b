#ifndef TRIPMEM_HARNESS_HPP
#define TRIPMEM_HARNESS_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tripmem/generator.hpp"
#include "tripmem/memory_store.hpp"
#include "tripmem/protocol.hpp"
#include "tripmem/retrieval.hpp"

namespace tripmem {

/// Input of one write-scan step: the sentences seen so far plus the focus
/// sentence the write call must cover.
struct WriteScanInput {
  std::vector<std::string> pretext_sentences;
  std::string focus_sentence;

  /// Pretext sentences joined with single spaces, then the focus sentence
  /// bracketed by the user markers, concatenated without extra separators.
  std::string serialize() const;
};

struct DecodeWriteOptions {
  // Token treated as the call terminator during late stopping. Generators
  // must emit it as one token.
  std::string close_token = std::string(markers::call_close);
  int patience = 5;  // halt after this many consecutive non-improving closes
  std::size_t max_tokens = 4096;
};

/// Bookkeeping of the late-stopping scan, exposed for tests.
struct LateStopState {
  std::optional<std::size_t> best_close_position;
  double best_avg_logprob = 0.0;
  int consecutive_non_improvements = 0;
  int k_patience = 5;
};

struct DecodeWriteTrace {
  WriteCall call;
  std::string raw_text;              // text cut at the winning close
  LateStopState late_stop;
  std::size_t generator_calls = 0;
};

/// Greedy decode with late stopping: whenever the close token ranks first,
/// its position and the running average logprob (close included) are
/// recorded, the second-ranked token is taken instead, and decoding goes on
/// until `patience` consecutive recorded closes fail to improve on the best
/// score. The output is cut at the best-scoring close and parsed.
DecodeWriteTrace decode_write_traced(const WriteScanInput& input, TokenGenerator& generator,
                                     const DecodeWriteOptions& options = {});
WriteCall decode_write(const WriteScanInput& input, TokenGenerator& generator,
                       const DecodeWriteOptions& options = {});

/// Scans a pre-split document sentence by sentence: sentence i is decoded
/// with sentences 0..i-1 as pretext and every extracted triple is inserted
/// into the store. Returns the calls in sentence order. Generator failures
/// propagate wrapped with the sentence index.
std::vector<WriteCall> run_write_scan(const std::vector<std::string>& document_sentences,
                                      TokenGenerator& generator, MemoryStore& store,
                                      const DecodeWriteOptions& options = {});

enum class RemovalReason { none, empty_results, oversized_results, superseded };

struct ExecutedReadCall {
  ReadCall call;
  std::vector<std::string> result_names;
  std::size_t raw_result_count = 0;
  bool removed = false;
  RemovalReason reason = RemovalReason::none;
};

struct ReadDecodeOptions {
  // Appended to the prompt and primed into the parser before decoding; used
  // to force a memory read at a chosen position (e.g. `(\{MEM_READ(`).
  std::string forced_call_prefix;
  std::string eos_token = "</s>";
  std::size_t max_tokens = 4096;
};

struct ReadDecodeResult {
  std::string text;  // final context after all rewrites, prompt included
  std::vector<ExecutedReadCall> calls;
};

/// Token-by-token decode with memory-read interception. A completed `)-->`
/// trigger executes the queries and appends the results; stale calls are
/// removed per the rewrite rules. When a call is rejected for empty or
/// oversized results, decoding resumes from the pre-call context with the
/// generator's next-ranked continuation. The prompt itself is never
/// rewritten.
ReadDecodeResult run_read_decode(std::string_view prompt, TokenGenerator& generator,
                                 const QueryEngine& engine, const RetrievalThresholds& thresholds,
                                 const ReadDecodeOptions& options = {});

/// Mixture probability of one token: p_mr * p_trigger + p_no_mr *
/// (1 - p_trigger). Inputs must lie in [0, 1]; callers pass p_mr = 0 at
/// positions where no memory read occurs.
double combine_token_probability(double p_no_mr, double p_mr, double p_trigger);

struct TokenSpan {
  std::size_t begin = 0;  // [begin, end) token indices
  std::size_t end = 0;
};

struct MemoryReadAnnotation {
  std::size_t position = 0;  // token index the read precedes
  std::vector<MemoryQuery> queries;
};

/// Tokenized text with gold memory-read positions and entity span labels.
/// Tokens carry their own spacing; the context fed to the generator is their
/// plain concatenation.
struct PerplexityDocument {
  std::vector<std::string> tokens;
  std::vector<MemoryReadAnnotation> memory_reads;
  std::vector<TokenSpan> target_spans;
  std::vector<TokenSpan> entity_spans;
};

struct PerplexityOptions {
  std::string mr_open_token = std::string(markers::call_open);
};

struct PerplexityReport {
  std::optional<double> overall;
  std::optional<double> target;
  std::optional<double> entity;
};

/// exp(-mean log p) over all tokens, the target spans and the entity spans,
/// with p the mixture probability above. Memory reads happen only at the
/// annotated positions, where the call (with results retrieved from the
/// store) is spliced into the conditioning context. Metrics over empty span
/// sets are reported as absent.
PerplexityReport evaluate_perplexity(const PerplexityDocument& document, TokenGenerator& generator,
                                     const QueryEngine& engine,
                                     const RetrievalThresholds& thresholds,
                                     const PerplexityOptions& options = {});

}  // namespace tripmem

#endif  // TRIPMEM_HARNESS_HPP
