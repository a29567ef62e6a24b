#ifndef TRIPMEM_PROTOCOL_HPP
#define TRIPMEM_PROTOCOL_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tripmem/retrieval.hpp"

namespace tripmem {

// Exact marker strings. Markers are plain character sequences, not special
// vocabulary ids, so the protocol works with any tokenizer.
namespace markers {
inline constexpr std::string_view call_open = "(\\{";
inline constexpr std::string_view call_close = "\\})";
inline constexpr std::string_view user_start = "(\\{USER_ST\\})";
inline constexpr std::string_view user_end = "(\\{USER_END\\})";
inline constexpr std::string_view mem_write_open = "(\\{MEM_WRITE-->";
inline constexpr std::string_view mem_read_open = "(\\{MEM_READ(";
inline constexpr std::string_view read_trigger = ")-->";
inline constexpr std::string_view field_sep = ">>";
inline constexpr std::string_view triple_sep = ";";
inline constexpr std::string_view result_sep = ",";
}  // namespace markers

struct TripleText {
  std::string subject;
  std::string relation;
  std::string object;

  bool operator==(const TripleText&) const = default;
};

/// Payload of a MEM_WRITE call. May be empty (a sentence with no relations).
struct WriteCall {
  std::vector<TripleText> triples;

  bool operator==(const WriteCall&) const = default;
};

/// Payload of a MEM_READ call. `results` stays empty until the call has been
/// executed; an executed call with zero hits carries an empty list.
struct ReadCall {
  std::vector<MemoryQuery> queries;
  std::optional<std::vector<std::string>> results;

  bool operator==(const ReadCall&) const = default;
};

// Serializers. Field values must not contain the reserved substrings `>>`,
// `;`, `(\{`, `\})`; read-query fields additionally must not contain `)-->`
// and result names must not contain `,`. Violations raise ReservedTokenError.
std::string serialize_write(const WriteCall& call);
std::string serialize_read(const ReadCall& call);
std::string serialize_query(const MemoryQuery& query);

// Strict parsers for complete call strings. Raise MalformedCallError.
WriteCall parse_write_call(std::string_view text);
ReadCall parse_read_call(std::string_view text);
MemoryQuery parse_query(std::string_view text);

enum class StreamEventKind {
  plain_text,
  write_call,
  read_call_open,    // fires when `)-->` of a MEM_READ completes
  read_call_closed,  // fires when `\})` completes
  malformed_call,    // unparseable span, flushed back as prose
};

/// One intercepted span of a token stream. `text` is the newly covered text:
/// for read_call_open the partial span through `)-->`, for read_call_closed
/// the whole call span. Concatenating plain_text, write_call,
/// read_call_closed and malformed_call texts (read_call_open is a
/// notification, not a span consumer) reproduces the input stream.
struct StreamEvent {
  StreamEventKind kind = StreamEventKind::plain_text;
  std::string text;
  std::size_t begin = 0;  // absolute character offsets in the stream
  std::size_t end = 0;
  std::optional<WriteCall> write;
  std::optional<ReadCall> read;
  // Distinct results before any cap; parsers set it to the parsed result
  // count, harnesses overwrite it with the engine's raw count.
  std::size_t raw_result_count = 0;
};

struct StreamParserOptions {
  // A call whose terminator has not completed within this many characters
  // after the opener is flushed as malformed_call.
  std::size_t lookahead_limit = 512;
};

/// Incremental call interceptor. Chunks may split markers at any byte; the
/// emitted event sequence depends only on the concatenated stream, never on
/// chunk boundaries. Plain text is coalesced and emitted when a call opener
/// confirms or at finish().
class StreamParser {
 public:
  explicit StreamParser(StreamParserOptions options = {});

  std::vector<StreamEvent> feed(std::string_view chunk);

  /// Terminates the stream: an unfinished call is flushed as malformed_call
  /// and pending prose as plain_text. The parser is reset afterwards.
  std::vector<StreamEvent> finish();

 private:
  enum class Mode { prose, write_body, read_queries, read_results };

  bool step(std::vector<StreamEvent>& out);
  void consume(std::size_t n);
  void flush_prose(std::vector<StreamEvent>& out);
  void begin_call(Mode mode, std::string_view opener, std::vector<StreamEvent>& out);
  void abort_call(std::string_view extra, std::vector<StreamEvent>& out);

  StreamParserOptions options_;
  Mode mode_ = Mode::prose;
  std::string buffer_;
  std::size_t buffer_base_ = 0;  // absolute offset of buffer_[0]
  std::string prose_;
  std::size_t prose_begin_ = 0;
  std::string call_text_;  // consumed call text, opener included
  std::size_t call_begin_ = 0;
  std::size_t call_body_len_ = 0;  // consumed chars after the opener
  ReadCall pending_read_;
};

/// Context-removal rules for stale memory reads. Applied right after the
/// event's text has been appended to the context:
///   (i)  a completed call whose result set is empty is removed;
///   (ii) a completed call whose raw result count exceeds q_thr is removed;
///   (iii) when a new read call opens, the previous completed call is
///         removed and the new (still incomplete) call is kept.
/// Prose outside call spans is never touched.
std::string rewrite_context(std::string_view context, const StreamEvent& event,
                            const RetrievalThresholds& policy);

/// Byte ranges [begin, end) of all completed MEM_READ spans in `text`.
std::vector<std::pair<std::size_t, std::size_t>> find_completed_read_spans(std::string_view text);

}  // namespace tripmem

#endif  // TRIPMEM_PROTOCOL_HPP
