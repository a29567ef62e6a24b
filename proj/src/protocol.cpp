#include "tripmem/protocol.hpp"

#include <algorithm>

#include "tripmem/errors.hpp"

namespace tripmem {

namespace {

std::vector<std::string_view> split_keep_empty(std::string_view text, std::string_view sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(sep, pos);
    if (hit == std::string_view::npos) {
      parts.push_back(text.substr(pos));
      return parts;
    }
    parts.push_back(text.substr(pos, hit - pos));
    pos = hit + sep.size();
  }
}

void require_clean(std::string_view value, const char* role, bool reject_trigger,
                   bool reject_comma) {
  if (value.empty()) {
    throw ReservedTokenError(std::string(role) + " must not be empty");
  }
  for (std::string_view reserved :
       {markers::field_sep, markers::triple_sep, markers::call_open, markers::call_close}) {
    if (value.find(reserved) != std::string_view::npos) {
      throw ReservedTokenError(std::string(role) + " contains reserved substring '" +
                               std::string(reserved) + "': " + std::string(value));
    }
  }
  if (reject_trigger && value.find(markers::read_trigger) != std::string_view::npos) {
    throw ReservedTokenError(std::string(role) + " contains reserved substring ')-->': " +
                             std::string(value));
  }
  if (reject_comma && value.find(markers::result_sep) != std::string_view::npos) {
    throw ReservedTokenError(std::string(role) + " contains reserved substring ',': " +
                             std::string(value));
  }
}

}  // namespace

std::string serialize_query(const MemoryQuery& query) {
  require_clean(query.bound_entity_name, "query entity", /*reject_trigger=*/true,
                /*reject_comma=*/false);
  require_clean(query.relation_name, "query relation", /*reject_trigger=*/true,
                /*reject_comma=*/false);
  std::string out;
  if (query.direction == QueryDirection::object_query) {
    out += query.bound_entity_name;
    out += markers::field_sep;
    out += query.relation_name;
    out += markers::field_sep;
  } else {
    out += markers::field_sep;
    out += query.relation_name;
    out += markers::field_sep;
    out += query.bound_entity_name;
  }
  return out;
}

MemoryQuery parse_query(std::string_view text) {
  const auto parts = split_keep_empty(text, markers::field_sep);
  if (parts.size() != 3) {
    throw MalformedCallError("query must have exactly three '>>'-separated fields: " +
                             std::string(text));
  }
  if (parts[1].empty()) {
    throw MalformedCallError("query relation is empty: " + std::string(text));
  }
  const bool has_subject = !parts[0].empty();
  const bool has_object = !parts[2].empty();
  if (has_subject == has_object) {
    throw MalformedCallError("query must bind exactly one entity slot: " + std::string(text));
  }
  MemoryQuery query;
  query.relation_name = std::string(parts[1]);
  if (has_subject) {
    query.direction = QueryDirection::object_query;
    query.bound_entity_name = std::string(parts[0]);
  } else {
    query.direction = QueryDirection::subject_query;
    query.bound_entity_name = std::string(parts[2]);
  }
  return query;
}

std::string serialize_write(const WriteCall& call) {
  std::string out(markers::mem_write_open);
  bool first = true;
  for (const TripleText& triple : call.triples) {
    require_clean(triple.subject, "triple subject", false, false);
    require_clean(triple.relation, "triple relation", false, false);
    require_clean(triple.object, "triple object", false, false);
    if (!first) out += markers::triple_sep;
    first = false;
    out += triple.subject;
    out += markers::field_sep;
    out += triple.relation;
    out += markers::field_sep;
    out += triple.object;
  }
  out += markers::call_close;
  return out;
}

namespace {

WriteCall parse_write_body(std::string_view body) {
  WriteCall call;
  if (body.empty()) return call;
  for (std::string_view segment : split_keep_empty(body, markers::triple_sep)) {
    const auto fields = split_keep_empty(segment, markers::field_sep);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw MalformedCallError("bad triple segment '" + std::string(segment) + "'");
    }
    call.triples.push_back(
        TripleText{std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  return call;
}

std::vector<std::string> parse_result_names(std::string_view body) {
  std::vector<std::string> names;
  if (body.empty()) return names;
  for (std::string_view name : split_keep_empty(body, markers::result_sep)) {
    if (name.empty()) {
      throw MalformedCallError("empty result name in '" + std::string(body) + "'");
    }
    names.emplace_back(name);
  }
  return names;
}

std::vector<MemoryQuery> parse_query_section(std::string_view body) {
  if (body.empty()) {
    throw MalformedCallError("read call carries no queries");
  }
  std::vector<MemoryQuery> queries;
  for (std::string_view segment : split_keep_empty(body, markers::triple_sep)) {
    queries.push_back(parse_query(segment));
  }
  return queries;
}

}  // namespace

WriteCall parse_write_call(std::string_view text) {
  if (!text.starts_with(markers::mem_write_open) || !text.ends_with(markers::call_close) ||
      text.size() < markers::mem_write_open.size() + markers::call_close.size()) {
    throw MalformedCallError("not a MEM_WRITE call: " + std::string(text));
  }
  const std::string_view body = text.substr(
      markers::mem_write_open.size(),
      text.size() - markers::mem_write_open.size() - markers::call_close.size());
  return parse_write_body(body);
}

std::string serialize_read(const ReadCall& call) {
  if (call.queries.empty()) {
    throw MalformedCallError("read call needs at least one query");
  }
  std::string out(markers::mem_read_open);
  bool first = true;
  for (const MemoryQuery& query : call.queries) {
    if (!first) out += markers::triple_sep;
    first = false;
    out += serialize_query(query);
  }
  out += markers::read_trigger;
  if (call.results) {
    bool first_name = true;
    for (const std::string& name : *call.results) {
      require_clean(name, "result name", false, /*reject_comma=*/true);
      if (!first_name) out += markers::result_sep;
      first_name = false;
      out += name;
    }
    out += markers::call_close;
  }
  return out;
}

ReadCall parse_read_call(std::string_view text) {
  if (!text.starts_with(markers::mem_read_open)) {
    throw MalformedCallError("not a MEM_READ call: " + std::string(text));
  }
  std::string_view rest = text.substr(markers::mem_read_open.size());
  const std::size_t trigger = rest.find(markers::read_trigger);
  if (trigger == std::string_view::npos) {
    throw MalformedCallError("read call has no ')-->' trigger: " + std::string(text));
  }
  ReadCall call;
  call.queries = parse_query_section(rest.substr(0, trigger));
  rest = rest.substr(trigger + markers::read_trigger.size());
  if (rest.empty()) {
    return call;  // pre-execution form
  }
  if (!rest.ends_with(markers::call_close)) {
    throw MalformedCallError("read call results not closed: " + std::string(text));
  }
  call.results = parse_result_names(rest.substr(0, rest.size() - markers::call_close.size()));
  return call;
}

StreamParser::StreamParser(StreamParserOptions options) : options_(options) {}

void StreamParser::consume(std::size_t n) {
  buffer_.erase(0, n);
  buffer_base_ += n;
}

void StreamParser::flush_prose(std::vector<StreamEvent>& out) {
  if (prose_.empty()) return;
  StreamEvent ev;
  ev.kind = StreamEventKind::plain_text;
  ev.text = std::move(prose_);
  ev.begin = prose_begin_;
  ev.end = prose_begin_ + ev.text.size();
  out.push_back(std::move(ev));
  prose_.clear();
}

void StreamParser::begin_call(Mode mode, std::string_view opener, std::vector<StreamEvent>& out) {
  flush_prose(out);
  mode_ = mode;
  call_begin_ = buffer_base_;
  call_text_ = std::string(opener);
  call_body_len_ = 0;
  pending_read_ = ReadCall{};
  consume(opener.size());
}

// Flushes the current call as malformed_call and resumes prose scanning.
void StreamParser::abort_call(std::string_view extra, std::vector<StreamEvent>& out) {
  StreamEvent ev;
  ev.kind = StreamEventKind::malformed_call;
  ev.text = call_text_;
  ev.text += extra;
  ev.begin = call_begin_;
  ev.end = call_begin_ + ev.text.size();
  out.push_back(std::move(ev));
  consume(extra.size());
  call_text_.clear();
  mode_ = Mode::prose;
}

bool StreamParser::step(std::vector<StreamEvent>& out) {
  if (mode_ == Mode::prose) {
    const std::size_t hit = buffer_.find(markers::call_open);
    if (hit == std::string::npos) {
      // Keep back any buffer suffix that could still grow into `(\{`.
      std::size_t hold = 0;
      for (std::size_t len = std::min<std::size_t>(2, buffer_.size()); len >= 1; --len) {
        if (markers::call_open.substr(0, len) ==
            std::string_view(buffer_).substr(buffer_.size() - len)) {
          hold = len;
          break;
        }
      }
      const std::size_t take = buffer_.size() - hold;
      if (take == 0) return false;
      if (prose_.empty()) prose_begin_ = buffer_base_;
      prose_.append(buffer_, 0, take);
      consume(take);
      return false;
    }
    if (hit > 0) {
      if (prose_.empty()) prose_begin_ = buffer_base_;
      prose_.append(buffer_, 0, hit);
      consume(hit);
    }
    // Buffer now starts with `(\{`; decide which call it is, if any.
    const std::string_view buf(buffer_);
    auto result = [&](std::string_view opener) {
      return buf.size() >= opener.size() ? (buf.starts_with(opener) ? 1 : -1)
                                         : (opener.starts_with(buf) ? 0 : -1);
    };
    const int as_write = result(markers::mem_write_open);
    const int as_read = result(markers::mem_read_open);
    if (as_write == 1) {
      begin_call(Mode::write_body, markers::mem_write_open, out);
      return true;
    }
    if (as_read == 1) {
      begin_call(Mode::read_queries, markers::mem_read_open, out);
      return true;
    }
    if (as_write == 0 || as_read == 0) return false;  // need more bytes
    // A bare `(\{` that opens no call is ordinary text.
    if (prose_.empty()) prose_begin_ = buffer_base_;
    prose_.append(buffer_, 0, markers::call_open.size());
    consume(markers::call_open.size());
    return true;
  }

  const std::string_view terminator =
      mode_ == Mode::read_queries ? markers::read_trigger : markers::call_close;
  const std::size_t hit = buffer_.find(terminator);
  const bool terminates_in_budget =
      hit != std::string::npos &&
      call_body_len_ + hit + terminator.size() <= options_.lookahead_limit;

  if (!terminates_in_budget) {
    if (call_body_len_ + buffer_.size() >= options_.lookahead_limit) {
      abort_call(std::string_view(buffer_).substr(0, options_.lookahead_limit - call_body_len_),
                 out);
      return true;
    }
    return false;  // wait for more input
  }

  const std::string_view body = std::string_view(buffer_).substr(0, hit);
  const std::string_view covered = std::string_view(buffer_).substr(0, hit + terminator.size());

  if (mode_ == Mode::write_body) {
    StreamEvent ev;
    ev.kind = StreamEventKind::write_call;
    try {
      ev.write = parse_write_body(body);
    } catch (const MalformedCallError&) {
      abort_call(covered, out);
      return true;
    }
    call_text_ += covered;
    ev.text = std::move(call_text_);
    ev.begin = call_begin_;
    ev.end = call_begin_ + ev.text.size();
    out.push_back(std::move(ev));
    consume(covered.size());
    call_text_.clear();
    mode_ = Mode::prose;
    return true;
  }

  if (mode_ == Mode::read_queries) {
    try {
      pending_read_.queries = parse_query_section(body);
    } catch (const MalformedCallError&) {
      abort_call(covered, out);
      return true;
    }
    call_text_ += covered;
    call_body_len_ += covered.size();
    consume(covered.size());
    StreamEvent ev;
    ev.kind = StreamEventKind::read_call_open;
    ev.text = call_text_;
    ev.begin = call_begin_;
    ev.end = call_begin_ + ev.text.size();
    ev.read = pending_read_;
    out.push_back(std::move(ev));
    mode_ = Mode::read_results;
    return true;
  }

  // read_results
  StreamEvent ev;
  ev.kind = StreamEventKind::read_call_closed;
  try {
    pending_read_.results = parse_result_names(body);
  } catch (const MalformedCallError&) {
    abort_call(covered, out);
    return true;
  }
  call_text_ += covered;
  ev.text = std::move(call_text_);
  ev.begin = call_begin_;
  ev.end = call_begin_ + ev.text.size();
  ev.read = pending_read_;
  ev.raw_result_count = pending_read_.results->size();
  out.push_back(std::move(ev));
  consume(covered.size());
  call_text_.clear();
  mode_ = Mode::prose;
  return true;
}

std::vector<StreamEvent> StreamParser::feed(std::string_view chunk) {
  buffer_.append(chunk);
  std::vector<StreamEvent> out;
  while (step(out)) {
  }
  return out;
}

std::vector<StreamEvent> StreamParser::finish() {
  std::vector<StreamEvent> out;
  while (step(out)) {
  }
  if (mode_ != Mode::prose) {
    abort_call(buffer_, out);
    buffer_.clear();
  } else if (!buffer_.empty()) {
    if (prose_.empty()) prose_begin_ = buffer_base_;
    prose_.append(buffer_);
    consume(buffer_.size());
  }
  flush_prose(out);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> find_completed_read_spans(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find(markers::mem_read_open, pos);
    if (open == std::string_view::npos) break;
    const std::size_t trigger = text.find(markers::read_trigger, open + markers::mem_read_open.size());
    if (trigger == std::string_view::npos) break;
    const std::size_t close = text.find(markers::call_close, trigger + markers::read_trigger.size());
    if (close == std::string_view::npos) break;
    const std::size_t end = close + markers::call_close.size();
    spans.emplace_back(open, end);
    pos = end;
  }
  return spans;
}

std::string rewrite_context(std::string_view context, const StreamEvent& event,
                            const RetrievalThresholds& policy) {
  if (event.kind == StreamEventKind::read_call_closed) {
    const bool empty_results = !event.read || !event.read->results || event.read->results->empty();
    const bool oversized = event.raw_result_count > policy.q_thr;
    if (!empty_results && !oversized) return std::string(context);
    const std::size_t hit = context.rfind(event.text);
    if (hit == std::string_view::npos) return std::string(context);
    std::string out(context.substr(0, hit));
    out += context.substr(hit + event.text.size());
    return out;
  }

  if (event.kind == StreamEventKind::read_call_open) {
    // A new call supersedes the previous one; drop the last completed span,
    // which by construction lies before the new (still open) call.
    const auto spans = find_completed_read_spans(context);
    if (spans.empty()) return std::string(context);
    const auto [begin, end] = spans.back();
    std::string out(context.substr(0, begin));
    out += context.substr(end);
    return out;
  }

  return std::string(context);
}

}  // namespace tripmem
