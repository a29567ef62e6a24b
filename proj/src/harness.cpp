#include "tripmem/harness.hpp"

#include <cmath>
#include <limits>

#include "tripmem/errors.hpp"

namespace tripmem {

std::string WriteScanInput::serialize() const {
  std::string out;
  bool first = true;
  for (const std::string& sentence : pretext_sentences) {
    if (!first) out += ' ';
    first = false;
    out += sentence;
  }
  out += markers::user_start;
  out += focus_sentence;
  out += markers::user_end;
  return out;
}

DecodeWriteTrace decode_write_traced(const WriteScanInput& input, TokenGenerator& generator,
                                     const DecodeWriteOptions& options) {
  DecodeWriteTrace trace;
  trace.late_stop.k_patience = options.patience;
  trace.late_stop.best_avg_logprob = -std::numeric_limits<double>::infinity();

  std::string context = input.serialize();
  std::vector<std::string> emitted;
  std::vector<std::size_t> lengths;  // prefix lengths for the final cut
  double logprob_sum = 0.0;

  while (emitted.size() < options.max_tokens) {
    ++trace.generator_calls;
    const std::vector<TokenScore> ranked = generator.next_distribution(context);
    if (ranked.empty()) break;
    const TokenScore& top = ranked.front();
    if (top.token == options.close_token) {
      const std::size_t position = emitted.size();
      const double avg = (logprob_sum + top.logprob) / static_cast<double>(position + 1);
      if (avg > trace.late_stop.best_avg_logprob) {
        trace.late_stop.best_avg_logprob = avg;
        trace.late_stop.best_close_position = position;
        trace.late_stop.consecutive_non_improvements = 0;
      } else {
        ++trace.late_stop.consecutive_non_improvements;
        if (trace.late_stop.consecutive_non_improvements >= options.patience) break;
      }
      if (ranked.size() < 2) break;  // nothing to continue with
      emitted.push_back(ranked[1].token);
      logprob_sum += ranked[1].logprob;
      context += ranked[1].token;
    } else {
      emitted.push_back(top.token);
      logprob_sum += top.logprob;
      context += top.token;
    }
  }

  if (!trace.late_stop.best_close_position.has_value()) {
    throw MalformedCallError("write decode never saw the close token '" + options.close_token +
                             "'");
  }

  std::string text;
  for (std::size_t i = 0; i < *trace.late_stop.best_close_position; ++i) {
    text += emitted[i];
  }
  text += options.close_token;
  trace.raw_text = std::move(text);
  trace.call = parse_write_call(trace.raw_text);
  return trace;
}

WriteCall decode_write(const WriteScanInput& input, TokenGenerator& generator,
                       const DecodeWriteOptions& options) {
  return decode_write_traced(input, generator, options).call;
}

std::vector<WriteCall> run_write_scan(const std::vector<std::string>& document_sentences,
                                      TokenGenerator& generator, MemoryStore& store,
                                      const DecodeWriteOptions& options) {
  std::vector<WriteCall> calls;
  calls.reserve(document_sentences.size());
  WriteScanInput input;
  for (std::size_t i = 0; i < document_sentences.size(); ++i) {
    input.focus_sentence = document_sentences[i];
    WriteCall call;
    try {
      call = decode_write(input, generator, options);
    } catch (const GeneratorError& e) {
      throw GeneratorError("sentence " + std::to_string(i) + ": " + e.what());
    }
    for (const TripleText& triple : call.triples) {
      store.insert_triple(triple.subject, triple.relation, triple.object);
    }
    calls.push_back(std::move(call));
    input.pretext_sentences.push_back(document_sentences[i]);
  }
  return calls;
}

namespace {

// StreamParser incarnation with global offsets. The parser is replaced after
// each executed read so injected result text never passes through it; `base`
// keeps event offsets monotonic across incarnations.
struct ParserLane {
  StreamParser parser;
  std::size_t base = 0;
  std::size_t fed = 0;

  std::vector<StreamEvent> feed(std::string_view text) {
    auto events = parser.feed(text);
    fed += text.size();
    for (StreamEvent& ev : events) {
      ev.begin += base;
      ev.end += base;
    }
    return events;
  }

  void reset() {
    parser = StreamParser();
    base += fed;
    fed = 0;
  }
};

}  // namespace

ReadDecodeResult run_read_decode(std::string_view prompt, TokenGenerator& generator,
                                 const QueryEngine& engine, const RetrievalThresholds& thresholds,
                                 const ReadDecodeOptions& options) {
  ReadDecodeResult result;
  std::string context(prompt);
  const std::size_t prompt_len = context.size();

  struct Step {
    std::size_t gen_begin;
    std::size_t gen_end;
    std::size_t rank;
  };
  std::vector<Step> steps;
  ParserLane lane;
  std::size_t fed_total = 0;
  std::size_t pending_rank = 0;
  std::size_t tokens_emitted = 0;

  // Rewrites touch only the generated region; the prompt is frozen.
  auto rewrite_tail = [&](const StreamEvent& ev) {
    std::string tail = context.substr(prompt_len);
    tail = rewrite_context(tail, ev, thresholds);
    context.resize(prompt_len);
    context += tail;
  };

  // Processes parser events for one fed span. Stops after the first read
  // trigger: the parser restarts there and any later events in the batch
  // describe overhang text that has been discarded.
  auto handle_events = [&](const std::vector<StreamEvent>& events) {
    for (const StreamEvent& ev : events) {
      if (ev.kind != StreamEventKind::read_call_open) continue;

      // The trigger may have completed mid-token; drop any overhang the
      // generator produced past `)-->` so the memory supplies the results.
      const std::size_t overhang = fed_total - ev.end;
      if (overhang > 0) context.resize(context.size() - overhang);

      rewrite_tail(ev);  // rule (iii): the previous completed call goes away

      const QueryResult batch = engine.execute_batch(ev.read->queries, thresholds);
      ExecutedReadCall record;
      record.call = *ev.read;
      record.raw_result_count = batch.raw_distinct_count;
      for (const ScoredEntity& scored : batch.entities) {
        record.result_names.push_back(scored.entity.name);
      }

      std::string results_text;
      bool first = true;
      for (const std::string& name : record.result_names) {
        if (!first) results_text += markers::result_sep;
        first = false;
        results_text += name;
      }
      results_text += markers::call_close;
      context += results_text;

      StreamEvent closed;
      closed.kind = StreamEventKind::read_call_closed;
      closed.read = ev.read;
      closed.read->results = record.result_names;
      closed.text = ev.text + results_text;
      closed.begin = ev.begin;
      closed.end = ev.end + results_text.size();
      closed.raw_result_count = batch.raw_distinct_count;
      record.call.results = record.result_names;

      const bool empty_results = record.result_names.empty();
      const bool oversized = batch.raw_distinct_count > thresholds.q_thr;
      if (empty_results || oversized) {
        record.removed = true;
        record.reason = oversized ? RemovalReason::oversized_results : RemovalReason::empty_results;
        rewrite_tail(closed);
        // Resume from the pre-call context with the next-ranked token.
        std::optional<std::size_t> owner;
        for (std::size_t k = steps.size(); k-- > 0;) {
          if (steps[k].gen_end <= ev.begin) break;  // step ranges are increasing
          if (steps[k].gen_begin <= ev.begin) {
            owner = k;
            break;
          }
        }
        if (owner.has_value()) {
          pending_rank = steps[*owner].rank + 1;
          steps.resize(*owner);
        } else {
          pending_rank = 0;  // the call began in the injected prefix
        }
      }
      result.calls.push_back(std::move(record));
      lane.reset();
      return;
    }
  };

  if (!options.forced_call_prefix.empty()) {
    context += options.forced_call_prefix;
    fed_total += options.forced_call_prefix.size();
    handle_events(lane.feed(options.forced_call_prefix));
  }

  while (tokens_emitted < options.max_tokens) {
    const std::vector<TokenScore> ranked = generator.next_distribution(context);
    if (ranked.empty()) break;
    if (pending_rank >= ranked.size()) break;  // demanded continuation unavailable
    const TokenScore chosen = ranked[pending_rank];
    const std::size_t used_rank = pending_rank;
    pending_rank = 0;
    if (chosen.token == options.eos_token) break;

    steps.push_back(Step{fed_total, fed_total + chosen.token.size(), used_rank});
    context += chosen.token;
    fed_total += chosen.token.size();
    ++tokens_emitted;
    handle_events(lane.feed(chosen.token));
  }

  result.text = std::move(context);
  return result;
}

double combine_token_probability(double p_no_mr, double p_mr, double p_trigger) {
  for (double value : {p_no_mr, p_mr, p_trigger}) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw DomainError("probability out of [0, 1]: " + std::to_string(value));
    }
  }
  return p_mr * p_trigger + p_no_mr * (1.0 - p_trigger);
}

namespace {

double lookup_probability(const std::vector<TokenScore>& ranked, std::string_view token) {
  for (const TokenScore& entry : ranked) {
    if (entry.token == token) return std::exp(entry.logprob);
  }
  return 0.0;
}

std::optional<double> subset_perplexity(const std::vector<double>& log_probs,
                                        const std::vector<bool>& member) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    if (!member[i]) continue;
    sum += log_probs[i];
    ++count;
  }
  if (count == 0) return std::nullopt;
  return std::exp(-sum / static_cast<double>(count));
}

}  // namespace

PerplexityReport evaluate_perplexity(const PerplexityDocument& document, TokenGenerator& generator,
                                     const QueryEngine& engine,
                                     const RetrievalThresholds& thresholds,
                                     const PerplexityOptions& options) {
  const std::size_t n = document.tokens.size();
  for (const MemoryReadAnnotation& ann : document.memory_reads) {
    if (ann.position >= n) throw DomainError("memory read annotation beyond document end");
  }
  auto mark = [&](const std::vector<TokenSpan>& spans) {
    std::vector<bool> member(n, false);
    for (const TokenSpan& span : spans) {
      if (span.begin >= span.end || span.end > n) throw DomainError("token span out of range");
      for (std::size_t i = span.begin; i < span.end; ++i) member[i] = true;
    }
    return member;
  };
  const std::vector<bool> in_target = mark(document.target_spans);
  const std::vector<bool> in_entity = mark(document.entity_spans);

  std::vector<const MemoryReadAnnotation*> read_at(n, nullptr);
  for (const MemoryReadAnnotation& ann : document.memory_reads) {
    read_at[ann.position] = &ann;
  }

  std::vector<double> log_probs(n, 0.0);
  std::string context;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<TokenScore> ranked = generator.next_distribution(context);
    const double p_no_mr = lookup_probability(ranked, document.tokens[i]);
    const double p_trigger = lookup_probability(ranked, options.mr_open_token);
    double p_mr = 0.0;
    if (read_at[i] != nullptr) {
      ReadCall call;
      call.queries = read_at[i]->queries;
      const QueryResult batch = engine.execute_batch(call.queries, thresholds);
      std::vector<std::string> names;
      names.reserve(batch.entities.size());
      for (const ScoredEntity& scored : batch.entities) names.push_back(scored.entity.name);
      call.results = std::move(names);
      const std::string mr_context = context + serialize_read(call);
      p_mr = lookup_probability(generator.next_distribution(mr_context), document.tokens[i]);
    }
    const double p = combine_token_probability(p_no_mr, p_mr, p_trigger);
    log_probs[i] = std::log(p);
    context += document.tokens[i];
  }

  PerplexityReport report;
  report.overall = subset_perplexity(log_probs, std::vector<bool>(n, true));
  report.target = subset_perplexity(log_probs, in_target);
  report.entity = subset_perplexity(log_probs, in_entity);
  return report;
}

}  // namespace tripmem
