#include "support/script_builders.hpp"

#include <limits>
#include <random>
#include <stdexcept>

#include "tripmem/protocol.hpp"

namespace tripmem::tests {

namespace {

const std::string kClose{markers::call_close};
const std::string kFiller = "~";

void require(bool condition, const char* message) {
  if (!condition) throw std::logic_error(message);
}

}  // namespace

void script_write_decode(ScriptedGenerator& generator, const std::string& input_text,
                         const std::string& body) {
  std::string context = input_text;
  generator.add_step(context, {{body, -0.1}, {kFiller, -9.0}});
  context += body;
  // Best close right after the body.
  generator.add_step(context, {{kClose, -0.1}, {";", -12.0}});
  context += ";";
  // Five degrading closes; the decoder halts at the fifth without emitting.
  for (int j = 0; j < 5; ++j) {
    generator.add_step(context, {{kClose, -14.0 - j}, {";", -15.0 - j}});
    if (j < 4) context += ";";
  }
}

LateStopScenario build_late_stop_scenario(const std::vector<std::string>& pretext,
                                          const std::string& focus,
                                          const std::vector<LateStopSegment>& segments,
                                          double token_logprob) {
  require(!segments.empty(), "late-stop plan needs segments");
  LateStopScenario scenario;
  scenario.input.pretext_sentences = pretext;
  scenario.input.focus_sentence = focus;

  std::string context = scenario.input.serialize();
  std::vector<std::string> emitted;
  double logprob_sum = 0.0;
  std::size_t calls = 0;

  // Independent replay of the decode rule over the planned averages.
  double best_avg = -std::numeric_limits<double>::infinity();
  std::size_t best_pos = 0;
  int non_improvements = 0;
  bool halted = false;

  for (std::size_t seg = 0; seg < segments.size() && !halted; ++seg) {
    const LateStopSegment& segment = segments[seg];
    // Tokens of this segment. The first token of a continuation segment is
    // emitted by the close attempt below, so skip scripting it as a step.
    for (std::size_t t = (seg == 0 ? 0 : 1); t < segment.tokens.size(); ++t) {
      scenario.generator.add_step(context, {{segment.tokens[t], token_logprob},
                                            {kFiller, token_logprob - 9.0}});
      ++calls;
      emitted.push_back(segment.tokens[t]);
      context += segment.tokens[t];
      logprob_sum += token_logprob;
    }

    // Close attempt with a pinned running average.
    const std::size_t position = emitted.size();
    const double close_lp =
        segment.close_avg * static_cast<double>(position + 1) - logprob_sum;
    require(close_lp <= 0.0, "close logprob must be <= 0; lower close_avg");
    const bool improves = segment.close_avg > best_avg;
    const std::string alternative =
        seg + 1 < segments.size() ? segments[seg + 1].tokens.front() : kFiller;
    // Tie the alternative to the close score: ranked lists only require
    // non-increasing logprobs, and this keeps later average targets feasible.
    const double alt_lp = close_lp;
    scenario.generator.add_step(context, {{kClose, close_lp}, {alternative, alt_lp}});
    ++calls;

    if (improves) {
      best_avg = segment.close_avg;
      best_pos = position;
      non_improvements = 0;
    } else {
      ++non_improvements;
      if (non_improvements >= 5) {
        halted = true;
        break;
      }
    }
    require(seg + 1 < segments.size(), "plan ran out of segments before halting");
    emitted.push_back(alternative);
    context += alternative;
    logprob_sum += alt_lp;
  }
  require(halted, "plan never reached five non-improving closes");

  scenario.expected_cut_tokens = best_pos;
  for (std::size_t i = 0; i < best_pos; ++i) scenario.expected_text += emitted[i];
  scenario.expected_text += kClose;
  scenario.expected_generator_calls = calls;
  scenario.expected_final_non_improvements = non_improvements;
  return scenario;
}

EditSuite make_edit_suite(std::size_t case_count, std::uint64_t seed) {
  // Names are random so that editing-profile retrieval (tau_e = 0.85) never
  // cross-matches between cases.
  std::mt19937_64 engine(seed);
  auto name = [&engine](const char* prefix) {
    static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz";
    std::string out(prefix);
    out += ' ';
    for (int i = 0; i < 9; ++i) out.push_back(alphabet[engine() % 26]);
    return out;
  };

  EditSuite suite;
  for (std::size_t i = 0; i < case_count; ++i) {
    EditSuite::Gold gold;
    gold.subject = name("Subject");
    gold.relation = name("relation");
    gold.answer = name("Answer");
    gold.locality_subject = name("Landmark");
    gold.locality_relation = "located in";
    gold.locality_answer = name("City");

    EditCase edit;
    edit.prompt = "What is the " + gold.relation + " of " + gold.subject + "?";
    edit.edit_answer = gold.answer;
    edit.generalization_prompt = "Which " + gold.relation + " does " + gold.subject + " have?";
    edit.locality_prompt = "Where is " + gold.locality_subject + "?";
    edit.locality_expected = gold.locality_answer;

    suite.stub_queries[edit.prompt] = gold.subject + ">>" + gold.relation + ">>";
    suite.stub_queries[edit.generalization_prompt] = gold.subject + ">>" + gold.relation + ">>";
    suite.stub_queries[edit.locality_prompt] =
        gold.locality_subject + ">>" + gold.locality_relation + ">>";

    suite.cases.push_back(std::move(edit));
    suite.gold.push_back(std::move(gold));
  }
  return suite;
}

std::vector<TokenScore> QaStubGenerator::next_distribution(std::string_view context) {
  // Forced read: complete the scripted query for the question on screen.
  if (context.ends_with(markers::mem_read_open)) {
    std::string_view head = context.substr(0, context.size() - markers::mem_read_open.size());
    std::size_t q = head.rfind("Q: ");
    std::string question;
    if (q != std::string_view::npos) question = std::string(head.substr(q + 3));
    const auto it = query_by_question_.find(question);
    const std::string query = it != query_by_question_.end() ? it->second : "_>>_>>";
    return {{query + std::string(markers::read_trigger), -0.1}, {"~", -9.0}};
  }
  // Results just landed: copy the first retrieved entity into the answer.
  if (context.ends_with(markers::call_close)) {
    const std::size_t close = context.rfind(markers::call_close);
    const std::size_t trigger = context.rfind(markers::read_trigger, close);
    if (trigger != std::string_view::npos) {
      std::string_view names =
          context.substr(trigger + markers::read_trigger.size(),
                         close - trigger - markers::read_trigger.size());
      const std::size_t comma = names.find(markers::result_sep);
      if (comma != std::string_view::npos) names = names.substr(0, comma);
      return {{"\nA: " + std::string(names), -0.1}, {"~", -9.0}};
    }
  }
  // After an answer line: stop. After a bare question (read rejected): guess.
  const std::size_t line_start = context.rfind('\n');
  std::string_view last_line =
      line_start == std::string_view::npos ? context : context.substr(line_start + 1);
  if (last_line.starts_with("A:")) {
    return {{"</s>", 0.0}, {"~", -9.0}};
  }
  return {{"\nA: unknown", -0.1}, {"~", -9.0}};
}

}  // namespace tripmem::tests
