// Builders for scripted-generator scenarios. Expected outcomes are computed
// from the construction plan, not by running the code under test.
#ifndef TRIPMEM_TESTS_SCRIPT_BUILDERS_HPP
#define TRIPMEM_TESTS_SCRIPT_BUILDERS_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tripmem/editing.hpp"
#include "tripmem/generator.hpp"
#include "tripmem/harness.hpp"

namespace tripmem::tests {

// Generator backed by a plain function; handy for stateless mocks.
class FnGenerator final : public TokenGenerator {
 public:
  using Fn = std::function<std::vector<TokenScore>(std::string_view)>;
  explicit FnGenerator(Fn fn) : fn_(std::move(fn)) {}

  std::vector<TokenScore> next_distribution(std::string_view context) override {
    ++calls_;
    return fn_(context);
  }

  std::size_t calls() const { return calls_; }

 private:
  Fn fn_;
  std::size_t calls_ = 0;
};

// Scripts a minimal well-behaved write decode: the body arrives as one token,
// the first close attempt is the best, and five degrading closes follow so
// the decoder halts. The expected output is `body + \})`.
void script_write_decode(ScriptedGenerator& generator, const std::string& input_text,
                         const std::string& body);

// Late-stopping scenario: segments of plain tokens, each followed by a close
// attempt whose running-average logprob is pinned to `close_avg` by
// construction. The expected cut and call count are derived from the plan by
// replaying the decode rule in a straight line.
struct LateStopSegment {
  std::vector<std::string> tokens;  // first token doubles as the previous
                                    // close attempt's second-ranked choice
  double close_avg = -1.0;
};

struct LateStopScenario {
  WriteScanInput input;
  ScriptedGenerator generator;
  std::string expected_text;              // output cut at the winning close
  std::size_t expected_cut_tokens = 0;    // emitted tokens before that close
  std::size_t expected_generator_calls = 0;
  int expected_final_non_improvements = 0;
};

// `segments[0].tokens` must start the call (opener included); every later
// segment's first token is what the decoder picks instead of the close.
// The plan must reach five non-improving closes after its best one.
LateStopScenario build_late_stop_scenario(const std::vector<std::string>& pretext,
                                          const std::string& focus,
                                          const std::vector<LateStopSegment>& segments,
                                          double token_logprob = -0.3);

// QA mock for the editing pipeline: on a forced `(\{MEM_READ(` suffix it
// emits the query scripted for the current question, after results it copies
// the first retrieved entity into the answer, and it falls back to "unknown"
// when the read was rejected.
class QaStubGenerator final : public TokenGenerator {
 public:
  // Keys are exact question strings; values are query sections like
  // `subject>>relation>>` (no trigger).
  explicit QaStubGenerator(std::map<std::string, std::string> query_by_question)
      : query_by_question_(std::move(query_by_question)) {}

  std::vector<TokenScore> next_distribution(std::string_view context) override;

 private:
  std::map<std::string, std::string> query_by_question_;
};

// Synthetic knowledge-editing suite: per case one gold edit triple and one
// pre-existing locality fact, plus the query the QA stub should emit for
// each of the three prompts.
struct EditSuite {
  struct Gold {
    std::string subject;
    std::string relation;
    std::string answer;
    std::string locality_subject;
    std::string locality_relation;
    std::string locality_answer;
  };
  std::vector<EditCase> cases;
  std::vector<Gold> gold;
  std::map<std::string, std::string> stub_queries;  // question -> query section

  QaStubGenerator make_stub() const { return QaStubGenerator(stub_queries); }
};

EditSuite make_edit_suite(std::size_t case_count, std::uint64_t seed);

}  // namespace tripmem::tests

#endif  // TRIPMEM_TESTS_SCRIPT_BUILDERS_HPP
