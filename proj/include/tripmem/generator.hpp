#ifndef TRIPMEM_GENERATOR_HPP
#define TRIPMEM_GENERATOR_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tripmem {

struct TokenScore {
  std::string token;
  double logprob = 0.0;

  bool operator==(const TokenScore&) const = default;
};

/// Ranked next-token source. Real deployments adapt an LLM behind this;
/// tests use the mocks below. The ranked list has non-increasing logprobs,
/// each <= 0. An empty list means the stream is exhausted.
class TokenGenerator {
 public:
  virtual ~TokenGenerator() = default;
  virtual std::vector<TokenScore> next_distribution(std::string_view context) = 0;
};

/// Hash of a decoding context, the key used by scripted generators and their
/// on-disk format.
std::uint64_t context_hash(std::string_view context);

/// Replays a fixed script keyed by context hash. Unknown contexts raise
/// GeneratorError, so scripts double as exact traces of the expected decode.
///
/// File format: one `context_hash<TAB>token<TAB>logprob<TAB>rank` record per
/// line; hashes are 16 hex digits, ranks start at 0 and are contiguous per
/// context, tokens escape tab/newline/backslash as \t, \n, \r, \\.
class ScriptedGenerator final : public TokenGenerator {
 public:
  ScriptedGenerator() = default;

  /// Registers the ranked distribution for one context. Re-adding the same
  /// context with identical content is a no-op; conflicting content throws.
  void add_step(std::string_view context, std::vector<TokenScore> ranked);

  std::vector<TokenScore> next_distribution(std::string_view context) override;

  bool knows(std::string_view context) const;
  std::size_t size() const { return steps_.size(); }
  std::size_t calls() const { return calls_; }
  void reset_calls() { calls_ = 0; }

  static ScriptedGenerator load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::unordered_map<std::uint64_t, std::vector<TokenScore>> steps_;
  std::size_t calls_ = 0;
};

/// Emits a fixed sequence of distributions regardless of context; exhausts to
/// an empty list. The simplest harness mock.
class EchoGenerator final : public TokenGenerator {
 public:
  explicit EchoGenerator(std::vector<std::vector<TokenScore>> steps);

  /// Each token becomes a two-entry distribution: the token itself on top and
  /// `alternative` ranked second.
  static EchoGenerator from_tokens(const std::vector<std::string>& tokens, double logprob = -0.1,
                                   std::string alternative = ";", double alt_logprob = -5.0);

  std::vector<TokenScore> next_distribution(std::string_view context) override;

  std::size_t calls() const { return next_; }

 private:
  std::vector<std::vector<TokenScore>> steps_;
  std::size_t next_ = 0;
};

}  // namespace tripmem

#endif  // TRIPMEM_GENERATOR_HPP
