#include "tripmem/generator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "tripmem/errors.hpp"
#include "tripmem/text.hpp"

namespace tripmem {

namespace {

void validate_ranked(const std::vector<TokenScore>& ranked) {
  double prev = 0.0;
  bool first = true;
  for (const TokenScore& entry : ranked) {
    if (entry.token.empty()) throw ConfigError("scripted token must not be empty");
    if (entry.logprob > 0.0) {
      throw ConfigError("logprob must be <= 0, got " + std::to_string(entry.logprob));
    }
    if (!first && entry.logprob > prev) {
      throw ConfigError("logprobs must be non-increasing in rank");
    }
    prev = entry.logprob;
    first = false;
  }
}

std::string escape_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char ch : token) {
    switch (ch) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

std::string unescape_token(std::string_view text, std::size_t lineno) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out.push_back(text[i]);
      continue;
    }
    if (i + 1 >= text.size()) {
      throw ConfigError("script line " + std::to_string(lineno) + ": dangling escape");
    }
    switch (text[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case '\\': out.push_back('\\'); break;
      default:
        throw ConfigError("script line " + std::to_string(lineno) + ": bad escape");
    }
  }
  return out;
}

}  // namespace

std::uint64_t context_hash(std::string_view context) { return fnv1a64(context); }

void ScriptedGenerator::add_step(std::string_view context, std::vector<TokenScore> ranked) {
  validate_ranked(ranked);
  const std::uint64_t key = context_hash(context);
  const auto it = steps_.find(key);
  if (it != steps_.end()) {
    if (it->second != ranked) {
      throw ConfigError("conflicting script step for context hash " + hash_to_hex(key));
    }
    return;
  }
  steps_.emplace(key, std::move(ranked));
}

std::vector<TokenScore> ScriptedGenerator::next_distribution(std::string_view context) {
  ++calls_;
  const auto it = steps_.find(context_hash(context));
  if (it == steps_.end()) {
    const std::string tail = std::string(context.size() > 48 ? context.substr(context.size() - 48)
                                                             : context);
    throw GeneratorError("scripted generator has no step for context hash " +
                         hash_to_hex(context_hash(context)) + " (context tail: '" + tail + "')");
  }
  return it->second;
}

bool ScriptedGenerator::knows(std::string_view context) const {
  return steps_.contains(context_hash(context));
}

ScriptedGenerator ScriptedGenerator::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open generator script: " + path);
  std::map<std::uint64_t, std::map<std::size_t, TokenScore>> grouped;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    const std::string_view view(line);
    while (fields.size() < 3) {
      const std::size_t tab = view.find('\t', pos);
      if (tab == std::string_view::npos) break;
      fields.push_back(view.substr(pos, tab - pos));
      pos = tab + 1;
    }
    fields.push_back(view.substr(pos));
    if (fields.size() != 4) {
      throw ConfigError("script line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    const std::uint64_t hash = hex_to_hash(fields[0]);
    TokenScore entry;
    entry.token = unescape_token(fields[1], lineno);
    try {
      entry.logprob = std::stod(std::string(fields[2]));
    } catch (const std::exception&) {
      throw ConfigError("script line " + std::to_string(lineno) + ": bad logprob");
    }
    std::size_t rank = 0;
    try {
      rank = static_cast<std::size_t>(std::stoul(std::string(fields[3])));
    } catch (const std::exception&) {
      throw ConfigError("script line " + std::to_string(lineno) + ": bad rank");
    }
    if (!grouped[hash].emplace(rank, std::move(entry)).second) {
      throw ConfigError("script line " + std::to_string(lineno) + ": duplicate rank");
    }
  }
  ScriptedGenerator generator;
  for (auto& [hash, by_rank] : grouped) {
    std::vector<TokenScore> ranked;
    std::size_t expected = 0;
    for (auto& [rank, entry] : by_rank) {
      if (rank != expected) {
        throw ConfigError("script context " + hash_to_hex(hash) + ": ranks are not contiguous");
      }
      ++expected;
      ranked.push_back(std::move(entry));
    }
    validate_ranked(ranked);
    generator.steps_.emplace(hash, std::move(ranked));
  }
  return generator;
}

void ScriptedGenerator::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw StorageError("cannot open generator script for writing: " + path);
  std::map<std::uint64_t, const std::vector<TokenScore>*> ordered;
  for (const auto& [hash, ranked] : steps_) ordered.emplace(hash, &ranked);
  char buf[64];
  for (const auto& [hash, ranked] : ordered) {
    for (std::size_t rank = 0; rank < ranked->size(); ++rank) {
      std::snprintf(buf, sizeof buf, "%.17g", (*ranked)[rank].logprob);
      out << hash_to_hex(hash) << '\t' << escape_token((*ranked)[rank].token) << '\t' << buf
          << '\t' << rank << '\n';
    }
  }
  if (!out) throw StorageError("write failure on generator script: " + path);
}

EchoGenerator::EchoGenerator(std::vector<std::vector<TokenScore>> steps)
    : steps_(std::move(steps)) {
  for (const auto& ranked : steps_) validate_ranked(ranked);
}

EchoGenerator EchoGenerator::from_tokens(const std::vector<std::string>& tokens, double logprob,
                                         std::string alternative, double alt_logprob) {
  std::vector<std::vector<TokenScore>> steps;
  steps.reserve(tokens.size());
  for (const std::string& token : tokens) {
    steps.push_back({TokenScore{token, logprob}, TokenScore{alternative, alt_logprob}});
  }
  return EchoGenerator(std::move(steps));
}

std::vector<TokenScore> EchoGenerator::next_distribution(std::string_view) {
  if (next_ >= steps_.size()) return {};
  return steps_[next_++];
}

}  // namespace tripmem
