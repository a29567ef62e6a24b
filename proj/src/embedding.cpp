#include "tripmem/embedding.hpp"

#include <cmath>

#include "tripmem/errors.hpp"
#include "tripmem/text.hpp"

namespace tripmem {

std::uint64_t EmbeddingProviderConfig::fingerprint() const {
  std::string blob;
  blob += kind == ProviderKind::reference_hash ? "reference_hash" : "external";
  blob += '/';
  blob += std::to_string(dimension);
  blob += '/';
  blob += std::to_string(seed);
  return fnv1a64(blob);
}

ReferenceHashEmbedder::ReferenceHashEmbedder(EmbeddingProviderConfig config) : config_(config) {
  if (config_.kind != ProviderKind::reference_hash) {
    throw ConfigError("ReferenceHashEmbedder requires provider kind reference_hash");
  }
  if (config_.dimension < 8) {
    throw ConfigError("embedding dimension must be at least 8, got " +
                      std::to_string(config_.dimension));
  }
  hash_basis_ = 14695981039346656037ull ^ mix64(static_cast<std::uint64_t>(config_.seed));
}

EmbeddingVector ReferenceHashEmbedder::embed(std::string_view text) const {
  const std::string norm = normalize_text(text);
  if (norm.empty()) {
    throw InvalidTextError("cannot embed empty or whitespace-only text");
  }

  std::vector<double> acc(config_.dimension, 0.0);
  auto add_gram = [&](std::string_view gram) {
    const std::uint64_t h = fnv1a64(gram, hash_basis_);
    const std::size_t bucket = static_cast<std::size_t>(h % config_.dimension);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    acc[bucket] += sign;
  };

  if (norm.size() < 2) {
    add_gram(norm);
  } else {
    for (std::size_t n = 2; n <= 3; ++n) {
      if (norm.size() < n) break;
      for (std::size_t i = 0; i + n <= norm.size(); ++i) {
        add_gram(std::string_view(norm).substr(i, n));
      }
    }
  }

  double norm2 = 0.0;
  for (double v : acc) norm2 += v * v;

  if (norm2 == 0.0) {
    // Signed counts cancelled out completely; fall back to a one-hot bucket
    // keyed on the whole normalized text so the result stays deterministic.
    const std::uint64_t h = fnv1a64(norm, hash_basis_);
    acc.assign(config_.dimension, 0.0);
    acc[static_cast<std::size_t>(h % config_.dimension)] = 1.0;
    norm2 = 1.0;
  }

  const double inv = 1.0 / std::sqrt(norm2);
  EmbeddingVector out;
  out.values.resize(config_.dimension);
  for (std::size_t i = 0; i < config_.dimension; ++i) {
    out.values[i] = acc[i] * inv;
  }
  return out;
}

std::shared_ptr<const EmbeddingProvider> make_provider(const EmbeddingProviderConfig& config) {
  if (config.kind == ProviderKind::external) {
    throw ConfigError("external embedding providers must be constructed by the host");
  }
  return std::make_shared<ReferenceHashEmbedder>(config);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw DimensionError("cosine over mismatched dimensions " + std::to_string(a.dimension()) +
                         " vs " + std::to_string(b.dimension()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
  }
  return dot;
}

}  // namespace tripmem
