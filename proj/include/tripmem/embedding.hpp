#ifndef TRIPMEM_EMBEDDING_HPP
#define TRIPMEM_EMBEDDING_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace tripmem {

/// Unit-norm dense vector. All vectors produced by one provider share the
/// same dimension.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const noexcept { return values.size(); }
};

enum class ProviderKind {
  reference_hash,
  external,
};

struct EmbeddingProviderConfig {
  ProviderKind kind = ProviderKind::reference_hash;
  std::size_t dimension = 64;
  std::int64_t seed = 0;

  // Fingerprint stored in snapshots so a store is never opened with a
  // different vectorizer than the one that filled it.
  std::uint64_t fingerprint() const;
};

/// Contract for text vectorizers. Providers are immutable after
/// construction; embed() is safe for concurrent callers.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  /// Vectorizes text. Throws InvalidTextError on blank input. The result is
  /// unit-norm and deterministic for a fixed provider instance.
  virtual EmbeddingVector embed(std::string_view text) const = 0;

  virtual std::size_t dimension() const noexcept = 0;
  virtual EmbeddingProviderConfig config() const = 0;
};

/// Deterministic, dependency-free embedder: byte bigrams and trigrams of the
/// normalized text are hashed into `dimension` signed buckets, occurrence
/// counts accumulate, and the result is L2-normalized. Near-identical surface
/// forms ("US" / "USA") share most grams and therefore score high cosine.
class ReferenceHashEmbedder final : public EmbeddingProvider {
 public:
  explicit ReferenceHashEmbedder(EmbeddingProviderConfig config);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const noexcept override { return config_.dimension; }
  EmbeddingProviderConfig config() const override { return config_; }

 private:
  EmbeddingProviderConfig config_;
  std::uint64_t hash_basis_;
};

/// Builds a provider from config. External providers cannot be synthesized
/// here; the host has to construct and pass them explicitly.
std::shared_ptr<const EmbeddingProvider> make_provider(const EmbeddingProviderConfig& config);

/// Dot product of two unit-norm vectors, accumulated in double precision.
/// Throws DimensionError when dimensions differ.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace tripmem

#endif  // TRIPMEM_EMBEDDING_HPP
