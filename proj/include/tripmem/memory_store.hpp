#ifndef TRIPMEM_MEMORY_STORE_HPP
#define TRIPMEM_MEMORY_STORE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tripmem/embedding.hpp"

namespace tripmem {

using Id = std::int64_t;

struct Entity {
  Id id = 0;
  std::string name;  // first-seen surface form
  EmbeddingVector vector;
};

struct Relation {
  Id id = 0;
  std::string name;
  EmbeddingVector vector;
};

struct Triple {
  Id id = 0;
  Id subject_id = 0;
  Id relation_id = 0;
  Id object_id = 0;
  std::optional<std::string> provenance;
};

struct MemoryStats {
  std::size_t triple_count = 0;
  std::size_t unique_entity_count = 0;
  std::size_t unique_relation_count = 0;
  // (entities + relations) / triples, capped at 1.0; 1.0 for an empty store.
  double redundancy_fraction = 1.0;
};

struct InsertResult {
  Triple triple;
  bool inserted = false;
};

struct UpsertResult {
  Triple triple;
  bool inserted = false;          // a brand-new (s,r,o) row was created
  std::size_t replaced_count = 0; // rows with the same (subject, relation) that were dropped
};

// How upsert_edit_triple decides that a stored triple is "the same fact".
enum class EditMatchMode {
  subject_relation,  // replace the object of any triple with equal subject+relation names
  strict,            // only a full (s,r,o) match counts; otherwise plain insert
};

/// Triple memory with deduplicated entity/relation tables.
///
/// Identity is by normalized name: entities and relations are unique per
/// normalized form, triples are unique per (subject_id, relation_id,
/// object_id). Ids grow monotonically and are never reused, including after
/// deletion or compaction.
///
/// Thread contract: any number of concurrent readers or a single writer;
/// enforced internally with a shared mutex.
class MemoryStore {
 public:
  explicit MemoryStore(std::shared_ptr<const EmbeddingProvider> provider,
                       EditMatchMode edit_match_mode = EditMatchMode::subject_relation);

  MemoryStore(MemoryStore&& other) noexcept;
  MemoryStore& operator=(MemoryStore&&) = delete;
  MemoryStore(const MemoryStore&) = delete;

  /// Inserts a triple, creating entity/relation rows on first sight
  /// (embedding computed once per unique name). Returns the existing triple
  /// with inserted=false when the id combination is already stored.
  InsertResult insert_triple(std::string_view subject_name, std::string_view relation_name,
                             std::string_view object_name,
                             std::optional<std::string> provenance = std::nullopt);

  /// Edit-mode write: drops every stored triple that matches the edit key
  /// (per EditMatchMode) but carries a different object, then inserts the new
  /// fact with dedup. Idempotent.
  UpsertResult upsert_edit_triple(std::string_view subject_name, std::string_view relation_name,
                                  std::string_view object_name);

  MemoryStats stats() const;

  /// Removes entity/relation rows no longer referenced by any triple.
  /// Returns the number of rows dropped. Surviving ids are unchanged.
  std::size_t compact();

  // -- lookups ---------------------------------------------------------

  std::optional<Entity> entity(Id id) const;
  std::optional<Relation> relation(Id id) const;
  std::optional<Triple> triple(Id id) const;
  std::optional<Entity> find_entity(std::string_view name) const;
  std::optional<Relation> find_relation(std::string_view name) const;

  const EmbeddingProvider& provider() const { return *provider_; }
  std::shared_ptr<const EmbeddingProvider> provider_ptr() const { return provider_; }
  EditMatchMode edit_match_mode() const { return edit_match_mode_; }

  /// FNV hash over all table contents; changes iff the store content changes.
  std::uint64_t content_hash() const;

  // -- consistent read view --------------------------------------------

  /// Holds the reader lock for its lifetime and exposes the tables directly.
  /// Do not call store mutators while a view is alive on the same thread.
  class ReadView {
   public:
    const std::map<Id, Entity>& entities() const { return store_->entities_; }
    const std::map<Id, Relation>& relations() const { return store_->relations_; }
    const std::map<Id, Triple>& triples() const { return store_->triples_; }
    /// Triple ids with the given subject (object) entity, ascending.
    const std::vector<Id>* triples_with_subject(Id entity_id) const;
    const std::vector<Id>* triples_with_object(Id entity_id) const;

   private:
    friend class MemoryStore;
    explicit ReadView(const MemoryStore& store)
        : store_(&store), lock_(store.mutex_) {}
    const MemoryStore* store_;
    std::shared_lock<std::shared_mutex> lock_;
  };

  ReadView read_view() const { return ReadView(*this); }

  // -- snapshots ---------------------------------------------------------

  /// Writes a self-describing binary snapshot (header with format version and
  /// provider fingerprint, then the three tables). Bit-exact round trip.
  void save_snapshot(const std::string& path) const;

  /// Rebuilds a store from a snapshot. The embedding provider is
  /// reconstructed from the header; snapshots written with an external
  /// provider require the overload taking a provider instance.
  static MemoryStore load_snapshot(const std::string& path);
  static MemoryStore load_snapshot(const std::string& path,
                                   std::shared_ptr<const EmbeddingProvider> provider);

 private:
  static MemoryStore load_snapshot_impl(const std::string& path,
                                        std::shared_ptr<const EmbeddingProvider> provider);
  Id intern_entity_locked(std::string_view name);
  Id intern_relation_locked(std::string_view name);
  InsertResult insert_locked(std::string_view subject_name, std::string_view relation_name,
                             std::string_view object_name, std::optional<std::string> provenance);
  void unlink_triple_locked(Id triple_id);
  void check_name(std::string_view name, const char* role) const;

  struct TripleKey {
    Id subject, relation, object;
    bool operator==(const TripleKey&) const = default;
  };
  struct TripleKeyHash {
    std::size_t operator()(const TripleKey& k) const noexcept;
  };

  std::shared_ptr<const EmbeddingProvider> provider_;
  EditMatchMode edit_match_mode_;

  std::map<Id, Entity> entities_;
  std::map<Id, Relation> relations_;
  std::map<Id, Triple> triples_;
  std::unordered_map<std::string, Id> entity_by_key_;
  std::unordered_map<std::string, Id> relation_by_key_;
  std::unordered_map<TripleKey, Id, TripleKeyHash> triple_by_key_;
  std::unordered_map<Id, std::vector<Id>> triples_by_subject_;
  std::unordered_map<Id, std::vector<Id>> triples_by_object_;
  Id next_entity_id_ = 1;
  Id next_relation_id_ = 1;
  Id next_triple_id_ = 1;

  mutable std::shared_mutex mutex_;
};

}  // namespace tripmem

#endif  // TRIPMEM_MEMORY_STORE_HPP
