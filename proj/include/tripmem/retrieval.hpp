#ifndef TRIPMEM_RETRIEVAL_HPP
#define TRIPMEM_RETRIEVAL_HPP

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tripmem/memory_store.hpp"

namespace tripmem {

enum class QueryDirection {
  object_query,   // <subject, relation, *>: asks for objects
  subject_query,  // <*, relation, object>: asks for subjects
};

/// A partially bound triple: the relation plus exactly one entity slot.
struct MemoryQuery {
  QueryDirection direction = QueryDirection::object_query;
  std::string bound_entity_name;
  std::string relation_name;

  bool operator==(const MemoryQuery&) const = default;
};

struct RetrievalThresholds {
  double tau_e = 0.7;   // candidate-entity similarity floor
  double tau_t = 0.7;   // candidate-relation similarity floor
  double tau_r = 0.85;  // floor on the averaged subject/relation similarity
  std::size_t q_thr = 30;  // result counts above this are useless noise

  static RetrievalThresholds language_modeling() { return RetrievalThresholds{}; }
  static RetrievalThresholds editing() { return RetrievalThresholds{0.85, 0.2, 0.6, 30}; }
};

struct ScoredEntity {
  Entity entity;
  double score = 0.0;
};

struct ScoredRelation {
  Relation relation;
  double score = 0.0;
};

struct QueryResult {
  // Descending by score, ties broken by ascending entity id; emptied when
  // overflowed.
  std::vector<ScoredEntity> entities;
  bool overflowed = false;
  bool filtered_ambiguous = false;
  std::size_t raw_distinct_count = 0;  // distinct entities before the q_thr cap
};

/// Query patterns whose results are expected to be uselessly broad
/// (e.g. "everything whose country is the United States"). One relation name
/// per line in the list file, prefixed `S:` when filtered for subject
/// queries or `O:` for object queries; `#` starts a comment.
class AmbiguityList {
 public:
  static AmbiguityList defaults();
  static AmbiguityList load(const std::string& path);
  static AmbiguityList empty() { return AmbiguityList(); }

  bool matches(QueryDirection direction, std::string_view relation_name) const;
  void add(QueryDirection direction, std::string_view relation_name);
  std::size_t size() const { return subject_filtered_.size() + object_filtered_.size(); }

 private:
  std::vector<std::string> subject_filtered_;  // normalized relation names
  std::vector<std::string> object_filtered_;
};

/// Executes memory queries against a store. Read-only; safe for concurrent
/// use. The scan is exact: results are identical to brute-force filtering,
/// which is the reference contract any approximate index has to match.
class QueryEngine {
 public:
  explicit QueryEngine(const MemoryStore& store, AmbiguityList ambiguity = AmbiguityList::defaults());

  /// Entities whose stored vector has cosine >= tau_e with the query vector,
  /// ascending by id.
  std::vector<ScoredEntity> candidate_entities(const EmbeddingVector& query_vector,
                                               double tau_e) const;
  std::vector<ScoredRelation> candidate_relations(const EmbeddingVector& query_vector,
                                                  double tau_t) const;

  /// One query per the averaged-similarity rule: results are the unbound-slot
  /// entities of triples whose bound-slot entity and relation both clear
  /// their candidate thresholds and whose averaged similarity clears tau_r.
  /// Duplicate entities keep their maximum score. More than q_thr distinct
  /// results flips `overflowed` and empties the list.
  QueryResult execute_query(const MemoryQuery& query, const RetrievalThresholds& thresholds) const;

  /// Union of the individual execute_query outputs, deduplicated by entity id
  /// with maximum score, reordered, and capped at q_thr like a single query.
  /// Ambiguous queries are skipped.
  QueryResult execute_batch(std::span<const MemoryQuery> queries,
                            const RetrievalThresholds& thresholds) const;

  bool is_ambiguous_query(const MemoryQuery& query) const;

  const MemoryStore& store() const { return store_; }
  const AmbiguityList& ambiguity_list() const { return ambiguity_; }

 private:
  std::vector<ScoredEntity> raw_results(const MemoryQuery& query,
                                        const RetrievalThresholds& thresholds) const;

  const MemoryStore& store_;
  AmbiguityList ambiguity_;
};

}  // namespace tripmem

#endif  // TRIPMEM_RETRIEVAL_HPP
