#include "tripmem/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "tripmem/errors.hpp"
#include "tripmem/text.hpp"

namespace tripmem {

namespace {

// Relation patterns filtered by default. The subject-query side lists
// relations where countless subjects share one object (everything located in
// a country, everyone with a given birth date); the object-query side is the
// container-style inverse.
const char* kDefaultSubjectFiltered[] = {
    "country of citizenship",
    "country",
    "country of origin",
    "religion",
    "place of birth",
    "place of death",
    "work location",
    "location",
    "basin country",
    "residence",
    "location of formation",
    "publication date",
    "production company",
    "platform",
    "original language of work",
    "applies to jurisdiction",
    "located in the administrative territorial entity",
    "headquarters location",
    "inception",
    "employer",
    "date of birth",
    "date of death",
    "educated at",
};

const char* kDefaultObjectFiltered[] = {
    "contains administrative territorial entity",
};

void sort_scored(std::vector<ScoredEntity>& entities) {
  std::sort(entities.begin(), entities.end(), [](const ScoredEntity& a, const ScoredEntity& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity.id < b.entity.id;
  });
}

}  // namespace

AmbiguityList AmbiguityList::defaults() {
  AmbiguityList list;
  for (const char* name : kDefaultSubjectFiltered) {
    list.add(QueryDirection::subject_query, name);
  }
  for (const char* name : kDefaultObjectFiltered) {
    list.add(QueryDirection::object_query, name);
  }
  return list;
}

AmbiguityList AmbiguityList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open ambiguity list: " + path);
  AmbiguityList list;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line) || line[0] == '#') continue;
    if (line.size() < 3 || line[1] != ':' || (line[0] != 'S' && line[0] != 'O')) {
      throw ConfigError("ambiguity list line " + std::to_string(lineno) +
                        ": expected 'S:<relation>' or 'O:<relation>'");
    }
    const auto direction =
        line[0] == 'S' ? QueryDirection::subject_query : QueryDirection::object_query;
    list.add(direction, std::string_view(line).substr(2));
  }
  return list;
}

void AmbiguityList::add(QueryDirection direction, std::string_view relation_name) {
  auto& bucket =
      direction == QueryDirection::subject_query ? subject_filtered_ : object_filtered_;
  std::string key = normalize_text(relation_name);
  if (key.empty()) throw ConfigError("ambiguity list entry with blank relation name");
  if (std::find(bucket.begin(), bucket.end(), key) == bucket.end()) {
    bucket.push_back(std::move(key));
  }
}

bool AmbiguityList::matches(QueryDirection direction, std::string_view relation_name) const {
  const auto& bucket =
      direction == QueryDirection::subject_query ? subject_filtered_ : object_filtered_;
  const std::string key = normalize_text(relation_name);
  return std::find(bucket.begin(), bucket.end(), key) != bucket.end();
}

QueryEngine::QueryEngine(const MemoryStore& store, AmbiguityList ambiguity)
    : store_(store), ambiguity_(std::move(ambiguity)) {}

std::vector<ScoredEntity> QueryEngine::candidate_entities(const EmbeddingVector& query_vector,
                                                          double tau_e) const {
  if (query_vector.dimension() != store_.provider().dimension()) {
    throw DimensionError("query vector dimension does not match the store");
  }
  std::vector<ScoredEntity> out;
  const auto view = store_.read_view();
  for (const auto& [id, row] : view.entities()) {
    const double score = cosine(query_vector, row.vector);
    if (score >= tau_e) out.push_back(ScoredEntity{row, score});
  }
  return out;
}

std::vector<ScoredRelation> QueryEngine::candidate_relations(const EmbeddingVector& query_vector,
                                                             double tau_t) const {
  if (query_vector.dimension() != store_.provider().dimension()) {
    throw DimensionError("query vector dimension does not match the store");
  }
  std::vector<ScoredRelation> out;
  const auto view = store_.read_view();
  for (const auto& [id, row] : view.relations()) {
    const double score = cosine(query_vector, row.vector);
    if (score >= tau_t) out.push_back(ScoredRelation{row, score});
  }
  return out;
}

std::vector<ScoredEntity> QueryEngine::raw_results(const MemoryQuery& query,
                                                   const RetrievalThresholds& thresholds) const {
  const EmbeddingVector bound_vec = store_.provider().embed(query.bound_entity_name);
  const EmbeddingVector relation_vec = store_.provider().embed(query.relation_name);

  const auto view = store_.read_view();

  // Candidate relations by threshold, kept as a score lookup.
  std::unordered_map<Id, double> relation_score;
  for (const auto& [id, row] : view.relations()) {
    const double score = cosine(relation_vec, row.vector);
    if (score >= thresholds.tau_t) relation_score.emplace(id, score);
  }

  const bool want_objects = query.direction == QueryDirection::object_query;
  std::unordered_map<Id, double> best_score;
  for (const auto& [entity_id, row] : view.entities()) {
    const double entity_score = cosine(bound_vec, row.vector);
    if (entity_score < thresholds.tau_e) continue;
    const std::vector<Id>* adjacent =
        want_objects ? view.triples_with_subject(entity_id) : view.triples_with_object(entity_id);
    if (adjacent == nullptr) continue;
    for (Id triple_id : *adjacent) {
      const Triple& t = view.triples().at(triple_id);
      const auto rel_it = relation_score.find(t.relation_id);
      if (rel_it == relation_score.end()) continue;
      const double avg = 0.5 * (entity_score + rel_it->second);
      if (avg < thresholds.tau_r) continue;
      const Id result_id = want_objects ? t.object_id : t.subject_id;
      auto [slot, added] = best_score.emplace(result_id, avg);
      if (!added && avg > slot->second) slot->second = avg;
    }
  }

  std::vector<ScoredEntity> out;
  out.reserve(best_score.size());
  for (const auto& [entity_id, score] : best_score) {
    out.push_back(ScoredEntity{view.entities().at(entity_id), score});
  }
  sort_scored(out);
  return out;
}

QueryResult QueryEngine::execute_query(const MemoryQuery& query,
                                       const RetrievalThresholds& thresholds) const {
  QueryResult result;
  result.entities = raw_results(query, thresholds);
  result.raw_distinct_count = result.entities.size();
  if (result.raw_distinct_count > thresholds.q_thr) {
    result.overflowed = true;
    result.entities.clear();
  }
  return result;
}

QueryResult QueryEngine::execute_batch(std::span<const MemoryQuery> queries,
                                       const RetrievalThresholds& thresholds) const {
  QueryResult merged;
  std::unordered_map<Id, double> best_score;
  for (const MemoryQuery& query : queries) {
    if (is_ambiguous_query(query)) {
      merged.filtered_ambiguous = true;
      continue;
    }
    const QueryResult single = execute_query(query, thresholds);
    for (const ScoredEntity& scored : single.entities) {
      auto [slot, added] = best_score.emplace(scored.entity.id, scored.score);
      if (!added && scored.score > slot->second) slot->second = scored.score;
      if (added) merged.entities.push_back(scored);
    }
  }
  for (ScoredEntity& scored : merged.entities) {
    scored.score = best_score.at(scored.entity.id);
  }
  sort_scored(merged.entities);
  merged.raw_distinct_count = merged.entities.size();
  if (merged.raw_distinct_count > thresholds.q_thr) {
    merged.overflowed = true;
    merged.entities.clear();
  }
  return merged;
}

bool QueryEngine::is_ambiguous_query(const MemoryQuery& query) const {
  return ambiguity_.matches(query.direction, query.relation_name);
}

}  // namespace tripmem
