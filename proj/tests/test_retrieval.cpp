#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "support/oracles.hpp"
#include "tripmem/errors.hpp"
#include "tripmem/protocol.hpp"
#include "tripmem/retrieval.hpp"

using namespace tripmem;
using tripmem::tests::Rng;

namespace {

std::shared_ptr<const EmbeddingProvider> test_provider(std::int64_t seed = 3) {
  EmbeddingProviderConfig config;
  config.dimension = 32;
  config.seed = seed;
  return make_provider(config);
}

MemoryStore random_store(std::size_t triple_count, std::uint64_t seed,
                         std::size_t entity_vocab = 120, std::size_t relation_vocab = 12) {
  MemoryStore store(test_provider());
  Rng rng(seed);
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  for (std::size_t i = 0; i < entity_vocab; ++i) {
    entities.push_back(tripmem::tests::random_name(rng));
  }
  for (std::size_t i = 0; i < relation_vocab; ++i) {
    relations.push_back(tripmem::tests::random_name(rng, 4, 9));
  }
  for (std::size_t i = 0; i < triple_count; ++i) {
    store.insert_triple(entities[rng.below(entities.size())],
                        relations[rng.below(relations.size())],
                        entities[rng.below(entities.size())]);
  }
  return store;
}

std::set<Id> ids_of(const QueryResult& result) {
  std::set<Id> ids;
  for (const ScoredEntity& scored : result.entities) ids.insert(scored.entity.id);
  return ids;
}

}  // namespace

TEST_CASE("candidate sets equal a brute-force filter") {
  const MemoryStore store = random_store(250, 42);
  const QueryEngine engine(store);
  Rng rng(1);

  for (int i = 0; i < 20; ++i) {
    const EmbeddingVector query = store.provider().embed(tripmem::tests::random_name(rng));

    const auto got = engine.candidate_entities(query, 0.7);
    std::set<Id> got_ids;
    double previous = 2.0;
    (void)previous;
    for (const auto& scored : got) got_ids.insert(scored.entity.id);

    std::set<Id> want_ids;
    {
      const auto view = store.read_view();
      for (const auto& [id, row] : view.entities()) {
        if (cosine(query, row.vector) >= 0.7) want_ids.insert(id);
      }
    }
    CHECK(got_ids == want_ids);

    const auto rel_got = engine.candidate_relations(query, 0.7);
    std::set<Id> rel_ids;
    for (const auto& scored : rel_got) rel_ids.insert(scored.relation.id);
    std::set<Id> rel_want;
    {
      const auto view = store.read_view();
      for (const auto& [id, row] : view.relations()) {
        if (cosine(query, row.vector) >= 0.7) rel_want.insert(id);
      }
    }
    CHECK(rel_ids == rel_want);
  }
}

TEST_CASE("a stored vector is its own candidate") {
  MemoryStore store(test_provider());
  store.insert_triple("Paris", "capital of", "France");
  const QueryEngine engine(store);
  const auto candidates = engine.candidate_entities(store.provider().embed("Paris"), 0.7);
  REQUIRE(!candidates.empty());
  CHECK(candidates.front().entity.name == "Paris");
  CHECK(candidates.front().score == doctest::Approx(1.0));
}

TEST_CASE("empty store yields empty candidate sets") {
  MemoryStore store(test_provider());
  const QueryEngine engine(store);
  CHECK(engine.candidate_entities(store.provider().embed("x"), 0.7).empty());
  CHECK(engine.candidate_relations(store.provider().embed("x"), 0.7).empty());
}

TEST_CASE("candidate lookups reject mismatched dimensions") {
  MemoryStore store(test_provider());
  const QueryEngine engine(store);
  EmbeddingVector wrong;
  wrong.values.assign(8, 0.0);
  CHECK_THROWS_AS(engine.candidate_entities(wrong, 0.7), DimensionError);
}

TEST_CASE("execute_query answers the album query") {
  MemoryStore store(test_provider());
  store.insert_triple("Il Regalo Più Grande", "part of", "Alla Mia Età");
  store.insert_triple("Tiziano Ferro", "notable work", "Il Regalo Più Grande");
  const QueryEngine engine(store);

  MemoryQuery query;
  query.direction = QueryDirection::object_query;
  query.bound_entity_name = "Il Regalo Più Grande";
  query.relation_name = "part of";
  const QueryResult result = engine.execute_query(query, RetrievalThresholds{});
  REQUIRE(result.entities.size() == 1);
  CHECK(result.entities.front().entity.name == "Alla Mia Età");
  CHECK(result.entities.front().score == doctest::Approx(1.0));
  CHECK_FALSE(result.overflowed);
}

TEST_CASE("query with no near candidate is empty, not overflowed") {
  MemoryStore store(test_provider());
  store.insert_triple("alpha", "rel", "beta");
  const QueryEngine engine(store);
  MemoryQuery query;
  query.bound_entity_name = "zzzzzzqqqq";
  query.relation_name = "rel";
  const QueryResult result = engine.execute_query(query, RetrievalThresholds{});
  CHECK(result.entities.empty());
  CHECK_FALSE(result.overflowed);
}

TEST_CASE("execute_query matches the brute-force formula oracle") {
  const MemoryStore store = random_store(2000, 7, 150, 15);
  const QueryEngine engine(store);
  Rng rng(8);
  const RetrievalThresholds thresholds;

  // Mix exact stored names (guaranteed hits) with random ones.
  std::vector<std::string> names;
  {
    const auto view = store.read_view();
    for (const auto& [id, row] : view.entities()) names.push_back(row.name);
  }

  for (int i = 0; i < 100; ++i) {
    MemoryQuery query;
    query.direction = (i % 2 == 0) ? QueryDirection::object_query : QueryDirection::subject_query;
    query.bound_entity_name =
        (i % 3 == 0) ? tripmem::tests::random_name(rng) : names[rng.below(names.size())];
    query.relation_name = (i % 5 == 0) ? tripmem::tests::random_name(rng, 4, 9)
                                       : store.relation(1 + static_cast<Id>(rng.below(10)))->name;

    const QueryResult got = engine.execute_query(query, thresholds);
    const QueryResult want = tripmem::tests::oracle_query(store, query, thresholds);
    CHECK(got.overflowed == want.overflowed);
    CHECK(got.raw_distinct_count == want.raw_distinct_count);
    REQUIRE(got.entities.size() == want.entities.size());
    for (std::size_t k = 0; k < got.entities.size(); ++k) {
      CHECK(got.entities[k].entity.id == want.entities[k].entity.id);
      CHECK(got.entities[k].score == doctest::Approx(want.entities[k].score).epsilon(1e-9));
      CHECK(got.entities[k].score >= thresholds.tau_r);
      CHECK(got.entities[k].score <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("results overflow empties the list and flags the query") {
  MemoryStore store(test_provider());
  for (int i = 0; i < 8; ++i) {
    store.insert_triple("hub", "links to", "spoke" + std::to_string(i));
  }
  const QueryEngine engine(store);
  MemoryQuery query;
  query.bound_entity_name = "hub";
  query.relation_name = "links to";

  RetrievalThresholds thresholds;
  thresholds.q_thr = 5;
  const QueryResult result = engine.execute_query(query, thresholds);
  CHECK(result.overflowed);
  CHECK(result.entities.empty());
  CHECK(result.raw_distinct_count == 8);

  thresholds.q_thr = 8;
  CHECK_FALSE(engine.execute_query(query, thresholds).overflowed);
}

TEST_CASE("raising tau_r or lowering q_thr never adds results") {
  const MemoryStore store = random_store(800, 13);
  const QueryEngine engine(store);
  Rng rng(14);
  std::vector<std::string> names;
  {
    const auto view = store.read_view();
    for (const auto& [id, row] : view.entities()) names.push_back(row.name);
  }

  for (int i = 0; i < 30; ++i) {
    MemoryQuery query;
    query.direction = (i % 2 == 0) ? QueryDirection::object_query : QueryDirection::subject_query;
    query.bound_entity_name = names[rng.below(names.size())];
    query.relation_name = store.relation(1 + static_cast<Id>(rng.below(10)))->name;

    RetrievalThresholds lo;
    lo.tau_r = 0.7;
    RetrievalThresholds hi = lo;
    hi.tau_r = 0.9;
    const auto results_lo = ids_of(engine.execute_query(query, lo));
    const auto results_hi = ids_of(engine.execute_query(query, hi));
    CHECK(std::includes(results_lo.begin(), results_lo.end(), results_hi.begin(),
                        results_hi.end()));

    RetrievalThresholds small_cap = lo;
    small_cap.q_thr = 2;
    const auto capped = ids_of(engine.execute_query(query, small_cap));
    CHECK(std::includes(results_lo.begin(), results_lo.end(), capped.begin(), capped.end()));
  }
}

TEST_CASE("execute_query leaves the store untouched") {
  const MemoryStore store = random_store(100, 21);
  const QueryEngine engine(store);
  const std::uint64_t before = store.content_hash();
  MemoryQuery query;
  query.bound_entity_name = "anything";
  query.relation_name = "whatever";
  engine.execute_query(query, RetrievalThresholds{});
  CHECK(store.content_hash() == before);
}

TEST_CASE("ambiguous query patterns") {
  MemoryStore store(test_provider());
  const QueryEngine engine(store);

  MemoryQuery country;
  country.direction = QueryDirection::subject_query;
  country.bound_entity_name = "United States";
  country.relation_name = "country";
  CHECK(engine.is_ambiguous_query(country));

  MemoryQuery contains;
  contains.direction = QueryDirection::object_query;
  contains.bound_entity_name = "United States";
  contains.relation_name = "contains administrative territorial entity";
  CHECK(engine.is_ambiguous_query(contains));

  MemoryQuery part_of;
  part_of.direction = QueryDirection::object_query;
  part_of.bound_entity_name = "Il Regalo Più Grande";
  part_of.relation_name = "part of";
  CHECK_FALSE(engine.is_ambiguous_query(part_of));

  // Direction matters: "country" is only filtered on the subject side.
  MemoryQuery country_object = country;
  country_object.direction = QueryDirection::object_query;
  CHECK_FALSE(engine.is_ambiguous_query(country_object));

  // Matching is normalized.
  MemoryQuery shouty = country;
  shouty.relation_name = "  COUNTRY ";
  CHECK(engine.is_ambiguous_query(shouty));
}

TEST_CASE("ambiguity list file round trip and errors") {
  const std::string path = tripmem::tests::unique_temp_path("ambiguity");
  {
    std::ofstream out(path);
    out << "# test list\n";
    out << "S:made up relation\n";
    out << "O:another one\n";
  }
  const AmbiguityList list = AmbiguityList::load(path);
  CHECK(list.matches(QueryDirection::subject_query, "Made Up Relation"));
  CHECK(list.matches(QueryDirection::object_query, "another one"));
  CHECK_FALSE(list.matches(QueryDirection::subject_query, "country"));

  {
    std::ofstream out(path);
    out << "X:bad prefix\n";
  }
  CHECK_THROWS_AS(AmbiguityList::load(path), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("batch merges, deduplicates and skips ambiguous queries") {
  MemoryStore store(test_provider());
  store.insert_triple("a", "likes", "x");
  store.insert_triple("b", "likes", "x");
  store.insert_triple("b", "likes", "y");
  const QueryEngine engine(store);
  const RetrievalThresholds thresholds;

  MemoryQuery qa;
  qa.bound_entity_name = "a";
  qa.relation_name = "likes";
  MemoryQuery qb;
  qb.bound_entity_name = "b";
  qb.relation_name = "likes";

  const std::vector<MemoryQuery> queries{qa, qb};
  const QueryResult merged = engine.execute_batch(queries, thresholds);
  CHECK(ids_of(merged).size() == 2);  // {x, y}
  CHECK_FALSE(merged.filtered_ambiguous);

  MemoryQuery ambiguous;
  ambiguous.direction = QueryDirection::subject_query;
  ambiguous.bound_entity_name = "United States";
  ambiguous.relation_name = "country";
  const std::vector<MemoryQuery> only_ambiguous{ambiguous};
  const QueryResult empty = engine.execute_batch(only_ambiguous, thresholds);
  CHECK(empty.entities.empty());
  CHECK(empty.filtered_ambiguous);
}

TEST_CASE("batch equals the union of individual query outputs") {
  const MemoryStore store = random_store(600, 31);
  const QueryEngine engine(store);
  Rng rng(32);
  const RetrievalThresholds thresholds;
  std::vector<std::string> names;
  {
    const auto view = store.read_view();
    for (const auto& [id, row] : view.entities()) names.push_back(row.name);
  }

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<MemoryQuery> queries;
    for (int q = 0; q < 3; ++q) {
      MemoryQuery query;
      query.direction = rng.below(2) == 0 ? QueryDirection::object_query
                                          : QueryDirection::subject_query;
      query.bound_entity_name = names[rng.below(names.size())];
      query.relation_name = store.relation(1 + static_cast<Id>(rng.below(10)))->name;
      queries.push_back(std::move(query));
    }
    const QueryResult merged = engine.execute_batch(queries, thresholds);

    std::map<Id, double> oracle;
    for (const MemoryQuery& query : queries) {
      if (engine.is_ambiguous_query(query)) continue;
      for (const ScoredEntity& scored : engine.execute_query(query, thresholds).entities) {
        auto [it, added] = oracle.emplace(scored.entity.id, scored.score);
        if (!added && scored.score > it->second) it->second = scored.score;
      }
    }
    if (oracle.size() > thresholds.q_thr) {
      CHECK(merged.overflowed);
      CHECK(merged.entities.empty());
    } else {
      REQUIRE(merged.entities.size() == oracle.size());
      for (const ScoredEntity& scored : merged.entities) {
        CHECK(oracle.at(scored.entity.id) == doctest::Approx(scored.score).epsilon(1e-12));
      }
      // Ordering: scores non-increasing, ties by ascending id.
      for (std::size_t k = 1; k < merged.entities.size(); ++k) {
        const bool ordered =
            merged.entities[k - 1].score > merged.entities[k].score ||
            (merged.entities[k - 1].score == merged.entities[k].score &&
             merged.entities[k - 1].entity.id < merged.entities[k].entity.id);
        CHECK(ordered);
      }
    }
  }
}
