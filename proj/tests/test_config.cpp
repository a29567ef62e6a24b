#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support/oracles.hpp"
#include "tripmem/config.hpp"
#include "tripmem/errors.hpp"

using namespace tripmem;

TEST_CASE("config defaults and profiles") {
  const std::string path = tripmem::tests::unique_temp_path("config");

  SUBCASE("language modeling profile with overrides") {
    {
      std::ofstream out(path);
      out << R"({"thresholds": {"profile": "language_modeling", "tau_r": 0.8},
                 "embedding": {"provider": "reference_hash", "dimension": 24, "seed": 5},
                 "seen_scope": "document"})";
    }
    const EngineConfig config = EngineConfig::load(path);
    CHECK(config.thresholds.tau_e == 0.7);
    CHECK(config.thresholds.tau_t == 0.7);
    CHECK(config.thresholds.tau_r == 0.8);  // explicit value beats the profile
    CHECK(config.thresholds.q_thr == 30);
    CHECK(config.embedding.dimension == 24);
    CHECK(config.embedding.seed == 5);
    CHECK(config.seen_scope == SeenScope::document);
    CHECK(config.edit_match_mode == EditMatchMode::subject_relation);
  }

  SUBCASE("editing profile") {
    {
      std::ofstream out(path);
      out << R"({"thresholds": {"profile": "editing"}})";
    }
    const EngineConfig config = EngineConfig::load(path);
    CHECK(config.thresholds.tau_e == 0.85);
    CHECK(config.thresholds.tau_t == 0.2);
    CHECK(config.thresholds.tau_r == 0.6);
  }

  SUBCASE("bad values are rejected") {
    {
      std::ofstream out(path);
      out << R"({"thresholds": {"tau_e": 1.5}})";
    }
    CHECK_THROWS_AS(EngineConfig::load(path), ConfigError);
    {
      std::ofstream out(path);
      out << R"({"embedding": {"dimension": 2}})";
    }
    CHECK_THROWS_AS(EngineConfig::load(path), ConfigError);
    {
      std::ofstream out(path);
      out << R"({"seen_scope": "sometimes"})";
    }
    CHECK_THROWS_AS(EngineConfig::load(path), ConfigError);
    {
      std::ofstream out(path);
      out << "not json";
    }
    CHECK_THROWS_AS(EngineConfig::load(path), ConfigError);
  }

  SUBCASE("save/load round trip") {
    EngineConfig config;
    config.thresholds = RetrievalThresholds::editing();
    config.embedding.dimension = 16;
    config.embedding.seed = 42;
    config.edit_match_mode = EditMatchMode::strict;
    config.seen_scope = SeenScope::document;
    config.snapshot_path = "some/store.tm";
    config.save(path);
    const EngineConfig loaded = EngineConfig::load(path);
    CHECK(loaded.thresholds.tau_t == 0.2);
    CHECK(loaded.embedding.dimension == 16);
    CHECK(loaded.edit_match_mode == EditMatchMode::strict);
    CHECK(loaded.seen_scope == SeenScope::document);
    CHECK(loaded.snapshot_path == "some/store.tm");
  }

  std::filesystem::remove(path);
}

TEST_CASE("missing config file is a storage error") {
  CHECK_THROWS_AS(EngineConfig::load("/nonexistent/config.json"), StorageError);
}
