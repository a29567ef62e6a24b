#ifndef TRIPMEM_CONFIG_HPP
#define TRIPMEM_CONFIG_HPP

#include <string>

#include "tripmem/datagen.hpp"
#include "tripmem/embedding.hpp"
#include "tripmem/memory_store.hpp"
#include "tripmem/retrieval.hpp"

namespace tripmem {

/// Engine-wide configuration, loaded from a JSON file. Two named threshold
/// profiles exist: "language_modeling" (the default) and "editing"; explicit
/// threshold fields override the profile values.
struct EngineConfig {
  RetrievalThresholds thresholds;
  EmbeddingProviderConfig embedding;
  std::string ambiguity_list_path;  // empty = built-in defaults
  EditMatchMode edit_match_mode = EditMatchMode::subject_relation;
  SeenScope seen_scope = SeenScope::corpus;
  std::string snapshot_path;

  static EngineConfig load(const std::string& path);
  void save(const std::string& path) const;

  AmbiguityList make_ambiguity_list() const;
};

}  // namespace tripmem

#endif  // TRIPMEM_CONFIG_HPP
