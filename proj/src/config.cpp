#include "tripmem/config.hpp"

#include <fstream>

#include <json.hpp>

#include "tripmem/errors.hpp"

namespace tripmem {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_unit_interval(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(value));
  }
}

}  // namespace

EngineConfig EngineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open config file: " + path);
  ordered_json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError("config file " + path + ": expected a JSON object");

  EngineConfig config;
  if (root.contains("thresholds")) {
    const auto& jt = root["thresholds"];
    const std::string profile = jt.value("profile", "language_modeling");
    if (profile == "language_modeling") {
      config.thresholds = RetrievalThresholds::language_modeling();
    } else if (profile == "editing") {
      config.thresholds = RetrievalThresholds::editing();
    } else {
      throw ConfigError("unknown thresholds profile '" + profile + "'");
    }
    config.thresholds.tau_e = jt.value("tau_e", config.thresholds.tau_e);
    config.thresholds.tau_t = jt.value("tau_t", config.thresholds.tau_t);
    config.thresholds.tau_r = jt.value("tau_r", config.thresholds.tau_r);
    config.thresholds.q_thr = jt.value("q_thr", config.thresholds.q_thr);
    check_unit_interval(config.thresholds.tau_e, "tau_e");
    check_unit_interval(config.thresholds.tau_t, "tau_t");
    check_unit_interval(config.thresholds.tau_r, "tau_r");
    if (config.thresholds.q_thr == 0) throw ConfigError("q_thr must be positive");
  }
  if (root.contains("embedding")) {
    const auto& je = root["embedding"];
    const std::string provider = je.value("provider", "reference_hash");
    if (provider == "reference_hash") {
      config.embedding.kind = ProviderKind::reference_hash;
    } else if (provider == "external") {
      config.embedding.kind = ProviderKind::external;
    } else {
      throw ConfigError("unknown embedding provider '" + provider + "'");
    }
    config.embedding.dimension = je.value("dimension", config.embedding.dimension);
    config.embedding.seed = je.value("seed", config.embedding.seed);
    if (config.embedding.dimension < 8) {
      throw ConfigError("embedding dimension must be at least 8");
    }
  }
  config.ambiguity_list_path = root.value("ambiguity_list_path", "");
  const std::string match_mode = root.value("edit_match_mode", "subject_relation");
  if (match_mode == "subject_relation") {
    config.edit_match_mode = EditMatchMode::subject_relation;
  } else if (match_mode == "strict") {
    config.edit_match_mode = EditMatchMode::strict;
  } else {
    throw ConfigError("unknown edit_match_mode '" + match_mode + "'");
  }
  const std::string scope = root.value("seen_scope", "corpus");
  if (scope == "corpus") {
    config.seen_scope = SeenScope::corpus;
  } else if (scope == "document") {
    config.seen_scope = SeenScope::document;
  } else {
    throw ConfigError("unknown seen_scope '" + scope + "'");
  }
  config.snapshot_path = root.value("snapshot_path", "");
  return config;
}

void EngineConfig::save(const std::string& path) const {
  ordered_json root;
  root["thresholds"] = ordered_json{{"tau_e", thresholds.tau_e},
                                    {"tau_t", thresholds.tau_t},
                                    {"tau_r", thresholds.tau_r},
                                    {"q_thr", thresholds.q_thr}};
  root["embedding"] =
      ordered_json{{"provider", embedding.kind == ProviderKind::reference_hash ? "reference_hash"
                                                                               : "external"},
                   {"dimension", embedding.dimension},
                   {"seed", embedding.seed}};
  root["ambiguity_list_path"] = ambiguity_list_path;
  root["edit_match_mode"] =
      edit_match_mode == EditMatchMode::subject_relation ? "subject_relation" : "strict";
  root["seen_scope"] = seen_scope == SeenScope::corpus ? "corpus" : "document";
  root["snapshot_path"] = snapshot_path;
  std::ofstream out(path);
  if (!out) throw StorageError("cannot open config file for writing: " + path);
  out << root.dump(2) << '\n';
  if (!out) throw StorageError("write failure on config file: " + path);
}

AmbiguityList EngineConfig::make_ambiguity_list() const {
  if (ambiguity_list_path.empty()) return AmbiguityList::defaults();
  return AmbiguityList::load(ambiguity_list_path);
}

}  // namespace tripmem
