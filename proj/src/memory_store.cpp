#include "tripmem/memory_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "tripmem/errors.hpp"
#include "tripmem/text.hpp"

namespace tripmem {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'S', 'N', 'A', 'P', '0', '1'};
constexpr char kEndMagic[8] = {'T', 'M', 'S', 'N', 'A', 'P', 'E', 'D'};
constexpr std::uint32_t kFormatVersion = 1;

// Little-endian binary writer with explicit failure reporting.
class SnapshotWriter {
 public:
  explicit SnapshotWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw StorageError("cannot open snapshot file for writing: " + path);
    path_ = path;
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw StorageError("write failure on snapshot file: " + path_);
  }

  void u8(std::uint8_t v) { bytes(&v, 1); }

  void u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 4);
  }

  void u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 8);
  }

  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    if (!s.empty()) bytes(s.data(), s.size());
  }

  void close() {
    out_.close();
    if (!out_) throw StorageError("close failure on snapshot file: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class SnapshotReader {
 public:
  explicit SnapshotReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw StorageError("cannot open snapshot file: " + path);
  }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CorruptSnapshotError("snapshot truncated", offset_ + static_cast<std::size_t>(in_.gcount()));
    }
    offset_ += n;
  }

  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }

  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::uint64_t u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }

  std::size_t offset() const noexcept { return offset_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw CorruptSnapshotError(message, offset_);
  }

 private:
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace

std::size_t MemoryStore::TripleKeyHash::operator()(const TripleKey& k) const noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (Id part : {k.subject, k.relation, k.object}) {
    h ^= static_cast<std::uint64_t>(part);
    h *= 1099511628211ull;
    h = mix64(h);
  }
  return static_cast<std::size_t>(h);
}

MemoryStore::MemoryStore(std::shared_ptr<const EmbeddingProvider> provider,
                         EditMatchMode edit_match_mode)
    : provider_(std::move(provider)), edit_match_mode_(edit_match_mode) {
  if (!provider_) throw ConfigError("MemoryStore requires an embedding provider");
}

MemoryStore::MemoryStore(MemoryStore&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  provider_ = std::move(other.provider_);
  edit_match_mode_ = other.edit_match_mode_;
  entities_ = std::move(other.entities_);
  relations_ = std::move(other.relations_);
  triples_ = std::move(other.triples_);
  entity_by_key_ = std::move(other.entity_by_key_);
  relation_by_key_ = std::move(other.relation_by_key_);
  triple_by_key_ = std::move(other.triple_by_key_);
  triples_by_subject_ = std::move(other.triples_by_subject_);
  triples_by_object_ = std::move(other.triples_by_object_);
  next_entity_id_ = other.next_entity_id_;
  next_relation_id_ = other.next_relation_id_;
  next_triple_id_ = other.next_triple_id_;
}

void MemoryStore::check_name(std::string_view name, const char* role) const {
  if (is_blank(name)) {
    throw InvalidTripleError(std::string("triple ") + role + " name is empty");
  }
}

Id MemoryStore::intern_entity_locked(std::string_view name) {
  const std::string key = normalize_text(name);
  if (auto it = entity_by_key_.find(key); it != entity_by_key_.end()) return it->second;
  Entity row;
  row.id = next_entity_id_++;
  row.name = std::string(name);
  row.vector = provider_->embed(name);
  entity_by_key_.emplace(key, row.id);
  const Id id = row.id;
  entities_.emplace(id, std::move(row));
  return id;
}

Id MemoryStore::intern_relation_locked(std::string_view name) {
  const std::string key = normalize_text(name);
  if (auto it = relation_by_key_.find(key); it != relation_by_key_.end()) return it->second;
  Relation row;
  row.id = next_relation_id_++;
  row.name = std::string(name);
  row.vector = provider_->embed(name);
  relation_by_key_.emplace(key, row.id);
  const Id id = row.id;
  relations_.emplace(id, std::move(row));
  return id;
}

InsertResult MemoryStore::insert_locked(std::string_view subject_name,
                                        std::string_view relation_name,
                                        std::string_view object_name,
                                        std::optional<std::string> provenance) {
  check_name(subject_name, "subject");
  check_name(relation_name, "relation");
  check_name(object_name, "object");

  const Id subject_id = intern_entity_locked(subject_name);
  const Id relation_id = intern_relation_locked(relation_name);
  const Id object_id = intern_entity_locked(object_name);

  const TripleKey key{subject_id, relation_id, object_id};
  if (auto it = triple_by_key_.find(key); it != triple_by_key_.end()) {
    return InsertResult{triples_.at(it->second), false};
  }

  Triple row;
  row.id = next_triple_id_++;
  row.subject_id = subject_id;
  row.relation_id = relation_id;
  row.object_id = object_id;
  row.provenance = std::move(provenance);
  triple_by_key_.emplace(key, row.id);
  triples_by_subject_[subject_id].push_back(row.id);
  triples_by_object_[object_id].push_back(row.id);
  const Id id = row.id;
  auto [it, ok] = triples_.emplace(id, std::move(row));
  (void)ok;
  return InsertResult{it->second, true};
}

void MemoryStore::unlink_triple_locked(Id triple_id) {
  auto it = triples_.find(triple_id);
  if (it == triples_.end()) return;
  const Triple& row = it->second;
  triple_by_key_.erase(TripleKey{row.subject_id, row.relation_id, row.object_id});
  auto drop = [triple_id](std::vector<Id>& ids) { std::erase(ids, triple_id); };
  if (auto adj = triples_by_subject_.find(row.subject_id); adj != triples_by_subject_.end()) {
    drop(adj->second);
  }
  if (auto adj = triples_by_object_.find(row.object_id); adj != triples_by_object_.end()) {
    drop(adj->second);
  }
  triples_.erase(it);
}

InsertResult MemoryStore::insert_triple(std::string_view subject_name,
                                        std::string_view relation_name,
                                        std::string_view object_name,
                                        std::optional<std::string> provenance) {
  std::unique_lock lock(mutex_);
  return insert_locked(subject_name, relation_name, object_name, std::move(provenance));
}

UpsertResult MemoryStore::upsert_edit_triple(std::string_view subject_name,
                                             std::string_view relation_name,
                                             std::string_view object_name) {
  std::unique_lock lock(mutex_);
  check_name(subject_name, "subject");
  check_name(relation_name, "relation");
  check_name(object_name, "object");

  UpsertResult result;
  if (edit_match_mode_ == EditMatchMode::subject_relation) {
    const auto subject_it = entity_by_key_.find(normalize_text(subject_name));
    const auto relation_it = relation_by_key_.find(normalize_text(relation_name));
    if (subject_it != entity_by_key_.end() && relation_it != relation_by_key_.end()) {
      const auto object_it = entity_by_key_.find(normalize_text(object_name));
      const Id new_object_id = object_it == entity_by_key_.end() ? 0 : object_it->second;
      std::vector<Id> stale;
      if (auto adj = triples_by_subject_.find(subject_it->second);
          adj != triples_by_subject_.end()) {
        for (Id tid : adj->second) {
          const Triple& row = triples_.at(tid);
          if (row.relation_id == relation_it->second && row.object_id != new_object_id) {
            stale.push_back(tid);
          }
        }
      }
      for (Id tid : stale) unlink_triple_locked(tid);
      result.replaced_count = stale.size();
    }
  }
  // Strict mode falls through: only an exact (s,r,o) match is "the same
  // fact", and dedup below already handles it.
  InsertResult inserted = insert_locked(subject_name, relation_name, object_name, std::nullopt);
  result.triple = inserted.triple;
  result.inserted = inserted.inserted;
  return result;
}

MemoryStats MemoryStore::stats() const {
  std::shared_lock lock(mutex_);
  MemoryStats s;
  s.triple_count = triples_.size();
  s.unique_entity_count = entities_.size();
  s.unique_relation_count = relations_.size();
  if (s.triple_count == 0) {
    s.redundancy_fraction = 1.0;
  } else {
    const double raw = static_cast<double>(s.unique_entity_count + s.unique_relation_count) /
                       static_cast<double>(s.triple_count);
    s.redundancy_fraction = std::min(1.0, raw);
  }
  return s;
}

std::size_t MemoryStore::compact() {
  std::unique_lock lock(mutex_);
  std::unordered_set<Id> live_entities;
  std::unordered_set<Id> live_relations;
  for (const auto& [id, row] : triples_) {
    live_entities.insert(row.subject_id);
    live_entities.insert(row.object_id);
    live_relations.insert(row.relation_id);
  }
  std::size_t dropped = 0;
  for (auto it = entities_.begin(); it != entities_.end();) {
    if (live_entities.contains(it->first)) {
      ++it;
      continue;
    }
    entity_by_key_.erase(normalize_text(it->second.name));
    triples_by_subject_.erase(it->first);
    triples_by_object_.erase(it->first);
    it = entities_.erase(it);
    ++dropped;
  }
  for (auto it = relations_.begin(); it != relations_.end();) {
    if (live_relations.contains(it->first)) {
      ++it;
      continue;
    }
    relation_by_key_.erase(normalize_text(it->second.name));
    it = relations_.erase(it);
    ++dropped;
  }
  return dropped;
}

std::optional<Entity> MemoryStore::entity(Id id) const {
  std::shared_lock lock(mutex_);
  if (auto it = entities_.find(id); it != entities_.end()) return it->second;
  return std::nullopt;
}

std::optional<Relation> MemoryStore::relation(Id id) const {
  std::shared_lock lock(mutex_);
  if (auto it = relations_.find(id); it != relations_.end()) return it->second;
  return std::nullopt;
}

std::optional<Triple> MemoryStore::triple(Id id) const {
  std::shared_lock lock(mutex_);
  if (auto it = triples_.find(id); it != triples_.end()) return it->second;
  return std::nullopt;
}

std::optional<Entity> MemoryStore::find_entity(std::string_view name) const {
  std::shared_lock lock(mutex_);
  if (auto it = entity_by_key_.find(normalize_text(name)); it != entity_by_key_.end()) {
    return entities_.at(it->second);
  }
  return std::nullopt;
}

std::optional<Relation> MemoryStore::find_relation(std::string_view name) const {
  std::shared_lock lock(mutex_);
  if (auto it = relation_by_key_.find(normalize_text(name)); it != relation_by_key_.end()) {
    return relations_.at(it->second);
  }
  return std::nullopt;
}

const std::vector<Id>* MemoryStore::ReadView::triples_with_subject(Id entity_id) const {
  auto it = store_->triples_by_subject_.find(entity_id);
  return it == store_->triples_by_subject_.end() ? nullptr : &it->second;
}

const std::vector<Id>* MemoryStore::ReadView::triples_with_object(Id entity_id) const {
  auto it = store_->triples_by_object_.find(entity_id);
  return it == store_->triples_by_object_.end() ? nullptr : &it->second;
}

std::uint64_t MemoryStore::content_hash() const {
  std::shared_lock lock(mutex_);
  std::uint64_t h = 14695981039346656037ull;
  auto mix_str = [&h](std::string_view s) {
    h = fnv1a64(s, h);
    h = mix64(h);
  };
  auto mix_id = [&h](Id v) { h = mix64(h ^ static_cast<std::uint64_t>(v)); };
  for (const auto& [id, row] : entities_) {
    mix_id(id);
    mix_str(row.name);
    for (double f : row.vector.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &f, 8);
      h = mix64(h ^ bits);
    }
  }
  for (const auto& [id, row] : relations_) {
    mix_id(id);
    mix_str(row.name);
  }
  for (const auto& [id, row] : triples_) {
    mix_id(id);
    mix_id(row.subject_id);
    mix_id(row.relation_id);
    mix_id(row.object_id);
    if (row.provenance) mix_str(*row.provenance);
  }
  return h;
}

void MemoryStore::save_snapshot(const std::string& path) const {
  std::shared_lock lock(mutex_);
  SnapshotWriter w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  const EmbeddingProviderConfig cfg = provider_->config();
  w.u8(cfg.kind == ProviderKind::reference_hash ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(cfg.dimension));
  w.i64(cfg.seed);
  w.u64(cfg.fingerprint());
  w.u8(edit_match_mode_ == EditMatchMode::subject_relation ? 0 : 1);
  w.i64(next_entity_id_);
  w.i64(next_relation_id_);
  w.i64(next_triple_id_);

  w.u64(entities_.size());
  for (const auto& [id, row] : entities_) {
    w.i64(id);
    w.str(row.name);
    for (double f : row.vector.values) w.f64(f);
  }
  w.u64(relations_.size());
  for (const auto& [id, row] : relations_) {
    w.i64(id);
    w.str(row.name);
    for (double f : row.vector.values) w.f64(f);
  }
  w.u64(triples_.size());
  for (const auto& [id, row] : triples_) {
    w.i64(id);
    w.i64(row.subject_id);
    w.i64(row.relation_id);
    w.i64(row.object_id);
    w.u8(row.provenance.has_value() ? 1 : 0);
    if (row.provenance) w.str(*row.provenance);
  }
  w.bytes(kEndMagic, sizeof kEndMagic);
  w.close();
}

MemoryStore MemoryStore::load_snapshot_impl(
    const std::string& path, std::shared_ptr<const EmbeddingProvider> external_provider) {
  SnapshotReader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) r.fail("bad snapshot magic");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) r.fail("unsupported snapshot version " + std::to_string(version));

  EmbeddingProviderConfig cfg;
  const std::uint8_t kind = r.u8();
  cfg.kind = kind == 0 ? ProviderKind::reference_hash : ProviderKind::external;
  cfg.dimension = r.u32();
  cfg.seed = r.i64();
  const std::uint64_t fingerprint = r.u64();
  const std::uint8_t mode_byte = r.u8();
  if (mode_byte > 1) r.fail("bad edit match mode byte");
  const EditMatchMode mode =
      mode_byte == 0 ? EditMatchMode::subject_relation : EditMatchMode::strict;

  std::shared_ptr<const EmbeddingProvider> provider;
  if (external_provider) {
    if (external_provider->dimension() != cfg.dimension) {
      throw StorageError("snapshot dimension " + std::to_string(cfg.dimension) +
                         " does not match provider dimension " +
                         std::to_string(external_provider->dimension()));
    }
    if (external_provider->config().fingerprint() != fingerprint) {
      throw StorageError("snapshot was written with a different embedding provider");
    }
    provider = std::move(external_provider);
  } else {
    if (cfg.kind == ProviderKind::external) {
      throw StorageError(
          "snapshot was written with an external embedding provider; pass the provider instance");
    }
    provider = make_provider(cfg);
    if (provider->config().fingerprint() != fingerprint) r.fail("provider fingerprint mismatch");
  }

  MemoryStore store(provider, mode);
  store.next_entity_id_ = r.i64();
  store.next_relation_id_ = r.i64();
  store.next_triple_id_ = r.i64();
  if (store.next_entity_id_ < 1 || store.next_relation_id_ < 1 || store.next_triple_id_ < 1) {
    r.fail("bad id counters");
  }

  const std::uint64_t entity_count = r.u64();
  for (std::uint64_t i = 0; i < entity_count; ++i) {
    Entity row;
    row.id = r.i64();
    row.name = r.str();
    row.vector.values.resize(cfg.dimension);
    for (std::size_t d = 0; d < cfg.dimension; ++d) row.vector.values[d] = r.f64();
    if (row.id <= 0 || row.id >= store.next_entity_id_) r.fail("entity id out of range");
    const std::string key = normalize_text(row.name);
    if (key.empty()) r.fail("entity with blank name");
    if (!store.entity_by_key_.emplace(key, row.id).second) r.fail("duplicate entity name");
    const Id id = row.id;
    if (!store.entities_.emplace(id, std::move(row)).second) r.fail("duplicate entity id");
  }

  const std::uint64_t relation_count = r.u64();
  for (std::uint64_t i = 0; i < relation_count; ++i) {
    Relation row;
    row.id = r.i64();
    row.name = r.str();
    row.vector.values.resize(cfg.dimension);
    for (std::size_t d = 0; d < cfg.dimension; ++d) row.vector.values[d] = r.f64();
    if (row.id <= 0 || row.id >= store.next_relation_id_) r.fail("relation id out of range");
    const std::string key = normalize_text(row.name);
    if (key.empty()) r.fail("relation with blank name");
    if (!store.relation_by_key_.emplace(key, row.id).second) r.fail("duplicate relation name");
    const Id id = row.id;
    if (!store.relations_.emplace(id, std::move(row)).second) r.fail("duplicate relation id");
  }

  const std::uint64_t triple_count = r.u64();
  for (std::uint64_t i = 0; i < triple_count; ++i) {
    Triple row;
    row.id = r.i64();
    row.subject_id = r.i64();
    row.relation_id = r.i64();
    row.object_id = r.i64();
    if (r.u8() != 0) row.provenance = r.str();
    if (row.id <= 0 || row.id >= store.next_triple_id_) r.fail("triple id out of range");
    if (!store.entities_.contains(row.subject_id)) r.fail("triple subject id unresolved");
    if (!store.entities_.contains(row.object_id)) r.fail("triple object id unresolved");
    if (!store.relations_.contains(row.relation_id)) r.fail("triple relation id unresolved");
    const TripleKey key{row.subject_id, row.relation_id, row.object_id};
    if (!store.triple_by_key_.emplace(key, row.id).second) r.fail("duplicate triple key");
    store.triples_by_subject_[row.subject_id].push_back(row.id);
    store.triples_by_object_[row.object_id].push_back(row.id);
    const Id id = row.id;
    if (!store.triples_.emplace(id, std::move(row)).second) r.fail("duplicate triple id");
  }

  char end_magic[8];
  r.bytes(end_magic, 8);
  if (std::memcmp(end_magic, kEndMagic, 8) != 0) r.fail("bad snapshot end marker");
  return store;
}

MemoryStore MemoryStore::load_snapshot(const std::string& path) {
  return load_snapshot_impl(path, nullptr);
}

MemoryStore MemoryStore::load_snapshot(const std::string& path,
                                       std::shared_ptr<const EmbeddingProvider> provider) {
  if (!provider) throw ConfigError("load_snapshot requires a provider instance");
  return load_snapshot_impl(path, std::move(provider));
}

}  // namespace tripmem
