#include "tripmem/datagen.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "tripmem/errors.hpp"
#include "tripmem/text.hpp"

namespace tripmem {

using ordered_json = nlohmann::ordered_json;

std::string AnnotatedDocument::document_text() const {
  std::string text;
  bool first = true;
  for (const std::string& sentence : sentences) {
    if (!first) text += ' ';
    first = false;
    text += sentence;
  }
  return text;
}

std::vector<std::size_t> AnnotatedDocument::sentence_offsets() const {
  std::vector<std::size_t> offsets;
  offsets.reserve(sentences.size());
  std::size_t offset = 0;
  for (const std::string& sentence : sentences) {
    offsets.push_back(offset);
    offset += sentence.size() + 1;  // joining space
  }
  return offsets;
}

void AnnotatedDocument::finalize() {
  const auto offsets = sentence_offsets();
  for (EntityMention& mention : mentions) {
    if (mention.sentence_index >= sentences.size()) {
      throw ConfigError("document " + id + ": mention sentence index out of range");
    }
    const std::string& sentence = sentences[mention.sentence_index];
    if (mention.begin >= mention.end || mention.end > sentence.size()) {
      throw ConfigError("document " + id + ": mention span out of range in sentence " +
                        std::to_string(mention.sentence_index));
    }
    if (is_blank(mention.entity_name)) {
      throw ConfigError("document " + id + ": mention with blank entity name");
    }
    mention.position_idx = offsets[mention.sentence_index] + mention.begin;
  }
  std::map<std::string, std::size_t> last_position;
  for (const EntityMention* mention : mentions_in_order()) {
    const std::string key = normalize_text(mention->entity_name);
    const auto it = last_position.find(key);
    if (it != last_position.end() && mention->position_idx <= it->second) {
      throw ConfigError("document " + id + ": entity '" + mention->entity_name +
                        "' has non-increasing mention positions");
    }
    last_position[key] = mention->position_idx;
  }
  for (const DocumentTriple& triple : triples) {
    if (is_blank(triple.subject) || is_blank(triple.relation) || is_blank(triple.object)) {
      throw ConfigError("document " + id + ": triple with blank field");
    }
    for (std::size_t evidence : triple.evidence_sentences) {
      if (evidence >= sentences.size()) {
        throw ConfigError("document " + id + ": triple evidence index out of range");
      }
    }
  }
}

std::vector<const EntityMention*> AnnotatedDocument::mentions_in_order() const {
  std::vector<const EntityMention*> order;
  order.reserve(mentions.size());
  for (const EntityMention& mention : mentions) order.push_back(&mention);
  std::stable_sort(order.begin(), order.end(), [](const EntityMention* a, const EntityMention* b) {
    return a->position_idx < b->position_idx;
  });
  return order;
}

std::vector<AnnotatedDocument> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open corpus file: " + path);
  ordered_json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw ConfigError("corpus file " + path + ": " + e.what());
  }
  if (!root.is_object() || !root.contains("documents") || !root["documents"].is_array()) {
    throw ConfigError("corpus file " + path + ": expected top-level {\"documents\": [...]}");
  }
  std::vector<AnnotatedDocument> documents;
  for (const auto& jd : root["documents"]) {
    AnnotatedDocument doc;
    doc.id = jd.value("id", "doc" + std::to_string(documents.size()));
    if (!jd.contains("sentences") || !jd["sentences"].is_array()) {
      throw ConfigError("document " + doc.id + ": missing sentences array");
    }
    for (const auto& js : jd["sentences"]) doc.sentences.push_back(js.get<std::string>());
    for (const auto& jm : jd.value("mentions", ordered_json::array())) {
      EntityMention mention;
      mention.entity_name = jm.at("entity").get<std::string>();
      mention.sentence_index = jm.at("sentence").get<std::size_t>();
      mention.begin = jm.at("begin").get<std::size_t>();
      mention.end = jm.at("end").get<std::size_t>();
      mention.is_full_mention = jm.value("full", true);
      doc.mentions.push_back(std::move(mention));
    }
    for (const auto& jt : jd.value("triples", ordered_json::array())) {
      DocumentTriple triple;
      triple.subject = jt.at("subject").get<std::string>();
      triple.relation = jt.at("relation").get<std::string>();
      triple.object = jt.at("object").get<std::string>();
      for (const auto& je : jt.value("evidence", ordered_json::array())) {
        triple.evidence_sentences.push_back(je.get<std::size_t>());
      }
      doc.triples.push_back(std::move(triple));
    }
    doc.finalize();
    documents.push_back(std::move(doc));
  }
  return documents;
}

std::string sanitize_name(std::string_view name) {
  static const std::string_view reserved[] = {
      markers::field_sep, markers::triple_sep, markers::call_open,
      markers::call_close, markers::read_trigger, markers::result_sep,
  };
  std::string out(name);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::string_view token : reserved) {
      std::size_t pos;
      while ((pos = out.find(token)) != std::string::npos) {
        out.erase(pos, token.size());
        changed = true;
      }
    }
  }
  if (is_blank(out)) out = "_";
  return out;
}

std::string SanitizationLog::apply(std::string_view name) {
  std::string sanitized = sanitize_name(name);
  if (sanitized != name && recorded_.insert(std::string(name)).second) {
    entries_.emplace_back(std::string(name), sanitized);
  }
  return sanitized;
}

namespace {

std::string triple_key(std::string_view subject, std::string_view relation,
                       std::string_view object) {
  std::string key = normalize_text(subject);
  key += '\x1f';
  key += normalize_text(relation);
  key += '\x1f';
  key += normalize_text(object);
  return key;
}

std::string query_key(const MemoryQuery& query) {
  std::string key = query.direction == QueryDirection::object_query ? "O" : "S";
  key += '\x1f';
  key += normalize_text(query.bound_entity_name);
  key += '\x1f';
  key += normalize_text(query.relation_name);
  return key;
}

}  // namespace

std::vector<WriteExample> generate_write_examples(const AnnotatedDocument& document,
                                                  SanitizationLog* log) {
  SanitizationLog local_log;
  SanitizationLog& sanitizer = log != nullptr ? *log : local_log;

  // Sentence indices with a full mention, per normalized entity name.
  std::map<std::string, std::vector<std::size_t>> full_mention_sentences;
  for (const EntityMention& mention : document.mentions) {
    if (!mention.is_full_mention) continue;
    full_mention_sentences[normalize_text(mention.entity_name)].push_back(mention.sentence_index);
  }
  auto has_full_in = [&](const std::string& key, std::size_t sentence) {
    const auto it = full_mention_sentences.find(key);
    if (it == full_mention_sentences.end()) return false;
    return std::find(it->second.begin(), it->second.end(), sentence) != it->second.end();
  };
  auto has_full_up_to = [&](const std::string& key, std::size_t sentence) {
    const auto it = full_mention_sentences.find(key);
    if (it == full_mention_sentences.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(),
                       [sentence](std::size_t s) { return s <= sentence; });
  };

  std::vector<WriteExample> examples;
  examples.reserve(document.sentences.size());
  std::vector<std::string> pretext;
  for (std::size_t i = 0; i < document.sentences.size(); ++i) {
    WriteCall call;
    std::unordered_set<std::string> emitted;
    for (const DocumentTriple& triple : document.triples) {
      const std::string subject_key = normalize_text(triple.subject);
      const std::string object_key = normalize_text(triple.object);
      const bool qualifies =
          (has_full_in(subject_key, i) && has_full_up_to(object_key, i)) ||
          (has_full_in(object_key, i) && has_full_up_to(subject_key, i));
      if (!qualifies) continue;
      if (!emitted.insert(triple_key(triple.subject, triple.relation, triple.object)).second) {
        continue;
      }
      call.triples.push_back(TripleText{sanitizer.apply(triple.subject),
                                        sanitizer.apply(triple.relation),
                                        sanitizer.apply(triple.object)});
    }
    WriteExample example;
    std::string input;
    {
      bool first = true;
      for (const std::string& sentence : pretext) {
        if (!first) input += ' ';
        first = false;
        input += sentence;
      }
      input += markers::user_start;
      input += document.sentences[i];
      input += markers::user_end;
    }
    example.input_text = std::move(input);
    example.target_text = serialize_write(call);
    examples.push_back(std::move(example));
    pretext.push_back(document.sentences[i]);
  }
  return examples;
}

ReadExampleGenerator::ReadExampleGenerator(const QueryEngine& engine,
                                           RetrievalThresholds thresholds, SeenScope scope)
    : engine_(engine), thresholds_(thresholds), scope_(scope) {}

std::vector<ReadExample> ReadExampleGenerator::generate(const AnnotatedDocument& document) {
  if (scope_ == SeenScope::document) {
    seen_triples_.clear();
    seen_entities_.clear();
  }

  const std::string text = document.document_text();
  std::vector<ReadExample> examples;
  std::size_t prev_read_pos = 0;

  for (const EntityMention* mention : document.mentions_in_order()) {
    const std::string target_key = normalize_text(mention->entity_name);

    struct Candidate {
      MemoryQuery query;
      std::vector<std::string> result_names;
    };
    std::vector<Candidate> candidates;
    std::unordered_set<std::string> candidate_keys;

    for (const DocumentTriple& triple : document.triples) {
      const std::string subject_key = normalize_text(triple.subject);
      const std::string object_key = normalize_text(triple.object);
      const bool target_is_subject = subject_key == target_key;
      const bool target_is_object = object_key == target_key;
      if (!target_is_subject && !target_is_object) continue;
      const std::string key = triple_key(triple.subject, triple.relation, triple.object);
      if (seen_triples_.contains(key)) continue;

      MemoryQuery query;
      std::string other_key;
      if (target_is_subject) {
        // Querying for the subject: bind the object side.
        query.direction = QueryDirection::subject_query;
        query.bound_entity_name = triple.object;
        other_key = object_key;
      } else {
        query.direction = QueryDirection::object_query;
        query.bound_entity_name = triple.subject;
        other_key = subject_key;
      }
      query.relation_name = triple.relation;

      // A triple becomes "seen" once both endpoints have appeared, i.e. at
      // the first target mention where the other entity is already known;
      // before that it stays live so the later endpoint can still query it.
      if (seen_entities_.contains(other_key)) {
        if (candidate_keys.insert(query_key(query)).second) {
          const QueryResult result = engine_.execute_query(query, thresholds_);
          if (result.raw_distinct_count <= thresholds_.q_thr) {
            Candidate candidate;
            candidate.query = query;
            for (const ScoredEntity& scored : result.entities) {
              candidate.result_names.push_back(scored.entity.name);
            }
            candidates.push_back(std::move(candidate));
          }
        }
        seen_triples_.insert(key);
      }
    }

    if (!candidates.empty()) {
      const std::size_t current_read_pos = mention->position_idx;
      std::stable_sort(candidates.begin(), candidates.end(),
                       [](const Candidate& a, const Candidate& b) {
                         return a.result_names.size() < b.result_names.size();
                       });
      const std::size_t keep = std::min(kMaxQueriesPerRead, candidates.size());

      ReadExample example;
      example.read_position = current_read_pos;
      example.target_entity = mention->entity_name;
      std::unordered_set<std::string> merged;
      for (std::size_t k = 0; k < keep; ++k) {
        MemoryQuery query = candidates[k].query;
        query.bound_entity_name = log_.apply(query.bound_entity_name);
        query.relation_name = log_.apply(query.relation_name);
        example.queries.push_back(std::move(query));
        for (const std::string& name : candidates[k].result_names) {
          const std::string sanitized = log_.apply(name);
          if (merged.insert(normalize_text(sanitized)).second) {
            example.result_names.push_back(sanitized);
          }
        }
      }
      if (example.result_names.empty()) {
        example.result_names.push_back(log_.apply(mention->entity_name));
      }

      example.pretext = text.substr(0, current_read_pos);
      example.pretext += markers::call_open;
      {
        ReadCall call;
        call.queries = example.queries;
        example.call_text = serialize_read(call).substr(markers::call_open.size());
      }
      {
        std::string results;
        bool first = true;
        for (const std::string& name : example.result_names) {
          if (!first) results += markers::result_sep;
          first = false;
          results += name;
        }
        results += markers::call_close;
        example.results_text = std::move(results);
      }
      example.loss_on_pretext = examples.empty();

      if (!examples.empty()) {
        examples.back().posttext = text.substr(prev_read_pos, current_read_pos - prev_read_pos);
      }
      prev_read_pos = current_read_pos;
      examples.push_back(std::move(example));
    }

    seen_entities_.insert(target_key);
  }

  if (!examples.empty()) {
    examples.back().posttext = text.substr(prev_read_pos);
  }
  return examples;
}

namespace {

constexpr std::string_view kExportFormat = "tripmem-examples";
constexpr int kExportVersion = 1;

ordered_json record_to_json(const TrainingRecord& record) {
  ordered_json j;
  if (const WriteExample* write = std::get_if<WriteExample>(&record)) {
    j["type"] = "write";
    j["input"] = write->input_text;
    j["target"] = write->target_text;
    j["loss"] = ordered_json{{"input", false}, {"target", true}};
  } else {
    const ReadExample& read = std::get<ReadExample>(record);
    j["type"] = "read";
    j["pretext"] = read.pretext;
    j["call"] = read.call_text;
    j["results"] = read.results_text;
    j["posttext"] = read.posttext;
    j["loss"] = ordered_json{{"pretext", read.loss_on_pretext},
                             {"call", read.loss_on_call},
                             {"results", read.loss_on_results},
                             {"posttext", read.loss_on_posttext}};
    ordered_json queries = ordered_json::array();
    for (const MemoryQuery& query : read.queries) queries.push_back(serialize_query(query));
    j["queries"] = std::move(queries);
    j["result_names"] = read.result_names;
    j["target_entity"] = read.target_entity;
    j["read_position"] = read.read_position;
  }
  return j;
}

TrainingRecord record_from_json(const ordered_json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "write") {
    WriteExample write;
    write.input_text = j.at("input").get<std::string>();
    write.target_text = j.at("target").get<std::string>();
    return write;
  }
  if (type != "read") throw ConfigError("unknown example record type '" + type + "'");
  ReadExample read;
  read.pretext = j.at("pretext").get<std::string>();
  read.call_text = j.at("call").get<std::string>();
  read.results_text = j.at("results").get<std::string>();
  read.posttext = j.at("posttext").get<std::string>();
  const auto& loss = j.at("loss");
  read.loss_on_pretext = loss.at("pretext").get<bool>();
  read.loss_on_call = loss.at("call").get<bool>();
  read.loss_on_results = loss.at("results").get<bool>();
  read.loss_on_posttext = loss.at("posttext").get<bool>();
  for (const auto& jq : j.at("queries")) {
    read.queries.push_back(parse_query(jq.get<std::string>()));
  }
  read.result_names = j.at("result_names").get<std::vector<std::string>>();
  read.target_entity = j.at("target_entity").get<std::string>();
  read.read_position = j.at("read_position").get<std::size_t>();
  return read;
}

}  // namespace

void export_examples(const std::vector<TrainingRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StorageError("cannot open examples file for writing: " + path);
  ordered_json header;
  header["format"] = kExportFormat;
  header["version"] = kExportVersion;
  header["count"] = records.size();
  out << header.dump() << '\n';
  for (const TrainingRecord& record : records) {
    out << record_to_json(record).dump() << '\n';
  }
  if (!out) throw StorageError("write failure on examples file: " + path);
}

std::vector<TrainingRecord> import_examples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open examples file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("examples file " + path + " has no header");
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const std::exception& e) {
    throw ConfigError("examples file " + path + ": bad header: " + e.what());
  }
  if (header.value("format", "") != kExportFormat) {
    throw ConfigError("examples file " + path + ": unknown format");
  }
  if (header.value("version", 0) != kExportVersion) {
    throw ConfigError("examples file " + path + ": unsupported version");
  }
  std::vector<TrainingRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(ordered_json::parse(line)));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("examples file " + path + " line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return records;
}

}  // namespace tripmem
