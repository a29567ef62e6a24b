// tripmem: triple-memory engine command line.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 storage error,
// 4 generator error, 10 query overflowed, 11 query filtered as ambiguous.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tripmem/config.hpp"
#include "tripmem/datagen.hpp"
#include "tripmem/editing.hpp"
#include "tripmem/errors.hpp"
#include "tripmem/generator.hpp"
#include "tripmem/harness.hpp"
#include "tripmem/memory_store.hpp"
#include "tripmem/protocol.hpp"
#include "tripmem/retrieval.hpp"

namespace {

using namespace tripmem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitStorage = 3;
constexpr int kExitGenerator = 4;
constexpr int kExitOverflow = 10;
constexpr int kExitAmbiguous = 11;

struct CommonArgs {
  std::string config_path;
  std::string store_path;
  std::string format = "human";
  bool editing_profile = false;
};

EngineConfig effective_config(const CommonArgs& args) {
  EngineConfig config;
  if (!args.config_path.empty()) config = EngineConfig::load(args.config_path);
  if (args.editing_profile) config.thresholds = RetrievalThresholds::editing();
  return config;
}

MemoryStore open_store(const CommonArgs& args, const EngineConfig& config) {
  if (!args.store_path.empty() && std::filesystem::exists(args.store_path)) {
    return MemoryStore::load_snapshot(args.store_path);
  }
  if (!args.store_path.empty()) {
    // A fresh store that will be written here on save.
    return MemoryStore(make_provider(config.embedding), config.edit_match_mode);
  }
  return MemoryStore(make_provider(config.embedding), config.edit_match_mode);
}

void save_store(const MemoryStore& store, const std::string& path) {
  if (path.empty()) throw ConfigError("no store path to save to; pass --store or --out");
  store.save_snapshot(path);
}

std::unique_ptr<TokenGenerator> open_generator(const std::string& spec) {
  const std::string prefix = "scripted:";
  if (spec.rfind(prefix, 0) == 0) {
    return std::make_unique<ScriptedGenerator>(ScriptedGenerator::load(spec.substr(prefix.size())));
  }
  throw ConfigError("unknown generator spec '" + spec + "'; expected scripted:<path>");
}

void print_stats(const MemoryStats& stats, const std::string& format) {
  if (format == "records") {
    std::printf("triple_count\t%zu\n", stats.triple_count);
    std::printf("unique_entity_count\t%zu\n", stats.unique_entity_count);
    std::printf("unique_relation_count\t%zu\n", stats.unique_relation_count);
    std::printf("redundancy_fraction\t%.6f\n", stats.redundancy_fraction);
  } else {
    std::printf("triples: %zu\nentities: %zu\nrelations: %zu\nredundancy fraction: %.4f\n",
                stats.triple_count, stats.unique_entity_count, stats.unique_relation_count,
                stats.redundancy_fraction);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

int cmd_ingest(const CommonArgs& common, const std::string& input_path,
               const std::string& out_path, bool continue_on_error) {
  const EngineConfig config = effective_config(common);
  MemoryStore store = open_store(common, config);
  std::ifstream in(input_path);
  if (!in) throw StorageError("cannot open triples file: " + input_path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t bad_lines = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(pos));
        break;
      }
      fields.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    try {
      if (fields.size() < 3 || fields.size() > 4) {
        throw InvalidTripleError("expected 3 or 4 tab-separated fields");
      }
      std::optional<std::string> provenance;
      if (fields.size() == 4) provenance = fields[3];
      store.insert_triple(fields[0], fields[1], fields[2], std::move(provenance));
    } catch (const Error& e) {
      if (!continue_on_error) {
        throw InvalidTripleError("line " + std::to_string(lineno) + ": " + e.what());
      }
      ++bad_lines;
      std::fprintf(stderr, "line %zu skipped: %s\n", lineno, e.what());
    }
  }
  const std::string save_to = out_path.empty() ? common.store_path : out_path;
  if (!save_to.empty()) save_store(store, save_to);
  print_stats(store.stats(), common.format);
  if (bad_lines > 0) std::fprintf(stderr, "%zu malformed lines skipped\n", bad_lines);
  return kExitOk;
}

int cmd_query(const CommonArgs& common, const std::string& query_string) {
  const EngineConfig config = effective_config(common);
  const MemoryStore store = open_store(common, config);
  const QueryEngine engine(store, config.make_ambiguity_list());
  const MemoryQuery query = parse_query(query_string);
  if (engine.is_ambiguous_query(query)) {
    std::fprintf(stderr, "query filtered as ambiguous\n");
    return kExitAmbiguous;
  }
  const QueryResult result = engine.execute_query(query, config.thresholds);
  if (result.overflowed) {
    std::fprintf(stderr, "query overflowed: %zu results exceed q_thr=%zu\n",
                 result.raw_distinct_count, config.thresholds.q_thr);
    return kExitOverflow;
  }
  for (const ScoredEntity& scored : result.entities) {
    if (common.format == "records") {
      std::printf("%s\t%.9f\n", scored.entity.name.c_str(), scored.score);
    } else {
      std::printf("%-40s %.4f\n", scored.entity.name.c_str(), scored.score);
    }
  }
  return kExitOk;
}

int cmd_scan(const CommonArgs& common, const std::string& doc_path,
             const std::string& generator_spec, const std::string& out_path) {
  const EngineConfig config = effective_config(common);
  MemoryStore store = open_store(common, config);
  auto generator = open_generator(generator_spec);
  const std::vector<std::string> sentences = read_lines(doc_path);
  const std::vector<WriteCall> calls = run_write_scan(sentences, *generator, store);
  for (std::size_t i = 0; i < calls.size(); ++i) {
    if (common.format == "records") {
      std::printf("%zu\t%s\n", i, serialize_write(calls[i]).c_str());
    } else {
      std::printf("sentence %zu: %s\n", i, serialize_write(calls[i]).c_str());
    }
  }
  const std::string save_to = out_path.empty() ? common.store_path : out_path;
  if (!save_to.empty()) save_store(store, save_to);
  print_stats(store.stats(), common.format);
  return kExitOk;
}

int cmd_read(const CommonArgs& common, const std::string& prompt, const std::string& prompt_file,
             const std::string& generator_spec, bool force_read) {
  const EngineConfig config = effective_config(common);
  const MemoryStore store = open_store(common, config);
  const QueryEngine engine(store, config.make_ambiguity_list());
  auto generator = open_generator(generator_spec);
  std::string text = prompt;
  if (!prompt_file.empty()) text = read_file(prompt_file);
  if (text.empty()) throw ConfigError("empty prompt; pass --prompt or --prompt-file");
  ReadDecodeOptions options;
  if (force_read) options.forced_call_prefix = std::string(markers::mem_read_open);
  const ReadDecodeResult result =
      run_read_decode(text, *generator, engine, config.thresholds, options);
  std::printf("%s\n", result.text.c_str());
  if (common.format == "records") {
    for (const ExecutedReadCall& call : result.calls) {
      std::printf("call\traw=%zu\tremoved=%d\n", call.raw_result_count, call.removed ? 1 : 0);
    }
  }
  return kExitOk;
}

int cmd_datagen(const CommonArgs& common, const std::string& mode, const std::string& corpus_path,
                const std::string& out_path) {
  const EngineConfig config = effective_config(common);
  const std::vector<AnnotatedDocument> corpus = load_corpus(corpus_path);
  std::vector<TrainingRecord> records;
  SanitizationLog write_log;
  if (mode == "write") {
    for (const AnnotatedDocument& doc : corpus) {
      for (WriteExample& example : generate_write_examples(doc, &write_log)) {
        records.emplace_back(std::move(example));
      }
    }
  } else if (mode == "read") {
    const MemoryStore store = open_store(common, config);
    const QueryEngine engine(store, config.make_ambiguity_list());
    ReadExampleGenerator generator(engine, config.thresholds, config.seen_scope);
    for (const AnnotatedDocument& doc : corpus) {
      for (ReadExample& example : generator.generate(doc)) {
        records.emplace_back(std::move(example));
      }
    }
    for (const auto& [original, sanitized] : generator.sanitization_log().entries()) {
      std::fprintf(stderr, "sanitized name: '%s' -> '%s'\n", original.c_str(), sanitized.c_str());
    }
  } else {
    throw ConfigError("datagen mode must be 'write' or 'read', got '" + mode + "'");
  }
  for (const auto& [original, sanitized] : write_log.entries()) {
    std::fprintf(stderr, "sanitized name: '%s' -> '%s'\n", original.c_str(), sanitized.c_str());
  }
  export_examples(records, out_path);
  if (common.format == "records") {
    std::printf("examples\t%zu\n", records.size());
  } else {
    std::printf("%zu examples written to %s\n", records.size(), out_path.c_str());
  }
  return kExitOk;
}

int cmd_editeval(const CommonArgs& common, const std::string& cases_path,
                 const std::string& generator_spec, const std::string& out_path, bool apply_only) {
  CommonArgs editing_common = common;
  // Editing thresholds by default; an explicit config file keeps its own.
  if (common.config_path.empty()) editing_common.editing_profile = true;
  const EngineConfig config = effective_config(editing_common);
  MemoryStore store = open_store(common, config);
  auto generator = open_generator(generator_spec);
  const std::vector<EditCase> cases = load_edit_cases(cases_path);

  const IngestionReport ingestion = apply_edits(cases, *generator, store);
  std::fputs(ingestion.to_text().c_str(), stdout);
  const std::string save_to = out_path.empty() ? common.store_path : out_path;
  if (!save_to.empty()) save_store(store, save_to);
  if (apply_only) return kExitOk;

  const QueryEngine engine(store, config.make_ambiguity_list());
  const EditEvalReport report = evaluate_edits(cases, *generator, engine, config.thresholds);
  if (common.format == "records") {
    std::printf("reliability\t%.6f\n", report.scores.reliability);
    std::printf("generalization\t%.6f\n", report.scores.generalization);
    std::printf("locality\t%.6f\n", report.scores.locality);
    std::printf("average\t%.6f\n", report.scores.average);
  } else {
    std::fputs(report.to_text().c_str(), stdout);
  }
  return kExitOk;
}

int cmd_stats(const CommonArgs& common) {
  const EngineConfig config = effective_config(common);
  const MemoryStore store = open_store(common, config);
  print_stats(store.stats(), common.format);
  return kExitOk;
}

int cmd_snapshot(const CommonArgs& common, const std::string& out_path, bool do_compact) {
  const EngineConfig config = effective_config(common);
  MemoryStore store = open_store(common, config);
  if (do_compact) {
    const std::size_t dropped = store.compact();
    std::printf("compacted: %zu orphaned rows removed\n", dropped);
  }
  save_store(store, out_path.empty() ? common.store_path : out_path);
  print_stats(store.stats(), common.format);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tripmem: deduplicated triple memory with vector retrieval and a streaming "
               "read/write call protocol"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "engine config JSON");
  app.add_option("--store", common.store_path, "store snapshot path");
  app.add_option("--format", common.format, "output format: human or records")
      ->check(CLI::IsMember({"human", "records"}));
  app.add_flag("--editing-profile", common.editing_profile, "use the editing threshold profile");

  std::string ingest_in, ingest_out;
  bool ingest_continue = false;
  auto* ingest = app.add_subcommand("ingest", "bulk-load subject<TAB>relation<TAB>object lines");
  ingest->add_option("--in", ingest_in, "triples file")->required();
  ingest->add_option("--out", ingest_out, "snapshot to write (defaults to --store)");
  ingest->add_flag("--continue-on-error", ingest_continue, "skip malformed lines");

  std::string query_string;
  auto* query = app.add_subcommand("query", "run one query, e.g. 'A>>rel>>' or '>>rel>>B'");
  query->add_option("query", query_string, "query in protocol form")->required();

  std::string scan_doc, scan_generator, scan_out;
  auto* scan = app.add_subcommand("scan", "write-scan a document, one sentence per line");
  scan->add_option("--doc", scan_doc, "sentences file")->required();
  scan->add_option("--generator", scan_generator, "generator spec, scripted:<path>")->required();
  scan->add_option("--out", scan_out, "snapshot to write (defaults to --store)");

  std::string read_prompt, read_prompt_file, read_generator;
  bool read_force = false;
  auto* read = app.add_subcommand("read", "decode with memory-read interception");
  read->add_option("--prompt", read_prompt, "prompt text");
  read->add_option("--prompt-file", read_prompt_file, "prompt file");
  read->add_option("--generator", read_generator, "generator spec, scripted:<path>")->required();
  read->add_flag("--force-read", read_force, "inject a memory-read opener after the prompt");

  std::string datagen_mode, datagen_corpus, datagen_out;
  auto* datagen = app.add_subcommand("datagen", "generate finetuning examples");
  datagen->add_option("mode", datagen_mode, "write or read")->required();
  datagen->add_option("--corpus", datagen_corpus, "annotated corpus JSON")->required();
  datagen->add_option("--out", datagen_out, "examples JSONL output")->required();

  std::string edit_cases, edit_generator, edit_out;
  bool edit_apply_only = false;
  auto* editeval = app.add_subcommand("editeval", "apply and score knowledge edits");
  editeval->add_option("--cases", edit_cases, "edit cases TSV")->required();
  editeval->add_option("--generator", edit_generator, "generator spec, scripted:<path>")
      ->required();
  editeval->add_option("--out", edit_out, "snapshot to write after applying");
  editeval->add_flag("--apply-only", edit_apply_only, "skip the evaluation phase");

  auto* stats = app.add_subcommand("stats", "print store statistics");
  (void)stats;

  std::string snapshot_out;
  bool snapshot_compact = false;
  auto* snapshot = app.add_subcommand("snapshot", "round-trip a snapshot, optionally compacting");
  snapshot->add_option("--out", snapshot_out, "snapshot to write (defaults to --store)");
  snapshot->add_flag("--compact", snapshot_compact, "drop orphaned entity/relation rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(common, ingest_in, ingest_out, ingest_continue);
    if (query->parsed()) return cmd_query(common, query_string);
    if (scan->parsed()) return cmd_scan(common, scan_doc, scan_generator, scan_out);
    if (read->parsed()) {
      return cmd_read(common, read_prompt, read_prompt_file, read_generator, read_force);
    }
    if (datagen->parsed()) return cmd_datagen(common, datagen_mode, datagen_corpus, datagen_out);
    if (editeval->parsed()) {
      return cmd_editeval(common, edit_cases, edit_generator, edit_out, edit_apply_only);
    }
    if (stats->parsed()) return cmd_stats(common);
    if (snapshot->parsed()) return cmd_snapshot(common, snapshot_out, snapshot_compact);
    std::fprintf(stderr, "no subcommand selected\n");
    return kExitUsage;
  } catch (const GeneratorError& e) {
    std::fprintf(stderr, "generator error: %s\n", e.what());
    return kExitGenerator;
  } catch (const StorageError& e) {
    std::fprintf(stderr, "storage error: %s\n", e.what());
    return kExitStorage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
