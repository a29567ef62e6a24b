// End-to-end checks of the tripmem binary. Runs the real executable against
// the committed fixtures and checks outputs and exit codes.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "support/script_builders.hpp"
#include "tripmem/editing.hpp"
#include "tripmem/generator.hpp"
#include "tripmem/harness.hpp"

#ifndef TRIPMEM_CLI_PATH
#error "TRIPMEM_CLI_PATH must be defined"
#endif

namespace {

namespace fs = std::filesystem;

int g_failures = 0;

void expect(bool condition, const std::string& message) {
  if (!condition) {
    ++g_failures;
    std::cerr << "FAILED: " << message << "\n";
  }
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path();
  const fs::path out_path = dir / ("tripmem_cli_out_" + std::to_string(counter));
  const fs::path err_path = dir / ("tripmem_cli_err_" + std::to_string(counter));
  ++counter;
  const std::string command = std::string(TRIPMEM_CLI_PATH) + " " + args + " > " +
                              out_path.string() + " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  fs::remove(out_path);
  fs::remove(err_path);
  return result;
}

std::string record_value(const std::string& records, const std::string& key) {
  std::istringstream lines(records);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind(key + "\t", 0) == 0) return line.substr(key.size() + 1);
  }
  return "";
}

void test_ingest_and_stats(const fs::path& dir) {
  const std::string store = (dir / "main.tm").string();
  const RunResult ingest =
      run("--store " + store + " --format records ingest --in tests/data/triples.tsv");
  expect(ingest.exit_code == 0, "ingest exits 0: " + ingest.err);
  expect(record_value(ingest.out, "triple_count") == "4", "ingest counts 4 triples");

  const RunResult stats = run("--store " + store + " --format records stats");
  expect(stats.exit_code == 0, "stats exits 0");
  expect(stats.out == ingest.out, "stats matches the ingest summary");

  const RunResult three = run("--store " + (dir / "t3.tm").string() +
                              " --format records ingest --in tests/data/triples3.tsv");
  expect(record_value(three.out, "triple_count") == "3", "3-line fixture yields 3 triples");

  const RunResult dup = run("--store " + (dir / "tdup.tm").string() +
                            " --format records ingest --in tests/data/triples_dup.tsv");
  expect(record_value(dup.out, "triple_count") == "2", "duplicate line deduplicates");
}

void test_query(const fs::path& dir) {
  const std::string store = (dir / "main.tm").string();
  const RunResult hit =
      run("--store " + store + " --format records query 'Il Regalo Più Grande>>part of>>'");
  expect(hit.exit_code == 0, "query exits 0");
  expect(hit.out.rfind("Alla Mia Età\t", 0) == 0, "query prints the album: " + hit.out);

  const RunResult ambiguous = run("--store " + store + " query '>>country>>United States'");
  expect(ambiguous.exit_code == 11, "ambiguous query exits 11");

  const RunResult empty =
      run("--store " + (dir / "empty.tm").string() + " query 'nothing>>here>>'");
  expect(empty.exit_code == 0, "query on an empty store exits 0");
  expect(empty.out.empty(), "query on an empty store prints nothing");

  // Overflow: one hub with more objects than q_thr.
  const fs::path big = dir / "big.tsv";
  {
    std::ofstream out(big);
    for (int i = 0; i < 40; ++i) out << "hub\tlinks to\tspoke" << i << "\n";
  }
  const std::string big_store = (dir / "big.tm").string();
  expect(run("--store " + big_store + " ingest --in " + big.string()).exit_code == 0,
         "big ingest ok");
  const RunResult overflow = run("--store " + big_store + " query 'hub>>links to>>'");
  expect(overflow.exit_code == 10, "overflowed query exits 10");

  const RunResult malformed = run("--store " + store + " query 'a>>b>>c'");
  expect(malformed.exit_code == 2, "malformed query exits 2");
}

void test_snapshot_roundtrip(const fs::path& dir) {
  const std::string store = (dir / "main.tm").string();
  const std::string copy = (dir / "copy.tm").string();
  const RunResult snap = run("--store " + store + " snapshot --out " + copy);
  expect(snap.exit_code == 0, "snapshot exits 0");
  const RunResult a = run("--store " + store + " --format records stats");
  const RunResult b = run("--store " + copy + " --format records stats");
  expect(a.out == b.out, "snapshot round trip preserves stats");

  const fs::path corrupt = dir / "corrupt.tm";
  fs::copy_file(store, corrupt);
  fs::resize_file(corrupt, fs::file_size(corrupt) / 3);
  const RunResult bad = run("--store " + corrupt.string() + " stats");
  expect(bad.exit_code == 3, "corrupt snapshot exits 3");
}

void test_scan(const fs::path& dir) {
  using tripmem::ScriptedGenerator;
  using tripmem::WriteScanInput;

  const std::vector<std::string> sentences = {"Alpha leads Beta.", "Gamma follows."};
  ScriptedGenerator generator;
  WriteScanInput first;
  first.focus_sentence = sentences[0];
  tripmem::tests::script_write_decode(generator, first.serialize(),
                                      "(\\{MEM_WRITE-->Alpha>>leads>>Beta");
  WriteScanInput second;
  second.pretext_sentences = {sentences[0]};
  second.focus_sentence = sentences[1];
  tripmem::tests::script_write_decode(generator, second.serialize(), "(\\{MEM_WRITE-->");
  const fs::path script = dir / "scan_script.tsv";
  generator.save(script.string());

  const fs::path doc = dir / "doc.txt";
  {
    std::ofstream out(doc);
    for (const std::string& sentence : sentences) out << sentence << "\n";
  }

  const std::string store = (dir / "scan.tm").string();
  const RunResult scan = run("--store " + store + " --format records scan --doc " + doc.string() +
                             " --generator scripted:" + script.string());
  expect(scan.exit_code == 0, "scan exits 0: " + scan.err);
  expect(scan.out.find("Alpha>>leads>>Beta") != std::string::npos, "scan prints the call");
  expect(record_value(scan.out, "triple_count") == "1", "scan stored one triple");

  const RunResult missing = run("--store " + store + " scan --doc " + doc.string() +
                                " --generator scripted:/nonexistent.tsv");
  expect(missing.exit_code == 3, "missing script exits 3");
}

void test_read(const fs::path& dir) {
  using tripmem::ScriptedGenerator;

  const std::string store = (dir / "main.tm").string();
  const std::string prompt = "The song Il Regalo Più Grande appears on ";
  ScriptedGenerator generator;
  generator.add_step(prompt, {{"(\\{MEM_READ(", -0.1}, {"~", -9.0}});
  generator.add_step(prompt + "(\\{MEM_READ(",
                     {{"Il Regalo Più Grande>>part of>>)-->", -0.1}, {"~", -9.0}});
  const std::string with_call =
      prompt + "(\\{MEM_READ(Il Regalo Più Grande>>part of>>)-->Alla Mia Età\\})";
  generator.add_step(with_call, {{"Alla Mia Età.", -0.1}, {"~", -9.0}});
  generator.add_step(with_call + "Alla Mia Età.", {{"</s>", 0.0}, {"~", -9.0}});
  const fs::path script = dir / "read_script.tsv";
  generator.save(script.string());

  // The loaded script must reproduce the saved distributions exactly.
  const ScriptedGenerator reloaded = ScriptedGenerator::load(script.string());
  expect(reloaded.size() == generator.size(), "script round trip keeps all steps");

  const fs::path prompt_file = dir / "prompt.txt";
  {
    std::ofstream out(prompt_file, std::ios::binary);
    out << prompt;
  }
  const RunResult read = run("--store " + store + " read --prompt-file " + prompt_file.string() +
                             " --generator scripted:" + script.string());
  expect(read.exit_code == 0, "read exits 0: " + read.err);
  expect(read.out.find("Alla Mia Età.") != std::string::npos, "read decodes the album");

  const RunResult unknown = run("--store " + store + " read --prompt 'unscripted' " +
                                "--generator scripted:" + script.string());
  expect(unknown.exit_code == 4, "unscripted context exits 4");
}

void test_datagen_golden(const fs::path& dir) {
  const std::string store = (dir / "golden_store.tm").string();
  expect(run("--store " + store + " ingest --in tests/data/triples.tsv").exit_code == 0,
         "golden store ingest ok");

  const fs::path write_out = dir / "write_examples.jsonl";
  const RunResult write = run("datagen write --corpus tests/data/corpus.json --out " +
                              write_out.string());
  expect(write.exit_code == 0, "datagen write exits 0: " + write.err);

  const fs::path read_out = dir / "read_examples.jsonl";
  const RunResult read = run("--store " + store + " datagen read --corpus " +
                             "tests/data/corpus.json --out " + read_out.string());
  expect(read.exit_code == 0, "datagen read exits 0: " + read.err);

  const std::string golden_path = "tests/data/golden_examples.jsonl";
  if (!fs::exists(golden_path)) {
    std::cerr << "NOTE: golden file missing; writing candidate to " << golden_path << "\n";
    std::ofstream out(golden_path, std::ios::binary);
    out << slurp(write_out) << slurp(read_out);
    return;
  }
  expect(slurp(write_out) + slurp(read_out) == slurp(golden_path),
         "datagen output matches the committed golden file");
}

void test_editeval(const fs::path& dir) {
  using tripmem::EditCase;
  using tripmem::ScriptedGenerator;
  using tripmem::format_edit_input;

  EditCase edit;
  edit.prompt = "What city was Luca Verdecchia born?";
  edit.edit_answer = "Naples";
  edit.generalization_prompt = "Where was Luca Verdecchia born?";
  edit.locality_prompt = "Where is the Colosseum?";
  edit.locality_expected = "Rome";
  const fs::path cases = dir / "cases.tsv";
  tripmem::save_edit_cases(std::vector<EditCase>{edit}, cases.string());

  ScriptedGenerator generator;
  tripmem::tests::script_write_decode(generator, format_edit_input(edit).serialize(),
                                      "(\\{MEM_WRITE-->Luca Verdecchia>>place of birth>>Naples");
  const fs::path script = dir / "edit_script.tsv";
  generator.save(script.string());

  const std::string store = (dir / "edit.tm").string();
  const RunResult apply = run("--store " + store + " editeval --cases " + cases.string() +
                              " --generator scripted:" + script.string() + " --apply-only");
  expect(apply.exit_code == 0, "editeval --apply-only exits 0: " + apply.err);
  expect(apply.out.find("1 triples") != std::string::npos, "report counts the extraction");

  const RunResult query =
      run("--store " + store + " --editing-profile query 'Luca Verdecchia>>place of birth>>'");
  expect(query.exit_code == 0, "edited store answers the query");
  expect(query.out.find("Naples") != std::string::npos, "edit is retrievable");
}

void test_usage_errors() {
  expect(run("definitely-not-a-command").exit_code == 1, "unknown subcommand exits 1");
  expect(run("ingest").exit_code == 1, "missing required option exits 1");
}

}  // namespace

int main() {
  const fs::path dir =
      fs::temp_directory_path() /
      ("tripmem_cli_test_" +
       std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::create_directories(dir);

  test_ingest_and_stats(dir);
  test_query(dir);
  test_snapshot_roundtrip(dir);
  test_scan(dir);
  test_read(dir);
  test_datagen_golden(dir);
  test_editeval(dir);
  test_usage_errors();

  std::error_code ec;
  fs::remove_all(dir, ec);
  if (g_failures == 0) {
    std::printf("cli_test: all checks passed\n");
    return EXIT_SUCCESS;
  }
  std::fprintf(stderr, "cli_test: %d checks failed\n", g_failures);
  return EXIT_FAILURE;
}
