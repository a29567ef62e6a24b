#include "tripmem/editing.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "tripmem/errors.hpp"
#include "tripmem/text.hpp"

namespace tripmem {

std::vector<EditCase> load_edit_cases(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open edit cases file: " + path);
  std::vector<EditCase> cases;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (fields.size() < 4) {
      const std::size_t tab = line.find('\t', pos);
      if (tab == std::string::npos) break;
      fields.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    fields.push_back(line.substr(pos));
    if (fields.size() != 5) {
      throw ConfigError("edit cases line " + std::to_string(lineno) +
                        ": expected 5 tab-separated fields");
    }
    EditCase edit;
    edit.prompt = fields[0];
    edit.edit_answer = fields[1];
    edit.generalization_prompt = fields[2];
    edit.locality_prompt = fields[3];
    edit.locality_expected = fields[4];
    if (is_blank(edit.prompt) || is_blank(edit.generalization_prompt) ||
        is_blank(edit.locality_prompt)) {
      throw ConfigError("edit cases line " + std::to_string(lineno) + ": blank prompt");
    }
    cases.push_back(std::move(edit));
  }
  return cases;
}

void save_edit_cases(std::span<const EditCase> cases, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw StorageError("cannot open edit cases file for writing: " + path);
  for (const EditCase& edit : cases) {
    out << edit.prompt << '\t' << edit.edit_answer << '\t' << edit.generalization_prompt << '\t'
        << edit.locality_prompt << '\t' << edit.locality_expected << '\n';
  }
  if (!out) throw StorageError("write failure on edit cases file: " + path);
}

WriteScanInput format_edit_input(const EditCase& edit) {
  if (is_blank(edit.prompt)) throw InvalidEditError("edit prompt is empty");
  if (is_blank(edit.edit_answer)) throw InvalidEditError("edit answer is empty");
  WriteScanInput input;
  input.focus_sentence = edit.prompt + " It is or they are " + edit.edit_answer;
  return input;
}

IngestionReport apply_edits(std::span<const EditCase> cases, TokenGenerator& generator,
                            MemoryStore& store, const DecodeWriteOptions& options) {
  IngestionReport report;
  report.cases.reserve(cases.size());
  for (const EditCase& edit : cases) {
    EditCaseIngestion entry;
    try {
      const WriteCall call = decode_write(format_edit_input(edit), generator, options);
      entry.triples_extracted = call.triples.size();
      entry.empty_extraction = call.triples.empty();
      for (const TripleText& triple : call.triples) {
        const UpsertResult upsert =
            store.upsert_edit_triple(triple.subject, triple.relation, triple.object);
        entry.replacements += upsert.replaced_count;
      }
    } catch (const Error& e) {
      entry.error = e.what();
      ++report.failed_cases;
    }
    report.total_triples += entry.triples_extracted;
    report.total_replacements += entry.replacements;
    if (entry.empty_extraction) ++report.empty_extractions;
    report.cases.push_back(std::move(entry));
  }
  return report;
}

std::string IngestionReport::to_text() const {
  std::ostringstream out;
  out << "edit ingestion: " << cases.size() << " cases, " << total_triples << " triples, "
      << total_replacements << " replacements, " << empty_extractions << " empty extractions, "
      << failed_cases << " failures\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const EditCaseIngestion& entry = cases[i];
    out << "  case " << i << ": triples=" << entry.triples_extracted
        << " replacements=" << entry.replacements;
    if (entry.empty_extraction) out << " EMPTY";
    if (!entry.error.empty()) out << " ERROR: " << entry.error;
    out << '\n';
  }
  return out.str();
}

EditScores EditScores::of(double reliability, double generalization, double locality) {
  EditScores scores;
  scores.reliability = reliability;
  scores.generalization = generalization;
  scores.locality = locality;
  scores.average = (reliability + generalization + locality) / 3.0;
  return scores;
}

QaPromptConfig QaPromptConfig::defaults() {
  QaPromptConfig config;
  config.exemplars = {
      {"What is the capital of France?", "Paris", ""},
      {"Who wrote Hamlet?", "William Shakespeare", ""},
      {"What is the chemical symbol for gold?", "Au", ""},
      {"How many continents are there?", "7", ""},
      {"What city is the Eiffel Tower in?", "Paris",
       "(\\{MEM_READ(Eiffel Tower>>location>>)-->Paris\\})"},
  };
  return config;
}

std::string QaPromptConfig::render(std::string_view question) const {
  std::string out;
  for (const Exemplar& exemplar : exemplars) {
    out += "Q: ";
    out += exemplar.question;
    out += exemplar.call_text;
    out += "\nA: ";
    out += exemplar.answer;
    out += "\n\n";
  }
  out += "Q: ";
  out += question;
  return out;
}

std::string normalize_answer(std::string_view answer) {
  std::string stripped;
  stripped.reserve(answer.size());
  for (char ch : answer) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c) && c != '_') continue;
    stripped.push_back(static_cast<char>(std::tolower(c)));
  }
  std::istringstream stream(stripped);
  std::vector<std::string> words;
  std::string word;
  while (stream >> word) words.push_back(word);
  // A leading article never distinguishes answers, unless it is the answer.
  std::size_t start = 0;
  if (words.size() > 1 && (words[0] == "a" || words[0] == "an" || words[0] == "the")) {
    start = 1;
  }
  std::string out;
  for (std::size_t i = start; i < words.size(); ++i) {
    if (i > start) out += ' ';
    out += words[i];
  }
  return out;
}

std::string extract_answer(std::string_view generated) {
  const std::size_t close = generated.rfind(markers::call_close);
  std::string_view tail = close == std::string_view::npos
                              ? generated
                              : generated.substr(close + markers::call_close.size());
  while (!tail.empty() && (tail.front() == '\n' || tail.front() == ' ')) tail.remove_prefix(1);
  if (tail.starts_with("A:")) tail.remove_prefix(2);
  while (!tail.empty() && (tail.front() == '\n' || tail.front() == ' ')) tail.remove_prefix(1);
  const std::size_t newline = tail.find('\n');
  if (newline != std::string_view::npos) tail = tail.substr(0, newline);
  return std::string(tail);
}

EditEvalReport evaluate_edits(std::span<const EditCase> cases, TokenGenerator& generator,
                              const QueryEngine& engine, const RetrievalThresholds& thresholds,
                              const QaPromptConfig& prompt_config) {
  EditEvalReport report;
  report.cases.reserve(cases.size());

  ReadDecodeOptions decode_options;
  decode_options.forced_call_prefix = std::string(markers::mem_read_open);

  auto answer_for = [&](std::string_view question,
                        std::vector<ExecutedReadCall>* calls) -> std::string {
    const std::string prompt = prompt_config.render(question);
    const ReadDecodeResult decoded =
        run_read_decode(prompt, generator, engine, thresholds, decode_options);
    if (calls != nullptr) *calls = decoded.calls;
    return normalize_answer(extract_answer(std::string_view(decoded.text).substr(prompt.size())));
  };

  std::size_t reliable = 0;
  std::size_t generalized = 0;
  std::size_t local = 0;
  for (const EditCase& edit : cases) {
    EditCaseEvaluation entry;
    std::vector<ExecutedReadCall> calls;
    entry.answer = answer_for(edit.prompt, &calls);
    entry.generalization_answer = answer_for(edit.generalization_prompt, nullptr);
    entry.locality_answer = answer_for(edit.locality_prompt, nullptr);

    const std::string want = normalize_answer(edit.edit_answer);
    entry.reliable = entry.answer == want;
    entry.generalized = entry.generalization_answer == want;
    entry.local = entry.locality_answer == normalize_answer(edit.locality_expected);

    if (!entry.reliable) {
      // Mirror the failure taxonomy: did the edit ever reach the store, was
      // it retrieved, was it used?
      bool stored = false;
      {
        const auto view = engine.store().read_view();
        const std::string want_key = normalize_text(edit.edit_answer);
        for (const auto& [id, triple] : view.triples()) {
          if (normalize_text(view.entities().at(triple.object_id).name) == want_key) {
            stored = true;
            break;
          }
        }
      }
      if (!stored) {
        entry.failure = EditFailure::write_miss;
      } else {
        bool retrieved = false;
        for (const ExecutedReadCall& call : calls) {
          for (const std::string& name : call.result_names) {
            if (normalize_answer(name) == want) {
              retrieved = true;
              break;
            }
          }
        }
        entry.failure = retrieved ? EditFailure::use_miss : EditFailure::read_miss;
      }
    }

    reliable += entry.reliable ? 1 : 0;
    generalized += entry.generalized ? 1 : 0;
    local += entry.local ? 1 : 0;
    report.cases.push_back(std::move(entry));
  }

  const double n = cases.empty() ? 1.0 : static_cast<double>(cases.size());
  report.scores = EditScores::of(static_cast<double>(reliable) / n,
                                 static_cast<double>(generalized) / n,
                                 static_cast<double>(local) / n);
  return report;
}

std::string EditEvalReport::to_text() const {
  std::ostringstream out;
  out << "edit evaluation: REL=" << scores.reliability << " GEN=" << scores.generalization
      << " LOC=" << scores.locality << " AVG=" << scores.average << '\n';
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const EditCaseEvaluation& entry = cases[i];
    out << "  case " << i << ": rel=" << (entry.reliable ? "ok" : "MISS")
        << " gen=" << (entry.generalized ? "ok" : "MISS")
        << " loc=" << (entry.local ? "ok" : "MISS");
    switch (entry.failure) {
      case EditFailure::write_miss: out << " [write-miss]"; break;
      case EditFailure::read_miss: out << " [read-miss]"; break;
      case EditFailure::use_miss: out << " [use-miss]"; break;
      case EditFailure::none: break;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace tripmem
