#pragma once

// Dataset ingestion, task-text rendering, answer parsing and per-instance
// scoring for the three benchmarks. Scorers are pure functions over
// normalized text; unparseable model output scores 0 with a parse flag
// instead of raising.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spp/core.hpp"
#include "spp/strategies.hpp"
#include "spp/text.hpp"

namespace spp {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HintParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dataset loading

// Loads a JSONL dataset (one instance per line). Every instance must pass
// validate_instance, ids must be unique, and when expected_count is given
// the file must contain exactly that many instances.
inline std::vector<TaskInstance> load_dataset(
    const std::filesystem::path& path, TaskKind kind,
    std::optional<size_t> expected_count = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset: " + path.string());
  std::vector<TaskInstance> out;
  std::map<std::string, int> id_lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    TaskInstance inst;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      inst = j.get<TaskInstance>();
    } catch (const std::exception& e) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": malformed instance: " + e.what());
    }
    if (inst.kind != kind)
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": kind '" + to_string(inst.kind) +
                         "' does not match requested '" + to_string(kind) + "'");
    auto violations = validate_instance(inst);
    if (!violations.empty()) {
      std::string msg = path.string() + ":" + std::to_string(line_no) +
                        ": invalid instance '" + inst.id + "':";
      for (const auto& v : violations) msg += " [" + v + "]";
      throw DatasetError(msg);
    }
    if (auto it = id_lines.find(inst.id); it != id_lines.end())
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": duplicate instance id '" + inst.id +
                         "' (first seen at line " + std::to_string(it->second) + ")");
    id_lines[inst.id] = line_no;
    out.push_back(std::move(inst));
  }
  if (expected_count && out.size() != *expected_count)
    throw DatasetError(path.string() + ": expected " +
                       std::to_string(*expected_count) + " instances, found " +
                       std::to_string(out.size()));
  return out;
}

// Violation listing for `validate` runs: collects every problem instead of
// stopping at the first, with line numbers.
struct DatasetViolation {
  int line = 0;
  std::string message;
};

inline std::vector<DatasetViolation> validate_dataset_file(
    const std::filesystem::path& path, TaskKind kind,
    std::optional<size_t> expected_count = std::nullopt) {
  std::vector<DatasetViolation> out;
  std::ifstream in(path);
  if (!in) {
    out.push_back({0, "cannot open dataset: " + path.string()});
    return out;
  }
  std::map<std::string, int> id_lines;
  std::string line;
  int line_no = 0;
  size_t count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    ++count;
    TaskInstance inst;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      inst = j.get<TaskInstance>();
    } catch (const std::exception& e) {
      out.push_back({line_no, std::string("malformed instance: ") + e.what()});
      continue;
    }
    if (inst.kind != kind) {
      out.push_back({line_no, "kind '" + to_string(inst.kind) +
                                  "' does not match requested '" +
                                  to_string(kind) + "'"});
      continue;
    }
    for (const auto& v : validate_instance(inst))
      out.push_back({line_no, "instance '" + inst.id + "': " + v});
    if (auto it = id_lines.find(inst.id); it != id_lines.end())
      out.push_back({line_no, "duplicate instance id '" + inst.id +
                                  "' also declared at line " +
                                  std::to_string(it->second)});
    else
      id_lines[inst.id] = line_no;
  }
  if (expected_count && count != *expected_count)
    out.push_back({0, "expected " + std::to_string(*expected_count) +
                          " instances, found " + std::to_string(count)});
  return out;
}

// ---------------------------------------------------------------------------
// Trivia creative writing

// Task text asking for a short story on the topic that works in the answers
// to the listed questions, ending with the uniform output-format instruction.
// Question order is preserved as stored.
inline std::string render_trivia_task(const TriviaInstance& inst) {
  std::ostringstream ss;
  ss << "Write a short and coherent story about " << inst.topic
     << " that incorporates the answers to the following " << inst.questions.size()
     << " questions:\n";
  for (size_t i = 0; i < inst.questions.size(); ++i)
    ss << (i + 1) << ". " << inst.questions[i].text << "\n";
  ss << "\nEnd your response with a line that begins with \"" << kFinalAnswerMarker
     << "\" followed by the complete story.";
  return ss.str();
}

// Deterministic question permutation. Fisher-Yates with an explicit draw so
// the permutation is identical across platforms and standard libraries.
inline TriviaInstance shuffle_questions(const TriviaInstance& inst,
                                        std::uint64_t seed) {
  TriviaInstance out = inst;
  std::mt19937_64 rng(seed);
  for (size_t i = out.questions.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(out.questions[i - 1], out.questions[j]);
  }
  return out;
}

// Fraction of questions whose answer is mentioned: a question counts (once)
// when any of its aliases occurs as a substring of the normalized
// generation. Score = matched / n.
inline double score_trivia(const std::string& generation,
                           const TriviaInstance& inst) {
  if (inst.questions.empty()) return 0.0;
  std::string haystack = text::fold_for_match(generation);
  int matched = 0;
  for (const auto& q : inst.questions) {
    for (const auto& alias : q.answer_aliases) {
      std::string needle = text::fold_for_match(alias);
      if (!needle.empty() && haystack.find(needle) != std::string::npos) {
        ++matched;
        break;
      }
    }
  }
  return static_cast<double>(matched) / static_cast<double>(inst.questions.size());
}

// ---------------------------------------------------------------------------
// Codenames collaborative (spymaster + guesser)

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ", ";
    out += words[i];
  }
  return out;
}

inline std::string render_spymaster_task(const CodenamesInstance& inst) {
  std::ostringstream ss;
  ss << "You are playing a word guessing game with a partner.\n"
     << "Try to find a single hint word that relates to all of the target "
        "words and to none of the other words in the full list.\n\n"
     << "Target words: " << join_words(inst.target_words) << "\n"
     << "Full list of words: " << join_words(inst.all_words) << "\n\n"
     << "The hint must be a single word that is not one of the words in the "
        "full list.\n"
     << "End your response with a line that begins with \"" << kFinalAnswerMarker
     << "\" followed by the hint word.";
  return ss.str();
}

// Extracts the hint word from the spymaster's generation. The hint is the
// final-answer field lowercased and trimmed; an absent marker, an empty
// field, or anything other than a single word is a HintParseError.
inline std::string parse_hint(const std::string& spymaster_output) {
  auto field = extract_final_answer(spymaster_output);
  if (!field) throw HintParseError("spymaster output has no final-answer field");
  std::string hint = text::fold_for_match(*field);
  // Drop wrapping quotes and trailing sentence punctuation.
  while (!hint.empty() && (hint.front() == '"' || hint.front() == '\''))
    hint.erase(hint.begin());
  while (!hint.empty() && (hint.back() == '"' || hint.back() == '\'' ||
                           hint.back() == '.' || hint.back() == '!'))
    hint.pop_back();
  hint = text::trim(hint);
  if (hint.empty()) throw HintParseError("empty hint");
  if (hint.find(' ') != std::string::npos)
    throw HintParseError("hint must be a single word, got: " + hint);
  return hint;
}

// Guesser prompt: full word list (stored order), the hint, and a request for
// exactly k comma-separated guesses. k defaults to the target count.
inline std::string render_guesser_task(const CodenamesInstance& inst,
                                       const std::string& hint,
                                       std::optional<int> k = std::nullopt) {
  int want = k.value_or(static_cast<int>(inst.target_words.size()));
  std::ostringstream ss;
  ss << "You are playing a word guessing game with a partner.\n"
     << "Your partner has given you a hint word. Identify exactly " << want
     << " words from the word list below that the hint refers to.\n\n"
     << "Hint word: " << hint << "\n"
     << "Word list: " << join_words(inst.all_words) << "\n\n"
     << "Answer with exactly " << want
     << " comma-separated words drawn from the word list.\n"
     << "End your response with a line that begins with \"" << kFinalAnswerMarker
     << "\" followed by the " << want << " comma-separated words.";
  return ss.str();
}

struct CodenamesScore {
  double score = 0.0;
  bool parse_ok = false;
};

// Overlap between the guessed words and the target words, as a fraction of
// the target count. Guesses come from the final-answer field when a marker
// is present (the whole text otherwise), split on commas only, normalized,
// deduplicated and filtered to the instance word list.
inline CodenamesScore score_codenames(const std::string& guesser_output,
                                      const CodenamesInstance& inst) {
  CodenamesScore result;
  if (inst.target_words.empty()) return result;
  std::string field = extract_final_answer(guesser_output).value_or(guesser_output);

  std::set<std::string> all;
  for (const auto& w : inst.all_words) all.insert(text::fold_for_match(w));
  std::set<std::string> targets;
  for (const auto& w : inst.target_words) targets.insert(text::fold_for_match(w));

  std::set<std::string> guesses;
  for (const auto& part : text::split(field, ',')) {
    std::string g = text::fold_for_match(part);
    while (!g.empty() && (g.front() == '"' || g.front() == '\''))
      g.erase(g.begin());
    while (!g.empty() && (g.back() == '"' || g.back() == '\'' || g.back() == '.'))
      g.pop_back();
    g = text::trim(g);
    if (g.empty()) continue;
    result.parse_ok = true;
    if (all.count(g) > 0) guesses.insert(g);
  }
  int hits = 0;
  for (const auto& g : guesses)
    if (targets.count(g) > 0) ++hits;
  result.score = static_cast<double>(hits) / static_cast<double>(targets.size());
  return result;
}

// ---------------------------------------------------------------------------
// Logic grid puzzle

inline std::string render_logic_task(const LogicPuzzleInstance& inst) {
  std::ostringstream ss;
  ss << inst.puzzle_text << "\n\n"
     << inst.question_text << "\n\n"
     << "End your response with a line that begins with \"" << kFinalAnswerMarker
     << "\" followed by the house number (a single integer).";
  return ss.str();
}

struct LogicScore {
  double score = 0.0;  // 0 or 1
  bool parse_ok = false;
};

// Accuracy on the predicted house number: the first integer in the
// final-answer field (or in the whole text when no marker is present) must
// equal the gold house number. No integer at all scores 0 with the parse
// flag cleared.
inline LogicScore score_logic_puzzle(const std::string& answer,
                                     const LogicPuzzleInstance& inst) {
  LogicScore result;
  std::string field = extract_final_answer(answer).value_or(answer);
  size_t i = 0;
  while (i < field.size() && !std::isdigit(static_cast<unsigned char>(field[i])))
    ++i;
  if (i == field.size()) return result;  // no digit: score 0, parse flag set
  size_t end = i;
  while (end < field.size() && std::isdigit(static_cast<unsigned char>(field[end])))
    ++end;
  result.parse_ok = true;
  int predicted = 0;
  try {
    predicted = std::stoi(field.substr(i, end - i));
  } catch (const std::exception&) {
    result.parse_ok = false;
    return result;
  }
  result.score = predicted == inst.gold_house_number ? 1.0 : 0.0;
  return result;
}

// Task text for any instance; used by the runner's first role-turn.
inline std::string render_task_text(const TaskInstance& inst) {
  switch (inst.kind) {
    case TaskKind::TriviaCreativeWriting: return render_trivia_task(inst.trivia());
    case TaskKind::CodenamesCollaborative: return render_spymaster_task(inst.codenames());
    case TaskKind::LogicGridPuzzle: return render_logic_task(inst.logic());
  }
  throw std::logic_error("bad TaskKind");
}

}  // namespace spp
