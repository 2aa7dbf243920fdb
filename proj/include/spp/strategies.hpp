#pragma once

// Prompt rendering for every method, multi-persona transcript parsing, and
// the per-role-turn execution loop (single call for standard/cot/spp-style
// methods, feedback+refine rounds for self-refine).

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spp/backend.hpp"
#include "spp/core.hpp"
#include "spp/templates.hpp"
#include "spp/text.hpp"

namespace spp {

// Uniform final-answer marker appended to every task's output-format
// instruction. Extraction keys on the last line that begins with it
// (case-insensitive).
inline constexpr const char* kFinalAnswerMarker = "Final answer:";

struct ParseFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Final answer extraction

namespace detail {

// Returns true when `line` starts with the final-answer marker (ignoring
// leading whitespace and case); on match, sets rest to what follows on
// the same line.
inline bool is_final_answer_line(const std::string& line, std::string* rest) {
  std::string t = text::trim(line);
  static const std::string marker = "final answer";
  if (t.size() < marker.size()) return false;
  if (!text::iequals(std::string_view(t).substr(0, marker.size()), marker))
    return false;
  size_t i = marker.size();
  while (i < t.size() && text::is_space(t[i])) ++i;
  if (i >= t.size() || t[i] != ':') return false;
  if (rest != nullptr) *rest = text::trim(t.substr(i + 1));
  return true;
}

}  // namespace detail

namespace detail {

// Collaboration terminators and rules that may trail a generation; they are
// never part of the answer text.
inline bool is_terminator_line(const std::string& trimmed) {
  if (text::iequals(trimmed, "start collaboration!") ||
      text::iequals(trimmed, "start collaboration") ||
      text::iequals(trimmed, "finish collaboration!") ||
      text::iequals(trimmed, "finish collaboration"))
    return true;
  return trimmed.size() >= 3 &&
         trimmed.find_first_not_of('-') == std::string::npos;
}

}  // namespace detail

// Text after the last line beginning with "Final answer:", trimmed; spans to
// the end of the generation (stories may run over several paragraphs), minus
// any trailing collaboration terminators. Absent when no marker line exists
// or when nothing follows it.
inline std::optional<std::string> extract_final_answer(const std::string& raw) {
  auto lines = text::split_lines(raw);
  std::optional<size_t> last_marker;
  std::string first_piece;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string rest;
    if (detail::is_final_answer_line(lines[i], &rest)) {
      last_marker = i;
      first_piece = rest;
    }
  }
  if (!last_marker) return std::nullopt;
  std::vector<std::string> tail;
  for (size_t i = *last_marker + 1; i < lines.size(); ++i) tail.push_back(lines[i]);
  while (!tail.empty() && (text::trim(tail.back()).empty() ||
                           detail::is_terminator_line(text::trim(tail.back()))))
    tail.pop_back();
  std::string out = first_piece;
  for (const auto& line : tail) {
    out += '\n';
    out += line;
  }
  out = text::trim(out);
  if (out.empty()) return std::nullopt;
  return out;
}

// Marker extraction with a fallback to the last non-empty paragraph. Used
// for standard / cot / self-refine outputs, whose free-form text may omit
// the requested marker. SPP-style transcripts never fall back: a missing
// final answer there is the early-termination signal.
inline std::optional<std::string> extract_final_answer_with_fallback(
    const std::string& raw) {
  if (auto marked = extract_final_answer(raw)) return marked;
  auto lines = text::split_lines(raw);
  std::vector<std::string> paragraph;
  std::vector<std::string> last_paragraph;
  for (const auto& line : lines) {
    if (text::trim(line).empty()) {
      if (!paragraph.empty()) last_paragraph = paragraph;
      paragraph.clear();
    } else {
      paragraph.push_back(line);
    }
  }
  if (!paragraph.empty()) last_paragraph = paragraph;
  if (last_paragraph.empty()) return std::nullopt;
  std::string out;
  for (size_t i = 0; i < last_paragraph.size(); ++i) {
    if (i > 0) out += '\n';
    out += last_paragraph[i];
  }
  out = text::trim(out);
  if (out.empty()) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------
// Transcript parsing

namespace detail {

inline bool is_structural_line(const std::string& trimmed) {
  if (trimmed.empty()) return true;
  if (text::iequals(trimmed, "start collaboration!") ||
      text::iequals(trimmed, "start collaboration"))
    return true;
  if (text::iequals(trimmed, "finish collaboration!") ||
      text::iequals(trimmed, "finish collaboration"))
    return true;
  if (trimmed.size() >= 3 &&
      trimmed.find_first_not_of('-') == std::string::npos)
    return true;
  return false;
}

// Words that start lines like "Note:" or "Hint:" inside prose; these are
// never persona labels.
inline bool is_structural_word(const std::string& norm) {
  static const std::vector<std::string> kWords = {
      "participants", "task",  "input",    "output", "note",  "hint",
      "answer",       "story", "solution", "step",   "steps", "example",
      "question",     "clue",  "plan",     "format", "profile"};
  return std::find(kWords.begin(), kWords.end(), norm) != kWords.end();
}

// Label grammar for a dialogue turn: "<name>:" at the start of a line where
// <name> is short (1..6 words), contains no second colon, and every word
// either starts with an uppercase letter or is a "(you)" tag. Anything
// label-like that is not a declared participant is a parse error rather
// than a silently added persona.
inline bool looks_like_persona_label(const std::string& name) {
  if (name.empty() || name.size() > 48) return false;
  auto tokens_raw = text::split(name, ' ');
  std::vector<std::string> tokens;
  for (auto& t : tokens_raw)
    if (!t.empty()) tokens.push_back(t);
  if (tokens.empty() || tokens.size() > 6) return false;
  std::string norm = text::fold_for_match(name);
  if (is_structural_word(norm)) return false;
  for (const auto& tok : tokens) {
    if (text::iequals(tok, "(you)")) continue;
    bool all_digits = std::all_of(tok.begin(), tok.end(), [](unsigned char c) {
      return std::isdigit(c) != 0;
    });
    if (all_digits) return false;
    unsigned char first = static_cast<unsigned char>(tok.front());
    if (first == '(') continue;  // parenthesized annotation
    if (!std::isupper(first)) return false;
  }
  return true;
}

// Splits a participants declaration into entries. Semicolons win over
// commas so names such as "AI Assistant (you); Movie Expert" split cleanly.
inline std::vector<std::string> split_participant_entries(const std::string& s) {
  char sep = s.find(';') != std::string::npos ? ';' : ',';
  std::vector<std::string> out;
  for (auto& part : text::split(s, sep)) {
    std::string t = text::trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// Splits "Name — profile: description" (em dash, en dash or hyphen before
// the profile tag). Returns false when no profile tag is present.
inline bool split_profile_entry(const std::string& entry, std::string* name,
                                std::string* profile) {
  std::string folded = text::to_lower_ascii(entry);
  size_t tag = folded.find("profile:");
  if (tag == std::string::npos) return false;
  size_t name_end = tag;
  // Back over whitespace and dash characters (UTF-8 dashes included).
  auto is_dash_byte = [](unsigned char c) {
    return c == '-' || c == 0x80 || c == 0x93 || c == 0x94 || c == 0xE2;
  };
  while (name_end > 0 &&
         (text::is_space(entry[name_end - 1]) ||
          is_dash_byte(static_cast<unsigned char>(entry[name_end - 1]))))
    --name_end;
  *name = text::trim(entry.substr(0, name_end));
  *profile = text::trim(entry.substr(tag + 8));
  return !name->empty();
}

}  // namespace detail

// Parses a multi-persona generation:
//   - participants come from the "Participants:" declaration (inline list or
//     following bullet lines), with optional "— profile:" descriptions
//   - persona-labeled remarks before the first "AI Assistant" turn are
//     brainstorm remarks; from that turn on they are dialogue turns
//   - a line-initial label naming an undeclared persona is a ParseFailure
//   - the final answer is everything after the last "Final answer:" line;
//     a transcript with participants but no final answer is early-terminated
inline ParsedTranscript parse_spp_transcript(const std::string& raw) {
  auto lines = text::split_lines(raw);

  // Locate the participants declaration.
  std::optional<size_t> decl_line;
  std::string decl_rest;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string t = text::trim(lines[i]);
    std::string lower = text::to_lower_ascii(t);
    if (lower.rfind("participants", 0) == 0) {
      size_t colon = t.find(':');
      if (colon != std::string::npos) {
        decl_line = i;
        decl_rest = text::trim(t.substr(colon + 1));
        break;
      }
    }
  }
  if (!decl_line)
    throw ParseFailure("no participants section found");

  ParsedTranscript out;
  std::map<std::string, std::string> profiles;
  std::vector<std::string> normalized_participants;
  size_t body_start = *decl_line + 1;

  std::vector<std::string> entries;
  if (!decl_rest.empty()) {
    entries = detail::split_participant_entries(decl_rest);
  } else {
    // Bullet list on the following lines.
    size_t i = body_start;
    while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
    while (i < lines.size()) {
      std::string t = text::trim(lines[i]);
      if (t.empty()) break;
      if (t[0] != '-' && t[0] != '*') break;
      entries.push_back(text::trim(t.substr(1)));
      ++i;
    }
    body_start = i;
  }

  for (const auto& entry : entries) {
    std::string name = entry;
    std::string profile;
    if (detail::split_profile_entry(entry, &name, &profile))
      profiles[name] = profile;
    name = text::trim(name);
    if (name.empty()) throw ParseFailure("empty participant name");
    std::string norm = text::normalize_persona(name);
    if (std::find(normalized_participants.begin(), normalized_participants.end(),
                  norm) == normalized_participants.end()) {
      normalized_participants.push_back(norm);
      out.participants.push_back(name);
    }
  }
  if (out.participants.empty())
    throw ParseFailure("participants section declares no personas");
  if (!profiles.empty()) out.profiles = profiles;

  // The final-answer tail is excluded from label scanning: stories and
  // solutions may legitimately contain "Word:" lines.
  std::optional<size_t> last_marker;
  for (size_t i = 0; i < lines.size(); ++i)
    if (detail::is_final_answer_line(lines[i], nullptr)) last_marker = i;
  size_t scan_end = last_marker.value_or(lines.size());

  const std::string leader_norm = "ai assistant";
  bool leader_seen = false;
  std::optional<std::string> current_persona;
  std::vector<std::string> current_text;
  std::vector<std::pair<std::string, std::string>>* current_sink = nullptr;

  auto flush = [&]() {
    if (!current_persona || current_sink == nullptr) return;
    std::string joined;
    for (size_t i = 0; i < current_text.size(); ++i) {
      if (i > 0) joined += '\n';
      joined += current_text[i];
    }
    current_sink->emplace_back(*current_persona, text::trim(joined));
    current_persona.reset();
    current_text.clear();
  };

  for (size_t i = body_start; i < scan_end; ++i) {
    std::string t = text::trim(lines[i]);
    if (detail::is_structural_line(t)) {
      if (current_persona && !t.empty()) current_text.push_back(lines[i]);
      continue;
    }
    size_t colon = t.find(':');
    bool handled = false;
    if (colon != std::string::npos && colon > 0) {
      std::string name = text::trim(t.substr(0, colon));
      std::string norm = text::normalize_persona(name);
      bool declared = std::find(normalized_participants.begin(),
                                normalized_participants.end(),
                                norm) != normalized_participants.end();
      if (declared) {
        flush();
        if (norm == leader_norm) leader_seen = true;
        current_persona = norm;
        current_sink = leader_seen ? &out.turns : &out.brainstorm_remarks;
        std::string rest = text::trim(t.substr(colon + 1));
        if (!rest.empty()) current_text.push_back(rest);
        handled = true;
      } else if (detail::looks_like_persona_label(name)) {
        throw ParseFailure("turn labeled by unknown persona: " + name);
      }
    }
    if (!handled && current_persona) current_text.push_back(lines[i]);
  }
  flush();

  out.final_answer = extract_final_answer(raw);
  out.early_terminated = !out.final_answer.has_value();
  return out;
}

// ---------------------------------------------------------------------------
// Prompt rendering

// Composes the exact message sequence for one LLM call. SPP-family prompts
// are system principle + demonstration examples (one or both) + task prefix
// + task text; the variant strategies substitute overridden sections. CoT
// wraps the task in the plan-first template; standard sends the task text
// alone. Rendering is pure: equal inputs produce byte-equal bundles.
inline PromptBundle render_prompt(const Strategy& strategy,
                                  const std::string& task_text,
                                  const PromptTemplateSet& templates,
                                  const GenerationParams& params,
                                  const std::string& instance_id = "") {
  if (text::trim(task_text).empty())
    throw std::invalid_argument("task_text must be nonempty");

  std::string user;
  switch (strategy.kind) {
    case StrategyKind::Standard:
      user = task_text;
      break;
    case StrategyKind::CoT: {
      user = templates.cot_template;
      text::replace_all(user, "{task}", task_text);
      break;
    }
    case StrategyKind::SelfRefine:
      // The initial self-refine call is a standard prompt; the feedback and
      // refine calls are rendered inside run_strategy.
      user = task_text;
      break;
    case StrategyKind::SPP:
    case StrategyKind::SPPProfile:
    case StrategyKind::SPPFixedPersona: {
      std::string principle = templates.spp_system_principle;
      std::string demo1 = templates.spp_demo_1;
      std::string demo2 = templates.spp_demo_2;
      std::string prefix = templates.spp_task_prefix;
      if (strategy.kind != StrategyKind::SPP) {
        const std::string& overrides = strategy.kind == StrategyKind::SPPProfile
                                           ? templates.profile_variant_overrides
                                           : templates.fixed_persona_overrides;
        auto sections = parse_override_sections(overrides);
        if (auto it = sections.find("system_principle"); it != sections.end())
          principle = it->second;
        if (auto it = sections.find("demo_1"); it != sections.end())
          demo1 = it->second;
        if (auto it = sections.find("demo_2"); it != sections.end())
          demo2 = it->second;
        if (auto it = sections.find("task_prefix"); it != sections.end())
          prefix = it->second;
      }
      user = principle;
      user += "\n\n";
      user += demo1;
      if (strategy.demo_variant == DemoVariant::BothDemos) {
        user += "\n\n";
        user += demo2;
      }
      user += "\n\n";
      user += prefix;
      user += task_text;
      break;
    }
  }

  PromptBundle bundle;
  bundle.strategy = strategy;
  bundle.instance_id = instance_id;
  if (params.system_message)
    bundle.messages.push_back({Role::System, *params.system_message});
  bundle.messages.push_back({Role::User, std::move(user)});
  return bundle;
}

// ---------------------------------------------------------------------------
// Execution

namespace detail {

inline std::string render_self_refine_feedback(const PromptTemplateSet& templates,
                                               const std::string& task_text,
                                               const std::string& answer) {
  std::string out = templates.self_refine_feedback_template;
  text::replace_all(out, "{task}", task_text);
  text::replace_all(out, "{answer}", answer);
  return out;
}

inline std::string render_self_refine_refine(const PromptTemplateSet& templates,
                                             const std::string& task_text,
                                             const std::string& answer,
                                             const std::string& feedback) {
  std::string out = templates.self_refine_refine_template;
  text::replace_all(out, "{task}", task_text);
  text::replace_all(out, "{answer}", answer);
  text::replace_all(out, "{feedback}", feedback);
  return out;
}

}  // namespace detail

// Runs one strategy for one role-turn of one instance.
//
// Call counts per role-turn: standard, cot and the spp family issue exactly
// one call; self-refine with k iterations issues 1 + 2k (initial answer,
// then a feedback and a refine call per iteration). A content-filter finish
// on any call marks the outcome skipped; skipped outcomes carry no score.
//
// Answer extraction: spp-family outcomes take the transcript's final answer
// (marker only — a missing marker means early termination); the other
// strategies fall back to the last non-empty paragraph when the marker is
// absent.
inline StrategyOutcome run_strategy(const std::string& instance_id,
                                    const std::string& task_text,
                                    const Strategy& strategy,
                                    ChatBackend& backend,
                                    const PromptTemplateSet& templates,
                                    const GenerationParams& params) {
  StrategyOutcome outcome;
  outcome.instance_id = instance_id;
  outcome.strategy = strategy;

  auto call = [&](const PromptBundle& bundle) -> std::optional<std::string> {
    Completion c = backend.complete(bundle, params);
    ++outcome.llm_call_count;
    outcome.raw_generations.push_back(c.text);
    if (c.finish_reason == FinishReason::ContentFilter) {
      outcome.skipped = true;
      outcome.skip_reason = "content_filter";
      return std::nullopt;
    }
    return c.text;
  };

  if (strategy.kind == StrategyKind::SelfRefine) {
    PromptBundle initial = render_prompt(Strategy::standard(), task_text,
                                         templates, params, instance_id);
    initial.strategy = strategy;
    auto current = call(initial);
    if (!current) return outcome;
    std::optional<std::string> answer = extract_final_answer_with_fallback(*current);
    for (int i = 0; i < strategy.self_refine_iterations; ++i) {
      std::string answer_text = answer.value_or(*current);
      PromptBundle feedback_bundle;
      feedback_bundle.strategy = strategy;
      feedback_bundle.instance_id = instance_id;
      if (params.system_message)
        feedback_bundle.messages.push_back({Role::System, *params.system_message});
      feedback_bundle.messages.push_back(
          {Role::User, detail::render_self_refine_feedback(templates, task_text,
                                                           answer_text)});
      auto feedback = call(feedback_bundle);
      if (!feedback) return outcome;

      PromptBundle refine_bundle;
      refine_bundle.strategy = strategy;
      refine_bundle.instance_id = instance_id;
      if (params.system_message)
        refine_bundle.messages.push_back({Role::System, *params.system_message});
      refine_bundle.messages.push_back(
          {Role::User, detail::render_self_refine_refine(templates, task_text,
                                                         answer_text, *feedback)});
      current = call(refine_bundle);
      if (!current) return outcome;
      answer = extract_final_answer_with_fallback(*current);
    }
    outcome.extracted_answer = answer;
    return outcome;
  }

  PromptBundle bundle = render_prompt(strategy, task_text, templates, params,
                                      instance_id);
  auto generated = call(bundle);
  if (!generated) return outcome;

  if (strategy.is_spp_family()) {
    // A generation that does not parse as a transcript must not abort a
    // sweep; the raw text stays in the outcome and the instance scores on
    // whatever marker-tagged answer it carries (usually none).
    try {
      outcome.parsed = parse_spp_transcript(*generated);
      outcome.extracted_answer = outcome.parsed->final_answer;
    } catch (const ParseFailure&) {
      outcome.extracted_answer = extract_final_answer(*generated);
    }
  } else {
    outcome.extracted_answer = extract_final_answer_with_fallback(*generated);
  }
  return outcome;
}

}  // namespace spp
