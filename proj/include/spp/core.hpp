#pragma once

// Shared vocabulary of the harness: benchmark task instances, prompting
// strategies, rendered prompts, parsed multi-persona transcripts, and
// per-run results. All types are immutable values with canonical JSON
// serialization (snake_case field names) used by the JSONL run logs.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "spp/text.hpp"

namespace spp {

// ---------------------------------------------------------------------------
// Task kinds and payloads

enum class TaskKind {
  TriviaCreativeWriting,
  CodenamesCollaborative,
  LogicGridPuzzle,
};

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::TriviaCreativeWriting: return "trivia_creative_writing";
    case TaskKind::CodenamesCollaborative: return "codenames_collaborative";
    case TaskKind::LogicGridPuzzle: return "logic_grid_puzzle";
  }
  throw std::logic_error("bad TaskKind");
}

inline TaskKind task_kind_from_string(const std::string& s) {
  if (s == "trivia_creative_writing") return TaskKind::TriviaCreativeWriting;
  if (s == "codenames_collaborative") return TaskKind::CodenamesCollaborative;
  if (s == "logic_grid_puzzle") return TaskKind::LogicGridPuzzle;
  throw std::invalid_argument("unknown task kind: " + s);
}

struct Question {
  std::string text;
  std::vector<std::string> answer_aliases;  // nonempty; any alias counts

  bool operator==(const Question&) const = default;
};

struct TriviaInstance {
  std::string topic;
  std::vector<Question> questions;
  int n = 0;  // expected question count for the evaluation setting

  bool operator==(const TriviaInstance&) const = default;
};

struct CodenamesInstance {
  std::vector<std::string> target_words;
  std::vector<std::string> all_words;  // targets plus distractors

  bool operator==(const CodenamesInstance&) const = default;
};

struct LogicPuzzleInstance {
  std::string puzzle_text;
  std::string question_text;
  int gold_house_number = 0;

  bool operator==(const LogicPuzzleInstance&) const = default;
};

struct TaskInstance {
  std::string id;
  TaskKind kind = TaskKind::TriviaCreativeWriting;
  std::variant<TriviaInstance, CodenamesInstance, LogicPuzzleInstance> payload;

  bool operator==(const TaskInstance&) const = default;

  const TriviaInstance& trivia() const { return std::get<TriviaInstance>(payload); }
  const CodenamesInstance& codenames() const { return std::get<CodenamesInstance>(payload); }
  const LogicPuzzleInstance& logic() const { return std::get<LogicPuzzleInstance>(payload); }
};

// ---------------------------------------------------------------------------
// Strategies

enum class StrategyKind {
  Standard,
  CoT,
  SelfRefine,
  SPP,
  SPPProfile,
  SPPFixedPersona,
};

enum class DemoVariant { BothDemos, FirstDemoOnly };

struct Strategy {
  StrategyKind kind = StrategyKind::Standard;
  int self_refine_iterations = 1;  // used by SelfRefine only
  DemoVariant demo_variant = DemoVariant::BothDemos;

  bool operator==(const Strategy&) const = default;

  bool is_spp_family() const {
    return kind == StrategyKind::SPP || kind == StrategyKind::SPPProfile ||
           kind == StrategyKind::SPPFixedPersona;
  }

  static Strategy standard() { return {StrategyKind::Standard, 1, DemoVariant::BothDemos}; }
  static Strategy cot() { return {StrategyKind::CoT, 1, DemoVariant::BothDemos}; }
  static Strategy self_refine(int iterations) {
    return {StrategyKind::SelfRefine, iterations, DemoVariant::BothDemos};
  }
  static Strategy spp(DemoVariant v = DemoVariant::BothDemos) {
    return {StrategyKind::SPP, 1, v};
  }
  static Strategy spp_profile(DemoVariant v = DemoVariant::BothDemos) {
    return {StrategyKind::SPPProfile, 1, v};
  }
  static Strategy spp_fixed_persona(DemoVariant v = DemoVariant::BothDemos) {
    return {StrategyKind::SPPFixedPersona, 1, v};
  }

  // Compact spec used on the command line and in report rows, e.g.
  // "standard", "self_refine:1", "spp@first_demo_only".
  std::string spec_name() const {
    std::string base;
    switch (kind) {
      case StrategyKind::Standard: base = "standard"; break;
      case StrategyKind::CoT: base = "cot"; break;
      case StrategyKind::SelfRefine:
        base = "self_refine:" + std::to_string(self_refine_iterations);
        break;
      case StrategyKind::SPP: base = "spp"; break;
      case StrategyKind::SPPProfile: base = "spp_profile"; break;
      case StrategyKind::SPPFixedPersona: base = "spp_fixed_persona"; break;
    }
    if (demo_variant == DemoVariant::FirstDemoOnly) base += "@first_demo_only";
    return base;
  }

  static Strategy parse(const std::string& spec) {
    std::string s = text::trim(spec);
    DemoVariant variant = DemoVariant::BothDemos;
    if (auto at = s.find('@'); at != std::string::npos) {
      std::string v = s.substr(at + 1);
      s = s.substr(0, at);
      if (v == "first_demo_only") variant = DemoVariant::FirstDemoOnly;
      else if (v == "both_demos") variant = DemoVariant::BothDemos;
      else throw std::invalid_argument("unknown demo variant: " + v);
    }
    int iterations = 1;
    if (auto colon = s.find(':'); colon != std::string::npos) {
      iterations = std::stoi(s.substr(colon + 1));
      s = s.substr(0, colon);
    }
    Strategy out;
    if (s == "standard") out = standard();
    else if (s == "cot") out = cot();
    else if (s == "self_refine") out = self_refine(iterations);
    else if (s == "spp") out = spp();
    else if (s == "spp_profile") out = spp_profile();
    else if (s == "spp_fixed_persona") out = spp_fixed_persona();
    else throw std::invalid_argument("unknown strategy: " + s);
    out.demo_variant = variant;
    if (variant == DemoVariant::FirstDemoOnly && !out.is_spp_family())
      throw std::invalid_argument("demo variant applies to spp-family strategies only");
    if (out.kind == StrategyKind::SelfRefine && iterations < 0)
      throw std::invalid_argument("self_refine iterations must be >= 0");
    return out;
  }
};

// ---------------------------------------------------------------------------
// Generation parameters and prompts

struct GenerationParams {
  std::string model_name = "gpt-4";
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 2048;  // plain config default; callers may override
  std::optional<std::string> system_message;

  bool operator==(const GenerationParams&) const = default;

  static constexpr const char* kDefaultSystemMessage =
      "You are an AI assistant that helps people find information.";
};

enum class Role { System, User, Assistant };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  throw std::logic_error("bad Role");
}

inline Role role_from_string(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw std::invalid_argument("unknown role: " + s);
}

struct Message {
  Role role = Role::User;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct PromptBundle {
  std::vector<Message> messages;  // at most one system message, first
  Strategy strategy;
  std::string instance_id;

  bool operator==(const PromptBundle&) const = default;
};

// ---------------------------------------------------------------------------
// Transcripts and outcomes

struct ParsedTranscript {
  std::vector<std::string> participants;  // display form, declaration order
  std::optional<std::map<std::string, std::string>> profiles;
  std::vector<std::pair<std::string, std::string>> brainstorm_remarks;
  std::vector<std::pair<std::string, std::string>> turns;
  std::optional<std::string> final_answer;
  bool early_terminated = false;

  bool operator==(const ParsedTranscript&) const = default;
};

struct StrategyOutcome {
  std::string instance_id;
  Strategy strategy;
  std::vector<std::string> raw_generations;  // one per LLM call, in order
  std::optional<ParsedTranscript> parsed;
  std::optional<std::string> extracted_answer;
  int llm_call_count = 0;
  bool skipped = false;
  std::string skip_reason;

  bool operator==(const StrategyOutcome&) const = default;
};

enum class SystemSetting { WithSystemMessage, WithoutSystemMessage };

inline std::string to_string(SystemSetting s) {
  return s == SystemSetting::WithSystemMessage ? "with_system_message"
                                               : "without_system_message";
}

inline SystemSetting setting_from_string(const std::string& s) {
  if (s == "with_system_message" || s == "with") return SystemSetting::WithSystemMessage;
  if (s == "without_system_message" || s == "without") return SystemSetting::WithoutSystemMessage;
  throw std::invalid_argument("unknown system setting: " + s);
}

struct ScoreReport {
  std::vector<std::pair<std::string, double>> per_instance;  // (id, score in [0,1])
  double mean = 0.0;  // unweighted arithmetic mean of per_instance
  int n_scored = 0;
  int n_skipped = 0;
  SystemSetting setting = SystemSetting::WithSystemMessage;

  static ScoreReport from_scores(
      std::vector<std::pair<std::string, double>> scores, int skipped,
      SystemSetting setting) {
    ScoreReport r;
    r.per_instance = std::move(scores);
    r.n_scored = static_cast<int>(r.per_instance.size());
    r.n_skipped = skipped;
    r.setting = setting;
    double sum = 0.0;
    for (const auto& [id, s] : r.per_instance) sum += s;
    r.mean = r.n_scored > 0 ? sum / r.n_scored : 0.0;
    return r;
  }
};

// ---------------------------------------------------------------------------
// Validation

// Checks the per-instance invariants. Violations are data, not exceptions:
// each entry names the offending field and rule.
inline std::vector<std::string> validate_instance(const TaskInstance& inst) {
  std::vector<std::string> v;
  if (inst.id.empty()) v.push_back("id: must be nonempty");

  auto kind_matches = [&](auto tag) {
    return std::holds_alternative<decltype(tag)>(inst.payload);
  };
  bool payload_ok =
      (inst.kind == TaskKind::TriviaCreativeWriting && kind_matches(TriviaInstance{})) ||
      (inst.kind == TaskKind::CodenamesCollaborative && kind_matches(CodenamesInstance{})) ||
      (inst.kind == TaskKind::LogicGridPuzzle && kind_matches(LogicPuzzleInstance{}));
  if (!payload_ok) {
    v.push_back("payload: kind tag does not match payload type");
    return v;
  }

  switch (inst.kind) {
    case TaskKind::TriviaCreativeWriting: {
      const auto& t = inst.trivia();
      if (t.topic.empty()) v.push_back("topic: must be nonempty");
      if (static_cast<int>(t.questions.size()) != t.n)
        v.push_back("questions: count " + std::to_string(t.questions.size()) +
                    " != n " + std::to_string(t.n));
      for (size_t qi = 0; qi < t.questions.size(); ++qi) {
        const auto& q = t.questions[qi];
        std::string at = "questions[" + std::to_string(qi) + "]";
        if (q.text.empty()) v.push_back(at + ".text: must be nonempty");
        if (q.answer_aliases.empty())
          v.push_back(at + ".answer_aliases: must be nonempty");
        std::vector<std::string> seen;
        for (const auto& a : q.answer_aliases) {
          if (text::trim(a).empty()) {
            v.push_back(at + ".answer_aliases: empty alias");
            continue;
          }
          std::string norm = text::fold_for_match(a);
          if (std::find(seen.begin(), seen.end(), norm) != seen.end())
            v.push_back(at + ".answer_aliases: duplicate alias '" + a +
                        "' after normalization");
          else
            seen.push_back(std::move(norm));
        }
      }
      break;
    }
    case TaskKind::CodenamesCollaborative: {
      const auto& c = inst.codenames();
      if (c.target_words.empty()) v.push_back("target_words: must be nonempty");
      auto norm_all = std::vector<std::string>{};
      for (const auto& w : c.all_words) norm_all.push_back(text::fold_for_match(w));
      for (size_t i = 0; i < norm_all.size(); ++i)
        for (size_t j = i + 1; j < norm_all.size(); ++j)
          if (norm_all[i] == norm_all[j])
            v.push_back("all_words: duplicate word '" + c.all_words[i] +
                        "' after normalization");
      std::vector<std::string> norm_targets;
      for (const auto& w : c.target_words) {
        std::string norm = text::fold_for_match(w);
        if (std::find(norm_targets.begin(), norm_targets.end(), norm) !=
            norm_targets.end())
          v.push_back("target_words: duplicate target '" + w + "'");
        norm_targets.push_back(norm);
        if (std::find(norm_all.begin(), norm_all.end(), norm) == norm_all.end())
          v.push_back("target_words: '" + w + "' not present in all_words");
      }
      break;
    }
    case TaskKind::LogicGridPuzzle: {
      const auto& p = inst.logic();
      if (p.puzzle_text.empty()) v.push_back("puzzle_text: must be nonempty");
      if (p.question_text.empty()) v.push_back("question_text: must be nonempty");
      if (p.gold_house_number < 1)
        v.push_back("gold_house_number: must be positive");
      // Validate against the house range when the puzzle states one,
      // e.g. "There are 4 houses".
      std::string folded = text::fold_for_match(p.puzzle_text);
      size_t pos = folded.find("there are ");
      if (pos != std::string::npos) {
        size_t num_start = pos + 10;
        size_t num_end = num_start;
        while (num_end < folded.size() &&
               std::isdigit(static_cast<unsigned char>(folded[num_end])))
          ++num_end;
        if (num_end > num_start &&
            folded.compare(num_end, 7, " houses") == 0) {
          int houses = std::stoi(folded.substr(num_start, num_end - num_start));
          if (p.gold_house_number > houses)
            v.push_back("gold_house_number: " +
                        std::to_string(p.gold_house_number) +
                        " exceeds stated house count " + std::to_string(houses));
        }
      }
      break;
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Canonical JSON serialization. Templated over the json type so the same
// definitions serve nlohmann::json and nlohmann::ordered_json (the run logs
// use ordered_json to keep field order stable).

template <typename J>
void to_json(J& j, const Question& q) {
  j = J{{"text", q.text}, {"answer_aliases", q.answer_aliases}};
}
template <typename J>
void from_json(const J& j, Question& q) {
  j.at("text").get_to(q.text);
  j.at("answer_aliases").get_to(q.answer_aliases);
}

template <typename J>
void to_json(J& j, const TriviaInstance& t) {
  j = J{{"topic", t.topic}, {"questions", t.questions}, {"n", t.n}};
}
template <typename J>
void from_json(const J& j, TriviaInstance& t) {
  j.at("topic").get_to(t.topic);
  j.at("questions").get_to(t.questions);
  j.at("n").get_to(t.n);
}

template <typename J>
void to_json(J& j, const CodenamesInstance& c) {
  j = J{{"target_words", c.target_words}, {"all_words", c.all_words}};
}
template <typename J>
void from_json(const J& j, CodenamesInstance& c) {
  j.at("target_words").get_to(c.target_words);
  j.at("all_words").get_to(c.all_words);
}

template <typename J>
void to_json(J& j, const LogicPuzzleInstance& p) {
  j = J{{"puzzle_text", p.puzzle_text},
        {"question_text", p.question_text},
        {"gold_house_number", p.gold_house_number}};
}
template <typename J>
void from_json(const J& j, LogicPuzzleInstance& p) {
  j.at("puzzle_text").get_to(p.puzzle_text);
  j.at("question_text").get_to(p.question_text);
  j.at("gold_house_number").get_to(p.gold_house_number);
}

template <typename J>
void to_json(J& j, const TaskInstance& t) {
  j = J{{"id", t.id}, {"kind", to_string(t.kind)}};
  std::visit([&](const auto& p) { j["payload"] = p; }, t.payload);
}
template <typename J>
void from_json(const J& j, TaskInstance& t) {
  j.at("id").get_to(t.id);
  t.kind = task_kind_from_string(j.at("kind").template get<std::string>());
  switch (t.kind) {
    case TaskKind::TriviaCreativeWriting:
      t.payload = j.at("payload").template get<TriviaInstance>();
      break;
    case TaskKind::CodenamesCollaborative:
      t.payload = j.at("payload").template get<CodenamesInstance>();
      break;
    case TaskKind::LogicGridPuzzle:
      t.payload = j.at("payload").template get<LogicPuzzleInstance>();
      break;
  }
}

template <typename J>
void to_json(J& j, const Strategy& s) {
  std::string kind;
  switch (s.kind) {
    case StrategyKind::Standard: kind = "standard"; break;
    case StrategyKind::CoT: kind = "cot"; break;
    case StrategyKind::SelfRefine: kind = "self_refine"; break;
    case StrategyKind::SPP: kind = "spp"; break;
    case StrategyKind::SPPProfile: kind = "spp_profile"; break;
    case StrategyKind::SPPFixedPersona: kind = "spp_fixed_persona"; break;
  }
  j = J{{"kind", kind},
        {"iterations", s.self_refine_iterations},
        {"demo_variant", s.demo_variant == DemoVariant::BothDemos
                             ? "both_demos"
                             : "first_demo_only"}};
}
template <typename J>
void from_json(const J& j, Strategy& s) {
  std::string kind = j.at("kind").template get<std::string>();
  if (kind == "standard") s.kind = StrategyKind::Standard;
  else if (kind == "cot") s.kind = StrategyKind::CoT;
  else if (kind == "self_refine") s.kind = StrategyKind::SelfRefine;
  else if (kind == "spp") s.kind = StrategyKind::SPP;
  else if (kind == "spp_profile") s.kind = StrategyKind::SPPProfile;
  else if (kind == "spp_fixed_persona") s.kind = StrategyKind::SPPFixedPersona;
  else throw std::invalid_argument("unknown strategy kind: " + kind);
  s.self_refine_iterations = j.value("iterations", 1);
  std::string v = j.value("demo_variant", std::string("both_demos"));
  s.demo_variant = v == "first_demo_only" ? DemoVariant::FirstDemoOnly
                                          : DemoVariant::BothDemos;
}

template <typename J>
void to_json(J& j, const GenerationParams& p) {
  j = J{{"model_name", p.model_name},
        {"temperature", p.temperature},
        {"top_p", p.top_p},
        {"max_tokens", p.max_tokens},
        {"system_message", nullptr}};
  if (p.system_message) j["system_message"] = *p.system_message;
}
template <typename J>
void from_json(const J& j, GenerationParams& p) {
  p.model_name = j.value("model_name", std::string("gpt-4"));
  p.temperature = j.value("temperature", 0.0);
  p.top_p = j.value("top_p", 1.0);
  p.max_tokens = j.value("max_tokens", 2048);
  p.system_message.reset();
  if (j.contains("system_message") && !j.at("system_message").is_null())
    p.system_message = j.at("system_message").template get<std::string>();
}

template <typename J>
void to_json(J& j, const Message& m) {
  j = J{{"role", to_string(m.role)}, {"content", m.content}};
}
template <typename J>
void from_json(const J& j, Message& m) {
  m.role = role_from_string(j.at("role").template get<std::string>());
  j.at("content").get_to(m.content);
}

template <typename J>
void to_json(J& j, const PromptBundle& b) {
  j = J{{"messages", b.messages},
        {"strategy", b.strategy},
        {"instance_id", b.instance_id}};
}
template <typename J>
void from_json(const J& j, PromptBundle& b) {
  j.at("messages").get_to(b.messages);
  j.at("strategy").get_to(b.strategy);
  j.at("instance_id").get_to(b.instance_id);
}

template <typename J>
void to_json(J& j, const ParsedTranscript& t) {
  j = J{{"participants", t.participants},
        {"profiles", nullptr},
        {"brainstorm_remarks", J::array()},
        {"turns", J::array()},
        {"final_answer", nullptr},
        {"early_terminated", t.early_terminated}};
  if (t.profiles) j["profiles"] = *t.profiles;
  for (const auto& [persona, txt] : t.brainstorm_remarks)
    j["brainstorm_remarks"].push_back(J{{"persona", persona}, {"text", txt}});
  for (const auto& [persona, txt] : t.turns)
    j["turns"].push_back(J{{"persona", persona}, {"text", txt}});
  if (t.final_answer) j["final_answer"] = *t.final_answer;
}
template <typename J>
void from_json(const J& j, ParsedTranscript& t) {
  j.at("participants").get_to(t.participants);
  t.profiles.reset();
  if (j.contains("profiles") && !j.at("profiles").is_null())
    t.profiles = j.at("profiles").template get<std::map<std::string, std::string>>();
  t.brainstorm_remarks.clear();
  for (const auto& e : j.at("brainstorm_remarks"))
    t.brainstorm_remarks.emplace_back(e.at("persona").template get<std::string>(),
                                      e.at("text").template get<std::string>());
  t.turns.clear();
  for (const auto& e : j.at("turns"))
    t.turns.emplace_back(e.at("persona").template get<std::string>(),
                         e.at("text").template get<std::string>());
  t.final_answer.reset();
  if (j.contains("final_answer") && !j.at("final_answer").is_null())
    t.final_answer = j.at("final_answer").template get<std::string>();
  t.early_terminated = j.at("early_terminated").template get<bool>();
}

template <typename J>
void to_json(J& j, const StrategyOutcome& o) {
  j = J{{"instance_id", o.instance_id},
        {"strategy", o.strategy},
        {"raw_generations", o.raw_generations},
        {"parsed", nullptr},
        {"extracted_answer", nullptr},
        {"llm_call_count", o.llm_call_count},
        {"skipped", o.skipped},
        {"skip_reason", o.skip_reason}};
  if (o.parsed) j["parsed"] = *o.parsed;
  if (o.extracted_answer) j["extracted_answer"] = *o.extracted_answer;
}
template <typename J>
void from_json(const J& j, StrategyOutcome& o) {
  j.at("instance_id").get_to(o.instance_id);
  j.at("strategy").get_to(o.strategy);
  j.at("raw_generations").get_to(o.raw_generations);
  o.parsed.reset();
  if (j.contains("parsed") && !j.at("parsed").is_null())
    o.parsed = j.at("parsed").template get<ParsedTranscript>();
  o.extracted_answer.reset();
  if (j.contains("extracted_answer") && !j.at("extracted_answer").is_null())
    o.extracted_answer = j.at("extracted_answer").template get<std::string>();
  j.at("llm_call_count").get_to(o.llm_call_count);
  j.at("skipped").get_to(o.skipped);
  o.skip_reason = j.value("skip_reason", std::string());
}

template <typename J>
void to_json(J& j, const ScoreReport& r) {
  j = J{{"per_instance", J::array()},
        {"mean", r.mean},
        {"n_scored", r.n_scored},
        {"n_skipped", r.n_skipped},
        {"setting", to_string(r.setting)}};
  for (const auto& [id, s] : r.per_instance)
    j["per_instance"].push_back(J{{"instance_id", id}, {"score", s}});
}
template <typename J>
void from_json(const J& j, ScoreReport& r) {
  r.per_instance.clear();
  for (const auto& e : j.at("per_instance"))
    r.per_instance.emplace_back(e.at("instance_id").template get<std::string>(),
                                e.at("score").template get<double>());
  j.at("mean").get_to(r.mean);
  j.at("n_scored").get_to(r.n_scored);
  j.at("n_skipped").get_to(r.n_skipped);
  r.setting = setting_from_string(j.at("setting").template get<std::string>());
}

}  // namespace spp
