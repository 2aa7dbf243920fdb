#pragma once

// Deterministic stand-in for a chat model, used by tests and by the fixture
// generator. Produces well-formed output for every strategy and task so the
// full pipeline (render -> complete -> parse -> score) can run offline. The
// response for a request is a pure function of the request plus the backend
// options, so recorded stores are reproducible.

#include <atomic>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spp/backend.hpp"
#include "spp/core.hpp"
#include "spp/tasks.hpp"
#include "spp/text.hpp"

namespace spp::testing {

struct ScriptedBackendOptions {
  // When set, requests matching the predicate early-terminate: the response
  // stops right after the participants line.
  std::function<bool(const PromptBundle&, const TaskInstance*)> early_terminate;
  // When set, matching requests finish with content_filter.
  std::function<bool(const PromptBundle&, const TaskInstance*)> content_filter;
  // Artificial latency per call; used by concurrency tests.
  int delay_ms = 0;
  // Fraction (0..100) of trivia questions whose alias gets embedded.
  int trivia_hit_rate = 80;
  // Fraction (0..100) of logic answers that match gold.
  int logic_hit_rate = 60;
};

class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<TaskInstance> instances = {},
                           ScriptedBackendOptions options = {})
      : instances_(std::move(instances)), options_(std::move(options)) {}

  Completion complete(const PromptBundle& bundle,
                      const GenerationParams& params) override {
    (void)params;
    int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    if (options_.delay_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.delay_ms));
    ++calls_;
    Completion c = respond(bundle);
    --in_flight_;
    return c;
  }

  int calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  enum class RequestKind {
    Trivia,
    Spymaster,
    Guesser,
    Logic,
    Feedback,
    Refine,
    Unknown,
  };

  struct Classified {
    RequestKind kind = RequestKind::Unknown;
    const TaskInstance* instance = nullptr;
    std::string task_block;  // for refine requests
  };

  static const std::string& user_text(const PromptBundle& bundle) {
    for (const auto& m : bundle.messages)
      if (m.role == Role::User) return m.content;
    static const std::string empty;
    return empty;
  }

  Classified classify(const PromptBundle& bundle) const {
    Classified out;
    const std::string& text = user_text(bundle);
    if (text.find("Below is a task and a candidate response") != std::string::npos) {
      out.kind = RequestKind::Feedback;
      return out;
    }
    if (text.find("Below is a task, a previous response") != std::string::npos) {
      out.kind = RequestKind::Refine;
      size_t task_pos = text.find("Task:\n");
      size_t prev_pos = text.find("\n\nPrevious response:");
      if (task_pos != std::string::npos && prev_pos != std::string::npos &&
          prev_pos > task_pos)
        out.task_block = text.substr(task_pos + 6, prev_pos - task_pos - 6);
      return out;
    }
    out = classify_task(text);
    return out;
  }

  Classified classify_task(const std::string& text) const {
    Classified out;
    if (text.find("Write a short and coherent story about ") != std::string::npos) {
      out.kind = RequestKind::Trivia;
      out.instance = match_instance(TaskKind::TriviaCreativeWriting, text);
    } else if (text.find("Target words: ") != std::string::npos) {
      out.kind = RequestKind::Spymaster;
      out.instance = match_instance(TaskKind::CodenamesCollaborative, text);
    } else if (text.find("Hint word: ") != std::string::npos) {
      out.kind = RequestKind::Guesser;
      out.instance = match_instance(TaskKind::CodenamesCollaborative, text);
    } else if (text.find("house") != std::string::npos) {
      out.kind = RequestKind::Logic;
      out.instance = match_instance(TaskKind::LogicGridPuzzle, text);
    }
    return out;
  }

  // Finds the dataset instance a prompt was rendered from by searching for
  // an instance-unique anchor inside the request text.
  const TaskInstance* match_instance(TaskKind kind, const std::string& text) const {
    for (const auto& inst : instances_) {
      if (inst.kind != kind) continue;
      switch (kind) {
        case TaskKind::TriviaCreativeWriting:
          if (text.find("story about " + inst.trivia().topic) != std::string::npos)
            return &inst;
          break;
        case TaskKind::CodenamesCollaborative:
          if (text.find(join_words(inst.codenames().all_words)) != std::string::npos)
            return &inst;
          break;
        case TaskKind::LogicGridPuzzle:
          if (text.find(inst.logic().puzzle_text) != std::string::npos) return &inst;
          break;
      }
    }
    return nullptr;
  }

  std::uint64_t content_hash(const TaskInstance* inst, const std::string& salt,
                             int item) const {
    std::string key = (inst != nullptr ? inst->id : "unknown") + "|" + salt +
                      "|" + std::to_string(item);
    return text::fnv1a64(key);
  }

  std::string trivia_content(const TaskInstance* inst,
                             const std::string& salt) const {
    if (inst == nullptr) return "Once upon a time nothing at all happened.";
    const auto& t = inst->trivia();
    std::ostringstream ss;
    ss << "Here is a short story about " << t.topic << ". ";
    for (size_t i = 0; i < t.questions.size(); ++i) {
      if (content_hash(inst, salt, static_cast<int>(i)) % 100 <
          static_cast<std::uint64_t>(options_.trivia_hit_rate)) {
        ss << "Along the way everyone remembered "
           << t.questions[i].answer_aliases.front() << ". ";
      } else {
        ss << "One detail stayed forgotten. ";
      }
    }
    ss << "The end.";
    return ss.str();
  }

  std::string hint_word(const TaskInstance* inst) const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "clue%04llx",
                  static_cast<unsigned long long>(
                      content_hash(inst, "hint", 0) & 0xffff));
    return buf;
  }

  std::string guesser_content(const TaskInstance* inst,
                              const std::string& salt) const {
    if (inst == nullptr) return "none";
    const auto& c = inst->codenames();
    int k = static_cast<int>(c.target_words.size());
    int n_correct = static_cast<int>(content_hash(inst, salt + "guess", 0) %
                                     static_cast<std::uint64_t>(k + 1));
    std::vector<std::string> guesses;
    for (int i = 0; i < n_correct; ++i) guesses.push_back(c.target_words[i]);
    for (const auto& w : c.all_words) {
      if (static_cast<int>(guesses.size()) >= k) break;
      if (std::find(c.target_words.begin(), c.target_words.end(), w) ==
          c.target_words.end())
        guesses.push_back(w);
    }
    return join_words(guesses);
  }

  std::string logic_content(const TaskInstance* inst,
                            const std::string& salt) const {
    if (inst == nullptr) return "1";
    const auto& p = inst->logic();
    bool correct = content_hash(inst, salt + "logic", 0) % 100 <
                   static_cast<std::uint64_t>(options_.logic_hit_rate);
    int answer = correct ? p.gold_house_number : p.gold_house_number + 1;
    return std::to_string(answer);
  }

  std::string task_content(const Classified& c, const std::string& salt) const {
    switch (c.kind) {
      case RequestKind::Trivia: return trivia_content(c.instance, salt);
      case RequestKind::Spymaster: return hint_word(c.instance);
      case RequestKind::Guesser: return guesser_content(c.instance, salt);
      case RequestKind::Logic: return logic_content(c.instance, salt);
      default: return "I am not sure how to help with that.";
    }
  }

  std::vector<std::string> personas_for(const Classified& c,
                                        StrategyKind strategy) const {
    if (strategy == StrategyKind::SPPFixedPersona) return {"Expert"};
    switch (c.kind) {
      case RequestKind::Trivia: return {"Trivia Expert", "Storyteller"};
      case RequestKind::Spymaster:
      case RequestKind::Guesser: return {"Word Game Expert", "Language Expert"};
      case RequestKind::Logic: return {"Logic Puzzle Expert", "Mathematician"};
      default: return {"Expert"};
    }
  }

  std::string spp_transcript(const Classified& c, const PromptBundle& bundle,
                             const std::string& content) const {
    StrategyKind strategy = bundle.strategy.kind;
    auto experts = personas_for(c, strategy);
    std::ostringstream ss;
    ss << "Participants: AI Assistant (you)";
    for (const auto& e : experts) {
      ss << "; " << e;
      if (strategy == StrategyKind::SPPProfile)
        ss << " — profile: knows the domain well and checks every detail";
    }
    ss << "\n\nStart collaboration!\n\n";
    ss << experts.front()
       << ": Make sure every requirement in the task is satisfied before "
          "giving the final answer.\n";
    if (experts.size() > 1)
      ss << experts[1]
         << ": Agreed. Check the requested output format as well.\n";
    ss << "AI Assistant (you): Thanks for the guidance! Here is my attempt:\n"
       << content << "\n";
    ss << experts.front()
       << ": That looks consistent with the task requirements.\n";
    ss << "AI Assistant (you): Great, then I will present the solution.\n\n";
    ss << "Finish collaboration!\n\n";
    ss << "Final answer: " << content;
    return ss.str();
  }

  Completion respond(const PromptBundle& bundle) const {
    Classified c = classify(bundle);

    if (options_.content_filter && options_.content_filter(bundle, c.instance))
      return Completion{"", FinishReason::ContentFilter};

    if (c.kind == RequestKind::Feedback) {
      return Completion{
          "The response mostly works, but double-check each stated "
          "requirement and keep the required output format.",
          FinishReason::Stop};
    }
    if (c.kind == RequestKind::Refine) {
      Classified original = classify_task(c.task_block);
      std::string content = task_content(original, "refine");
      return Completion{"I revised the response accordingly.\n\nFinal answer: " +
                            content,
                        FinishReason::Stop};
    }

    if (bundle.strategy.is_spp_family()) {
      if (options_.early_terminate && options_.early_terminate(bundle, c.instance)) {
        std::string personas =
            bundle.strategy.kind == StrategyKind::SPPFixedPersona
                ? "AI Assistant (you); Expert"
                : "AI Assistant (you); Domain Expert";
        return Completion{"Participants: " + personas + "\n", FinishReason::Stop};
      }
      std::string content = task_content(c, "spp");
      return Completion{spp_transcript(c, bundle, content), FinishReason::Stop};
    }

    if (bundle.strategy.kind == StrategyKind::CoT) {
      std::string content = task_content(c, "cot");
      return Completion{
          "Plan:\n1. Read the task requirements.\n2. Draft a solution.\n"
          "3. Verify the draft against each requirement.\n\n"
          "Following the plan, here is the result.\n\nFinal answer: " +
              content,
          FinishReason::Stop};
    }

    std::string content = task_content(c, "standard");
    return Completion{"Final answer: " + content, FinishReason::Stop};
  }

  std::vector<TaskInstance> instances_;
  ScriptedBackendOptions options_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

}  // namespace spp::testing
