#pragma once

// Experiment runner: binds datasets, strategies, backends and reports into
// reproducible sweeps. A run walks method x system-setting x instance,
// executes each role-turn, scores, and emits results.jsonl plus summary
// artifacts under a content-addressed run directory.

#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "spp/backend.hpp"
#include "spp/core.hpp"
#include "spp/evaluation.hpp"
#include "spp/strategies.hpp"
#include "spp/tasks.hpp"
#include "spp/templates.hpp"

namespace spp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  TaskKind task = TaskKind::TriviaCreativeWriting;
  std::string task_label;  // report axis; defaults to the kind name
  std::string dataset_path;
  std::optional<size_t> expected_count;
  std::vector<std::string> methods;  // strategy specs, e.g. "self_refine:1"
  std::vector<SystemSetting> system_message_settings = {
      SystemSetting::WithSystemMessage, SystemSetting::WithoutSystemMessage};
  GenerationParams params;
  ChatBackendConfig backend;
  ReplayMode replay_mode = ReplayMode::Passthrough;
  std::string replay_store;
  std::uint64_t seed = 0;
  bool shuffle_questions = false;
  std::string output_dir = "runs";
  std::string templates_dir = "data/templates";

  std::vector<Strategy> parsed_methods() const {
    std::vector<Strategy> out;
    out.reserve(methods.size());
    for (const auto& m : methods) out.push_back(Strategy::parse(m));
    return out;
  }

  std::string effective_label() const {
    return task_label.empty() ? to_string(task) : task_label;
  }
};

template <typename J>
void to_json(J& j, const RunConfig& c) {
  j = J{{"task", to_string(c.task)},
        {"task_label", c.task_label},
        {"dataset_path", c.dataset_path},
        {"expected_count", nullptr},
        {"methods", c.methods},
        {"system_message_settings", J::array()},
        {"params", c.params},
        {"backend", c.backend},
        {"replay_mode", to_string(c.replay_mode)},
        {"replay_store", c.replay_store},
        {"seed", c.seed},
        {"shuffle_questions", c.shuffle_questions},
        {"output_dir", c.output_dir},
        {"templates_dir", c.templates_dir}};
  if (c.expected_count) j["expected_count"] = *c.expected_count;
  for (auto s : c.system_message_settings)
    j["system_message_settings"].push_back(
        s == SystemSetting::WithSystemMessage ? "with" : "without");
}
template <typename J>
void from_json(const J& j, RunConfig& c) {
  c.task = task_kind_from_string(j.at("task").template get<std::string>());
  c.task_label = j.value("task_label", std::string());
  c.dataset_path = j.at("dataset_path").template get<std::string>();
  c.expected_count.reset();
  if (j.contains("expected_count") && !j.at("expected_count").is_null())
    c.expected_count = j.at("expected_count").template get<size_t>();
  j.at("methods").get_to(c.methods);
  c.system_message_settings.clear();
  if (j.contains("system_message_settings")) {
    for (const auto& s : j.at("system_message_settings"))
      c.system_message_settings.push_back(
          setting_from_string(s.template get<std::string>()));
  } else {
    c.system_message_settings = {SystemSetting::WithSystemMessage,
                                 SystemSetting::WithoutSystemMessage};
  }
  if (j.contains("params")) j.at("params").get_to(c.params);
  if (j.contains("backend")) j.at("backend").get_to(c.backend);
  c.replay_mode = replay_mode_from_string(
      j.value("replay_mode", std::string("passthrough")));
  c.replay_store = j.value("replay_store", std::string());
  c.seed = j.value("seed", std::uint64_t{0});
  c.shuffle_questions = j.value("shuffle_questions", false);
  c.output_dir = j.value("output_dir", std::string("runs"));
  c.templates_dir = j.value("templates_dir", std::string("data/templates"));
}

inline void validate(const RunConfig& c) {
  if (c.methods.empty()) throw ConfigError("config: methods must be nonempty");
  for (const auto& m : c.methods) {
    try {
      Strategy::parse(m);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (c.system_message_settings.empty())
    throw ConfigError("config: system_message_settings must be nonempty");
  if (c.dataset_path.empty()) throw ConfigError("config: dataset_path must be set");
  if (c.params.max_tokens <= 0) throw ConfigError("config: max_tokens must be positive");
  if ((c.replay_mode == ReplayMode::Record || c.replay_mode == ReplayMode::Replay) &&
      c.replay_store.empty())
    throw ConfigError("config: replay_store must be set in record/replay modes");
  validate(c.backend);
}

// ---------------------------------------------------------------------------
// Per-instance results (one results.jsonl line each)

struct InstanceResult {
  std::string task;
  std::string method;
  SystemSetting setting = SystemSetting::WithSystemMessage;
  std::string instance_id;
  double score = 0.0;
  bool parse_ok = false;
  bool skipped = false;
  std::string skip_reason;
  bool early_terminated = false;
  std::vector<StrategyOutcome> outcomes;  // codenames: [spymaster, guesser]
};

template <typename J>
void to_json(J& j, const InstanceResult& r) {
  j = J{{"task", r.task},
        {"method", r.method},
        {"setting", to_string(r.setting)},
        {"instance_id", r.instance_id},
        {"score", r.score},
        {"parse_ok", r.parse_ok},
        {"skipped", r.skipped},
        {"skip_reason", r.skip_reason},
        {"early_terminated", r.early_terminated},
        {"outcomes", r.outcomes}};
}
template <typename J>
void from_json(const J& j, InstanceResult& r) {
  j.at("task").get_to(r.task);
  j.at("method").get_to(r.method);
  r.setting = setting_from_string(j.at("setting").template get<std::string>());
  j.at("instance_id").get_to(r.instance_id);
  j.at("score").get_to(r.score);
  j.at("parse_ok").get_to(r.parse_ok);
  j.at("skipped").get_to(r.skipped);
  r.skip_reason = j.value("skip_reason", std::string());
  r.early_terminated = j.value("early_terminated", false);
  j.at("outcomes").get_to(r.outcomes);
}

// ---------------------------------------------------------------------------
// Atomic file writes: temp file in the target directory, then rename.

inline void atomic_write_file(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::filesystem::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Small fixed-size worker pool. In-flight backend requests never exceed the
// pool size.

class WorkerPool {
 public:
  explicit WorkerPool(int threads) {
    for (int i = 0; i < std::max(1, threads); ++i)
      workers_.emplace_back([this] { work(); });
  }

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      done_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  template <typename F>
  auto submit(F&& f) -> std::future<decltype(f())> {
    using R = decltype(f());
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
    std::future<R> fut = task->get_future();
    {
      std::lock_guard<std::mutex> lock(mu_);
      jobs_.push([task] { (*task)(); });
    }
    cv_.notify_one();
    return fut;
  }

 private:
  void work() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return done_ || !jobs_.empty(); });
        if (jobs_.empty()) {
          if (done_) return;
          continue;
        }
        job = std::move(jobs_.front());
        jobs_.pop();
      }
      job();
    }
  }

  std::vector<std::thread> workers_;
  std::queue<std::function<void()>> jobs_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Instance pipeline

namespace detail {

inline StrategyOutcome skipped_outcome(const std::string& instance_id,
                                       const Strategy& strategy,
                                       const std::string& reason) {
  StrategyOutcome o;
  o.instance_id = instance_id;
  o.strategy = strategy;
  o.skipped = true;
  o.skip_reason = reason;
  return o;
}

inline const std::string& last_generation(const StrategyOutcome& o) {
  static const std::string empty;
  return o.raw_generations.empty() ? empty : o.raw_generations.back();
}

}  // namespace detail

// Executes one (instance, strategy, setting) cell: renders the role turns,
// calls the backend, parses and scores. Backend failures mark the result
// skipped; unparseable model output scores 0 with parse_ok=false.
inline InstanceResult run_instance(const TaskInstance& inst,
                                   const Strategy& strategy,
                                   SystemSetting setting,
                                   const RunConfig& config,
                                   ChatBackend& backend,
                                   const PromptTemplateSet& templates) {
  InstanceResult result;
  result.task = config.effective_label();
  result.method = strategy.spec_name();
  result.setting = setting;
  result.instance_id = inst.id;

  GenerationParams params = config.params;
  if (setting == SystemSetting::WithSystemMessage) {
    if (!params.system_message)
      params.system_message = GenerationParams::kDefaultSystemMessage;
  } else {
    params.system_message.reset();
  }

  auto run_role = [&](const std::string& task_text) -> StrategyOutcome {
    try {
      return run_strategy(inst.id, task_text, strategy, backend, templates,
                          params);
    } catch (const BackendError& e) {
      return detail::skipped_outcome(inst.id, strategy,
                                     std::string("backend_error: ") + e.what());
    }
  };

  switch (inst.kind) {
    case TaskKind::TriviaCreativeWriting: {
      TriviaInstance trivia = inst.trivia();
      if (config.shuffle_questions) {
        std::uint64_t seed = config.seed ^ text::fnv1a64(inst.id);
        trivia = spp::shuffle_questions(trivia, seed);
      }
      StrategyOutcome o = run_role(render_trivia_task(trivia));
      result.outcomes.push_back(o);
      if (o.skipped) {
        result.skipped = true;
        result.skip_reason = o.skip_reason;
        break;
      }
      if (o.extracted_answer) {
        result.parse_ok = true;
        // Gold data comes from the instance as stored; shuffling changes
        // only the rendered prompt.
        result.score = score_trivia(*o.extracted_answer, inst.trivia());
      }
      break;
    }
    case TaskKind::CodenamesCollaborative: {
      const auto& codenames = inst.codenames();
      StrategyOutcome spymaster = run_role(render_spymaster_task(codenames));
      result.outcomes.push_back(spymaster);
      if (spymaster.skipped) {
        result.skipped = true;
        result.skip_reason = spymaster.skip_reason;
        break;
      }
      std::string hint;
      try {
        hint = parse_hint(detail::last_generation(spymaster));
      } catch (const HintParseError&) {
        break;  // no usable hint: score stays 0, parse_ok false
      }
      StrategyOutcome guesser = run_role(render_guesser_task(codenames, hint));
      result.outcomes.push_back(guesser);
      if (guesser.skipped) {
        result.skipped = true;
        result.skip_reason = guesser.skip_reason;
        break;
      }
      std::string answer_text = guesser.extracted_answer
                                    ? *guesser.extracted_answer
                                    : detail::last_generation(guesser);
      CodenamesScore s = score_codenames(answer_text, codenames);
      result.score = s.score;
      result.parse_ok = s.parse_ok;
      break;
    }
    case TaskKind::LogicGridPuzzle: {
      StrategyOutcome o = run_role(render_logic_task(inst.logic()));
      result.outcomes.push_back(o);
      if (o.skipped) {
        result.skipped = true;
        result.skip_reason = o.skip_reason;
        break;
      }
      if (o.extracted_answer) {
        LogicScore s = score_logic_puzzle(*o.extracted_answer, inst.logic());
        result.score = s.score;
        result.parse_ok = s.parse_ok;
      }
      break;
    }
  }

  for (const auto& o : result.outcomes)
    if (o.parsed && o.parsed->early_terminated) result.early_terminated = true;
  return result;
}

// ---------------------------------------------------------------------------
// Report emission

namespace detail {

inline std::string pct1(double fraction_mean) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", round1(fraction_mean * 100.0));
  return buf;
}

inline std::string delta_str(double delta_percent) {
  char buf[32];
  double r = round1(delta_percent);
  if (r == 0.0) r = 0.0;  // avoid "-0.0"
  std::snprintf(buf, sizeof buf, "%+.1f%%", r);
  return buf;
}

// Canonical method ordering for report rows: the baselines first, the
// persona variants, then the full method; unknown specs keep appearance
// order at the end.
inline int method_rank(const std::string& spec) {
  if (spec.rfind("standard", 0) == 0) return 0;
  if (spec.rfind("cot", 0) == 0) return 1;
  if (spec.rfind("self_refine", 0) == 0) return 2;
  if (spec.rfind("spp_fixed_persona", 0) == 0) return 3;
  if (spec.rfind("spp_profile", 0) == 0) return 4;
  if (spec.rfind("spp", 0) == 0) return 5;
  return 6;
}

struct MethodTaskCell {
  std::map<SystemSetting, ScoreReport> reports;
};

// (task -> method -> reports per setting), built from result lines in
// stable order.
using ReportGrid = std::map<std::string, std::map<std::string, MethodTaskCell>>;

inline ReportGrid build_grid(const std::vector<InstanceResult>& results) {
  // Gather per-group score lists first, in input order.
  std::map<std::string, std::vector<std::pair<std::string, double>>> scores;
  std::map<std::string, int> skips;
  for (const auto& r : results) {
    std::string key = r.task + "\x1f" + r.method + "\x1f" + to_string(r.setting);
    if (r.skipped) {
      ++skips[key];
      (void)scores[key];
    } else {
      scores[key].emplace_back(r.instance_id, r.score);
      (void)skips[key];
    }
  }
  ReportGrid grid;
  for (const auto& [key, per_instance] : scores) {
    auto parts = text::split(key, '\x1f');
    SystemSetting setting = setting_from_string(parts[2]);
    grid[parts[0]][parts[1]].reports[setting] =
        ScoreReport::from_scores(per_instance, skips[key], setting);
  }
  return grid;
}

inline std::vector<std::string> ordered_methods(
    const std::map<std::string, MethodTaskCell>& methods) {
  std::vector<std::string> names;
  for (const auto& [name, cell] : methods) names.push_back(name);
  std::stable_sort(names.begin(), names.end(), [](const auto& a, const auto& b) {
    if (method_rank(a) != method_rank(b)) return method_rank(a) < method_rank(b);
    return a < b;
  });
  return names;
}

// Mean across the settings present: both settings use their average; a
// single setting stands for itself.
inline std::optional<double> cell_mean(const MethodTaskCell& cell) {
  auto wi = cell.reports.find(SystemSetting::WithSystemMessage);
  auto wo = cell.reports.find(SystemSetting::WithoutSystemMessage);
  bool has_wi = wi != cell.reports.end() && wi->second.n_scored > 0;
  bool has_wo = wo != cell.reports.end() && wo->second.n_scored > 0;
  if (has_wi && has_wo)
    return average_over_settings(SettingPair{wi->second, wo->second}).average;
  if (has_wi) return wi->second.mean;
  if (has_wo) return wo->second.mean;
  return std::nullopt;
}

}  // namespace detail

// Markdown table in the main-results layout: one Score/Delta column pair per
// task, deltas relative to the standard row. Deltas are computed from
// unrounded averages; displayed scores are rounded to one decimal.
inline std::string render_table2_markdown(
    const std::vector<InstanceResult>& results, bool require_standard = false) {
  auto grid = detail::build_grid(results);
  if (grid.empty()) throw AggregateError("no results to report");

  std::vector<std::string> tasks;
  for (const auto& [task, methods] : grid) tasks.push_back(task);

  // Union of methods across tasks, canonical order.
  std::map<std::string, detail::MethodTaskCell> all_methods;
  for (const auto& [task, methods] : grid)
    for (const auto& [m, cell] : methods) all_methods[m];
  auto method_names = detail::ordered_methods(all_methods);

  std::map<std::string, std::optional<double>> standard_mean;
  for (const auto& task : tasks) {
    auto it = grid[task].find("standard");
    standard_mean[task] =
        it == grid[task].end() ? std::nullopt : detail::cell_mean(it->second);
    if (!standard_mean[task]) {
      if (require_standard)
        throw AggregateError("no standard baseline results for task '" + task +
                             "'; deltas cannot be computed");
      std::cerr << "warning: no standard baseline for task '" << task
                << "'; deltas omitted\n";
    }
  }

  std::ostringstream md;
  md << "| Method |";
  for (const auto& task : tasks) md << " " << task << " Score (%) | Delta |";
  md << "\n|---|";
  for (size_t i = 0; i < tasks.size(); ++i) md << "---|---|";
  md << "\n";
  for (const auto& method : method_names) {
    md << "| " << method << " |";
    for (const auto& task : tasks) {
      auto mit = grid[task].find(method);
      std::optional<double> mean =
          mit == grid[task].end() ? std::nullopt : detail::cell_mean(mit->second);
      if (!mean) {
        md << " - | - |";
        continue;
      }
      md << " " << detail::pct1(*mean) << " |";
      if (standard_mean[task]) {
        double delta = relative_delta(*mean * 100.0, *standard_mean[task] * 100.0);
        md << " " << detail::delta_str(delta) << " |";
      } else {
        md << " - |";
      }
    }
    md << "\n";
  }
  return md.str();
}

// Per-setting tables: with / without system message, average and max.
inline std::string render_per_setting_markdown(
    const std::vector<InstanceResult>& results) {
  auto grid = detail::build_grid(results);
  if (grid.empty()) throw AggregateError("no results to report");
  std::ostringstream md;
  for (const auto& [task, methods] : grid) {
    md << "## " << task << "\n\n";
    md << "| Method | w/ system message | w/o system message | average | max |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& method : detail::ordered_methods(methods)) {
      const auto& cell = methods.at(method);
      auto wi = cell.reports.find(SystemSetting::WithSystemMessage);
      auto wo = cell.reports.find(SystemSetting::WithoutSystemMessage);
      bool has_wi = wi != cell.reports.end() && wi->second.n_scored > 0;
      bool has_wo = wo != cell.reports.end() && wo->second.n_scored > 0;
      md << "| " << method << " | "
         << (has_wi ? detail::pct1(wi->second.mean) : std::string("-")) << " | "
         << (has_wo ? detail::pct1(wo->second.mean) : std::string("-")) << " | ";
      if (has_wi && has_wo) {
        Aggregate agg = average_over_settings(SettingPair{wi->second, wo->second});
        md << detail::pct1(agg.average) << " | " << detail::pct1(agg.max) << " |\n";
      } else {
        md << "- | - |\n";
      }
    }
    md << "\n";
  }
  return md.str();
}

inline std::string render_summary_csv(const std::vector<InstanceResult>& results) {
  auto grid = detail::build_grid(results);
  std::ostringstream csv;
  csv << "task,method,setting,n_scored,n_skipped,mean_score,score_pct\n";
  for (const auto& [task, methods] : grid) {
    for (const auto& method : detail::ordered_methods(methods)) {
      const auto& cell = methods.at(method);
      for (auto setting : {SystemSetting::WithSystemMessage,
                           SystemSetting::WithoutSystemMessage}) {
        auto it = cell.reports.find(setting);
        if (it == cell.reports.end()) continue;
        const auto& r = it->second;
        csv << task << ',' << method << ',' << to_string(setting) << ','
            << r.n_scored << ',' << r.n_skipped << ',';
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", r.mean);
        csv << buf << ',' << (r.n_scored > 0 ? detail::pct1(r.mean) : "-") << "\n";
      }
    }
  }
  return csv.str();
}

inline std::string render_personas_csv(const std::vector<InstanceResult>& results) {
  std::vector<ParsedTranscript> transcripts;
  for (const auto& r : results)
    for (const auto& o : r.outcomes)
      if (o.parsed) transcripts.push_back(*o.parsed);
  PersonaFrequency freq = persona_frequencies(transcripts);
  // Sort by count descending, then name.
  std::vector<std::pair<std::string, int>> rows(freq.counts.begin(),
                                                freq.counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::ostringstream csv;
  csv << "persona,count,total_transcripts\n";
  for (const auto& [name, count] : rows)
    csv << name << ',' << count << ',' << freq.total_transcripts << "\n";
  return csv.str();
}

inline std::string render_early_termination_csv(
    const std::vector<InstanceResult>& results) {
  std::vector<EarlyTerminationObservation> obs;
  for (const auto& r : results) {
    bool has_transcript = false;
    for (const auto& o : r.outcomes)
      if (o.parsed) has_transcript = true;
    if (!has_transcript) continue;
    obs.push_back({r.task, r.setting, r.early_terminated});
  }
  auto rows = early_termination_stats(obs);
  std::ostringstream csv;
  csv << "task,setting,early_terminated,total\n";
  for (const auto& row : rows)
    csv << row.task << ',' << to_string(row.setting) << ',' << row.terminated
        << ',' << row.total << "\n";
  return csv.str();
}

// ---------------------------------------------------------------------------
// Run driver

struct RunArtifacts {
  std::filesystem::path run_dir;
  std::string run_id;
  std::vector<InstanceResult> results;
  bool dry_run = false;
};

namespace detail {

inline std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return spp::detail::sha256_hex(ss.str());
}

}  // namespace detail

// Run id: hash of the canonical config plus dataset and template-manifest
// checksums, so distinct inputs land in distinct directories.
inline std::string compute_run_id(const RunConfig& config) {
  nlohmann::json j = config;
  std::string material = j.dump();
  material += detail::file_sha256(config.dataset_path);
  material += detail::file_sha256(
      std::filesystem::path(config.templates_dir) / "manifest.json");
  return spp::detail::sha256_hex(material).substr(0, 12);
}

// Executes a full run. `inner_backend` supplies the live backend for
// record/passthrough modes (the CLI passes an HTTP client; tests pass
// scripted backends). Replay mode needs no inner backend. With dry_run the
// prompts are rendered and written but no backend call is made.
inline RunArtifacts run_experiment(const RunConfig& config,
                                   ChatBackend* inner_backend = nullptr,
                                   bool dry_run = false,
                                   std::function<std::string()> clock = iso8601_utc_now) {
  validate(config);

  // Everything that can fail validation does so before the first LLM call.
  PromptTemplateSet templates = PromptTemplateSet::load(config.templates_dir);
  std::vector<TaskInstance> instances =
      load_dataset(config.dataset_path, config.task, config.expected_count);
  std::vector<Strategy> strategies = config.parsed_methods();

  RunArtifacts artifacts;
  artifacts.run_id = compute_run_id(config);
  artifacts.run_dir =
      std::filesystem::path(config.output_dir) / artifacts.run_id;
  artifacts.dry_run = dry_run;
  std::filesystem::create_directories(artifacts.run_dir);

  {
    nlohmann::ordered_json config_echo = config;
    atomic_write_file(artifacts.run_dir / "config.json", [&](std::ostream& out) {
      out << config_echo.dump(2) << "\n";
    });
  }

  if (dry_run) {
    atomic_write_file(artifacts.run_dir / "prompts.jsonl", [&](std::ostream& out) {
      for (const auto& strategy : strategies) {
        for (auto setting : config.system_message_settings) {
          GenerationParams params = config.params;
          if (setting == SystemSetting::WithSystemMessage) {
            if (!params.system_message)
              params.system_message = GenerationParams::kDefaultSystemMessage;
          } else {
            params.system_message.reset();
          }
          for (const auto& inst : instances) {
            PromptBundle bundle = render_prompt(
                strategy, render_task_text(inst), templates, params, inst.id);
            nlohmann::ordered_json line = bundle;
            line["setting"] = to_string(setting);
            out << line.dump() << "\n";
          }
        }
      }
    });
    return artifacts;
  }

  std::unique_ptr<ChatBackend> owned;
  ChatBackend* backend = nullptr;
  if (config.replay_mode == ReplayMode::Passthrough) {
    if (inner_backend == nullptr)
      throw ConfigError("passthrough mode requires a live backend");
    backend = inner_backend;
  } else {
    owned = std::make_unique<RecordReplayBackend>(
        config.replay_mode, config.replay_store, inner_backend, clock);
    backend = owned.get();
  }

  struct Job {
    const Strategy* strategy;
    SystemSetting setting;
    const TaskInstance* instance;
  };
  std::vector<Job> jobs;
  for (const auto& strategy : strategies)
    for (auto setting : config.system_message_settings)
      for (const auto& inst : instances) jobs.push_back({&strategy, setting, &inst});

  WorkerPool pool(config.backend.max_parallel_requests);
  std::vector<std::future<InstanceResult>> futures;
  futures.reserve(jobs.size());
  for (const auto& job : jobs) {
    futures.push_back(pool.submit([&, job] {
      return run_instance(*job.instance, *job.strategy, job.setting, config,
                          *backend, templates);
    }));
  }

  // results.jsonl is written incrementally in job order; content is
  // deterministic, so repeated replay runs produce identical bytes.
  std::ofstream results_out(artifacts.run_dir / "results.jsonl",
                            std::ios::binary | std::ios::trunc);
  if (!results_out)
    throw std::runtime_error("cannot write results.jsonl in " +
                             artifacts.run_dir.string());
  for (auto& fut : futures) {
    InstanceResult r = fut.get();
    nlohmann::ordered_json line = r;
    results_out << line.dump() << "\n";
    results_out.flush();
    artifacts.results.push_back(std::move(r));
  }
  results_out.close();

  atomic_write_file(artifacts.run_dir / "summary.csv", [&](std::ostream& out) {
    out << render_summary_csv(artifacts.results);
  });
  atomic_write_file(artifacts.run_dir / "table2.md", [&](std::ostream& out) {
    out << render_table2_markdown(artifacts.results);
  });
  atomic_write_file(artifacts.run_dir / "personas.csv", [&](std::ostream& out) {
    out << render_personas_csv(artifacts.results);
  });
  atomic_write_file(artifacts.run_dir / "early_termination.csv",
                    [&](std::ostream& out) {
                      out << render_early_termination_csv(artifacts.results);
                    });
  return artifacts;
}

// Loads results.jsonl files back for reporting.
inline std::vector<InstanceResult> load_results(
    const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw ConfigError("no results files given");
  std::vector<InstanceResult> out;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open results file: " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      try {
        nlohmann::json j = nlohmann::json::parse(line);
        out.push_back(j.get<InstanceResult>());
      } catch (const std::exception& e) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                          ": malformed result line: " + e.what());
      }
    }
  }
  return out;
}

}  // namespace spp
