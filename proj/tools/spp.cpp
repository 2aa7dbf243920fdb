// Command-line runner for the prompting-strategy evaluation harness.
//
// Verbs:
//   run      — execute a sweep described by a JSON config (flags override)
//   record   — run with the replay store in record mode
//   report   — rebuild the result tables from one or more results.jsonl
//   validate — check a dataset file against the schema and invariants

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spp/backend.hpp"
#include "spp/runner.hpp"
#include "spp/tasks.hpp"

namespace fs = std::filesystem;

namespace {

// Paths inside a config file are taken relative to the file's directory so
// configs stay checked-in and location-independent.
std::string resolve_path(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (base / path).lexically_normal().string();
}

spp::RunConfig load_config(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw spp::ConfigError("cannot open config: " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw spp::ConfigError("malformed config " + config_path + ": " + e.what());
  }
  spp::RunConfig config = j.get<spp::RunConfig>();
  fs::path base = fs::path(config_path).parent_path();
  config.dataset_path = resolve_path(base, config.dataset_path);
  config.templates_dir = resolve_path(base, config.templates_dir);
  config.output_dir = resolve_path(base, config.output_dir);
  if (!config.replay_store.empty())
    config.replay_store = resolve_path(base, config.replay_store);
  return config;
}

struct RunFlags {
  std::string config_path;
  std::string task;
  std::string task_label;
  std::string dataset;
  std::optional<int> expected_count;
  std::string methods;   // comma-separated
  std::string settings;  // comma-separated: with,without
  std::string model;
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;
  std::string replay_mode;
  std::string replay_store;
  std::string endpoint_url;
  std::string api_key_env;
  std::optional<int> max_parallel;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string templates_dir;
  bool shuffle = false;
  bool dry_run = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run config")->required();
  cmd->add_option("--task", f.task, "task kind (overrides config)");
  cmd->add_option("--task-label", f.task_label, "report label for the task");
  cmd->add_option("--dataset", f.dataset, "dataset JSONL path");
  cmd->add_option("--expected-count", f.expected_count, "required instance count");
  cmd->add_option("--methods", f.methods, "comma-separated strategy specs");
  cmd->add_option("--settings", f.settings, "comma-separated: with,without");
  cmd->add_option("--model", f.model, "model name");
  cmd->add_option("--temperature", f.temperature, "sampling temperature");
  cmd->add_option("--top-p", f.top_p, "nucleus sampling probability");
  cmd->add_option("--max-tokens", f.max_tokens, "generation token limit");
  cmd->add_option("--replay-mode", f.replay_mode, "record | replay | passthrough");
  cmd->add_option("--replay-store", f.replay_store, "replay store JSONL path");
  cmd->add_option("--endpoint-url", f.endpoint_url, "chat completions endpoint");
  cmd->add_option("--api-key-env", f.api_key_env, "env var holding the API key");
  cmd->add_option("--max-parallel", f.max_parallel, "max in-flight requests");
  cmd->add_option("--seed", f.seed, "shuffle seed");
  cmd->add_option("--output-dir", f.output_dir, "run output directory");
  cmd->add_option("--templates-dir", f.templates_dir, "prompt template directory");
  cmd->add_flag("--shuffle-questions", f.shuffle, "shuffle trivia questions");
  cmd->add_flag("--dry-run", f.dry_run, "render prompts without any backend call");
}

spp::RunConfig merge_flags(const RunFlags& f) {
  spp::RunConfig config = load_config(f.config_path);
  if (!f.task.empty()) config.task = spp::task_kind_from_string(f.task);
  if (!f.task_label.empty()) config.task_label = f.task_label;
  if (!f.dataset.empty()) config.dataset_path = f.dataset;
  if (f.expected_count) config.expected_count = *f.expected_count;
  if (!f.methods.empty()) {
    config.methods.clear();
    for (auto& m : spp::text::split(f.methods, ','))
      if (!spp::text::trim(m).empty()) config.methods.push_back(spp::text::trim(m));
  }
  if (!f.settings.empty()) {
    config.system_message_settings.clear();
    for (auto& s : spp::text::split(f.settings, ','))
      if (!spp::text::trim(s).empty())
        config.system_message_settings.push_back(
            spp::setting_from_string(spp::text::trim(s)));
  }
  if (!f.model.empty()) {
    config.params.model_name = f.model;
    config.backend.model_name = f.model;
  }
  if (f.temperature) config.params.temperature = *f.temperature;
  if (f.top_p) config.params.top_p = *f.top_p;
  if (f.max_tokens) config.params.max_tokens = *f.max_tokens;
  if (!f.replay_mode.empty())
    config.replay_mode = spp::replay_mode_from_string(f.replay_mode);
  if (!f.replay_store.empty()) config.replay_store = f.replay_store;
  if (!f.endpoint_url.empty()) config.backend.endpoint_url = f.endpoint_url;
  if (!f.api_key_env.empty()) config.backend.api_key_env_var = f.api_key_env;
  if (f.max_parallel) config.backend.max_parallel_requests = *f.max_parallel;
  if (f.seed) config.seed = *f.seed;
  if (!f.output_dir.empty()) config.output_dir = f.output_dir;
  if (!f.templates_dir.empty()) config.templates_dir = f.templates_dir;
  if (f.shuffle) config.shuffle_questions = true;
  return config;
}

int do_run(const RunFlags& flags, std::optional<spp::ReplayMode> forced_mode) {
  spp::RunConfig config = merge_flags(flags);
  if (forced_mode) config.replay_mode = *forced_mode;

  std::unique_ptr<spp::HttpChatBackend> live;
  spp::ChatBackend* inner = nullptr;
  if (!flags.dry_run && config.replay_mode != spp::ReplayMode::Replay) {
    live = std::make_unique<spp::HttpChatBackend>(config.backend);
    inner = live.get();
  }
  spp::RunArtifacts artifacts =
      spp::run_experiment(config, inner, flags.dry_run);
  std::cout << "run " << artifacts.run_id << " -> " << artifacts.run_dir.string()
            << "\n";
  if (!flags.dry_run) {
    int skipped = 0;
    for (const auto& r : artifacts.results) skipped += r.skipped ? 1 : 0;
    std::cout << artifacts.results.size() << " results, " << skipped
              << " skipped\n";
  }
  return 0;
}

int do_report(const std::vector<std::string>& results_paths,
              const std::string& output_dir, bool require_standard) {
  std::vector<fs::path> paths(results_paths.begin(), results_paths.end());
  auto results = spp::load_results(paths);
  fs::create_directories(output_dir);
  std::string table2 = spp::render_table2_markdown(results, require_standard);
  std::string per_setting = spp::render_per_setting_markdown(results);
  std::string summary = spp::render_summary_csv(results);
  spp::atomic_write_file(fs::path(output_dir) / "table2.md",
                         [&](std::ostream& out) { out << table2; });
  spp::atomic_write_file(fs::path(output_dir) / "per_setting.md",
                         [&](std::ostream& out) { out << per_setting; });
  spp::atomic_write_file(fs::path(output_dir) / "summary.csv",
                         [&](std::ostream& out) { out << summary; });
  std::cout << table2;
  return 0;
}

int do_validate(const std::string& dataset, const std::string& kind,
                std::optional<int> expected_count) {
  std::optional<size_t> expected;
  if (expected_count) expected = static_cast<size_t>(*expected_count);
  auto violations = spp::validate_dataset_file(
      dataset, spp::task_kind_from_string(kind), expected);
  if (violations.empty()) {
    std::cout << dataset << ": OK\n";
    return 0;
  }
  for (const auto& v : violations) {
    if (v.line > 0)
      std::cerr << dataset << ":" << v.line << ": " << v.message << "\n";
    else
      std::cerr << dataset << ": " << v.message << "\n";
  }
  std::cerr << violations.size() << " violation(s)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-persona prompting evaluation harness"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment sweep");
  add_run_flags(run_cmd, run_flags);

  RunFlags record_flags;
  CLI::App* record_cmd =
      app.add_subcommand("record", "run with the replay store in record mode");
  add_run_flags(record_cmd, record_flags);

  std::vector<std::string> results_paths;
  std::string report_output = "report";
  bool require_standard = false;
  CLI::App* report_cmd = app.add_subcommand("report", "rebuild result tables");
  report_cmd->add_option("--results", results_paths, "results.jsonl files")
      ->required()
      ->expected(-1);
  report_cmd->add_option("--output-dir", report_output, "where to write tables");
  report_cmd->add_flag("--require-standard", require_standard,
                       "fail when the standard baseline is missing");

  std::string v_dataset, v_kind;
  std::optional<int> v_expected;
  CLI::App* validate_cmd = app.add_subcommand("validate", "check a dataset file");
  validate_cmd->add_option("--dataset", v_dataset, "dataset JSONL path")->required();
  validate_cmd->add_option("--kind", v_kind, "task kind")->required();
  validate_cmd->add_option("--expected-count", v_expected, "required instance count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return do_run(run_flags, std::nullopt);
    if (record_cmd->parsed()) return do_run(record_flags, spp::ReplayMode::Record);
    if (report_cmd->parsed())
      return do_report(results_paths, report_output, require_standard);
    if (validate_cmd->parsed()) return do_validate(v_dataset, v_kind, v_expected);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
