#pragma once

// Prompt template loading. Templates are the method: they live in versioned
// data files (one UTF-8 file per field) with SHA-256 checksums pinned in a
// manifest, never inlined in code.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "spp/detail/sha256.hpp"
#include "spp/text.hpp"

namespace spp {

struct TemplateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PromptTemplateSet {
  std::string spp_system_principle;
  std::string spp_demo_1;  // two-persona demonstration (arithmetic game)
  std::string spp_demo_2;  // multi-persona demonstration (constrained poem)
  std::string spp_task_prefix;
  std::string profile_variant_overrides;
  std::string fixed_persona_overrides;
  std::string cot_template;
  std::string self_refine_feedback_template;
  std::string self_refine_refine_template;

  static const std::vector<std::pair<std::string, std::string PromptTemplateSet::*>>&
  fields() {
    static const std::vector<std::pair<std::string, std::string PromptTemplateSet::*>>
        kFields = {
            {"spp_system_principle", &PromptTemplateSet::spp_system_principle},
            {"spp_demo_1", &PromptTemplateSet::spp_demo_1},
            {"spp_demo_2", &PromptTemplateSet::spp_demo_2},
            {"spp_task_prefix", &PromptTemplateSet::spp_task_prefix},
            {"profile_variant_overrides", &PromptTemplateSet::profile_variant_overrides},
            {"fixed_persona_overrides", &PromptTemplateSet::fixed_persona_overrides},
            {"cot_template", &PromptTemplateSet::cot_template},
            {"self_refine_feedback_template", &PromptTemplateSet::self_refine_feedback_template},
            {"self_refine_refine_template", &PromptTemplateSet::self_refine_refine_template},
        };
    return kFields;
  }

  // Loads one file per field ("<field>.txt") and verifies every file against
  // the SHA-256 recorded in manifest.json. A missing or mismatching checksum
  // is an error: prompt bytes are part of the experiment definition.
  static PromptTemplateSet load(const std::filesystem::path& dir) {
    PromptTemplateSet set;
    std::filesystem::path manifest_path = dir / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw TemplateError("cannot open template manifest: " + manifest_path.string());
    nlohmann::json manifest;
    try {
      mf >> manifest;
    } catch (const std::exception& e) {
      throw TemplateError("malformed template manifest: " + std::string(e.what()));
    }
    const auto& files = manifest.at("files");
    for (const auto& [name, member] : fields()) {
      std::filesystem::path p = dir / (name + ".txt");
      std::ifstream in(p, std::ios::binary);
      if (!in) throw TemplateError("missing template file: " + p.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      std::string content = ss.str();
      std::string digest = detail::sha256_hex(content);
      std::string file_key = name + ".txt";
      if (!files.contains(file_key))
        throw TemplateError("template not pinned in manifest: " + file_key);
      std::string pinned = files.at(file_key).get<std::string>();
      if (pinned != digest)
        throw TemplateError("template checksum mismatch for " + file_key +
                            ": manifest " + pinned + ", file " + digest);
      set.*member = content;
    }
    set.validate();
    return set;
  }

  // Structural requirements on the loaded text.
  void validate() const {
    if (spp_system_principle.find(
            "When faced with a task, begin by identifying the participants") ==
        std::string::npos)
      throw TemplateError(
          "spp_system_principle missing the participant-identification clause");
    if (spp_task_prefix.find(
            "identify the participants and collaboratively solve the following "
            "task step by step") == std::string::npos)
      throw TemplateError("spp_task_prefix missing the collaborative-solve clause");
    if (cot_template.find("{task}") == std::string::npos)
      throw TemplateError("cot_template missing {task} placeholder");
    if (self_refine_feedback_template.find("{task}") == std::string::npos ||
        self_refine_feedback_template.find("{answer}") == std::string::npos)
      throw TemplateError("self_refine_feedback_template missing placeholders");
    if (self_refine_refine_template.find("{task}") == std::string::npos ||
        self_refine_refine_template.find("{answer}") == std::string::npos ||
        self_refine_refine_template.find("{feedback}") == std::string::npos)
      throw TemplateError("self_refine_refine_template missing placeholders");
  }
};

// Variant override files replace individual sections of the base SPP prompt.
// Format: lines of the form "[section_name]" start a section; everything up
// to the next header belongs to it. Recognized sections: system_principle,
// demo_1, demo_2, task_prefix. Sections not present fall back to the base
// template fields.
inline std::map<std::string, std::string> parse_override_sections(
    const std::string& content) {
  std::map<std::string, std::string> sections;
  std::string current;
  std::string body;
  auto flush = [&]() {
    if (!current.empty()) {
      // Strip one trailing newline left by the section layout.
      while (!body.empty() && (body.back() == '\n' || body.back() == '\r'))
        body.pop_back();
      sections[current] = body;
    }
    body.clear();
  };
  for (const auto& line : text::split_lines(content)) {
    std::string trimmed = text::trim(line);
    if (trimmed.size() >= 2 && trimmed.front() == '[' && trimmed.back() == ']') {
      flush();
      current = trimmed.substr(1, trimmed.size() - 2);
      continue;
    }
    if (current.empty()) continue;  // preamble before the first header
    body += line;
    body += '\n';
  }
  flush();
  return sections;
}

}  // namespace spp
