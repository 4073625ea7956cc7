#pragma once

#include <string>

namespace mdt {

// Static prompt scaffolding for every agent role. Each template is a plain
// text block; the engine assembles round-dependent sections (case text, pool
// summaries, retrieved experience) around these. Editable: export the set to
// a directory, tweak the files, and load the directory back.
struct PromptTemplates {
    std::string triage_system;          // Primary Care Doctor, with few-shot examples
    std::string specialist_system;      // "{{role}}" / "{{specialty}}" placeholders
    std::string lead_system;            // Lead Physician categorizer
    std::string cot_correct_system;     // Chain-of-Thought Reviewer, correct outcome
    std::string cot_incorrect_system;   // Chain-of-Thought Reviewer, incorrect outcome
    std::string safety_system;          // Safety and Ethics Reviewer

    static const PromptTemplates& defaults();
    // Missing files fall back to the built-in text.
    static PromptTemplates from_dir(const std::string& dir);
    void export_dir(const std::string& dir) const;
};

// One-line specialty blurb for each specialist role name.
const std::string& specialty_description(const std::string& role_name);

// Replaces every "{{key}}" in the template.
std::string render_template(std::string text, const std::string& key, const std::string& value);

} // namespace mdt
