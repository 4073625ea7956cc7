#pragma once

#include <string>
#include <vector>

#include "mdt/core.hpp"
#include "mdt/llm.hpp"
#include "mdt/prompts.hpp"

namespace mdt {

struct TriageDecision {
    std::string reasons;       // free text preceding the role list
    std::vector<Role> roles;   // ordered, unique, specialists only
};

// roles within the specialist set, mandatory roles present, 2..8 entries.
void validate_triage_decision(const TriageDecision& d);

// Extracts the bracketed, brace-delimited role list from a reply and the
// reasons text before it. Names match the specialist set by normalized exact
// name only. Throws ParseFailure when no list is found or a name is unknown.
TriageDecision parse_role_list(const std::string& reply);

struct TriageOptions {
    int max_parse_retries = 2; // re-asks with a format reminder
    const PromptTemplates* prompts = nullptr; // null = defaults
    double temperature = 0.7;
    int max_tokens = 1024;
};

// Ask the Primary Care Doctor to pick the specialist subset for a case.
// Missing mandatory roles are injected (and noted in `flags`) rather than
// rejected. Throws ParseFailure after the retries are exhausted.
TriageDecision triage(const PatientCase& pcase, Backend& backend, const TriageOptions& options = {},
                      std::vector<std::string>* flags = nullptr);

std::string build_triage_prompt(const PatientCase& pcase);

} // namespace mdt
