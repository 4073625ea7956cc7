#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdt/core.hpp"
#include "mdt/llm.hpp"
#include "mdt/prompts.hpp"

namespace mdt {

struct ReviewOptions {
    int max_parse_retries = 2;
    const PromptTemplates* prompts = nullptr;
    double temperature = 0.7;
    int max_tokens = 1024;
};

struct ReviewOutcome {
    std::string final_choice_id; // always one of the case's options
    std::string notes;           // the reviewer's full reply
    bool overrode_proposal = false;
    bool override_failed = false; // reviewer answered with something unusable
};

// Safety and Ethics Reviewer: final filtering pass over the consultation
// outcome. The reviewer may change the answer id; an id outside the option
// set (or an unparseable reply after the retries) falls back to the
// proposed choice with `override_failed` set.
ReviewOutcome safety_review(const PatientCase& pcase, const RoundSummary& final_summary,
                            const std::string& proposed_choice, Backend& backend,
                            const ReviewOptions& options = {});

// "Answer ID: {X}: {content}" -> raw id token, or nullopt.
std::optional<std::string> parse_answer_id(const std::string& reply);

} // namespace mdt
