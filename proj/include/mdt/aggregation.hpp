#pragma once

#include <string>
#include <vector>

#include "mdt/core.hpp"
#include "mdt/llm.hpp"
#include "mdt/prompts.hpp"

namespace mdt {

struct AggregationOptions {
    int max_parse_retries = 2;
    const PromptTemplates* prompts = nullptr;
    double temperature = 0.7;
    int max_tokens = 1024;
};

// Lead Physician: digest one round's statements into the four categories.
// Votes are always derived from the statements, never from the reply, and
// the conflict/unanimity invariant is enforced after parsing. When the reply
// cannot be parsed after the retries, a mechanical fallback digest is built
// and "FallbackSummary" is appended to `flags`.
RoundSummary summarize_round(const std::vector<Statement>& statements, const PatientCase& pcase,
                             Backend& backend, const AggregationOptions& options = {},
                             std::vector<std::string>* flags = nullptr);

// Appends, enforcing round contiguity and summary invariants.
void append_summary(HistoricalSharedPool& pool, RoundSummary summary);

// The statements block sent to the Lead Physician, in the prescribed
// {"<Agent Name>": {"Reasoning": ..., "Choice": "<id>: <content>"}} shape.
std::string render_statements_for_lead(const std::vector<Statement>& statements);

// Parses the four-category JSON object out of a reply (code fences and
// surrounding prose tolerated). Throws ParseFailure.
RoundSummary parse_lead_reply(const std::string& reply, int round);

// Digest used when the Lead Physician's output is unusable.
RoundSummary mechanical_summary(const std::vector<Statement>& statements);

} // namespace mdt
