#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mdt/aggregation.hpp"
#include "mdt/core.hpp"
#include "mdt/knowledge.hpp"
#include "mdt/llm.hpp"
#include "mdt/prompts.hpp"

namespace mdt {

// Specialists at round r >= 3 see exactly the summaries of rounds r-1 and
// r-2; protocol constant, not a knob.
constexpr int kResidualWindow = 2;

// Heading of the retrieved-experience block inside specialist prompts.
// Tests scan for it; round-1 prompts must never contain it.
extern const char* const kKbBlockHeader;

enum class KbPolicy { Disabled, Enabled };

struct ConsultationConfig {
    int max_rounds = 10;
    uint64_t rng_seed = 0;
    KbPolicy kb_policy = KbPolicy::Disabled;
    size_t retrieval_k = 5;
    RetrievalMode retrieval_mode = RetrievalMode::PerKb;
    bool parallel_specialists = false; // per-round fan-out; results stay role-ordered
    int max_parse_retries = 2;
    double temperature = 0.7;
    int max_tokens = 1024;
    const PromptTemplates* prompts = nullptr;
};

struct KnowledgeHandle {
    KbStore* correct_kb = nullptr;
    KbStore* chain_kb = nullptr;
};

// run_consultation output: the protocol result plus diagnostics that belong
// in the per-case run log.
struct ConsultationRun {
    ConsultationResult result;
    std::vector<std::string> flags;
    std::string post_hoc_reflection; // non-empty only after a round-1-consensus reflection
};

// True iff every statement picked the same option id. Statements must be
// non-empty and share one round.
bool check_consensus(const std::vector<Statement>& statements);

// Plurality winner, or a seeded uniform pick among tied leaders.
std::pair<std::string, Termination> decide_final(const std::vector<Statement>& statements,
                                                 std::mt19937_64& rng);

// Uniform integer in [0, n) by rejection sampling; no modulo bias.
uint64_t bounded_uniform(std::mt19937_64& rng, uint64_t n);

// Renders one specialist's prompt for a round. Round 1 sees the case only;
// round 2 adds the round-1 summary; later rounds see exactly the previous
// two summaries. kb_snippets must be empty for round 1.
ChatRequest build_specialist_prompt(const PatientCase& pcase, Role role, int round,
                                    const HistoricalSharedPool& pool,
                                    const std::optional<std::string>& kb_snippets,
                                    const ConsultationConfig& config);

// "Choice: {X}: {content}" (brace and colon variants tolerated); the id must
// resolve to one of the case's options. nullopt when no usable choice line
// exists.
std::optional<Statement> parse_statement(const std::string& reply, const PatientCase& pcase, int round,
                                         Role role);

std::string render_kb_block(const RetrievalResult& hits);

// The multi-round residual-discussion loop: per-round specialist statements,
// lead-physician summary into the pool, consensus/termination handling, KB
// gating, and the post-hoc reflection after a first-round consensus.
ConsultationRun run_consultation(const PatientCase& pcase, const std::vector<Role>& roles,
                                 Backend& backend, const ConsultationConfig& config,
                                 const KnowledgeHandle& kb = {});

} // namespace mdt
