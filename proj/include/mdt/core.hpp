#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdt/errors.hpp"

namespace mdt {

// ── Roles ──────────────────────────────────────────────────────

// Specialist roles take part in the discussion; auxiliary roles run it.
enum class Role {
    GeneralInternalMedicine,
    GeneralSurgeon,
    Pediatrician,
    ObstetricianGynecologist,
    Radiologist,
    Neurologist,
    Pathologist,
    Pharmacist,
    PrimaryCareDoctor,
    LeadPhysician,
    ChainOfThoughtReviewer,
    SafetyEthicsReviewer,
};

const std::string& role_name(Role role);
bool is_specialist(Role role);
const std::vector<Role>& specialist_roles();
// Always present in a triage decision regardless of the case.
const std::vector<Role>& mandatory_roles();
// Normalized exact-name match (trim, case-fold, collapse inner whitespace).
std::optional<Role> parse_role(const std::string& name);

// ── Patient case ───────────────────────────────────────────────

struct PatientCase {
    std::string case_id;
    std::string background;
    std::string question;
    // Ordered: option ids keep their dataset order ("A".."E", or yes/no/maybe).
    std::vector<std::pair<std::string, std::string>> options;
    std::optional<std::string> gold_answer; // harness contexts only

    bool has_option(const std::string& id) const;
    const std::string* option_text(const std::string& id) const;
    // Throws std::invalid_argument when invariants are broken.
    void validate() const;
};

// Canonical JSON form (documented in docs/formats.md).
std::string serialize_case(const PatientCase& pcase);
PatientCase parse_case(const std::string& text);

// One-line {"A": "Ampicillin", ...} block as shown to agents.
std::string render_options_json(const PatientCase& pcase);

// Trim, strip surrounding braces/brackets/quotes/punctuation. Case is kept;
// matching against option keys is case-insensitive (see match_option_id).
std::string normalize_option_id(const std::string& raw);

// Resolve a raw reply token to the case's canonical option key, or nullopt.
std::optional<std::string> match_option_id(const PatientCase& pcase, const std::string& raw);

// ── Statements and round summaries ─────────────────────────────

struct Statement {
    int round = 0;
    Role role = Role::GeneralInternalMedicine; // must be a specialist
    std::string reasoning;
    std::string choice_id;   // canonical option key of the case
    std::string choice_text; // option text as echoed by the agent
};

// round >= 1, specialist role, choice_id is a key of pcase.options.
void validate_statement(const Statement& s, const PatientCase& pcase);

// The lead physician's four-category digest of one round.
struct RoundSummary {
    int round = 0;
    std::vector<std::string> consistency;
    std::vector<std::string> conflict;     // empty iff all votes agree
    std::vector<std::string> independence;
    std::vector<std::string> integration;  // never empty
    std::map<std::string, std::string> votes; // role name -> choice_id, engine-derived
};

bool votes_unanimous(const RoundSummary& s);
// Throws std::invalid_argument when the four-category invariants are broken.
void validate_round_summary(const RoundSummary& s);

// ── Historical shared pool ─────────────────────────────────────

// Append-only per-consultation store of round summaries, rounds contiguous
// from 1. The only cross-agent memory in the protocol.
class HistoricalSharedPool {
public:
    bool empty() const { return entries_.empty(); }
    size_t size() const { return entries_.size(); }
    int last_round() const { return static_cast<int>(entries_.size()); }

    const std::vector<RoundSummary>& rounds() const { return entries_; }
    // Throws MissingSummary when the round is absent.
    const RoundSummary& summary_for(int round) const;

    // Validates the summary and that its round extends the pool by one.
    void append(RoundSummary summary);

private:
    std::vector<RoundSummary> entries_;
};

// Canonical JSON text: rounds ascending, categories in the fixed order
// consistency, conflict, independence, integration, then "_votes".
std::string serialize_pool(const HistoricalSharedPool& pool);
HistoricalSharedPool parse_pool(const std::string& text);

// Same shape without the "_votes" key; this is what agents get to see.
std::string render_summary_for_prompt(const RoundSummary& s);

// ── Consultation result ────────────────────────────────────────

enum class Termination { Consensus, MajorityRule, TieRandom };

const std::string& termination_name(Termination t);
std::optional<Termination> parse_termination(const std::string& name);

struct ConsultationResult {
    std::string case_id;
    std::string final_choice_id; // the delivered conclusion
    Termination termination = Termination::Consensus;
    int rounds_used = 0;
    HistoricalSharedPool pool;
    std::vector<std::vector<Statement>> per_round_statements;
    bool kb_consulted = false;
    uint64_t rng_seed = 0;
};

std::string serialize_result(const ConsultationResult& r);

} // namespace mdt
