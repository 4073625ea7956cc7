#include "mdt/core.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mdt {

using ordered_json = nlohmann::ordered_json;

// ── Roles ──────────────────────────────────────────────────────

namespace {

const std::vector<std::pair<Role, std::string>>& role_table() {
    static const std::vector<std::pair<Role, std::string>> table = {
        {Role::GeneralInternalMedicine, "General Internal Medicine Doctor"},
        {Role::GeneralSurgeon, "General Surgeon"},
        {Role::Pediatrician, "Pediatrician"},
        {Role::ObstetricianGynecologist, "Obstetrician and Gynecologist"},
        {Role::Radiologist, "Radiologist"},
        {Role::Neurologist, "Neurologist"},
        {Role::Pathologist, "Pathologist"},
        {Role::Pharmacist, "Pharmacist"},
        {Role::PrimaryCareDoctor, "Primary Care Doctor"},
        {Role::LeadPhysician, "Lead Physician"},
        {Role::ChainOfThoughtReviewer, "Chain-of-Thought Reviewer"},
        {Role::SafetyEthicsReviewer, "Safety and Ethics Reviewer"},
    };
    return table;
}

std::string fold_name(const std::string& name) {
    std::string out;
    out.reserve(name.size());
    bool pending_space = false;
    for (unsigned char c : name) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

} // namespace

const std::string& role_name(Role role) {
    for (const auto& [r, name] : role_table())
        if (r == role) return name;
    throw std::invalid_argument("unknown role value");
}

bool is_specialist(Role role) {
    switch (role) {
        case Role::GeneralInternalMedicine:
        case Role::GeneralSurgeon:
        case Role::Pediatrician:
        case Role::ObstetricianGynecologist:
        case Role::Radiologist:
        case Role::Neurologist:
        case Role::Pathologist:
        case Role::Pharmacist:
            return true;
        default:
            return false;
    }
}

const std::vector<Role>& specialist_roles() {
    static const std::vector<Role> roles = {
        Role::GeneralInternalMedicine, Role::GeneralSurgeon,
        Role::Pediatrician,            Role::ObstetricianGynecologist,
        Role::Radiologist,             Role::Neurologist,
        Role::Pathologist,             Role::Pharmacist,
    };
    return roles;
}

const std::vector<Role>& mandatory_roles() {
    static const std::vector<Role> roles = {Role::Radiologist, Role::Pathologist, Role::Pharmacist};
    return roles;
}

std::optional<Role> parse_role(const std::string& name) {
    const std::string folded = fold_name(name);
    for (const auto& [role, canonical] : role_table())
        if (fold_name(canonical) == folded) return role;
    return std::nullopt;
}

// ── Patient case ───────────────────────────────────────────────

namespace {

bool is_strippable(char c) {
    switch (c) {
        case '{': case '}': case '[': case ']': case '(': case ')':
        case '"': case '\'': case '.': case ',': case ':': case ';':
        case '!': case '?': case '*': case '`':
            return true;
        default:
            return std::isspace(static_cast<unsigned char>(c)) != 0;
    }
}

std::string fold_token(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::string normalize_option_id(const std::string& raw) {
    size_t begin = 0;
    size_t end = raw.size();
    while (begin < end && is_strippable(raw[begin])) ++begin;
    while (end > begin && is_strippable(raw[end - 1])) --end;
    if (begin == end) throw EmptyAfterNormalization(raw);
    return raw.substr(begin, end - begin);
}

std::optional<std::string> match_option_id(const PatientCase& pcase, const std::string& raw) {
    std::string normalized;
    try {
        normalized = normalize_option_id(raw);
    } catch (const EmptyAfterNormalization&) {
        return std::nullopt;
    }
    const std::string folded = fold_token(normalized);
    for (const auto& [id, text] : pcase.options) {
        (void)text;
        if (fold_token(normalize_option_id(id)) == folded) return id;
    }
    return std::nullopt;
}

std::string serialize_case(const PatientCase& pcase) {
    ordered_json j;
    j["case_id"] = pcase.case_id;
    j["background"] = pcase.background;
    j["question"] = pcase.question;
    ordered_json options = ordered_json::object();
    for (const auto& [id, text] : pcase.options) options[id] = text;
    j["options"] = options;
    if (pcase.gold_answer) j["gold_answer"] = *pcase.gold_answer;
    return j.dump(2);
}

PatientCase parse_case(const std::string& text) {
    const ordered_json j = ordered_json::parse(text);
    PatientCase c;
    c.case_id = j.at("case_id").get<std::string>();
    c.background = j.value("background", std::string{});
    c.question = j.at("question").get<std::string>();
    for (const auto& [id, option] : j.at("options").items())
        c.options.emplace_back(id, option.get<std::string>());
    if (j.contains("gold_answer")) c.gold_answer = j["gold_answer"].get<std::string>();
    c.validate();
    return c;
}

std::string render_options_json(const PatientCase& pcase) {
    ordered_json j = ordered_json::object();
    for (const auto& [id, text] : pcase.options) j[id] = text;
    return j.dump();
}

bool PatientCase::has_option(const std::string& id) const {
    return option_text(id) != nullptr;
}

const std::string* PatientCase::option_text(const std::string& id) const {
    for (const auto& [key, text] : options)
        if (key == id) return &text;
    return nullptr;
}

void PatientCase::validate() const {
    if (options.empty()) throw std::invalid_argument("case " + case_id + ": options empty");
    std::set<std::string> seen;
    for (const auto& [id, text] : options) {
        (void)text;
        const std::string folded = fold_token(normalize_option_id(id));
        if (!seen.insert(folded).second)
            throw std::invalid_argument("case " + case_id + ": duplicate option id " + id);
    }
    if (gold_answer && !has_option(*gold_answer))
        throw std::invalid_argument("case " + case_id + ": gold answer " + *gold_answer +
                                    " is not an option key");
    if (question.empty()) throw std::invalid_argument("case " + case_id + ": question empty");
}

// ── Statements and round summaries ─────────────────────────────

void validate_statement(const Statement& s, const PatientCase& pcase) {
    if (s.round < 1) throw std::invalid_argument("statement round must be >= 1");
    if (!is_specialist(s.role))
        throw std::invalid_argument("statement role must be a specialist, got " + role_name(s.role));
    if (!pcase.has_option(s.choice_id))
        throw std::invalid_argument("statement choice " + s.choice_id + " is not an option of case " +
                                    pcase.case_id);
}

bool votes_unanimous(const RoundSummary& s) {
    std::set<std::string> distinct;
    for (const auto& [role, choice] : s.votes) {
        (void)role;
        distinct.insert(choice);
    }
    return distinct.size() == 1;
}

void validate_round_summary(const RoundSummary& s) {
    if (s.round < 1) throw std::invalid_argument("summary round must be >= 1");
    if (s.integration.empty()) throw std::invalid_argument("summary integration must be non-empty");
    if (s.votes.empty()) throw std::invalid_argument("summary votes must be non-empty");
    if (s.conflict.empty() != votes_unanimous(s))
        throw std::invalid_argument("summary conflict must be empty exactly when votes are unanimous");
}

// ── Historical shared pool ─────────────────────────────────────

const RoundSummary& HistoricalSharedPool::summary_for(int round) const {
    if (round < 1 || static_cast<size_t>(round) > entries_.size()) throw MissingSummary(round);
    return entries_[static_cast<size_t>(round) - 1];
}

void HistoricalSharedPool::append(RoundSummary summary) {
    const int expected = last_round() + 1;
    if (summary.round != expected) throw NonContiguousRound(summary.round, expected);
    validate_round_summary(summary);
    entries_.push_back(std::move(summary));
}

namespace {

ordered_json summary_categories_json(const RoundSummary& s) {
    ordered_json o = ordered_json::object();
    o["consistency"] = s.consistency;
    o["conflict"] = s.conflict;
    o["independence"] = s.independence;
    o["integration"] = s.integration;
    return o;
}

std::vector<std::string> string_array(const ordered_json& j, const std::string& what) {
    if (!j.is_array()) throw std::invalid_argument(what + " is not an array");
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) throw std::invalid_argument(what + " holds a non-string item");
        out.push_back(item.get<std::string>());
    }
    return out;
}

} // namespace

std::string serialize_pool(const HistoricalSharedPool& pool) {
    ordered_json out = ordered_json::object();
    for (const RoundSummary& s : pool.rounds()) {
        ordered_json o = summary_categories_json(s);
        ordered_json votes = ordered_json::object();
        for (const auto& [role, choice] : s.votes) votes[role] = choice;
        o["_votes"] = votes;
        out["round " + std::to_string(s.round)] = o;
    }
    return out.dump(2);
}

HistoricalSharedPool parse_pool(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("pool text is not a JSON object");
    HistoricalSharedPool pool;
    for (int round = 1; static_cast<size_t>(round) <= j.size(); ++round) {
        const std::string key = "round " + std::to_string(round);
        if (!j.contains(key))
            throw std::invalid_argument("pool rounds not contiguous: missing \"" + key + "\"");
        const ordered_json& o = j[key];
        RoundSummary s;
        s.round = round;
        s.consistency = string_array(o.at("consistency"), key + ".consistency");
        s.conflict = string_array(o.at("conflict"), key + ".conflict");
        s.independence = string_array(o.at("independence"), key + ".independence");
        s.integration = string_array(o.at("integration"), key + ".integration");
        for (const auto& [role, choice] : o.at("_votes").items())
            s.votes[role] = choice.get<std::string>();
        pool.append(std::move(s));
    }
    return pool;
}

std::string render_summary_for_prompt(const RoundSummary& s) {
    return summary_categories_json(s).dump(2);
}

// ── Consultation result ────────────────────────────────────────

const std::string& termination_name(Termination t) {
    static const std::string consensus = "Consensus";
    static const std::string majority = "MajorityRule";
    static const std::string tie = "TieRandom";
    switch (t) {
        case Termination::Consensus: return consensus;
        case Termination::MajorityRule: return majority;
        case Termination::TieRandom: return tie;
    }
    throw std::invalid_argument("unknown termination value");
}

std::optional<Termination> parse_termination(const std::string& name) {
    if (name == "Consensus") return Termination::Consensus;
    if (name == "MajorityRule") return Termination::MajorityRule;
    if (name == "TieRandom") return Termination::TieRandom;
    return std::nullopt;
}

std::string serialize_result(const ConsultationResult& r) {
    ordered_json out;
    out["case_id"] = r.case_id;
    out["final_choice_id"] = r.final_choice_id;
    out["termination"] = termination_name(r.termination);
    out["rounds_used"] = r.rounds_used;
    out["pool"] = ordered_json::parse(serialize_pool(r.pool));
    ordered_json rounds = ordered_json::array();
    for (const auto& round : r.per_round_statements) {
        ordered_json stmts = ordered_json::array();
        for (const Statement& s : round) {
            ordered_json o;
            o["round"] = s.round;
            o["role"] = role_name(s.role);
            o["reasoning"] = s.reasoning;
            o["choice_id"] = s.choice_id;
            o["choice_text"] = s.choice_text;
            stmts.push_back(std::move(o));
        }
        rounds.push_back(std::move(stmts));
    }
    out["per_round_statements"] = rounds;
    out["kb_consulted"] = r.kb_consulted;
    out["rng_seed"] = r.rng_seed;
    return out.dump(2);
}

} // namespace mdt
