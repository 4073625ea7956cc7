#include "mdt/aggregation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mdt {

using ordered_json = nlohmann::ordered_json;

std::string render_statements_for_lead(const std::vector<Statement>& statements) {
    ordered_json out = ordered_json::object();
    for (const Statement& s : statements) {
        ordered_json entry;
        entry["Reasoning"] = s.reasoning;
        entry["Choice"] = s.choice_id + ": " + s.choice_text;
        out[role_name(s.role)] = entry;
    }
    return out.dump(2);
}

namespace {

// First top-level {...} block, tolerating ```json fences around it.
std::string extract_json_object(const std::string& reply) {
    const size_t start = reply.find('{');
    if (start == std::string::npos) throw ParseFailure("no JSON object in reply");
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < reply.size(); ++i) {
        const char c = reply[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0)
            return reply.substr(start, i - start + 1);
    }
    throw ParseFailure("unterminated JSON object in reply");
}

std::vector<std::string> text_array(const ordered_json& j) {
    std::vector<std::string> out;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (!s.empty()) out.push_back(s);
    } else if (j.is_array()) {
        for (const auto& item : j) {
            const auto s = item.is_string() ? item.get<std::string>() : item.dump();
            if (!s.empty()) out.push_back(s);
        }
    } else {
        throw ParseFailure("category value is neither string nor array");
    }
    return out;
}

std::map<std::string, std::string> votes_from(const std::vector<Statement>& statements) {
    std::map<std::string, std::string> votes;
    for (const Statement& s : statements) votes[role_name(s.role)] = s.choice_id;
    return votes;
}

bool statements_unanimous(const std::vector<Statement>& statements) {
    std::set<std::string> distinct;
    for (const Statement& s : statements) distinct.insert(s.choice_id);
    return distinct.size() == 1;
}

std::string first_line(const std::string& text) {
    const size_t nl = text.find('\n');
    return nl == std::string::npos ? text : text.substr(0, nl);
}

std::vector<std::string> enumerate_conflicting_choices(const std::vector<Statement>& statements) {
    std::vector<std::string> out;
    out.reserve(statements.size());
    for (const Statement& s : statements)
        out.push_back(role_name(s.role) + " chose {" + s.choice_id + "}: " + s.choice_text);
    return out;
}

// Conflict must be empty exactly when the votes agree, whatever the reply
// said; integration must never be empty.
void enforce_summary_invariants(RoundSummary& s, const std::vector<Statement>& statements) {
    if (statements_unanimous(statements)) {
        s.conflict.clear();
    } else if (s.conflict.empty()) {
        s.conflict = enumerate_conflicting_choices(statements);
    }
    if (s.integration.empty()) s.integration = mechanical_summary(statements).integration;
}

} // namespace

RoundSummary parse_lead_reply(const std::string& reply, int round) {
    ordered_json j;
    try {
        j = ordered_json::parse(extract_json_object(reply));
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure(std::string("lead physician reply is not valid JSON: ") + e.what());
    }
    RoundSummary s;
    s.round = round;
    for (const char* key : {"consistency", "conflict", "independence", "integration"})
        if (!j.contains(key)) throw ParseFailure(std::string("lead physician reply missing \"") + key + "\"");
    s.consistency = text_array(j["consistency"]);
    s.conflict = text_array(j["conflict"]);
    s.independence = text_array(j["independence"]);
    s.integration = text_array(j["integration"]);
    return s;
}

RoundSummary mechanical_summary(const std::vector<Statement>& statements) {
    RoundSummary s;
    s.round = statements.front().round;
    s.votes = votes_from(statements);
    if (statements_unanimous(statements)) {
        s.consistency.push_back("All specialists chose {" + statements.front().choice_id + "}: " +
                                statements.front().choice_text);
    } else {
        s.conflict = enumerate_conflicting_choices(statements);
    }
    for (const Statement& st : statements)
        s.integration.push_back(role_name(st.role) + " (choice " + st.choice_id + "): " +
                                first_line(st.reasoning));
    return s;
}

RoundSummary summarize_round(const std::vector<Statement>& statements, const PatientCase& pcase,
                             Backend& backend, const AggregationOptions& options,
                             std::vector<std::string>* flags) {
    if (statements.empty()) throw std::invalid_argument("cannot summarize an empty round");
    const int round = statements.front().round;
    for (const Statement& s : statements)
        if (s.round != round) throw std::invalid_argument("statements span multiple rounds");

    const PromptTemplates& prompts = options.prompts ? *options.prompts : PromptTemplates::defaults();
    ChatRequest req;
    req.system_prompt = prompts.lead_system;
    {
        std::ostringstream user;
        user << "Consultation round " << round << ". Question under discussion:\n"
             << pcase.question << "\n\nThe specialists' responses for this round are:\n"
             << render_statements_for_lead(statements)
             << "\n\nCategorize and organize these responses now.";
        req.user_prompt = user.str();
    }
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.tag = {pcase.case_id, role_name(Role::LeadPhysician), round};

    RoundSummary summary;
    bool parsed = false;
    for (int attempt = 0; attempt <= options.max_parse_retries; ++attempt) {
        if (attempt > 0)
            req.user_prompt += "\n\nReminder: reply with a single JSON object holding exactly the four "
                               "keys consistency, conflict, independence, integration.";
        try {
            summary = parse_lead_reply(backend.chat(req), round);
            parsed = true;
            break;
        } catch (const ParseFailure&) {
        }
    }
    if (!parsed) {
        summary = mechanical_summary(statements);
        if (flags) flags->push_back("FallbackSummary round=" + std::to_string(round));
    }

    summary.votes = votes_from(statements);
    enforce_summary_invariants(summary, statements);
    validate_round_summary(summary);
    return summary;
}

void append_summary(HistoricalSharedPool& pool, RoundSummary summary) {
    pool.append(std::move(summary));
}

} // namespace mdt
