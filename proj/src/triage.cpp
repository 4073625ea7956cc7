#include "mdt/triage.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace mdt {

void validate_triage_decision(const TriageDecision& d) {
    for (Role r : d.roles)
        if (!is_specialist(r))
            throw std::invalid_argument("triage selected a non-specialist role: " + role_name(r));
    for (Role m : mandatory_roles())
        if (std::find(d.roles.begin(), d.roles.end(), m) == d.roles.end())
            throw std::invalid_argument("triage decision missing mandatory role: " + role_name(m));
    if (d.roles.size() < 2 || d.roles.size() > specialist_roles().size())
        throw std::invalid_argument("triage decision has " + std::to_string(d.roles.size()) +
                                    " roles, expected 2..8");
    std::vector<Role> sorted = d.roles;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("triage decision holds duplicate roles");
}

namespace {

struct Candidate {
    size_t begin; // position of the opening bracket
    std::vector<std::string> names;
};

std::vector<std::string> brace_groups(const std::string& text) {
    std::vector<std::string> groups;
    size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
        const size_t close = text.find('}', pos + 1);
        if (close == std::string::npos) break;
        groups.push_back(text.substr(pos + 1, close - pos - 1));
        pos = close + 1;
    }
    return groups;
}

// Bracketed lists holding at least one {Name} group. Square brackets are the
// prescribed format; angle brackets appear in the wild and are tolerated.
std::vector<Candidate> list_candidates(const std::string& reply, char open, char close) {
    std::vector<Candidate> out;
    size_t pos = 0;
    while ((pos = reply.find(open, pos)) != std::string::npos) {
        const size_t end = reply.find(close, pos + 1);
        if (end == std::string::npos) break;
        auto names = brace_groups(reply.substr(pos + 1, end - pos - 1));
        if (!names.empty()) out.push_back({pos, std::move(names)});
        pos = end + 1;
    }
    return out;
}

} // namespace

TriageDecision parse_role_list(const std::string& reply) {
    if (reply.empty()) throw ParseFailure("triage reply is empty");

    std::vector<Candidate> candidates = list_candidates(reply, '[', ']');
    if (candidates.empty()) candidates = list_candidates(reply, '<', '>');
    if (candidates.empty())
        throw ParseFailure("no bracketed role list found in triage reply");

    const Candidate& chosen = candidates.back();
    TriageDecision d;
    d.reasons = reply.substr(0, chosen.begin);
    // trim trailing whitespace off the reasons block
    while (!d.reasons.empty() && std::isspace(static_cast<unsigned char>(d.reasons.back())))
        d.reasons.pop_back();

    for (const std::string& name : chosen.names) {
        auto role = parse_role(name);
        if (!role || !is_specialist(*role))
            throw ParseFailure("unknown specialist role in triage reply: \"" + name + "\"");
        if (std::find(d.roles.begin(), d.roles.end(), *role) == d.roles.end())
            d.roles.push_back(*role);
    }
    return d;
}

std::string build_triage_prompt(const PatientCase& pcase) {
    std::ostringstream out;
    out << "Input question: ";
    if (!pcase.background.empty()) out << pcase.background << "\n\n";
    out << pcase.question << "\n\n"
        << "Provide your reasoning, then the selected doctor combination in the prescribed "
           "format: [{agent1}, {agent2}, ...]";
    return out.str();
}

TriageDecision triage(const PatientCase& pcase, Backend& backend, const TriageOptions& options,
                      std::vector<std::string>* flags) {
    pcase.validate();
    const PromptTemplates& prompts = options.prompts ? *options.prompts : PromptTemplates::defaults();

    ChatRequest req;
    req.system_prompt = prompts.triage_system;
    req.user_prompt = build_triage_prompt(pcase);
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.tag = {pcase.case_id, role_name(Role::PrimaryCareDoctor), 0};

    TriageDecision decision;
    std::string last_error;
    bool parsed = false;
    for (int attempt = 0; attempt <= options.max_parse_retries; ++attempt) {
        if (attempt > 0)
            req.user_prompt += "\n\nReminder: output the roles as a bracketed list of brace-delimited "
                               "names, e.g. [{Radiologist}, {Pathologist}, {Pharmacist}].";
        const std::string reply = backend.chat(req);
        try {
            decision = parse_role_list(reply);
            parsed = true;
            break;
        } catch (const ParseFailure& e) {
            last_error = e.what();
        }
    }
    if (!parsed)
        throw ParseFailure("triage parse failed after " + std::to_string(options.max_parse_retries + 1) +
                           " attempts: " + last_error);

    // Missing mandatory roles are injected rather than rejected.
    std::vector<std::string> injected;
    for (Role m : mandatory_roles()) {
        if (std::find(decision.roles.begin(), decision.roles.end(), m) == decision.roles.end()) {
            decision.roles.push_back(m);
            injected.push_back(role_name(m));
        }
    }
    if (!injected.empty() && flags) {
        std::string note = "MandatoryRolesInjected:";
        for (size_t i = 0; i < injected.size(); ++i) note += (i ? "," : " ") + injected[i];
        flags->push_back(note);
    }

    validate_triage_decision(decision);
    return decision;
}

} // namespace mdt
