#include "mdt/review.hpp"

#include <cctype>
#include <sstream>

namespace mdt {

std::optional<std::string> parse_answer_id(const std::string& reply) {
    size_t pos = reply.rfind("Answer ID");
    while (pos != std::string::npos) {
        size_t cursor = pos + 9;
        while (cursor < reply.size() && (reply[cursor] == ' ' || reply[cursor] == '\t')) ++cursor;
        if (cursor < reply.size() && reply[cursor] == ':') {
            ++cursor;
            const size_t eol = reply.find('\n', cursor);
            const std::string line =
                reply.substr(cursor, eol == std::string::npos ? std::string::npos : eol - cursor);
            const size_t open = line.find('{');
            const size_t close = open == std::string::npos ? std::string::npos : line.find('}', open);
            std::string token;
            if (close != std::string::npos) {
                token = line.substr(open + 1, close - open - 1);
            } else {
                token = line.substr(0, line.find(':'));
            }
            while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front())))
                token.erase(token.begin());
            while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back())))
                token.pop_back();
            if (!token.empty()) return token;
        }
        if (pos == 0) break;
        pos = reply.rfind("Answer ID", pos - 1);
    }
    return std::nullopt;
}

ReviewOutcome safety_review(const PatientCase& pcase, const RoundSummary& final_summary,
                            const std::string& proposed_choice, Backend& backend,
                            const ReviewOptions& options) {
    if (!pcase.has_option(proposed_choice))
        throw std::invalid_argument("proposed choice " + proposed_choice + " is not an option of case " +
                                    pcase.case_id);

    const PromptTemplates& prompts = options.prompts ? *options.prompts : PromptTemplates::defaults();
    ChatRequest req;
    req.system_prompt = prompts.safety_system;
    {
        std::ostringstream user;
        user << "Patient description:\n";
        if (!pcase.background.empty()) user << pcase.background << "\n\n";
        user << pcase.question << "\n\nOptions: " << render_options_json(pcase)
             << "\n\nConsultation conclusion to review: " << proposed_choice;
        if (const std::string* text = pcase.option_text(proposed_choice)) user << ": " << *text;
        user << "\n\nStructured statements from the final consultation round:\n"
             << render_summary_for_prompt(final_summary)
             << "\n\nReview the conclusion and finish with the Answer ID line.";
        req.user_prompt = user.str();
    }
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.tag = {pcase.case_id, role_name(Role::SafetyEthicsReviewer), 0};

    ReviewOutcome outcome;
    outcome.final_choice_id = proposed_choice;
    for (int attempt = 0; attempt <= options.max_parse_retries; ++attempt) {
        if (attempt > 0)
            req.user_prompt += "\n\nReminder: end your reply with exactly one line of the form "
                               "Answer ID: {Option ID}: {Option Content}.";
        const std::string reply = backend.chat(req);
        outcome.notes = reply;
        if (auto raw = parse_answer_id(reply)) {
            if (auto id = match_option_id(pcase, *raw)) {
                outcome.final_choice_id = *id;
                outcome.overrode_proposal = *id != proposed_choice;
                return outcome;
            }
        }
    }
    // The reviewer never produced a usable in-option id; keep the proposal.
    outcome.override_failed = true;
    return outcome;
}

} // namespace mdt
