#include "mdt/consultation.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <limits>
#include <map>
#include <sstream>

namespace mdt {

const char* const kKbBlockHeader = "Retrieved consultation experience";

// ── Consensus and final decision ───────────────────────────────

bool check_consensus(const std::vector<Statement>& statements) {
    if (statements.empty()) throw std::invalid_argument("consensus check on an empty round");
    const int round = statements.front().round;
    for (const Statement& s : statements)
        if (s.round != round) throw std::invalid_argument("consensus check across rounds");
    return std::all_of(statements.begin(), statements.end(), [&](const Statement& s) {
        return s.choice_id == statements.front().choice_id;
    });
}

uint64_t bounded_uniform(std::mt19937_64& rng, uint64_t n) {
    if (n == 0) throw std::invalid_argument("bounded_uniform over an empty range");
    // 2^64 mod n, so we reject the biased tail of the generator range.
    const uint64_t max = std::numeric_limits<uint64_t>::max();
    const uint64_t rem = (max % n + 1) % n;
    uint64_t x = rng();
    if (rem != 0)
        while (x >= max - rem + 1) x = rng();
    return x % n;
}

std::pair<std::string, Termination> decide_final(const std::vector<Statement>& statements,
                                                 std::mt19937_64& rng) {
    if (statements.empty()) throw std::invalid_argument("decide_final on an empty round");
    std::map<std::string, int> counts;
    for (const Statement& s : statements) ++counts[s.choice_id];

    int best = 0;
    for (const auto& [id, n] : counts) {
        (void)id;
        best = std::max(best, n);
    }
    std::vector<std::string> leaders;
    for (const auto& [id, n] : counts)
        if (n == best) leaders.push_back(id); // map order: ids ascending, stable across runs

    if (leaders.size() == 1) return {leaders.front(), Termination::MajorityRule};
    return {leaders[bounded_uniform(rng, leaders.size())], Termination::TieRandom};
}

// ── Prompt building ────────────────────────────────────────────

std::string render_kb_block(const RetrievalResult& hits) {
    std::ostringstream out;
    out << kKbBlockHeader << " (most similar past cases):\n";
    size_t n = 0;
    for (const RetrievalHit& h : hits.correct_hits)
        out << "[Correct experience " << ++n << ", similarity " << h.score << "]\n"
            << h.entry.record_text() << "\n";
    n = 0;
    for (const RetrievalHit& h : hits.chain_hits)
        out << "[Error reflection " << ++n << ", similarity " << h.score << "]\n"
            << h.entry.record_text() << "\n";
    return out.str();
}

ChatRequest build_specialist_prompt(const PatientCase& pcase, Role role, int round,
                                    const HistoricalSharedPool& pool,
                                    const std::optional<std::string>& kb_snippets,
                                    const ConsultationConfig& config) {
    if (!is_specialist(role))
        throw std::invalid_argument("specialist prompt for non-specialist role " + role_name(role));
    if (round < 1) throw std::invalid_argument("specialist prompt round must be >= 1");
    if (round == 1 && kb_snippets)
        throw std::invalid_argument("knowledge bases are never referenced in round 1");
    if (pool.last_round() < round - 1) throw MissingSummary(round - 1);

    const PromptTemplates& prompts = config.prompts ? *config.prompts : PromptTemplates::defaults();
    const std::string& name = role_name(role);

    ChatRequest req;
    req.system_prompt = render_template(
        render_template(prompts.specialist_system, "role", name), "specialty",
        specialty_description(name));

    std::ostringstream user;
    user << "Consultation round: " << round << "\n\n";
    if (!pcase.background.empty()) user << "Patient background:\n" << pcase.background << "\n\n";
    user << "Question:\n" << pcase.question << "\n\nOptions: " << render_options_json(pcase) << "\n";

    if (round >= 2) {
        // Residual window: the previous kResidualWindow rounds, nothing deeper.
        for (int back = 1; back <= kResidualWindow && round - back >= 1; ++back)
            user << "\nHistorical Shared Pool, round " << round - back << " summary:\n"
                 << render_summary_for_prompt(pool.summary_for(round - back)) << "\n";
        if (kb_snippets && !kb_snippets->empty()) user << "\n" << *kb_snippets << "\n";
        user << "\nIntegrate the feedback above, then refine or confirm your answer.\n";
    }
    user << "\nExpress your conclusion on the final line as: Choice: {Option ID}: {Option Content}";

    req.user_prompt = user.str();
    req.temperature = config.temperature;
    req.max_tokens = config.max_tokens;
    req.tag = {pcase.case_id, name, round};
    return req;
}

// ── Statement parsing ──────────────────────────────────────────

std::optional<Statement> parse_statement(const std::string& reply, const PatientCase& pcase, int round,
                                         Role role) {
    // Last "Choice:" line wins; chain-of-thought text may mention earlier ones.
    size_t pos = reply.rfind("Choice");
    while (pos != std::string::npos) {
        size_t cursor = pos + 6;
        while (cursor < reply.size() && (reply[cursor] == ' ' || reply[cursor] == '\t')) ++cursor;
        if (cursor < reply.size() && reply[cursor] == ':') {
            ++cursor;
            const size_t eol = reply.find('\n', cursor);
            const std::string line =
                reply.substr(cursor, eol == std::string::npos ? std::string::npos : eol - cursor);

            // "{X}: {content}", "{X} {content}", or "X: content"
            std::string id_part, text_part;
            const size_t open = line.find('{');
            const size_t close = open == std::string::npos ? std::string::npos : line.find('}', open);
            if (close != std::string::npos) {
                id_part = line.substr(open + 1, close - open - 1);
                const size_t open2 = line.find('{', close + 1);
                const size_t close2 = open2 == std::string::npos ? std::string::npos
                                                                 : line.find('}', open2);
                if (close2 != std::string::npos)
                    text_part = line.substr(open2 + 1, close2 - open2 - 1);
            } else {
                const size_t colon = line.find(':');
                id_part = line.substr(0, colon);
                if (colon != std::string::npos) text_part = line.substr(colon + 1);
            }

            if (auto id = match_option_id(pcase, id_part)) {
                Statement s;
                s.round = round;
                s.role = role;
                s.reasoning = reply;
                s.choice_id = *id;
                // trim the echoed text
                while (!text_part.empty() && std::isspace(static_cast<unsigned char>(text_part.front())))
                    text_part.erase(text_part.begin());
                while (!text_part.empty() && std::isspace(static_cast<unsigned char>(text_part.back())))
                    text_part.pop_back();
                s.choice_text = text_part;
                validate_statement(s, pcase);
                return s;
            }
        }
        if (pos == 0) break;
        pos = reply.rfind("Choice", pos - 1);
    }
    return std::nullopt;
}

// ── The round loop ─────────────────────────────────────────────

namespace {

std::optional<Statement> ask_specialist(const PatientCase& pcase, Role role, int round,
                                        const HistoricalSharedPool& pool,
                                        const std::optional<std::string>& kb_snippets,
                                        const ConsultationConfig& config, Backend& backend) {
    ChatRequest req = build_specialist_prompt(pcase, role, round, pool, kb_snippets, config);
    for (int attempt = 0; attempt <= config.max_parse_retries; ++attempt) {
        if (attempt > 0)
            req.user_prompt += "\n\nReminder: end your reply with exactly one line of the form "
                               "Choice: {Option ID}: {Option Content}.";
        if (auto s = parse_statement(backend.chat(req), pcase, round, role)) return s;
    }
    return std::nullopt;
}

bool kb_ready(const ConsultationConfig& config, const KnowledgeHandle& kb) {
    return config.kb_policy == KbPolicy::Enabled && kb.correct_kb && kb.chain_kb;
}

} // namespace

ConsultationRun run_consultation(const PatientCase& pcase, const std::vector<Role>& roles,
                                 Backend& backend, const ConsultationConfig& config,
                                 const KnowledgeHandle& kb) {
    pcase.validate();
    if (roles.empty()) throw std::invalid_argument("consultation needs at least one specialist");
    if (config.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
    if (config.kb_policy == KbPolicy::Enabled && (!kb.correct_kb || !kb.chain_kb))
        throw std::invalid_argument("kb_policy is Enabled but no knowledge handle was given");

    ConsultationRun run;
    ConsultationResult& result = run.result;
    result.case_id = pcase.case_id;
    result.rng_seed = config.rng_seed;
    std::mt19937_64 rng(config.rng_seed);

    AggregationOptions agg;
    agg.max_parse_retries = config.max_parse_retries;
    agg.prompts = config.prompts;
    agg.temperature = config.temperature;
    agg.max_tokens = config.max_tokens;

    bool round1_consensus = false;
    for (int round = 1; round <= config.max_rounds; ++round) {
        // Conflict state comes from the previous round's stored summary.
        const bool conflict = round >= 2 && !result.pool.summary_for(round - 1).conflict.empty();

        std::optional<std::string> kb_snippets;
        if (kb_ready(config, kb) &&
            kb_gate(round, false, conflict) == KbGate::InjectIntoPrompt) {
            RetrievalResult hits = retrieve(pcase, backend, *kb.correct_kb, *kb.chain_kb,
                                            config.retrieval_k, config.retrieval_mode);
            if (!hits.correct_hits.empty() || !hits.chain_hits.empty()) {
                kb_snippets = render_kb_block(hits);
                result.kb_consulted = true;
            }
        }

        std::vector<Statement> statements;
        if (config.parallel_specialists && roles.size() > 1) {
            std::vector<std::future<std::optional<Statement>>> futures;
            futures.reserve(roles.size());
            for (Role role : roles)
                futures.push_back(std::async(std::launch::async, ask_specialist, std::cref(pcase), role,
                                             round, std::cref(result.pool), std::cref(kb_snippets),
                                             std::cref(config), std::ref(backend)));
            for (size_t i = 0; i < roles.size(); ++i) {
                if (auto s = futures[i].get())
                    statements.push_back(std::move(*s));
                else
                    run.flags.push_back("Abstain role=" + role_name(roles[i]) +
                                        " round=" + std::to_string(round));
            }
        } else {
            for (Role role : roles) {
                if (auto s = ask_specialist(pcase, role, round, result.pool, kb_snippets, config, backend))
                    statements.push_back(std::move(*s));
                else
                    run.flags.push_back("Abstain role=" + role_name(role) +
                                        " round=" + std::to_string(round));
            }
        }
        if (statements.empty())
            throw ParseFailure("every specialist abstained in round " + std::to_string(round) +
                               " of case " + pcase.case_id);
        result.per_round_statements.push_back(statements);

        append_summary(result.pool, summarize_round(statements, pcase, backend, agg, &run.flags));
        result.rounds_used = round;

        if (check_consensus(statements)) {
            result.final_choice_id = statements.front().choice_id;
            result.termination = Termination::Consensus;
            round1_consensus = round == 1;
            break;
        }
        if (round == config.max_rounds)
            std::tie(result.final_choice_id, result.termination) = decide_final(statements, rng);
    }

    // A first-round consensus still gets to look at accumulated experience,
    // as a reflection on the concluded discussion.
    if (round1_consensus && kb_ready(config, kb) &&
        kb_gate(1, true, false) == KbGate::PostHocReflect) {
        RetrievalResult hits =
            retrieve(pcase, backend, *kb.correct_kb, *kb.chain_kb, config.retrieval_k,
                     config.retrieval_mode);
        if (!hits.correct_hits.empty() || !hits.chain_hits.empty()) {
            result.kb_consulted = true;
            const PromptTemplates& prompts =
                config.prompts ? *config.prompts : PromptTemplates::defaults();
            ChatRequest req;
            req.system_prompt = prompts.lead_system;
            std::ostringstream user;
            user << "The consultation for the question below reached consensus in its first round "
                 << "on option " << result.final_choice_id
                 << ". Reflect on whether the following past experience supports or challenges that "
                 << "conclusion. This reflection is recorded alongside the consultation and does not "
                 << "change its outcome.\n\nQuestion:\n"
                 << pcase.question << "\n\n" << render_kb_block(hits);
            req.user_prompt = user.str();
            req.temperature = config.temperature;
            req.max_tokens = config.max_tokens;
            req.tag = {pcase.case_id, role_name(Role::LeadPhysician), 0};
            try {
                run.post_hoc_reflection = backend.chat(req);
            } catch (const BackendError&) {
                run.flags.push_back("PostHocReflectFailed");
            }
        }
    }

    return run;
}

} // namespace mdt
