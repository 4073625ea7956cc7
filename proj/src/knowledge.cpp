#include "mdt/knowledge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mdt {

using ordered_json = nlohmann::ordered_json;

// ── Records ────────────────────────────────────────────────────

namespace {

ordered_json record_to_json(const KbRecord& record) {
    ordered_json j;
    if (const auto* c = std::get_if<CorrectRecord>(&record)) {
        j["Question"] = c->question;
        j["Answer"] = c->answer;
        j["Summary of S_final4"] = c->summary_final;
    } else {
        const auto& ch = std::get<ChainRecord>(record);
        j["Question"] = ch.question;
        j["Correct Answer"] = ch.correct_answer;
        j["Initial Hypothesis"] = ch.initial_hypothesis;
        j["Analysis Process"] = ch.analysis_process;
        j["Final Conclusion"] = ch.final_conclusion;
        j["Error Reflection"] = ch.error_reflection;
    }
    return j;
}

KbRecord record_from_json(const ordered_json& j, const std::string& kind) {
    if (kind == "correct") {
        CorrectRecord c;
        c.question = j.at("Question").get<std::string>();
        c.answer = j.at("Answer").get<std::string>();
        c.summary_final = j.at("Summary of S_final4").get<std::string>();
        return c;
    }
    ChainRecord ch;
    ch.question = j.at("Question").get<std::string>();
    ch.correct_answer = j.at("Correct Answer").get<std::string>();
    ch.initial_hypothesis = j.at("Initial Hypothesis").get<std::string>();
    ch.analysis_process = j.at("Analysis Process").get<std::string>();
    ch.final_conclusion = j.at("Final Conclusion").get<std::string>();
    ch.error_reflection = j.at("Error Reflection").get<std::string>();
    return ch;
}

int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace

std::string KbEntry::record_json() const { return record_to_json(record).dump(2); }

std::string KbEntry::record_text() const {
    std::ostringstream out;
    const ordered_json j = record_to_json(record);
    for (const auto& [key, value] : j.items()) out << key << ": " << value.get<std::string>() << "\n";
    return out.str();
}

// ── Cosine ─────────────────────────────────────────────────────

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) throw DimensionMismatch(a.dimension(), b.dimension());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw ZeroVector();
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ── Store ──────────────────────────────────────────────────────

size_t KbStore::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

void KbStore::attach_file(const std::string& path) {
    std::lock_guard<std::mutex> lock(mu_);
    path_ = path;
    std::ofstream touch(path_, std::ios::app);
    if (!touch) throw IoError("cannot open kb file for appending: " + path_);
}

std::vector<KbEntry> KbStore::entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_;
}

KbEntry KbStore::append(KbEntry entry) {
    std::lock_guard<std::mutex> lock(mu_);
    if (entry.embedding.dimension() == 0) throw std::invalid_argument("kb entry embedding empty");
    if (dim_ == 0)
        dim_ = entry.embedding.dimension();
    else if (entry.embedding.dimension() != dim_)
        throw DimensionMismatch(entry.embedding.dimension(), dim_);
    entry.id = entries_.size();
    if (entry.created_at == 0) entry.created_at = now_ms();
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw IoError("cannot append to kb file: " + path_);
        out << kb_entry_to_line(entry, kind_) << "\n";
    }
    entries_.push_back(entry);
    return entry;
}

std::vector<RetrievalHit> KbStore::top_k(const EmbeddingVector& query, size_t k) const {
    if (k < 1) throw std::invalid_argument("top_k requires k >= 1");
    std::vector<RetrievalHit> hits;
    {
        std::lock_guard<std::mutex> lock(mu_);
        hits.reserve(entries_.size());
        for (const KbEntry& e : entries_) hits.push_back({e, cosine(query, e.embedding)});
    }
    const auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.entry.created_at != b.entry.created_at) return a.entry.created_at < b.entry.created_at;
        return a.entry.id < b.entry.id;
    };
    const size_t take = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<long>(take), hits.end(), better);
    hits.resize(take);
    return hits;
}

std::string kb_entry_to_line(const KbEntry& entry, const std::string& kind) {
    ordered_json j;
    j["schema_version"] = kKbSchemaVersion;
    j["kind"] = kind;
    j["record"] = record_to_json(entry.record);
    j["embedding"] = entry.embedding.values;
    j["source_dataset"] = entry.source_dataset;
    j["created_at"] = entry.created_at;
    return j.dump();
}

KbEntry kb_entry_from_line(const std::string& line, const std::string& path, size_t line_no,
                           const std::string& expected_kind) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
        const int version = j.at("schema_version").get<int>();
        if (version != kKbSchemaVersion)
            throw SchemaVersionMismatch(path, line_no,
                                        "schema_version " + std::to_string(version) + ", expected " +
                                            std::to_string(kKbSchemaVersion));
        const std::string kind = j.at("kind").get<std::string>();
        if (kind != "correct" && kind != "chain")
            throw SchemaVersionMismatch(path, line_no, "unknown record kind \"" + kind + "\"");
        if (!expected_kind.empty() && kind != expected_kind)
            throw SchemaVersionMismatch(path, line_no,
                                        "record kind \"" + kind + "\", expected \"" + expected_kind + "\"");
        KbEntry entry;
        entry.record = record_from_json(j.at("record"), kind);
        entry.embedding.values = j.at("embedding").get<std::vector<double>>();
        entry.embedding.model_name = "stored";
        entry.source_dataset = j.at("source_dataset").get<std::string>();
        entry.created_at = j.at("created_at").get<int64_t>();
        return entry;
    } catch (const SchemaVersionMismatch&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaVersionMismatch(path, line_no, std::string("malformed kb line: ") + e.what());
    }
}

void KbStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write kb file: " + path);
    std::lock_guard<std::mutex> lock(mu_);
    for (const KbEntry& e : entries_) out << kb_entry_to_line(e, kind_) << "\n";
}

void KbStore::load(const std::string& path, const std::string& expected_kind) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read kb file: " + path);
    std::vector<KbEntry> loaded;
    std::string line;
    size_t line_no = 0;
    size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        KbEntry entry = kb_entry_from_line(line, path, line_no, expected_kind);
        if (dim == 0)
            dim = entry.embedding.dimension();
        else if (entry.embedding.dimension() != dim)
            throw SchemaVersionMismatch(path, line_no, "embedding dimension changed mid-file");
        entry.id = loaded.size();
        loaded.push_back(std::move(entry));
    }
    std::lock_guard<std::mutex> lock(mu_);
    entries_ = std::move(loaded);
    dim_ = dim;
}

// ── Retrieval ──────────────────────────────────────────────────

std::string embedding_key(const std::string& background, const std::string& question) {
    if (background.empty()) return question;
    return background + "\n" + question;
}

RetrievalResult retrieve(const PatientCase& query_case, Backend& backend, const KbStore& correct_kb,
                         const KbStore& chain_kb, size_t k, RetrievalMode mode) {
    if (k < 1) throw std::invalid_argument("retrieve requires k >= 1");
    const EmbeddingVector query =
        backend.embed(embedding_key(query_case.background, query_case.question));

    RetrievalResult result;
    if (correct_kb.size() > 0) result.correct_hits = correct_kb.top_k(query, k);
    if (chain_kb.size() > 0) result.chain_hits = chain_kb.top_k(query, k);

    if (mode == RetrievalMode::Pooled) {
        // Keep the best k across both stores, still reported per store.
        std::vector<std::pair<double, bool>> scored; // (score, is_correct)
        for (const auto& h : result.correct_hits) scored.push_back({h.score, true});
        for (const auto& h : result.chain_hits) scored.push_back({h.score, false});
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        if (scored.size() > k) scored.resize(k);
        size_t keep_correct = 0, keep_chain = 0;
        for (const auto& [score, is_correct] : scored) {
            (void)score;
            if (is_correct) ++keep_correct;
            else ++keep_chain;
        }
        result.correct_hits.resize(std::min(result.correct_hits.size(), keep_correct));
        result.chain_hits.resize(std::min(result.chain_hits.size(), keep_chain));
    }
    return result;
}

// ── Gating ─────────────────────────────────────────────────────

KbGate kb_gate(int round, bool round1_had_consensus, bool current_conflict) {
    if (round < 1) throw std::invalid_argument("kb_gate round must be >= 1");
    if (round == 1) return round1_had_consensus ? KbGate::PostHocReflect : KbGate::NoKb;
    return current_conflict ? KbGate::InjectIntoPrompt : KbGate::NoKb;
}

// ── Routing ────────────────────────────────────────────────────

namespace {

std::string extract_json_object(const std::string& reply) {
    const size_t start = reply.find('{');
    if (start == std::string::npos) throw ParseFailure("no JSON object in reviewer reply");
    int depth = 0;
    bool in_string = false, escaped = false;
    for (size_t i = start; i < reply.size(); ++i) {
        const char c = reply[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return reply.substr(start, i - start + 1);
    }
    throw ParseFailure("unterminated JSON object in reviewer reply");
}

// The published formats show both plain strings and singleton arrays.
std::string text_field(const ordered_json& j, const char* key) {
    if (!j.contains(key)) throw ParseFailure(std::string("reviewer reply missing \"") + key + "\"");
    const auto& v = j[key];
    std::string out;
    if (v.is_string()) {
        out = v.get<std::string>();
    } else if (v.is_array()) {
        for (const auto& item : v) {
            if (!out.empty()) out += "\n";
            out += item.is_string() ? item.get<std::string>() : item.dump();
        }
    } else {
        out = v.dump();
    }
    if (out.empty()) throw ParseFailure(std::string("reviewer reply field \"") + key + "\" is empty");
    return out;
}

KbRecord parse_reviewer_reply(const std::string& reply, bool correct) {
    ordered_json j;
    try {
        j = ordered_json::parse(extract_json_object(reply));
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure(std::string("reviewer reply is not valid JSON: ") + e.what());
    }
    if (correct) {
        CorrectRecord c;
        c.question = text_field(j, "Question");
        c.answer = text_field(j, "Answer");
        c.summary_final = text_field(j, "Summary of S_final4");
        return c;
    }
    ChainRecord ch;
    ch.question = text_field(j, "Question");
    ch.correct_answer = text_field(j, "Correct Answer");
    ch.initial_hypothesis = text_field(j, "Initial Hypothesis");
    ch.analysis_process = text_field(j, "Analysis Process");
    ch.final_conclusion = text_field(j, "Final Conclusion");
    ch.error_reflection = text_field(j, "Error Reflection");
    return ch;
}

} // namespace

std::optional<KbEntry> route_and_store(const ConsultationResult& result, const PatientCase& pcase,
                                       Backend& backend, KbStore& correct_kb, KbStore& chain_kb,
                                       const RoutingOptions& options, std::vector<std::string>* flags) {
    if (!pcase.gold_answer)
        throw std::invalid_argument("route_and_store requires a gold answer on case " + pcase.case_id);
    if (result.pool.empty())
        throw std::invalid_argument("route_and_store requires a non-empty pool for case " + pcase.case_id);

    const bool correct = result.final_choice_id == *pcase.gold_answer;
    const PromptTemplates& prompts = options.prompts ? *options.prompts : PromptTemplates::defaults();

    ChatRequest req;
    req.system_prompt = correct ? prompts.cot_correct_system : prompts.cot_incorrect_system;
    {
        std::ostringstream user;
        user << "Patient background:\n" << pcase.background << "\n\nMedical problem:\n"
             << pcase.question << "\n\n";
        if (correct) {
            const RoundSummary& final_summary = result.pool.summary_for(result.rounds_used);
            user << "Final answer (correct): " << result.final_choice_id;
            if (const std::string* text = pcase.option_text(result.final_choice_id))
                user << ": " << *text;
            user << "\n\nStructured statements from the final consultation round:\n"
                 << render_summary_for_prompt(final_summary);
        } else {
            user << "Delivered answer (incorrect): " << result.final_choice_id
                 << "\nCorrect answer: " << *pcase.gold_answer;
            if (const std::string* text = pcase.option_text(*pcase.gold_answer)) user << ": " << *text;
            user << "\n\nStructured statements from all consultation rounds:\n";
            for (const RoundSummary& s : result.pool.rounds())
                user << "Round " << s.round << ":\n" << render_summary_for_prompt(s) << "\n";
        }
        req.user_prompt = user.str();
    }
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.tag = {pcase.case_id, role_name(Role::ChainOfThoughtReviewer), 0};

    std::optional<KbRecord> record;
    for (int attempt = 0; attempt <= options.max_parse_retries; ++attempt) {
        if (attempt > 0)
            req.user_prompt += "\n\nReminder: reply with a single JSON object holding exactly the "
                               "prescribed keys, every value non-empty.";
        try {
            record = parse_reviewer_reply(backend.chat(req), correct);
            break;
        } catch (const ParseFailure&) {
        }
    }
    if (!record) {
        if (flags) flags->push_back("KbEntrySkipped case=" + pcase.case_id);
        return std::nullopt;
    }

    KbEntry entry;
    entry.record = std::move(*record);
    const std::string& question_field = entry.is_correct()
                                            ? std::get<CorrectRecord>(entry.record).question
                                            : std::get<ChainRecord>(entry.record).question;
    entry.embedding = backend.embed(embedding_key(pcase.background, question_field));
    entry.source_dataset = options.source_dataset;
    return (correct ? correct_kb : chain_kb).append(std::move(entry));
}

} // namespace mdt
