#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mdt/core.hpp"
#include "mdt/llm.hpp"
#include "mdt/prompts.hpp"

namespace mdt {

// ── Records ────────────────────────────────────────────────────

// Verified-correct consultation experience: question, answer, and a digest
// of the final round's structured summary.
struct CorrectRecord {
    std::string question;
    std::string answer;
    std::string summary_final;
};

// Reflection on an incorrect consultation, built from all rounds.
struct ChainRecord {
    std::string question;
    std::string correct_answer;
    std::string initial_hypothesis;
    std::string analysis_process;
    std::string final_conclusion;
    std::string error_reflection;
};

using KbRecord = std::variant<CorrectRecord, ChainRecord>;

struct KbEntry {
    KbRecord record;
    EmbeddingVector embedding; // of source background + record question
    std::string source_dataset;
    int64_t created_at = 0; // unix epoch milliseconds
    size_t id = 0;          // insertion index inside its store

    bool is_correct() const { return std::holds_alternative<CorrectRecord>(record); }
    // Record JSON with the exact published field names.
    std::string record_json() const;
    std::string record_text() const; // flat text used in prompt blocks
};

struct RetrievalHit {
    KbEntry entry;
    double score = 0.0; // cosine in [-1, 1]
};

// ── Cosine ─────────────────────────────────────────────────────

// dot(a,b) / (|a||b|). Throws DimensionMismatch / ZeroVector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// ── Store ──────────────────────────────────────────────────────

// Flat, exhaustively scanned store of one kind of record. Appends are
// serialized behind a writer lock; when a backing path is attached, each
// append also writes one JSONL line. Retrieval sees either the pre- or the
// post-append snapshot, never a torn state.
class KbStore {
public:
    explicit KbStore(std::string kind) : kind_(std::move(kind)) {}
    KbStore(const KbStore&) = delete;
    KbStore& operator=(const KbStore&) = delete;

    const std::string& kind() const { return kind_; } // "correct" | "chain"
    size_t size() const;
    size_t dimension() const { return dim_; }
    std::vector<KbEntry> entries() const; // snapshot

    // Validates the embedding dimension, assigns `id` and `created_at`,
    // writes through to the backing file when attached, and returns the
    // entry as stored.
    KbEntry append(KbEntry entry);

    // Every subsequent append also appends a line to this file. The file is
    // created immediately, so a finished run always leaves both kb files on
    // disk even when one store never grew.
    void attach_file(const std::string& path);
    const std::string& backing_path() const { return path_; }

    // Top-k by cosine, descending; ties broken by (created_at asc, id asc).
    std::vector<RetrievalHit> top_k(const EmbeddingVector& query, size_t k) const;

    void save(const std::string& path) const;
    // Replaces content; throws SchemaVersionMismatch with the line number on
    // any malformed or wrong-version line. `expected_kind` empty accepts any.
    void load(const std::string& path, const std::string& expected_kind = "");

private:
    std::string kind_;
    std::string path_;
    size_t dim_ = 0; // fixed by the first entry
    std::vector<KbEntry> entries_;
    mutable std::mutex mu_;
};

constexpr int kKbSchemaVersion = 1;

std::string kb_entry_to_line(const KbEntry& entry, const std::string& kind);
KbEntry kb_entry_from_line(const std::string& line, const std::string& path, size_t line_no,
                           const std::string& expected_kind);

// ── Retrieval ──────────────────────────────────────────────────

// Composition used both for queries and for stored entries.
std::string embedding_key(const std::string& background, const std::string& question);

enum class RetrievalMode { PerKb, Pooled };

struct RetrievalResult {
    std::vector<RetrievalHit> correct_hits;
    std::vector<RetrievalHit> chain_hits;
};

// Embeds background+question once and takes top-k from each store
// independently (PerKb) or top-k overall (Pooled, hits still reported under
// their source store).
RetrievalResult retrieve(const PatientCase& query_case, Backend& backend, const KbStore& correct_kb,
                         const KbStore& chain_kb, size_t k = 5,
                         RetrievalMode mode = RetrievalMode::PerKb);

// ── Gating ─────────────────────────────────────────────────────

enum class KbGate { NoKb, InjectIntoPrompt, PostHocReflect };

// Never in round 1; injected from round 2 when conflicting opinions arose;
// consulted post hoc when round 1 already reached consensus.
KbGate kb_gate(int round, bool round1_had_consensus, bool current_conflict);

// ── Routing ────────────────────────────────────────────────────

struct RoutingOptions {
    int max_parse_retries = 2;
    const PromptTemplates* prompts = nullptr;
    std::string source_dataset;
    double temperature = 0.7;
    int max_tokens = 1024;
};

// Outcome validation: a result matching the gold answer sends a
// Chain-of-Thought Reviewer digest of the final summary into correct_kb;
// anything else sends a full-history reflection into chain_kb. Exactly one
// store grows by exactly one entry. Returns the stored entry, or nullopt
// when the reviewer output stayed unparseable (noted in `flags`).
std::optional<KbEntry> route_and_store(const ConsultationResult& result, const PatientCase& pcase,
                                       Backend& backend, KbStore& correct_kb, KbStore& chain_kb,
                                       const RoutingOptions& options = {},
                                       std::vector<std::string>* flags = nullptr);

} // namespace mdt
