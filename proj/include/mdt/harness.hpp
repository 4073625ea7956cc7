#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdt/consultation.hpp"
#include "mdt/core.hpp"
#include "mdt/knowledge.hpp"
#include "mdt/llm.hpp"
#include "mdt/review.hpp"
#include "mdt/triage.hpp"

namespace mdt {

// ── Configuration ──────────────────────────────────────────────

enum class DatasetKind { MedQA, PubMedQA };
enum class RunMode { Train, Test, Vanilla };

DatasetKind parse_dataset_kind(const std::string& name); // throws UnknownKind
const std::string& dataset_kind_name(DatasetKind kind);
RunMode parse_run_mode(const std::string& name); // throws ConfigError
const std::string& run_mode_name(RunMode mode);

struct BackendSettings {
    std::string type = "mock"; // "mock" | "openai"
    std::string script_path;   // mock only
    size_t mock_embed_dim = 64;
    LiveBackendConfig live;    // openai only
    double temperature = 0.7;
    int max_tokens = 1024;
};

struct RunConfig {
    std::string dataset_path;
    DatasetKind dataset_kind = DatasetKind::MedQA;
    RunMode mode = RunMode::Vanilla;
    std::string kb_dir; // holds correct.jsonl and chain.jsonl
    size_t retrieval_k = 5;
    RetrievalMode retrieval_mode = RetrievalMode::PerKb;
    BackendSettings backend;
    uint64_t seed = 0;
    int concurrency = 1;
    bool sequential = true; // forces dataset order; required for reproducible curves
    int max_rounds = 10;
    size_t checkpoint_every = 100;
    std::string output_dir = "out";
    std::string prompts_dir; // optional template overrides
    std::optional<size_t> limit;

    void validate() const; // throws ConfigError
    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text, const std::string& origin = "<inline>");

    std::string correct_kb_path() const;
    std::string chain_kb_path() const;

    // Semantic parameters only (no filesystem paths), echoed into every
    // run-log record; relocating outputs must not change run-log bytes.
    std::string echo_json() const;
};

std::unique_ptr<Backend> make_backend(const BackendSettings& settings);

// ── Ingestion ──────────────────────────────────────────────────

// One JSON object per line. MedQA: question/options/answer_idx. PubMedQA:
// question, contexts joined into the background, fixed yes/no/maybe options,
// final_decision as gold. Throws MalformedRecord with the line number.
std::vector<PatientCase> ingest(const std::string& path, DatasetKind kind);

// ── Metrics ────────────────────────────────────────────────────

struct Metrics {
    size_t n_cases = 0;
    size_t n_scored = 0;
    size_t n_errored = 0;
    size_t n_correct = 0;
    double accuracy = 0.0; // n_correct / n_scored
    double f1_macro = 0.0; // unweighted mean of per-label F1
    double mean_rounds = 0.0;
    std::map<std::string, size_t> termination_histogram;
    std::map<std::string, size_t> specialist_histogram;

    std::string to_json() const;
};

// Unweighted mean of per-label F1 over `labels`; labels absent from both
// predictions and golds are excluded. Throws LengthMismatch on unequal or
// empty inputs.
double macro_f1(const std::vector<std::string>& predictions, const std::vector<std::string>& golds,
                const std::vector<std::string>& labels);

// ── Evaluation ─────────────────────────────────────────────────

struct CaseLog {
    size_t index = 0;
    std::string case_id;
    std::string config_echo; // RunConfig::echo_json() of the producing run
    bool errored = false;
    std::string error;
    TriageDecision triage;
    ConsultationResult result; // final_choice_id already reflects the review
    std::string consultation_choice; // pre-review proposal
    ReviewOutcome review;
    std::vector<std::string> flags;
    std::string post_hoc_reflection;
    bool correct = false;

    std::string to_json_line() const;
};

struct CurvePoint {
    size_t cases_seen = 0;
    double accuracy = 0.0;
    size_t correct_kb_size = 0;
    size_t chain_kb_size = 0;
};

struct EvaluationReport {
    Metrics metrics;
    std::vector<CaseLog> cases;
    std::vector<CurvePoint> curve;

    std::string run_log_text() const;   // JSONL, one line per case
    std::string curve_csv_text() const; // cases,accuracy,correct_kb,chain_kb
};

// Full pipeline per case: triage -> consultation -> safety review -> score;
// Train mode then routes the experience into the knowledge bases. Per-case
// failures are recorded and the run continues. When `output_dir` is set the
// report is also written to run_log.jsonl / metrics.json / curve.csv there.
EvaluationReport evaluate(const RunConfig& config);

// Progress callback variant (called after each case with (done, total)).
EvaluationReport evaluate(const RunConfig& config,
                          const std::function<void(size_t, size_t)>& progress);

// ── Cross-dataset matrix ───────────────────────────────────────

struct CrossCell {
    std::string dataset;
    std::string kb_source; // "vanilla" | "kb_a" | "kb_b"
    Metrics metrics;
};

struct CrossReport {
    std::vector<CrossCell> cells; // 2 datasets x 3 KB sources
    std::string to_json() const;
    std::string to_table() const;
};

// Evaluates each dataset in Test mode against both KB directories and once
// with no KB at all. KB files must exist up front. Throws ConfigError.
CrossReport cross_dataset(const RunConfig& config_a, const RunConfig& config_b);

} // namespace mdt
