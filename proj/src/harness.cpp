#include "mdt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace mdt {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ── Configuration ──────────────────────────────────────────────

DatasetKind parse_dataset_kind(const std::string& name) {
    std::string folded;
    for (char c : name) folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (folded == "medqa") return DatasetKind::MedQA;
    if (folded == "pubmedqa") return DatasetKind::PubMedQA;
    throw UnknownKind(name);
}

const std::string& dataset_kind_name(DatasetKind kind) {
    static const std::string medqa = "medqa", pubmedqa = "pubmedqa";
    return kind == DatasetKind::MedQA ? medqa : pubmedqa;
}

RunMode parse_run_mode(const std::string& name) {
    if (name == "train") return RunMode::Train;
    if (name == "test") return RunMode::Test;
    if (name == "vanilla") return RunMode::Vanilla;
    throw ConfigError("unknown run mode: " + name + " (want train|test|vanilla)");
}

const std::string& run_mode_name(RunMode mode) {
    static const std::string train = "train", test = "test", vanilla = "vanilla";
    switch (mode) {
        case RunMode::Train: return train;
        case RunMode::Test: return test;
        default: return vanilla;
    }
}

std::string RunConfig::correct_kb_path() const { return (fs::path(kb_dir) / "correct.jsonl").string(); }
std::string RunConfig::chain_kb_path() const { return (fs::path(kb_dir) / "chain.jsonl").string(); }

std::string RunConfig::echo_json() const {
    ordered_json j;
    j["dataset_kind"] = dataset_kind_name(dataset_kind);
    j["mode"] = run_mode_name(mode);
    j["retrieval_k"] = retrieval_k;
    j["retrieval_mode"] = retrieval_mode == RetrievalMode::PerKb ? "per_kb" : "pooled";
    j["backend_type"] = backend.type;
    if (backend.type == "openai") j["model"] = backend.live.chat_model;
    j["temperature"] = backend.temperature;
    j["max_tokens"] = backend.max_tokens;
    j["seed"] = seed;
    j["concurrency"] = concurrency;
    j["sequential"] = sequential;
    j["max_rounds"] = max_rounds;
    j["checkpoint_every"] = checkpoint_every;
    return j.dump();
}

void RunConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("dataset path is empty");
    if (mode != RunMode::Vanilla && kb_dir.empty())
        throw ConfigError(run_mode_name(mode) + " mode requires a kb directory");
    if (mode == RunMode::Test &&
        (!fs::exists(correct_kb_path()) || !fs::exists(chain_kb_path())))
        throw ConfigError("test mode requires existing kb files under " + kb_dir);
    if (backend.type != "mock" && backend.type != "openai")
        throw ConfigError("unknown backend type: " + backend.type);
    if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (retrieval_k < 1) throw ConfigError("retrieval k must be >= 1");
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    RunConfig c;
    try {
        const auto& ds = j.at("dataset");
        c.dataset_path = ds.at("path").get<std::string>();
        c.dataset_kind = parse_dataset_kind(ds.at("kind").get<std::string>());
        c.mode = parse_run_mode(j.value("mode", std::string("vanilla")));
        if (j.contains("kb")) {
            const auto& kb = j["kb"];
            c.kb_dir = kb.value("dir", std::string{});
            c.retrieval_k = kb.value("k", size_t{5});
            const std::string mode = kb.value("retrieval", std::string("per_kb"));
            if (mode == "per_kb") c.retrieval_mode = RetrievalMode::PerKb;
            else if (mode == "pooled") c.retrieval_mode = RetrievalMode::Pooled;
            else throw ConfigError("unknown retrieval mode: " + mode);
        }
        if (j.contains("backend")) {
            const auto& b = j["backend"];
            c.backend.type = b.value("type", std::string("mock"));
            c.backend.script_path = b.value("script", std::string{});
            c.backend.mock_embed_dim = b.value("mock_embed_dim", size_t{64});
            c.backend.live.chat_model = b.value("model", c.backend.live.chat_model);
            c.backend.live.embed_model = b.value("embed_model", c.backend.live.embed_model);
            c.backend.live.base_url = b.value("base_url", c.backend.live.base_url);
            c.backend.live.max_attempts = b.value("max_attempts", c.backend.live.max_attempts);
            c.backend.live.max_inflight = b.value("max_inflight", c.backend.live.max_inflight);
            c.backend.temperature = b.value("temperature", 0.7);
            c.backend.max_tokens = b.value("max_tokens", 1024);
        }
        c.seed = j.value("seed", uint64_t{0});
        c.concurrency = j.value("concurrency", 1);
        c.sequential = j.value("sequential", true);
        c.max_rounds = j.value("max_rounds", 10);
        c.checkpoint_every = j.value("checkpoint_every", size_t{100});
        c.output_dir = j.value("output_dir", std::string("out"));
        c.prompts_dir = j.value("prompts_dir", std::string{});
        if (j.contains("limit")) c.limit = j["limit"].get<size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

std::unique_ptr<Backend> make_backend(const BackendSettings& settings) {
    if (settings.type == "mock") {
        MockScript script;
        if (!settings.script_path.empty()) script = MockScript::from_file(settings.script_path);
        return std::make_unique<MockBackend>(std::move(script), settings.mock_embed_dim);
    }
    LiveBackendConfig live = settings.live;
    live.apply_env();
    return std::make_unique<OpenAiClient>(std::move(live));
}

// ── Ingestion ──────────────────────────────────────────────────

namespace {

PatientCase case_from_medqa(const ordered_json& j, const std::string& path, size_t line_no) {
    PatientCase c;
    c.case_id = j.value("id", "medqa-" + std::to_string(line_no));
    if (!j.contains("question") || !j["question"].is_string())
        throw MalformedRecord(path, line_no, "missing string field \"question\"");
    c.question = j["question"].get<std::string>();
    c.background = j.value("background", std::string{});
    if (!j.contains("options") || !j["options"].is_object() || j["options"].empty())
        throw MalformedRecord(path, line_no, "missing non-empty object field \"options\"");
    for (const auto& [id, text] : j["options"].items())
        c.options.emplace_back(id, text.is_string() ? text.get<std::string>() : text.dump());
    if (!j.contains("answer_idx"))
        throw MalformedRecord(path, line_no, "missing gold field \"answer_idx\"");
    const auto gold = match_option_id(c, j["answer_idx"].get<std::string>());
    if (!gold)
        throw MalformedRecord(path, line_no,
                              "answer_idx \"" + j["answer_idx"].get<std::string>() +
                                  "\" is not an option key");
    c.gold_answer = *gold;
    return c;
}

PatientCase case_from_pubmedqa(const ordered_json& j, const std::string& path, size_t line_no) {
    PatientCase c;
    c.case_id = j.value("id", "pubmedqa-" + std::to_string(line_no));
    if (!j.contains("question") || !j["question"].is_string())
        throw MalformedRecord(path, line_no, "missing string field \"question\"");
    c.question = j["question"].get<std::string>();

    // contexts either flat ("contexts": [...]) or nested ("context": {"contexts": [...]})
    const ordered_json* contexts = nullptr;
    if (j.contains("contexts") && j["contexts"].is_array()) contexts = &j["contexts"];
    else if (j.contains("context") && j["context"].is_object() && j["context"].contains("contexts"))
        contexts = &j["context"]["contexts"];
    if (contexts) {
        std::string joined;
        for (const auto& part : *contexts) {
            if (!joined.empty()) joined += "\n";
            joined += part.is_string() ? part.get<std::string>() : part.dump();
        }
        c.background = joined;
    }

    c.options = {{"yes", "yes"}, {"no", "no"}, {"maybe", "maybe"}};
    if (!j.contains("final_decision"))
        throw MalformedRecord(path, line_no, "missing gold field \"final_decision\"");
    const auto gold = match_option_id(c, j["final_decision"].get<std::string>());
    if (!gold)
        throw MalformedRecord(path, line_no,
                              "final_decision \"" + j["final_decision"].get<std::string>() +
                                  "\" is not yes/no/maybe");
    c.gold_answer = *gold;
    return c;
}

} // namespace

std::vector<PatientCase> ingest(const std::string& path, DatasetKind kind) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::vector<PatientCase> cases;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(path, line_no, std::string("invalid JSON: ") + e.what());
        }
        try {
            PatientCase c = kind == DatasetKind::MedQA ? case_from_medqa(j, path, line_no)
                                                       : case_from_pubmedqa(j, path, line_no);
            c.validate();
            cases.push_back(std::move(c));
        } catch (const MalformedRecord&) {
            throw;
        } catch (const std::exception& e) {
            throw MalformedRecord(path, line_no, e.what());
        }
    }
    return cases;
}

// ── Metrics ────────────────────────────────────────────────────

double macro_f1(const std::vector<std::string>& predictions, const std::vector<std::string>& golds,
                const std::vector<std::string>& labels) {
    if (predictions.size() != golds.size())
        throw LengthMismatch("predictions/golds size mismatch: " + std::to_string(predictions.size()) +
                             " vs " + std::to_string(golds.size()));
    if (predictions.empty()) throw LengthMismatch("macro F1 over empty inputs is undefined");
    for (const std::string& g : golds)
        if (std::find(labels.begin(), labels.end(), g) == labels.end())
            throw LengthMismatch("gold label \"" + g + "\" missing from the label set");

    double sum = 0.0;
    size_t used = 0;
    for (const std::string& label : labels) {
        size_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < predictions.size(); ++i) {
            const bool p = predictions[i] == label;
            const bool g = golds[i] == label;
            if (p && g) ++tp;
            else if (p) ++fp;
            else if (g) ++fn;
        }
        if (tp + fp + fn == 0) continue; // label absent from both sides
        sum += tp == 0 ? 0.0
                       : 2.0 * static_cast<double>(tp) /
                             (2.0 * static_cast<double>(tp) + static_cast<double>(fp) +
                              static_cast<double>(fn));
        ++used;
    }
    return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

std::string Metrics::to_json() const {
    ordered_json j;
    j["n_cases"] = n_cases;
    j["n_scored"] = n_scored;
    j["n_errored"] = n_errored;
    j["n_correct"] = n_correct;
    j["accuracy"] = accuracy;
    j["f1_macro"] = f1_macro;
    j["mean_rounds"] = mean_rounds;
    j["termination_histogram"] = termination_histogram;
    j["specialist_histogram"] = specialist_histogram;
    return j.dump(2);
}

// ── Case logs ──────────────────────────────────────────────────

std::string CaseLog::to_json_line() const {
    ordered_json j;
    j["index"] = index;
    j["case_id"] = case_id;
    if (!config_echo.empty()) j["config"] = ordered_json::parse(config_echo);
    j["errored"] = errored;
    if (errored) {
        j["error"] = error;
    } else {
        ordered_json t;
        t["reasons"] = triage.reasons;
        ordered_json roles = ordered_json::array();
        for (Role r : triage.roles) roles.push_back(role_name(r));
        t["roles"] = roles;
        j["triage"] = t;
        j["consultation_choice"] = consultation_choice;
        ordered_json rev;
        rev["final_choice_id"] = review.final_choice_id;
        rev["overrode_proposal"] = review.overrode_proposal;
        rev["override_failed"] = review.override_failed;
        rev["notes"] = review.notes;
        j["review"] = rev;
        j["correct"] = correct;
        j["result"] = ordered_json::parse(serialize_result(result));
        if (!post_hoc_reflection.empty()) j["post_hoc_reflection"] = post_hoc_reflection;
    }
    j["flags"] = flags;
    return j.dump();
}

std::string EvaluationReport::run_log_text() const {
    std::string out;
    for (const CaseLog& log : cases) {
        out += log.to_json_line();
        out += "\n";
    }
    return out;
}

std::string EvaluationReport::curve_csv_text() const {
    std::ostringstream out;
    out << "cases,accuracy,correct_kb,chain_kb\n";
    for (const CurvePoint& p : curve)
        out << p.cases_seen << "," << p.accuracy << "," << p.correct_kb_size << ","
            << p.chain_kb_size << "\n";
    return out.str();
}

// ── Evaluation ─────────────────────────────────────────────────

namespace {

uint64_t derive_seed(uint64_t base, size_t index) {
    uint64_t z = base + 0x9e3779b97f4a7c15ull * (static_cast<uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct EvalContext {
    const RunConfig& config;
    Backend& backend;
    const PromptTemplates& prompts;
    KbStore* correct_kb = nullptr;
    KbStore* chain_kb = nullptr;
};

CaseLog run_case(const EvalContext& ctx, size_t index, const PatientCase& pcase) {
    CaseLog log;
    log.index = index;
    log.case_id = pcase.case_id;
    log.config_echo = ctx.config.echo_json();
    try {
        TriageOptions topts;
        topts.prompts = &ctx.prompts;
        topts.temperature = ctx.config.backend.temperature;
        topts.max_tokens = ctx.config.backend.max_tokens;
        log.triage = triage(pcase, ctx.backend, topts, &log.flags);

        ConsultationConfig cc;
        cc.max_rounds = ctx.config.max_rounds;
        cc.rng_seed = derive_seed(ctx.config.seed, index);
        cc.kb_policy = ctx.config.mode == RunMode::Vanilla ? KbPolicy::Disabled : KbPolicy::Enabled;
        cc.retrieval_k = ctx.config.retrieval_k;
        cc.retrieval_mode = ctx.config.retrieval_mode;
        cc.temperature = ctx.config.backend.temperature;
        cc.max_tokens = ctx.config.backend.max_tokens;
        cc.prompts = &ctx.prompts;
        KnowledgeHandle handle;
        if (cc.kb_policy == KbPolicy::Enabled) handle = {ctx.correct_kb, ctx.chain_kb};

        ConsultationRun run = run_consultation(pcase, log.triage.roles, ctx.backend, cc, handle);
        log.consultation_choice = run.result.final_choice_id;
        log.flags.insert(log.flags.end(), run.flags.begin(), run.flags.end());
        log.post_hoc_reflection = run.post_hoc_reflection;

        ReviewOptions ropts;
        ropts.prompts = &ctx.prompts;
        ropts.temperature = ctx.config.backend.temperature;
        ropts.max_tokens = ctx.config.backend.max_tokens;
        log.review = safety_review(pcase, run.result.pool.summary_for(run.result.rounds_used),
                                   run.result.final_choice_id, ctx.backend, ropts);
        if (log.review.override_failed) log.flags.push_back("ReviewOverrideFailed");
        else if (log.review.overrode_proposal) log.flags.push_back("ReviewOverrode");
        run.result.final_choice_id = log.review.final_choice_id;
        log.result = std::move(run.result);

        log.correct = log.result.final_choice_id == *pcase.gold_answer;

        // Algorithm order: the outcome is validated (scored) before storage.
        if (ctx.config.mode == RunMode::Train) {
            RoutingOptions kopts;
            kopts.prompts = &ctx.prompts;
            kopts.source_dataset = dataset_kind_name(ctx.config.dataset_kind);
            kopts.temperature = ctx.config.backend.temperature;
            kopts.max_tokens = ctx.config.backend.max_tokens;
            auto entry = route_and_store(log.result, pcase, ctx.backend, *ctx.correct_kb,
                                         *ctx.chain_kb, kopts, &log.flags);
            if (entry)
                log.flags.push_back(entry->is_correct() ? "KbStored:correct" : "KbStored:chain");
        }
    } catch (const std::exception& e) {
        log.errored = true;
        log.error = e.what();
    }
    return log;
}

Metrics compute_metrics(const std::vector<CaseLog>& logs, const std::vector<PatientCase>& cases) {
    Metrics m;
    m.n_cases = logs.size();
    std::vector<std::string> preds, golds;
    std::set<std::string> label_set;
    double rounds_sum = 0.0;
    for (size_t i = 0; i < logs.size(); ++i) {
        const CaseLog& log = logs[i];
        if (log.errored) {
            ++m.n_errored;
            continue;
        }
        ++m.n_scored;
        if (log.correct) ++m.n_correct;
        preds.push_back(log.result.final_choice_id);
        golds.push_back(*cases[i].gold_answer);
        for (const auto& [id, text] : cases[i].options) {
            (void)text;
            label_set.insert(id);
        }
        rounds_sum += log.result.rounds_used;
        ++m.termination_histogram[termination_name(log.result.termination)];
        for (Role r : log.triage.roles) ++m.specialist_histogram[role_name(r)];
    }
    m.accuracy = m.n_scored ? static_cast<double>(m.n_correct) / static_cast<double>(m.n_scored) : 0.0;
    m.mean_rounds = m.n_scored ? rounds_sum / static_cast<double>(m.n_scored) : 0.0;
    if (!preds.empty())
        m.f1_macro = macro_f1(preds, golds, std::vector<std::string>(label_set.begin(), label_set.end()));
    return m;
}

std::vector<CurvePoint> compute_curve(const std::vector<CaseLog>& logs, size_t every,
                                      size_t kb0_correct, size_t kb0_chain) {
    std::vector<CurvePoint> curve;
    size_t scored = 0, correct = 0, grew_correct = 0, grew_chain = 0;
    for (size_t i = 0; i < logs.size(); ++i) {
        const CaseLog& log = logs[i];
        if (!log.errored) {
            ++scored;
            if (log.correct) ++correct;
        }
        for (const std::string& f : log.flags) {
            if (f == "KbStored:correct") ++grew_correct;
            else if (f == "KbStored:chain") ++grew_chain;
        }
        const bool at_checkpoint = (i + 1) % every == 0;
        if (at_checkpoint || i + 1 == logs.size()) {
            if (!at_checkpoint && !curve.empty() && curve.back().cases_seen == i + 1) continue;
            CurvePoint p;
            p.cases_seen = i + 1;
            p.accuracy = scored ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0;
            p.correct_kb_size = kb0_correct + grew_correct;
            p.chain_kb_size = kb0_chain + grew_chain;
            curve.push_back(p);
        }
    }
    return curve;
}

void write_outputs(const RunConfig& config, const EvaluationReport& report) {
    if (config.output_dir.empty()) return;
    fs::create_directories(config.output_dir);
    const auto write = [&](const char* name, const std::string& text) {
        const fs::path path = fs::path(config.output_dir) / name;
        std::ofstream out(path, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << text;
    };
    write("run_log.jsonl", report.run_log_text());
    write("metrics.json", report.metrics.to_json());
    write("curve.csv", report.curve_csv_text());
}

} // namespace

EvaluationReport evaluate(const RunConfig& config) {
    return evaluate(config, {});
}

EvaluationReport evaluate(const RunConfig& config,
                          const std::function<void(size_t, size_t)>& progress) {
    config.validate();

    std::vector<PatientCase> cases = ingest(config.dataset_path, config.dataset_kind);
    if (config.limit && cases.size() > *config.limit) cases.resize(*config.limit);

    const PromptTemplates prompts = config.prompts_dir.empty()
                                        ? PromptTemplates::defaults()
                                        : PromptTemplates::from_dir(config.prompts_dir);
    std::unique_ptr<Backend> backend = make_backend(config.backend);

    KbStore correct_kb("correct"), chain_kb("chain");
    size_t kb0_correct = 0, kb0_chain = 0;
    if (config.mode != RunMode::Vanilla) {
        if (fs::exists(config.correct_kb_path())) correct_kb.load(config.correct_kb_path(), "correct");
        if (fs::exists(config.chain_kb_path())) chain_kb.load(config.chain_kb_path(), "chain");
        kb0_correct = correct_kb.size();
        kb0_chain = chain_kb.size();
        if (config.mode == RunMode::Train) {
            fs::create_directories(config.kb_dir);
            // Write-through from here on; test mode never attaches a file.
            correct_kb.attach_file(config.correct_kb_path());
            chain_kb.attach_file(config.chain_kb_path());
        }
    }

    EvalContext ctx{config, *backend, prompts, &correct_kb, &chain_kb};
    std::vector<CaseLog> logs(cases.size());

    if (config.sequential || config.concurrency == 1 || cases.size() < 2) {
        for (size_t i = 0; i < cases.size(); ++i) {
            logs[i] = run_case(ctx, i, cases[i]);
            if (progress) progress(i + 1, cases.size());
        }
    } else {
        std::atomic<size_t> next{0};
        std::atomic<size_t> done{0};
        const size_t workers = std::min<size_t>(static_cast<size_t>(config.concurrency), cases.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < cases.size(); i = next.fetch_add(1)) {
                    logs[i] = run_case(ctx, i, cases[i]);
                    const size_t d = done.fetch_add(1) + 1;
                    if (progress) progress(d, cases.size());
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    EvaluationReport report;
    report.cases = std::move(logs);
    report.metrics = compute_metrics(report.cases, cases);
    report.curve = compute_curve(report.cases, config.checkpoint_every, kb0_correct, kb0_chain);
    write_outputs(config, report);
    return report;
}

// ── Cross-dataset matrix ───────────────────────────────────────

std::string CrossReport::to_json() const {
    ordered_json j = ordered_json::array();
    for (const CrossCell& cell : cells) {
        ordered_json o;
        o["dataset"] = cell.dataset;
        o["kb_source"] = cell.kb_source;
        o["metrics"] = ordered_json::parse(cell.metrics.to_json());
        j.push_back(std::move(o));
    }
    return j.dump(2);
}

std::string CrossReport::to_table() const {
    std::ostringstream out;
    out << "dataset      kb_source  accuracy  f1_macro\n";
    for (const CrossCell& cell : cells) {
        out << cell.dataset;
        for (size_t i = cell.dataset.size(); i < 13; ++i) out << ' ';
        out << cell.kb_source;
        for (size_t i = cell.kb_source.size(); i < 11; ++i) out << ' ';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f    %.4f", cell.metrics.accuracy, cell.metrics.f1_macro);
        out << buf << "\n";
    }
    return out.str();
}

CrossReport cross_dataset(const RunConfig& config_a, const RunConfig& config_b) {
    // Both KB directories must be complete before any case runs.
    for (const RunConfig* cfg : {&config_a, &config_b}) {
        if (cfg->kb_dir.empty()) throw ConfigError("cross-dataset runs need kb directories in both configs");
        if (!fs::exists(cfg->correct_kb_path()) || !fs::exists(cfg->chain_kb_path()))
            throw ConfigError("missing kb files under " + cfg->kb_dir);
    }

    const struct {
        const RunConfig* config;
    } datasets[] = {{&config_a}, {&config_b}};
    const struct {
        const char* name;
        const RunConfig* kb_owner; // null = vanilla
    } sources[] = {{"vanilla", nullptr}, {"kb_a", &config_a}, {"kb_b", &config_b}};

    CrossReport report;
    for (const auto& ds : datasets) {
        for (const auto& src : sources) {
            RunConfig cell_config = *ds.config;
            if (src.kb_owner == nullptr) {
                cell_config.mode = RunMode::Vanilla;
                cell_config.kb_dir.clear();
            } else {
                cell_config.mode = RunMode::Test;
                cell_config.kb_dir = src.kb_owner->kb_dir;
            }
            if (!ds.config->output_dir.empty())
                cell_config.output_dir =
                    (fs::path(ds.config->output_dir) /
                     ("cross_" + dataset_kind_name(ds.config->dataset_kind) + "_" + src.name))
                        .string();
            CrossCell cell;
            cell.dataset = dataset_kind_name(ds.config->dataset_kind);
            cell.kb_source = src.name;
            cell.metrics = evaluate(cell_config).metrics;
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

} // namespace mdt
