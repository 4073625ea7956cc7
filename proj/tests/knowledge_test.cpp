#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "mdt/knowledge.hpp"
#include "scripted_cases.hpp"

using namespace mdt;

namespace {

EmbeddingVector vec(std::vector<double> values) { return EmbeddingVector{std::move(values), "test"}; }

// extended-precision reference
long double cosine_oracle(const EmbeddingVector& a, const EmbeddingVector& b) {
    long double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += static_cast<long double>(a.values[i]) * b.values[i];
        na += static_cast<long double>(a.values[i]) * a.values[i];
        nb += static_cast<long double>(b.values[i]) * b.values[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

KbEntry correct_entry(Backend& backend, const std::string& question, int64_t created_at = 0,
                      const std::string& background = "") {
    KbEntry e;
    e.record = CorrectRecord{question, "A", "summary of the final round"};
    e.embedding = backend.embed(embedding_key(background, question));
    e.source_dataset = "medqa";
    e.created_at = created_at;
    return e;
}

KbEntry chain_entry(Backend& backend, const std::string& question) {
    KbEntry e;
    e.record = ChainRecord{question, "B", "hypothesis", "analysis", "conclusion", "reflection"};
    e.embedding = backend.embed(embedding_key("", question));
    e.source_dataset = "medqa";
    return e;
}

} // namespace

TEST_CASE("cosine of a vector with itself is 1") {
    const EmbeddingVector v = vec({0.3, -1.2, 0.5, 2.0});
    CHECK(std::abs(cosine(v, v) - 1.0) < 1e-9);
}

TEST_CASE("cosine of orthogonal unit vectors is 0") {
    CHECK(std::abs(cosine(vec({1, 0, 0}), vec({0, 1, 0}))) < 1e-15);
    CHECK(std::abs(cosine(vec({0, 0, 1}), vec({0, 1, 0}))) < 1e-15);
}

TEST_CASE("cosine rejects mismatched dimensions and zero vectors") {
    CHECK_THROWS_AS(cosine(vec({1, 2}), vec({1, 2, 3})), DimensionMismatch);
    CHECK_THROWS_AS(cosine(vec({0, 0, 0}), vec({1, 2, 3})), ZeroVector);
}

TEST_CASE("cosine matches the extended-precision oracle on random pairs") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const size_t dim = 2 + rng() % 256;
        std::vector<double> a(dim), b(dim);
        for (size_t i = 0; i < dim; ++i) {
            a[i] = dist(rng);
            b[i] = dist(rng);
        }
        const EmbeddingVector va = vec(a), vb = vec(b);
        const double got = cosine(va, vb);
        CHECK(std::abs(got - static_cast<double>(cosine_oracle(va, vb))) < 1e-9);
        // symmetry
        CHECK(std::abs(got - cosine(vb, va)) < 1e-12);
    }
}

TEST_CASE("retrieval from empty stores returns nothing") {
    MockBackend backend;
    KbStore correct("correct"), chain("chain");
    const RetrievalResult r = retrieve(test::make_case("q-1"), backend, correct, chain, 5);
    CHECK(r.correct_hits.empty());
    CHECK(r.chain_hits.empty());
}

TEST_CASE("k larger than the store returns everything, sorted") {
    MockBackend backend;
    KbStore correct("correct"), chain("chain");
    for (int i = 0; i < 3; ++i)
        correct.append(correct_entry(backend, "stored question " + std::to_string(i)));
    const RetrievalResult r = retrieve(test::make_case("q-2"), backend, correct, chain, 5);
    REQUIRE(r.correct_hits.size() == 3);
    CHECK(r.correct_hits[0].score >= r.correct_hits[1].score);
    CHECK(r.correct_hits[1].score >= r.correct_hits[2].score);
    CHECK(r.chain_hits.empty());
}

TEST_CASE("top-k equals the exhaustive-scan oracle on a hundred mock entries") {
    MockBackend backend;
    KbStore correct("correct"), chain("chain");
    for (int i = 0; i < 100; ++i)
        correct.append(correct_entry(backend, "entry text " + std::to_string(i), i + 1));

    const PatientCase query = test::make_case("q-3");
    const EmbeddingVector qv = backend.embed(embedding_key(query.background, query.question));

    // oracle: full scan, full sort with the same tie-break
    struct Scored {
        double score;
        int64_t created_at;
        size_t id;
    };
    std::vector<Scored> oracle;
    for (const KbEntry& e : correct.entries()) oracle.push_back({cosine(qv, e.embedding), e.created_at, e.id});
    std::sort(oracle.begin(), oracle.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.created_at != b.created_at) return a.created_at < b.created_at;
        return a.id < b.id;
    });

    const RetrievalResult r = retrieve(query, backend, correct, chain, 5);
    REQUIRE(r.correct_hits.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(r.correct_hits[i].score == oracle[i].score);
        CHECK(r.correct_hits[i].entry.id == oracle[i].id);
    }
}

TEST_CASE("top-k stays oracle-exact on a ten-thousand-entry store") {
    MockBackend backend;
    KbStore store("correct");
    std::mt19937_64 rng(71);
    std::vector<EmbeddingVector> vocab;
    for (int i = 0; i < 500; ++i) vocab.push_back(backend.embed("vocab " + std::to_string(i)));
    for (int i = 0; i < 10000; ++i) {
        KbEntry e;
        e.record = CorrectRecord{"bulk " + std::to_string(i), "a", "s"};
        e.embedding = vocab[rng() % vocab.size()]; // repeated vectors force score ties
        e.created_at = static_cast<int64_t>(1 + rng() % 100);
        e.source_dataset = "x";
        store.append(std::move(e));
    }
    const EmbeddingVector qv = backend.embed("bulk query");

    struct Ref {
        double score;
        int64_t created_at;
        size_t id;
    };
    std::vector<Ref> oracle;
    for (const KbEntry& e : store.entries()) oracle.push_back({cosine(qv, e.embedding), e.created_at, e.id});
    std::sort(oracle.begin(), oracle.end(), [](const Ref& a, const Ref& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.created_at != b.created_at) return a.created_at < b.created_at;
        return a.id < b.id;
    });

    const auto hits = store.top_k(qv, 7);
    REQUIRE(hits.size() == 7);
    for (size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].score == oracle[i].score);
        CHECK(hits[i].entry.id == oracle[i].id);
    }
}

TEST_CASE("score ties break by created_at then insertion id") {
    KbStore correct("correct");
    KbEntry a, b, c;
    a.record = CorrectRecord{"q", "A", "s"};
    a.embedding = vec({1, 0});
    a.created_at = 200;
    b = a;
    b.created_at = 100;
    c = a;
    c.created_at = 200;
    correct.append(a); // id 0
    correct.append(b); // id 1, earlier timestamp
    correct.append(c); // id 2, same as a
    const auto hits = correct.top_k(vec({1, 0}), 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].entry.id == 1); // earliest created_at
    CHECK(hits[1].entry.id == 0); // tie on created_at -> lower id
    CHECK(hits[2].entry.id == 2);
}

TEST_CASE("kb_gate implements the three access rules") {
    // never during the initial round
    CHECK(kb_gate(1, false, false) == KbGate::NoKb);
    CHECK(kb_gate(1, false, true) == KbGate::NoKb);
    // from round 2 on, in cases where conflicting opinions arise
    CHECK(kb_gate(2, false, true) == KbGate::InjectIntoPrompt);
    CHECK(kb_gate(5, false, true) == KbGate::InjectIntoPrompt);
    CHECK(kb_gate(2, false, false) == KbGate::NoKb);
    CHECK(kb_gate(9, false, false) == KbGate::NoKb);
    // reflective measure after a discussion that closed in round 1
    CHECK(kb_gate(1, true, false) == KbGate::PostHocReflect);
    CHECK(kb_gate(1, true, true) == KbGate::PostHocReflect);
    // nonsensical combinations still answer deterministically
    CHECK(kb_gate(3, true, false) == KbGate::NoKb);
    CHECK(kb_gate(3, true, true) == KbGate::InjectIntoPrompt);
    CHECK_THROWS_AS(kb_gate(0, false, false), std::invalid_argument);
}

TEST_CASE("an empty store saves to an empty file") {
    test::TempDir dir;
    KbStore kb("correct");
    const std::string path = (dir.path / "empty.jsonl").string();
    kb.save(path);
    CHECK(test::read_file(path).empty());
}

TEST_CASE("save/load round-trips retrieval output exactly") {
    test::TempDir dir;
    MockBackend backend;
    KbStore original("correct");
    for (int i = 0; i < 10; ++i)
        original.append(correct_entry(backend, "case history " + std::to_string(i)));
    const std::string path = (dir.path / "kb.jsonl").string();
    original.save(path);

    KbStore loaded("correct");
    loaded.load(path, "correct");
    REQUIRE(loaded.size() == 10);

    for (const char* query : {"case history 3", "something unrelated", "case history"}) {
        const EmbeddingVector qv = backend.embed(query);
        const auto before = original.top_k(qv, 5);
        const auto after = loaded.top_k(qv, 5);
        REQUIRE(before.size() == after.size());
        for (size_t i = 0; i < before.size(); ++i) {
            CHECK(before[i].score == after[i].score);
            CHECK(before[i].entry.id == after[i].entry.id);
            CHECK(before[i].entry.embedding.values == after[i].entry.embedding.values);
            CHECK(before[i].entry.record_json() == after[i].entry.record_json());
        }
    }
}

TEST_CASE("a corrupted line reports its line number") {
    test::TempDir dir;
    MockBackend backend;
    KbStore kb("correct");
    kb.append(correct_entry(backend, "fine entry"));
    const std::string path = (dir.path / "kb.jsonl").string();
    kb.save(path);
    test::write_file(path, test::read_file(path) + "{not json at all\n");

    KbStore loaded("correct");
    try {
        loaded.load(path, "correct");
        FAIL("expected SchemaVersionMismatch");
    } catch (const SchemaVersionMismatch& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
}

TEST_CASE("a wrong schema version is rejected") {
    test::TempDir dir;
    const std::string path = (dir.path / "kb.jsonl").string();
    test::write_file(path, R"({"schema_version": 99, "kind": "correct", "record": {}, )"
                           R"("embedding": [1.0], "source_dataset": "x", "created_at": 1})"
                           "\n");
    KbStore kb("correct");
    CHECK_THROWS_AS(kb.load(path, "correct"), SchemaVersionMismatch);
}

TEST_CASE("record JSON carries the exact published field names") {
    KbEntry correct;
    correct.record = CorrectRecord{"q", "a", "s"};
    const auto cj = nlohmann::ordered_json::parse(correct.record_json());
    std::vector<std::string> correct_keys;
    for (const auto& [k, v] : cj.items()) correct_keys.push_back(k);
    CHECK(correct_keys == std::vector<std::string>{"Question", "Answer", "Summary of S_final4"});

    KbEntry chain;
    chain.record = ChainRecord{"q", "a", "h", "p", "c", "r"};
    const auto hj = nlohmann::ordered_json::parse(chain.record_json());
    std::vector<std::string> chain_keys;
    for (const auto& [k, v] : hj.items()) chain_keys.push_back(k);
    CHECK(chain_keys == std::vector<std::string>{"Question", "Correct Answer", "Initial Hypothesis",
                                                 "Analysis Process", "Final Conclusion",
                                                 "Error Reflection"});
}

namespace {

ConsultationResult result_for(const PatientCase& pcase, const std::string& final_choice) {
    ConsultationResult r;
    r.case_id = pcase.case_id;
    r.final_choice_id = final_choice;
    r.termination = Termination::Consensus;
    r.rounds_used = 1;
    RoundSummary s;
    s.round = 1;
    s.consistency = {"agreed"};
    s.integration = {"the panel settled on {" + final_choice + "}"};
    s.votes = {{"Radiologist", final_choice}, {"Pathologist", final_choice}};
    r.pool.append(s);
    r.per_round_statements.push_back({});
    return r;
}

} // namespace

TEST_CASE("a correct outcome grows CorrectKB only") {
    PatientCase pcase = test::make_case("route-1", "D");
    MockScript script;
    script.add(pcase.case_id + "/Chain-of-Thought Reviewer/0", test::reviewer_reply_for(pcase));
    MockBackend backend(script);
    KbStore correct("correct"), chain("chain");

    const auto entry = route_and_store(result_for(pcase, "D"), pcase, backend, correct, chain);
    REQUIRE(entry.has_value());
    CHECK(entry->is_correct());
    CHECK(correct.size() == 1);
    CHECK(chain.size() == 0);
}

TEST_CASE("an incorrect outcome grows ChainKB with a non-empty error reflection") {
    PatientCase pcase = test::make_case("route-2", "D");
    MockScript script;
    script.add(pcase.case_id + "/Chain-of-Thought Reviewer/0", test::reviewer_reply_for(pcase));
    MockBackend backend(script);
    KbStore correct("correct"), chain("chain");

    const auto entry = route_and_store(result_for(pcase, "B"), pcase, backend, correct, chain);
    REQUIRE(entry.has_value());
    CHECK_FALSE(entry->is_correct());
    CHECK(correct.size() == 0);
    CHECK(chain.size() == 1);
    const auto& record = std::get<ChainRecord>(entry->record);
    CHECK_FALSE(record.error_reflection.empty());
}

TEST_CASE("exactly one store grows per routed case") {
    MockScript script;
    std::vector<PatientCase> cases;
    for (int i = 0; i < 20; ++i) {
        PatientCase pcase = test::make_case("route-batch-" + std::to_string(i), "A");
        script.add(pcase.case_id + "/Chain-of-Thought Reviewer/0", test::reviewer_reply_for(pcase));
        cases.push_back(std::move(pcase));
    }
    MockBackend backend(script);
    KbStore correct("correct"), chain("chain");
    std::mt19937_64 rng(3);
    for (const PatientCase& pcase : cases) {
        const size_t before = correct.size() + chain.size();
        const std::string delivered = rng() % 2 ? "A" : "B";
        route_and_store(result_for(pcase, delivered), pcase, backend, correct, chain);
        CHECK(correct.size() + chain.size() == before + 1);
    }
    CHECK(correct.size() + chain.size() == 20);
}

TEST_CASE("an unusable reviewer reply skips the entry and flags it") {
    PatientCase pcase = test::make_case("route-3", "A");
    MockScript script;
    script.set_fallback("no json from me");
    MockBackend backend(script);
    KbStore correct("correct"), chain("chain");
    std::vector<std::string> flags;

    const auto entry = route_and_store(result_for(pcase, "A"), pcase, backend, correct, chain, {}, &flags);
    CHECK_FALSE(entry.has_value());
    CHECK(correct.size() == 0);
    CHECK(chain.size() == 0);
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].find("KbEntrySkipped") != std::string::npos);
}

TEST_CASE("routing requires a gold answer") {
    PatientCase pcase = test::make_case("route-4", "A");
    pcase.gold_answer.reset();
    MockBackend backend;
    KbStore correct("correct"), chain("chain");
    CHECK_THROWS_AS(route_and_store(result_for(pcase, "A"), pcase, backend, correct, chain),
                    std::invalid_argument);
}

TEST_CASE("pooled retrieval keeps the best k overall") {
    MockBackend backend;
    KbStore correct("correct"), chain("chain");
    for (int i = 0; i < 8; ++i) correct.append(correct_entry(backend, "c " + std::to_string(i)));
    for (int i = 0; i < 8; ++i) chain.append(chain_entry(backend, "h " + std::to_string(i)));

    const PatientCase query = test::make_case("q-4");
    const auto per_kb = retrieve(query, backend, correct, chain, 5, RetrievalMode::PerKb);
    CHECK(per_kb.correct_hits.size() == 5);
    CHECK(per_kb.chain_hits.size() == 5);

    const auto pooled = retrieve(query, backend, correct, chain, 5, RetrievalMode::Pooled);
    CHECK(pooled.correct_hits.size() + pooled.chain_hits.size() == 5);

    // oracle: best five scores across both stores
    std::vector<double> all;
    for (const auto& h : per_kb.correct_hits) all.push_back(h.score);
    for (const auto& h : per_kb.chain_hits) all.push_back(h.score);
    std::sort(all.rbegin(), all.rend());
    std::vector<double> kept;
    for (const auto& h : pooled.correct_hits) kept.push_back(h.score);
    for (const auto& h : pooled.chain_hits) kept.push_back(h.score);
    std::sort(kept.rbegin(), kept.rend());
    for (size_t i = 0; i < 5; ++i) CHECK(kept[i] == all[i]);
}

TEST_CASE("write-through appends keep the backing file loadable") {
    test::TempDir dir;
    MockBackend backend;
    const std::string path = (dir.path / "live.jsonl").string();
    KbStore kb("correct");
    kb.attach_file(path);
    kb.append(correct_entry(backend, "first"));
    kb.append(correct_entry(backend, "second"));

    KbStore loaded("correct");
    loaded.load(path, "correct");
    CHECK(loaded.size() == 2);
}
