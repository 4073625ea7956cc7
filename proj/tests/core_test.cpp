#include <doctest.h>

#include <random>

#include "mdt/core.hpp"
#include "scripted_cases.hpp"

using namespace mdt;

TEST_CASE("option id normalization strips braces and whitespace") {
    CHECK(normalize_option_id("{E}") == "E");
    CHECK(normalize_option_id(" yes ") == "yes");
    CHECK(normalize_option_id("{{B}}.") == "B");
    CHECK(normalize_option_id("\"maybe\",") == "maybe");
    CHECK(normalize_option_id("A") == "A");
    CHECK_THROWS_AS(normalize_option_id("{}"), EmptyAfterNormalization);
    CHECK_THROWS_AS(normalize_option_id("  "), EmptyAfterNormalization);
}

TEST_CASE("option matching is case-insensitive against the case's keys") {
    PatientCase pcase = test::make_case("c1");
    // oracle: exhaustive match against the option keys after case-fold
    CHECK(match_option_id(pcase, "e") == "E");
    CHECK(match_option_id(pcase, "{a}") == "A");
    CHECK(match_option_id(pcase, "F") == std::nullopt);
    CHECK(match_option_id(pcase, "") == std::nullopt);

    PatientCase pubmed = test::make_pubmed_case("c2");
    CHECK(match_option_id(pubmed, " YES ") == "yes");
    CHECK(match_option_id(pubmed, "{Maybe}") == "maybe");
}

TEST_CASE("patient case invariants") {
    PatientCase c = test::make_case("ok");
    CHECK_NOTHROW(c.validate());

    PatientCase no_options = c;
    no_options.options.clear();
    CHECK_THROWS_AS(no_options.validate(), std::invalid_argument);

    PatientCase dup = c;
    dup.options.emplace_back("a", "duplicate after case-fold");
    CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

    PatientCase bad_gold = c;
    bad_gold.gold_answer = "Z";
    CHECK_THROWS_AS(bad_gold.validate(), std::invalid_argument);
}

TEST_CASE("role parsing by normalized exact name") {
    CHECK(parse_role("Pediatrician") == Role::Pediatrician);
    CHECK(parse_role("  obstetrician and gynecologist ") == Role::ObstetricianGynecologist);
    CHECK(parse_role("General  Internal   Medicine Doctor") == Role::GeneralInternalMedicine);
    CHECK(parse_role("Cardiologist") == std::nullopt);
    CHECK(is_specialist(Role::Pharmacist));
    CHECK_FALSE(is_specialist(Role::LeadPhysician));
    CHECK(specialist_roles().size() == 8);
    CHECK(mandatory_roles().size() == 3);
}

namespace {

RoundSummary make_summary(int round, std::map<std::string, std::string> votes, bool with_conflict) {
    RoundSummary s;
    s.round = round;
    s.consistency = {"consistency note"};
    if (with_conflict) s.conflict = {"conflict note"};
    s.integration = {"integration note"};
    s.votes = std::move(votes);
    return s;
}

} // namespace

TEST_CASE("round summary invariants") {
    // conflict empty <=> unanimous votes
    CHECK_NOTHROW(
        validate_round_summary(make_summary(1, {{"Radiologist", "A"}, {"Pharmacist", "A"}}, false)));
    CHECK_NOTHROW(
        validate_round_summary(make_summary(1, {{"Radiologist", "A"}, {"Pharmacist", "B"}}, true)));
    CHECK_THROWS_AS(
        validate_round_summary(make_summary(1, {{"Radiologist", "A"}, {"Pharmacist", "B"}}, false)),
        std::invalid_argument);
    CHECK_THROWS_AS(
        validate_round_summary(make_summary(1, {{"Radiologist", "A"}, {"Pharmacist", "A"}}, true)),
        std::invalid_argument);

    RoundSummary no_integration = make_summary(1, {{"Radiologist", "A"}}, false);
    no_integration.integration.clear();
    CHECK_THROWS_AS(validate_round_summary(no_integration), std::invalid_argument);
}

TEST_CASE("pool appends stay contiguous and write-once") {
    HistoricalSharedPool pool;
    CHECK(pool.empty());
    pool.append(make_summary(1, {{"Radiologist", "A"}}, false));
    pool.append(make_summary(2, {{"Radiologist", "B"}}, false));
    CHECK(pool.last_round() == 2);
    CHECK_THROWS_AS(pool.append(make_summary(2, {{"Radiologist", "B"}}, false)), NonContiguousRound);
    CHECK_THROWS_AS(pool.append(make_summary(4, {{"Radiologist", "B"}}, false)), NonContiguousRound);
    CHECK(pool.summary_for(1).round == 1);
    CHECK_THROWS_AS(pool.summary_for(3), MissingSummary);
}

TEST_CASE("empty pool serializes to {}") {
    CHECK(serialize_pool(HistoricalSharedPool{}) == "{}");
}

TEST_CASE("single-round pool matches the golden storage format") {
    RoundSummary s;
    s.round = 1;
    s.consistency = {"Most experts chose {D}: blockade of presynaptic acetylcholine release at the "
                     "neuromuscular junction."};
    s.conflict = {"The neurologist favored {B}: autoantibodies against the presynaptic voltage-gated "
                  "calcium channels."};
    s.independence = {"Only the radiologist weighed the imaging findings."};
    s.integration = {
        "The panel leans to {D}; the divergent autoimmune mechanism remains under discussion."};
    s.votes = {{"Pediatrician", "D"},
               {"Neurologist", "B"},
               {"Pathologist", "D"},
               {"Pharmacist", "D"},
               {"Radiologist", "D"}};
    HistoricalSharedPool pool;
    pool.append(s);

    const std::string golden = test::read_file(std::string(MDT_TEST_GOLDEN_DIR) + "/pool_round1.json");
    CHECK(serialize_pool(pool) == golden);
}

namespace {

HistoricalSharedPool random_pool(std::mt19937_64& rng) {
    const auto text = [&](const std::string& tag, size_t i) {
        return tag + "-" + std::to_string(i) + "-" + std::to_string(rng() % 1000);
    };
    HistoricalSharedPool pool;
    const int rounds = 1 + static_cast<int>(rng() % 4);
    for (int r = 1; r <= rounds; ++r) {
        RoundSummary s;
        s.round = r;
        const bool unanimous = rng() % 2 == 0;
        const char* roles[] = {"Radiologist", "Pathologist", "Pharmacist", "Neurologist"};
        const size_t n_roles = 2 + rng() % 3;
        for (size_t k = 0; k < n_roles; ++k)
            s.votes[roles[k]] = unanimous ? "A" : std::string(1, static_cast<char>('A' + k % 3));
        if (!votes_unanimous(s)) s.conflict.push_back(text("conflict", 0));
        for (size_t i = 0; i < rng() % 3; ++i) s.consistency.push_back(text("consistency", i));
        for (size_t i = 0; i < rng() % 3; ++i) s.independence.push_back(text("independence", i));
        s.integration.push_back(text("integration", 0));
        pool.append(s);
    }
    return pool;
}

bool pools_equal(const HistoricalSharedPool& a, const HistoricalSharedPool& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        const RoundSummary& x = a.rounds()[i];
        const RoundSummary& y = b.rounds()[i];
        if (x.round != y.round || x.consistency != y.consistency || x.conflict != y.conflict ||
            x.independence != y.independence || x.integration != y.integration || x.votes != y.votes)
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("pool serialization round-trips structurally") {
    std::mt19937_64 rng(20240811);
    for (int i = 0; i < 200; ++i) {
        const HistoricalSharedPool pool = random_pool(rng);
        const std::string text = serialize_pool(pool);
        const HistoricalSharedPool back = parse_pool(text);
        CHECK(pools_equal(pool, back));
        CHECK(serialize_pool(back) == text);
    }
}

TEST_CASE("parsing rejects pools with gaps or bad shapes") {
    CHECK_THROWS_AS(parse_pool(R"({"round 2": {"consistency": [], "conflict": [],
                                   "independence": [], "integration": ["x"],
                                   "_votes": {"Radiologist": "A"}}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_pool("[1, 2]"), std::invalid_argument);
    CHECK(parse_pool("{}").empty());
}

TEST_CASE("prompt rendering of a summary hides the votes key") {
    RoundSummary s = make_summary(1, {{"Radiologist", "A"}}, false);
    const std::string text = render_summary_for_prompt(s);
    CHECK(text.find("_votes") == std::string::npos);
    CHECK(text.find("consistency") != std::string::npos);
    CHECK(text.find("integration") != std::string::npos);
}

TEST_CASE("patient case canonical JSON round-trips") {
    PatientCase original = test::make_case("case-json", "D");
    const std::string text = serialize_case(original);
    const PatientCase back = parse_case(text);
    CHECK(back.case_id == original.case_id);
    CHECK(back.background == original.background);
    CHECK(back.question == original.question);
    CHECK(back.options == original.options);
    CHECK(back.gold_answer == original.gold_answer);
    CHECK(serialize_case(back) == text);

    PatientCase no_gold = original;
    no_gold.gold_answer.reset();
    CHECK(serialize_case(no_gold).find("gold_answer") == std::string::npos);
}

TEST_CASE("termination names round-trip") {
    for (Termination t : {Termination::Consensus, Termination::MajorityRule, Termination::TieRandom})
        CHECK(parse_termination(termination_name(t)) == t);
    CHECK(parse_termination("Unknown") == std::nullopt);
}

TEST_CASE("statement validation enforces the option-key invariant") {
    PatientCase pcase = test::make_case("c1");
    Statement ok{1, Role::Radiologist, "reasoning", "E", "Nitrofurantoin"};
    CHECK_NOTHROW(validate_statement(ok, pcase));

    Statement bad_choice = ok;
    bad_choice.choice_id = "Z";
    CHECK_THROWS_AS(validate_statement(bad_choice, pcase), std::invalid_argument);

    Statement bad_round = ok;
    bad_round.round = 0;
    CHECK_THROWS_AS(validate_statement(bad_round, pcase), std::invalid_argument);

    Statement bad_role = ok;
    bad_role.role = Role::LeadPhysician;
    CHECK_THROWS_AS(validate_statement(bad_role, pcase), std::invalid_argument);
}
