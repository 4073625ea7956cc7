// Optional live smoke: runs a handful of cases through an OpenAI-compatible
// endpoint. Requires MDT_API_KEY (and optionally MDT_BASE_URL); skips
// cleanly when the key is absent so CI never depends on the network.

#include <cstdlib>
#include <iostream>

#include "mdt/harness.hpp"
#include "scripted_cases.hpp"

using namespace mdt;

namespace {

const char* kQuestions[10] = {
    "A 23-year-old pregnant woman at 22 weeks gestation presents with burning upon urination, "
    "worsening despite hydration. No costovertebral angle tenderness. Which is the best treatment?",
    "A 3-week-old infant regurgitates all feeds with yellow vomit and a minimally distended "
    "abdomen. Which embryologic error accounts for this presentation?",
    "A 55-year-old man with crushing substernal chest pain radiating to the left arm has ST "
    "elevations in leads II, III, and aVF. Which artery is most likely occluded?",
    "A 30-year-old woman has episodic palpitations, diaphoresis, and hypertension with elevated "
    "urinary metanephrines. What is the most likely diagnosis?",
    "A 7-year-old boy has periorbital edema, dark urine, and recent sore throat two weeks ago. "
    "Which finding is most likely on renal biopsy?",
    "A 68-year-old smoker has painless hematuria. Which initial imaging study is most appropriate?",
    "A 25-year-old man has a painless testicular mass that does not transilluminate. What is the "
    "next best step in management?",
    "A 45-year-old woman has fatigue, weight gain, and cold intolerance with an elevated TSH. "
    "Which therapy is indicated?",
    "A 60-year-old man on long-term amiodarone develops exertional dyspnea and a dry cough. Which "
    "study best evaluates the suspected toxicity?",
    "A 19-year-old college student has fever, neck stiffness, and a petechial rash. What is the "
    "most appropriate empiric therapy?",
};

} // namespace

int main() {
    if (std::getenv("MDT_API_KEY") == nullptr) {
        std::cout << "[SKIP] live smoke: MDT_API_KEY not set\n";
        return 0;
    }

    test::TempDir dir;
    std::vector<PatientCase> cases;
    for (int i = 0; i < 10; ++i) {
        PatientCase c = test::make_case("live-" + std::to_string(i), "A");
        c.question = kQuestions[i];
        c.background.clear();
        cases.push_back(std::move(c));
    }
    const std::string dataset = test::write_medqa_jsonl(dir.path, cases);

    RunConfig config;
    config.dataset_path = dataset;
    config.dataset_kind = DatasetKind::MedQA;
    config.mode = RunMode::Vanilla;
    config.backend.type = "openai";
    config.max_rounds = 3; // keep the bill bounded
    config.seed = 42;
    config.output_dir = (dir.path / "out").string();

    try {
        const EvaluationReport report = evaluate(config, [](size_t done, size_t total) {
            std::cout << "case " << done << "/" << total << " done\n";
        });
        if (report.metrics.n_errored > 0) {
            std::cout << "[FAIL] live smoke: " << report.metrics.n_errored << " cases errored\n";
            for (const CaseLog& log : report.cases)
                if (log.errored) std::cout << "       - " << log.case_id << ": " << log.error << "\n";
            return 1;
        }
        for (const CaseLog& log : report.cases) {
            const PatientCase& c = cases[log.index];
            if (!c.has_option(log.result.final_choice_id)) {
                std::cout << "[FAIL] live smoke: " << log.case_id << " answered outside its options\n";
                return 1;
            }
        }
        std::cout << "[PASS] live smoke: 10 cases, no transport or schema errors, all answers "
                     "in-option\n";
        return 0;
    } catch (const std::exception& e) {
        std::cout << "[FAIL] live smoke: " << e.what() << "\n";
        return 1;
    }
}
