#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mdt/harness.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, std::optional<size_t> limit,
            const std::string& output_dir, std::optional<size_t> checkpoint_every, bool sequential) {
    mdt::RunConfig config = mdt::RunConfig::from_file(config_path);
    if (limit) config.limit = limit;
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (checkpoint_every) config.checkpoint_every = *checkpoint_every;
    if (sequential) config.sequential = true;

    mdt::EvaluationReport report = mdt::evaluate(config, [](size_t done, size_t total) {
        if (done % 10 == 0 || done == total)
            std::cerr << "\r" << done << "/" << total << " cases" << std::flush;
    });
    std::cerr << "\n";
    std::cout << report.metrics.to_json() << "\n";
    if (!config.output_dir.empty())
        std::cerr << "outputs written to " << config.output_dir << "\n";
    return report.metrics.n_errored == report.metrics.n_cases && report.metrics.n_cases > 0 ? 1 : 0;
}

int cmd_cross(const std::string& config_a_path, const std::string& config_b_path,
              const std::string& kb_a, const std::string& kb_b, const std::string& output_dir) {
    mdt::RunConfig a = mdt::RunConfig::from_file(config_a_path);
    mdt::RunConfig b = mdt::RunConfig::from_file(config_b_path);
    if (!kb_a.empty()) a.kb_dir = kb_a;
    if (!kb_b.empty()) b.kb_dir = kb_b;
    if (!output_dir.empty()) {
        a.output_dir = output_dir;
        b.output_dir = output_dir;
    }
    mdt::CrossReport report = mdt::cross_dataset(a, b);
    std::cout << report.to_table();
    if (!output_dir.empty()) {
        fs::create_directories(output_dir);
        std::ofstream out(fs::path(output_dir) / "cross_matrix.json");
        out << report.to_json() << "\n";
        std::cerr << "matrix written to " << output_dir << "/cross_matrix.json\n";
    }
    return 0;
}

int cmd_kb_export(const std::string& dir, const std::string& out_path) {
    mdt::KbStore correct("correct"), chain("chain");
    const fs::path correct_path = fs::path(dir) / "correct.jsonl";
    const fs::path chain_path = fs::path(dir) / "chain.jsonl";
    if (fs::exists(correct_path)) correct.load(correct_path.string(), "correct");
    if (fs::exists(chain_path)) chain.load(chain_path.string(), "chain");

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return 1;
    }
    for (const mdt::KbEntry& e : correct.entries()) out << mdt::kb_entry_to_line(e, "correct") << "\n";
    for (const mdt::KbEntry& e : chain.entries()) out << mdt::kb_entry_to_line(e, "chain") << "\n";
    std::cerr << "exported " << correct.size() << " correct + " << chain.size() << " chain entries\n";
    return 0;
}

int cmd_kb_import(const std::string& dir, const std::string& in_path) {
    std::ifstream in(in_path);
    if (!in) {
        std::cerr << "cannot read " << in_path << "\n";
        return 1;
    }
    mdt::KbStore correct("correct"), chain("chain");
    const fs::path correct_path = fs::path(dir) / "correct.jsonl";
    const fs::path chain_path = fs::path(dir) / "chain.jsonl";
    if (fs::exists(correct_path)) correct.load(correct_path.string(), "correct");
    if (fs::exists(chain_path)) chain.load(chain_path.string(), "chain");

    std::string line;
    size_t line_no = 0, added = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        mdt::KbEntry entry = mdt::kb_entry_from_line(line, in_path, line_no, "");
        (entry.is_correct() ? correct : chain).append(std::move(entry));
        ++added;
    }
    fs::create_directories(dir);
    correct.save(correct_path.string());
    chain.save(chain_path.string());
    std::cerr << "imported " << added << " entries into " << dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) try {
    CLI::App app{"Multi-disciplinary-team consultation engine and benchmark harness"};
    app.require_subcommand(1);

    // run
    std::string run_config, run_output;
    std::optional<size_t> run_limit;
    bool run_sequential = false;
    auto* run = app.add_subcommand("run", "Evaluate a dataset per a declarative config");
    run->add_option("--config", run_config, "Run config JSON file")->required();
    run->add_option("--limit", run_limit, "Cap the number of cases");
    run->add_option("--output-dir", run_output, "Override the config's output directory");
    run->add_flag("--sequential", run_sequential, "Force deterministic dataset order");

    // curve: run with an explicit checkpoint granularity
    std::string curve_config, curve_output;
    size_t curve_every = 100;
    std::optional<size_t> curve_limit;
    auto* curve = app.add_subcommand("curve", "Run and emit the accuracy-vs-experience curve");
    curve->add_option("--config", curve_config, "Run config JSON file")->required();
    curve->add_option("--checkpoint-every", curve_every, "Cases between curve points")
        ->default_val(100);
    curve->add_option("--limit", curve_limit, "Cap the number of cases");
    curve->add_option("--output-dir", curve_output, "Override the config's output directory");

    // cross
    std::string cross_a, cross_b, cross_kb_a, cross_kb_b, cross_output;
    auto* cross = app.add_subcommand("cross", "Cross-dataset generalization matrix");
    cross->add_option("--config-a", cross_a, "Run config for dataset A")->required();
    cross->add_option("--config-b", cross_b, "Run config for dataset B")->required();
    cross->add_option("--kb-a", cross_kb_a, "KB directory built from dataset A");
    cross->add_option("--kb-b", cross_kb_b, "KB directory built from dataset B");
    cross->add_option("--output-dir", cross_output, "Directory for the matrix and cell outputs");

    // kb export/import
    auto* kb = app.add_subcommand("kb", "Knowledge-base maintenance");
    kb->require_subcommand(1);
    std::string kb_dir, kb_out, kb_in;
    auto* kb_export = kb->add_subcommand("export", "Bundle a KB directory into one JSONL file");
    kb_export->add_option("--dir", kb_dir, "KB directory")->required();
    kb_export->add_option("--out", kb_out, "Output JSONL file")->required();
    auto* kb_import = kb->add_subcommand("import", "Append a bundled JSONL file into a KB directory");
    kb_import->add_option("--dir", kb_dir, "KB directory")->required();
    kb_import->add_option("--in", kb_in, "Input JSONL file")->required();

    // prompts export
    std::string prompts_dir = "prompts";
    auto* prompts = app.add_subcommand("prompts", "Prompt template maintenance");
    prompts->require_subcommand(1);
    auto* prompts_export = prompts->add_subcommand("export", "Write the built-in templates to a directory");
    prompts_export->add_option("--dir", prompts_dir, "Target directory")->default_val("prompts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(run_config, run_limit, run_output, std::nullopt, run_sequential);
        if (curve->parsed())
            return cmd_run(curve_config, curve_limit, curve_output, curve_every, true);
        if (cross->parsed()) return cmd_cross(cross_a, cross_b, cross_kb_a, cross_kb_b, cross_output);
        if (kb->parsed()) {
            if (kb_export->parsed()) return cmd_kb_export(kb_dir, kb_out);
            if (kb_import->parsed()) return cmd_kb_import(kb_dir, kb_in);
        }
        if (prompts->parsed() && prompts_export->parsed()) {
            mdt::PromptTemplates::defaults().export_dir(prompts_dir);
            std::cerr << "templates written to " << prompts_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
} catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
}
