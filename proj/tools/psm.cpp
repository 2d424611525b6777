// psm: propensity score matching from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "psm/report.hpp"
#include "psm/synth.hpp"

namespace {

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    psm::detail::write_atomically(path, body);
    std::cout << "wrote " << path.string() << "\n";
}

psm::GeneratorConfig preset(const std::string& name, std::size_t n, std::uint64_t seed, std::optional<double> effect) {
    if (name == "glioma") {
        auto c = psm::glioma_like_config(n, seed);
        if (effect) {
            c.true_effect = *effect;
        }
        return c;
    }
    if (name == "null") {
        return psm::no_confounding_config(n, seed, effect.value_or(0.15));
    }
    auto c = psm::strong_confounding_config(n, seed);
    if (effect) {
        c.true_effect = *effect;
    }
    return c;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Propensity score matching: fit, match, check balance and estimate treatment effects"};
    app.set_version_flag("--version", std::string(psm::version));

    psm::RunConfig config;
    std::string config_file;
    std::string input;
    std::string schema;
    std::string treatment;
    std::string outcome;
    std::string caliper;
    std::string caliper_scale;
    std::string order;
    std::string seed;
    std::string replicates;
    std::string bootstrap_unit;
    std::string ate_mode;
    std::string threshold;
    std::string bins;
    std::string out;
    std::string emit;
    std::string threads;
    bool validate_only = false;
    bool quiet = false;

    app.add_option("--config", config_file, "Flat key = value config file; flags override it")->check(CLI::ExistingFile);
    app.add_option("--input", input, "Cohort CSV");
    app.add_option("--schema", schema, "Schema JSON (default: bundled glioma schema)");
    app.add_option("--treatment", treatment, "Treatment column, overriding the schema");
    app.add_option("--outcome", outcome, "Outcome column, overriding the schema");
    app.add_option("--caliper", caliper, "Caliper as a multiple of the propensity score SD (default 0.25)");
    app.add_option("--caliper-scale", caliper_scale, "probability or logit (default probability)");
    app.add_option("--order", order, "Matching order: random or descending (default random)");
    app.add_option("--seed", seed, "Seed; required for random order");
    app.add_option("--replicates", replicates, "Bootstrap replicates (default 2000)");
    app.add_option("--bootstrap-unit", bootstrap_unit, "pair or record (default pair)");
    app.add_option("--ate-mode", ate_mode, "weighted or pooled_pairs (default weighted)");
    app.add_option("--threshold", threshold, "Balance threshold on |SMD| (default 0.1)");
    app.add_option("--bins", bins, "Propensity histogram bins (default 20)");
    app.add_option("--out", out, "Output directory (default $PSM_OUTPUT_DIR, else ./psm_out)");
    app.add_option("--emit", emit, "Comma-separated outputs: report_json, balance_csv, pairs_csv, histograms_csv, loveplot_csv, loveplot_svg, all");
    app.add_option("--threads", threads, "Bootstrap worker threads (default: all cores)");
    app.add_flag("--validate-only", validate_only, "Check inputs and configuration without running");
    app.add_flag("-q,--quiet", quiet, "Do not print the text summary");

    auto* synth = app.add_subcommand("synth", "Write a synthetic cohort with known effect and its schema");
    std::string synth_preset = "glioma";
    std::size_t synth_n = 0;
    std::uint64_t synth_seed = 1;
    std::optional<double> synth_effect;
    std::string synth_out = "synthetic";
    synth->add_option("--preset", synth_preset, "glioma, null or confounded")->check(CLI::IsMember({"glioma", "null", "confounded"}));
    synth->add_option("--n", synth_n, "Number of records (default depends on preset)");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--effect", synth_effect, "True effect on the risk scale");
    synth->add_option("--out", synth_out, "Output path prefix; writes <prefix>.csv and <prefix>.schema.json");

    auto* fixture = app.add_subcommand("fixture", "Write the glioma marginals fixture and the glioma schema");
    std::string fixture_dir = "data";
    fixture->add_option("--out", fixture_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const std::size_t n = synth_n ? synth_n : (synth_preset == "glioma" ? 839 : synth_preset == "null" ? 1000 : 2000);
            const auto cfg = preset(synth_preset, n, synth_seed, synth_effect);
            const auto gen = psm::generate(cfg);
            write_file(synth_out + ".csv", [&](std::ostream& o) { psm::write_csv(o, gen.cohort); });
            write_file(synth_out + ".schema.json", [&](std::ostream& o) { o << cfg.schema().to_json().dump(2) << '\n'; });
            std::cout << "truth " << gen.truth << " (treated " << gen.truth_att << ", controls " << gen.truth_atc << ")\n";
            return 0;
        }
        if (*fixture) {
            const std::filesystem::path dir = fixture_dir;
            const auto cohort = psm::glioma_marginals_fixture();
            write_file(dir / "glioma_marginals.csv", [&](std::ostream& o) { psm::write_csv(o, cohort); });
            write_file(dir / "glioma_schema.json", [&](std::ostream& o) { o << psm::glioma_schema().to_json().dump(2) << '\n'; });
            return 0;
        }

        if (!config_file.empty()) {
            psm::apply_config_file(config, config_file);
        }
        const std::pair<const char*, const std::string*> flags[] = {
            {"input", &input}, {"schema", &schema}, {"treatment", &treatment}, {"outcome", &outcome},
            {"caliper", &caliper}, {"caliper_scale", &caliper_scale}, {"order", &order}, {"seed", &seed},
            {"replicates", &replicates}, {"bootstrap_unit", &bootstrap_unit}, {"ate_mode", &ate_mode},
            {"threshold", &threshold}, {"bins", &bins}, {"out", &out}, {"emit", &emit}, {"threads", &threads},
        };
        for (const auto& [key, value] : flags) {
            if (!value->empty()) {
                psm::apply_setting(config, key, *value);
            }
        }
    } catch (const psm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return psm::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (validate_only) {
        const auto findings = psm::validate(config);
        for (const auto& f : findings) {
            std::cerr << f.code << ": " << f.message << "\n";
        }
        if (findings.empty()) {
            std::cout << "ok\n";
        }
        return findings.empty() ? 0 : 2;
    }

    const auto result = psm::run(config);
    for (const auto& f : result.findings) {
        std::cerr << f.code << ": " << f.message << "\n";
    }
    if (result.exit_code != 0) {
        if (result.findings.empty()) {
            std::cerr << "error: " << result.error << "\n";
        }
        return result.exit_code;
    }
    if (!quiet) {
        std::cout << psm::render_text(result.report);
        for (const auto& path : result.written) {
            std::cout << "wrote " << path << "\n";
        }
    }
    return 0;
}
