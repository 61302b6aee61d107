#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geobo/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
    geobo::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = geobo::parse_config_file(config_path);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw geobo::ConfigError("override must be key=value: " + kv);
        geobo::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    const geobo::ExperimentOutcome out = geobo::run_experiment(cfg);
    std::cout << "records: " << out.records_path << "\n"
              << "summary: " << out.summary_path << "\n"
              << "final:   " << out.final_path << "\n"
              << "meta:    " << out.meta_path << "\n"
              << "f_star:  " << out.f_star << "\n";
    if (out.aborted_trials > 0) {
        std::cerr << out.aborted_trials << " trial(s) aborted\n";
        return 1;
    }
    return 0;
}

int cmd_summarize(const std::string& in_path, const std::string& out_dir) {
    const auto rows = geobo::read_records_csv(in_path);
    std::vector<geobo::SummaryRow> summary;
    std::vector<geobo::FinalRow> finals;
    geobo::summarize(rows, &summary, &finals);
    if (out_dir.empty()) {
        geobo::write_summary_csv(std::cout, summary);
    } else {
        std::ofstream os(out_dir + "/summary.csv");
        geobo::write_summary_csv(os, summary);
        std::ofstream of(out_dir + "/final.csv");
        geobo::write_final_csv(of, finals);
    }
    return 0;
}

int cmd_beta_min(const std::string& manifold, int dim, int n_samples, std::uint64_t seed) {
    geobo::ManifoldPtr m;
    if (manifold == "sphere") {
        m = std::make_shared<geobo::Sphere>(dim);
    } else if (manifold == "spd") {
        m = std::make_shared<geobo::Spd>(dim);
    } else if (manifold == "euclidean") {
        m = std::make_shared<geobo::Euclidean>(dim);
    } else {
        throw geobo::ConfigError("unknown manifold '" + manifold + "'");
    }
    std::cout << geobo::estimate_beta_min(*m, n_samples, seed) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometry-aware Bayesian optimization experiment runner"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a method x trial experiment matrix");
    std::string config_path;
    run->add_option("--config", config_path, "Flat key = value configuration file");
    std::vector<std::string> overrides;
    // Every config key is also a flag of the same name.
    std::map<std::string, std::string> flag_values;
    for (const char* key :
         {"space.kind", "space.dim_D", "space.dim_d", "space.eig_lo", "space.eig_hi", "objective",
          "methods", "trials", "iters", "n_init", "seed", "out_dir", "jobs", "timing"}) {
        run->add_option_function<std::string>(
            std::string("--") + key,
            [key, &overrides](const std::string& v) { overrides.push_back(std::string(key) + "=" + v); },
            std::string("Override config key ") + key);
    }

    // summarize
    auto* summ = app.add_subcommand("summarize", "Recompute summary statistics from records.csv");
    std::string in_path;
    summ->add_option("--in", in_path, "records.csv path")->required();
    std::string summ_out;
    summ->add_option("--out-dir", summ_out, "Directory for summary.csv / final.csv (stdout if unset)");

    // beta-min
    auto* bmin = app.add_subcommand("beta-min", "Estimate the kernel validity floor beta_min");
    std::string manifold = "sphere";
    int dim = 3;
    int n_samples = 50;
    std::uint64_t seed = 0xB3AA51u;
    bmin->add_option("--manifold", manifold, "sphere | spd | euclidean");
    bmin->add_option("--dim", dim, "Manifold dimension");
    bmin->add_option("--samples", n_samples, "Points per resampled set");
    bmin->add_option("--seed", seed, "Seed for the resampled sets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, overrides);
        if (summ->parsed()) return cmd_summarize(in_path, summ_out);
        if (bmin->parsed()) return cmd_beta_min(manifold, dim, n_samples, seed);
    } catch (const geobo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
