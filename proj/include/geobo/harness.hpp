#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "geobo/benchfns.hpp"
#include "geobo/bo.hpp"

namespace geobo {

// Thrown on malformed configuration files or overrides; the CLI maps it to
// exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
    SearchSpace space;
    int dim_d = 2;
    BenchmarkKind objective = BenchmarkKind::ackley;
    std::vector<BoMethod> methods;
    int trials = 30;
    int iters = 100;
    int n_init = 5;
    std::uint64_t master_seed = 0;
    std::string out_dir = "results";
    int jobs = 1;
    bool wall_clock = true;

    void validate() const;
};

// Flat key = value text; '#' starts a comment. Keys: space.kind, space.dim_D,
// space.dim_d, space.eig_lo, space.eig_hi, objective, methods, trials, iters,
// n_init, seed, out_dir, jobs, timing.
ExperimentConfig parse_config_file(const std::string& path);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct RecordRow {
    std::string method;
    int trial = 0;
    int iteration = 0;
    double y = 0.0;
    double best_y = 0.0;
    double simple_regret = 0.0;
    double elapsed_ms = 0.0;
};

struct ExperimentOutcome {
    int aborted_trials = 0;
    std::string records_path;
    std::string summary_path;
    std::string final_path;
    std::string meta_path;
    double f_star = 0.0;
};

// Runs the methods x trials matrix with trial-level parallelism. All methods
// of a trial share the planted objective and the initial design through the
// trial seed. Writes records.csv, summary.csv, final.csv and meta.txt into
// cfg.out_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

std::vector<RecordRow> read_records_csv(const std::string& path);
void write_records_csv(std::ostream& os, const std::vector<RecordRow>& rows);

struct SummaryRow {
    std::string method;
    int iteration = 0;
    double median_log_regret = 0.0;
    double q1_log_regret = 0.0;
    double q3_log_regret = 0.0;
};

struct FinalRow {
    std::string method;
    int trial = 0;
    double log_regret = 0.0;
};

// Per-(method, iteration) median and quartiles of log10(simple_regret + 1e-12),
// plus the final-iteration distribution for boxplots.
void summarize(const std::vector<RecordRow>& rows, std::vector<SummaryRow>* summary,
               std::vector<FinalRow>* final_rows);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);
void write_final_csv(std::ostream& os, const std::vector<FinalRow>& rows);

// Linear-interpolation quantile of a sorted sample (the spreadsheet
// convention); p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace geobo
