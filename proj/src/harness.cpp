#include "geobo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <omp.h>

namespace geobo {

namespace {

constexpr double kLogFloor = 1e-12;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + value + "'");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    space.validate();
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (methods.empty()) throw ConfigError("methods must be nonempty");
    if (iters < 0) throw ConfigError("iters must be >= 0");
    if (n_init < 1) throw ConfigError("n_init must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (dim_d < 1 || dim_d >= space.dim) throw ConfigError("space.dim_d must lie in [1, dim_D)");
    if (out_dir.empty()) throw ConfigError("out_dir must be set");
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "space.kind") {
        if (value == "sphere") cfg.space.kind = SearchSpace::Kind::sphere;
        else if (value == "spd") cfg.space.kind = SearchSpace::Kind::spd;
        else throw ConfigError("space.kind must be sphere or spd");
    } else if (key == "space.dim_D") {
        cfg.space.dim = static_cast<int>(parse_int(key, value));
    } else if (key == "space.dim_d") {
        cfg.dim_d = static_cast<int>(parse_int(key, value));
    } else if (key == "space.eig_lo") {
        const double lo = parse_double(key, value);
        const double hi = cfg.space.eig_bounds ? cfg.space.eig_bounds->second : lo + 1.0;
        cfg.space.eig_bounds = {lo, hi};
    } else if (key == "space.eig_hi") {
        const double hi = parse_double(key, value);
        const double lo = cfg.space.eig_bounds ? cfg.space.eig_bounds->first : hi / 10.0;
        cfg.space.eig_bounds = {lo, hi};
    } else if (key == "objective") {
        auto k = parse_benchmark(value);
        if (!k) throw ConfigError("unknown objective '" + value + "'");
        cfg.objective = *k;
    } else if (key == "methods") {
        cfg.methods.clear();
        for (const std::string& name : split(value, ',')) {
            auto m = parse_bo_method(name);
            if (!m) throw ConfigError("unknown method '" + name + "'");
            cfg.methods.push_back(*m);
        }
    } else if (key == "trials") {
        cfg.trials = static_cast<int>(parse_int(key, value));
    } else if (key == "iters") {
        cfg.iters = static_cast<int>(parse_int(key, value));
    } else if (key == "n_init") {
        cfg.n_init = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
        cfg.master_seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "jobs") {
        cfg.jobs = static_cast<int>(parse_int(key, value));
    } else if (key == "timing") {
        if (value == "wall") cfg.wall_clock = true;
        else if (value == "none") cfg.wall_clock = false;
        else throw ConfigError("timing must be wall or none");
    } else {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void write_records_csv(std::ostream& os, const std::vector<RecordRow>& rows) {
    os << "method,trial,iteration,y,best_y,simple_regret,elapsed_ms\n";
    for (const auto& r : rows) {
        os << r.method << ',' << r.trial << ',' << r.iteration << ',' << fmt_double(r.y) << ','
           << fmt_double(r.best_y) << ',' << fmt_double(r.simple_regret) << ','
           << fmt_double(r.elapsed_ms) << '\n';
    }
}

std::vector<RecordRow> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open records file " + path);
    std::vector<RecordRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 7) throw ConfigError("malformed records row: " + line);
        RecordRow r;
        r.method = f[0];
        r.trial = static_cast<int>(parse_int("trial", f[1]));
        r.iteration = static_cast<int>(parse_int("iteration", f[2]));
        r.y = parse_double("y", f[3]);
        r.best_y = parse_double("best_y", f[4]);
        r.simple_regret = parse_double("simple_regret", f[5]);
        r.elapsed_ms = parse_double("elapsed_ms", f[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

void summarize(const std::vector<RecordRow>& rows, std::vector<SummaryRow>* summary,
               std::vector<FinalRow>* final_rows) {
    // (method, iteration) -> log regrets across trials, preserving method order.
    std::vector<std::string> method_order;
    std::map<std::string, std::map<int, std::vector<double>>> by_method;
    std::map<std::string, std::map<int, std::pair<int, double>>> last_per_trial;
    for (const auto& r : rows) {
        if (by_method.find(r.method) == by_method.end()) method_order.push_back(r.method);
        const double lr = std::log10(std::max(r.simple_regret, 0.0) + kLogFloor);
        by_method[r.method][r.iteration].push_back(lr);
        auto& last = last_per_trial[r.method][r.trial];
        if (r.iteration >= last.first) last = {r.iteration, lr};
    }
    if (summary) {
        summary->clear();
        for (const auto& method : method_order) {
            for (auto& [iter, values] : by_method[method]) {
                std::sort(values.begin(), values.end());
                SummaryRow s;
                s.method = method;
                s.iteration = iter;
                s.median_log_regret = quantile_sorted(values, 0.5);
                s.q1_log_regret = quantile_sorted(values, 0.25);
                s.q3_log_regret = quantile_sorted(values, 0.75);
                summary->push_back(std::move(s));
            }
        }
    }
    if (final_rows) {
        final_rows->clear();
        for (const auto& method : method_order) {
            for (const auto& [trial, last] : last_per_trial[method]) {
                FinalRow f;
                f.method = method;
                f.trial = trial;
                f.log_regret = last.second;
                final_rows->push_back(std::move(f));
            }
        }
    }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
    os << "method,iteration,median_log_regret,q1_log_regret,q3_log_regret\n";
    for (const auto& r : rows) {
        os << r.method << ',' << r.iteration << ',' << fmt_double(r.median_log_regret) << ','
           << fmt_double(r.q1_log_regret) << ',' << fmt_double(r.q3_log_regret) << '\n';
    }
}

void write_final_csv(std::ostream& os, const std::vector<FinalRow>& rows) {
    os << "method,trial,log_regret\n";
    for (const auto& r : rows)
        os << r.method << ',' << r.trial << ',' << fmt_double(r.log_regret) << '\n';
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    struct Task {
        std::size_t method_index;
        int trial;
    };
    std::vector<Task> tasks;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
        for (int t = 0; t < cfg.trials; ++t) tasks.push_back({mi, t});

    const double f_star = embedded_f_star(cfg.space, cfg.dim_d, cfg.objective);

    std::vector<std::vector<RecordRow>> task_rows(tasks.size());
    std::vector<char> task_aborted(tasks.size(), 0);
    std::vector<std::uint64_t> trial_seeds(static_cast<std::size_t>(cfg.trials));
    for (int t = 0; t < cfg.trials; ++t)
        trial_seeds[static_cast<std::size_t>(t)] =
            sub_seed(cfg.master_seed, "trial", static_cast<std::uint64_t>(t));

#pragma omp parallel for schedule(dynamic) num_threads(cfg.jobs)
    for (std::int64_t ti = 0; ti < static_cast<std::int64_t>(tasks.size()); ++ti) {
        const Task task = tasks[static_cast<std::size_t>(ti)];
        const std::uint64_t trial_seed = trial_seeds[static_cast<std::size_t>(task.trial)];
        try {
            EmbeddedObjective objective =
                make_embedded_objective(cfg.space, cfg.dim_d, cfg.objective, trial_seed);
            BoConfig bo;
            bo.method = cfg.methods[task.method_index];
            bo.n_init = cfg.n_init;
            bo.n_iter = cfg.iters;
            bo.latent_dim = cfg.dim_d;
            bo.seed = trial_seed;
            bo.measure_time = cfg.wall_clock;
            BoResult result = run_bo([&objective](const Vec& x) { return objective(x); },
                                     cfg.space, bo);
            if (result.aborted) task_aborted[static_cast<std::size_t>(ti)] = 1;

            std::vector<double> ys;
            ys.reserve(result.history.size());
            for (const auto& h : result.history) ys.push_back(h.y);
            const std::vector<double> regret = simple_regret(ys, f_star);

            auto& rows = task_rows[static_cast<std::size_t>(ti)];
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < result.history.size(); ++i) {
                best = std::min(best, result.history[i].y);
                RecordRow r;
                r.method = to_string(bo.method);
                r.trial = task.trial;
                r.iteration = static_cast<int>(i);
                r.y = result.history[i].y;
                r.best_y = best;
                r.simple_regret = regret[i];
                r.elapsed_ms = result.history[i].elapsed_ms;
                rows.push_back(std::move(r));
            }
        } catch (const std::exception&) {
            task_aborted[static_cast<std::size_t>(ti)] = 1;
        }
    }

    std::vector<RecordRow> rows;
    int aborted = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        aborted += task_aborted[i] ? 1 : 0;
        rows.insert(rows.end(), task_rows[i].begin(), task_rows[i].end());
    }

    ExperimentOutcome out;
    out.aborted_trials = aborted;
    out.f_star = f_star;
    out.records_path = (fs::path(cfg.out_dir) / "records.csv").string();
    out.summary_path = (fs::path(cfg.out_dir) / "summary.csv").string();
    out.final_path = (fs::path(cfg.out_dir) / "final.csv").string();
    out.meta_path = (fs::path(cfg.out_dir) / "meta.txt").string();

    {
        std::ofstream os(out.records_path);
        write_records_csv(os, rows);
    }
    {
        std::vector<SummaryRow> summary;
        std::vector<FinalRow> finals;
        summarize(rows, &summary, &finals);
        std::ofstream os(out.summary_path);
        write_summary_csv(os, summary);
        std::ofstream of(out.final_path);
        write_final_csv(of, finals);
    }
    {
        std::ofstream os(out.meta_path);
        os << "space.kind = "
           << (cfg.space.kind == SearchSpace::Kind::sphere ? "sphere" : "spd") << '\n';
        os << "space.dim_D = " << cfg.space.dim << '\n';
        os << "space.dim_d = " << cfg.dim_d << '\n';
        if (cfg.space.eig_bounds) {
            os << "space.eig_lo = " << fmt_double(cfg.space.eig_bounds->first) << '\n';
            os << "space.eig_hi = " << fmt_double(cfg.space.eig_bounds->second) << '\n';
        }
        os << "objective = " << to_string(cfg.objective) << '\n';
        os << "methods = ";
        for (std::size_t i = 0; i < cfg.methods.size(); ++i)
            os << (i ? "," : "") << to_string(cfg.methods[i]);
        os << '\n';
        os << "trials = " << cfg.trials << '\n';
        os << "iters = " << cfg.iters << '\n';
        os << "n_init = " << cfg.n_init << '\n';
        os << "seed = " << cfg.master_seed << '\n';
        os << "jobs = " << cfg.jobs << '\n';
        os << "timing = " << (cfg.wall_clock ? "wall" : "none") << '\n';
        os << "f_star = " << fmt_double(f_star) << '\n';
        os << "aborted_trials = " << aborted << '\n';
        for (int t = 0; t < cfg.trials; ++t)
            os << "trial_seed." << t << " = " << trial_seeds[static_cast<std::size_t>(t)] << '\n';
    }
    return out;
}

}  // namespace geobo
