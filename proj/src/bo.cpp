#include "geobo/bo.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "geobo/errors.hpp"

namespace geobo {

namespace {

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

std::string to_string(BoMethod m) {
    switch (m) {
        case BoMethod::hd_gabo: return "hd_gabo";
        case BoMethod::gabo: return "gabo";
        case BoMethod::random_search: return "random";
        case BoMethod::euclidean_gp: return "euclidean_gp";
    }
    return "unknown";
}

std::optional<BoMethod> parse_bo_method(const std::string& s) {
    if (s == "hd_gabo") return BoMethod::hd_gabo;
    if (s == "gabo") return BoMethod::gabo;
    if (s == "random" || s == "random_search") return BoMethod::random_search;
    if (s == "euclidean_gp") return BoMethod::euclidean_gp;
    return std::nullopt;
}

void SearchSpace::validate() const {
    if (dim < 1) throw std::invalid_argument("SearchSpace: dim must be >= 1");
    if (kind == Kind::spd) {
        if (!eig_bounds) return;
        if (!(eig_bounds->first > 0.0) || !(eig_bounds->second > eig_bounds->first))
            throw std::invalid_argument("SearchSpace: bad eigenvalue bounds");
    }
}

ManifoldPtr SearchSpace::make_manifold() const {
    validate();
    if (kind == Kind::sphere) return std::make_shared<Sphere>(dim);
    const double lo = eig_bounds ? eig_bounds->first : 0.1;
    const double hi = eig_bounds ? eig_bounds->second : 10.0;
    return std::make_shared<Spd>(dim, lo, hi);
}

void BoConfig::validate(const SearchSpace& space) const {
    if (n_init < 1) throw std::invalid_argument("BoConfig: n_init must be >= 1");
    if (n_iter < 0) throw std::invalid_argument("BoConfig: n_iter must be >= 0");
    if (method == BoMethod::hd_gabo) {
        if (latent_dim < 1 || latent_dim > space.dim)
            throw std::invalid_argument("BoConfig: latent_dim must lie in [1, D]");
    }
    if (acq_restarts < 1) throw std::invalid_argument("BoConfig: acq_restarts must be >= 1");
    if (refit_every < 1) throw std::invalid_argument("BoConfig: refit_every must be >= 1");
}

double expected_improvement(double mean, double variance, double best_y) {
    if (variance < 0.0) throw std::invalid_argument("expected_improvement: negative variance");
    const double sigma = std::sqrt(variance);
    const double improvement = best_y - mean;
    if (sigma < 1e-9) return std::max(improvement, 0.0);
    const double gamma = improvement / sigma;
    return sigma * (gamma * normal_cdf(gamma) + normal_pdf(gamma));
}

Vec optimize_acquisition(const std::function<std::pair<double, double>(const Vec&)>& posterior,
                         double best_y, const Manifold& domain, const ConstraintSet* constraints,
                         int restarts, const std::vector<Vec>& extra_starts, std::uint64_t seed,
                         int tr_iterations) {
    Objective neg_ei = [&](const Vec& z) {
        try {
            auto [mean, var] = posterior(z);
            return -expected_improvement(mean, var, best_y);
        } catch (const std::exception&) {
            return 1e12;
        }
    };

    std::vector<Vec> starts = extra_starts;
    {
        Rng rng = make_rng(sub_seed(seed, "acq_starts"));
        for (int r = 0; r < restarts; ++r) starts.push_back(domain.random_point(rng));
    }

    TrustRegionConfig cfg = default_tr_config(domain);
    cfg.max_outer = tr_iterations;
    cfg.grad_tol = 1e-7;

    Vec best_point;
    double best_val = std::numeric_limits<double>::infinity();
    auto consider = [&](const Vec& z) {
        const double v = neg_ei(z);
        if (v < best_val) {
            best_val = v;
            best_point = z;
        }
    };

    for (const Vec& z0 : starts) {
        consider(z0);
        try {
            TrResult r = trust_region_minimize(domain, neg_ei, nullptr, z0, cfg, constraints);
            consider(r.x);
        } catch (const std::exception&) {
            // A failed restart falls back to its starting point.
        }
    }
    return best_point;
}

std::vector<Vec> draw_initial_design(const SearchSpace& space, int n_init, std::uint64_t seed) {
    ManifoldPtr m = space.make_manifold();
    Rng rng = make_rng(sub_seed(seed, "init"));
    std::vector<Vec> xs;
    xs.reserve(static_cast<std::size_t>(n_init));
    for (int i = 0; i < n_init; ++i) xs.push_back(m->random_point(rng));
    return xs;
}

double cached_sphere_beta_min(int sphere_dim) {
    static std::map<int, double> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(sphere_dim);
    if (it != cache.end()) return it->second;
    Sphere s(sphere_dim);
    const double value = estimate_beta_min(s, 50, 0xB3AA51u);
    cache[sphere_dim] = value;
    return value;
}

Mat clamp_spd_eigenvalues(const Mat& x, double lo, double hi) {
    SymEig e = eig_sym(sym_part(x), 1e-6);
    Vec lam = e.lam.cwiseMax(lo).cwiseMin(hi);
    return sym_part(e.q * lam.asDiagonal() * e.q.transpose());
}

namespace {

struct LoopState {
    std::vector<Vec> xs;
    std::vector<double> ys;
    std::vector<HistoryEntry> history;
    int warnings = 0;

    int best_index() const {
        int best = 0;
        for (std::size_t i = 1; i < ys.size(); ++i)
            if (ys[i] < ys[best]) best = static_cast<int>(i);
        return best;
    }
};

// Evaluates the objective and appends to the history; rethrows after
// recording nothing so callers can persist the partial history.
void evaluate_and_record(const BlackBoxFn& objective, const Vec& x, bool measure_time,
                         LoopState& st) {
    const double t0 = measure_time ? now_ms() : 0.0;
    const double y = objective(x);
    if (!std::isfinite(y)) throw std::runtime_error("objective returned a non-finite value");
    HistoryEntry e;
    e.x = x;
    e.y = y;
    e.elapsed_ms = measure_time ? now_ms() - t0 : 0.0;
    st.xs.push_back(x);
    st.ys.push_back(y);
    st.history.push_back(std::move(e));
}

BoResult finish(LoopState&& st, bool aborted) {
    BoResult res;
    res.aborted = aborted;
    res.warnings = st.warnings;
    if (!st.ys.empty()) {
        const int best = st.best_index();
        res.recommendation = st.xs[static_cast<std::size_t>(best)];
        res.best_y = st.ys[static_cast<std::size_t>(best)];
    }
    res.history = std::move(st.history);
    return res;
}

double min_distance_to_data(const Manifold& m, const Vec& x, const std::vector<Vec>& xs) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const Vec& xi : xs) dmin = std::min(dmin, m.distance(x, xi));
    return dmin;
}

// Feasible random point used for duplicate replacement and fallbacks.
Vec fallback_point(const SearchSpace& space, const Manifold& m, std::uint64_t seed, int iter) {
    Rng rng = make_rng(sub_seed(seed, "fallback", static_cast<std::uint64_t>(iter)));
    (void)space;
    return m.random_point(rng);
}

// Shared GaBO / HD-GaBO loop; latent_dim == space.dim runs the full-manifold
// version (identity mapping, no reconstruction step).
BoResult run_geometry_bo(const BlackBoxFn& objective, const SearchSpace& space,
                         const BoConfig& cfg, int latent_dim) {
    ManifoldPtr high = space.make_manifold();
    const auto* spd_high = dynamic_cast<const Spd*>(high.get());
    const bool reduced = latent_dim < space.dim;

    const double beta_min_latent =
        space.kind == SearchSpace::Kind::sphere ? cached_sphere_beta_min(latent_dim) : 0.0;

    LoopState st;
    bool aborted = false;
    try {
        for (const Vec& x : draw_initial_design(space, cfg.n_init, cfg.seed))
            evaluate_and_record(objective, x, cfg.measure_time, st);
    } catch (const std::exception&) {
        return finish(std::move(st), true);
    }

    // Latent-space constraint set for bounded SPD runs; by eigenvalue
    // interlacing the projections of feasible data stay feasible.
    ManifoldPtr latent_for_cs;
    std::optional<ConstraintSet> cs;

    MgpModel model;
    bool have_model = false;
    std::optional<SpdReconstructionParams> warm_recon_spd;
    std::optional<std::vector<double>> warm_recon_radii;

    for (int n = 0; n < cfg.n_iter; ++n) {
        Vec x_next;
        try {
            // Refresh the surrogate (mapping + kernel hyperparameters).
            if (!have_model || n % cfg.refit_every == 0) {
                const bool periodic_full = have_model && cfg.full_refit_every > 0 && n > 0 &&
                                           n % cfg.full_refit_every == 0 && st.xs.size() >= 12;
                MgpFitOptions mopts;
                mopts.beta_min = beta_min_latent;
                mopts.seed = sub_seed(cfg.seed, "mgp", static_cast<std::uint64_t>(n));
                mopts.gp_tr_iterations = cfg.gp_tr_iterations;
                if (have_model && !periodic_full) {
                    mopts.warm_start = &model;
                    mopts.multistarts = 1;
                    mopts.alternation_rounds = cfg.refit_alternation_rounds;
                    mopts.map_tr_iterations = cfg.refit_map_tr_iterations;
                    mopts.map_tcg_cap = 4;
                    mopts.gp_restarts = 0;
                } else if (periodic_full) {
                    mopts.warm_start = &model;
                    mopts.multistarts = cfg.full_refit_multistarts;
                    mopts.alternation_rounds = cfg.full_refit_rounds;
                    mopts.map_tr_iterations = cfg.full_refit_map_tr_iterations;
                    mopts.include_greedy_start = st.xs.size() <= 40;
                    mopts.gp_restarts = 0;
                } else {
                    mopts.multistarts = cfg.init_multistarts;
                    mopts.alternation_rounds = cfg.init_alternation_rounds;
                    mopts.map_tr_iterations = cfg.init_map_tr_iterations;
                }
                Vec y_vec = Eigen::Map<const Vec>(st.ys.data(), static_cast<Eigen::Index>(st.ys.size()));
                model = mgp_fit(high, st.xs, y_vec, latent_dim, mopts);
                have_model = true;
            }

            if (spd_high && spd_high->sample_eig_lo() > 0.0 && space.eig_bounds && !cs) {
                latent_for_cs = model.latent;
                cs = spd_eigenvalue_bound_constraints(
                    *dynamic_cast<const Spd*>(model.latent.get()), space.eig_bounds->first,
                    space.eig_bounds->second);
            }

            // Acquisition in the latent space from the incumbent's projection
            // plus seeded restarts.
            const int best = st.best_index();
            const double best_y = st.ys[static_cast<std::size_t>(best)];
            std::vector<Vec> extra;
            extra.push_back(model.project(st.xs[static_cast<std::size_t>(best)]));
            auto posterior = [&](const Vec& z) { return gp_posterior(model.gp, z); };
            Vec z_next = optimize_acquisition(
                posterior, best_y, *model.latent, cs ? &*cs : nullptr, cfg.acq_restarts, extra,
                sub_seed(cfg.seed, "acq", static_cast<std::uint64_t>(n)), cfg.acq_tr_iterations);

            // Reconstruction parameters, then the query in the original space.
            if (!reduced) {
                x_next = z_next;
            } else if (space.kind == SearchSpace::Kind::sphere) {
                SphereFitOptions ropts;
                ropts.warm_start = warm_recon_radii;
                ropts.max_iterations = warm_recon_radii ? 40 : 120;
                SphereReconstructionFit rf;
                std::vector<Vec> zs;
                zs.reserve(st.xs.size());
                for (const Vec& x : st.xs) zs.push_back(model.project(x));
                rf = fit_reconstruction_sphere(st.xs, zs, model.sphere_map->axes, ropts);
                warm_recon_radii = rf.radii;
                NestedSphereParams inv(model.sphere_map->axes, rf.radii);
                try {
                    x_next = sphere_unproject(z_next, inv);
                } catch (const SingularProjectionError&) {
                    ++st.warnings;
                    Rng rng = make_rng(sub_seed(cfg.seed, "perturb", static_cast<std::uint64_t>(n)));
                    Vec tangent = model.latent->random_tangent(z_next, rng);
                    tangent *= 1e-6 / std::max(tangent.norm(), 1e-300);
                    x_next = sphere_unproject(model.latent->exp(z_next, tangent), inv);
                }
                x_next /= x_next.norm();
            } else {
                const auto* spd_lat = dynamic_cast<const Spd*>(model.latent.get());
                std::vector<Mat> x_mats, z_mats;
                x_mats.reserve(st.xs.size());
                z_mats.reserve(st.xs.size());
                for (const Vec& x : st.xs) {
                    x_mats.push_back(spd_high->to_mat(x));
                    z_mats.push_back(spd_lat->to_mat(model.project(x)));
                }
                SpdFitOptions ropts;
                ropts.outer_rounds = warm_recon_spd ? 2 : 5;
                ropts.inner_iterations = warm_recon_spd ? 8 : 20;
                ropts.warm_start = warm_recon_spd;
                SpdReconstructionFit rf =
                    fit_reconstruction_spd(x_mats, z_mats, model.spd_map->w, ropts);
                warm_recon_spd = rf.params;
                Mat x_mat = spd_unproject(spd_lat->to_mat(z_next), *model.spd_map, rf.params);
                if (space.eig_bounds)
                    x_mat = clamp_spd_eigenvalues(x_mat, space.eig_bounds->first,
                                                  space.eig_bounds->second);
                x_next = spd_high->to_vec(x_mat);
            }

            // Duplicate guard against Gram degeneracy.
            if (min_distance_to_data(*high, x_next, st.xs) < 1e-8) {
                ++st.warnings;
                x_next = fallback_point(space, *high, cfg.seed, n);
            }
        } catch (const SingularProjectionError&) {
            ++st.warnings;
            x_next = fallback_point(space, *high, cfg.seed, n);
        } catch (const InfeasibleError&) {
            ++st.warnings;
            x_next = fallback_point(space, *high, cfg.seed, n);
        }

        try {
            evaluate_and_record(objective, x_next, cfg.measure_time, st);
        } catch (const std::exception&) {
            aborted = true;
            break;
        }
    }
    return finish(std::move(st), aborted);
}

}  // namespace

BoResult run_gabo(const BlackBoxFn& objective, const SearchSpace& space, const BoConfig& cfg) {
    cfg.validate(space);
    return run_geometry_bo(objective, space, cfg, space.dim);
}

BoResult run_hd_gabo(const BlackBoxFn& objective, const SearchSpace& space, const BoConfig& cfg) {
    cfg.validate(space);
    return run_geometry_bo(objective, space, cfg, cfg.latent_dim);
}

BoResult run_random_search(const BlackBoxFn& objective, const SearchSpace& space,
                           const BoConfig& cfg) {
    cfg.validate(space);
    ManifoldPtr m = space.make_manifold();
    LoopState st;
    bool aborted = false;
    try {
        for (const Vec& x : draw_initial_design(space, cfg.n_init, cfg.seed))
            evaluate_and_record(objective, x, cfg.measure_time, st);
        Rng rng = make_rng(sub_seed(cfg.seed, "random_search"));
        for (int n = 0; n < cfg.n_iter; ++n)
            evaluate_and_record(objective, m->random_point(rng), cfg.measure_time, st);
    } catch (const std::exception&) {
        aborted = true;
    }
    return finish(std::move(st), aborted);
}

BoResult run_euclidean_gp(const BlackBoxFn& objective, const SearchSpace& space,
                          const BoConfig& cfg) {
    cfg.validate(space);
    ManifoldPtr high = space.make_manifold();
    const auto* spd_high = dynamic_cast<const Spd*>(high.get());
    auto ambient = std::make_shared<Euclidean>(static_cast<int>(high->ambient_size()));

    // Projection of an ambient optimizer result back onto the search space.
    auto to_space = [&](const Vec& v) -> Vec {
        if (space.kind == SearchSpace::Kind::sphere) {
            Vec x = v;
            const double n = x.norm();
            return n > 1e-12 ? Vec(x / n) : Vec(Vec::Unit(x.size(), 0));
        }
        Mat m = sym_part(spd_high->to_mat(v));
        const double lo = space.eig_bounds ? space.eig_bounds->first : 1e-3;
        const double hi = space.eig_bounds ? space.eig_bounds->second : 1e3;
        return spd_high->to_vec(clamp_spd_eigenvalues(m, lo, hi));
    };

    LoopState st;
    bool aborted = false;
    try {
        for (const Vec& x : draw_initial_design(space, cfg.n_init, cfg.seed))
            evaluate_and_record(objective, x, cfg.measure_time, st);
    } catch (const std::exception&) {
        return finish(std::move(st), true);
    }

    std::optional<Vec> warm_params;
    for (int n = 0; n < cfg.n_iter; ++n) {
        Vec x_next;
        try {
            GpFitOptions gopts;
            gopts.seed = sub_seed(cfg.seed, "egp", static_cast<std::uint64_t>(n));
            gopts.tr_iterations = cfg.gp_tr_iterations;
            if (warm_params) {
                gopts.warm_params = warm_params;
            } else {
                gopts.restarts = 2;
            }
            Vec y_vec = Eigen::Map<const Vec>(st.ys.data(), static_cast<Eigen::Index>(st.ys.size()));
            GpFit fit = fit_gp(ambient, st.xs, y_vec, 0.0, gopts);
            warm_params = fit.opt_params;

            const int best = st.best_index();
            const double best_y = st.ys[static_cast<std::size_t>(best)];
            std::vector<Vec> extra{st.xs[static_cast<std::size_t>(best)]};
            {
                Rng rng = make_rng(sub_seed(cfg.seed, "egp_starts", static_cast<std::uint64_t>(n)));
                for (int r = 0; r < cfg.acq_restarts - 1; ++r) extra.push_back(high->random_point(rng));
            }
            auto posterior = [&](const Vec& v) { return gp_posterior(fit.state, v); };
            Vec v = optimize_acquisition(posterior, best_y, *ambient, nullptr, 1, extra,
                                         sub_seed(cfg.seed, "egp_acq", static_cast<std::uint64_t>(n)),
                                         cfg.acq_tr_iterations);
            x_next = to_space(v);
            if (min_distance_to_data(*high, x_next, st.xs) < 1e-8) {
                ++st.warnings;
                x_next = fallback_point(space, *high, cfg.seed, n);
            }
        } catch (const std::exception&) {
            ++st.warnings;
            x_next = fallback_point(space, *high, cfg.seed, n);
        }
        try {
            evaluate_and_record(objective, x_next, cfg.measure_time, st);
        } catch (const std::exception&) {
            aborted = true;
            break;
        }
    }
    return finish(std::move(st), aborted);
}

BoResult run_bo(const BlackBoxFn& objective, const SearchSpace& space, const BoConfig& cfg) {
    switch (cfg.method) {
        case BoMethod::hd_gabo: return run_hd_gabo(objective, space, cfg);
        case BoMethod::gabo: return run_gabo(objective, space, cfg);
        case BoMethod::random_search: return run_random_search(objective, space, cfg);
        case BoMethod::euclidean_gp: return run_euclidean_gp(objective, space, cfg);
    }
    throw std::invalid_argument("run_bo: unknown method");
}

}  // namespace geobo
