#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "geobo/gp.hpp"
#include "geobo/trust_region.hpp"

namespace geobo {

struct Observation {
    Vec x;
    double y = 0.0;
};

enum class BoMethod { hd_gabo, gabo, random_search, euclidean_gp };

std::string to_string(BoMethod m);
std::optional<BoMethod> parse_bo_method(const std::string& s);

struct SearchSpace {
    enum class Kind { sphere, spd } kind = Kind::sphere;
    // Manifold dimension: S^dim for the sphere, dim x dim matrices for SPD.
    int dim = 2;
    std::optional<std::pair<double, double>> eig_bounds;

    void validate() const;
    ManifoldPtr make_manifold() const;
};

struct BoConfig {
    BoMethod method = BoMethod::hd_gabo;
    int n_init = 5;
    int n_iter = 30;
    int latent_dim = 0;  // hd_gabo only
    int acq_restarts = 5;
    int refit_every = 1;
    std::uint64_t seed = 0;
    bool measure_time = false;

    // Budgets for the inner fits; the defaults target desk-scale runs.
    int acq_tr_iterations = 25;
    int init_multistarts = 5;
    int init_alternation_rounds = 3;
    int refit_alternation_rounds = 1;
    int refit_map_tr_iterations = 2;
    int init_map_tr_iterations = 25;
    int gp_tr_iterations = 30;
    // Every full_refit_every iterations the mapping is refit from the warm
    // start plus fresh data-informed starts (0 disables).
    int full_refit_every = 10;
    int full_refit_multistarts = 4;
    int full_refit_rounds = 2;
    int full_refit_map_tr_iterations = 8;

    void validate(const SearchSpace& space) const;
};

struct HistoryEntry {
    Vec x;
    double y = 0.0;
    double elapsed_ms = 0.0;
};

struct BoResult {
    std::vector<HistoryEntry> history;
    Vec recommendation;
    double best_y = 0.0;
    int warnings = 0;
    bool aborted = false;  // objective threw; history holds the completed part
};

using BlackBoxFn = std::function<double(const Vec&)>;

// Expected improvement for minimization; the deterministic limit
// max(best_y - mean, 0) is used when the standard deviation falls below 1e-9.
double expected_improvement(double mean, double variance, double best_y);

// Maximizes the acquisition over the domain by trust region from seeded
// restarts plus the supplied extra starts; returns the best point among all
// restart results and their starting points. With constraints, every start is
// feasible and the result stays feasible.
Vec optimize_acquisition(const std::function<std::pair<double, double>(const Vec&)>& posterior,
                         double best_y, const Manifold& domain, const ConstraintSet* constraints,
                         int restarts, const std::vector<Vec>& extra_starts, std::uint64_t seed,
                         int tr_iterations);

BoResult run_gabo(const BlackBoxFn& objective, const SearchSpace& space, const BoConfig& cfg);
BoResult run_hd_gabo(const BlackBoxFn& objective, const SearchSpace& space, const BoConfig& cfg);
BoResult run_random_search(const BlackBoxFn& objective, const SearchSpace& space,
                           const BoConfig& cfg);
BoResult run_euclidean_gp(const BlackBoxFn& objective, const SearchSpace& space,
                          const BoConfig& cfg);
BoResult run_bo(const BlackBoxFn& objective, const SearchSpace& space, const BoConfig& cfg);

// Initial design shared across methods for a given seed.
std::vector<Vec> draw_initial_design(const SearchSpace& space, int n_init, std::uint64_t seed);

// Beta_min for sphere manifolds, estimated once per dimension from a fixed
// seed and cached; SPD and Euclidean domains return 0.
double cached_sphere_beta_min(int sphere_dim);

// Clamp the eigenvalues of a symmetric matrix into [lo, hi].
Mat clamp_spd_eigenvalues(const Mat& x, double lo, double hi);

}  // namespace geobo
