#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "geobo/kernel.hpp"
#include "geobo/manifold.hpp"
#include "geobo/nested.hpp"

namespace geobo {

// Zero-mean GP posterior state over a latent manifold. Targets are stored
// standardized; predictions are returned on the original scale.
struct GpState {
    ManifoldPtr manifold;
    std::vector<Vec> inputs;
    std::vector<Vec> features;  // distance features of the inputs
    FeatureMetric metric = FeatureMetric::euclidean;
    Vec targets;  // standardized
    double y_shift = 0.0;
    double y_scale = 1.0;
    GeodesicSeKernel kernel;
    double noise_var = 1e-6;
    Mat chol_l;  // lower factor of K + noise * I
    Vec alpha;   // (K + noise I)^{-1} targets
};

// Builds the factored state; escalates diagonal jitter from 1e-9 to 1e-5 if
// the factorization fails, then throws std::runtime_error.
GpState make_gp_state(ManifoldPtr manifold, std::vector<Vec> inputs, const Vec& y,
                      const GeodesicSeKernel& kernel, double noise_var, bool standardize);

// Posterior mean and (latent, noise-free) variance at a point of the latent
// manifold; variance is clamped at zero.
std::pair<double, double> gp_posterior(const GpState& state, const Vec& z);

struct GpNll {
    double value = 0.0;
    Vec grad;  // d/d(log theta), d/d(log beta), d/d(log noise_var)
};

// Negative log marginal likelihood of y under the kernel Gram built from the
// given squared distances, with analytic gradients in log-parameters.
GpNll gp_nll_from_sq(const Mat& sq_dist, const Vec& y, double theta, double beta,
                     double noise_var, bool want_grad = true);
GpNll gp_nll(const std::vector<Vec>& inputs, const Manifold& m, const Vec& y, double theta,
             double beta, double noise_var, bool want_grad = true);

struct GpFitOptions {
    int restarts = 2;          // seeded random restarts in addition to the heuristic start
    int tr_iterations = 40;
    double noise_floor = 1e-6;
    bool standardize = true;
    std::uint64_t seed = 0;
    // Warm start in optimizer coordinates (log theta, softplus-inv beta excess,
    // log noise excess); skips the heuristic initialization.
    std::optional<Vec> warm_params;
};

struct GpFit {
    GpState state;
    double nll = 0.0;
    Vec opt_params;  // optimizer coordinates, reusable as warm start
};

// Maximum-likelihood kernel hyperparameters (theta, beta, noise) with beta
// floored at beta_min through a shifted softplus and noise floored at
// noise_floor; optimization runs in log space by trust region.
GpFit fit_gp(ManifoldPtr manifold, const std::vector<Vec>& inputs, const Vec& y, double beta_min,
             const GpFitOptions& opts = {});

// Geometry-aware manifold-GP surrogate: nested mapping parameters plus the
// latent GP fitted jointly by marginal likelihood.
struct MgpModel {
    ManifoldPtr high;
    ManifoldPtr latent;
    std::optional<NestedSphereParams> sphere_map;  // radii fixed at pi/2
    std::optional<SpdNestedParams> spd_map;
    GpState gp;
    double nll = 0.0;
    Vec gp_opt_params;

    bool identity_mapping() const { return !sphere_map && !spd_map; }
    Vec project(const Vec& x) const;
    std::pair<double, double> predict(const Vec& x) const;
};

struct MgpFitOptions {
    int multistarts = 5;
    int alternation_rounds = 3;
    int map_tr_iterations = 25;
    int map_tcg_cap = 0;  // 0 means the tangent dimension
    int gp_restarts = 2;
    int gp_tr_iterations = 40;
    double beta_min = 0.0;  // for the latent manifold
    std::uint64_t seed = 0;
    Exec exec = Exec::parallel;
    // The greedy level-by-level initializer costs roughly a full fit; callers
    // on a budget can drop it and keep the cheap slice-moment start.
    bool include_greedy_start = true;
    // Warm start from a previous fit; counts as the first of `multistarts`
    // starts (data-informed and random starts fill the remainder).
    const MgpModel* warm_start = nullptr;
};

// Joint fit of mapping parameters (sphere axes or Grassmann frame; radii are
// excluded since latent distances do not depend on them) and GP
// hyperparameters, alternating Riemannian trust region on the mapping with
// log-space trust region on the kernel parameters, over seeded multistarts.
// latent_dim == high dim yields the identity mapping (plain GP fit).
MgpModel mgp_fit(ManifoldPtr high, const std::vector<Vec>& xs, const Vec& y, int latent_dim,
                 const MgpFitOptions& opts = {});

}  // namespace geobo
