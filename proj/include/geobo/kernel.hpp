#pragma once

#include <cstdint>
#include <vector>

#include "geobo/manifold.hpp"
#include "geobo/parallel.hpp"

namespace geobo {

// Geodesic squared-exponential kernel k(d) = theta * exp(-beta d^2), valid
// (positive definite) only for beta >= beta_min on curved manifolds.
struct GeodesicSeKernel {
    double theta = 1.0;
    double beta = 1.0;
    double beta_min = 0.0;

    GeodesicSeKernel() = default;
    GeodesicSeKernel(double theta_in, double beta_in, double beta_min_in = 0.0);

    double operator()(double dist) const;
};

double kernel_eval(const GeodesicSeKernel& k, double dist);

// Distances for the GP hot paths are computed on per-point features: a point
// feature plus a metric such that the manifold distance is a function of the
// feature pair. Sphere: the point itself with arc metric. SPD: the flattened
// matrix log with the Euclidean metric (Log-Euclidean distance). Euclidean:
// identity.
enum class FeatureMetric { arc, euclidean };

FeatureMetric feature_metric(const Manifold& m);
Vec distance_feature(const Manifold& m, const Vec& x);
double feature_distance(FeatureMetric metric, const Vec& fa, const Vec& fb);

// Pairwise squared distances; the parallel version computes rows concurrently
// with per-element arithmetic identical to the serial one.
Mat pairwise_sq_distances(const std::vector<Vec>& points, const Manifold& m,
                          Exec exec = Exec::parallel);
Mat pairwise_sq_distances_features(const std::vector<Vec>& features, FeatureMetric metric,
                                   Exec exec = Exec::parallel);

// Kernel matrix without the validity guard (hot path).
Mat kernel_matrix(const Mat& sq_dist, const GeodesicSeKernel& k);

// Gram matrix with the positive-semidefiniteness guard: eigenvalues in
// [-1e-8, 0) get a compensating jitter, below -1e-8 raises KernelValidityError.
Mat gram(const std::vector<Vec>& points, const GeodesicSeKernel& k, const Manifold& m,
         Exec exec = Exec::parallel);
Mat gram_from_sq_distances(const Mat& sq_dist, const GeodesicSeKernel& k);

// Smallest beta whose Gram matrices stay numerically PSD across 20 resampled
// point sets, found by bisection over a bracketing scan; deterministic in the
// seed. Euclidean and SPD (Log-Euclidean) manifolds return 0. Throws
// std::runtime_error if no feasible beta is found in the scan range.
double estimate_beta_min(const Manifold& m, int n_samples, std::uint64_t seed);

// Precomputed matrix logs of an SPD dataset, fixed across the mapping
// optimization.
struct SpdLogTable {
    std::vector<Mat> logs;
};

SpdLogTable build_spd_log_table(const std::vector<Mat>& points, Exec exec = Exec::parallel);

// Latent squared distances under the approximation
// log(W'XW) ~ W'log(X)W, so d_ij ~ ||W'(log X_i - log X_j)W||_F.
Mat spd_latent_sq_distances_fast(const SpdLogTable& table, const Mat& w,
                                 Exec exec = Exec::parallel);
Mat spd_latent_gram_fast(const SpdLogTable& table, const Mat& w, const GeodesicSeKernel& k,
                         Exec exec = Exec::parallel);

}  // namespace geobo
