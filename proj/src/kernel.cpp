#include "geobo/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "geobo/errors.hpp"

namespace geobo {

GeodesicSeKernel::GeodesicSeKernel(double theta_in, double beta_in, double beta_min_in)
    : theta(theta_in), beta(beta_in), beta_min(beta_min_in) {
    if (!(theta > 0.0)) throw std::invalid_argument("GeodesicSeKernel: theta must be > 0");
    if (beta_min < 0.0) throw std::invalid_argument("GeodesicSeKernel: beta_min must be >= 0");
    if (beta < beta_min) throw std::invalid_argument("GeodesicSeKernel: beta below beta_min");
}

double GeodesicSeKernel::operator()(double dist) const {
    return theta * std::exp(-beta * dist * dist);
}

double kernel_eval(const GeodesicSeKernel& k, double dist) {
    if (dist < 0.0) throw std::invalid_argument("kernel_eval: negative distance");
    return k(dist);
}

FeatureMetric feature_metric(const Manifold& m) {
    if (dynamic_cast<const Sphere*>(&m)) return FeatureMetric::arc;
    return FeatureMetric::euclidean;
}

Vec distance_feature(const Manifold& m, const Vec& x) {
    if (dynamic_cast<const Sphere*>(&m)) return x;
    if (const auto* spd = dynamic_cast<const Spd*>(&m)) {
        return spd->to_vec(sym_logm(spd->to_mat(x)));
    }
    if (dynamic_cast<const Euclidean*>(&m)) return x;
    throw std::invalid_argument("distance_feature: unsupported manifold " + m.name());
}

double feature_distance(FeatureMetric metric, const Vec& fa, const Vec& fb) {
    const double d = (fa - fb).norm();
    if (metric == FeatureMetric::arc) return 2.0 * std::asin(std::min(1.0, 0.5 * d));
    return d;
}

Mat pairwise_sq_distances_features(const std::vector<Vec>& features, FeatureMetric metric,
                                   Exec exec) {
    const auto n = static_cast<Eigen::Index>(features.size());
    Mat d2 = Mat::Zero(n, n);
    par_for(exec, n, [&](std::int64_t i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = feature_distance(metric, features[static_cast<std::size_t>(i)],
                                              features[static_cast<std::size_t>(j)]);
            d2(i, j) = d * d;
            d2(j, i) = d * d;
        }
    });
    return d2;
}

Mat pairwise_sq_distances(const std::vector<Vec>& points, const Manifold& m, Exec exec) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Mat d2 = Mat::Zero(n, n);
    par_for_dynamic(exec, n, [&](std::int64_t i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = m.distance(points[static_cast<std::size_t>(i)],
                                        points[static_cast<std::size_t>(j)]);
            d2(i, j) = d * d;
            d2(j, i) = d * d;
        }
    });
    return d2;
}

Mat kernel_matrix(const Mat& sq_dist, const GeodesicSeKernel& k) {
    return (k.theta * (-k.beta * sq_dist.array()).exp()).matrix();
}

Mat gram_from_sq_distances(const Mat& sq_dist, const GeodesicSeKernel& k) {
    Mat g = kernel_matrix(sq_dist, k);
    const double lam_min = min_eigenvalue(g);
    if (lam_min < -1e-8)
        throw KernelValidityError("gram: kernel matrix indefinite (lambda_min " +
                                      std::to_string(lam_min) + ", beta " +
                                      std::to_string(k.beta) + ", beta_min " +
                                      std::to_string(k.beta_min) + ")",
                                  k.beta, k.beta_min);
    if (lam_min < 0.0) g.diagonal().array() += -lam_min + 1e-12;
    return g;
}

Mat gram(const std::vector<Vec>& points, const GeodesicSeKernel& k, const Manifold& m,
         Exec exec) {
    if (k.beta < k.beta_min)
        throw KernelValidityError("gram: beta below beta_min", k.beta, k.beta_min);
    return gram_from_sq_distances(pairwise_sq_distances(points, m, exec), k);
}

double estimate_beta_min(const Manifold& m, int n_samples, std::uint64_t seed) {
    if (n_samples < 10) throw std::invalid_argument("estimate_beta_min: n_samples must be >= 10");
    if (dynamic_cast<const Euclidean*>(&m) || dynamic_cast<const Spd*>(&m)) return 0.0;

    constexpr int kSets = 20;
    std::vector<Mat> d2_sets;
    d2_sets.reserve(kSets);
    for (int s = 0; s < kSets; ++s) {
        Rng rng = make_rng(sub_seed(seed, "beta_min_set", static_cast<std::uint64_t>(s)));
        std::vector<Vec> pts;
        pts.reserve(static_cast<std::size_t>(n_samples));
        for (int i = 0; i < n_samples; ++i) pts.push_back(m.random_point(rng));
        d2_sets.push_back(pairwise_sq_distances(pts, m));
    }

    auto feasible = [&](double beta) {
        const GeodesicSeKernel k(1.0, beta);
        for (const Mat& d2 : d2_sets) {
            if (min_eigenvalue(kernel_matrix(d2, k)) < -1e-7) return false;
        }
        return true;
    };

    // Bracket the transition on a geometric grid, then bisect.
    double lo = 1e-4;
    if (feasible(lo)) return lo;
    double hi = lo;
    bool bracketed = false;
    for (int i = 0; i < 40; ++i) {
        hi *= 2.0;
        if (feasible(hi)) {
            bracketed = true;
            break;
        }
        lo = hi;
    }
    if (!bracketed)
        throw std::runtime_error("estimate_beta_min: no PSD beta found in scan range");
    for (int it = 0; it < 40 && (hi - lo) > 1e-3 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    return hi * 1.05;  // small safety margin for fresh samples
}

SpdLogTable build_spd_log_table(const std::vector<Mat>& points, Exec exec) {
    SpdLogTable table;
    table.logs.resize(points.size());
    par_for(exec, static_cast<std::int64_t>(points.size()),
            [&](std::int64_t i) { table.logs[static_cast<std::size_t>(i)] = sym_logm(points[static_cast<std::size_t>(i)]); });
    return table;
}

Mat spd_latent_sq_distances_fast(const SpdLogTable& table, const Mat& w, Exec exec) {
    const auto n = static_cast<Eigen::Index>(table.logs.size());
    std::vector<Mat> projected(static_cast<std::size_t>(n));
    par_for(exec, n, [&](std::int64_t i) {
        projected[static_cast<std::size_t>(i)] =
            w.transpose() * table.logs[static_cast<std::size_t>(i)] * w;
    });
    Mat d2 = Mat::Zero(n, n);
    par_for(exec, n, [&](std::int64_t i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = (projected[static_cast<std::size_t>(i)] -
                              projected[static_cast<std::size_t>(j)])
                                 .norm();
            d2(i, j) = d * d;
            d2(j, i) = d * d;
        }
    });
    return d2;
}

Mat spd_latent_gram_fast(const SpdLogTable& table, const Mat& w, const GeodesicSeKernel& k,
                         Exec exec) {
    return kernel_matrix(spd_latent_sq_distances_fast(table, w, exec), k);
}

}  // namespace geobo
