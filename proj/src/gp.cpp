#include "geobo/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "geobo/errors.hpp"
#include "geobo/trust_region.hpp"

namespace geobo {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_inv(double y) {
    if (y > 30.0) return y;
    return std::log(std::expm1(std::max(y, 1e-300)));
}

// Cholesky with escalating diagonal jitter (1e-9 to 1e-5 relative to the mean
// diagonal); throws std::runtime_error after the last escalation.
Eigen::LLT<Mat> chol_with_jitter(const Mat& a) {
    const double scale = std::max(a.diagonal().mean(), 1e-300);
    for (double jitter : {0.0, 1e-9, 1e-7, 1e-5}) {
        Mat aj = a;
        aj.diagonal().array() += jitter * scale;
        Eigen::LLT<Mat> llt(aj);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw std::runtime_error("gp: Gram factorization failed after jitter escalation");
}

struct StandardizedTargets {
    Vec y;
    double shift = 0.0;
    double scale = 1.0;
};

StandardizedTargets standardize_targets(const Vec& y, bool standardize) {
    StandardizedTargets s;
    if (!standardize || y.size() < 2) {
        s.y = y;
        return s;
    }
    s.shift = y.mean();
    const double var = (y.array() - s.shift).square().sum() / static_cast<double>(y.size());
    s.scale = std::sqrt(var);
    if (s.scale < 1e-12) s.scale = 1.0;
    s.y = (y.array() - s.shift) / s.scale;
    return s;
}

}  // namespace

GpState make_gp_state(ManifoldPtr manifold, std::vector<Vec> inputs, const Vec& y,
                      const GeodesicSeKernel& kernel, double noise_var, bool standardize) {
    if (inputs.empty() || static_cast<Eigen::Index>(inputs.size()) != y.size())
        throw std::invalid_argument("make_gp_state: inputs/targets mismatch");
    GpState st;
    st.manifold = std::move(manifold);
    st.metric = feature_metric(*st.manifold);
    st.features.reserve(inputs.size());
    for (const Vec& z : inputs) st.features.push_back(distance_feature(*st.manifold, z));
    st.inputs = std::move(inputs);

    StandardizedTargets ts = standardize_targets(y, standardize);
    st.targets = ts.y;
    st.y_shift = ts.shift;
    st.y_scale = ts.scale;
    st.kernel = kernel;
    st.noise_var = noise_var;

    Mat a = kernel_matrix(pairwise_sq_distances_features(st.features, st.metric), kernel);
    a.diagonal().array() += noise_var;
    Eigen::LLT<Mat> llt = chol_with_jitter(a);
    st.chol_l = llt.matrixL();
    st.alpha = llt.solve(st.targets);
    return st;
}

std::pair<double, double> gp_posterior(const GpState& state, const Vec& z) {
    const Vec fz = distance_feature(*state.manifold, z);
    const auto n = static_cast<Eigen::Index>(state.features.size());
    Vec ks(n);
    for (Eigen::Index i = 0; i < n; ++i)
        ks[i] = state.kernel(feature_distance(state.metric, fz, state.features[static_cast<std::size_t>(i)]));
    const double mean = ks.dot(state.alpha);
    Vec v = state.chol_l.triangularView<Eigen::Lower>().solve(ks);
    const double var = std::max(0.0, state.kernel.theta - v.squaredNorm());
    return {state.y_shift + state.y_scale * mean, state.y_scale * state.y_scale * var};
}

GpNll gp_nll_from_sq(const Mat& sq_dist, const Vec& y, double theta, double beta,
                     double noise_var, bool want_grad) {
    const Eigen::Index n = y.size();
    if (sq_dist.rows() != n) throw std::invalid_argument("gp_nll: size mismatch");
    const GeodesicSeKernel k(theta, beta);
    Mat kmat = kernel_matrix(sq_dist, k);
    Mat a = kmat;
    a.diagonal().array() += noise_var;
    Eigen::LLT<Mat> llt = chol_with_jitter(a);
    Mat l = llt.matrixL();
    Vec alpha = llt.solve(y);

    GpNll out;
    out.value = 0.5 * y.dot(alpha) + l.diagonal().array().log().sum() +
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!want_grad) return out;

    Mat w = llt.solve(Mat::Identity(n, n));
    w.noalias() -= alpha * alpha.transpose();
    out.grad.resize(3);
    out.grad[0] = 0.5 * w.cwiseProduct(kmat).sum();
    out.grad[1] = 0.5 * w.cwiseProduct(Mat(-beta * sq_dist.cwiseProduct(kmat))).sum();
    out.grad[2] = 0.5 * noise_var * w.trace();
    return out;
}

GpNll gp_nll(const std::vector<Vec>& inputs, const Manifold& m, const Vec& y, double theta,
             double beta, double noise_var, bool want_grad) {
    std::vector<Vec> features;
    features.reserve(inputs.size());
    for (const Vec& z : inputs) features.push_back(distance_feature(m, z));
    return gp_nll_from_sq(pairwise_sq_distances_features(features, feature_metric(m)), y, theta,
                          beta, noise_var, want_grad);
}

namespace {

struct GpParamSpace {
    double beta_min = 0.0;
    double noise_floor = 1e-6;

    double theta(const Vec& p) const { return std::exp(p[0]); }
    double beta(const Vec& p) const { return beta_min + softplus(p[1]); }
    double noise(const Vec& p) const { return noise_floor + std::exp(p[2]); }

    GpNll eval(const Mat& sq_dist, const Vec& y, const Vec& p, bool want_grad) const {
        GpNll raw;
        try {
            raw = gp_nll_from_sq(sq_dist, y, theta(p), beta(p), noise(p), want_grad);
        } catch (const std::runtime_error&) {
            raw.value = 1e12;
            raw.grad = Vec::Zero(3);
            return raw;
        }
        if (want_grad) {
            Vec g(3);
            g[0] = raw.grad[0];
            g[1] = raw.grad[1] / beta(p) * sigmoid(p[1]);
            g[2] = raw.grad[2] / noise(p) * std::exp(p[2]);
            raw.grad = g;
        }
        return raw;
    }
};

// Trust-region MLE over optimizer coordinates for fixed latent distances.
std::pair<Vec, double> optimize_gp_params(const Mat& sq_dist, const Vec& y,
                                          const GpParamSpace& space,
                                          const std::vector<Vec>& starts, int tr_iterations) {
    Euclidean dom(3);
    Objective obj = [&](const Vec& p) { return space.eval(sq_dist, y, p, false).value; };
    GradientFn grad = [&](const Vec& p) { return space.eval(sq_dist, y, p, true).grad; };

    TrustRegionConfig cfg;
    cfg.delta_max = 4.0;
    cfg.delta_0 = 0.5;
    cfg.max_outer = tr_iterations;
    cfg.grad_tol = 1e-5;
    cfg.hess_fd_step = 1e-5;

    Vec best_p = starts.front();
    double best_f = std::numeric_limits<double>::infinity();
    for (const Vec& p0 : starts) {
        TrResult r = trust_region_minimize(dom, obj, grad, p0, cfg);
        if (r.f < best_f) {
            best_f = r.f;
            best_p = r.x;
        }
    }
    return {best_p, best_f};
}

Vec heuristic_gp_start(const Mat& sq_dist, const GpParamSpace& space) {
    std::vector<double> off;
    for (Eigen::Index i = 0; i < sq_dist.rows(); ++i)
        for (Eigen::Index j = i + 1; j < sq_dist.cols(); ++j)
            if (sq_dist(i, j) > 0.0) off.push_back(sq_dist(i, j));
    double med = 1.0;
    if (!off.empty()) {
        std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(off.size() / 2),
                         off.end());
        med = off[off.size() / 2];
    }
    const double beta0 = std::max(0.5 / std::max(med, 1e-12), space.beta_min + 1e-3);
    Vec p(3);
    p[0] = 0.0;
    p[1] = softplus_inv(std::max(beta0 - space.beta_min, 1e-6));
    p[2] = std::log(1e-2);
    return p;
}

std::vector<Vec> gp_starts(const Mat& sq_dist, const GpParamSpace& space,
                           const GpFitOptions& opts) {
    std::vector<Vec> starts;
    if (opts.warm_params) {
        starts.push_back(*opts.warm_params);
        return starts;
    }
    const Vec h = heuristic_gp_start(sq_dist, space);
    starts.push_back(h);
    for (int r = 0; r < opts.restarts; ++r) {
        Rng rng = make_rng(sub_seed(opts.seed, "gp_restart", static_cast<std::uint64_t>(r)));
        Vec p = h;
        p[0] += 0.5 * std_normal(rng);
        p[1] += std_normal(rng);
        p[2] = std::log(std::pow(10.0, uniform(rng, -4.0, -1.0)));
        starts.push_back(p);
    }
    return starts;
}

}  // namespace

GpFit fit_gp(ManifoldPtr manifold, const std::vector<Vec>& inputs, const Vec& y, double beta_min,
             const GpFitOptions& opts) {
    if (inputs.size() < 2) throw std::invalid_argument("fit_gp: need at least 2 observations");
    StandardizedTargets ts = standardize_targets(y, opts.standardize);

    std::vector<Vec> features;
    features.reserve(inputs.size());
    for (const Vec& z : inputs) features.push_back(distance_feature(*manifold, z));
    const Mat sq_dist = pairwise_sq_distances_features(features, feature_metric(*manifold));

    GpParamSpace space;
    space.beta_min = beta_min;
    space.noise_floor = opts.noise_floor;

    auto [p, nll] = optimize_gp_params(sq_dist, ts.y, space, gp_starts(sq_dist, space, opts),
                                       opts.tr_iterations);

    GpFit fit;
    fit.nll = nll;
    fit.opt_params = p;
    fit.state = make_gp_state(std::move(manifold), inputs, y,
                              GeodesicSeKernel(space.theta(p), space.beta(p), beta_min),
                              space.noise(p), opts.standardize);
    return fit;
}

// ---------------------------------------------------------------------------
// Manifold GP
// ---------------------------------------------------------------------------

Vec MgpModel::project(const Vec& x) const {
    if (sphere_map) return sphere_project(x, *sphere_map);
    if (spd_map) {
        const auto* spd_high = dynamic_cast<const Spd*>(high.get());
        const auto* spd_lat = dynamic_cast<const Spd*>(latent.get());
        return spd_lat->to_vec(spd_project(spd_high->to_mat(x), *spd_map));
    }
    return x;
}

std::pair<double, double> MgpModel::predict(const Vec& x) const {
    return gp_posterior(gp, project(x));
}

namespace {

struct MappingObjective {
    // Squared latent distances as a function of packed mapping parameters;
    // empty optional on projection singularities.
    std::function<std::optional<Mat>(const Vec&)> latent_sq_dist;
    // Exact variant used at round boundaries and for the final state.
    std::function<std::optional<Mat>(const Vec&)> latent_sq_dist_exact;
    std::function<std::vector<Vec>(const Vec&)> latent_points;
    // Optional structure-aware finite-difference gradient factory; takes the
    // NLL as a function of squared latent distances.
    std::function<GradientFn(std::function<double(const Mat&)>)> make_map_gradient;
    ManifoldPtr domain;
};

// With all radii at pi/2 every level is a linear reduction followed by
// normalization, so the fitted latent is the normalized projection onto a
// (d+1)-dimensional subspace. A sliced inverse-regression moment matrix
// (first and second slice moments, catching symmetric responses) estimates
// that subspace from the data and seeds one multistart; conversion to an
// axes chain removes the complement directions one level at a time.
Vec sphere_supervised_axes_start(const std::vector<Vec>& xs, const Vec& y, int big_dim,
                                 int latent_dim) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    const Eigen::Index p = big_dim + 1;
    const int keep = latent_dim + 1;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });

    const int slices = std::clamp(static_cast<int>(n) / 8, 4, 10);
    Mat cov_global = Mat::Zero(p, p);
    for (const Vec& x : xs) cov_global += x * x.transpose();
    cov_global /= static_cast<double>(n);

    Mat m_sir = Mat::Zero(p, p);
    Mat m_save = Mat::Zero(p, p);
    Eigen::Index pos = 0;
    for (int h = 0; h < slices; ++h) {
        const Eigen::Index count = n / slices + (h < n % slices ? 1 : 0);
        if (count < 2) {
            pos += count;
            continue;
        }
        Vec mean = Vec::Zero(p);
        for (Eigen::Index i = 0; i < count; ++i) mean += xs[static_cast<std::size_t>(order[static_cast<std::size_t>(pos + i)])];
        mean /= static_cast<double>(count);
        Mat cov = Mat::Zero(p, p);
        for (Eigen::Index i = 0; i < count; ++i) {
            const Vec& x = xs[static_cast<std::size_t>(order[static_cast<std::size_t>(pos + i)])];
            cov += (x - mean) * (x - mean).transpose();
        }
        cov /= static_cast<double>(count);
        const double w = static_cast<double>(count) / static_cast<double>(n);
        m_sir += w * mean * mean.transpose();
        Mat dev = cov_global - cov;
        m_save += w * dev * dev;
        pos += count;
    }
    Mat m = m_sir / std::max(m_sir.trace(), 1e-12) + m_save / std::max(m_save.trace(), 1e-12);

    SymEig em = eig_sym(sym_part(m));
    // Ascending eigenvalues: the flattest directions are removed first.
    Mat removed = em.q.leftCols(p - keep);

    Vec packed(((big_dim + 1) + (latent_dim + 2)) * (big_dim - latent_dim) / 2);
    std::vector<Vec> axes;
    Eigen::Index off = 0;
    for (int i = 0; i < big_dim - latent_dim; ++i) {
        Vec u = removed.col(i);
        for (std::size_t lvl = 0; lvl < axes.size(); ++lvl) {
            u = sphere_project_step(u, axes[lvl], kHalfPi, -1);
        }
        u /= u.norm();
        axes.push_back(u);
        packed.segment(off, u.size()) = u;
        off += u.size();
    }
    return packed;
}

// Flattest direction of the slice-moment matrix (first and second moments)
// at the current level; used as a data-informed axis candidate.
Vec slice_moment_flattest_direction(const std::vector<Vec>& xs, const Vec& y) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    const Eigen::Index p = xs.front().size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });

    const int slices = std::clamp(static_cast<int>(n) / 8, 4, 10);
    Mat cov_global = Mat::Zero(p, p);
    for (const Vec& x : xs) cov_global += x * x.transpose();
    cov_global /= static_cast<double>(n);

    Mat m_sir = Mat::Zero(p, p);
    Mat m_save = Mat::Zero(p, p);
    Eigen::Index pos = 0;
    for (int h = 0; h < slices; ++h) {
        const Eigen::Index count = n / slices + (h < n % slices ? 1 : 0);
        if (count < 2) {
            pos += count;
            continue;
        }
        Vec mean = Vec::Zero(p);
        for (Eigen::Index i = 0; i < count; ++i)
            mean += xs[static_cast<std::size_t>(order[static_cast<std::size_t>(pos + i)])];
        mean /= static_cast<double>(count);
        Mat cov = Mat::Zero(p, p);
        for (Eigen::Index i = 0; i < count; ++i) {
            const Vec& x = xs[static_cast<std::size_t>(order[static_cast<std::size_t>(pos + i)])];
            cov += (x - mean) * (x - mean).transpose();
        }
        cov /= static_cast<double>(count);
        const double w = static_cast<double>(count) / static_cast<double>(n);
        m_sir += w * mean * mean.transpose();
        Mat dev = cov_global - cov;
        m_save += w * dev * dev;
        pos += count;
    }
    Mat m = m_sir / std::max(m_sir.trace(), 1e-12) + m_save / std::max(m_save.trace(), 1e-12);
    SymEig em = eig_sym(sym_part(m));
    Vec flattest = em.q.col(0);
    return flattest / flattest.norm();
}

// Greedy backward initializer: peel one dimension at a time, fitting a single
// axis on S^k by (hyperparameters, axis) alternation before projecting the
// data down. Each level is a small, well-conditioned subproblem; the joint
// alternation afterwards polishes all axes together.
Vec sphere_greedy_axes_start(const std::vector<Vec>& xs, const Vec& y_std, int big_dim,
                             int latent_dim, const GpParamSpace& space, std::uint64_t seed,
                             int gp_tr_iterations) {
    std::vector<Vec> cur = xs;
    std::vector<Vec> axes;
    Eigen::Index packed_size = 0;
    for (int k = big_dim; k > latent_dim; --k) packed_size += k + 1;
    Vec packed(packed_size);
    Eigen::Index off = 0;

    for (int k = big_dim; k > latent_dim; --k) {
        Sphere level(k);
        auto level_sq_dist = [&cur, k](const Vec& axis) -> std::optional<Mat> {
            const Mat rot = rotation_to_north(axis);
            std::vector<Vec> zs;
            zs.reserve(cur.size());
            try {
                for (const Vec& x : cur)
                    zs.push_back(sphere_project_step_cached(x, axis, rot, kHalfPi, k));
            } catch (const SingularProjectionError&) {
                return std::nullopt;
            }
            return pairwise_sq_distances_features(zs, FeatureMetric::arc, Exec::serial);
        };

        TrustRegionConfig axis_cfg = default_tr_config(level);
        axis_cfg.max_outer = 20;
        axis_cfg.grad_tol = 1e-6;

        std::vector<Vec> axis_starts;
        try {
            axis_starts.push_back(slice_moment_flattest_direction(cur, y_std));
        } catch (const std::exception&) {
        }
        for (int s = 0; static_cast<int>(axis_starts.size()) < 4; ++s) {
            Rng rng = make_rng(sub_seed(seed, "greedy", static_cast<std::uint64_t>(k),
                                        static_cast<std::uint64_t>(s)));
            axis_starts.push_back(level.random_point(rng));
        }

        Vec best_axis;
        double best_nll = std::numeric_limits<double>::infinity();
        for (const Vec& axis_start : axis_starts) {
            Vec axis = axis_start;
            Vec p;
            double cur_nll = std::numeric_limits<double>::infinity();
            for (int round = 0; round < 2; ++round) {
                auto d2 = level_sq_dist(axis);
                if (!d2) break;
                std::vector<Vec> gp_start_set;
                if (p.size() == 3) {
                    gp_start_set.push_back(p);
                } else {
                    gp_start_set.push_back(heuristic_gp_start(*d2, space));
                }
                auto [p_new, nll_g] =
                    optimize_gp_params(*d2, y_std, space, gp_start_set, gp_tr_iterations);
                p = p_new;
                cur_nll = nll_g;
                Objective axis_obj = [&](const Vec& v) {
                    auto dd = level_sq_dist(v);
                    if (!dd) return 1e12;
                    return space.eval(*dd, y_std, p, false).value;
                };
                TrResult tr = trust_region_minimize(level, axis_obj, nullptr, axis, axis_cfg);
                if (tr.f <= cur_nll) {
                    axis = tr.x;
                    cur_nll = tr.f;
                }
            }
            if (cur_nll < best_nll) {
                best_nll = cur_nll;
                best_axis = axis;
            }
        }
        if (!best_axis.size()) throw std::runtime_error("greedy axis fit failed");

        axes.push_back(best_axis);
        packed.segment(off, best_axis.size()) = best_axis;
        off += best_axis.size();
        const Mat best_rot = rotation_to_north(best_axis);
        std::vector<Vec> next;
        next.reserve(cur.size());
        for (const Vec& x : cur)
            next.push_back(sphere_project_step_cached(x, best_axis, best_rot, kHalfPi, k));
        cur = std::move(next);
    }
    return packed;
}

MappingObjective sphere_mapping_objective(const std::vector<Vec>& xs, int big_dim,
                                          int latent_dim) {
    const int levels = big_dim - latent_dim;
    std::vector<ManifoldPtr> parts;
    std::vector<Eigen::Index> sizes;
    for (int k = big_dim; k > latent_dim; --k) {
        parts.push_back(std::make_shared<Sphere>(k));
        sizes.push_back(k + 1);
    }
    auto domain = std::make_shared<ProductManifold>(parts);

    auto unpack = [sizes, levels](const Vec& t) {
        std::vector<Vec> axes(static_cast<std::size_t>(levels));
        Eigen::Index off = 0;
        for (int i = 0; i < levels; ++i) {
            axes[static_cast<std::size_t>(i)] = t.segment(off, sizes[static_cast<std::size_t>(i)]);
            off += sizes[static_cast<std::size_t>(i)];
        }
        return axes;
    };

    auto project_all = [&xs, unpack](const Vec& t) -> std::optional<std::vector<Vec>> {
        SphereChain chain(unpack(t));
        std::vector<double> radii(static_cast<std::size_t>(chain.levels()), kHalfPi);
        std::vector<Vec> zs;
        zs.reserve(xs.size());
        try {
            for (const Vec& x : xs) zs.push_back(chain.project(x, radii));
        } catch (const SingularProjectionError&) {
            return std::nullopt;
        }
        return zs;
    };

    MappingObjective mo;
    mo.domain = domain;
    mo.latent_points = [project_all](const Vec& t) {
        auto zs = project_all(t);
        if (!zs) throw SingularProjectionError("mgp_fit: singular projection of training data", -1);
        return *zs;
    };
    mo.latent_sq_dist = [project_all](const Vec& t) -> std::optional<Mat> {
        auto zs = project_all(t);
        if (!zs) return std::nullopt;
        return pairwise_sq_distances_features(*zs, FeatureMetric::arc, Exec::serial);
    };
    mo.latent_sq_dist_exact = mo.latent_sq_dist;

    // Forward differences along the per-level tangent bases. A probe at level
    // i leaves the chain prefix untouched, so only levels i and below are
    // recomputed from the cached intermediate points.
    mo.make_map_gradient = [&xs, unpack, sizes, levels](
                               std::function<double(const Mat&)> nll_of_d2) -> GradientFn {
        return [&xs, unpack, sizes, levels, nll_of_d2](const Vec& t) -> Vec {
            const std::vector<Vec> axes = unpack(t);
            std::vector<Mat> rots;
            rots.reserve(axes.size());
            for (const Vec& v : axes) rots.push_back(rotation_to_north(v));

            std::vector<std::vector<Vec>> level_pts(static_cast<std::size_t>(levels) + 1);
            level_pts[0] = xs;
            try {
                for (int i = 0; i < levels; ++i) {
                    auto& next = level_pts[static_cast<std::size_t>(i) + 1];
                    next.reserve(xs.size());
                    for (const Vec& ptx : level_pts[static_cast<std::size_t>(i)])
                        next.push_back(sphere_project_step_cached(
                            ptx, axes[static_cast<std::size_t>(i)],
                            rots[static_cast<std::size_t>(i)], kHalfPi, i));
                }
            } catch (const SingularProjectionError&) {
                return Vec::Zero(t.size());
            }
            const double f0 = nll_of_d2(pairwise_sq_distances_features(
                level_pts[static_cast<std::size_t>(levels)], FeatureMetric::arc, Exec::serial));

            struct Probe {
                int level;
                int col;
                Eigen::Index offset;
            };
            std::vector<Probe> probes;
            std::vector<Mat> bases(static_cast<std::size_t>(levels));
            Eigen::Index off = 0;
            for (int i = 0; i < levels; ++i) {
                Sphere s(static_cast<int>(sizes[static_cast<std::size_t>(i)]) - 1);
                bases[static_cast<std::size_t>(i)] =
                    s.tangent_basis(axes[static_cast<std::size_t>(i)]);
                for (int c = 0; c < s.dim(); ++c) probes.push_back({i, c, off});
                off += sizes[static_cast<std::size_t>(i)];
            }

            const double h = 1e-6;
            Vec coords(static_cast<Eigen::Index>(probes.size()));
            par_for(Exec::parallel, static_cast<std::int64_t>(probes.size()),
                    [&](std::int64_t pi) {
                        const Probe& pr = probes[static_cast<std::size_t>(pi)];
                        Vec axis = axes[static_cast<std::size_t>(pr.level)] +
                                   h * bases[static_cast<std::size_t>(pr.level)].col(pr.col);
                        axis /= axis.norm();
                        const Mat rot = rotation_to_north(axis);
                        try {
                            std::vector<Vec> pts = level_pts[static_cast<std::size_t>(pr.level)];
                            for (Vec& ptx : pts)
                                ptx = sphere_project_step_cached(ptx, axis, rot, kHalfPi,
                                                                 pr.level);
                            for (int j = pr.level + 1; j < levels; ++j) {
                                for (Vec& ptx : pts)
                                    ptx = sphere_project_step_cached(
                                        ptx, axes[static_cast<std::size_t>(j)],
                                        rots[static_cast<std::size_t>(j)], kHalfPi, j);
                            }
                            const double fq = nll_of_d2(pairwise_sq_distances_features(
                                pts, FeatureMetric::arc, Exec::serial));
                            coords[pi] = (fq - f0) / h;
                        } catch (const SingularProjectionError&) {
                            coords[pi] = 0.0;
                        }
                    });

            Vec grad = Vec::Zero(t.size());
            for (std::size_t k = 0; k < probes.size(); ++k) {
                const Probe& pr = probes[k];
                grad.segment(pr.offset, sizes[static_cast<std::size_t>(pr.level)]) +=
                    coords[static_cast<Eigen::Index>(k)] *
                    bases[static_cast<std::size_t>(pr.level)].col(pr.col);
            }
            return grad;
        };
    };
    return mo;
}

MappingObjective spd_mapping_objective(const std::vector<Vec>& xs, const Spd& high,
                                       int latent_dim, const SpdLogTable& table) {
    const int big = high.matrix_dim();
    auto domain = std::make_shared<Grassmann>(big, latent_dim);
    auto latent = std::make_shared<Spd>(latent_dim);

    auto to_w = [big, latent_dim](const Vec& t) {
        return Mat(Eigen::Map<const Mat>(t.data(), big, latent_dim));
    };

    MappingObjective mo;
    mo.domain = domain;
    mo.latent_points = [&xs, &high, latent, to_w](const Vec& t) {
        SpdNestedParams p(to_w(t));
        std::vector<Vec> zs;
        zs.reserve(xs.size());
        for (const Vec& x : xs) zs.push_back(latent->to_vec(spd_project(high.to_mat(x), p)));
        return zs;
    };
    mo.latent_sq_dist = [&table, to_w](const Vec& t) -> std::optional<Mat> {
        return spd_latent_sq_distances_fast(table, to_w(t), Exec::serial);
    };
    mo.latent_sq_dist_exact = [&xs, &high, latent, to_w](const Vec& t) -> std::optional<Mat> {
        SpdNestedParams p(to_w(t));
        std::vector<Vec> feats;
        feats.reserve(xs.size());
        for (const Vec& x : xs)
            feats.push_back(distance_feature(*latent, latent->to_vec(spd_project(high.to_mat(x), p))));
        return pairwise_sq_distances_features(feats, FeatureMetric::euclidean, Exec::serial);
    };
    return mo;
}

}  // namespace

MgpModel mgp_fit(ManifoldPtr high, const std::vector<Vec>& xs, const Vec& y, int latent_dim,
                 const MgpFitOptions& opts) {
    if (xs.size() < 2) throw std::invalid_argument("mgp_fit: need at least 2 observations");
    const auto* sphere_high = dynamic_cast<const Sphere*>(high.get());
    const auto* spd_high = dynamic_cast<const Spd*>(high.get());
    if (!sphere_high && !spd_high)
        throw std::invalid_argument("mgp_fit: unsupported high manifold " + high->name());
    const int big_dim = sphere_high ? sphere_high->dim() : spd_high->matrix_dim();
    if (latent_dim < 1 || latent_dim > big_dim)
        throw std::invalid_argument("mgp_fit: latent dimension out of range");

    // Identity mapping: plain GP fit on the original manifold.
    if (latent_dim == big_dim) {
        GpFitOptions gopts;
        gopts.restarts = opts.gp_restarts;
        gopts.tr_iterations = opts.gp_tr_iterations;
        gopts.seed = sub_seed(opts.seed, "mgp_gp");
        if (opts.warm_start && opts.warm_start->identity_mapping())
            gopts.warm_params = opts.warm_start->gp_opt_params;
        GpFit fit = fit_gp(high, xs, y, opts.beta_min, gopts);
        MgpModel model;
        model.high = high;
        model.latent = high;
        model.gp = std::move(fit.state);
        model.nll = fit.nll;
        model.gp_opt_params = fit.opt_params;
        return model;
    }

    StandardizedTargets ts = standardize_targets(y, true);

    SpdLogTable table;
    std::vector<Mat> x_mats;
    if (spd_high) {
        x_mats.reserve(xs.size());
        for (const Vec& x : xs) x_mats.push_back(spd_high->to_mat(x));
        table = build_spd_log_table(x_mats, opts.exec);
    }
    MappingObjective mo = spd_high
                              ? spd_mapping_objective(xs, *spd_high, latent_dim, table)
                              : sphere_mapping_objective(xs, big_dim, latent_dim);

    GpParamSpace space;
    space.beta_min = opts.beta_min;

    auto joint_nll_exact = [&](const Vec& t, const Vec& p) {
        auto d2 = mo.latent_sq_dist_exact(t);
        if (!d2) return 1e12;
        return space.eval(*d2, ts.y, p, false).value;
    };

    // Starting mapping parameters: warm start when given, a supervised
    // slice-moment start when the data supports it, random fills.
    std::vector<Vec> starts;
    const int rounds = opts.alternation_rounds;
    const int want = std::max(1, opts.multistarts);
    if (opts.warm_start && !opts.warm_start->identity_mapping()) {
        Vec t(mo.domain->ambient_size());
        if (sphere_high) {
            Eigen::Index off = 0;
            for (const Vec& ax : opts.warm_start->sphere_map->axes) {
                t.segment(off, ax.size()) = ax;
                off += ax.size();
            }
        } else {
            t = Eigen::Map<const Vec>(opts.warm_start->spd_map->w.data(),
                                      mo.domain->ambient_size());
        }
        starts.push_back(t);
    }
    if (!opts.warm_start || static_cast<int>(starts.size()) < want) {
        if (sphere_high && xs.size() >= 12) {
            if (opts.include_greedy_start && static_cast<int>(starts.size()) < want) {
                try {
                    starts.push_back(sphere_greedy_axes_start(
                        xs, ts.y, big_dim, latent_dim, space, sub_seed(opts.seed, "greedy_root"),
                        opts.gp_tr_iterations));
                } catch (const std::exception&) {
                }
            }
            if (static_cast<int>(starts.size()) < want) {
                try {
                    starts.push_back(sphere_supervised_axes_start(xs, y, big_dim, latent_dim));
                } catch (const std::exception&) {
                    // Degenerate slice moments; random starts cover it.
                }
            }
        }
        for (int s = 0; static_cast<int>(starts.size()) < want; ++s) {
            Rng rng = make_rng(sub_seed(opts.seed, "mgp_start", static_cast<std::uint64_t>(s)));
            starts.push_back(mo.domain->random_point(rng));
        }
    }

    TrustRegionConfig map_cfg = default_tr_config(*mo.domain);
    map_cfg.max_outer = opts.map_tr_iterations;
    map_cfg.grad_tol = 1e-6;
    map_cfg.hess_fd_step = 1e-4;
    map_cfg.tcg_max_iterations = opts.map_tcg_cap;

    Vec best_t;
    Vec best_p;
    double best_nll = std::numeric_limits<double>::infinity();

    for (std::size_t s = 0; s < starts.size(); ++s) {
        Vec t = starts[s];
        Vec p = (s == 0 && opts.warm_start && !opts.warm_start->identity_mapping())
                    ? opts.warm_start->gp_opt_params
                    : Vec();
        double cur_nll = std::numeric_limits<double>::infinity();

        for (int round = 0; round < rounds; ++round) {
            // Graduated noise floor on alternating starts: early rounds force
            // the kernel to explain the targets through latent distances
            // before the noise is released, which keeps the mapping gradient
            // informative. The other starts (and a warm start, which is
            // already converged) keep the plain schedule.
            GpParamSpace round_space = space;
            const bool anneal_this_start =
                rounds > 1 && (opts.warm_start ? s % 2 == 1 : s % 2 == 0);
            if (anneal_this_start && round < 2) {
                const double anneal[] = {0.25, 0.03};
                round_space.noise_floor = std::max(space.noise_floor, anneal[round]);
            }

            // Kernel hyperparameters against the exact latent distances.
            auto d2 = mo.latent_sq_dist_exact(t);
            if (!d2) break;
            std::vector<Vec> gp_start_set;
            if (p.size() == 3) {
                gp_start_set.push_back(p);
            } else {
                GpFitOptions tmp;
                tmp.restarts = opts.gp_restarts;
                tmp.seed = sub_seed(opts.seed, "mgp_gp_start", static_cast<std::uint64_t>(s));
                gp_start_set = gp_starts(*d2, round_space, tmp);
            }
            auto [p_new, nll_g] = optimize_gp_params(*d2, ts.y, round_space, gp_start_set,
                                                     opts.gp_tr_iterations);
            p = p_new;

            // Mapping parameters with hyperparameters held fixed; fast latent
            // distances inside the solve, exact value guarding acceptance.
            Objective map_obj = [&](const Vec& tt) {
                auto dd = mo.latent_sq_dist(tt);
                if (!dd) return 1e12;
                return round_space.eval(*dd, ts.y, p, false).value;
            };
            GradientFn map_grad;
            if (mo.make_map_gradient) {
                const GpParamSpace grad_space = round_space;
                const Vec grad_p = p;
                map_grad = mo.make_map_gradient([grad_space, &ts, grad_p](const Mat& d2) {
                    return grad_space.eval(d2, ts.y, grad_p, false).value;
                });
            }
            TrResult tr = trust_region_minimize(*mo.domain, map_obj, map_grad, t, map_cfg);
            auto d2_new = mo.latent_sq_dist_exact(tr.x);
            if (d2_new) {
                const double exact_new = round_space.eval(*d2_new, ts.y, p, false).value;
                if (exact_new <= nll_g) t = tr.x;
            }
        }

        // Fix the comparable joint likelihood at the true noise floor:
        // annealed starts need a hyperparameter refit, plain ones only an
        // evaluation at the final mapping.
        const bool was_annealed = rounds > 1 && (opts.warm_start ? s % 2 == 1 : s % 2 == 0);
        if (auto d2 = mo.latent_sq_dist_exact(t)) {
            if (was_annealed || p.size() != 3) {
                std::vector<Vec> gp_start_set;
                if (p.size() == 3) gp_start_set.push_back(p);
                gp_start_set.push_back(heuristic_gp_start(*d2, space));
                auto [p_new, nll_g] =
                    optimize_gp_params(*d2, ts.y, space, gp_start_set, opts.gp_tr_iterations);
                p = p_new;
                cur_nll = nll_g;
            } else {
                cur_nll = space.eval(*d2, ts.y, p, false).value;
            }
        }

        if (cur_nll < best_nll) {
            best_nll = cur_nll;
            best_t = t;
            best_p = p;
        }
    }

    if (!best_t.size())
        throw std::runtime_error("mgp_fit: every start failed to produce a finite likelihood");

    MgpModel model;
    model.high = high;
    if (sphere_high) {
        std::vector<Vec> axes;
        Eigen::Index off = 0;
        for (int k = big_dim; k > latent_dim; --k) {
            axes.push_back(best_t.segment(off, k + 1));
            off += k + 1;
        }
        model.sphere_map = NestedSphereParams(
            axes, std::vector<double>(static_cast<std::size_t>(big_dim - latent_dim), kHalfPi));
        model.latent = std::make_shared<Sphere>(latent_dim);
    } else {
        model.spd_map = SpdNestedParams(
            Mat(Eigen::Map<const Mat>(best_t.data(), big_dim, latent_dim)));
        model.latent = std::make_shared<Spd>(latent_dim);
    }
    model.nll = best_nll;
    model.gp_opt_params = best_p;

    std::vector<Vec> latent_inputs = mo.latent_points(best_t);
    const GeodesicSeKernel kernel(space.theta(best_p), space.beta(best_p), opts.beta_min);
    // Escalate the noise if the final Gram resists factorization.
    for (double noise_boost : {1.0, 1e2, 1e4}) {
        try {
            model.gp = make_gp_state(model.latent, latent_inputs, y, kernel,
                                     space.noise(best_p) * noise_boost, true);
            return model;
        } catch (const std::runtime_error&) {
        }
    }
    model.gp = make_gp_state(model.latent, latent_inputs, y, kernel, 1e-2, true);
    return model;
}

}  // namespace geobo
