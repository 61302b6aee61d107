#include "geobo/nested.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/SVD>

#include "geobo/errors.hpp"
#include "geobo/trust_region.hpp"

namespace geobo {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kHalfPi = std::numbers::pi / 2.0;

double spectral_norm(const Mat& k) {
    return Eigen::JacobiSVD<Mat>(k).singularValues()[0];
}
}  // namespace

NestedSphereParams::NestedSphereParams(std::vector<Vec> axes_in, std::vector<double> radii_in)
    : axes(std::move(axes_in)), radii(std::move(radii_in)) {
    if (axes.size() != radii.size())
        throw std::invalid_argument("NestedSphereParams: axes/radii length mismatch");
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (std::abs(axes[i].norm() - 1.0) > 1e-10)
            throw std::invalid_argument("NestedSphereParams: axis not unit-norm");
        if (i > 0 && axes[i].size() != axes[i - 1].size() - 1)
            throw std::invalid_argument("NestedSphereParams: axis dimensions must descend by one");
        if (!(radii[i] > 0.0) || radii[i] > kHalfPi + 1e-12)
            throw std::invalid_argument("NestedSphereParams: radius outside (0, pi/2]");
    }
}

SpdNestedParams::SpdNestedParams(Mat w_in) : w(std::move(w_in)) {
    if (w.cols() < 1 || w.cols() > w.rows())
        throw std::invalid_argument("SpdNestedParams: bad frame shape");
    if ((w.transpose() * w - Mat::Identity(w.cols(), w.cols())).norm() > 1e-10)
        throw std::invalid_argument("SpdNestedParams: frame columns not orthonormal");
}

SpdReconstructionParams::SpdReconstructionParams(Mat v_in, Mat k_in, Mat b_in, const Mat& w)
    : v(std::move(v_in)), k(std::move(k_in)), b(std::move(b_in)) {
    const Eigen::Index big = w.rows(), small = w.cols();
    if (v.rows() != big || v.cols() != big - small)
        throw std::invalid_argument("SpdReconstructionParams: V shape mismatch");
    if (k.rows() != small || k.cols() != big - small)
        throw std::invalid_argument("SpdReconstructionParams: K shape mismatch");
    if ((v.transpose() * v - Mat::Identity(v.cols(), v.cols())).norm() > 1e-8)
        throw std::invalid_argument("SpdReconstructionParams: V columns not orthonormal");
    if ((w.transpose() * v).norm() > 1e-8)
        throw std::invalid_argument("SpdReconstructionParams: V not orthogonal to W");
    if (spectral_norm(k) > 1.0 + 1e-8)
        throw std::invalid_argument("SpdReconstructionParams: K is not a contraction");
    make_spd_point(b, 1e-8);
}

Mat rotation_to_north(const Vec& v) {
    const Eigen::Index n = v.size();
    Vec north = Vec::Zero(n);
    north[n - 1] = 1.0;
    const double c = v.dot(north);

    if (c > 1.0 - 1e-15) return Mat::Identity(n, n);
    if (c < -1.0 + 1e-12) {
        // Fixed 180-degree rotation in the (e_1, north) plane.
        Mat r = Mat::Identity(n, n);
        r(0, 0) = -1.0;
        r(n - 1, n - 1) = -1.0;
        return r;
    }

    Vec axis = v - c * north;
    axis /= axis.norm();
    const double alpha = std::acos(std::clamp(c, -1.0, 1.0));
    const double s = std::sin(alpha);
    Mat r = Mat::Identity(n, n);
    r += s * (north * axis.transpose() - axis * north.transpose());
    r += (std::cos(alpha) - 1.0) *
         (north * north.transpose() + axis * axis.transpose());
    return r;
}

Vec sphere_project_step_cached(const Vec& x, const Vec& v, const Mat& rot, double r,
                               int level) {
    if (x.size() != v.size())
        throw std::invalid_argument("sphere_project_step: dimension mismatch");
    if (!(r > 0.0) || r > kHalfPi + 1e-12)
        throw std::invalid_argument("sphere_project_step: radius outside (0, pi/2]");
    const double d = sphere_distance(v, x);
    if (d < 1e-9 || kPi - d < 1e-9)
        throw SingularProjectionError(
            "sphere_project_step: point on the mapping axis at level " + std::to_string(level),
            level);

    const double sr = std::sin(r);
    Vec on_subsphere = (sr * x + std::sin(d - r) * v) / std::sin(d);
    Vec rotated = rot * on_subsphere;
    return rotated.head(x.size() - 1) / sr;
}

Vec sphere_unproject_step_cached(const Vec& z, const Mat& rot, double r) {
    if (z.size() + 1 != rot.rows())
        throw std::invalid_argument("sphere_unproject_step: dimension mismatch");
    if (!(r > 0.0) || r > kHalfPi + 1e-12)
        throw std::invalid_argument("sphere_unproject_step: radius outside (0, pi/2]");
    Vec lifted(rot.rows());
    lifted.head(z.size()) = std::sin(r) * z;
    lifted[z.size()] = std::cos(r);
    return rot.transpose() * lifted;
}

Vec sphere_project_step(const Vec& x, const Vec& v, double r, int level) {
    return sphere_project_step_cached(x, v, rotation_to_north(v), r, level);
}

Vec sphere_unproject_step(const Vec& z, const Vec& v, double r) {
    if (z.size() + 1 != v.size())
        throw std::invalid_argument("sphere_unproject_step: dimension mismatch");
    return sphere_unproject_step_cached(z, rotation_to_north(v), r);
}

SphereChain::SphereChain(std::vector<Vec> axes) : axes_(std::move(axes)) {
    rotations_.reserve(axes_.size());
    for (const Vec& v : axes_) rotations_.push_back(rotation_to_north(v));
}

Vec SphereChain::project(const Vec& x, const std::vector<double>& radii) const {
    Vec cur = x;
    for (int i = 0; i < levels(); ++i) {
        const int level = static_cast<int>(cur.size()) - 1;
        cur = sphere_project_step_cached(cur, axes_[static_cast<std::size_t>(i)],
                                         rotations_[static_cast<std::size_t>(i)],
                                         radii[static_cast<std::size_t>(i)], level);
    }
    return cur;
}

Vec SphereChain::unproject(const Vec& z, const std::vector<double>& radii) const {
    Vec cur = z;
    for (int i = levels() - 1; i >= 0; --i) {
        cur = sphere_unproject_step_cached(cur, rotations_[static_cast<std::size_t>(i)],
                                           radii[static_cast<std::size_t>(i)]);
    }
    return cur;
}

Vec sphere_project(const Vec& x, const NestedSphereParams& p) {
    Vec cur = x;
    for (int i = 0; i < p.levels(); ++i) {
        const int level = static_cast<int>(cur.size()) - 1;  // dimension being reduced
        cur = sphere_project_step(cur, p.axes[static_cast<std::size_t>(i)],
                                  p.radii[static_cast<std::size_t>(i)], level);
    }
    return cur;
}

Vec sphere_unproject(const Vec& z, const NestedSphereParams& p) {
    Vec cur = z;
    for (int i = p.levels() - 1; i >= 0; --i) {
        cur = sphere_unproject_step(cur, p.axes[static_cast<std::size_t>(i)],
                                    p.radii[static_cast<std::size_t>(i)]);
    }
    return cur;
}

Mat spd_project(const Mat& x, const SpdNestedParams& p) {
    if (x.rows() != p.w.rows())
        throw std::invalid_argument("spd_project: dimension mismatch");
    Mat z = sym_part(p.w.transpose() * x * p.w);
    if (min_eigenvalue(z) <= -1e-10 * std::max(1.0, z.norm()))
        throw std::runtime_error("spd_project: projected matrix lost positive definiteness");
    return z;
}

Mat spd_unproject(const Mat& z, const SpdNestedParams& pm, const SpdReconstructionParams& pr) {
    const Eigen::Index small = pm.latent_dim(), big = pm.high_dim();
    if (z.rows() != small) throw std::invalid_argument("spd_unproject: dimension mismatch");
    Mat r(big, big);
    r.leftCols(small) = pm.w;
    r.rightCols(big - small) = pr.v;
    Mat zs = sym_sqrtm(z);
    Mat bs = sym_sqrtm(pr.b);
    Mat c = zs * pr.k * bs;
    Mat block(big, big);
    block.topLeftCorner(small, small) = z;
    block.topRightCorner(small, big - small) = c;
    block.bottomLeftCorner(big - small, small) = c.transpose();
    block.bottomRightCorner(big - small, big - small) = pr.b;
    return sym_part(r * block * r.transpose());
}

// ---------------------------------------------------------------------------
// Sphere radii fit
// ---------------------------------------------------------------------------

namespace {

double logistic_radius(double u) { return kHalfPi / (1.0 + std::exp(-u)); }

double radius_logit(double r) {
    const double frac = std::clamp(r / kHalfPi, 1e-12, 1.0 - 1e-12);
    return std::log(frac / (1.0 - frac));
}

}  // namespace

SphereReconstructionFit fit_reconstruction_sphere(const std::vector<Vec>& xs,
                                                  const std::vector<Vec>& zs,
                                                  const std::vector<Vec>& axes,
                                                  const SphereFitOptions& opts) {
    if (xs.empty() || xs.size() != zs.size())
        throw std::invalid_argument("fit_reconstruction_sphere: need matching nonempty pairs");
    const int levels = static_cast<int>(axes.size());
    if (levels == 0) return {{}, 0.0, true};

    const SphereChain chain(axes);
    auto objective = [&](const Vec& u) {
        std::vector<double> radii(static_cast<std::size_t>(levels));
        for (int i = 0; i < levels; ++i) radii[static_cast<std::size_t>(i)] = logistic_radius(u[i]);
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double d = sphere_distance(xs[i], chain.unproject(zs[i], radii));
            total += d * d;
        }
        return total;
    };

    auto fd_grad = [&](const Vec& u, double f0) {
        Vec g(levels);
        const double h = 1e-6;
        for (int i = 0; i < levels; ++i) {
            Vec up = u;
            up[i] += h;
            Vec dn = u;
            dn[i] -= h;
            g[i] = (objective(up) - objective(dn)) / (2.0 * h);
            (void)f0;
        }
        return g;
    };

    std::vector<Vec> starts;
    if (opts.warm_start) {
        Vec u(levels);
        for (int i = 0; i < levels; ++i)
            u[i] = radius_logit((*opts.warm_start)[static_cast<std::size_t>(i)]);
        starts.push_back(u);
        starts.push_back(Vec::Constant(levels, radius_logit(kPi / 3.0)));
    } else {
        for (double r0 : {kPi / 6.0, kPi / 3.0, kHalfPi})
            starts.push_back(Vec::Constant(levels, radius_logit(r0)));
    }

    Vec best_u;
    double best_f = std::numeric_limits<double>::infinity();
    bool any_converged = false;

    for (const Vec& start : starts) {
        Vec u = start;
        double f = objective(u);
        bool converged = false;
        for (int it = 0; it < opts.max_iterations; ++it) {
            Vec g = fd_grad(u, f);
            if (g.norm() < opts.grad_tol) {
                converged = true;
                break;
            }
            // Backtracking line search with Armijo condition.
            double step = 1.0;
            const double slope = -g.squaredNorm();
            bool moved = false;
            for (int bt = 0; bt < 40; ++bt) {
                Vec cand = (u - step * g).cwiseMax(-30.0).cwiseMin(30.0);
                const double fc = objective(cand);
                if (fc <= f + 1e-4 * step * slope) {
                    u = cand;
                    f = fc;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) {
                converged = true;  // no descent at line-search resolution
                break;
            }
        }
        any_converged = any_converged || converged;
        if (f < best_f) {
            best_f = f;
            best_u = u;
        }
    }

    SphereReconstructionFit fit;
    fit.radii.resize(static_cast<std::size_t>(levels));
    for (int i = 0; i < levels; ++i)
        fit.radii[static_cast<std::size_t>(i)] = logistic_radius(best_u[i]);
    fit.objective = best_f;
    fit.converged = any_converged;
    return fit;
}

// ---------------------------------------------------------------------------
// SPD reconstruction fit
// ---------------------------------------------------------------------------

namespace {

struct SpdFitWorkspace {
    std::vector<Mat> log_x;   // logm(X_i)
    std::vector<Mat> z_sqrt;  // Z_i^{1/2}
};

// Shared evaluation of the reconstruction objective; fills the gradient terms
// when grad pointers are non-null. Returns +inf (no gradient) if some
// reconstruction is numerically outside the PD cone.
double eval_reconstruction(const SpdFitWorkspace& ws, const std::vector<Mat>& zs, const Mat& w,
                           const Mat& v, const Mat& k, const Mat& b, Mat* grad_v, Mat* grad_k,
                           Mat* grad_b) {
    const Eigen::Index big = w.rows(), small = w.cols();
    Mat r(big, big);
    r.leftCols(small) = w;
    r.rightCols(big - small) = v;

    SymEig eb = eig_sym(b);
    if (eb.lam.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    Mat bs = eb.q * eb.lam.array().sqrt().matrix().asDiagonal() * eb.q.transpose();

    double total = 0.0;
    if (grad_v) grad_v->setZero(big, big - small);
    if (grad_k) grad_k->setZero(small, big - small);
    if (grad_b) grad_b->setZero(big - small, big - small);

    for (std::size_t i = 0; i < zs.size(); ++i) {
        const Mat& zsqrt = ws.z_sqrt[i];
        Mat c = zsqrt * k * bs;
        Mat block(big, big);
        block.topLeftCorner(small, small) = zs[i];
        block.topRightCorner(small, big - small) = c;
        block.bottomLeftCorner(big - small, small) = c.transpose();
        block.bottomRightCorner(big - small, big - small) = b;
        Mat xhat = sym_part(r * block * r.transpose());

        SymEig ex = eig_sym(xhat);
        if (ex.lam.minCoeff() < -1e-8) return std::numeric_limits<double>::infinity();
        Vec lam = ex.lam.cwiseMax(1e-12);
        Mat log_xhat = ex.q * lam.array().log().matrix().asDiagonal() * ex.q.transpose();

        Mat e = log_xhat - ws.log_x[i];
        total += e.squaredNorm();

        if (grad_v || grad_k || grad_b) {
            Mat p = dlogm(ex, e);  // self-adjoint pullback of the residual
            if (grad_v) *grad_v += 4.0 * (p * r * block).rightCols(big - small);
            Mat q = r.transpose() * p * r;
            Mat q12 = q.topRightCorner(small, big - small);
            if (grad_k) *grad_k += 4.0 * zsqrt * q12 * bs;
            if (grad_b) {
                Mat q22 = q.bottomRightCorner(big - small, big - small);
                Mat a = sym_part(k.transpose() * zsqrt * q12);
                *grad_b += 2.0 * q22 + 4.0 * dsqrtm(eb, a);
            }
        }
    }
    return total;
}

}  // namespace

double spd_reconstruction_objective(const std::vector<Mat>& xs, const std::vector<Mat>& zs,
                                    const Mat& w, const Mat& v, const Mat& k, const Mat& b) {
    SpdFitWorkspace ws;
    for (const Mat& x : xs) ws.log_x.push_back(sym_logm(x));
    for (const Mat& z : zs) ws.z_sqrt.push_back(sym_sqrtm(z));
    return eval_reconstruction(ws, zs, w, v, k, b, nullptr, nullptr, nullptr);
}

void spd_reconstruction_objective_grad(const std::vector<Mat>& xs, const std::vector<Mat>& zs,
                                       const Mat& w, const Mat& v, const Mat& k, const Mat& b,
                                       double* value, Mat* grad_v, Mat* grad_k, Mat* grad_b) {
    SpdFitWorkspace ws;
    for (const Mat& x : xs) ws.log_x.push_back(sym_logm(x));
    for (const Mat& z : zs) ws.z_sqrt.push_back(sym_sqrtm(z));
    const double f = eval_reconstruction(ws, zs, w, v, k, b, grad_v, grad_k, grad_b);
    if (value) *value = f;
}

SpdReconstructionFit fit_reconstruction_spd(const std::vector<Mat>& xs, const std::vector<Mat>& zs,
                                            const Mat& w, const SpdFitOptions& opts) {
    if (xs.empty() || xs.size() != zs.size())
        throw std::invalid_argument("fit_reconstruction_spd: need matching nonempty pairs");
    const int big = static_cast<int>(w.rows());
    const int small = static_cast<int>(w.cols());
    const int rest = big - small;
    if (rest == 0) {
        SpdReconstructionFit fit;
        fit.objective = 0.0;
        return fit;
    }

    SpdFitWorkspace ws;
    for (const Mat& x : xs) ws.log_x.push_back(sym_logm(x));
    for (const Mat& z : zs) ws.z_sqrt.push_back(sym_sqrtm(z));

    auto parts = std::vector<ManifoldPtr>{
        std::make_shared<Grassmann>(big, rest),
        std::make_shared<Euclidean>(small * rest),
        std::make_shared<Spd>(rest),
    };
    ProductManifold domain(parts);

    auto unpack = [&](const Vec& t, Mat& v, Mat& k, Mat& b) {
        v = Eigen::Map<const Mat>(t.data(), big, rest);
        k = Eigen::Map<const Mat>(t.data() + big * rest, small, rest);
        b = Eigen::Map<const Mat>(t.data() + big * rest + small * rest, rest, rest);
    };
    auto pack = [&](const Mat& v, const Mat& k, const Mat& b) {
        Vec t(domain.ambient_size());
        Eigen::Map<Mat>(t.data(), big, rest) = v;
        Eigen::Map<Mat>(t.data() + big * rest, small, rest) = k;
        Eigen::Map<Mat>(t.data() + big * rest + small * rest, rest, rest) = b;
        return t;
    };

    Objective obj = [&](const Vec& t) {
        Mat v, k, b;
        unpack(t, v, k, b);
        const double f = eval_reconstruction(ws, zs, w, v, k, b, nullptr, nullptr, nullptr);
        return std::isfinite(f) ? f : 1e12;
    };
    GradientFn grad = [&](const Vec& t) -> Vec {
        Mat v, k, b;
        unpack(t, v, k, b);
        Mat gv, gk, gb;
        const double f = eval_reconstruction(ws, zs, w, v, k, b, &gv, &gk, &gb);
        if (!std::isfinite(f)) return Vec::Zero(t.size());
        return domain.project_tangent(t, pack(gv, gk, gb));
    };

    // Constraints: entries of W'V = 0 (equalities), ||K||_2 <= 1 (inequality).
    ConstraintSet cs;
    cs.xi = opts.constraint_tol;
    for (int a = 0; a < small; ++a) {
        for (int bcol = 0; bcol < rest; ++bcol) {
            Constraint c;
            c.kind = ConstraintKind::equality;
            c.value = [&, a, bcol](const Vec& t) {
                Mat v, k, b;
                unpack(t, v, k, b);
                return w.col(a).dot(v.col(bcol));
            };
            c.gradient = [&, a, bcol](const Vec& t) {
                Mat gv = Mat::Zero(big, rest);
                gv.col(bcol) = w.col(a);
                return pack(gv, Mat::Zero(small, rest), Mat::Zero(rest, rest));
            };
            cs.constraints.push_back(std::move(c));
        }
    }
    {
        Constraint c;
        c.kind = ConstraintKind::inequality;
        c.value = [&](const Vec& t) {
            Mat v, k, b;
            unpack(t, v, k, b);
            return 1.0 - spectral_norm(k);
        };
        c.gradient = [&](const Vec& t) {
            Mat v, k, b;
            unpack(t, v, k, b);
            Eigen::JacobiSVD<Mat> svd(k, Eigen::ComputeThinU | Eigen::ComputeThinV);
            Mat gk = -svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
            return pack(Mat::Zero(big, rest), gk, Mat::Zero(rest, rest));
        };
        cs.constraints.push_back(std::move(c));
    }

    // Feasible data-informed start: V spans the complement of W, K = 0,
    // B the mean of the data's complement block.
    Mat v0, k0, b0;
    if (opts.warm_start) {
        v0 = opts.warm_start->v;
        k0 = opts.warm_start->k;
        b0 = opts.warm_start->b;
    } else {
        v0 = orthonormal_complement(w);
        k0 = Mat::Zero(small, rest);
        b0 = Mat::Zero(rest, rest);
        for (const Mat& x : xs) b0 += v0.transpose() * x * v0;
        b0 = sym_part(b0 / static_cast<double>(xs.size()));
    }

    auto project_feasible = [&](Mat& v, Mat& k) {
        v = thin_qr(v - w * (w.transpose() * v));
        const double sn = spectral_norm(k);
        if (sn > 1.0) k /= sn * (1.0 + 1e-12);
    };

    AlConfig al_cfg;
    al_cfg.max_outer = opts.outer_rounds;
    al_cfg.violation_tol = opts.constraint_tol;
    al_cfg.infeasible_tol = opts.infeasible_tol;
    al_cfg.inner = default_tr_config(domain);
    al_cfg.inner.max_outer = opts.inner_iterations;
    al_cfg.inner.grad_tol = 1e-8;

    AugmentedLagrangian al(domain, obj, grad, cs, pack(v0, k0, b0), al_cfg);

    Mat best_v = v0, best_k = k0, best_b = b0;
    {
        Mat vv = v0, kk = k0;
        project_feasible(vv, kk);
        best_v = vv;
        best_k = kk;
    }
    SpdReconstructionFit fit;
    double best_f = eval_reconstruction(ws, zs, w, best_v, best_k, best_b, nullptr, nullptr,
                                        nullptr);
    fit.outer_objectives.push_back(best_f);

    for (int round = 0; round < opts.outer_rounds; ++round) {
        al.step();
        Mat v, k, b;
        unpack(al.x(), v, k, b);
        project_feasible(v, k);
        if (min_eigenvalue(b) <= 0.0) b = best_b;
        const double f = eval_reconstruction(ws, zs, w, v, k, b, nullptr, nullptr, nullptr);
        if (std::isfinite(f) && f <= best_f) {
            best_f = f;
            best_v = v;
            best_k = k;
            best_b = b;
        } else {
            // Keep the incumbent; multipliers and penalty still advance.
            al.set_x(pack(best_v, best_k, best_b));
        }
        fit.outer_objectives.push_back(best_f);
        if (round >= 1 && al.violation() <= opts.constraint_tol &&
            fit.outer_objectives[fit.outer_objectives.size() - 2] - best_f <
                1e-12 * std::max(1.0, best_f))
            break;
    }

    const double final_violation =
        std::max((w.transpose() * best_v).norm(), std::max(0.0, spectral_norm(best_k) - 1.0));
    if (final_violation > opts.infeasible_tol)
        throw InfeasibleError("fit_reconstruction_spd: constraint violation " +
                              std::to_string(final_violation));

    fit.params = SpdReconstructionParams(best_v, best_k, best_b, w);
    fit.objective = best_f;
    fit.feasible = final_violation <= opts.constraint_tol;
    return fit;
}

}  // namespace geobo
