#include "geobo/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "geobo/errors.hpp"

namespace geobo {

void TrustRegionConfig::validate() const {
    if (!(delta_max > 0.0) || !(delta_0 > 0.0) || delta_0 >= delta_max)
        throw std::invalid_argument("TrustRegionConfig: need 0 < delta_0 < delta_max");
    if (rho_accept < 0.0 || rho_accept >= 0.25)
        throw std::invalid_argument("TrustRegionConfig: rho_accept must lie in [0, 1/4)");
    if (max_outer < 1) throw std::invalid_argument("TrustRegionConfig: max_outer must be >= 1");
    if (grad_tol < 0.0) throw std::invalid_argument("TrustRegionConfig: grad_tol must be >= 0");
}

TrustRegionConfig default_tr_config(const Manifold& m) {
    TrustRegionConfig cfg;
    cfg.delta_max = m.injectivity_scale();
    cfg.delta_0 = cfg.delta_max / 8.0;
    return cfg;
}

Vec ConstraintSet::violation(const Vec& x) const {
    Vec v(constraints.size());
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const double c = constraints[i].value(x);
        v[i] = constraints[i].kind == ConstraintKind::equality ? c : std::min(0.0, c);
    }
    return v;
}

double ConstraintSet::violation_norm(const Vec& x) const {
    return empty() ? 0.0 : violation(x).norm();
}

void write_trace(std::ostream& os, const std::vector<TrIterationRecord>& trace) {
    os << "k\tf\tgrad_norm\tdelta\trho\taccepted\tstep_norm\n";
    for (const auto& r : trace) {
        os << r.k << '\t' << r.f << '\t' << r.grad_norm << '\t' << r.delta << '\t' << r.rho
           << '\t' << (r.accepted ? 1 : 0) << '\t' << r.step_norm << '\n';
    }
}

double boundary_tau(const Vec& nu, const Vec& delta_dir, double radius,
                    const std::function<double(const Vec&, const Vec&)>& inner) {
    const double a = inner(delta_dir, delta_dir);
    if (a <= 0.0) throw std::invalid_argument("boundary_tau: zero direction");
    const double b = inner(nu, delta_dir);
    const double c = inner(nu, nu) - radius * radius;
    double disc = b * b - a * c;
    if (disc < 0.0) {
        if (disc < -1e-12 * std::max(1.0, b * b))
            throw std::runtime_error("boundary_tau: negative discriminant, nu outside radius");
        disc = 0.0;
    }
    return (-b + std::sqrt(disc)) / a;
}

namespace {

Vec linearized_residual(const Vec& lin_c, const Mat& lin_g,
                        const std::vector<ConstraintKind>& kinds, const Vec& nu) {
    Vec vals = lin_c + lin_g.transpose() * nu;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (kinds[static_cast<std::size_t>(i)] == ConstraintKind::inequality)
            vals[i] = std::min(0.0, vals[i]);
    }
    return vals;
}

}  // namespace

std::pair<double, bool> clamp_step_to_constraints(const Vec& nu, const Vec& delta_dir,
                                                  const Vec& lin_c, const Mat& lin_g,
                                                  const std::vector<ConstraintKind>& kinds) {
    const double full_resid = linearized_residual(lin_c, lin_g, kinds, nu + delta_dir).norm();
    if (full_resid <= 1e-12) return {1.0, false};

    // Each linearized constraint is affine in tau, so the feasible range of
    // tau is an interval starting at 0; take its right endpoint.
    double tau = 1.0;
    Vec a = lin_c + lin_g.transpose() * nu;
    Vec b = lin_g.transpose() * delta_dir;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (kinds[static_cast<std::size_t>(i)] == ConstraintKind::equality) {
            if (std::abs(b[i]) > 1e-12) tau = 0.0;
        } else {
            if (b[i] < -1e-15) tau = std::min(tau, std::max(0.0, a[i] / (-b[i])));
        }
    }
    return {tau, true};
}

TcgResult tcg_solve(const Vec& grad, const HessianOp& hess, double radius,
                    const std::function<double(const Vec&, const Vec&)>& inner,
                    const TcgOptions& opts, const Vec* lin_c, const Mat* lin_g,
                    const std::vector<ConstraintKind>* kinds) {
    TcgResult out;
    const Eigen::Index n = grad.size();
    Vec nu = Vec::Zero(n);
    Vec h_nu = Vec::Zero(n);
    out.step_norms.push_back(0.0);

    double r_dot = inner(grad, grad);
    const double r0 = std::sqrt(r_dot);
    if (r0 == 0.0) {
        out.step = nu;
        out.h_step = h_nu;
        return out;
    }
    Vec r = grad;
    Vec dir = -r;
    const double stop = r0 * std::min(std::pow(r0, opts.theta), opts.kappa);
    const int max_j = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(n);
    const bool constrained = lin_c != nullptr && lin_g != nullptr && kinds != nullptr;

    auto apply_clamped = [&](const Vec& increment, bool boundary) {
        if (constrained) {
            auto [tau, cut] = clamp_step_to_constraints(nu, increment, *lin_c, *lin_g, *kinds);
            if (cut) {
                nu += tau * increment;
                h_nu += tau * hess(increment);
                out.clamped_by_constraint = true;
                out.hit_boundary = boundary && tau >= 1.0 - 1e-12;
                out.step_norms.push_back(std::sqrt(inner(nu, nu)));
                return true;
            }
        }
        nu += increment;
        h_nu += hess(increment);
        out.hit_boundary = boundary;
        out.step_norms.push_back(std::sqrt(inner(nu, nu)));
        return false;
    };

    for (int j = 0; j < max_j; ++j) {
        Vec h_dir = hess(dir);
        const double curv = inner(dir, h_dir);
        if (curv <= 0.0) {
            const double tau = boundary_tau(nu, dir, radius, inner);
            apply_clamped(tau * dir, /*boundary=*/true);
            break;
        }
        const double alpha = r_dot / curv;
        Vec cand = nu + alpha * dir;
        if (std::sqrt(inner(cand, cand)) >= radius) {
            const double tau = boundary_tau(nu, dir, radius, inner);
            apply_clamped(tau * dir, /*boundary=*/true);
            break;
        }
        if (constrained) {
            auto [tau, cut] = clamp_step_to_constraints(nu, alpha * dir, *lin_c, *lin_g, *kinds);
            if (cut) {
                nu += tau * alpha * dir;
                h_nu += tau * alpha * h_dir;
                out.clamped_by_constraint = true;
                out.step_norms.push_back(std::sqrt(inner(nu, nu)));
                break;
            }
        }
        nu = cand;
        h_nu += alpha * h_dir;
        out.step_norms.push_back(std::sqrt(inner(nu, nu)));

        Vec r_next = r + alpha * h_dir;
        const double r_dot_next = inner(r_next, r_next);
        if (std::sqrt(r_dot_next) <= stop) break;
        dir = -r_next + (r_dot_next / r_dot) * dir;
        r = r_next;
        r_dot = r_dot_next;
    }

    out.step = nu;
    out.h_step = h_nu;
    return out;
}

Vec fd_gradient(const Manifold& m, const Objective& f, const Vec& x, double step, Exec exec) {
    const Mat basis = m.tangent_basis(x);
    const double f0 = f(x);
    Vec coords(basis.cols());
    par_for(exec, basis.cols(), [&](std::int64_t i) {
        const Vec probe = m.retract(x, step * basis.col(i));
        coords[i] = (f(probe) - f0) / step;
    });
    return basis * coords;
}

HessianOp fd_hessian_operator(const Manifold& m, const GradientFn& grad, const Vec& x,
                              const Vec& grad_at_x, double step) {
    return [&m, grad, x, grad_at_x, step](const Vec& eta) -> Vec {
        const double n = eta.norm();
        if (n < 1e-300) return Vec::Zero(eta.size());
        const Vec probe = m.retract(x, (step / n) * eta);
        const Vec g_probe = m.project_tangent(x, grad(probe));
        return (g_probe - grad_at_x) * (n / step);
    };
}

TrResult trust_region_minimize(const Manifold& m, const Objective& f, const GradientFn& grad,
                               const Vec& x0, const TrustRegionConfig& cfg,
                               const ConstraintSet* constraints) {
    cfg.validate();
    TrResult res;
    res.x = x0;
    res.f = f(x0);
    if (!std::isfinite(res.f)) {
        res.status = TrStatus::aborted_non_finite;
        return res;
    }

    GradientFn gfn = grad;
    if (!gfn) {
        gfn = [&m, &f](const Vec& z) { return fd_gradient(m, f, z, 1e-6); };
    }
    const auto dot = [](const Vec& a, const Vec& b) { return a.dot(b); };

    double delta = cfg.delta_0;
    res.status = TrStatus::max_iterations;
    const bool has_cs = constraints != nullptr && !constraints->empty();
    std::vector<ConstraintKind> kinds;
    if (has_cs)
        for (const auto& c : constraints->constraints) kinds.push_back(c.kind);

    for (int k = 0; k < cfg.max_outer; ++k) {
        const Vec g = gfn(res.x);
        const double gnorm = g.norm();
        TrIterationRecord rec;
        rec.k = k;
        rec.f = res.f;
        rec.grad_norm = gnorm;
        rec.delta = delta;

        if (gnorm < cfg.grad_tol) {
            res.trace.push_back(rec);
            res.status = TrStatus::converged;
            break;
        }

        HessianOp hess = fd_hessian_operator(m, gfn, res.x, g, cfg.hess_fd_step);

        Vec lin_c;
        Mat lin_g;
        if (has_cs) {
            const std::size_t nc = constraints->constraints.size();
            lin_c.resize(nc);
            lin_g.resize(res.x.size(), nc);
            for (std::size_t i = 0; i < nc; ++i) {
                lin_c[static_cast<Eigen::Index>(i)] = constraints->constraints[i].value(res.x);
                lin_g.col(static_cast<Eigen::Index>(i)) =
                    m.project_tangent(res.x, constraints->constraints[i].gradient(res.x));
            }
        }

        TcgOptions topts;
        topts.max_iterations =
            cfg.tcg_max_iterations > 0 ? std::min(cfg.tcg_max_iterations, m.dim()) : m.dim();
        TcgResult sub = tcg_solve(g, hess, delta, dot, topts, has_cs ? &lin_c : nullptr,
                                  has_cs ? &lin_g : nullptr, has_cs ? &kinds : nullptr);
        const Vec& eta = sub.step;
        const double step_norm = eta.norm();
        rec.step_norm = step_norm;

        if (step_norm < 1e-15) {
            delta *= 0.25;
            rec.rho = 0.0;
            res.trace.push_back(rec);
            continue;
        }

        const double model_decrease = -(g.dot(eta)) - 0.5 * eta.dot(sub.h_step);
        const Vec cand = m.exp(res.x, eta);
        const double f_cand = f(cand);
        if (!std::isfinite(f_cand)) {
            res.trace.push_back(rec);
            res.status = TrStatus::aborted_non_finite;
            break;
        }

        double rho;
        if (model_decrease <= 0.0) {
            rho = -1.0;
        } else {
            rho = (res.f - f_cand) / model_decrease;
        }
        rec.rho = rho;

        if (rho < 0.25) {
            delta *= 0.25;
        } else if (rho > 0.75 && step_norm >= delta * (1.0 - 1e-9)) {
            delta = std::min(2.0 * delta, cfg.delta_max);
        }

        bool feasible_cand = true;
        if (has_cs) feasible_cand = constraints->violation_norm(cand) <= constraints->xi;

        if (rho > cfg.rho_accept && feasible_cand) {
            res.x = cand;
            res.f = f_cand;
            rec.accepted = true;
        } else if (!feasible_cand) {
            // Nonlinear constraint violated by a linearly feasible step.
            delta = std::min(delta, 0.25 * std::max(step_norm, 1e-12));
        }
        res.trace.push_back(rec);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian
// ---------------------------------------------------------------------------

AugmentedLagrangian::AugmentedLagrangian(const Manifold& m, Objective f, GradientFn grad,
                                         ConstraintSet cs, Vec x0, AlConfig cfg)
    : m_(m),
      f_(std::move(f)),
      grad_(std::move(grad)),
      cs_(std::move(cs)),
      cfg_(cfg),
      x_(std::move(x0)),
      mu_(cfg.mu_0) {
    std::size_t n_eq = 0, n_ineq = 0;
    for (const auto& c : cs_.constraints)
        (c.kind == ConstraintKind::equality ? n_eq : n_ineq)++;
    lambda_ = Vec::Zero(static_cast<Eigen::Index>(n_eq));
    gamma_ = Vec::Zero(static_cast<Eigen::Index>(n_ineq));
    prev_violation_ = cs_.violation_norm(x_);
    if (!(cfg_.mu_0 > 0.0)) throw std::invalid_argument("AlConfig: mu_0 must be > 0");
}

double AugmentedLagrangian::penalized(const Vec& x) const {
    double val = f_(x);
    Eigen::Index ie = 0, ii = 0;
    for (const auto& c : cs_.constraints) {
        const double cv = c.value(x);
        if (c.kind == ConstraintKind::equality) {
            const double t = cv + lambda_[ie] / mu_;
            val += 0.5 * mu_ * t * t - 0.5 * lambda_[ie] * lambda_[ie] / mu_;
            ++ie;
        } else {
            const double t = std::max(0.0, gamma_[ii] / mu_ - cv);
            val += 0.5 * mu_ * t * t - 0.5 * gamma_[ii] * gamma_[ii] / mu_;
            ++ii;
        }
    }
    return val;
}

Vec AugmentedLagrangian::penalized_grad(const Vec& x) const {
    Vec g = grad_ ? grad_(x) : fd_gradient(m_, f_, x, 1e-6);
    Eigen::Index ie = 0, ii = 0;
    for (const auto& c : cs_.constraints) {
        const double cv = c.value(x);
        if (c.kind == ConstraintKind::equality) {
            const double w = mu_ * (cv + lambda_[ie] / mu_);
            if (w != 0.0) g += w * m_.project_tangent(x, c.gradient(x));
            ++ie;
        } else {
            const double t = std::max(0.0, gamma_[ii] / mu_ - cv);
            if (t > 0.0) g -= mu_ * t * m_.project_tangent(x, c.gradient(x));
            ++ii;
        }
    }
    return g;
}

double AugmentedLagrangian::violation() const { return cs_.violation_norm(x_); }

void AugmentedLagrangian::step() {
    Objective obj = [this](const Vec& x) { return penalized(x); };
    GradientFn pg = [this](const Vec& x) { return penalized_grad(x); };
    TrResult inner = trust_region_minimize(m_, obj, pg, x_, cfg_.inner);
    x_ = inner.x;

    Eigen::Index ie = 0, ii = 0;
    for (const auto& c : cs_.constraints) {
        const double cv = c.value(x_);
        if (c.kind == ConstraintKind::equality) {
            lambda_[ie] += mu_ * cv;
            ++ie;
        } else {
            gamma_[ii] = std::max(0.0, gamma_[ii] - mu_ * cv);
            ++ii;
        }
    }
    const double viol = cs_.violation_norm(x_);
    if (viol > cfg_.violation_tol && viol > cfg_.stall_ratio * prev_violation_)
        mu_ = std::min(mu_ * cfg_.mu_factor, cfg_.mu_max);
    prev_violation_ = viol;
    ++rounds_;
}

Vec augmented_lagrangian_minimize(const Manifold& m, const Objective& f, const GradientFn& grad,
                                  const ConstraintSet& cs, const Vec& x0, const AlConfig& cfg) {
    AugmentedLagrangian al(m, f, grad, cs, x0, cfg);
    for (int k = 0; k < cfg.max_outer; ++k) {
        al.step();
        if (al.violation() <= cfg.violation_tol && k >= 1) break;
    }
    if (al.violation() > cfg.infeasible_tol)
        throw InfeasibleError("augmented_lagrangian_minimize: constraint violation " +
                              std::to_string(al.violation()));
    return al.x();
}

ConstraintSet spd_eigenvalue_bound_constraints(const Spd& m, double lo, double hi, double xi) {
    if (!(lo > 0.0) || !(hi > lo))
        throw std::invalid_argument("spd_eigenvalue_bound_constraints: bad bounds");
    const int d = m.matrix_dim();

    auto averaged_projector = [d](const SymEig& e, bool top) -> Mat {
        const Eigen::Index n = e.lam.size();
        const double pivot = top ? e.lam[n - 1] : e.lam[0];
        Mat p = Mat::Zero(d, d);
        int count = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(e.lam[i] - pivot) <= 1e-8) {
                p += e.q.col(i) * e.q.col(i).transpose();
                ++count;
            }
        }
        return p / count;
    };

    ConstraintSet cs;
    cs.xi = xi;
    Constraint c_lo;
    c_lo.kind = ConstraintKind::inequality;
    c_lo.value = [&m, lo](const Vec& x) { return min_eigenvalue(m.to_mat(x)) - lo; };
    c_lo.gradient = [&m, averaged_projector](const Vec& x) {
        SymEig e = eig_sym(m.to_mat(x));
        return m.to_vec(averaged_projector(e, false));
    };
    Constraint c_hi;
    c_hi.kind = ConstraintKind::inequality;
    c_hi.value = [&m, hi](const Vec& x) { return hi - max_eigenvalue(m.to_mat(x)); };
    c_hi.gradient = [&m, averaged_projector](const Vec& x) {
        SymEig e = eig_sym(m.to_mat(x));
        return m.to_vec(Mat(-averaged_projector(e, true)));
    };
    cs.constraints.push_back(std::move(c_lo));
    cs.constraints.push_back(std::move(c_hi));
    return cs;
}

}  // namespace geobo
