#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "geobo/manifold.hpp"
#include "geobo/parallel.hpp"

namespace geobo {

using Objective = std::function<double(const Vec&)>;
// Riemannian gradient (tangent at the query point).
using GradientFn = std::function<Vec(const Vec&)>;
// Linear operator on the tangent space at the current iterate.
using HessianOp = std::function<Vec(const Vec&)>;

struct TrustRegionConfig {
    double delta_max = 1.0;
    double delta_0 = 0.125;
    double rho_accept = 0.1;  // in [0, 1/4)
    int max_outer = 100;
    double grad_tol = 1e-6;
    double hess_fd_step = 1e-4;
    int tcg_max_iterations = 0;  // 0 means the tangent dimension

    void validate() const;
};

// Defaults scaled to the manifold: delta_max = injectivity scale, delta_0 an
// eighth of it.
TrustRegionConfig default_tr_config(const Manifold& m);

enum class ConstraintKind { equality, inequality };  // inequality means c(x) >= 0

struct Constraint {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;  // ambient gradient
    ConstraintKind kind = ConstraintKind::inequality;
};

struct ConstraintSet {
    std::vector<Constraint> constraints;
    double xi = 1e-8;  // feasibility tolerance on ||(c)^-||

    bool empty() const { return constraints.empty(); }
    // Vector of (c)^- residuals: c for equalities, min(0, c) for inequalities.
    Vec violation(const Vec& x) const;
    double violation_norm(const Vec& x) const;
};

struct TrIterationRecord {
    int k = 0;
    double f = 0.0;
    double grad_norm = 0.0;
    double delta = 0.0;
    double rho = 0.0;
    bool accepted = false;
    double step_norm = 0.0;
};

enum class TrStatus { converged, max_iterations, aborted_non_finite };

struct TrResult {
    Vec x;
    double f = 0.0;
    TrStatus status = TrStatus::converged;
    std::vector<TrIterationRecord> trace;
};

// One record per outer iteration in delimited text.
void write_trace(std::ostream& os, const std::vector<TrIterationRecord>& trace);

// Positive root tau of ||nu + tau * delta_dir|| = radius; requires
// ||nu|| <= radius and delta_dir != 0.
double boundary_tau(const Vec& nu, const Vec& delta_dir, double radius,
                    const std::function<double(const Vec&, const Vec&)>& inner);

struct TcgOptions {
    int max_iterations = 0;  // 0 means the tangent dimension
    // Residual stop: ||r_j|| <= ||r_0|| * min(||r_0||^theta, kappa).
    double kappa = 0.1;
    double theta = 0.5;
};

struct TcgResult {
    Vec step;
    Vec h_step;  // H applied to step, accumulated during the recursion
    bool hit_boundary = false;
    bool clamped_by_constraint = false;
    std::vector<double> step_norms;  // ||nu_j|| per iteration, non-decreasing
};

// Steihaug-Toint truncated CG for the trust-region subproblem, with optional
// linearized constraint clamping. `lin_c` and `lin_g` hold the constraint
// values and tangent-space gradients at the linearization point.
TcgResult tcg_solve(const Vec& grad, const HessianOp& hess, double radius,
                    const std::function<double(const Vec&, const Vec&)>& inner,
                    const TcgOptions& opts = {}, const Vec* lin_c = nullptr,
                    const Mat* lin_g = nullptr,
                    const std::vector<ConstraintKind>* kinds = nullptr);

// Largest tau >= 0 keeping nu + tau * delta linearized-feasible, and whether
// the full step had to be cut. Requires nu feasible.
std::pair<double, bool> clamp_step_to_constraints(const Vec& nu, const Vec& delta_dir,
                                                  const Vec& lin_c, const Mat& lin_g,
                                                  const std::vector<ConstraintKind>& kinds);

// Forward-difference Riemannian gradient along an orthonormal tangent basis,
// probing through the retraction. Components are evaluated in parallel.
Vec fd_gradient(const Manifold& m, const Objective& f, const Vec& x, double step = 1e-6,
                Exec exec = Exec::parallel);

// Finite-difference Hessian operator from gradient calls, with tangent
// re-projection of the probed gradient.
HessianOp fd_hessian_operator(const Manifold& m, const GradientFn& grad, const Vec& x,
                              const Vec& grad_at_x, double step);

// Riemannian trust-region minimization. `grad` may be null, in which case
// forward differences are used. Radius updates: shrink by 1/4 when rho < 1/4,
// double (capped) when rho > 3/4 at the boundary; accept iff rho > rho_accept.
TrResult trust_region_minimize(const Manifold& m, const Objective& f, const GradientFn& grad,
                               const Vec& x0, const TrustRegionConfig& cfg,
                               const ConstraintSet* constraints = nullptr);

struct AlConfig {
    double mu_0 = 10.0;
    double mu_factor = 10.0;
    double mu_max = 1e10;
    int max_outer = 20;
    double violation_tol = 1e-6;
    double infeasible_tol = 1e-4;
    double stall_ratio = 0.25;
    TrustRegionConfig inner;
};

// Incremental augmented-Lagrangian state; step() runs one outer round
// (inner trust-region solve plus multiplier and penalty updates).
class AugmentedLagrangian {
public:
    AugmentedLagrangian(const Manifold& m, Objective f, GradientFn grad, ConstraintSet cs,
                        Vec x0, AlConfig cfg);

    void step();
    const Vec& x() const { return x_; }
    void set_x(const Vec& x) { x_ = x; }
    double violation() const;
    int rounds_done() const { return rounds_; }

private:
    const Manifold& m_;
    Objective f_;
    GradientFn grad_;
    ConstraintSet cs_;
    AlConfig cfg_;
    Vec x_;
    Vec lambda_;  // equality multipliers
    Vec gamma_;   // inequality multipliers (>= 0)
    double mu_;
    double prev_violation_;
    int rounds_ = 0;

    double penalized(const Vec& x) const;
    Vec penalized_grad(const Vec& x) const;
};

// One-shot augmented-Lagrangian minimization; throws InfeasibleError when the
// final violation exceeds cfg.infeasible_tol.
Vec augmented_lagrangian_minimize(const Manifold& m, const Objective& f, const GradientFn& grad,
                                  const ConstraintSet& cs, const Vec& x0, const AlConfig& cfg);

// Smooth inequality constraints lo <= eigenvalues(X) <= hi for the SPD
// manifold, with averaged projectors across eigenvalues that coincide within
// 1e-8.
ConstraintSet spd_eigenvalue_bound_constraints(const Spd& m, double lo, double hi,
                                               double xi = 1e-8);

}  // namespace geobo
