#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "geobo/errors.hpp"
#include "geobo/trust_region.hpp"

using namespace geobo;

namespace {

constexpr double kPi = std::numbers::pi;

const auto dot = [](const Vec& a, const Vec& b) { return a.dot(b); };

HessianOp matrix_op(const Mat& h) {
    return [h](const Vec& v) -> Vec { return h * v; };
}

}  // namespace

TEST_CASE("boundary_tau closed forms") {
    Vec nu = Vec::Zero(3);
    Vec dir = Vec::Unit(3, 0);
    CHECK(boundary_tau(nu, dir, 2.0, dot) == doctest::Approx(2.0).epsilon(1e-14));

    Vec nu2 = 1.5 * Vec::Unit(3, 1);
    CHECK(boundary_tau(nu2, dir, 1.5, dot) == doctest::Approx(0.0));

    Rng rng = make_rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        Vec n = normal_vec(4, rng);
        const double radius = n.norm() + uniform(rng, 0.1, 2.0);
        Vec d = normal_vec(4, rng);
        const double tau = boundary_tau(n, d, radius, dot);
        CHECK(tau >= 0.0);
        CHECK((n + tau * d).norm() == doctest::Approx(radius).epsilon(1e-10));
    }
}

TEST_CASE("tcg returns the Newton step for identity Hessian") {
    Rng rng = make_rng(7);
    Vec g = normal_vec(5, rng);
    g *= 0.5 / g.norm();
    TcgResult r = tcg_solve(g, matrix_op(Mat::Identity(5, 5)), 10.0, dot);
    CHECK((r.step + g).norm() < 1e-12);
    CHECK_FALSE(r.hit_boundary);

    TcgResult zero = tcg_solve(Vec(Vec::Zero(5)), matrix_op(Mat::Identity(5, 5)), 1.0, dot);
    CHECK(zero.step.norm() == 0.0);
}

TEST_CASE("tcg matches a dense interior oracle on random SPD Hessians") {
    Rng rng = make_rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        Mat h = random_spd_with_eig_bounds(5, 0.5, 4.0, rng);
        Vec g = normal_vec(5, rng);
        Vec newton = -h.ldlt().solve(g);
        const double radius = newton.norm() * 1.5 + 0.1;
        TcgOptions opts;
        opts.max_iterations = 5;  // full Krylov space, exact in exact arithmetic
        opts.kappa = 0.0;
        opts.theta = 1.0;
        TcgResult r = tcg_solve(g, matrix_op(h), radius, dot, opts);
        CHECK((r.step - newton).norm() < 1e-6 * std::max(1.0, newton.norm()));
        // Model decrease is nonnegative and the cached H*step is consistent.
        CHECK((r.h_step - h * r.step).norm() < 1e-8);
        const double md = -g.dot(r.step) - 0.5 * r.step.dot(r.h_step);
        CHECK(md >= 0.0);
    }
}

TEST_CASE("tcg steps stay inside the radius with non-decreasing norms") {
    Rng rng = make_rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        Mat a = normal_mat(6, 6, rng);
        Mat h = 0.5 * (a + a.transpose());  // possibly indefinite
        Vec g = normal_vec(6, rng);
        const double radius = uniform(rng, 0.1, 1.0);
        TcgResult r = tcg_solve(g, matrix_op(h), radius, dot);
        CHECK(r.step.norm() <= radius * (1.0 + 1e-10));
        for (std::size_t j = 1; j < r.step_norms.size(); ++j) {
            CHECK(r.step_norms[j] >= r.step_norms[j - 1] - 1e-12);
            CHECK(r.step_norms[j] <= radius * (1.0 + 1e-10));
        }
    }
}

TEST_CASE("clamp_step_to_constraints trivial and crossing cases") {
    // Single inequality c(x) = 1 - x_0 >= 0, linearized at the origin.
    Vec lin_c(1);
    lin_c << 1.0;
    Mat lin_g(3, 1);
    lin_g.setZero();
    lin_g(0, 0) = -1.0;
    std::vector<ConstraintKind> kinds{ConstraintKind::inequality};

    Vec nu = Vec::Zero(3);
    Vec inactive = 0.5 * Vec::Unit(3, 0);
    auto [tau_a, cut_a] = clamp_step_to_constraints(nu, inactive, lin_c, lin_g, kinds);
    CHECK_FALSE(cut_a);
    CHECK(tau_a == 1.0);

    Vec crossing = 4.0 * Vec::Unit(3, 0);
    auto [tau_b, cut_b] = clamp_step_to_constraints(nu, crossing, lin_c, lin_g, kinds);
    CHECK(cut_b);
    CHECK(tau_b == doctest::Approx(0.25).epsilon(1e-12));
    Vec clamped = nu + tau_b * crossing;
    CHECK(std::min(0.0, lin_c[0] + lin_g.col(0).dot(clamped)) == doctest::Approx(0.0));

    // Already on the boundary, stepping outward.
    Vec on_boundary = Vec::Unit(3, 0);
    auto [tau_c, cut_c] =
        clamp_step_to_constraints(on_boundary, Vec(0.5 * Vec::Unit(3, 0)), lin_c, lin_g, kinds);
    CHECK(cut_c);
    CHECK(tau_c == doctest::Approx(0.0));
}

TEST_CASE("fd hessian reproduces quadratics and is linear") {
    Euclidean dom(2);
    Mat a(2, 2);
    a << 1.0, 0.0, 0.0, 2.0;
    GradientFn grad = [&a](const Vec& x) -> Vec { return a * x; };
    Rng rng = make_rng(17);
    Vec x = normal_vec(2, rng);
    HessianOp h = fd_hessian_operator(dom, grad, x, grad(x), 1e-6);

    Vec e1 = Vec::Unit(2, 0);
    CHECK((h(e1) - a.col(0)).norm() < 1e-6);
    Vec u = normal_vec(2, rng);
    CHECK((h(Vec(3.0 * u)) - 3.0 * h(u)).norm() < 1e-6 * std::max(1.0, u.norm()));
}

TEST_CASE("fd hessian symmetry defect stays small on smooth functions") {
    Sphere dom(3);
    Rng rng = make_rng(19);
    Vec x = dom.random_point(rng);
    GradientFn grad = [&](const Vec& z) -> Vec {
        Vec ambient(4);
        ambient << 3.0 * std::cos(3.0 * z[0]), 2.0 * z[1] * z[2], z[1] * z[1], 1.0;
        return dom.project_tangent(z, ambient);
    };
    Vec g = grad(x);
    HessianOp h = fd_hessian_operator(dom, grad, x, g, 1e-5);
    for (int rep = 0; rep < 10; ++rep) {
        Vec u = dom.random_tangent(x, rng);
        Vec v = dom.random_tangent(x, rng);
        u /= u.norm();
        v /= v.norm();
        CHECK(std::abs(h(u).dot(v) - u.dot(h(v))) <= 1e-4);
    }
}

TEST_CASE("trust region reaches sphere and SPD analytic optima") {
    Rng rng = make_rng(23);

    Sphere s2(2);
    Vec target = s2.random_point(rng);
    Objective f_sphere = [&](const Vec& x) {
        const double d = s2.distance(x, target);
        return 0.5 * d * d;
    };
    for (int rep = 0; rep < 20; ++rep) {
        Vec x0 = s2.random_point(rng);
        TrustRegionConfig cfg = default_tr_config(s2);
        cfg.max_outer = 50;
        cfg.grad_tol = 1e-9;
        TrResult r = trust_region_minimize(s2, f_sphere, nullptr, x0, cfg);
        CHECK(s2.distance(r.x, target) < 1e-6);
        CHECK(static_cast<int>(r.trace.size()) <= 50);
    }

    Spd s3(3);
    Mat t = s3.to_mat(s3.random_point(rng));
    Mat log_t = sym_logm(t);
    Objective f_spd = [&](const Vec& x) { return (sym_logm(s3.to_mat(x)) - log_t).squaredNorm(); };
    for (int rep = 0; rep < 20; ++rep) {
        Vec x0 = s3.random_point(rng);
        TrustRegionConfig cfg = default_tr_config(s3);
        cfg.max_outer = 50;
        cfg.grad_tol = 1e-10;
        TrResult r = trust_region_minimize(s3, f_spd, nullptr, x0, cfg);
        CHECK(spd_log_euclidean_distance(s3.to_mat(r.x), t) < 1e-5);
    }
}

TEST_CASE("trust region accepted objective values strictly decrease") {
    Sphere s4(4);
    Rng rng = make_rng(29);
    Vec target = s4.random_point(rng);
    Objective f = [&](const Vec& x) {
        const double d = s4.distance(x, target);
        return 0.5 * d * d + 0.1 * std::sin(4.0 * x[0]);
    };
    TrResult r = trust_region_minimize(s4, f, nullptr, s4.random_point(rng),
                                       default_tr_config(s4));
    double last_accepted = std::numeric_limits<double>::infinity();
    for (const auto& rec : r.trace) {
        if (!rec.accepted) continue;
        CHECK(rec.f < last_accepted);
        last_accepted = rec.f;
    }
}

TEST_CASE("trust region radius follows the quarter/double rule") {
    Sphere s3(3);
    Rng rng = make_rng(31);
    Vec target = s3.random_point(rng);
    Objective f = [&](const Vec& x) {
        const double d = s3.distance(x, target);
        return 0.5 * d * d + 0.2 * std::cos(5.0 * x[1]);
    };
    TrustRegionConfig cfg = default_tr_config(s3);
    TrResult r = trust_region_minimize(s3, f, nullptr, s3.random_point(rng), cfg);
    for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
        const auto& cur = r.trace[i];
        const auto& next = r.trace[i + 1];
        CHECK(next.delta <= cfg.delta_max * (1.0 + 1e-12));
        if (cur.step_norm == 0.0) continue;
        if (cur.rho < 0.25) {
            CHECK(next.delta == doctest::Approx(0.25 * cur.delta));
        } else if (cur.rho > 0.75 && cur.step_norm >= cur.delta * (1.0 - 1e-9)) {
            CHECK(next.delta == doctest::Approx(std::min(2.0 * cur.delta, cfg.delta_max)));
        } else if (cur.rho >= 0.25) {
            CHECK(next.delta == doctest::Approx(cur.delta));
        }
    }
}

TEST_CASE("trust region stops immediately at an optimum") {
    Euclidean dom(3);
    Objective f = [](const Vec& x) { return x.squaredNorm(); };
    GradientFn g = [](const Vec& x) -> Vec { return 2.0 * x; };
    TrustRegionConfig cfg;
    cfg.delta_max = 1.0;
    cfg.delta_0 = 0.1;
    cfg.grad_tol = 1e-8;
    TrResult r = trust_region_minimize(dom, f, g, Vec(Vec::Zero(3)), cfg);
    CHECK(r.status == TrStatus::converged);
    CHECK(static_cast<int>(r.trace.size()) <= 1);
    CHECK(r.x.norm() == 0.0);
}

TEST_CASE("trust region aborts on non-finite objectives") {
    Euclidean dom(2);
    Objective f = [](const Vec& x) {
        return x.norm() > 0.05 ? x.squaredNorm() : std::numeric_limits<double>::quiet_NaN();
    };
    Vec x0(2);
    x0 << 1.0, 0.0;
    TrustRegionConfig cfg;
    cfg.delta_max = 2.0;
    cfg.delta_0 = 0.25;
    TrResult r = trust_region_minimize(dom, f, nullptr, x0, cfg);
    CHECK(r.status == TrStatus::aborted_non_finite);
    CHECK_FALSE(r.trace.empty());
}

TEST_CASE("euclidean trust region matches dense solves on convex quadratics") {
    Rng rng = make_rng(37);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 4;
        Mat h = random_spd_with_eig_bounds(n, 0.5, 3.0, rng);
        Vec b = normal_vec(n, rng);
        Objective f = [&](const Vec& x) { return 0.5 * x.dot(h * x) - b.dot(x); };
        GradientFn g = [&](const Vec& x) -> Vec { return h * x - b; };
        Euclidean dom(n);
        TrustRegionConfig cfg;
        cfg.delta_max = 50.0;
        cfg.delta_0 = 1.0;
        cfg.grad_tol = 1e-10;
        cfg.max_outer = 200;
        TrResult r = trust_region_minimize(dom, f, g, Vec(Vec::Zero(n)), cfg);
        Vec ref = h.ldlt().solve(b);
        CHECK(std::abs(r.f - f(ref)) < 1e-8 * std::max(1.0, std::abs(f(ref))));
    }
}

TEST_CASE("constrained trust region keeps iterates feasible") {
    Spd dom(3, 0.001, 5.0);  // feasible starting samples
    ConstraintSet cs = spd_eigenvalue_bound_constraints(dom, 0.001, 5.0);
    Rng rng = make_rng(41);
    Mat t = dom.to_mat(dom.random_point(rng));
    Mat log_t = sym_logm(t);
    Objective f = [&](const Vec& x) { return (sym_logm(dom.to_mat(x)) - log_t).squaredNorm(); };
    for (int rep = 0; rep < 5; ++rep) {
        Vec x0 = dom.random_point(rng);
        TrustRegionConfig cfg = default_tr_config(dom);
        cfg.max_outer = 40;
        TrResult r = trust_region_minimize(dom, f, nullptr, x0, cfg, &cs);
        CHECK(cs.violation_norm(r.x) <= cs.xi);
    }
}

TEST_CASE("augmented lagrangian on classic constrained problems") {
    // (x - 2)^2 subject to x <= 1.
    {
        Euclidean dom(1);
        Objective f = [](const Vec& x) { return (x[0] - 2.0) * (x[0] - 2.0); };
        GradientFn g = [](const Vec& x) -> Vec {
            Vec r(1);
            r[0] = 2.0 * (x[0] - 2.0);
            return r;
        };
        ConstraintSet cs;
        Constraint c;
        c.kind = ConstraintKind::inequality;
        c.value = [](const Vec& x) { return 1.0 - x[0]; };
        c.gradient = [](const Vec&) {
            Vec r(1);
            r[0] = -1.0;
            return r;
        };
        cs.constraints.push_back(c);
        AlConfig cfg;
        cfg.inner.delta_max = 4.0;
        cfg.inner.delta_0 = 0.5;
        cfg.inner.max_outer = 60;
        Vec x0(1);
        x0 << 0.0;
        Vec x = augmented_lagrangian_minimize(dom, f, g, cs, x0, cfg);
        CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Minimize -x_3 on S^2 subject to x_1 = 0.
    {
        Sphere dom(2);
        Objective f = [](const Vec& x) { return -x[2]; };
        ConstraintSet cs;
        Constraint c;
        c.kind = ConstraintKind::equality;
        c.value = [](const Vec& x) { return x[0]; };
        c.gradient = [](const Vec&) { return Vec(Vec::Unit(3, 0)); };
        cs.constraints.push_back(c);
        AlConfig cfg;
        cfg.inner = default_tr_config(dom);
        cfg.inner.max_outer = 60;
        Vec x0(3);
        x0 << 0.6, 0.64, -0.48;
        x0 /= x0.norm();
        Vec x = augmented_lagrangian_minimize(dom, f, nullptr, cs, x0, cfg);
        CHECK(std::abs(x[0]) < 1e-6);
        CHECK(x[2] == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Feasible unconstrained optimum: matches the plain trust region.
    {
        Euclidean dom(2);
        Objective f = [](const Vec& x) { return (x - Vec(Vec::Constant(2, 0.25))).squaredNorm(); };
        ConstraintSet cs;
        Constraint c;
        c.kind = ConstraintKind::inequality;
        c.value = [](const Vec& x) { return 1.0 - x.squaredNorm(); };
        c.gradient = [](const Vec& x) { return Vec(-2.0 * x); };
        cs.constraints.push_back(c);
        AlConfig cfg;
        cfg.inner.delta_max = 2.0;
        cfg.inner.delta_0 = 0.25;
        Vec x0 = Vec::Zero(2);
        Vec x = augmented_lagrangian_minimize(dom, f, nullptr, cs, x0, cfg);
        TrResult plain = trust_region_minimize(dom, f, nullptr, x0, cfg.inner);
        CHECK((x - plain.x).norm() < 1e-8);
    }
}

TEST_CASE("augmented lagrangian reports infeasibility") {
    Euclidean dom(1);
    Objective f = [](const Vec& x) { return x[0] * x[0]; };
    ConstraintSet cs;
    // Contradictory equalities x = 1 and x = -1.
    for (double target : {1.0, -1.0}) {
        Constraint c;
        c.kind = ConstraintKind::equality;
        c.value = [target](const Vec& x) { return x[0] - target; };
        c.gradient = [](const Vec&) { return Vec(Vec::Ones(1)); };
        cs.constraints.push_back(c);
    }
    AlConfig cfg;
    cfg.inner.delta_max = 2.0;
    cfg.inner.delta_0 = 0.25;
    cfg.max_outer = 5;
    CHECK_THROWS_AS(augmented_lagrangian_minimize(dom, f, nullptr, cs, Vec(Vec::Zero(1)), cfg),
                    InfeasibleError);
}

TEST_CASE("trace dump has one row per outer iteration") {
    Euclidean dom(2);
    Objective f = [](const Vec& x) { return x.squaredNorm(); };
    TrustRegionConfig cfg;
    cfg.delta_max = 1.0;
    cfg.delta_0 = 0.2;
    cfg.max_outer = 15;
    Vec x0(2);
    x0 << 3.0, -1.0;
    TrResult r = trust_region_minimize(dom, f, nullptr, x0, cfg);
    std::ostringstream os;
    write_trace(os, r.trace);
    int lines = 0;
    for (char ch : os.str())
        if (ch == '\n') ++lines;
    CHECK(lines == static_cast<int>(r.trace.size()) + 1);
}
